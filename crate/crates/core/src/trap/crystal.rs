//! Linear ion-crystal equilibria, axial normal modes and dark-ion mass
//! inference.
//!
//! The chain sits in a common static potential: each ion of charge q sees
//! the same axial curvature phi'' (V/m^2), so the potential energy is
//! `sum_i q_i phi'' z_i^2 / 2 + Coulomb pair terms`.  Equilibrium positions
//! are therefore independent of the ion masses; only the mode frequencies
//! feel them.

use nalgebra::DMatrix;

use super::pseudo::IonSpecies;
use crate::error::{CoreError, CoreResult};
use crate::units::COULOMB;

/// Ordered chain with the common-potential reference.
#[derive(Debug, Clone)]
pub struct CrystalConfig {
    /// Species along the chain (axial order).
    pub species: Vec<IonSpecies>,
    /// Axial angular frequency of the first (reference) species, rad/s.
    pub omega_ax_ref: f64,
}

impl CrystalConfig {
    /// Shared axial curvature phi'' (V/m^2) implied by the reference
    /// species' frequency.
    pub fn curvature(&self) -> f64 {
        let m = self.species[0].mass_kg();
        let q = self.species[0].charge_coulomb();
        m * self.omega_ax_ref * self.omega_ax_ref / q
    }

    /// Characteristic length of the chain.
    pub fn length_scale(&self) -> f64 {
        let q = self.species[0].charge_coulomb();
        (COULOMB * q / self.curvature()).cbrt()
    }
}

/// Axial normal-mode spectrum.
#[derive(Debug, Clone)]
pub struct ModeSpectrum {
    /// Angular frequencies, ascending, rad/s; one mode per ion.
    pub omega: Vec<f64>,
    /// Mass-weighted eigenvectors (orthonormal), row per mode.
    pub vectors: Vec<Vec<f64>>,
    /// Equilibrium positions used, m.
    pub positions: Vec<f64>,
}

impl ModeSpectrum {
    pub fn frequencies_hz(&self) -> Vec<f64> {
        self.omega
            .iter()
            .map(|w| w / (2.0 * core::f64::consts::PI))
            .collect()
    }
}

fn energy_gradient(cfg: &CrystalConfig, z: &[f64]) -> Vec<f64> {
    let phi2 = cfg.curvature();
    let n = z.len();
    let mut g = vec![0.0; n];
    for i in 0..n {
        let qi = cfg.species[i].charge_coulomb();
        g[i] = qi * phi2 * z[i];
        for j in 0..n {
            if j != i {
                let qj = cfg.species[j].charge_coulomb();
                let d = z[i] - z[j];
                let s = if d > 0.0 { 1.0 } else { -1.0 };
                // d/dz_i of k qi qj / |z_i - z_j|.
                g[i] -= COULOMB * qi * qj * s / (d * d);
            }
        }
    }
    g
}

fn energy_hessian(cfg: &CrystalConfig, z: &[f64]) -> DMatrix<f64> {
    let phi2 = cfg.curvature();
    let n = z.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let qi = cfg.species[i].charge_coulomb();
        let mut diag = qi * phi2;
        for j in 0..n {
            if j != i {
                let qj = cfg.species[j].charge_coulomb();
                let d = (z[i] - z[j]).abs();
                let c = 2.0 * COULOMB * qi * qj / (d * d * d);
                diag += c;
                h[(i, j)] = -c;
            }
        }
        h[(i, i)] = diag;
    }
    h
}

/// Minimize the chain energy; positions returned in ascending order.
pub fn equilibrium_positions(cfg: &CrystalConfig) -> CoreResult<Vec<f64>> {
    let n = cfg.species.len();
    if n == 0 {
        return Err(CoreError::Config("empty crystal".into()));
    }
    if cfg
        .species
        .iter()
        .any(|s| s.charge.signum() != cfg.species[0].charge.signum())
    {
        return Err(CoreError::Config(
            "crystal requires same-sign charges".into(),
        ));
    }
    if n == 1 {
        return Ok(vec![0.0]);
    }
    let ell = cfg.length_scale();
    let mut z: Vec<f64> = (0..n)
        .map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) * ell)
        .collect();

    let f_char = cfg.species[0].charge_coulomb() * cfg.curvature() * ell;
    let tol = 1e-12 * f_char;
    for _ in 0..200 {
        let g = energy_gradient(cfg, &z);
        let gnorm = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if gnorm <= tol {
            return Ok(z);
        }
        let h = energy_hessian(cfg, &z);
        let gv = nalgebra::DVector::from_column_slice(&g);
        let Some(step) = h.lu().solve(&gv) else {
            return Err(CoreError::Minimization(
                "singular Hessian in crystal equilibrium".into(),
            ));
        };
        // Clamp so ions cannot cross within one update.
        let min_gap = z.windows(2).map(|w| w[1] - w[0]).fold(f64::MAX, f64::min);
        let max_step = step.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let damp = if max_step > 0.4 * min_gap {
            0.4 * min_gap / max_step
        } else {
            1.0
        };
        for i in 0..n {
            z[i] -= damp * step[i];
        }
    }
    Err(CoreError::Minimization(
        "crystal equilibrium did not converge".into(),
    ))
}

/// Axial normal modes via the mass-weighted Hessian at equilibrium.
pub fn normal_modes(cfg: &CrystalConfig) -> CoreResult<ModeSpectrum> {
    let z = equilibrium_positions(cfg)?;
    let h = energy_hessian(cfg, &z);
    let n = z.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mi = cfg.species[i].mass_kg();
            let mj = cfg.species[j].mass_kg();
            d[(i, j)] = h[(i, j)] / (mi * mj).sqrt();
        }
    }
    let eig = d.symmetric_eigen();
    let mut modes: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|k| {
            (
                eig.eigenvalues[k],
                eig.eigenvectors.column(k).iter().copied().collect(),
            )
        })
        .collect();
    for (l, _) in &modes {
        if *l <= 0.0 {
            return Err(CoreError::Unstable(format!(
                "non-positive-definite mode matrix: eigenvalue {l:.3e}"
            )));
        }
    }
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(ModeSpectrum {
        omega: modes.iter().map(|(l, _)| l.sqrt()).collect(),
        vectors: modes.into_iter().map(|(_, v)| v).collect(),
        positions: z,
    })
}

/// Outcome of a dark-ion mass inference.
#[derive(Debug, Clone)]
pub enum MassInference {
    Identified {
        mass_amu: f64,
        /// 1-sigma propagated from the frequency uncertainty.
        sigma_amu: f64,
    },
    Unidentifiable {
        reason: String,
    },
}

/// Mass search bracket, amu.
const MASS_LO: f64 = 1.0;
const MASS_HI: f64 = 500.0;

/// Infer the mass of a dark ion paired with a known species from a
/// measured crystal mode frequency.
///
/// The crystal is `[known, dark]`; `omega_ax_ref` is the single-ion axial
/// angular frequency of the known species; `mode_index` selects the mode
/// branch (0 = lowest).  The dark charge is assumed +1 unless configured
/// in `dark_charge`; a charge-to-mass degeneracy remains if it is wrong.
pub fn infer_dark_mass(
    measured_hz: f64,
    sigma_hz: f64,
    known: &IonSpecies,
    omega_ax_ref: f64,
    mode_index: usize,
    dark_charge: i32,
) -> CoreResult<MassInference> {
    if mode_index > 1 {
        return Err(CoreError::Config(
            "two-ion crystal has modes 0 and 1".into(),
        ));
    }
    let mode_hz = |mass_amu: f64| -> CoreResult<f64> {
        let cfg = CrystalConfig {
            species: vec![
                known.clone(),
                IonSpecies::new("dark", mass_amu, dark_charge)?,
            ],
            omega_ax_ref,
        };
        Ok(normal_modes(&cfg)?.frequencies_hz()[mode_index])
    };

    let g_lo = mode_hz(MASS_LO)? - measured_hz;
    let g_hi = mode_hz(MASS_HI)? - measured_hz;
    if g_lo * g_hi > 0.0 {
        return Ok(MassInference::Unidentifiable {
            reason: format!(
                "measured {measured_hz:.1} Hz outside the mode-{mode_index} range [{:.1}, {:.1}] Hz for masses {MASS_LO}-{MASS_HI} amu",
                mode_hz(MASS_HI)?,
                mode_hz(MASS_LO)?
            ),
        });
    }
    let (mut lo, mut hi) = (MASS_LO, MASS_HI);
    let mut f_lo = g_lo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = mode_hz(mid)? - measured_hz;
        if f_lo * f_mid <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
        if (hi - lo) < 1e-9 * mid {
            break;
        }
    }
    let mass = 0.5 * (lo + hi);
    // Local sensitivity df/dm for the uncertainty propagation.
    let dm = (1e-4 * mass).max(1e-6);
    let dfdm = (mode_hz(mass + dm)? - mode_hz(mass - dm)?) / (2.0 * dm);
    let sigma_amu = if dfdm.abs() > 0.0 {
        (sigma_hz / dfdm).abs()
    } else {
        f64::INFINITY
    };
    Ok(MassInference::Identified {
        mass_amu: mass,
        sigma_amu,
    })
}
