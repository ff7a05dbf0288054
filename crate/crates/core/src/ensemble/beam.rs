//! Beam observables: aperture transmission, focal spots, deflection
//! tuning, diffraction limit.

use crate::dynamics::{integrate, DtPolicy, FieldEngine, Terminators, TrajectoryState, WaveformSchedule};
use crate::error::{CoreError, CoreResult};
use crate::field::BasisFieldSet;
use crate::geometry::{ChannelId, LensSpec};
use crate::trap::IonSpecies;
use crate::units::PLANCK;
use crate::vec3::Vec3;

use super::{
    compute_stats, run_shots, ExtractionSetup, PlaneRecord, RunConfig,
};

/// Transmission vs aperture radius plus the Gaussian-spot fit.
#[derive(Debug, Clone)]
pub struct ApertureScan {
    pub radii: Vec<f64>,
    pub transmission: Vec<f64>,
    /// Fitted per-axis Gaussian sigma, m.
    pub sigma: f64,
    /// Counting-statistics uncertainty of the fit.
    pub sigma_err: f64,
    /// Direct estimate sqrt(mean(r^2)/2) from the samples.
    pub sigma_direct: f64,
    pub samples: usize,
}

/// Transmission of an isotropic Gaussian beam through a round aperture.
pub fn gaussian_transmission(radius: f64, sigma: f64) -> f64 {
    1.0 - (-radius * radius / (2.0 * sigma * sigma)).exp()
}

/// Count transmissions at each radius and fit the Gaussian spot size.
pub fn aperture_scan(hits: &[(f64, f64)], radii: &[f64]) -> CoreResult<ApertureScan> {
    if hits.is_empty() {
        return Err(CoreError::DegenerateData("no beam samples".into()));
    }
    if radii.is_empty() {
        return Err(CoreError::Config("empty radius list".into()));
    }
    let n = hits.len() as f64;
    let r2: Vec<f64> = hits.iter().map(|(x, y)| x * x + y * y).collect();
    let transmission: Vec<f64> = radii
        .iter()
        .map(|&r| r2.iter().filter(|&&q| q <= r * r).count() as f64 / n)
        .collect();
    if transmission.iter().all(|&t| t == 0.0) {
        return Err(CoreError::DegenerateData(
            "zero transmission at every radius".into(),
        ));
    }
    let sigma_direct = (r2.iter().sum::<f64>() / (2.0 * n)).sqrt();

    // 1-D least squares over sigma by golden-section search.
    let sse = |s: f64| -> f64 {
        radii
            .iter()
            .zip(&transmission)
            .map(|(&r, &t)| {
                let m = gaussian_transmission(r, s);
                (t - m) * (t - m)
            })
            .sum()
    };
    let (mut a, mut b) = (sigma_direct * 0.05, sigma_direct * 20.0);
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (sse(c), sse(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = sse(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = sse(d);
        }
        if (b - a) < 1e-9 * sigma_direct {
            break;
        }
    }
    let sigma = 0.5 * (a + b);

    // Generalized-least-squares error from the counting statistics.
    let mut info = 0.0;
    for (&r, &t) in radii.iter().zip(&transmission) {
        let var_t = (t * (1.0 - t) / n).max(1.0 / (n * n));
        let ds = 1e-4 * sigma;
        let dt_ds = (gaussian_transmission(r, sigma + ds)
            - gaussian_transmission(r, sigma - ds))
            / (2.0 * ds);
        info += dt_ds * dt_ds / var_t;
    }
    let sigma_err = if info > 0.0 {
        (1.0 / info).sqrt()
    } else {
        f64::INFINITY
    };

    Ok(ApertureScan {
        radii: radii.to_vec(),
        transmission,
        sigma,
        sigma_err,
        sigma_direct,
        samples: hits.len(),
    })
}

/// Focal-scan result from free-flight propagation behind the lens.
#[derive(Debug, Clone)]
pub struct FocusResult {
    /// Axial position of the smallest spot, m.
    pub z_focus: f64,
    /// 1-sigma radius (per-axis Gaussian sigma) at the focus, m.
    pub spot_sigma: f64,
    /// Sampled spot curve (z, sigma_r) over the scan range.
    pub curve: Vec<(f64, f64)>,
    /// Shots contributing.
    pub samples: usize,
}

/// Propagate plane records ballistically and find the waist.
///
/// Behind the lens the flight is field free, so each transverse coordinate
/// is linear in z and the spot variance is an exact quadratic; its minimum
/// is evaluated in closed form and reported along with a sampled curve.
pub fn focal_scan(
    records: &[PlaneRecord],
    z_reference: f64,
    z_lo: f64,
    z_hi: f64,
    curve_points: usize,
) -> CoreResult<FocusResult> {
    if records.len() < 2 {
        return Err(CoreError::DegenerateData(
            "focal scan needs at least two trajectories".into(),
        ));
    }
    let n = records.len() as f64;
    let slopes: Vec<(f64, f64)> = records.iter().map(|r| (r.vx / r.vz, r.vy / r.vz)).collect();
    let mean = |f: &dyn Fn(usize) -> f64| (0..records.len()).map(f).sum::<f64>() / n;
    let mx = mean(&|i| records[i].x);
    let my = mean(&|i| records[i].y);
    let msx = mean(&|i| slopes[i].0);
    let msy = mean(&|i| slopes[i].1);
    let var_x = mean(&|i| (records[i].x - mx).powi(2));
    let var_y = mean(&|i| (records[i].y - my).powi(2));
    let var_sx = mean(&|i| (slopes[i].0 - msx).powi(2));
    let var_sy = mean(&|i| (slopes[i].1 - msy).powi(2));
    let cov_x = mean(&|i| (records[i].x - mx) * (slopes[i].0 - msx));
    let cov_y = mean(&|i| (records[i].y - my) * (slopes[i].1 - msy));

    // sigma_r^2(z) = C + B (z - z_ref) + A (z - z_ref)^2.
    let a = 0.5 * (var_sx + var_sy);
    let b = cov_x + cov_y;
    let c = 0.5 * (var_x + var_y);
    if a <= 0.0 {
        return Err(CoreError::DegenerateData(
            "beam carries no angular spread; no focus".into(),
        ));
    }
    let dz_star = -b / (2.0 * a);
    let z_star = z_reference + dz_star;
    if z_star < z_lo || z_star > z_hi {
        return Err(CoreError::Other(format!(
            "no focus inside the scan range: waist at {z_star:.4} m, range [{z_lo:.4}, {z_hi:.4}] (diverging or collimated beam)"
        )));
    }
    let sigma_at = |z: f64| {
        let dz = z - z_reference;
        (c + b * dz + a * dz * dz).max(0.0).sqrt()
    };
    let curve: Vec<(f64, f64)> = (0..curve_points.max(2))
        .map(|i| {
            let z = z_lo + (z_hi - z_lo) * i as f64 / (curve_points.max(2) - 1) as f64;
            (z, sigma_at(z))
        })
        .collect();
    Ok(FocusResult {
        z_focus: z_star,
        spot_sigma: sigma_at(z_star),
        curve,
        samples: records.len(),
    })
}

/// Focal point of a paraxial test ray through the lens at the given center
/// voltage; used by the voltage tuner.
fn ray_focal_z(
    lens_basis: &BasisFieldSet,
    lens: &LensSpec,
    voltage: f64,
    species: &IonSpecies,
    beam_velocity: f64,
) -> CoreResult<Option<f64>> {
    let schedule = WaveformSchedule {
        channels: vec![crate::dynamics::ChannelWaveform {
            channel: ChannelId::Lens(1),
            static_level: voltage,
            rf: None,
            switch: None,
        }],
    };
    let engine = FieldEngine::new(&[lens_basis], &schedule)?;
    let z_in = lens.center_z - lens.total_length() / 2.0 - 1.5e-3;
    let z_out = lens.center_z + lens.total_length() / 2.0 + 1.5e-3;
    let offset = 20e-6;
    let init = TrajectoryState {
        t: 0.0,
        position: Vec3::new(offset, 0.0, z_in),
        velocity: Vec3::new(0.0, 0.0, beam_velocity),
    };
    let mut policy = DtPolicy::for_rf_period(1.0 / 12.155e6);
    policy.field_threshold = 1.0;
    let mut term = Terminators::flight_to(z_out);
    term.max_steps = 2_000_000;
    term.max_time = 1e-3;
    let traj = integrate(
        init,
        species,
        |p, t| engine.field(p, t),
        &policy,
        &term,
        0,
    );
    let f = traj.final_state;
    if f.velocity.x >= 0.0 || !f.position.is_finite() {
        return Ok(None); // not converging toward the axis
    }
    Ok(Some(f.position.z - f.position.x * f.velocity.z / f.velocity.x))
}

/// Search the lens center voltage that places the paraxial focus at
/// `lens.center_z + lens.focal_length_target`.
pub fn tune_lens_voltage(
    lens_basis: &BasisFieldSet,
    lens: &LensSpec,
    species: &IonSpecies,
    beam_velocity: f64,
) -> CoreResult<f64> {
    let target = lens.center_z + lens.focal_length_target;
    // Equivalent beam energy in volts bounds the decelerating lens voltage.
    let u_beam = 0.5 * species.mass_kg() * beam_velocity * beam_velocity
        / species.charge_coulomb().abs();
    let mut lo = 0.05 * u_beam;
    let mut hi = 0.98 * u_beam;
    let focal = |v: f64| ray_focal_z(lens_basis, lens, v, species, beam_velocity);
    // Stronger lens (higher decelerating voltage) pulls the focus in;
    // find a bracket where the focus straddles the target.
    let mut f_lo = focal(lo)?;
    let mut f_hi = focal(hi)?;
    for _ in 0..40 {
        match (f_lo, f_hi) {
            (Some(zl), Some(zh)) if (zl - target) * (zh - target) <= 0.0 => break,
            (None, _) => {
                lo = 0.5 * (lo + hi);
                f_lo = focal(lo)?;
            }
            (Some(zl), _) if zl < target => {
                // Even the weak end focuses too早; weaken further.
                lo *= 0.5;
                f_lo = focal(lo)?;
            }
            (_, None) | (_, Some(_)) => {
                hi = 0.5 * (hi + 0.99 * u_beam);
                f_hi = focal(hi)?;
            }
        }
    }
    let (Some(zl), Some(zh)) = (f_lo, f_hi) else {
        return Err(CoreError::Other(
            "lens voltage search found no focusing bracket".into(),
        ));
    };
    if (zl - target) * (zh - target) > 0.0 {
        return Err(CoreError::Other(format!(
            "focus target {target:.4} m not bracketed: f({lo:.1} V) = {zl:.4}, f({hi:.1} V) = {zh:.4}"
        )));
    }
    let mut a = lo;
    let mut b = hi;
    let mut fa = zl - target;
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        let fm = match focal(mid)? {
            Some(z) => z - target,
            None => {
                // Lost focusing: treat as focus beyond the target.
                f64::INFINITY
            }
        };
        if fa * fm <= 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
        if (b - a) < 1e-3 {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// Deflection-voltage grid scan result.
#[derive(Debug, Clone)]
pub struct DeflectionScan {
    pub best: (f64, f64),
    pub objective: f64,
    /// (voltages, objective) in scan order.
    pub scanned: Vec<((f64, f64), f64)>,
}

/// Minimize the beam's transverse offset at the measurement plane over a
/// grid of deflection-plate voltage pairs (single deterministic T=0 shot
/// per candidate), with optional local grid refinement.
pub fn optimize_deflection(
    config: &RunConfig,
    trap_basis: &BasisFieldSet,
    candidates: &[(f64, f64)],
    refine_rounds: usize,
) -> CoreResult<DeflectionScan> {
    if candidates.is_empty() {
        return Err(CoreError::Config("empty deflection voltage grid".into()));
    }
    let objective = |va: f64, vb: f64| -> CoreResult<f64> {
        let mut cfg = config.clone();
        cfg.temperature = 0.0;
        cfg.shots = 1;
        cfg.extraction
            .deflection_voltages
            .insert(ChannelId::Deflector(0), va);
        cfg.extraction
            .deflection_voltages
            .insert(ChannelId::Deflector(1), vb);
        let setup = ExtractionSetup::prepare(&cfg, trap_basis, None, Vec::new())?;
        let records = run_shots(1, |i| setup.shot(i));
        match compute_stats(records, &cfg.scene, 1) {
            Ok(stats) => {
                let (cx, cy) = stats.centroid;
                Ok((cx * cx + cy * cy).sqrt())
            }
            Err(_) => Ok(f64::INFINITY), // lost shot
        }
    };

    // Deterministic tie-break: scan in lexicographic voltage order.
    let mut sorted: Vec<(f64, f64)> = candidates.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let mut scanned = Vec::new();
    let mut best = sorted[0];
    let mut best_obj = f64::INFINITY;
    for &(va, vb) in &sorted {
        let o = objective(va, vb)?;
        scanned.push(((va, vb), o));
        if o < best_obj {
            best_obj = o;
            best = (va, vb);
        }
    }

    // Local refinement: shrink a 3x3 stencil around the incumbent.
    let mut spacing = grid_spacing(&sorted);
    for _ in 0..refine_rounds {
        spacing *= 0.5;
        if spacing <= 0.0 {
            break;
        }
        let mut improved = false;
        let mut local: Vec<(f64, f64)> = Vec::new();
        for i in -1..=1i32 {
            for j in -1..=1i32 {
                if i != 0 || j != 0 {
                    local.push((best.0 + i as f64 * spacing, best.1 + j as f64 * spacing));
                }
            }
        }
        local.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        for &(va, vb) in &local {
            let o = objective(va, vb)?;
            scanned.push(((va, vb), o));
            if o < best_obj {
                best_obj = o;
                best = (va, vb);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }

    Ok(DeflectionScan {
        best,
        objective: best_obj,
        scanned,
    })
}

fn grid_spacing(sorted: &[(f64, f64)]) -> f64 {
    let mut min_gap = f64::INFINITY;
    for w in sorted.windows(2) {
        let d = (w[1].0 - w[0].0).abs().max((w[1].1 - w[0].1).abs());
        if d > 0.0 {
            min_gap = min_gap.min(d);
        }
    }
    if min_gap.is_finite() {
        min_gap
    } else {
        0.0
    }
}

/// Matter-wave diffraction limit of the focal spot.
#[derive(Debug, Clone, Copy)]
pub struct DiffractionLimit {
    /// de Broglie wavelength h / sqrt(2 m E), m.
    pub wavelength: f64,
    /// Diffraction-limited spot scale lambda / (2 NA), m.
    pub spot: f64,
}

pub fn diffraction_limit(
    species: &IonSpecies,
    energy_ev: f64,
    numerical_aperture: f64,
) -> CoreResult<DiffractionLimit> {
    if !(energy_ev > 0.0) {
        return Err(CoreError::Config("energy must be > 0".into()));
    }
    if !(numerical_aperture > 0.0 && numerical_aperture < 1.0) {
        return Err(CoreError::Config("NA must lie in (0, 1)".into()));
    }
    let e = energy_ev * crate::units::EV;
    let wavelength = PLANCK / (2.0 * species.mass_kg() * e).sqrt();
    Ok(DiffractionLimit {
        wavelength,
        spot: wavelength / (2.0 * numerical_aperture),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn synthetic_gaussian_beam_transmission() {
        // s = 83 um; a 300 um aperture passes 1 - exp(-300^2/(2*83^2)).
        let s = 83e-6;
        let formula = gaussian_transmission(300e-6, s);
        assert!((formula - 0.99853).abs() < 1e-4, "formula {formula}");

        let n = 139;
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let hits: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                (
                    s * rng.sample::<f64, _>(StandardNormal),
                    s * rng.sample::<f64, _>(StandardNormal),
                )
            })
            .collect();
        let radii: Vec<f64> = (1..=10).map(|k| k as f64 * 40e-6).collect();
        let scan = aperture_scan(&hits, &radii).unwrap();
        // Round trip within counting error (a few sigma_err).
        assert!(
            (scan.sigma - s).abs() < 4.0 * scan.sigma_err.max(4e-6),
            "fitted {:.3e} +/- {:.3e} vs {s:.3e}",
            scan.sigma,
            scan.sigma_err
        );
        // Huge radius passes everything.
        let all = aperture_scan(&hits, &[1.0]).unwrap();
        assert_eq!(all.transmission[0], 1.0);
    }

    #[test]
    fn focal_scan_finds_synthetic_waist() {
        // Rays converging to z* = 0.296 m with angular spread.
        let z_ref = 0.290;
        let z_star = 0.296;
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let vz = 19_470.0;
        let records: Vec<PlaneRecord> = (0..400)
            .map(|_| {
                let slope: f64 = 4e-3 * rng.sample::<f64, _>(StandardNormal);
                let waist: f64 = 5e-9 * rng.sample::<f64, _>(StandardNormal);
                // x(z) = waist + slope (z - z*)  =>  at z_ref:
                let x = waist + slope * (z_ref - z_star);
                (x, slope)
            })
            .map(|(x, slope)| PlaneRecord {
                t: 0.0,
                x,
                y: 0.0,
                vx: slope * vz,
                vy: 0.0,
                vz,
            })
            .collect();
        let res = focal_scan(&records, z_ref, 0.290, 0.310, 41).unwrap();
        assert!(
            (res.z_focus - z_star).abs() < 5e-5,
            "waist at {:.6}",
            res.z_focus
        );
        // Spot at the waist ~ 5 nm / sqrt(2) per-axis definition:
        // var_x at waist = (5 nm)^2 so sigma_r = sqrt(var_x/2).
        assert!(res.spot_sigma < 5e-9);
        assert!(res.curve.len() == 41);
    }

    #[test]
    fn focal_scan_rejects_diverging_beam() {
        let vz = 19_470.0;
        let records: Vec<PlaneRecord> = (0..100)
            .map(|i| {
                let x = (i as f64 - 50.0) * 1e-6;
                PlaneRecord {
                    t: 0.0,
                    x,
                    y: 0.0,
                    vx: x * 10.0, // diverging: slope proportional to x
                    vy: 0.0,
                    vz,
                }
            })
            .collect();
        assert!(focal_scan(&records, 0.29, 0.29, 0.31, 10).is_err());
    }

    #[test]
    fn diffraction_limit_matches_closed_form() {
        let ca = IonSpecies::ca40();
        let d = diffraction_limit(&ca, 80.0, 0.001).unwrap();
        assert!(
            (d.wavelength - 5.08e-13).abs() < 0.03e-13,
            "lambda {:.3e}",
            d.wavelength
        );
        assert!((1e-10..5e-10).contains(&d.spot), "spot {:.3e}", d.spot);
        // Quadrupling the energy halves the wavelength exactly.
        let d4 = diffraction_limit(&ca, 320.0, 0.001).unwrap();
        assert!((d4.wavelength * 2.0 - d.wavelength).abs() <= 1e-15 * d.wavelength);
        // Doubling the NA halves the spot exactly.
        let d2 = diffraction_limit(&ca, 80.0, 0.002).unwrap();
        assert_eq!(d2.spot * 2.0, d.spot);
    }
}
