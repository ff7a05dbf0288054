//! Pseudopotential analysis: trap minimum and secular frequencies.

use nalgebra::{Matrix3, Vector3};

use crate::error::{CoreError, CoreResult};
use crate::field::{BasisFieldSet, Voltages};
use crate::geometry::ChannelId;
use crate::units::{AMU, ELEMENTARY_CHARGE, EV};
use crate::vec3::Vec3;

/// Trapped species.
#[derive(Debug, Clone, PartialEq)]
pub struct IonSpecies {
    pub mass_amu: f64,
    /// Elementary charges; nonzero.
    pub charge: i32,
    pub label: String,
}

impl IonSpecies {
    pub fn new(label: &str, mass_amu: f64, charge: i32) -> CoreResult<Self> {
        if !(mass_amu > 0.0) {
            return Err(CoreError::Config("ion mass must be > 0".into()));
        }
        if charge == 0 {
            return Err(CoreError::Config("ion charge must be nonzero".into()));
        }
        Ok(IonSpecies {
            mass_amu,
            charge,
            label: label.to_string(),
        })
    }

    /// 40Ca+.
    pub fn ca40() -> Self {
        IonSpecies {
            mass_amu: 39.9626,
            charge: 1,
            label: "Ca+".into(),
        }
    }

    /// CaO+ (40 + 16).
    pub fn cao() -> Self {
        IonSpecies {
            mass_amu: 55.9575,
            charge: 1,
            label: "CaO+".into(),
        }
    }

    pub fn mass_kg(&self) -> f64 {
        self.mass_amu * AMU
    }

    pub fn charge_coulomb(&self) -> f64 {
        self.charge as f64 * ELEMENTARY_CHARGE
    }
}

/// Operating point of the trap drive.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveConfig {
    /// RF amplitude, V.
    pub rf_amplitude: f64,
    /// RF drive frequency Omega/2pi, Hz.
    pub rf_frequency: f64,
    /// RF phase offset, rad.
    pub rf_phase: f64,
    /// Static per-channel voltages, V.
    pub dc_voltages: Voltages,
}

impl Default for DriveConfig {
    fn default() -> Self {
        let mut dc = Voltages::new();
        dc.insert(ChannelId::Dc(2), 35.0);
        dc.insert(ChannelId::Dc(8), 35.0);
        DriveConfig {
            rf_amplitude: 200.0,
            rf_frequency: 12.155e6,
            rf_phase: 0.0,
            dc_voltages: dc,
        }
    }
}

impl DriveConfig {
    pub fn omega(&self) -> f64 {
        2.0 * core::f64::consts::PI * self.rf_frequency
    }

    pub fn validate(&self) -> CoreResult<()> {
        if !(self.rf_frequency > 0.0) {
            return Err(CoreError::Config("rf_frequency must be > 0".into()));
        }
        if self.rf_amplitude < 0.0 {
            return Err(CoreError::Config("rf_amplitude must be >= 0".into()));
        }
        Ok(())
    }
}

/// Static field data needed by the pseudopotential; lets analysis run on
/// either solved basis fields or closed-form test fields.
pub trait StaticTrapField: Sync {
    /// Static (DC) potential at the operating voltages, V.
    fn dc_potential(&self, p: Vec3) -> f64;
    /// RF field at full amplitude (phase peak), V/m.
    fn rf_field_amplitude(&self, p: Vec3) -> Vec3;
    /// RF potential at full amplitude, V.
    fn rf_potential_amplitude(&self, p: Vec3) -> f64;
    /// Angular drive frequency, rad/s.
    fn rf_omega(&self) -> f64;
}

/// Basis-backed trap field at a given drive configuration.
pub struct TrapField<'a> {
    pub basis: &'a BasisFieldSet,
    pub drive: &'a DriveConfig,
    rf_volts: Voltages,
}

impl<'a> TrapField<'a> {
    pub fn new(basis: &'a BasisFieldSet, drive: &'a DriveConfig) -> Self {
        let mut rf_volts = Voltages::new();
        rf_volts.insert(ChannelId::Rf, drive.rf_amplitude);
        TrapField {
            basis,
            drive,
            rf_volts,
        }
    }
}

impl StaticTrapField for TrapField<'_> {
    fn dc_potential(&self, p: Vec3) -> f64 {
        self.basis.potential_at(&[p], &self.drive.dc_voltages).0[0]
    }

    fn rf_field_amplitude(&self, p: Vec3) -> Vec3 {
        self.basis.field_at(&[p], &self.rf_volts).0[0]
    }

    fn rf_potential_amplitude(&self, p: Vec3) -> f64 {
        self.basis.potential_at(&[p], &self.rf_volts).0[0]
    }

    fn rf_omega(&self) -> f64 {
        self.drive.omega()
    }
}

/// Time-averaged effective potential, J:
/// `q^2 |E_rf|^2 / (4 m Omega^2) + q Phi_dc`.
pub fn pseudopotential<F: StaticTrapField>(point: Vec3, species: &IonSpecies, field: &F) -> f64 {
    let q = species.charge_coulomb();
    let m = species.mass_kg();
    let omega = field.rf_omega();
    let e_rf = field.rf_field_amplitude(point);
    q * q * e_rf.norm_sq() / (4.0 * m * omega * omega) + q * field.dc_potential(point)
}

/// Gradient tolerance: 1e-6 eV/mm expressed in J/m.
const GRAD_TOL: f64 = 1e-6 * EV / 1e-3;

fn fd_gradient<F: StaticTrapField>(
    p: Vec3,
    species: &IonSpecies,
    field: &F,
    h: f64,
) -> Vec3 {
    let mut g = Vec3::ZERO;
    for axis in 0..3 {
        let mut dp = p;
        let mut dm = p;
        match axis {
            0 => {
                dp.x += h;
                dm.x -= h;
            }
            1 => {
                dp.y += h;
                dm.y -= h;
            }
            _ => {
                dp.z += h;
                dm.z -= h;
            }
        }
        let d = (pseudopotential(dp, species, field) - pseudopotential(dm, species, field))
            / (2.0 * h);
        match axis {
            0 => g.x = d,
            1 => g.y = d,
            _ => g.z = d,
        }
    }
    g
}

fn fd_hessian<F: StaticTrapField>(
    p: Vec3,
    species: &IonSpecies,
    field: &F,
    h: f64,
) -> Matrix3<f64> {
    let f0 = pseudopotential(p, species, field);
    let shift = |i: usize, s: f64| -> Vec3 {
        let mut q = p;
        match i {
            0 => q.x += s,
            1 => q.y += s,
            _ => q.z += s,
        }
        q
    };
    let mut hess = Matrix3::zeros();
    for i in 0..3 {
        let fp = pseudopotential(shift(i, h), species, field);
        let fm = pseudopotential(shift(i, -h), species, field);
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
    }
    for i in 0..3 {
        for j in (i + 1)..3 {
            let mk = |si: f64, sj: f64| {
                let mut q = shift(i, si);
                match j {
                    0 => q.x += sj,
                    1 => q.y += sj,
                    _ => q.z += sj,
                }
                q
            };
            let v = (pseudopotential(mk(h, h), species, field)
                - pseudopotential(mk(h, -h), species, field)
                - pseudopotential(mk(-h, h), species, field)
                + pseudopotential(mk(-h, -h), species, field))
                / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Locate the pseudopotential minimum by damped Newton iteration.
///
/// `scale` sets the finite-difference step `h = max(1e-7 m, 1e-4 * scale)`
/// and the initial trust radius.
pub fn find_minimum<F: StaticTrapField>(
    species: &IonSpecies,
    field: &F,
    start: Vec3,
    scale: f64,
) -> CoreResult<Vec3> {
    let h = (1e-4 * scale).max(1e-7);
    let mut x = start;
    let max_step = 0.5 * scale;
    for _ in 0..200 {
        let g = fd_gradient(x, species, field, h);
        if g.norm() <= GRAD_TOL {
            let hess = fd_hessian(x, species, field, h);
            let eig = nalgebra::SymmetricEigen::new(hess);
            if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
                return Err(CoreError::Unstable(format!(
                    "stationary point at ({:.3e}, {:.3e}, {:.3e}) is a saddle: eigenvalues {:?}",
                    x.x, x.y, x.z, eig.eigenvalues.as_slice()
                )));
            }
            return Ok(x);
        }
        let hess = fd_hessian(x, species, field, h);
        let gv = Vector3::new(g.x, g.y, g.z);
        let eig = nalgebra::SymmetricEigen::new(hess);
        let min_eig = eig.eigenvalues.min();
        let step = if min_eig > 0.0 {
            match hess.lu().solve(&gv) {
                Some(s) => Vec3::new(s[0], s[1], s[2]),
                None => g * (scale / g.norm() * 1e-2),
            }
        } else {
            // Not positive definite here; descend along the gradient.
            g * (0.1 * scale / g.norm())
        };
        let mut dx = -step;
        // Newton step solves H dx = -g; note `step` above solves H s = g.
        let n = dx.norm();
        if n > max_step {
            dx = dx * (max_step / n);
        }
        x += dx;
        if !x.is_finite() {
            return Err(CoreError::Minimization(
                "minimum search diverged to non-finite coordinates".into(),
            ));
        }
    }
    Err(CoreError::Minimization(format!(
        "no convergence to gradient tolerance {GRAD_TOL:.2e} J/m within 200 iterations"
    )))
}

/// Secular (slow-motion) analysis at the pseudopotential minimum.
#[derive(Debug, Clone)]
pub struct SecularResult {
    /// Minimum position, m.
    pub minimum: Vec3,
    /// Secular angular frequencies (rad/s) along the principal axes,
    /// sorted so the most axis-aligned mode comes last.
    pub omega: [f64; 3],
    /// Orthonormal principal axes, same order.
    pub axes: [Vec3; 3],
    /// Ideal-quadrupole-equivalent Mathieu parameters per axis.
    pub mathieu_q: [f64; 3],
    pub mathieu_a: [f64; 3],
}

impl SecularResult {
    /// Ordinary frequency of the mode most aligned with the trap axis, Hz.
    pub fn axial_hz(&self) -> f64 {
        self.omega[2] / (2.0 * core::f64::consts::PI)
    }

    /// Ordinary frequencies of the two transverse modes, Hz.
    pub fn radial_hz(&self) -> [f64; 2] {
        [
            self.omega[0] / (2.0 * core::f64::consts::PI),
            self.omega[1] / (2.0 * core::f64::consts::PI),
        ]
    }

    /// Angular frequency along the axis most aligned with `dir`.
    pub fn omega_along(&self, dir: Vec3) -> f64 {
        let d = dir.normalized();
        let mut best = 0;
        let mut best_dot = -1.0;
        for (i, a) in self.axes.iter().enumerate() {
            let dot = a.dot(d).abs();
            if dot > best_dot {
                best_dot = dot;
                best = i;
            }
        }
        self.omega[best]
    }
}

/// Eigen-decomposition of the pseudopotential Hessian at the minimum,
/// with Richardson refinement of the finite-difference step.
pub fn secular_frequencies<F: StaticTrapField>(
    species: &IonSpecies,
    field: &F,
    minimum: Vec3,
    scale: f64,
) -> CoreResult<SecularResult> {
    let h = (1e-4 * scale).max(1e-7);
    let h_coarse = fd_hessian(minimum, species, field, h);
    let h_fine = fd_hessian(minimum, species, field, h / 2.0);
    // Richardson extrapolation of the O(h^2) central differences.
    let hess = (h_fine * 4.0 - h_coarse) / 3.0;

    let eig = nalgebra::SymmetricEigen::new(hess);
    let m = species.mass_kg();
    let mut modes: Vec<(f64, Vec3)> = (0..3)
        .map(|i| {
            let l = eig.eigenvalues[i];
            let v = eig.eigenvectors.column(i);
            (l, Vec3::new(v[0], v[1], v[2]))
        })
        .collect();
    for (l, v) in &modes {
        if *l <= 0.0 {
            return Err(CoreError::Unstable(format!(
                "negative curvature {l:.3e} J/m^2 along axis ({:.2}, {:.2}, {:.2})",
                v.x, v.y, v.z
            )));
        }
    }
    // Order: transverse modes first, the most z-aligned last.
    modes.sort_by(|a, b| {
        a.1.z
            .abs()
            .partial_cmp(&b.1.z.abs())
            .unwrap_or(core::cmp::Ordering::Equal)
    });

    let omega = [
        (modes[0].0 / m).sqrt(),
        (modes[1].0 / m).sqrt(),
        (modes[2].0 / m).sqrt(),
    ];
    let axes = [modes[0].1, modes[1].1, modes[2].1];

    // Ideal-quadrupole-equivalent Mathieu parameters along the principal
    // axes: a_i from the DC curvature, q_i from the unit-RF curvature.
    let q_e = species.charge_coulomb();
    let omega_rf = field.rf_omega();
    let dc_curv = |dir: Vec3| {
        let step = h;
        let f = |s: f64| field.dc_potential(minimum + dir * s);
        (f(step) - 2.0 * f(0.0) + f(-step)) / (step * step)
    };
    let rf_curv = |dir: Vec3| {
        let step = h;
        let f = |s: f64| field.rf_potential_amplitude(minimum + dir * s);
        (f(step) - 2.0 * f(0.0) + f(-step)) / (step * step)
    };
    let mut mathieu_q = [0.0; 3];
    let mut mathieu_a = [0.0; 3];
    for i in 0..3 {
        mathieu_q[i] = 2.0 * q_e * rf_curv(axes[i]) / (m * omega_rf * omega_rf);
        mathieu_a[i] = 4.0 * q_e * dc_curv(axes[i]) / (m * omega_rf * omega_rf);
    }

    Ok(SecularResult {
        minimum,
        omega,
        axes,
        mathieu_q,
        mathieu_a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::joule_to_ev;

    /// Ideal linear-quadrupole RF field plus a harmonic axial DC well.
    struct IdealQuadrupole {
        v_rf: f64,
        r0: f64,
        omega: f64,
        /// Axial DC curvature kappa: Phi_dc = kappa (z^2 - (x^2+y^2)/2).
        kappa: f64,
    }

    impl StaticTrapField for IdealQuadrupole {
        fn dc_potential(&self, p: Vec3) -> f64 {
            self.kappa * (p.z * p.z - 0.5 * (p.x * p.x + p.y * p.y))
        }
        fn rf_field_amplitude(&self, p: Vec3) -> Vec3 {
            // Phi_rf = V (x^2 - y^2) / (2 r0^2); E = -grad.
            Vec3::new(-self.v_rf * p.x, self.v_rf * p.y, 0.0) / (self.r0 * self.r0)
        }
        fn rf_potential_amplitude(&self, p: Vec3) -> f64 {
            self.v_rf * (p.x * p.x - p.y * p.y) / (2.0 * self.r0 * self.r0)
        }
        fn rf_omega(&self) -> f64 {
            self.omega
        }
    }

    fn paper_like_quad() -> IdealQuadrupole {
        IdealQuadrupole {
            v_rf: 200.0,
            r0: 1e-3,
            omega: 2.0 * core::f64::consts::PI * 12.155e6,
            kappa: 1.3e6,
        }
    }

    #[test]
    fn zero_rf_leaves_only_dc_term() {
        let mut f = paper_like_quad();
        f.v_rf = 0.0;
        let ca = IonSpecies::ca40();
        let p = Vec3::new(0.2e-3, -0.1e-3, 0.3e-3);
        let got = pseudopotential(p, &ca, &f);
        let want = ca.charge_coulomb() * f.dc_potential(p);
        assert_eq!(got, want);
    }

    #[test]
    fn ideal_quadrupole_matches_closed_form() {
        let f = paper_like_quad();
        let ca = IonSpecies::ca40();
        let q = ca.charge_coulomb();
        let m = ca.mass_kg();
        for p in [Vec3::new(0.1e-3, 0.0, 0.0), Vec3::new(0.05e-3, -0.07e-3, 0.0)] {
            let got = pseudopotential(p, &ca, &f) - q * f.dc_potential(p);
            let r2 = p.x * p.x + p.y * p.y;
            let want =
                q * q * f.v_rf * f.v_rf * r2 / (4.0 * m * f.omega * f.omega * f.r0.powi(4));
            assert!(
                (got - want).abs() <= 1e-10 * want.abs(),
                "{got:.6e} vs {want:.6e}"
            );
        }
    }

    #[test]
    fn pseudopotential_depth_is_ev_scale() {
        // At the radial edge (r ~ r0/2) the RF barrier is of order eV.
        let f = paper_like_quad();
        let ca = IonSpecies::ca40();
        let depth = pseudopotential(Vec3::new(0.5e-3, 0.0, 0.0), &ca, &f)
            - pseudopotential(Vec3::ZERO, &ca, &f);
        let ev = joule_to_ev(depth);
        assert!((0.1..10.0).contains(&ev), "depth {ev} eV");
    }

    #[test]
    fn finds_center_of_symmetric_trap() {
        let f = paper_like_quad();
        let ca = IonSpecies::ca40();
        let x0 = find_minimum(&ca, &f, Vec3::new(0.1e-3, -0.05e-3, 0.2e-3), 1e-3).unwrap();
        assert!(x0.norm() < 1e-6, "minimum at {x0:?}");
    }

    #[test]
    fn uniform_bias_shifts_minimum_against_field() {
        struct Biased(IdealQuadrupole);
        impl StaticTrapField for Biased {
            fn dc_potential(&self, p: Vec3) -> f64 {
                self.0.dc_potential(p) + 50.0 * p.z
            }
            fn rf_field_amplitude(&self, p: Vec3) -> Vec3 {
                self.0.rf_field_amplitude(p)
            }
            fn rf_potential_amplitude(&self, p: Vec3) -> f64 {
                self.0.rf_potential_amplitude(p)
            }
            fn rf_omega(&self) -> f64 {
                self.0.rf_omega()
            }
        }
        let f = Biased(paper_like_quad());
        let ca = IonSpecies::ca40();
        let x0 = find_minimum(&ca, &f, Vec3::ZERO, 1e-3).unwrap();
        // Positive charge, extra potential +50 z: pushed toward -z.
        assert!(x0.z < -1e-7, "minimum at {x0:?}");
    }

    #[test]
    fn secular_frequencies_match_mathieu_first_order() {
        let f = paper_like_quad();
        let ca = IonSpecies::ca40();
        let q_e = ca.charge_coulomb();
        let m = ca.mass_kg();
        let x0 = find_minimum(&ca, &f, Vec3::ZERO, 1e-3).unwrap();
        let sec = secular_frequencies(&ca, &f, x0, 1e-3).unwrap();

        let q_m = 2.0 * q_e * f.v_rf / (m * f.omega * f.omega * f.r0 * f.r0);
        assert!(q_m < 0.2, "test assumes small q, got {q_m}");
        let a_ax = 4.0 * q_e * 2.0 * f.kappa / (m * f.omega * f.omega);
        let a_rad = -a_ax / 2.0;
        let want_rad = (f.omega / 2.0) * (q_m * q_m / 2.0 + a_rad).sqrt();
        let want_ax = (f.omega / 2.0) * a_ax.sqrt();

        for i in 0..2 {
            let got = sec.omega[i];
            assert!(
                (got - want_rad).abs() <= 0.01 * want_rad,
                "radial {i}: {got:.4e} vs {want_rad:.4e}"
            );
        }
        assert!(
            (sec.omega[2] - want_ax).abs() <= 0.01 * want_ax,
            "axial {:.4e} vs {want_ax:.4e}",
            sec.omega[2]
        );
        // Principal axes orthonormal.
        for i in 0..3 {
            for j in 0..3 {
                let dot = sec.axes[i].dot(sec.axes[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10);
            }
        }
        // Mathieu equivalents recovered.
        assert!((sec.mathieu_q[0].abs() - q_m).abs() < 0.01 * q_m);
        assert!((sec.mathieu_a[2] - a_ax).abs() < 0.01 * a_ax);
    }

    #[test]
    fn axial_frequency_scales_as_sqrt_voltage() {
        let ca = IonSpecies::ca40();
        let f1 = paper_like_quad();
        let mut f2 = paper_like_quad();
        f2.kappa *= 2.0; // doubled endcap voltage
        let s1 = secular_frequencies(&ca, &f1, Vec3::ZERO, 1e-3).unwrap();
        let s2 = secular_frequencies(&ca, &f2, Vec3::ZERO, 1e-3).unwrap();
        let ratio = s2.omega[2] / s1.omega[2];
        let want = 2.0f64.sqrt();
        assert!(
            (ratio - want).abs() <= 0.01 * want,
            "sqrt-V scaling: ratio {ratio}"
        );
    }

    #[test]
    fn saddle_reported_distinctly() {
        // Pure RF-free quadrupole DC potential: saddle at the origin.
        struct Saddle;
        impl StaticTrapField for Saddle {
            fn dc_potential(&self, p: Vec3) -> f64 {
                1e6 * (p.x * p.x - p.y * p.y)
            }
            fn rf_field_amplitude(&self, _p: Vec3) -> Vec3 {
                Vec3::ZERO
            }
            fn rf_potential_amplitude(&self, _p: Vec3) -> f64 {
                0.0
            }
            fn rf_omega(&self) -> f64 {
                1e7
            }
        }
        let ca = IonSpecies::ca40();
        let err = find_minimum(&ca, &Saddle, Vec3::new(1e-6, 1e-6, 0.0), 1e-3);
        assert!(matches!(err, Err(CoreError::Unstable(_)) | Err(CoreError::Minimization(_))));
    }
}
