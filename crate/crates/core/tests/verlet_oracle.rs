//! Integrator oracles on the ideal RF quadrupole: secular frequency,
//! convergence order, micromotion content.

use ionshot::dynamics::{integrate, DtPolicy, Terminators, TrajectoryState};
use ionshot::trap::IonSpecies;
use ionshot::Vec3;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

struct QuadTrap {
    omega: f64,
    /// Peak field gradient V / r0^2, V/m^2.
    gradient: f64,
}

impl QuadTrap {
    /// Ideal quadrupole with the requested Mathieu q for the species.
    fn with_mathieu_q(q_m: f64, omega: f64, species: &IonSpecies) -> QuadTrap {
        // q_m = 2 e V / (m Omega^2 r0^2) => V/r0^2 = q_m m Omega^2 / (2 e).
        let gradient =
            q_m * species.mass_kg() * omega * omega / (2.0 * species.charge_coulomb());
        QuadTrap { omega, gradient }
    }

    fn field(&self, p: Vec3, t: f64) -> Vec3 {
        // Phi = V sin(Omega t) (x^2 - y^2) / (2 r0^2); E = -grad Phi.
        let s = (self.omega * t).sin();
        Vec3::new(-self.gradient * p.x * s, self.gradient * p.y * s, 0.0)
    }
}

/// Frequency of a clean oscillation from zero-crossing times
/// (stroboscopic samples, so micromotion is frozen out).
fn zero_crossing_frequency(times: &[f64], values: &[f64]) -> f64 {
    let mut crossings = Vec::new();
    for i in 1..values.len() {
        if values[i - 1].signum() != values[i].signum() {
            let f = values[i - 1] / (values[i - 1] - values[i]);
            crossings.push(times[i - 1] + f * (times[i] - times[i - 1]));
        }
    }
    assert!(crossings.len() >= 4, "too few crossings");
    let span = crossings.last().unwrap() - crossings.first().unwrap();
    (crossings.len() - 1) as f64 / (2.0 * span)
}

#[test]
fn rf_quadrupole_secular_frequency_matches_mathieu() {
    let species = IonSpecies::ca40();
    let omega = TWO_PI * 12.155e6;
    let q_m = 0.16;
    let trap = QuadTrap::with_mathieu_q(q_m, omega, &species);

    let period = TWO_PI / omega;
    let f_sec_expect = (omega / 2.0) * (q_m * q_m / 2.0).sqrt() / TWO_PI;
    let n_periods = 3000usize;

    let mut policy = DtPolicy::for_rf_period(period);
    policy.field_threshold = 0.0; // fixed dt = T/400
    policy.dt_max = policy.dt_base;
    let mut term = Terminators::flight_to(1.0);
    term.max_time = n_periods as f64 * period;
    term.max_steps = n_periods * 400 + 10;

    let init = TrajectoryState {
        t: 0.0,
        position: Vec3::new(5e-6, 0.0, 0.0),
        velocity: Vec3::ZERO,
    };
    let traj = integrate(init, &species, |p, t| trap.field(p, t), &policy, &term, 1);

    // Stroboscopic sampling at the RF period (400 steps per period).
    let mut times = Vec::new();
    let mut xs = Vec::new();
    for (i, s) in traj.samples.iter().enumerate() {
        if i % 400 == 0 {
            times.push(s.t);
            xs.push(s.position.x);
        }
    }
    let f_sec = zero_crossing_frequency(&times, &xs);
    let rel = (f_sec - f_sec_expect).abs() / f_sec_expect;
    assert!(
        rel < 0.01,
        "secular frequency {f_sec:.1} vs {f_sec_expect:.1} Hz ({rel:.4} rel)"
    );
}

#[test]
fn halving_dt_reduces_error_fourfold() {
    // Final-position error vs a dt/8 reference on the RF quadrupole.
    let species = IonSpecies::ca40();
    let omega = TWO_PI * 12.155e6;
    let trap = QuadTrap::with_mathieu_q(0.16, omega, &species);
    let period = TWO_PI / omega;
    let t_end = 50.0 * period;

    let run = |dt: f64| -> Vec3 {
        let mut state = TrajectoryState {
            t: 0.0,
            position: Vec3::new(5e-6, 3e-6, 0.0),
            velocity: Vec3::new(0.0, 0.02, 0.0),
        };
        let qm = species.charge_coulomb() / species.mass_kg();
        let steps = (t_end / dt).round() as usize;
        let mut a = trap.field(state.position, state.t) * qm;
        for _ in 0..steps {
            let np = state.position + state.velocity * dt + a * (0.5 * dt * dt);
            let an = trap.field(np, state.t + dt) * qm;
            let nv = state.velocity + (a + an) * (0.5 * dt);
            state = TrajectoryState {
                t: state.t + dt,
                position: np,
                velocity: nv,
            };
            a = an;
        }
        state.position
    };

    let dt0 = period / 200.0;
    let reference = run(dt0 / 8.0);
    let e1 = (run(dt0) - reference).norm();
    let e2 = (run(dt0 / 2.0) - reference).norm();
    let factor = e1 / e2;
    assert!(
        (3.0..=5.0).contains(&factor),
        "convergence factor {factor:.2} outside 4 +/- 1 (e1 {e1:.3e}, e2 {e2:.3e})"
    );
}

#[test]
fn micromotion_sidebands_carry_expected_amplitude() {
    // Lowest-order Mathieu solution: x(t) ~ A cos(w_s t) [1 + (q/2) cos(W t)],
    // i.e. sidebands at W +/- w_s of amplitude A q / 4 each.  Fit the
    // trajectory with linear least squares at the three known frequencies
    // and compare the summed sideband amplitude against (q/2) A.
    let species = IonSpecies::ca40();
    let omega = TWO_PI * 12.155e6;
    let q_m = 0.16;
    let trap = QuadTrap::with_mathieu_q(q_m, omega, &species);
    let period = TWO_PI / omega;
    let w_sec = (omega / 2.0) * (q_m * q_m / 2.0 - 7.0 * q_m.powi(4) / 128.0).sqrt();

    let mut policy = DtPolicy::for_rf_period(period);
    policy.field_threshold = 0.0;
    policy.dt_max = policy.dt_base;
    let n_periods = 2000usize;
    let mut term = Terminators::flight_to(1.0);
    term.max_time = n_periods as f64 * period;
    term.max_steps = n_periods * 400 + 10;
    let a0 = 5e-6;
    let init = TrajectoryState {
        t: 0.0,
        position: Vec3::new(a0, 0.0, 0.0),
        velocity: Vec3::ZERO,
    };
    let traj = integrate(init, &species, |p, t| trap.field(p, t), &policy, &term, 1);

    // Linear LSQ: x(t) = sum_k [c_k cos(w_k t) + s_k sin(w_k t)],
    // w in {w_sec, W - w_sec, W + w_sec}.
    let freqs = [w_sec, omega - w_sec, omega + w_sec];
    let n = traj.samples.len();
    let m = 6;
    let mut ata = vec![vec![0.0f64; m]; m];
    let mut atb = vec![0.0f64; m];
    for s in &traj.samples {
        let mut row = [0.0f64; 6];
        for (k, w) in freqs.iter().enumerate() {
            row[2 * k] = (w * s.t).cos();
            row[2 * k + 1] = (w * s.t).sin();
        }
        for i in 0..m {
            for j in 0..m {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * s.position.x;
        }
    }
    let a_mat = nalgebra_glue::solve(&ata, &atb);
    let amp = |k: usize| (a_mat[2 * k].powi(2) + a_mat[2 * k + 1].powi(2)).sqrt();
    let a_sec = amp(0);
    let sidebands = amp(1) + amp(2);
    let want = 0.5 * q_m * a_sec;
    let rel = (sidebands - want).abs() / want;
    assert!(
        rel < 0.10,
        "sideband sum {sidebands:.3e} vs (q/2) A = {want:.3e} ({rel:.3} rel, N={n})"
    );
}

/// Tiny dense solver for the 6x6 normal equations.
mod nalgebra_glue {
    pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut rhs = b.to_vec();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
                .unwrap();
            m.swap(col, piv);
            rhs.swap(col, piv);
            let d = m[col][col];
            for row in (col + 1)..n {
                let f = m[row][col] / d;
                for k in col..n {
                    m[row][k] -= f * m[col][k];
                }
                rhs[row] -= f * rhs[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let mut s = rhs[row];
            for k in (row + 1)..n {
                s -= m[row][k] * x[k];
            }
            x[row] = s / m[row][row];
        }
        x
    }
}
