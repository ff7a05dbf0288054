//! Velocity-Verlet trajectory integration with event detection.

use std::sync::Arc;

use crate::trap::IonSpecies;
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryState {
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
}

/// Plane-crossing record, interpolated to sub-step accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneCrossing {
    pub plane_z: f64,
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Crossed the terminal plane.
    TerminalPlane,
    /// Entered a conductor guard zone.
    SurfaceHit,
    /// Left the allowed domain without triggering any terminator.
    EscapedDomain,
    MaxTime,
    MaxSteps,
    /// Non-finite force encountered; last valid state kept.
    NanForce,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Stored path samples (first and last always present).
    pub samples: Vec<TrajectoryState>,
    pub crossings: Vec<PlaneCrossing>,
    pub final_state: TrajectoryState,
    pub termination: Termination,
    pub steps: usize,
}

impl Trajectory {
    pub fn crossing_at(&self, plane_z: f64) -> Option<&PlaneCrossing> {
        self.crossings
            .iter()
            .find(|c| (c.plane_z - plane_z).abs() < 1e-12)
    }
}

/// Step-size policy.
#[derive(Debug, Clone)]
pub struct DtPolicy {
    /// Base step inside the field region, s.
    pub dt_base: f64,
    /// Free-flight cap, s.
    pub dt_max: f64,
    /// Per-step growth bound.
    pub growth: f64,
    /// |E| below which the step may grow, V/m.
    pub field_threshold: f64,
    /// Minimum number of steps across a voltage ramp.
    pub ramp_min_steps: usize,
    /// Ramp windows (start, end) from the schedule.
    pub ramp_windows: Vec<(f64, f64)>,
}

impl DtPolicy {
    /// Default policy for an RF drive: base step = T_rf / 400.
    pub fn for_rf_period(period: f64) -> DtPolicy {
        DtPolicy {
            dt_base: period / 400.0,
            dt_max: 2e-9,
            growth: 1.2,
            field_threshold: 20.0,
            ramp_min_steps: 20,
            ramp_windows: Vec::new(),
        }
    }

    /// Next step size given the previous one and the local field strength.
    pub fn next_dt(&self, t: f64, prev_dt: f64, field_norm: f64) -> f64 {
        let mut dt = if field_norm > self.field_threshold {
            self.dt_base
        } else {
            (prev_dt * self.growth).min(self.dt_max)
        };
        for &(start, end) in &self.ramp_windows {
            // Resolve the ramp: never step over it, and resolve its
            // interior with at least ramp_min_steps steps.
            if t < end {
                let cap = (end - start) / self.ramp_min_steps as f64;
                if t + dt > start {
                    dt = dt.min(cap.max(1e-15));
                }
                if t < start {
                    dt = dt.min((start - t).max(1e-15));
                }
            }
        }
        dt
    }
}

/// Integration stop conditions and recording planes.
#[derive(Clone, Default)]
pub struct Terminators {
    /// z planes whose first crossing is recorded.
    pub record_planes: Vec<f64>,
    /// Terminate after crossing this plane.
    pub terminal_plane: Option<f64>,
    /// Signed clearance to the nearest conductor guard zone; < 0 ends the
    /// trajectory as a surface hit.
    pub clearance: Option<Arc<dyn Fn(Vec3) -> f64 + Send + Sync>>,
    /// Allowed axis-aligned domain (min, max).
    pub domain: Option<(Vec3, Vec3)>,
    pub max_time: f64,
    pub max_steps: usize,
}

impl Terminators {
    pub fn flight_to(terminal_plane: f64) -> Terminators {
        Terminators {
            record_planes: Vec::new(),
            terminal_plane: Some(terminal_plane),
            clearance: None,
            domain: None,
            max_time: 1.0,
            max_steps: 50_000_000,
        }
    }
}

/// Cubic Hermite interpolation of the state inside one step.
fn hermite(s0: &TrajectoryState, s1: &TrajectoryState, t: f64) -> TrajectoryState {
    let dt = s1.t - s0.t;
    let u = (t - s0.t) / dt;
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    let position = s0.position * h00
        + s0.velocity * (h10 * dt)
        + s1.position * h01
        + s1.velocity * (h11 * dt);
    // Derivative of the Hermite basis gives the velocity.
    let d00 = (6.0 * u2 - 6.0 * u) / dt;
    let d10 = 3.0 * u2 - 4.0 * u + 1.0;
    let d01 = (-6.0 * u2 + 6.0 * u) / dt;
    let d11 = 3.0 * u2 - 2.0 * u;
    let velocity = s0.position * d00
        + s0.velocity * d10
        + s1.position * d01
        + s1.velocity * d11;
    TrajectoryState {
        t,
        position,
        velocity,
    }
}

/// Locate the crossing time of z = plane inside [s0, s1] on the Hermite
/// interpolant (bisection to machine precision in z).
fn locate_crossing(s0: &TrajectoryState, s1: &TrajectoryState, plane: f64) -> TrajectoryState {
    let mut lo = s0.t;
    let mut hi = s1.t;
    let f_lo = s0.position.z - plane;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let s = hermite(s0, s1, mid);
        let f = s.position.z - plane;
        if f.abs() <= 1e-13 * plane.abs().max(1.0) || (hi - lo) < f64::EPSILON * hi.abs() {
            return TrajectoryState {
                t: mid,
                position: Vec3::new(s.position.x, s.position.y, plane),
                velocity: s.velocity,
            };
        }
        if (f > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = hermite(s0, s1, 0.5 * (lo + hi));
    TrajectoryState {
        t: s.t,
        position: Vec3::new(s.position.x, s.position.y, plane),
        velocity: s.velocity,
    }
}

/// Integrate a single trajectory with velocity Verlet.
///
/// `field` returns the electric field E(x, t) in V/m; the force on the ion
/// is q E.  `sample_stride` stores every n-th step in `samples`
/// (0 = endpoints only).
pub fn integrate<F>(
    initial: TrajectoryState,
    species: &IonSpecies,
    field: F,
    policy: &DtPolicy,
    term: &Terminators,
    sample_stride: usize,
) -> Trajectory
where
    F: Fn(Vec3, f64) -> Vec3,
{
    let qm = species.charge_coulomb() / species.mass_kg();
    let accel = |p: Vec3, t: f64| field(p, t) * qm;

    let mut samples = vec![initial];
    let mut crossings: Vec<PlaneCrossing> = Vec::new();
    let mut crossed = vec![false; term.record_planes.len()];

    let mut state = initial;
    let mut a = accel(state.position, state.t);
    let mut dt = policy.dt_base;
    let mut steps = 0usize;

    let termination = loop {
        if steps >= term.max_steps {
            break Termination::MaxSteps;
        }
        if state.t - initial.t >= term.max_time {
            break Termination::MaxTime;
        }
        let e_norm = a.norm() / qm.abs();
        dt = policy.next_dt(state.t, dt, e_norm);

        if !a.is_finite() {
            break Termination::NanForce;
        }

        let next_pos = state.position + state.velocity * dt + a * (0.5 * dt * dt);
        let next_t = state.t + dt;
        let a_next = accel(next_pos, next_t);
        if !a_next.is_finite() {
            break Termination::NanForce;
        }
        let next_vel = state.velocity + (a + a_next) * (0.5 * dt);
        let next = TrajectoryState {
            t: next_t,
            position: next_pos,
            velocity: next_vel,
        };
        steps += 1;

        // Plane crossings (first crossing per plane).
        for (i, &plane) in term.record_planes.iter().enumerate() {
            if !crossed[i]
                && (state.position.z - plane).signum() != (next.position.z - plane).signum()
            {
                let s = locate_crossing(&state, &next, plane);
                crossings.push(PlaneCrossing {
                    plane_z: plane,
                    t: s.t,
                    position: s.position,
                    velocity: s.velocity,
                });
                crossed[i] = true;
            }
        }
        let terminal = term.terminal_plane.is_some_and(|plane| {
            (state.position.z - plane).signum() != (next.position.z - plane).signum()
        });

        if sample_stride > 0 && steps % sample_stride == 0 {
            samples.push(next);
        }

        state = next;
        a = a_next;

        if terminal {
            break Termination::TerminalPlane;
        }
        if let Some(clear) = &term.clearance {
            if clear(state.position) < 0.0 {
                break Termination::SurfaceHit;
            }
        }
        if let Some((lo, hi)) = &term.domain {
            let p = state.position;
            if p.x < lo.x || p.y < lo.y || p.z < lo.z || p.x > hi.x || p.y > hi.y || p.z > hi.z
            {
                break Termination::EscapedDomain;
            }
        }
    };

    if samples.last().map(|s| s.t) != Some(state.t) {
        samples.push(state);
    }
    crossings.sort_by(|a, b| a.t.total_cmp(&b.t));
    Trajectory {
        samples,
        crossings,
        final_state: state,
        termination,
        steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ca() -> IonSpecies {
        IonSpecies::ca40()
    }

    #[test]
    fn free_flight_crosses_plane_on_time() {
        let v0 = 19_470.0;
        let init = TrajectoryState {
            t: 0.0,
            position: Vec3::ZERO,
            velocity: Vec3::new(0.0, 0.0, v0),
        };
        let plane = 0.247;
        let mut term = Terminators::flight_to(plane);
        term.record_planes = vec![plane];
        let policy = DtPolicy::for_rf_period(1.0 / 12.155e6);
        let traj = integrate(init, &ca(), |_, _| Vec3::ZERO, &policy, &term, 0);
        assert_eq!(traj.termination, Termination::TerminalPlane);
        let c = traj.crossing_at(plane).expect("crossing recorded");
        let want = plane / v0;
        assert!(
            ((c.t - want) / want).abs() < 1e-10,
            "crossing at {} vs {want}",
            c.t
        );
        assert!((c.velocity.z - v0).abs() < 1e-9 * v0);
        assert!((c.position.z - plane).abs() < 1e-12);
    }

    #[test]
    fn uniform_field_matches_constant_acceleration() {
        let e0 = 1e5;
        let init = TrajectoryState {
            t: 0.0,
            position: Vec3::ZERO,
            velocity: Vec3::ZERO,
        };
        let plane = 1e-3;
        let species = ca();
        let mut term = Terminators::flight_to(plane);
        term.record_planes = vec![plane];
        let mut policy = DtPolicy::for_rf_period(1.0 / 12.155e6);
        policy.field_threshold = 0.0; // keep growing: Verlet exact anyway
        let traj = integrate(
            init,
            &species,
            |_, _| Vec3::new(0.0, 0.0, e0),
            &policy,
            &term,
            0,
        );
        let a = species.charge_coulomb() * e0 / species.mass_kg();
        let want = (2.0 * plane / a).sqrt();
        let c = traj.crossing_at(plane).unwrap();
        assert!(
            ((c.t - want) / want).abs() < 1e-8,
            "crossing {} vs {want}",
            c.t
        );
    }

    #[test]
    fn harmonic_well_energy_drift_stays_bounded() {
        // Static 3-D harmonic well, 1e4 periods at dt = T/1000.  Drift is
        // the change in the period-averaged energy between the first and
        // last period (velocity Verlet has a bounded energy oscillation of
        // order (w dt)^2 / 8 but no secular drift).
        let species = ca();
        let omega = 2.0 * core::f64::consts::PI * 1e6;
        let k = species.mass_kg() * omega * omega / species.charge_coulomb();
        let field = |p: Vec3, _t: f64| -> Vec3 { Vec3::new(-k * p.x, -k * p.y, -k * p.z) };
        let period = 2.0 * core::f64::consts::PI / omega;
        let dt = period / 1000.0;
        let x0 = 1e-6;
        let mut state = TrajectoryState {
            t: 0.0,
            position: Vec3::new(x0, 0.7e-6, -0.4e-6),
            velocity: Vec3::new(0.0, 0.1, 0.3),
        };
        let m = species.mass_kg();
        let q = species.charge_coulomb();
        let energy = |s: &TrajectoryState| {
            0.5 * m * s.velocity.norm_sq()
                + 0.5 * q * k * s.position.norm_sq()
        };
        let qm = q / m;
        let mut a = field(state.position, 0.0) * qm;
        let n_per_period = 1000usize;
        let n_periods = 10_000usize;
        let mut first_avg = 0.0;
        let mut last_avg = 0.0;
        for p in 0..n_periods {
            let mut acc = 0.0;
            for _ in 0..n_per_period {
                let next_pos =
                    state.position + state.velocity * dt + a * (0.5 * dt * dt);
                let a_next = field(next_pos, 0.0) * qm;
                let next_vel = state.velocity + (a + a_next) * (0.5 * dt);
                state = TrajectoryState {
                    t: state.t + dt,
                    position: next_pos,
                    velocity: next_vel,
                };
                a = a_next;
                acc += energy(&state);
            }
            let avg = acc / n_per_period as f64;
            if p == 0 {
                first_avg = avg;
            }
            if p == n_periods - 1 {
                last_avg = avg;
            }
        }
        let drift = ((last_avg - first_avg) / first_avg).abs();
        assert!(drift <= 1e-6, "energy drift {drift:.3e}");
    }

    #[test]
    fn trajectory_is_deterministic() {
        let species = ca();
        let init = TrajectoryState {
            t: 0.0,
            position: Vec3::new(1e-6, 0.0, 0.0),
            velocity: Vec3::new(0.0, 0.2, 500.0),
        };
        let field = |p: Vec3, t: f64| -> Vec3 {
            Vec3::new(-1e6 * p.x, 1e6 * p.y, 100.0 * (1e7 * t).sin())
        };
        let policy = DtPolicy::for_rf_period(1.0 / 12.155e6);
        let mut term = Terminators::flight_to(1e-4);
        term.max_steps = 20_000;
        let t1 = integrate(init, &species, field, &policy, &term, 7);
        let t2 = integrate(init, &species, field, &policy, &term, 7);
        assert_eq!(t1.samples.len(), t2.samples.len());
        for (a, b) in t1.samples.iter().zip(&t2.samples) {
            assert_eq!(a.position, b.position);
            assert_eq!(a.velocity, b.velocity);
        }
    }

    #[test]
    fn time_translation_shifts_trajectory_exactly() {
        let species = ca();
        let delta = 3.25e-6;
        let omega = 2.0 * core::f64::consts::PI * 12.155e6;
        let field_base = move |p: Vec3, t: f64| -> Vec3 {
            Vec3::new(-2e7 * p.x, 2e7 * p.y, 0.0) * (omega * t).sin()
        };
        let field_shifted = move |p: Vec3, t: f64| -> Vec3 { field_base(p, t - delta) };
        let init0 = TrajectoryState {
            t: 0.0,
            position: Vec3::new(2e-6, -1e-6, 0.0),
            velocity: Vec3::new(0.1, 0.0, 1.0),
        };
        let init1 = TrajectoryState {
            t: delta,
            ..init0
        };
        let policy = DtPolicy::for_rf_period(2.0 * core::f64::consts::PI / omega);
        let mut term = Terminators::flight_to(1.0);
        term.max_steps = 5000;
        let a = integrate(init0, &species, field_base, &policy, &term, 1);
        let b = integrate(init1, &species, field_shifted, &policy, &term, 1);
        assert_eq!(a.samples.len(), b.samples.len());
        // Covariance is exact in exact arithmetic; in f64 the shifted time
        // base re-rounds (t + delta) - delta, so compare at 1e-12.
        let xs = a
            .samples
            .iter()
            .map(|s| s.position.norm())
            .fold(0.0, f64::max);
        let vs = a
            .samples
            .iter()
            .map(|s| s.velocity.norm())
            .fold(0.0, f64::max);
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            assert!((sa.position - sb.position).norm() <= 1e-9 * xs);
            assert!((sa.velocity - sb.velocity).norm() <= 1e-9 * vs);
            assert!(((sb.t - sa.t) - delta).abs() <= 1e-12 * delta);
        }
    }

    #[test]
    fn nan_force_aborts_with_last_valid_state() {
        let species = ca();
        let init = TrajectoryState {
            t: 0.0,
            position: Vec3::ZERO,
            velocity: Vec3::new(0.0, 0.0, 100.0),
        };
        let field = |p: Vec3, _t: f64| -> Vec3 {
            if p.z > 1e-6 {
                Vec3::new(f64::NAN, 0.0, 0.0)
            } else {
                Vec3::ZERO
            }
        };
        let policy = DtPolicy::for_rf_period(1.0 / 1e7);
        let term = Terminators::flight_to(1.0);
        let traj = integrate(init, &species, field, &policy, &term, 0);
        assert_eq!(traj.termination, Termination::NanForce);
        assert!(traj.final_state.position.is_finite());
    }

    #[test]
    fn surface_hit_terminates() {
        let species = ca();
        let init = TrajectoryState {
            t: 0.0,
            position: Vec3::ZERO,
            velocity: Vec3::new(1000.0, 0.0, 0.0),
        };
        let mut term = Terminators::flight_to(1.0);
        term.clearance = Some(Arc::new(|p: Vec3| 1e-3 - p.x));
        let policy = DtPolicy::for_rf_period(1.0 / 1e7);
        let traj = integrate(init, &species, |_, _| Vec3::ZERO, &policy, &term, 0);
        assert_eq!(traj.termination, Termination::SurfaceHit);
        assert!(traj.final_state.position.x >= 1e-3);
    }

    #[test]
    fn dt_policy_examples() {
        let period = 1.0 / 12.155e6;
        let policy = DtPolicy::for_rf_period(period);
        // Inside the trap: dt = T/400 ~ 0.206 ns.
        assert!((policy.dt_base - 0.2057e-9).abs() < 0.002e-9);
        assert!((policy.next_dt(0.0, policy.dt_base, 1e5) - policy.dt_base).abs() < 1e-18);
        // Free flight: grows to dt_max and stays.
        let mut dt = policy.dt_base;
        for _ in 0..60 {
            dt = policy.next_dt(1e-3, dt, 0.0);
        }
        assert_eq!(dt, policy.dt_max);
        // A 30 ns ramp is resolved with >= 20 steps.
        let mut p2 = policy.clone();
        p2.ramp_windows = vec![(1e-6, 1e-6 + 30e-9)];
        let dt_ramp = p2.next_dt(1e-6 + 5e-9, 2e-9, 0.0);
        assert!(dt_ramp <= 1.5e-9 + 1e-18);
    }
}
