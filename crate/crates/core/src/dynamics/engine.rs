//! Binding of solved basis fields to a voltage schedule: the force model
//! used by trajectory integration.
//!
//! The time dependence factorizes exactly into voltage coefficients times
//! static unit-voltage fields.  At construction the schedule is compiled
//! into a few composite grids, one per (grid region, time dependence
//! class): all static contributions of a region merge into one grid, all
//! RF contributions with a common (omega, phase) into another, all
//! synchronously switched ramps into a third.  Outside every grid box a
//! composite contributes nothing; grid extents are chosen so the residual
//! potential there is negligible against the beam energy.

use std::sync::Arc;

use crate::error::{CoreError, CoreResult};
use crate::field::{BasisFieldSet, FieldGrid};
use crate::geometry::SceneSpec;
use crate::vec3::Vec3;

use super::waveform::{RampShape, WaveformSchedule};

#[derive(Debug, Clone, PartialEq)]
enum TimeClass {
    Static,
    Rf { omega: f64, phase: f64 },
    Ramp { trigger: f64, ramp: f64, shape: RampShape },
}

impl TimeClass {
    #[inline]
    fn value(&self, t: f64) -> f64 {
        match self {
            TimeClass::Static => 1.0,
            TimeClass::Rf { omega, phase } => (omega * t + phase).sin(),
            TimeClass::Ramp {
                trigger,
                ramp,
                shape,
            } => {
                if t < *trigger {
                    0.0
                } else {
                    let u = if *ramp > 0.0 {
                        ((t - trigger) / ramp).min(1.0)
                    } else {
                        1.0
                    };
                    match shape {
                        RampShape::Smoothstep => u * u * (3.0 - 2.0 * u),
                        RampShape::Linear => u,
                    }
                }
            }
        }
    }
}

struct Composite {
    class: TimeClass,
    grid: FieldGrid,
}

/// Superposed, time-dependent field evaluator; owns its composite grids.
pub struct FieldEngine {
    composites: Vec<Composite>,
}

/// Geometry key of a grid (grids built from the same `GridSpec` match).
fn grid_key(g: &FieldGrid) -> (i64, i64, i64, usize, usize, usize) {
    let q = |x: f64| (x * 1e9).round() as i64;
    let d = g.dims();
    (q(g.box_min.x), q(g.box_min.y), q(g.box_min.z), d[0], d[1], d[2])
}

fn add_weighted(acc: &mut FieldGrid, grid: &FieldGrid, w: f64) {
    for (a, b) in acc.potential.iter_mut().zip(&grid.potential) {
        *a += w * b;
    }
    for (a, b) in acc.field.iter_mut().zip(&grid.field) {
        *a += *b * w;
    }
    for (a, b) in acc.mask.iter_mut().zip(&grid.mask) {
        *a &= *b;
    }
}

fn zeroed_like(grid: &FieldGrid) -> FieldGrid {
    let mut g = grid.clone();
    g.potential.iter_mut().for_each(|v| *v = 0.0);
    g.field.iter_mut().for_each(|v| *v = Vec3::ZERO);
    g.mask.iter_mut().for_each(|m| *m = true);
    g
}

impl FieldEngine {
    /// Compile a schedule against one or more solved basis sets (for
    /// example the trap basis and a lens basis).  Every channel that is not
    /// identically zero must carry an interpolation grid in some basis set.
    pub fn new(bases: &[&BasisFieldSet], schedule: &WaveformSchedule) -> CoreResult<FieldEngine> {
        let mut composites: Vec<Composite> = Vec::new();
        let mut keys: Vec<((i64, i64, i64, usize, usize, usize), TimeClass)> = Vec::new();

        let mut add = |grid: &FieldGrid, class: TimeClass, weight: f64| {
            if weight == 0.0 {
                return;
            }
            let key = (grid_key(grid), class.clone());
            if let Some(pos) = keys.iter().position(|k| *k == key) {
                add_weighted(&mut composites[pos].grid, grid, weight);
            } else {
                let mut g = zeroed_like(grid);
                add_weighted(&mut g, grid, weight);
                keys.push(key);
                composites.push(Composite { class, grid: g });
            }
        };

        for wf in &schedule.channels {
            if wf.is_identically_zero() {
                continue;
            }
            let mut grids: Vec<&FieldGrid> = Vec::new();
            for basis in bases {
                if let Some(cb) = basis.channel(wf.channel) {
                    if !cb.grids.is_empty() {
                        grids.extend(cb.grids.iter());
                        break;
                    }
                }
            }
            if grids.is_empty() {
                return Err(CoreError::Config(format!(
                    "channel {} is energized but has no field grid",
                    wf.channel
                )));
            }
            for grid in grids {
                add(grid, TimeClass::Static, wf.static_level);
                if let Some(rf) = &wf.rf {
                    add(
                        grid,
                        TimeClass::Rf {
                            omega: rf.omega,
                            phase: rf.phase,
                        },
                        rf.amplitude,
                    );
                }
                if let Some(sw) = &wf.switch {
                    add(
                        grid,
                        TimeClass::Ramp {
                            trigger: sw.trigger,
                            ramp: sw.ramp,
                            shape: sw.shape,
                        },
                        sw.target - wf.static_level,
                    );
                }
            }
        }
        Ok(FieldEngine { composites })
    }

    /// E(x, t), V/m.  Composites whose grid does not cover x contribute 0.
    #[inline]
    pub fn field(&self, p: Vec3, t: f64) -> Vec3 {
        let mut e = Vec3::ZERO;
        for c in &self.composites {
            if c.grid.contains(p) {
                let v = c.class.value(t);
                if v != 0.0 {
                    let (_, ef, _) = c.grid.eval(p);
                    e += ef * v;
                }
            }
        }
        e
    }

    /// Potential (V) at (x, t).
    pub fn potential(&self, p: Vec3, t: f64) -> f64 {
        let mut phi = 0.0;
        for c in &self.composites {
            if c.grid.contains(p) {
                let v = c.class.value(t);
                if v != 0.0 {
                    phi += v * c.grid.eval(p).0;
                }
            }
        }
        phi
    }

    pub fn composite_count(&self) -> usize {
        self.composites.len()
    }
}

/// Signed clearance (m) to the conductor guard zones of a scene; negative
/// inside a guard zone.
pub struct SceneClearance {
    r_channel: f64,
    half_length: f64,
    defl_half_gap: f64,
    defl_z: (f64, f64),
    lens_bore: Option<(f64, f64, f64)>,
    guard: f64,
}

impl SceneClearance {
    pub fn new(scene: &SceneSpec, guard: f64) -> SceneClearance {
        let trap = &scene.trap;
        SceneClearance {
            r_channel: trap.face_separation / 2.0,
            half_length: trap.blade_length / 2.0,
            defl_half_gap: trap.deflector.gap / 2.0,
            defl_z: (
                trap.deflector.z_center - trap.deflector.size / 2.0,
                trap.deflector.z_center + trap.deflector.size / 2.0,
            ),
            lens_bore: scene.lens.as_ref().map(|l| {
                let half = l.total_length() / 2.0;
                (l.bore_diameter / 2.0, l.center_z - half, l.center_z + half)
            }),
            guard,
        }
    }

    pub fn clearance(&self, p: Vec3) -> f64 {
        let mut c = f64::MAX;
        if p.z.abs() <= self.half_length {
            // Inside the blade channel: keep away from the four front faces.
            c = c
                .min(self.r_channel - p.x.abs())
                .min(self.r_channel - p.y.abs());
        }
        if p.z >= self.defl_z.0 && p.z <= self.defl_z.1 {
            c = c.min(self.defl_half_gap - p.x.abs());
        }
        if let Some((bore, z0, z1)) = self.lens_bore {
            if p.z >= z0 && p.z <= z1 {
                c = c.min(bore - (p.x * p.x + p.y * p.y).sqrt());
            }
        }
        c - self.guard
    }

    pub fn as_fn(self) -> Arc<dyn Fn(Vec3) -> f64 + Send + Sync> {
        Arc::new(move |p| self.clearance(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TrapSpec;

    #[test]
    fn clearance_signs() {
        let scene = SceneSpec {
            trap: TrapSpec::default(),
            ..SceneSpec::default()
        };
        let c = SceneClearance::new(&scene, 0.2e-3);
        // On axis inside the trap: comfortably positive.
        assert!(c.clearance(Vec3::ZERO) > 0.5e-3);
        // Close to a blade face: negative.
        assert!(c.clearance(Vec3::new(0.95e-3, 0.0, 0.0)) < 0.0);
        // Beyond the trap end, before the deflectors: wide open.
        assert!(c.clearance(Vec3::new(0.0, 0.0, 33.5e-3)) > 1e-3);
        // Between the deflection plates.
        assert!(c.clearance(Vec3::new(0.0, 0.0, 36e-3)) > 1e-3);
        assert!(c.clearance(Vec3::new(1.95e-3, 0.0, 36e-3)) < 0.0);
    }

    #[test]
    fn time_class_values() {
        let ramp = TimeClass::Ramp {
            trigger: 1e-6,
            ramp: 30e-9,
            shape: RampShape::Smoothstep,
        };
        assert_eq!(ramp.value(0.5e-6), 0.0);
        assert_eq!(ramp.value(1e-6 + 31e-9), 1.0);
        let mid = ramp.value(1e-6 + 15e-9);
        assert!((mid - 0.5).abs() < 1e-12);

        let step = TimeClass::Ramp {
            trigger: 1e-6,
            ramp: 0.0,
            shape: RampShape::Linear,
        };
        assert_eq!(step.value(1e-6), 1.0);
        assert_eq!(step.value(0.999e-6), 0.0);
    }
}
