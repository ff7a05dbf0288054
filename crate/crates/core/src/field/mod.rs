//! Per-channel basis field solutions and their superposition.
//!
//! A [`BasisFieldSet`] holds one unit-voltage [`ChargeSolution`] per
//! electrical channel of a mesh, plus optional sampled [`FieldGrid`]s.
//! Every later physics query is a voltage-weighted superposition over this
//! set; superposition closure is exact by construction.

mod grid;

pub use grid::{FieldGrid, GridSpec};

use std::collections::BTreeMap;

use crate::bem::{BemConfig, BemOperator, ChargeSolution};
use crate::error::{CoreError, CoreResult};
use crate::fmm::FmmConfig;
use crate::geometry::{ChannelId, ElectrodeMesh, LensSpec, TrapSpec};
use crate::vec3::Vec3;

/// Per-channel voltages; channels absent from the map are at 0 V.
pub type Voltages = BTreeMap<ChannelId, f64>;

#[derive(Debug, Clone)]
pub struct ChannelBasis {
    pub channel: ChannelId,
    pub solution: ChargeSolution,
    /// Interpolation grids over disjoint regions.
    pub grids: Vec<FieldGrid>,
}

/// Unit-voltage solutions for all channels of one mesh.
pub struct BasisFieldSet {
    pub mesh: ElectrodeMesh,
    pub operator: BemOperator,
    /// Sorted by channel id.
    pub channels: Vec<ChannelBasis>,
}

impl BasisFieldSet {
    /// Solve every channel of the mesh at unit voltage.
    pub fn solve(
        mesh: ElectrodeMesh,
        bem: BemConfig,
        fmm: FmmConfig,
    ) -> CoreResult<BasisFieldSet> {
        let operator = BemOperator::new(&mesh, bem, fmm)?;
        let mut channels = Vec::new();
        for ch in mesh.channels() {
            let solution = operator.solve_channel(ch)?;
            channels.push(ChannelBasis {
                channel: ch,
                solution,
                grids: Vec::new(),
            });
        }
        Ok(BasisFieldSet {
            mesh,
            operator,
            channels,
        })
    }

    /// Rebuild the operator after deserializing solutions from a cache.
    pub fn from_parts(
        mesh: ElectrodeMesh,
        bem: BemConfig,
        fmm: FmmConfig,
        channels: Vec<ChannelBasis>,
    ) -> CoreResult<BasisFieldSet> {
        let operator = BemOperator::new(&mesh, bem, fmm)?;
        Ok(BasisFieldSet {
            mesh,
            operator,
            channels,
        })
    }

    pub fn channel(&self, id: ChannelId) -> Option<&ChannelBasis> {
        self.channels.iter().find(|c| c.channel == id)
    }

    pub fn channel_ids(&self) -> Vec<ChannelId> {
        self.channels.iter().map(|c| c.channel).collect()
    }

    /// Voltage-weighted combination of the reduced charge vectors.
    pub fn combined_reduced(&self, volts: &Voltages) -> Vec<f64> {
        let n = self.mesh.len();
        let mut u = vec![0.0; n];
        for cb in &self.channels {
            let v = volts.get(&cb.channel).copied().unwrap_or(0.0);
            if v != 0.0 {
                for (acc, q) in u.iter_mut().zip(&cb.solution.reduced) {
                    *acc += v * q;
                }
            }
        }
        u
    }

    /// Build interpolation grids for the given channels over one region.
    pub fn build_grids(&mut self, spec: &GridSpec, channels: &[ChannelId]) -> CoreResult<()> {
        for &id in channels {
            let reduced = {
                let cb = self
                    .channels
                    .iter()
                    .find(|c| c.channel == id)
                    .ok_or_else(|| {
                        CoreError::Config(format!("channel {id} not in basis set"))
                    })?;
                cb.solution.reduced.clone()
            };
            let op = &self.operator;
            let grid = FieldGrid::build(spec, |pts| {
                let s = op.eval(&reduced, pts);
                (s.potential, s.field, s.guarded)
            });
            let cb = self
                .channels
                .iter_mut()
                .find(|c| c.channel == id)
                .expect("checked above");
            cb.grids.push(grid);
        }
        Ok(())
    }

    /// Potential at points under the given voltages.  Uses grid
    /// interpolation where every energized channel covers the point,
    /// direct evaluation otherwise.  The flag marks guard-zone points.
    pub fn potential_at(&self, points: &[Vec3], volts: &Voltages) -> (Vec<f64>, Vec<bool>) {
        let (pot, _, flags) = self.eval_superposed(points, volts);
        (pot, flags)
    }

    /// Field (V/m) at points under the given voltages.
    pub fn field_at(&self, points: &[Vec3], volts: &Voltages) -> (Vec<Vec3>, Vec<bool>) {
        let (_, field, flags) = self.eval_superposed(points, volts);
        (field, flags)
    }

    fn energized(&self, volts: &Voltages) -> Vec<(&ChannelBasis, f64)> {
        self.channels
            .iter()
            .filter_map(|cb| {
                let v = volts.get(&cb.channel).copied().unwrap_or(0.0);
                (v != 0.0).then_some((cb, v))
            })
            .collect()
    }

    fn eval_superposed(
        &self,
        points: &[Vec3],
        volts: &Voltages,
    ) -> (Vec<f64>, Vec<Vec3>, Vec<bool>) {
        let active = self.energized(volts);
        let n = points.len();
        let mut pot = vec![0.0; n];
        let mut field = vec![Vec3::ZERO; n];
        let mut flags = vec![false; n];
        let mut direct_idx: Vec<usize> = Vec::new();

        'points: for (i, &p) in points.iter().enumerate() {
            let mut acc_p = 0.0;
            let mut acc_f = Vec3::ZERO;
            for (cb, v) in &active {
                match cb.grids.iter().find(|g| g.contains(p)) {
                    Some(g) => {
                        let (phi, e, ok) = g.eval(p);
                        if !ok {
                            flags[i] = true;
                        }
                        acc_p += v * phi;
                        acc_f += e * *v;
                    }
                    None => {
                        direct_idx.push(i);
                        continue 'points;
                    }
                }
            }
            pot[i] = acc_p;
            field[i] = acc_f;
        }

        if !direct_idx.is_empty() {
            let pts: Vec<Vec3> = direct_idx.iter().map(|&i| points[i]).collect();
            let combined = self.combined_reduced(volts);
            let s = self.operator.eval(&combined, &pts);
            for (k, &i) in direct_idx.iter().enumerate() {
                pot[i] = s.potential[k];
                field[i] = s.field[k];
                flags[i] = flags[i] || s.guarded[k];
            }
        }
        (pot, field, flags)
    }
}

/// Default grids over the trap channel and exit region: a fine core around
/// the trapping site plus a coarser downstream section reaching far enough
/// into the shield tube that the residual potential at the +z face is
/// negligible against the beam energy.  The regions abut without overlap;
/// transversally the beam stays within tens of micrometres of the axis.
pub fn default_trap_grids(trap: &TrapSpec) -> Vec<GridSpec> {
    let half_t = 0.35e-3;
    let z_seam = 6.0e-3;
    let open_end = trap.deflector.z_center + trap.deflector.size / 2.0 + 8.0e-3;
    let z_hi = trap
        .shield
        .as_ref()
        .map(|s| s.z_max - 5.0e-3)
        .unwrap_or(open_end)
        .max(open_end);
    vec![
        GridSpec {
            min: Vec3::new(-half_t, -half_t, -z_seam),
            max: Vec3::new(half_t, half_t, z_seam),
            spacing: Vec3::new(50e-6, 50e-6, 50e-6),
        },
        GridSpec {
            min: Vec3::new(-half_t, -half_t, z_seam),
            max: Vec3::new(half_t, half_t, z_hi),
            spacing: Vec3::new(100e-6, 100e-6, 150e-6),
        },
    ]
}

/// Default grid around the einzel lens.
pub fn default_lens_grid(lens: &LensSpec) -> GridSpec {
    let half_t = 0.32e-3;
    let half_len = lens.total_length() / 2.0 + 3.0e-3;
    GridSpec {
        min: Vec3::new(-half_t, -half_t, lens.center_z - half_len),
        max: Vec3::new(half_t, half_t, lens.center_z + half_len),
        spacing: Vec3::new(20e-6, 20e-6, 30e-6),
    }
}
