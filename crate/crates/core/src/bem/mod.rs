//! Collocation boundary-element solver for the Dirichlet problem on an
//! electrode mesh.
//!
//! Unknowns are reduced panel charges `u_j = sigma_j A_j / (4 pi eps0)`
//! (units V m), so the collocation matrix is the panel-averaged single-layer
//! kernel `A_ij = (1/A_j) integral_j dA / |x_i - y|`.  Far entries use the
//! point kernel through the multipole evaluator; pairs closer than
//! [`BemConfig::near_field_factor`] panel diameters (and the singular
//! diagonal) are corrected by Gauss quadrature / the analytic self-term.
//! The sparse correction table is built once per mesh and shared by all
//! per-channel solves.

mod gmres;
mod panelint;

pub use gmres::{gmres, GmresOptions, GmresResult};
pub use panelint::{average_kernel, average_kernel_gradient, quadrature, self_term_average};

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::error::{CoreError, CoreResult};
use crate::fmm::{self, FmmConfig};
use crate::geometry::{ChannelId, ElectrodeId, ElectrodeMesh};
use crate::units::COULOMB;
use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct BemConfig {
    /// Relative residual target of the linear solve.
    pub tol: f64,
    pub restart: usize,
    pub max_iters: usize,
    /// Centroid distance, in panel diameters, below which the averaged
    /// kernel replaces the point kernel.
    pub near_field_factor: f64,
    /// Evaluation guard zone in panel diameters.
    pub guard_factor: f64,
}

impl Default for BemConfig {
    fn default() -> Self {
        BemConfig {
            tol: 1e-8,
            restart: 120,
            max_iters: 600,
            near_field_factor: 3.0,
            guard_factor: 1.0,
        }
    }
}

/// Per-channel unit-voltage solution.
#[derive(Debug, Clone)]
pub struct ChargeSolution {
    pub channel: ChannelId,
    /// Reduced panel charges sigma_j A_j / (4 pi eps0), V m.
    pub reduced: Vec<f64>,
    /// Relative residual of the linear solve.
    pub residual: f64,
    pub iterations: usize,
    /// Max boundary-condition violation at panel centroids, V.
    pub bc_error: f64,
}

impl ChargeSolution {
    /// Surface charge density per panel, C/m^2.
    pub fn surface_charge_density(&self, mesh: &ElectrodeMesh) -> Vec<f64> {
        self.reduced
            .iter()
            .zip(&mesh.panels)
            .map(|(u, p)| u / (COULOMB * p.area))
            .collect()
    }

    /// Total charge on one electrode, C.
    pub fn electrode_charge(&self, mesh: &ElectrodeMesh, id: ElectrodeId) -> f64 {
        self.reduced
            .iter()
            .zip(&mesh.panels)
            .filter(|(_, p)| p.electrode == id)
            .map(|(u, _)| u / COULOMB)
            .sum()
    }

    /// Total charge over the whole mesh, C.
    pub fn total_charge(&self) -> f64 {
        self.reduced.iter().map(|u| u / COULOMB).sum::<f64>()
    }
}

/// Evaluation result at arbitrary points.
#[derive(Debug, Clone)]
pub struct FieldSample {
    /// Potential, V.
    pub potential: Vec<f64>,
    /// E = -grad(potential), V/m.
    pub field: Vec<Vec3>,
    /// Point lies within the guard zone of some panel.
    pub guarded: Vec<bool>,
}

struct NearEntry {
    source: u32,
    /// Averaged-kernel value minus the point-kernel value at the collocation
    /// point (the diagonal stores the full self average).
    delta: f64,
}

/// Matrix-free collocation operator; construction is per-mesh, solves are
/// per-channel.
pub struct BemOperator {
    centroids: Vec<Vec3>,
    areas: Vec<f64>,
    diameters: Vec<f64>,
    channels: Vec<ChannelId>,
    diag: Vec<f64>,
    near: Vec<Vec<NearEntry>>,
    /// Cached quadrature rules per panel (coarse, refined).
    quad_lo: Vec<Vec<(Vec3, f64)>>,
    quad_hi: Vec<Vec<(Vec3, f64)>>,
    /// Flattened coarse quadrature points used as smooth far-field sources
    /// by [`BemOperator::eval`]: positions, owning panel, charge fraction.
    far_points: Vec<Vec3>,
    far_panel: Vec<u32>,
    far_frac: Vec<f64>,
    /// Spatial hash over panel centroids for near-pair lookup.
    grid: HashMap<(i64, i64, i64), Vec<u32>>,
    cell_size: f64,
    max_diameter: f64,
    pub fmm: FmmConfig,
    pub config: BemConfig,
}

impl BemOperator {
    pub fn new(mesh: &ElectrodeMesh, config: BemConfig, fmm: FmmConfig) -> CoreResult<Self> {
        if mesh.is_empty() {
            return Err(CoreError::BadMesh("empty mesh".into()));
        }
        fmm.validate()?;
        let n = mesh.len();
        let mut centroids = Vec::with_capacity(n);
        let mut areas = Vec::with_capacity(n);
        let mut diameters = Vec::with_capacity(n);
        let mut channels = Vec::with_capacity(n);
        let mut max_diameter: f64 = 0.0;
        for (i, p) in mesh.panels.iter().enumerate() {
            if !(p.area > 0.0) {
                return Err(CoreError::BadMesh(format!(
                    "panel {i} has zero area; singular self-term"
                )));
            }
            centroids.push(p.centroid);
            areas.push(p.area);
            let d = p.diameter();
            diameters.push(d);
            max_diameter = max_diameter.max(d);
            channels.push(p.electrode.channel());
        }

        let quad_lo: Vec<_> = mesh
            .panels
            .par_iter()
            .map(|p| panelint::quadrature(p, false))
            .collect();
        let quad_hi: Vec<_> = mesh
            .panels
            .par_iter()
            .map(|p| panelint::quadrature(p, true))
            .collect();
        let diag: Vec<f64> = mesh
            .panels
            .par_iter()
            .map(panelint::self_term_average)
            .collect();

        let cell_size = (config.near_field_factor * max_diameter).max(1e-12);
        let key = |v: Vec3| {
            (
                (v.x / cell_size).floor() as i64,
                (v.y / cell_size).floor() as i64,
                (v.z / cell_size).floor() as i64,
            )
        };
        let mut grid: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (j, &c) in centroids.iter().enumerate() {
            grid.entry(key(c)).or_default().push(j as u32);
        }

        // Near-field corrections per collocation point.
        let near: Vec<Vec<NearEntry>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let xi = centroids[i];
                let (kx, ky, kz) = key(xi);
                let mut entries = Vec::new();
                for dx in -1..=1i64 {
                    for dy in -1..=1i64 {
                        for dz in -1..=1i64 {
                            let Some(list) = grid.get(&(kx + dx, ky + dy, kz + dz)) else {
                                continue;
                            };
                            for &j in list {
                                let ju = j as usize;
                                if ju == i {
                                    entries.push(NearEntry {
                                        source: j,
                                        delta: diag[ju],
                                    });
                                    continue;
                                }
                                let r = (xi - centroids[ju]).norm();
                                let scale = diameters[i].max(diameters[ju]);
                                if r > config.near_field_factor * scale {
                                    continue;
                                }
                                let pts = if r < 1.5 * scale {
                                    &quad_hi[ju]
                                } else {
                                    &quad_lo[ju]
                                };
                                let avg = panelint::average_kernel(pts, areas[ju], xi);
                                entries.push(NearEntry {
                                    source: j,
                                    delta: avg - 1.0 / r,
                                });
                            }
                        }
                    }
                }
                entries.sort_by_key(|e| e.source);
                entries
            })
            .collect();

        // Coarse quadrature points double as far-field sources for
        // off-surface evaluation; a centroid monopole is too crude to keep
        // second differences of the potential harmonic near the near/far
        // switching radius.
        let mut far_points = Vec::new();
        let mut far_panel = Vec::new();
        let mut far_frac = Vec::new();
        for (j, pts) in quad_lo.iter().enumerate() {
            for &(p, w) in pts {
                far_points.push(p);
                far_panel.push(j as u32);
                far_frac.push(w / areas[j]);
            }
        }

        Ok(BemOperator {
            centroids,
            areas,
            diameters,
            channels,
            diag,
            near,
            quad_lo,
            quad_hi,
            far_points,
            far_panel,
            far_frac,
            grid,
            cell_size,
            max_diameter,
            fmm,
            config,
        })
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    /// y = A u at the collocation points.
    pub fn matvec(&self, u: &[f64]) -> Vec<f64> {
        let mut pot = fmm::potentials_reduced(&self.centroids, u, &self.centroids, &self.fmm);
        pot.par_iter_mut().enumerate().for_each(|(i, p)| {
            let mut corr = 0.0;
            for e in &self.near[i] {
                corr += e.delta * u[e.source as usize];
            }
            *p += corr;
        });
        pot
    }

    /// Solve for prescribed per-channel voltages (V); channels absent from
    /// the map are grounded.
    pub fn solve_boundary(
        &self,
        voltages: &BTreeMap<ChannelId, f64>,
        label: ChannelId,
    ) -> CoreResult<ChargeSolution> {
        let b: Vec<f64> = self
            .channels
            .iter()
            .map(|c| voltages.get(c).copied().unwrap_or(0.0))
            .collect();
        let inv_diag: Vec<f64> = self.diag.iter().map(|d| 1.0 / d).collect();
        let apply = |y: &[f64]| -> Vec<f64> {
            let scaled: Vec<f64> = y.iter().zip(&inv_diag).map(|(v, d)| v * d).collect();
            self.matvec(&scaled)
        };
        let opts = GmresOptions {
            tol: self.config.tol,
            restart: self.config.restart,
            max_iters: self.config.max_iters,
        };
        let res = gmres::gmres(apply, &b, &opts)?;
        let reduced: Vec<f64> = res.x.iter().zip(&inv_diag).map(|(v, d)| v * d).collect();

        let check = self.matvec(&reduced);
        let bc_error = check
            .iter()
            .zip(&b)
            .map(|(a, want)| (a - want).abs())
            .fold(0.0, f64::max);

        Ok(ChargeSolution {
            channel: label,
            reduced,
            residual: res.residual,
            iterations: res.iterations,
            bc_error,
        })
    }

    /// Unit-voltage solve for one electrical channel.
    pub fn solve_channel(&self, channel: ChannelId) -> CoreResult<ChargeSolution> {
        if !self.channels.contains(&channel) {
            return Err(CoreError::Config(format!(
                "channel {channel} not present in mesh"
            )));
        }
        let mut bc = BTreeMap::new();
        bc.insert(channel, 1.0);
        self.solve_boundary(&bc, channel)
    }

    /// Potential/field of a reduced charge vector at arbitrary points.
    ///
    /// Points inside the guard zone (within [`BemConfig::guard_factor`]
    /// panel diameters of a panel centroid) are evaluated anyway but
    /// flagged.
    pub fn eval(&self, reduced: &[f64], points: &[Vec3]) -> FieldSample {
        let far_charges: Vec<f64> = self
            .far_panel
            .iter()
            .zip(&self.far_frac)
            .map(|(&j, &f)| reduced[j as usize] * f)
            .collect();
        let base = fmm::evaluate_reduced(&self.far_points, &far_charges, points, &self.fmm);
        let mut potential = base.potential;
        let mut field = base.field;
        let mut guarded = vec![false; points.len()];

        let key = |v: Vec3| {
            (
                (v.x / self.cell_size).floor() as i64,
                (v.y / self.cell_size).floor() as i64,
                (v.z / self.cell_size).floor() as i64,
            )
        };
        potential
            .par_iter_mut()
            .zip(field.par_iter_mut())
            .zip(guarded.par_iter_mut())
            .zip(points.par_iter())
            .for_each(|(((pot, fld), guard), &x)| {
                let (kx, ky, kz) = key(x);
                for dx in -1..=1i64 {
                    for dy in -1..=1i64 {
                        for dz in -1..=1i64 {
                            let Some(list) = self.grid.get(&(kx + dx, ky + dy, kz + dz)) else {
                                continue;
                            };
                            for &j in list {
                                let ju = j as usize;
                                let d = x - self.centroids[ju];
                                let r = d.norm();
                                let diam = self.diameters[ju];
                                if r <= self.config.guard_factor * diam {
                                    *guard = true;
                                }
                                if r > self.config.near_field_factor * diam.max(1e-300) {
                                    continue;
                                }
                                let u = reduced[ju];
                                if u == 0.0 {
                                    continue;
                                }
                                // Replace this panel's coarse point sources
                                // with the refined panel integral.
                                for &(p, w) in &self.quad_lo[ju] {
                                    let dd = x - p;
                                    let rr2 = dd.norm_sq();
                                    if rr2 > 0.0 {
                                        let q = u * w / self.areas[ju];
                                        let rr = rr2.sqrt();
                                        *pot -= q / rr;
                                        *fld = *fld - dd * (q / (rr2 * rr));
                                    }
                                }
                                let pts = &self.quad_hi[ju];
                                let avg = panelint::average_kernel(pts, self.areas[ju], x);
                                let avg_grad =
                                    panelint::average_kernel_gradient(pts, self.areas[ju], x);
                                *pot += u * avg;
                                *fld = *fld - avg_grad * u;
                            }
                        }
                    }
                }
            });

        FieldSample {
            potential,
            field,
            guarded,
        }
    }

    pub fn max_diameter(&self) -> f64 {
        self.max_diameter
    }
}

/// One-shot unit-voltage solve; prefer building a [`BemOperator`] once when
/// solving several channels of the same mesh.
pub fn solve_basis(
    mesh: &ElectrodeMesh,
    driven: ChannelId,
    config: BemConfig,
    fmm: FmmConfig,
) -> CoreResult<ChargeSolution> {
    BemOperator::new(mesh, config, fmm)?.solve_channel(driven)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{plate_pair, sphere_mesh, ElectrodeId};
    use crate::units::EPSILON_0 as E0;

    fn sphere_operator(n: usize) -> (ElectrodeMesh, BemOperator) {
        let mesh = sphere_mesh(1.0, n, ElectrodeId::Aux(0));
        let op = BemOperator::new(&mesh, BemConfig::default(), FmmConfig::default()).unwrap();
        (mesh, op)
    }

    #[test]
    fn unit_sphere_capacitance() {
        // >= 2000 panels; total charge = 4 pi eps0 a within 1%.
        let (mesh, op) = sphere_operator(14); // 6*14*14*2 = 2352 panels
        assert!(mesh.len() >= 2000);
        let sol = op.solve_channel(ChannelId::Aux(0)).unwrap();
        let want = 4.0 * core::f64::consts::PI * E0;
        let got = sol.total_charge();
        let rel = (got - want).abs() / want;
        assert!(rel < 0.01, "capacitance error {rel:.4}");
        assert!(sol.residual <= op.config.tol);
        // Boundary condition reproduced within 10x the solver tolerance.
        assert!(sol.bc_error <= 10.0 * op.config.tol);
    }

    #[test]
    fn sphere_interior_potential_is_constant() {
        let (_, op) = sphere_operator(10);
        let sol = op.solve_channel(ChannelId::Aux(0)).unwrap();
        let sample = op.eval(&sol.reduced, &[Vec3::ZERO, Vec3::new(0.3, 0.1, -0.2)]);
        for (p, g) in sample.potential.iter().zip(&sample.guarded) {
            assert!(!g);
            assert!((p - 1.0).abs() < 5e-3, "interior potential {p}");
        }
        // Exterior: potential ~ a/r.
        let outside = op.eval(&sol.reduced, &[Vec3::new(0.0, 0.0, 3.0)]);
        assert!((outside.potential[0] - 1.0 / 3.0).abs() < 5e-3);
    }

    #[test]
    fn parallel_plates_midgap_field() {
        // +/- 0.5 V plates, separation d, side 12 d: |E| = 1/d within 2%.
        let d = 1e-3;
        let mesh = plate_pair(12.0 * d, d, d / 4.0);
        let op = BemOperator::new(&mesh, BemConfig::default(), FmmConfig::default()).unwrap();
        let mut bc = BTreeMap::new();
        bc.insert(ChannelId::Aux(0), 0.5);
        bc.insert(ChannelId::Aux(1), -0.5);
        let sol = op.solve_boundary(&bc, ChannelId::Aux(0)).unwrap();
        let sample = op.eval(&sol.reduced, &[Vec3::ZERO]);
        let e = sample.field[0];
        let want = 1.0 / d;
        assert!(
            (e.norm() - want).abs() < 0.02 * want,
            "midgap field {:.4e} vs {want:.4e}",
            e.norm()
        );
        // Field points from + plate (top, +z) to - plate (bottom): -z.
        assert!(e.z < 0.0);
        assert!(e.x.abs() < 0.01 * want && e.y.abs() < 0.01 * want);
    }

    #[test]
    fn superposition_of_unit_solves_matches_joint_solve() {
        let d = 1e-3;
        let mesh = plate_pair(6.0 * d, d, d / 3.0);
        // Tight solves so linearity is testable at 1e-10 relative.
        let cfg = BemConfig {
            tol: 1e-13,
            ..BemConfig::default()
        };
        let op = BemOperator::new(&mesh, cfg, FmmConfig::default()).unwrap();
        let a = op.solve_channel(ChannelId::Aux(0)).unwrap();
        let b = op.solve_channel(ChannelId::Aux(1)).unwrap();
        let mut bc = BTreeMap::new();
        bc.insert(ChannelId::Aux(0), 1.0);
        bc.insert(ChannelId::Aux(1), 1.0);
        let joint = op.solve_boundary(&bc, ChannelId::Aux(0)).unwrap();
        let scale: f64 = joint.reduced.iter().map(|u| u.abs()).fold(0.0, f64::max);
        for ((ua, ub), uj) in a.reduced.iter().zip(&b.reduced).zip(&joint.reduced) {
            assert!(
                ((ua + ub) - uj).abs() <= 1e-10 * scale,
                "linearity violated: {} vs {}",
                ua + ub,
                uj
            );
        }
    }

    #[test]
    fn zero_area_panel_rejected() {
        let mut mesh = sphere_mesh(1.0, 4, ElectrodeId::Aux(0));
        mesh.panels[0].area = 0.0;
        let err = BemOperator::new(&mesh, BemConfig::default(), FmmConfig::default());
        assert!(matches!(err, Err(CoreError::BadMesh(_))));
    }
}
