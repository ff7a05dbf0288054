//! Sampled potential grid with C1 cubic-convolution interpolation.
//!
//! The interpolant passes through the node samples exactly; the field
//! returned by [`FieldGrid::eval`] is the analytic gradient of that
//! interpolant, so the force derived from it is conservative by
//! construction.  Nodes may be masked invalid (conductor guard zones);
//! evaluations whose stencil touches a masked node are flagged.

use crate::vec3::Vec3;

/// Requested grid coverage; the builder pads one cell on every side so the
/// full cubic stencil exists everywhere inside [min, max].
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub min: Vec3,
    pub max: Vec3,
    pub spacing: Vec3,
}

impl GridSpec {
    pub fn cube(center: Vec3, half: f64, spacing: f64) -> GridSpec {
        GridSpec {
            min: center - Vec3::new(half, half, half),
            max: center + Vec3::new(half, half, half),
            spacing: Vec3::new(spacing, spacing, spacing),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FieldGrid {
    /// Lowest node coordinate (one cell outside the advertised box).
    node_min: Vec3,
    step: Vec3,
    dims: [usize; 3],
    /// Advertised coverage.
    pub box_min: Vec3,
    pub box_max: Vec3,
    /// Potential samples, x-fastest layout, V.
    pub potential: Vec<f64>,
    /// Reference field samples at the nodes, V/m.
    pub field: Vec<Vec3>,
    /// Node validity (false inside conductor guard zones).
    pub mask: Vec<bool>,
    /// Interpolation order (4 = cubic convolution).
    pub order: usize,
}

/// Catmull-Rom weights and derivatives on t in [0, 1].
#[inline]
fn cr_weights(t: f64) -> ([f64; 4], [f64; 4]) {
    let t2 = t * t;
    let t3 = t2 * t;
    let w = [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ];
    let dw = [
        0.5 * (-3.0 * t2 + 4.0 * t - 1.0),
        0.5 * (9.0 * t2 - 10.0 * t),
        0.5 * (-9.0 * t2 + 8.0 * t + 1.0),
        0.5 * (3.0 * t2 - 2.0 * t),
    ];
    (w, dw)
}

impl FieldGrid {
    /// Sample a grid from `sample(points) -> (potential, field, invalid)`.
    pub fn build<F>(spec: &GridSpec, mut sample: F) -> FieldGrid
    where
        F: FnMut(&[Vec3]) -> (Vec<f64>, Vec<Vec3>, Vec<bool>),
    {
        let n = |lo: f64, hi: f64, h: f64| ((hi - lo) / h).ceil() as usize + 1;
        // Inner node counts covering [min, max], plus one pad cell per side.
        let nx = n(spec.min.x, spec.max.x, spec.spacing.x) + 2;
        let ny = n(spec.min.y, spec.max.y, spec.spacing.y) + 2;
        let nz = n(spec.min.z, spec.max.z, spec.spacing.z) + 2;
        let node_min = spec.min - spec.spacing;
        let step = spec.spacing;

        let mut points = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    points.push(Vec3::new(
                        node_min.x + step.x * i as f64,
                        node_min.y + step.y * j as f64,
                        node_min.z + step.z * k as f64,
                    ));
                }
            }
        }
        let (potential, field, invalid) = sample(&points);
        let mask = invalid.into_iter().map(|g| !g).collect();
        FieldGrid {
            node_min,
            step,
            dims: [nx, ny, nz],
            box_min: spec.min,
            box_max: Vec3::new(
                node_min.x + step.x * (nx - 2) as f64,
                node_min.y + step.y * (ny - 2) as f64,
                node_min.z + step.z * (nz - 2) as f64,
            ),
            potential,
            field,
            mask,
            order: 4,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn node_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            self.node_min.x + self.step.x * i as f64,
            self.node_min.y + self.step.y * j as f64,
            self.node_min.z + self.step.z * k as f64,
        )
    }

    /// Half-open membership test, so abutting grids tile space without
    /// double counting.
    #[inline]
    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.box_min.x
            && p.x < self.box_max.x
            && p.y >= self.box_min.y
            && p.y < self.box_max.y
            && p.z >= self.box_min.z
            && p.z < self.box_max.z
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    /// Interpolated potential (V) and field E = -grad (V/m); `false` when
    /// the stencil touched a masked node.
    pub fn eval(&self, p: Vec3) -> (f64, Vec3, bool) {
        let gx = (p.x - self.node_min.x) / self.step.x;
        let gy = (p.y - self.node_min.y) / self.step.y;
        let gz = (p.z - self.node_min.z) / self.step.z;
        // Base node of the 4-point stencil per axis, clamped so the whole
        // stencil stays in range.
        let base = |g: f64, n: usize| -> (usize, f64) {
            let cell = g.floor() as i64;
            let cell = cell.clamp(1, n as i64 - 3);
            ((cell - 1) as usize, g - cell as f64)
        };
        let (ix, tx) = base(gx, self.dims[0]);
        let (iy, ty) = base(gy, self.dims[1]);
        let (iz, tz) = base(gz, self.dims[2]);
        let (wx, dwx) = cr_weights(tx);
        let (wy, dwy) = cr_weights(ty);
        let (wz, dwz) = cr_weights(tz);

        let mut val = 0.0;
        let mut grad = Vec3::ZERO;
        let mut ok = true;
        for (k, (&wk, &dwk)) in wz.iter().zip(dwz.iter()).enumerate() {
            for (j, (&wj, &dwj)) in wy.iter().zip(dwy.iter()).enumerate() {
                let row = self.index(ix, iy + j, iz + k);
                for (i, (&wi, &dwi)) in wx.iter().zip(dwx.iter()).enumerate() {
                    let idx = row + i;
                    let phi = self.potential[idx];
                    ok &= self.mask[idx];
                    val += wi * wj * wk * phi;
                    grad.x += dwi * wj * wk * phi;
                    grad.y += wi * dwj * wk * phi;
                    grad.z += wi * wj * dwk * phi;
                }
            }
        }
        grad.x /= self.step.x;
        grad.y /= self.step.y;
        grad.z /= self.step.z;
        (val, -grad, ok)
    }

    /// Memory footprint estimate in bytes (arrays only).
    pub fn memory_bytes(&self) -> usize {
        self.node_count() * (8 + 24 + 1)
    }
}
