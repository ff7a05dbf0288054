//! Mesh diagnostics: degenerate panels, orientation consistency, overlaps.

use std::collections::HashMap;

use super::{ElectrodeId, ElectrodeMesh};
use crate::vec3::Vec3;

/// Report-only diagnostics; an empty report means a clean mesh.
#[derive(Debug, Clone, Default)]
pub struct MeshReport {
    /// Panel indices with area below the degeneracy threshold.
    pub zero_area: Vec<usize>,
    /// Panel indices whose normal disagrees with a coplanar panel of the
    /// same electrode.
    pub inconsistent_orientation: Vec<(usize, usize)>,
    /// Pairs of coplanar panels with positive overlap area.
    pub overlaps: Vec<(usize, usize)>,
    /// Panel indices whose normal is not unit length.
    pub bad_normals: Vec<usize>,
}

impl MeshReport {
    pub fn is_clean(&self) -> bool {
        self.zero_area.is_empty()
            && self.inconsistent_orientation.is_empty()
            && self.overlaps.is_empty()
            && self.bad_normals.is_empty()
    }

    pub fn summary(&self) -> String {
        if self.is_clean() {
            return "mesh clean".to_string();
        }
        format!(
            "zero-area: {}, orientation conflicts: {}, overlaps: {}, bad normals: {}",
            self.zero_area.len(),
            self.inconsistent_orientation.len(),
            self.overlaps.len(),
            self.bad_normals.len()
        )
    }
}

/// Clip convex polygon `poly` by the half-plane (in 2D) to the left of the
/// directed edge (a, b).
fn clip_halfplane(poly: &[(f64, f64)], a: (f64, f64), b: (f64, f64)) -> Vec<(f64, f64)> {
    let side = |p: (f64, f64)| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let sp = side(p);
        let sq = side(q);
        if sp >= 0.0 {
            out.push(p);
        }
        if (sp > 0.0 && sq < 0.0) || (sp < 0.0 && sq > 0.0) {
            let t = sp / (sp - sq);
            out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
        }
    }
    out
}

fn polygon_area_2d(poly: &[(f64, f64)]) -> f64 {
    let mut a = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        a += p.0 * q.1 - q.0 * p.1;
    }
    a.abs() / 2.0
}

/// Intersection area of two convex coplanar polygons projected on (u, v).
fn overlap_area(pa: &[(f64, f64)], pb: &[(f64, f64)]) -> f64 {
    // Ensure counterclockwise winding of the clip polygon.
    let signed: f64 = {
        let mut a = 0.0;
        for i in 0..pb.len() {
            let p = pb[i];
            let q = pb[(i + 1) % pb.len()];
            a += p.0 * q.1 - q.0 * p.1;
        }
        a
    };
    let clip: Vec<(f64, f64)> = if signed >= 0.0 {
        pb.to_vec()
    } else {
        pb.iter().rev().cloned().collect()
    };
    let mut poly = pa.to_vec();
    for i in 0..clip.len() {
        poly = clip_halfplane(&poly, clip[i], clip[(i + 1) % clip.len()]);
        if poly.is_empty() {
            return 0.0;
        }
    }
    polygon_area_2d(&poly)
}

/// Scan the mesh for degenerate, inconsistently oriented or overlapping
/// panels.  Report-only; never fails.
pub fn validate_mesh(mesh: &ElectrodeMesh) -> MeshReport {
    let mut report = MeshReport::default();
    if mesh.is_empty() {
        return report;
    }

    let mut max_diam: f64 = 0.0;
    for (i, p) in mesh.panels.iter().enumerate() {
        let d = p.diameter();
        max_diam = max_diam.max(d);
        if p.area <= 1e-18 * d.max(1e-9) * d.max(1e-9) || p.area == 0.0 {
            report.zero_area.push(i);
        }
        if (p.normal.norm() - 1.0).abs() > 1e-9 {
            report.bad_normals.push(i);
        }
    }

    // Spatial hash over centroids; only nearby pairs are candidates.
    let cell = max_diam.max(1e-12);
    let key = |v: Vec3| {
        (
            (v.x / cell).floor() as i64,
            (v.y / cell).floor() as i64,
            (v.z / cell).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in mesh.panels.iter().enumerate() {
        grid.entry(key(p.centroid)).or_default().push(i);
    }

    let mut candidate_pairs: Vec<(usize, usize)> = Vec::new();
    for (i, p) in mesh.panels.iter().enumerate() {
        let (kx, ky, kz) = key(p.centroid);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = grid.get(&(kx + dx, ky + dy, kz + dz)) {
                        for &j in list {
                            if j > i {
                                candidate_pairs.push((i, j));
                            }
                        }
                    }
                }
            }
        }
    }

    for (i, j) in candidate_pairs {
        let a = &mesh.panels[i];
        let b = &mesh.panels[j];
        let dist = (a.centroid - b.centroid).norm();
        if dist > a.diameter() + b.diameter() {
            continue;
        }
        // Coplanarity: parallel normals and negligible out-of-plane offset.
        let parallel = a.normal.dot(b.normal).abs() > 1.0 - 1e-9;
        if !parallel {
            continue;
        }
        let off = (b.centroid - a.centroid).dot(a.normal).abs();
        let tol = 1e-9 * a.diameter().max(b.diameter()).max(1e-9);
        if off > tol {
            continue;
        }
        // Project both onto the shared plane and intersect.
        let n = a.normal;
        let u = if n.x.abs() < 0.9 {
            Vec3::new(1.0, 0.0, 0.0).cross(n).normalized()
        } else {
            Vec3::new(0.0, 1.0, 0.0).cross(n).normalized()
        };
        let v = n.cross(u);
        let project = |p: &super::Panel| -> Vec<(f64, f64)> {
            p.vertices()
                .iter()
                .map(|&w| ((w - a.centroid).dot(u), (w - a.centroid).dot(v)))
                .collect()
        };
        let pa = project(a);
        let pb = project(b);
        let inter = overlap_area(&pa, &pb);
        if inter > 1e-6 * a.area.min(b.area) {
            if a.electrode == b.electrode && a.normal.dot(b.normal) < 0.0 {
                report.inconsistent_orientation.push((i, j));
            } else {
                report.overlaps.push((i, j));
            }
        } else if a.electrode == b.electrode
            && a.normal.dot(b.normal) < 0.0
            && dist < 0.5 * (a.diameter() + b.diameter())
        {
            report.inconsistent_orientation.push((i, j));
        }
    }

    // Orientation consistency within an electrode: compare coplanar panels.
    let mut plane_groups: HashMap<(ElectrodeId, i64, i64, i64, i64), (usize, Vec3)> =
        HashMap::new();
    for (i, p) in mesh.panels.iter().enumerate() {
        // Plane key: quantized unsigned normal direction + offset.
        let mut n = p.normal;
        if n.z < 0.0 || (n.z == 0.0 && (n.y < 0.0 || (n.y == 0.0 && n.x < 0.0))) {
            n = -n;
        }
        let offset = p.centroid.dot(n);
        let k = (
            p.electrode,
            (n.x * 1e6).round() as i64,
            (n.y * 1e6).round() as i64,
            (n.z * 1e6).round() as i64,
            (offset / (1e-9 + max_diam * 1e-6)).round() as i64,
        );
        match plane_groups.get(&k) {
            None => {
                plane_groups.insert(k, (i, p.normal));
            }
            Some(&(first, n0)) => {
                if n0.dot(p.normal) < 0.0 {
                    report.inconsistent_orientation.push((first, i));
                }
            }
        }
    }
    report.inconsistent_orientation.sort();
    report.inconsistent_orientation.dedup();

    report
}
