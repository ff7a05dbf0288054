//! Adaptive octree over a point set.

use crate::vec3::Vec3;

pub const NO_CHILD: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct Cell {
    /// Geometric center of the cube; expansion center.
    pub center: Vec3,
    /// Cube half-width.
    pub half: f64,
    /// Tight bounding radius of the contained points about `center`.
    pub radius: f64,
    /// Range into `Octree::order`.
    pub begin: usize,
    pub end: usize,
    pub children: [u32; 8],
    pub parent: u32,
    pub depth: usize,
}

impl Cell {
    pub fn is_leaf(&self) -> bool {
        self.children.iter().all(|&c| c == NO_CHILD)
    }

    pub fn len(&self) -> usize {
        self.end - self.begin
    }
}

#[derive(Debug, Clone)]
pub struct Octree {
    pub cells: Vec<Cell>,
    /// Permutation of point indices; cell ranges address this array.
    pub order: Vec<usize>,
}

impl Octree {
    /// Build an octree; leaves hold at most `leaf_cap` points unless the
    /// depth bound stops subdivision first.
    pub fn build(points: &[Vec3], leaf_cap: usize, max_depth: usize) -> Octree {
        assert!(!points.is_empty(), "octree requires at least one point");
        let leaf_cap = leaf_cap.max(1);

        let mut lo = points[0];
        let mut hi = points[0];
        for &p in points {
            lo = lo.min(p);
            hi = hi.max(p);
        }
        let center = (lo + hi) * 0.5;
        let span = hi - lo;
        let half = 0.5 * span.x.max(span.y).max(span.z).max(1e-300);

        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut cells = Vec::new();
        cells.push(Cell {
            center,
            half,
            radius: 0.0,
            begin: 0,
            end: points.len(),
            children: [NO_CHILD; 8],
            parent: NO_CHILD,
            depth: 0,
        });

        let mut stack = vec![0usize];
        while let Some(ci) = stack.pop() {
            let (begin, end, c_center, c_half, depth) = {
                let c = &cells[ci];
                (c.begin, c.end, c.center, c.half, c.depth)
            };
            if end - begin <= leaf_cap || depth >= max_depth {
                continue;
            }
            // Partition the index range into octants.
            let octant = |p: Vec3| -> usize {
                ((p.x >= c_center.x) as usize)
                    | (((p.y >= c_center.y) as usize) << 1)
                    | (((p.z >= c_center.z) as usize) << 2)
            };
            let mut buckets: [Vec<usize>; 8] = Default::default();
            for &pi in &order[begin..end] {
                buckets[octant(points[pi])].push(pi);
            }
            let mut cursor = begin;
            let mut children = [NO_CHILD; 8];
            for (oct, bucket) in buckets.iter().enumerate() {
                if bucket.is_empty() {
                    continue;
                }
                let cb = cursor;
                for &pi in bucket {
                    order[cursor] = pi;
                    cursor += 1;
                }
                let qh = 0.5 * c_half;
                let child_center = Vec3::new(
                    c_center.x + if oct & 1 != 0 { qh } else { -qh },
                    c_center.y + if oct & 2 != 0 { qh } else { -qh },
                    c_center.z + if oct & 4 != 0 { qh } else { -qh },
                );
                let idx = cells.len();
                children[oct] = idx as u32;
                cells.push(Cell {
                    center: child_center,
                    half: qh,
                    radius: 0.0,
                    begin: cb,
                    end: cursor,
                    children: [NO_CHILD; 8],
                    parent: ci as u32,
                    depth: depth + 1,
                });
                stack.push(idx);
            }
            cells[ci].children = children;
        }

        let mut tree = Octree { cells, order };
        tree.fill_radii(points);
        tree
    }

    fn fill_radii(&mut self, points: &[Vec3]) {
        // Children were pushed after parents, so a reverse sweep sees
        // children first.
        for ci in (0..self.cells.len()).rev() {
            let cell = &self.cells[ci];
            let r = if cell.is_leaf() {
                let mut r2: f64 = 0.0;
                for &pi in &self.order[cell.begin..cell.end] {
                    r2 = r2.max((points[pi] - cell.center).norm_sq());
                }
                r2.sqrt()
            } else {
                let mut r: f64 = 0.0;
                for &ch in &cell.children {
                    if ch != NO_CHILD {
                        let c = &self.cells[ch as usize];
                        r = r.max((c.center - cell.center).norm() + c.radius);
                    }
                }
                r
            };
            self.cells[ci].radius = r;
        }
    }

    pub fn leaf_indices(&self) -> Vec<usize> {
        (0..self.cells.len())
            .filter(|&i| self.cells[i].is_leaf())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(n: usize) -> Vec<Vec3> {
        // Deterministic pseudo-random cloud.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        (0..n)
            .map(|_| Vec3::new(next(), next(), next()))
            .collect()
    }

    #[test]
    fn partitions_all_points_into_leaves() {
        let pts = cloud(500);
        let tree = Octree::build(&pts, 16, 30);
        let mut seen = vec![false; pts.len()];
        for li in tree.leaf_indices() {
            let cell = &tree.cells[li];
            assert!(cell.len() <= 16);
            for &pi in &tree.order[cell.begin..cell.end] {
                assert!(!seen[pi], "point {pi} in two leaves");
                seen[pi] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn radii_bound_contained_points() {
        let pts = cloud(300);
        let tree = Octree::build(&pts, 8, 30);
        for cell in &tree.cells {
            for &pi in &tree.order[cell.begin..cell.end] {
                let d = (pts[pi] - cell.center).norm();
                assert!(d <= cell.radius + 1e-12);
            }
        }
    }

    #[test]
    fn coincident_points_respect_depth_bound() {
        let pts = vec![Vec3::new(0.5, 0.5, 0.5); 40];
        let tree = Octree::build(&pts, 4, 6);
        assert!(tree.cells.iter().all(|c| c.depth <= 6));
    }
}
