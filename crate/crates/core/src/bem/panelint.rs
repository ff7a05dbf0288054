//! Single-layer panel integrals: analytic self-term and Gauss quadrature
//! for near neighbors.

use crate::geometry::{Panel, PanelShape};
use crate::vec3::Vec3;

/// Average of 1/|c - y| over the panel, evaluated at its own centroid:
/// `(1/A) * integral dA / r`.
///
/// Closed form: in polar coordinates about the (interior) centroid the area
/// integral of 1/r reduces to an angular integral of the ray length, summed
/// edge by edge: each edge contributes `p * ln((r1 + s1)/(r0 + s0))` with p
/// the in-plane distance from the centroid to the edge line and s the signed
/// coordinate of the endpoints along the edge.  The quadrature test below
/// pins this down against a subdivided numeric evaluation.
pub fn self_term_average(panel: &Panel) -> f64 {
    let c = panel.centroid;
    let verts = panel.vertices();
    let n = verts.len();
    let mut integral = 0.0;
    for k in 0..n {
        let a = verts[k] - c;
        let b = verts[(k + 1) % n] - c;
        let edge = b - a;
        let len = edge.norm();
        if len == 0.0 {
            continue;
        }
        let e = edge / len;
        let s0 = a.dot(e);
        let s1 = b.dot(e);
        let foot = a - e * s0;
        let p = foot.norm();
        if p < 1e-14 * len {
            continue;
        }
        let r0 = a.norm();
        let r1 = b.norm();
        integral += p * ((r1 + s1) / (r0 + s0)).ln();
    }
    integral / panel.area
}

/// Quadrature nodes and weights over a panel; weights sum to the area.
///
/// `refine` subdivides each panel edge once (4 subpanels) for near-singular
/// accuracy.
pub fn quadrature(panel: &Panel, refine: bool) -> Vec<(Vec3, f64)> {
    match panel.shape {
        PanelShape::Quad(v) => {
            if refine {
                let mut pts = Vec::with_capacity(64);
                for sub in split_quad(&v) {
                    quad_gauss(&sub, &mut pts);
                }
                pts
            } else {
                let mut pts = Vec::with_capacity(16);
                quad_gauss(&v, &mut pts);
                pts
            }
        }
        PanelShape::Tri(v) => {
            if refine {
                let mut pts = Vec::with_capacity(28);
                for sub in split_tri(&v) {
                    tri_rule(&sub, &mut pts);
                }
                pts
            } else {
                let mut pts = Vec::with_capacity(7);
                tri_rule(&v, &mut pts);
                pts
            }
        }
    }
}

fn split_quad(v: &[Vec3; 4]) -> [[Vec3; 4]; 4] {
    let m01 = (v[0] + v[1]) * 0.5;
    let m12 = (v[1] + v[2]) * 0.5;
    let m23 = (v[2] + v[3]) * 0.5;
    let m30 = (v[3] + v[0]) * 0.5;
    let cc = (v[0] + v[1] + v[2] + v[3]) * 0.25;
    [
        [v[0], m01, cc, m30],
        [m01, v[1], m12, cc],
        [cc, m12, v[2], m23],
        [m30, cc, m23, v[3]],
    ]
}

fn split_tri(v: &[Vec3; 3]) -> [[Vec3; 3]; 4] {
    let m01 = (v[0] + v[1]) * 0.5;
    let m12 = (v[1] + v[2]) * 0.5;
    let m20 = (v[2] + v[0]) * 0.5;
    [
        [v[0], m01, m20],
        [m01, v[1], m12],
        [m20, m12, v[2]],
        [m01, m12, m20],
    ]
}

/// 4x4 tensor Gauss-Legendre rule mapped bilinearly onto the quad.
fn quad_gauss(v: &[Vec3; 4], out: &mut Vec<(Vec3, f64)>) {
    // Nodes/weights of 4-point Gauss-Legendre on [-1, 1].
    const X: [f64; 4] = [
        -0.8611363115940526,
        -0.3399810435848563,
        0.3399810435848563,
        0.8611363115940526,
    ];
    const W: [f64; 4] = [
        0.3478548451374538,
        0.6521451548625461,
        0.6521451548625461,
        0.3478548451374538,
    ];
    for (i, &xi) in X.iter().enumerate() {
        for (j, &eta) in X.iter().enumerate() {
            let n0 = 0.25 * (1.0 - xi) * (1.0 - eta);
            let n1 = 0.25 * (1.0 + xi) * (1.0 - eta);
            let n2 = 0.25 * (1.0 + xi) * (1.0 + eta);
            let n3 = 0.25 * (1.0 - xi) * (1.0 + eta);
            let p = v[0] * n0 + v[1] * n1 + v[2] * n2 + v[3] * n3;
            // Bilinear Jacobian.
            let dxi = (v[1] - v[0]) * (0.25 * (1.0 - eta))
                + (v[2] - v[3]) * (0.25 * (1.0 + eta));
            let deta = (v[3] - v[0]) * (0.25 * (1.0 - xi))
                + (v[2] - v[1]) * (0.25 * (1.0 + xi));
            let jac = dxi.cross(deta).norm() * 4.0;
            out.push((p, W[i] * W[j] * jac * 0.25));
        }
    }
}

/// 7-point degree-5 rule on a triangle.
fn tri_rule(v: &[Vec3; 3], out: &mut Vec<(Vec3, f64)>) {
    const A1: f64 = 0.059715871789770;
    const B1: f64 = 0.470142064105115;
    const A2: f64 = 0.797426985353087;
    const B2: f64 = 0.101286507323456;
    const W0: f64 = 0.225;
    const W1: f64 = 0.132394152788506;
    const W2: f64 = 0.125939180544827;
    let area = 0.5 * (v[1] - v[0]).cross(v[2] - v[0]).norm();
    let bary = |l0: f64, l1: f64, l2: f64| v[0] * l0 + v[1] * l1 + v[2] * l2;
    out.push((bary(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0), W0 * area));
    out.push((bary(A1, B1, B1), W1 * area));
    out.push((bary(B1, A1, B1), W1 * area));
    out.push((bary(B1, B1, A1), W1 * area));
    out.push((bary(A2, B2, B2), W2 * area));
    out.push((bary(B2, A2, B2), W2 * area));
    out.push((bary(B2, B2, A2), W2 * area));
}

/// Average of 1/|x - y| over the panel by quadrature (x off the panel).
pub fn average_kernel(points: &[(Vec3, f64)], area: f64, x: Vec3) -> f64 {
    let mut acc = 0.0;
    for &(p, w) in points {
        acc += w / (x - p).norm();
    }
    acc / area
}

/// Gradient (w.r.t. x) of the averaged kernel.
pub fn average_kernel_gradient(points: &[(Vec3, f64)], area: f64, x: Vec3) -> Vec3 {
    let mut acc = Vec3::ZERO;
    for &(p, w) in points {
        let d = x - p;
        let r = d.norm();
        acc -= d * (w / (r * r * r));
    }
    acc / area
}
