//! Mesh construction from parametric specs.

use super::{ElectrodeId, ElectrodeMesh, LensSpec, Panel, TrapSpec};
use crate::error::{CoreError, CoreResult};
use crate::vec3::Vec3;

/// Subdivide a rectangle into quads of at most `target` edge length.
///
/// `origin` is one corner, `u`/`v` are unit edge directions with lengths
/// `lu`/`lv`; winding gives normal = u x v.
pub fn rect_electrode(
    origin: Vec3,
    u: Vec3,
    v: Vec3,
    lu: f64,
    lv: f64,
    target: f64,
    id: ElectrodeId,
) -> Vec<Panel> {
    let nu = (lu / target).ceil().max(1.0) as usize;
    let nv = (lv / target).ceil().max(1.0) as usize;
    let du = u * (lu / nu as f64);
    let dv = v * (lv / nv as f64);
    let mut panels = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let p0 = origin + du * i as f64 + dv * j as f64;
            panels.push(Panel::quad([p0, p0 + du, p0 + du + dv, p0 + dv], id));
        }
    }
    panels
}

fn check_panel_size(spec_name: &str, target: f64, dims: &[(&str, f64)]) -> CoreResult<()> {
    if !(target > 0.0) {
        return Err(CoreError::Geometry(format!(
            "{spec_name}: target_panel_size must be > 0"
        )));
    }
    for (name, d) in dims {
        if target >= *d {
            return Err(CoreError::Geometry(format!(
                "{spec_name}: target_panel_size {target:.3e} must be smaller than {name} = {d:.3e}"
            )));
        }
    }
    Ok(())
}

/// Build the trap mesh: 2 RF front-face electrodes, 2 grounded front faces,
/// `4 * n_segments` DC band electrodes and two deflection plates.
///
/// Frame: beam axis along +z, origin at the segment-pattern center; blades
/// 0/1 face the axis from +/-x (RF), blades 2/3 from +/-y (RF ground).
pub fn build_trap_mesh(spec: &TrapSpec, target_panel_size: f64) -> CoreResult<ElectrodeMesh> {
    spec.validate()?;
    check_panel_size(
        "trap",
        target_panel_size,
        &[
            ("blade_length", spec.blade_length),
            ("blade_thickness", spec.blade_thickness),
            ("segment_width", spec.segment_width),
            ("dc_band_depth", spec.dc_band_depth),
            ("deflector.size", spec.deflector.size),
        ],
    )?;

    let r0 = spec.face_separation / 2.0;
    let t = spec.blade_thickness;
    let l = spec.blade_length;
    let h = target_panel_size;
    let mut mesh = ElectrodeMesh::default();

    // Blade basis: for blade b, `out` points from the axis toward the blade,
    // `side` spans the blade thickness.
    let blades = [
        (Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), ElectrodeId::Rf),
        (Vec3::new(-1.0, 0.0, 0.0), Vec3::new(0.0, -1.0, 0.0), ElectrodeId::Rf),
        (Vec3::new(0.0, 1.0, 0.0), Vec3::new(-1.0, 0.0, 0.0), ElectrodeId::RfGround),
        (Vec3::new(0.0, -1.0, 0.0), Vec3::new(1.0, 0.0, 0.0), ElectrodeId::RfGround),
    ];
    let ez = Vec3::new(0.0, 0.0, 1.0);

    // Centered rectangle with prescribed normal = u x v.
    let rect_centered = |center: Vec3, u: Vec3, v: Vec3, lu: f64, lv: f64, id: ElectrodeId| {
        rect_electrode(center - u * (lu / 2.0) - v * (lv / 2.0), u, v, lu, lv, h, id)
    };
    // Pick (u, v) from candidates so that u x v points along `normal`.
    let oriented = |a: Vec3, b: Vec3, normal: Vec3| {
        if a.cross(b).dot(normal) > 0.0 {
            (a, b)
        } else {
            (b, a)
        }
    };

    for (b, (out, side, face_id)) in blades.iter().enumerate() {
        // Front face: plane at distance r0 from the axis, normal toward the
        // axis (-out).
        let w = spec.rf_face_width;
        let (u, v) = oriented(*side, ez, -*out);
        let (lu, lv) = if u == *side { (w, l) } else { (l, w) };
        mesh.panels
            .extend(rect_centered(*out * r0, u, v, lu, lv, *face_id));

        // DC bands on the top/bottom faces (outward normal +/- side),
        // radially from r0 + setback outward by dc_band_depth, one band
        // pair per segment.
        for seg in 1..=spec.n_segments {
            let (z_lo, z_hi) = spec.segment_span(seg);
            let id = ElectrodeId::Dc {
                blade: b as u8,
                segment: seg,
            };
            for sgn in [1.0, -1.0] {
                let center = *out * (r0 + spec.dc_band_setback + spec.dc_band_depth / 2.0)
                    + *side * (sgn * t / 2.0)
                    + ez * ((z_lo + z_hi) / 2.0);
                let (u, v) = oriented(*out, ez, *side * sgn);
                let (lu, lv) = if u == *out {
                    (spec.dc_band_depth, z_hi - z_lo)
                } else {
                    (z_hi - z_lo, spec.dc_band_depth)
                };
                mesh.panels.extend(rect_centered(center, u, v, lu, lv, id));
            }
        }
    }

    // Deflection plates: +/-x pair with normals facing the beam axis.
    let d = &spec.deflector;
    let ey = Vec3::new(0.0, 1.0, 0.0);
    for (idx, sgn) in [(0u8, 1.0f64), (1, -1.0)] {
        let id = ElectrodeId::Deflector { index: idx };
        let center = Vec3::new(sgn * d.gap / 2.0, 0.0, d.z_center);
        let (u, v) = oriented(ey, ez, Vec3::new(-sgn, 0.0, 0.0));
        mesh.panels
            .extend(rect_centered(center, u, v, d.size, d.size, id));
    }

    // Grounded enclosure tube (open at both ends).
    if let Some(sh) = &spec.shield {
        mesh.panels.extend(cylinder_shell(
            sh.radius,
            sh.z_min,
            sh.z_max,
            sh.panel_size,
            ElectrodeId::Shield,
            true,
        ));
    }

    Ok(mesh)
}

/// Faceted cylinder shell of radius `r` spanning z in [z0, z1].
///
/// `inward` selects normals toward the axis (bore surfaces).
pub fn cylinder_shell(
    r: f64,
    z0: f64,
    z1: f64,
    target: f64,
    id: ElectrodeId,
    inward: bool,
) -> Vec<Panel> {
    let circumference = 2.0 * core::f64::consts::PI * r;
    let n_phi = {
        let n = ((circumference / target).ceil() as usize).max(8);
        n + n % 2
    };
    let n_z = (((z1 - z0) / target).ceil() as usize).max(1);
    let dz = (z1 - z0) / n_z as f64;
    let mut panels = Vec::with_capacity(n_phi * n_z);
    for i in 0..n_phi {
        let phi0 = 2.0 * core::f64::consts::PI * i as f64 / n_phi as f64;
        let phi1 = 2.0 * core::f64::consts::PI * (i + 1) as f64 / n_phi as f64;
        let p0 = Vec3::new(r * phi0.cos(), r * phi0.sin(), 0.0);
        let p1 = Vec3::new(r * phi1.cos(), r * phi1.sin(), 0.0);
        for j in 0..n_z {
            let za = z0 + dz * j as f64;
            let zb = za + dz;
            let a = Vec3::new(p0.x, p0.y, za);
            let b = Vec3::new(p1.x, p1.y, za);
            let c = Vec3::new(p1.x, p1.y, zb);
            let d = Vec3::new(p0.x, p0.y, zb);
            // Winding (a,b,c,d) gives an outward normal; swap for inward.
            let quad = if inward { [b, a, d, c] } else { [a, b, c, d] };
            panels.push(Panel::quad(quad, id));
        }
    }
    panels
}

/// Build the einzel-lens mesh: three coaxial tubes along the beam axis.
pub fn build_lens_mesh(spec: &LensSpec, target_panel_size: f64) -> CoreResult<ElectrodeMesh> {
    spec.validate()?;
    check_panel_size(
        "lens",
        target_panel_size,
        &[
            ("bore_diameter", spec.bore_diameter),
            ("electrode_length", spec.electrode_length),
        ],
    )?;
    let r = spec.bore_diameter / 2.0;
    let total = spec.total_length();
    let z_start = spec.center_z - total / 2.0;
    let mut mesh = ElectrodeMesh::default();
    for k in 0..3u8 {
        let z0 = z_start + k as f64 * (spec.electrode_length + spec.gap);
        let z1 = z0 + spec.electrode_length;
        mesh.panels.extend(cylinder_shell(
            r,
            z0,
            z1,
            target_panel_size,
            ElectrodeId::Lens { index: k },
            true,
        ));
    }
    Ok(mesh)
}

/// Cube-projected triangulated sphere, `n` subdivisions per cube face edge.
pub fn sphere_mesh(radius: f64, n: usize, id: ElectrodeId) -> ElectrodeMesh {
    let n = n.max(1);
    let mut mesh = ElectrodeMesh::default();
    // Cube faces: (axis, sign); u, v span the face.
    let faces = [
        (Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0)),
        (Vec3::new(-1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 1.0, 0.0)),
        (Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.0)),
        (Vec3::new(0.0, -1.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0)),
        (Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)),
        (Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(1.0, 0.0, 0.0)),
    ];
    let proj = |w: Vec3| w.normalized() * radius;
    for (normal, u, v) in faces {
        for i in 0..n {
            for j in 0..n {
                let s0 = -1.0 + 2.0 * i as f64 / n as f64;
                let s1 = -1.0 + 2.0 * (i + 1) as f64 / n as f64;
                let t0 = -1.0 + 2.0 * j as f64 / n as f64;
                let t1 = -1.0 + 2.0 * (j + 1) as f64 / n as f64;
                let a = proj(normal + u * s0 + v * t0);
                let b = proj(normal + u * s1 + v * t0);
                let c = proj(normal + u * s1 + v * t1);
                let d = proj(normal + u * s0 + v * t1);
                mesh.panels.push(Panel::tri([a, b, c], id));
                mesh.panels.push(Panel::tri([a, c, d], id));
            }
        }
    }
    mesh
}

/// Two parallel square plates normal to z at z = +/- separation/2;
/// electrodes Aux(0) (top, +z) and Aux(1) (bottom).
pub fn plate_pair(side: f64, separation: f64, target: f64) -> ElectrodeMesh {
    let mut mesh = ElectrodeMesh::default();
    let ex = Vec3::new(1.0, 0.0, 0.0);
    let ey = Vec3::new(0.0, 1.0, 0.0);
    for (idx, zs) in [(0u32, separation / 2.0), (1, -separation / 2.0)] {
        let origin = Vec3::new(-side / 2.0, -side / 2.0, zs);
        mesh.panels.extend(rect_electrode(
            origin,
            ex,
            ey,
            side,
            side,
            target,
            ElectrodeId::Aux(idx),
        ));
    }
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ChannelId;

    #[test]
    fn default_trap_mesh_has_expected_electrodes() {
        let spec = TrapSpec::default();
        let mesh = build_trap_mesh(&spec, 0.25e-3).unwrap();
        let ids = mesh.electrode_ids();
        let n_dc = ids
            .iter()
            .filter(|id| matches!(id, ElectrodeId::Dc { .. }))
            .count();
        assert_eq!(n_dc, 32, "expected 32 DC band electrodes");
        for blade in 0..4u8 {
            let per_blade = ids
                .iter()
                .filter(|id| matches!(id, ElectrodeId::Dc { blade: b, .. } if *b == blade))
                .count();
            assert_eq!(per_blade, 8, "expected 8 segments on blade {blade}");
        }
        assert!(ids.contains(&ElectrodeId::Rf));
        assert!(ids.contains(&ElectrodeId::RfGround));
        assert!(ids.contains(&ElectrodeId::Deflector { index: 0 }));
        assert!(ids.contains(&ElectrodeId::Deflector { index: 1 }));

        let channels = mesh.channels();
        assert_eq!(
            channels.iter().filter(|c| matches!(c, ChannelId::Dc(_))).count(),
            8
        );
    }

    #[test]
    fn dc_segment_area_matches_spec_dimensions() {
        let spec = TrapSpec::default();
        let mesh = build_trap_mesh(&spec, 0.1e-3).unwrap();
        // Each DC electrode = two bands of dc_band_depth x segment_width.
        let want = 2.0 * spec.dc_band_depth * spec.segment_width;
        let got = mesh.total_area(ElectrodeId::Dc { blade: 0, segment: 3 });
        assert!(
            (got - want).abs() <= 0.01 * want,
            "area {got:.3e} vs analytic {want:.3e}"
        );
    }

    #[test]
    fn halving_panel_size_quadruples_count() {
        let spec = TrapSpec::default();
        let coarse = build_trap_mesh(&spec, 0.2e-3).unwrap().len() as f64;
        let fine = build_trap_mesh(&spec, 0.1e-3).unwrap().len() as f64;
        let ratio = fine / coarse;
        assert!(
            (3.0..=5.0).contains(&ratio),
            "refinement ratio {ratio} outside 4x +/- 25%"
        );
    }

    #[test]
    fn panel_sizes_within_twice_target() {
        let spec = TrapSpec::default();
        let target = 0.3e-3;
        let mesh = build_trap_mesh(&spec, target).unwrap();
        for p in &mesh.panels {
            assert!(p.diameter() <= 2.0 * target * 2.0_f64.sqrt());
            assert!(p.area > 0.0);
            assert!((p.normal.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn front_face_normals_point_at_axis() {
        let spec = TrapSpec::default();
        let mesh = build_trap_mesh(&spec, 0.25e-3).unwrap();
        for p in &mesh.panels {
            if p.electrode == ElectrodeId::Rf || p.electrode == ElectrodeId::RfGround {
                let toward_axis = Vec3::new(-p.centroid.x, -p.centroid.y, 0.0).normalized();
                assert!(
                    p.normal.dot(toward_axis) > 0.99,
                    "front-face normal {:?} at {:?}",
                    p.normal,
                    p.centroid
                );
            }
        }
    }

    #[test]
    fn trap_mesh_is_mirror_symmetric() {
        let spec = TrapSpec::default();
        let mesh = build_trap_mesh(&spec, 0.3e-3).unwrap();
        // Map electrode ids under x -> -x (blades 0 <-> 1, deflectors 0 <-> 1)
        // and y -> -y (blades 2 <-> 3).
        let map_x = |id: ElectrodeId| match id {
            ElectrodeId::Dc { blade: 0, segment } => ElectrodeId::Dc { blade: 1, segment },
            ElectrodeId::Dc { blade: 1, segment } => ElectrodeId::Dc { blade: 0, segment },
            ElectrodeId::Deflector { index } => ElectrodeId::Deflector { index: 1 - index },
            other => other,
        };
        let map_y = |id: ElectrodeId| match id {
            ElectrodeId::Dc { blade: 2, segment } => ElectrodeId::Dc { blade: 3, segment },
            ElectrodeId::Dc { blade: 3, segment } => ElectrodeId::Dc { blade: 2, segment },
            other => other,
        };
        let quant = |v: Vec3| {
            (
                (v.x * 1e9).round() as i64,
                (v.y * 1e9).round() as i64,
                (v.z * 1e9).round() as i64,
            )
        };
        let mut index = std::collections::HashMap::new();
        for p in &mesh.panels {
            index.insert((p.electrode, quant(p.centroid)), p.area);
        }
        for p in &mesh.panels {
            let cx = Vec3::new(-p.centroid.x, p.centroid.y, p.centroid.z);
            let found_x = index.get(&(map_x(p.electrode), quant(cx)));
            assert!(found_x.is_some(), "no x-mirror for {:?} {:?}", p.electrode, p.centroid);
            assert!((found_x.unwrap() - p.area).abs() < 1e-12 * p.area.max(1e-12));
            let cy = Vec3::new(p.centroid.x, -p.centroid.y, p.centroid.z);
            assert!(
                index.contains_key(&(map_y(p.electrode), quant(cy))),
                "no y-mirror for {:?} {:?}",
                p.electrode,
                p.centroid
            );
        }
    }

    #[test]
    fn lens_mesh_has_three_coaxial_electrodes() {
        let spec = LensSpec::default();
        let mesh = build_lens_mesh(&spec, 0.15e-3).unwrap();
        let ids = mesh.electrode_ids();
        assert_eq!(ids.len(), 3);
        let r = spec.bore_diameter / 2.0;
        for p in &mesh.panels {
            let rad = (p.centroid.x * p.centroid.x + p.centroid.y * p.centroid.y).sqrt();
            assert!(
                (rad - r).abs() <= 0.15e-3,
                "bore radius {rad:.4e} deviates from {r:.4e}"
            );
        }
    }

    #[test]
    fn lens_area_converges_under_refinement() {
        let spec = LensSpec::default();
        let analytic = 3.0
            * 2.0
            * core::f64::consts::PI
            * (spec.bore_diameter / 2.0)
            * spec.electrode_length;
        let fine: f64 = build_lens_mesh(&spec, 0.05e-3)
            .unwrap()
            .panels
            .iter()
            .map(|p| p.area)
            .sum();
        assert!(
            (fine - analytic).abs() <= 0.01 * analytic,
            "total lens area {fine:.4e} vs {analytic:.4e}"
        );
    }

    #[test]
    fn sphere_mesh_area_converges() {
        let r = 0.7;
        let analytic = 4.0 * core::f64::consts::PI * r * r;
        let coarse: f64 = sphere_mesh(r, 8, ElectrodeId::Aux(0))
            .panels
            .iter()
            .map(|p| p.area)
            .sum();
        let fine: f64 = sphere_mesh(r, 24, ElectrodeId::Aux(0))
            .panels
            .iter()
            .map(|p| p.area)
            .sum();
        let e_coarse = (coarse - analytic).abs() / analytic;
        let e_fine = (fine - analytic).abs() / analytic;
        assert!(e_fine < e_coarse, "refinement must reduce area error");
        assert!(e_fine < 0.01);
    }
}
