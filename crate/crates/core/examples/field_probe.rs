//! Probe the RF basis potential symmetry and Laplace property near the
//! trap center, comparing direct evaluation against the grid interpolant.
//!
//! Run: cargo run --release -p ionshot --example field_probe

use ionshot::bem::BemConfig;
use ionshot::field::{default_trap_grid, BasisFieldSet, Voltages};
use ionshot::fmm::FmmConfig;
use ionshot::geometry::{build_trap_mesh, ChannelId, TrapSpec};
use ionshot::Vec3;

fn main() {
    let trap = TrapSpec::default();
    let mesh = build_trap_mesh(&trap, 0.25e-3).unwrap();
    let mut basis = BasisFieldSet::solve(mesh, BemConfig::default(), FmmConfig::default()).unwrap();

    let z0 = 0.35e-3;
    let mut rf = Voltages::new();
    rf.insert(ChannelId::Rf, 1.0);

    let h = 50e-6;
    let probe = |label: &str, volts: &Voltages, basis: &BasisFieldSet| {
        let pts = vec![
            Vec3::new(0.0, 0.0, z0),
            Vec3::new(h, 0.0, z0),
            Vec3::new(-h, 0.0, z0),
            Vec3::new(0.0, h, z0),
            Vec3::new(0.0, -h, z0),
            Vec3::new(0.0, 0.0, z0 + h),
            Vec3::new(0.0, 0.0, z0 - h),
        ];
        let (p, flags) = basis.potential_at(&pts, volts);
        assert!(flags.iter().all(|f| !f));
        let cxx = (p[1] - 2.0 * p[0] + p[2]) / (h * h);
        let cyy = (p[3] - 2.0 * p[0] + p[4]) / (h * h);
        let czz = (p[5] - 2.0 * p[0] + p[6]) / (h * h);
        println!(
            "{label}: phi0={:.6e}  cxx={:.4e} cyy={:.4e} czz={:.4e}  laplace={:.3e} (rel {:.2e})",
            p[0],
            cxx,
            cyy,
            czz,
            cxx + cyy + czz,
            (cxx + cyy + czz).abs() / cxx.abs().max(cyy.abs())
        );
        println!(
            "   phi(+x)={:.8e} phi(-x)={:.8e} phi(+y)={:.8e} phi(-y)={:.8e}",
            p[1], p[2], p[3], p[4]
        );
    };

    println!("== direct evaluation ==");
    probe("rf unit", &rf, &basis);
    let mut dc = Voltages::new();
    dc.insert(ChannelId::Dc(2), 35.0);
    dc.insert(ChannelId::Dc(8), 35.0);
    probe("dc 2+8 @35V", &dc, &basis);

    println!("== grid interpolation ==");
    let spec = default_trap_grid(&trap);
    let ids = basis.channel_ids();
    basis.build_grids(&spec, &ids).unwrap();
    probe("rf unit (grid)", &rf, &basis);
    probe("dc (grid)", &dc, &basis);

    // Axial profile of the RF basis potential.
    println!("== rf on-axis profile ==");
    for z_mm in [0.0f64, 5.0, 15.0, 25.0, 31.0, 32.5, 34.0, 36.0, 40.0, 45.0] {
        let (p, _) = basis.potential_at(&[Vec3::new(0.0, 0.0, z_mm * 1e-3)], &rf);
        println!("  z={z_mm:5.1} mm: alpha={:.6e}", p[0]);
    }
    // Extraction potential on axis.
    let mut ext = Voltages::new();
    ext.insert(ChannelId::Dc(4), 500.0);
    ext.insert(ChannelId::Dc(5), 500.0);
    ext.insert(ChannelId::Dc(2), 35.0);
    ext.insert(ChannelId::Dc(8), 35.0);
    println!("== extraction potential on axis ==");
    for z_mm in [
        -0.5f64, -0.2, 0.0, 0.2, 0.316, 0.4, 0.6, 0.8, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0, 20.0,
        32.5, 40.0, 46.0,
    ] {
        let (p, _) = basis.potential_at(&[Vec3::new(0.0, 0.0, z_mm * 1e-3)], &ext);
        println!("  z={z_mm:6.3} mm: phi={:.4}", p[0]);
    }
}
