//! Parametric scan of the DC band geometry: reports the axial frequency at
//! the trapping settings and the on-axis potential under the extraction
//! settings, for calibrating the band depth/setback defaults.
//!
//! Run: cargo run --release -p ionshot --example dc_calibration

use ionshot::bem::{BemConfig, BemOperator};
use ionshot::fmm::FmmConfig;
use ionshot::geometry::{build_trap_mesh, ChannelId, TrapSpec};
use ionshot::units::{AMU, ELEMENTARY_CHARGE};
use ionshot::Vec3;
use std::collections::BTreeMap;

fn main() {
    let m_ca = 39.9626 * AMU;
    for (depth_mm, setback_mm) in [
        (2.0, 0.05),
        (1.2, 0.05),
        (0.8, 0.05),
        (0.6, 0.05),
        (0.8, 0.3),
        (1.2, 0.3),
    ] {
        let trap = TrapSpec {
            dc_band_depth: depth_mm * 1e-3,
            dc_band_setback: setback_mm * 1e-3,
            ..TrapSpec::default()
        };
        let mesh = build_trap_mesh(&trap, 0.25e-3).unwrap();
        let op = BemOperator::new(&mesh, BemConfig::default(), FmmConfig::default()).unwrap();

        let mut solutions = BTreeMap::new();
        for ch in [ChannelId::Dc(2), ChannelId::Dc(4), ChannelId::Dc(5), ChannelId::Dc(8)] {
            solutions.insert(ch, op.solve_channel(ch).unwrap());
        }

        // Trapping: 35 V on segments 2 and 8.
        let trap_u: Vec<f64> = {
            let a = &solutions[&ChannelId::Dc(2)].reduced;
            let b = &solutions[&ChannelId::Dc(8)].reduced;
            a.iter().zip(b).map(|(x, y)| 35.0 * (x + y)).collect()
        };
        let z0 = 0.375e-3;
        let h = 50e-6;
        let pts = vec![
            Vec3::new(0.0, 0.0, z0 - h),
            Vec3::new(0.0, 0.0, z0),
            Vec3::new(0.0, 0.0, z0 + h),
        ];
        let s = op.eval(&trap_u, &pts);
        let czz = (s.potential[0] - 2.0 * s.potential[1] + s.potential[2]) / (h * h);
        let f_ax = (ELEMENTARY_CHARGE * czz / m_ca).sqrt() / (2.0 * std::f64::consts::PI);

        // Extraction: 500 V on 4 and 5 (2, 8 at 35 V).
        let ext_u: Vec<f64> = {
            let a = &solutions[&ChannelId::Dc(4)].reduced;
            let b = &solutions[&ChannelId::Dc(5)].reduced;
            trap_u
                .iter()
                .zip(a.iter().zip(b))
                .map(|(t, (x, y))| t + 500.0 * (x + y))
                .collect()
        };
        let sp = op.eval(&ext_u, &[Vec3::new(0.0, 0.0, 0.316e-3)]);
        let phi_start = sp.potential[0];
        let v = (2.0 * ELEMENTARY_CHARGE * phi_start / m_ca).sqrt();
        println!(
            "depth {depth_mm:.1} mm setback {setback_mm:.2} mm: f_ax = {:.1} kHz (target 280), phi_start = {:.1} V, v = {:.2} km/s (target 19.47)",
            f_ax / 1e3,
            phi_start,
            v / 1e3
        );
    }
}
