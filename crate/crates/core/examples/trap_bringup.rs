//! End-to-end bring-up probe: solve the default trap, report secular
//! frequencies, run a few extraction shots.
//!
//! Run: cargo run --release -p ionshot --example trap_bringup

use std::time::Instant;

use ionshot::bem::BemConfig;
use ionshot::dynamics::ExtractionConfig;
use ionshot::ensemble::{run_extraction_ensemble, RunConfig};
use ionshot::field::{default_trap_grids, BasisFieldSet};
use ionshot::fmm::FmmConfig;
use ionshot::geometry::{build_trap_mesh, validate_mesh, SceneSpec, TrapSpec};
use ionshot::trap::IonSpecies;

fn main() {
    let t0 = Instant::now();
    let trap = TrapSpec::default();
    let scene = SceneSpec {
        trap: trap.clone(),
        ..SceneSpec::default()
    };
    let panel = 0.25e-3;
    let mesh = build_trap_mesh(&trap, panel).unwrap();
    println!("mesh: {} panels ({:?})", mesh.len(), t0.elapsed());
    let report = validate_mesh(&mesh);
    println!("validation: {}", report.summary());

    let t1 = Instant::now();
    let mut basis = BasisFieldSet::solve(mesh, BemConfig::default(), FmmConfig::default()).unwrap();
    for cb in &basis.channels {
        println!(
            "  channel {}: {} iters, residual {:.2e}, bc_err {:.2e}",
            cb.channel, cb.solution.iterations, cb.solution.residual, cb.solution.bc_error
        );
    }
    println!("basis solve: {:?}", t1.elapsed());

    let t2 = Instant::now();
    use ionshot::geometry::ChannelId;
    let active = [
        ChannelId::Rf,
        ChannelId::Dc(2),
        ChannelId::Dc(4),
        ChannelId::Dc(5),
        ChannelId::Dc(8),
        ChannelId::Deflector(0),
        ChannelId::Deflector(1),
    ];
    for spec in default_trap_grids(&trap) {
        basis.build_grids(&spec, &active).unwrap();
    }
    println!("grids for {} channels: {:?}", active.len(), t2.elapsed());

    // Secular analysis.
    let config = RunConfig {
        shots: 64,
        temperature: 2e-3,
        extraction: ExtractionConfig::default(),
        ..RunConfig::new(scene.clone(), IonSpecies::ca40())
    };
    let t3 = Instant::now();
    let setup =
        ionshot::ensemble::ExtractionSetup::prepare(&config, &basis, None, Vec::new()).unwrap();
    println!(
        "minimum at ({:.3e}, {:.3e}, {:.6e}) m",
        setup.secular.minimum.x, setup.secular.minimum.y, setup.secular.minimum.z
    );
    println!(
        "secular: radial {:.1} kHz / {:.1} kHz, axial {:.1} kHz  (targets 430 / 280)",
        setup.secular.radial_hz()[0] / 1e3,
        setup.secular.radial_hz()[1] / 1e3,
        setup.secular.axial_hz() / 1e3,
    );
    println!(
        "mathieu q = {:?}, a = {:?}",
        setup.secular.mathieu_q, setup.secular.mathieu_a
    );
    println!("secular analysis: {:?}", t3.elapsed());

    // A few extraction shots at 2 mK.
    let t4 = Instant::now();
    match run_extraction_ensemble(&config, &basis, None) {
        Ok(stats) => {
            println!(
                "extraction: {}/{} arrived, v = {:.1} m/s, dv = {:.2} m/s, dv_tof = {:.2} m/s, spot {:.2} um, div {:.1} urad",
                stats.arrived,
                stats.shots,
                stats.mean_velocity,
                stats.delta_v,
                stats.delta_v_tof,
                stats.spot_sigma * 1e6,
                stats.divergence_full * 1e6
            );
            println!(
                "tof: mean {:.4} us, sigma {:.3} ns",
                stats.tof_mean * 1e6,
                stats.tof_sigma * 1e9
            );
            println!("losses: {}", stats.losses.summary());
            if let Some(r) = stats.records.iter().find_map(|r| match &r.outcome {
                ionshot::ensemble::ShotOutcome::Arrived {
                    detector: Some(d), ..
                } => Some(d),
                _ => None,
            }) {
                println!("first detector arrival: t = {:.4} us", r.t * 1e6);
            }
        }
        Err(e) => println!("ensemble failed: {e}"),
    }
    println!("8 shots: {:?}", t4.elapsed());
    println!("total: {:?}", t0.elapsed());
}
