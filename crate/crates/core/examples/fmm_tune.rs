//! Accuracy/cost probe for the multipole evaluator; prints max relative
//! error and wall time across orders and acceptance ratios.
//!
//! Run: cargo run --release -p ionshot --example fmm_tune

use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use ionshot::fmm::{fmm_evaluate, FmmConfig};
use ionshot::units::COULOMB;
use ionshot::Vec3;

fn random_cloud(n: usize, seed: u64) -> (Vec<Vec3>, Vec<f64>) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let pts = (0..n)
        .map(|_| {
            Vec3::new(
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
            )
        })
        .collect();
    let qs = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    (pts, qs)
}

fn brute(pts: &[Vec3], qs: &[f64], targets: &[Vec3]) -> Vec<f64> {
    targets
        .iter()
        .map(|&x| {
            let mut p = 0.0;
            for (&s, &q) in pts.iter().zip(qs) {
                let r = (x - s).norm();
                if r > 0.0 {
                    p += q / r;
                }
            }
            p * COULOMB
        })
        .collect()
}

fn main() {
    let n = 10_000;
    let (pts, qs) = random_cloud(n, 42);
    let t0 = Instant::now();
    let reference = brute(&pts, &qs, &pts);
    println!("direct N={n}: {:?}", t0.elapsed());

    // Surface distribution: points on a spherical shell (panel-mesh-like).
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    let shell: Vec<Vec3> = (0..n)
        .map(|_| {
            let v = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            v.normalized() * 0.5
        })
        .collect();
    let shell_q: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let shell_ref = brute(&shell, &shell_q, &shell);

    for theta in [0.5] {
        for order in [3usize, 4, 5, 6, 7, 8, 9, 10, 12] {
            for leaf in [80usize] {
                let cfg = FmmConfig {
                    expansion_order: order,
                    theta,
                    max_leaf_points: leaf,
                    direct_pair_threshold: 0,
                    ..FmmConfig::default()
                };
                let t = Instant::now();
                let out = fmm_evaluate(&shell, &shell_q, &shell, &cfg).unwrap();
                let dt = t.elapsed();
                let mut max_rel = 0.0f64;
                for (got, want) in out.potential.iter().zip(&shell_ref) {
                    max_rel = max_rel.max((got - want).abs() / want.abs());
                }
                println!(
                    "SHELL theta={theta:.2} p={order:2} leaf={leaf:3}: err={max_rel:.3e} t={dt:?}"
                );
            }
        }
    }

    for theta in [0.5] {
        for order in [3usize, 4, 5, 6, 7, 8, 9, 10, 12] {
            for leaf in [80usize] {
                let cfg = FmmConfig {
                    expansion_order: order,
                    theta,
                    max_leaf_points: leaf,
                    direct_pair_threshold: 0,
                    ..FmmConfig::default()
                };
                let t = Instant::now();
                let out = fmm_evaluate(&pts, &qs, &pts, &cfg).unwrap();
                let dt = t.elapsed();
                let mut max_rel = 0.0f64;
                for (got, want) in out.potential.iter().zip(&reference) {
                    max_rel = max_rel.max((got - want).abs() / want.abs());
                }
                println!(
                    "theta={theta:.2} p={order:2} leaf={leaf:3}: err={max_rel:.3e} t={dt:?}"
                );
            }
        }
    }

    // Scaling probe at the chosen default.
    for n2 in [10_000usize, 100_000] {
        let (pts2, qs2) = random_cloud(n2, 5);
        let cfg = FmmConfig {
            direct_pair_threshold: 0,
            ..FmmConfig::default()
        };
        let t = Instant::now();
        let out = fmm_evaluate(&pts2, &qs2, &pts2, &cfg).unwrap();
        println!(
            "scaling N={n2}: t={:?} (sum {:.3})",
            t.elapsed(),
            out.potential.iter().sum::<f64>()
        );
    }
}
