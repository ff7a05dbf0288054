//! Thermal phase-space sampling in the trapping potential.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, CoreResult};
use crate::trap::{pseudopotential, IonSpecies, SecularResult, StaticTrapField};
use crate::units::BOLTZMANN;
use crate::vec3::Vec3;

/// One sampled initial condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpaceSample {
    pub position: Vec3,
    pub velocity: Vec3,
}

/// Counter-based per-shot RNG: reproducible and schedule independent.
pub fn shot_rng(master_seed: u64, shot: u64) -> ChaCha12Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&shot.to_le_bytes());
    seed[16..24].copy_from_slice(&0x696f6e_73686f74u64.to_le_bytes());
    ChaCha12Rng::from_seed(seed)
}

/// Per-axis thermal scales in the local harmonic approximation.
pub fn thermal_sigmas(temperature: f64, secular: &SecularResult, species: &IonSpecies) -> ([f64; 3], f64) {
    let m = species.mass_kg();
    let sigma_v = (BOLTZMANN * temperature / m).sqrt();
    let sigma_x = [
        sigma_v / secular.omega[0],
        sigma_v / secular.omega[1],
        sigma_v / secular.omega[2],
    ];
    (sigma_x, sigma_v)
}

/// Draw one sample with the given RNG (harmonic approximation at the
/// pseudopotential minimum).
pub fn draw_thermal(
    temperature: f64,
    secular: &SecularResult,
    species: &IonSpecies,
    rng: &mut ChaCha12Rng,
) -> PhaseSpaceSample {
    let (sigma_x, sigma_v) = thermal_sigmas(temperature, secular, species);
    let mut z = [0.0f64; 6];
    for v in &mut z {
        *v = rng.sample(StandardNormal);
    }
    let mut position = secular.minimum;
    let mut velocity = Vec3::ZERO;
    for j in 0..3 {
        position += secular.axes[j] * (sigma_x[j] * z[j]);
        velocity += secular.axes[j] * (sigma_v * z[3 + j]);
    }
    PhaseSpaceSample { position, velocity }
}

/// Independent thermal samples; deterministic for a given seed.
pub fn sample_thermal(
    temperature: f64,
    secular: &SecularResult,
    species: &IonSpecies,
    count: usize,
    seed: u64,
) -> CoreResult<Vec<PhaseSpaceSample>> {
    if temperature < 0.0 {
        return Err(CoreError::Config("temperature must be >= 0".into()));
    }
    Ok((0..count)
        .map(|i| {
            let mut rng = shot_rng(seed, i as u64);
            draw_thermal(temperature, secular, species, &mut rng)
        })
        .collect())
}

/// Validation sampler: positions drawn by rejection against the full
/// Boltzmann factor exp(-(Phi_ps - Phi_min)/kT) with a widened harmonic
/// Gaussian proposal.  At mK temperatures this coincides with the harmonic
/// sampler to high accuracy (the thermal cloud is nanometres across).
pub fn sample_thermal_rejection<F: StaticTrapField>(
    temperature: f64,
    secular: &SecularResult,
    species: &IonSpecies,
    field: &F,
    count: usize,
    seed: u64,
) -> CoreResult<Vec<PhaseSpaceSample>> {
    if temperature < 0.0 {
        return Err(CoreError::Config("temperature must be >= 0".into()));
    }
    if temperature == 0.0 {
        return sample_thermal(temperature, secular, species, count, seed);
    }
    let (sigma_x, sigma_v) = thermal_sigmas(temperature, secular, species);
    let kt = BOLTZMANN * temperature;
    let phi_min = pseudopotential(secular.minimum, species, field);
    // Proposal: harmonic Gaussian widened by `widen`; envelope constant
    // bounds the density ratio for mildly anharmonic wells.
    let widen: f64 = 1.3;
    let envelope = 3.0;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = shot_rng(seed, i as u64);
        let mut accepted = None;
        for _ in 0..10_000 {
            let mut pos = secular.minimum;
            let mut qsum = 0.0;
            for j in 0..3 {
                let z: f64 = rng.sample(StandardNormal);
                pos += secular.axes[j] * (widen * sigma_x[j] * z);
                qsum += z * z;
            }
            let phi = pseudopotential(pos, species, field) - phi_min;
            // Target / proposal density ratio, up to a constant.
            let log_ratio = -phi / kt + 0.5 * qsum;
            let u: f64 = rng.random();
            if u < (log_ratio.exp() / envelope).min(1.0) {
                let mut velocity = Vec3::ZERO;
                for j in 0..3 {
                    let z: f64 = rng.sample(StandardNormal);
                    velocity += secular.axes[j] * (sigma_v * z);
                }
                accepted = Some(PhaseSpaceSample {
                    position: pos,
                    velocity,
                });
                break;
            }
        }
        out.push(accepted.ok_or_else(|| {
            CoreError::Other("rejection sampler exhausted its iteration cap".into())
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_secular() -> SecularResult {
        let two_pi = 2.0 * core::f64::consts::PI;
        SecularResult {
            minimum: Vec3::new(0.0, 0.0, 0.35e-3),
            omega: [two_pi * 430e3, two_pi * 430e3, two_pi * 280e3],
            axes: [
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
            mathieu_q: [0.0; 3],
            mathieu_a: [0.0; 3],
        }
    }

    #[test]
    fn zero_temperature_collapses_to_the_minimum() {
        let sec = fake_secular();
        let ca = IonSpecies::ca40();
        let samples = sample_thermal(0.0, &sec, &ca, 5, 7).unwrap();
        for s in samples {
            assert_eq!(s.position, sec.minimum);
            assert_eq!(s.velocity, Vec3::ZERO);
        }
    }

    #[test]
    fn velocity_spread_matches_sqrt_kt_over_m() {
        let sec = fake_secular();
        let ca = IonSpecies::ca40();
        let t = 2e-3;
        let n = 10_000;
        let samples = sample_thermal(t, &sec, &ca, n, 42).unwrap();
        let want = (BOLTZMANN * t / ca.mass_kg()).sqrt();
        assert!((want - 0.644).abs() < 0.01, "sanity: sigma_v ~ 0.64 m/s");
        for axis in 0..3 {
            let var: f64 = samples
                .iter()
                .map(|s| s.velocity[axis] * s.velocity[axis])
                .sum::<f64>()
                / n as f64;
            let got = var.sqrt();
            assert!(
                ((got - want) / want).abs() < 0.05,
                "axis {axis}: sigma_v {got:.4} vs {want:.4}"
            );
        }
    }

    #[test]
    fn equipartition_of_kinetic_energy() {
        let sec = fake_secular();
        let ca = IonSpecies::ca40();
        let t = 2e-3;
        let n = 10_000;
        let samples = sample_thermal(t, &sec, &ca, n, 3).unwrap();
        let m = ca.mass_kg();
        for axis in 0..3 {
            let mean_ke: f64 = samples
                .iter()
                .map(|s| 0.5 * m * s.velocity[axis] * s.velocity[axis])
                .sum::<f64>()
                / n as f64;
            let want = 0.5 * BOLTZMANN * t;
            // Chi-squared spread of the variance estimator: 3 standard
            // errors at n samples.
            let tol = 3.0 * want * (2.0 / n as f64).sqrt();
            assert!(
                (mean_ke - want).abs() < tol,
                "axis {axis}: <KE> {mean_ke:.3e} vs kT/2 {want:.3e}"
            );
        }
    }

    #[test]
    fn samples_are_reproducible_and_counter_based() {
        let sec = fake_secular();
        let ca = IonSpecies::ca40();
        let a = sample_thermal(2e-3, &sec, &ca, 10, 99).unwrap();
        let b = sample_thermal(2e-3, &sec, &ca, 20, 99).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x, y, "first half must be bit-identical");
        }
    }

    #[test]
    fn position_spread_scales_with_inverse_frequency() {
        let sec = fake_secular();
        let ca = IonSpecies::ca40();
        let n = 20_000;
        let samples = sample_thermal(2e-3, &sec, &ca, n, 5).unwrap();
        let (sigma_x, _) = thermal_sigmas(2e-3, &sec, &ca);
        for axis in [0usize, 2] {
            let mean = if axis == 2 { 0.35e-3 } else { 0.0 };
            let var: f64 = samples
                .iter()
                .map(|s| (s.position[axis] - mean).powi(2))
                .sum::<f64>()
                / n as f64;
            let got = var.sqrt();
            assert!(
                ((got - sigma_x[axis]) / sigma_x[axis]).abs() < 0.05,
                "axis {axis}: sigma_x {got:.3e} vs {:.3e}",
                sigma_x[axis]
            );
        }
    }
}
