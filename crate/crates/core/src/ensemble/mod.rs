//! Monte-Carlo shot ensembles and beam observables.

mod beam;
mod sample;
mod tof;

pub use beam::{
    aperture_scan, diffraction_limit, focal_scan, optimize_deflection, tune_lens_voltage,
    ApertureScan, FocusResult,
};
pub use sample::{
    draw_thermal, sample_thermal, sample_thermal_rejection, shot_rng, thermal_sigmas,
    PhaseSpaceSample,
};
pub use tof::{
    fit_gaussian_tof, velocity_from_tof, FitMethod, GaussianFit, TofHistogram,
    DEFAULT_BIN_WIDTH,
};

use rand::Rng;
use rayon::prelude::*;

use crate::dynamics::{
    build_schedule, integrate, DtPolicy, ExtractionConfig, FieldEngine, SceneClearance,
    Termination, Terminators, TrajectoryState,
};
use crate::error::{CoreError, CoreResult};
use crate::field::BasisFieldSet;
use crate::geometry::SceneSpec;
use crate::trap::{
    find_minimum, secular_frequencies, DriveConfig, IonSpecies, SecularResult, TrapField,
};
use crate::vec3::Vec3;

/// One Monte-Carlo run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Initial ion temperature, K.
    pub temperature: f64,
    pub shots: usize,
    pub seed: u64,
    pub species: IonSpecies,
    pub drive: DriveConfig,
    pub extraction: ExtractionConfig,
    pub scene: SceneSpec,
    /// Bernoulli thinning of detector arrivals; 1.0 = ideal detection.
    pub detection_efficiency: f64,
    /// Simulated-time cap per trajectory, s.
    pub max_flight_time: f64,
}

impl RunConfig {
    pub fn new(scene: SceneSpec, species: IonSpecies) -> RunConfig {
        RunConfig {
            temperature: 2e-3,
            shots: 500,
            seed: 1,
            species,
            drive: DriveConfig::default(),
            extraction: ExtractionConfig::default(),
            scene,
            detection_efficiency: 1.0,
            max_flight_time: 1e-3,
        }
    }

    pub fn validate(&self) -> CoreResult<()> {
        if self.temperature < 0.0 {
            return Err(CoreError::Config("temperature must be >= 0".into()));
        }
        if self.shots < 1 {
            return Err(CoreError::Config("shots must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.detection_efficiency) {
            return Err(CoreError::Config(
                "detection_efficiency must lie in [0, 1]".into(),
            ));
        }
        self.scene.validate()?;
        self.drive.validate()?;
        self.extraction.validate()
    }
}

/// State at a recorded plane crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
}

impl PlaneRecord {
    fn from_crossing(c: &crate::dynamics::PlaneCrossing) -> PlaneRecord {
        PlaneRecord {
            t: c.t,
            x: c.position.x,
            y: c.position.y,
            vx: c.velocity.x,
            vy: c.velocity.y,
            vz: c.velocity.z,
        }
    }

    pub fn radius(&self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShotOutcome {
    Arrived {
        measurement: Option<PlaneRecord>,
        aperture: Option<PlaneRecord>,
        detector: Option<PlaneRecord>,
        /// Ion stopped on the aperture plate.
        aperture_blocked: bool,
        /// Survived the detection-efficiency draw.
        detected: bool,
        /// Crossing records at extra (focal-scan) planes, plane-ordered.
        extra: Vec<PlaneRecord>,
    },
    Lost {
        termination: Termination,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    pub shot: u64,
    pub initial: PhaseSpaceSample,
    pub outcome: ShotOutcome,
}

/// Shot-index-ordered parallel driver; the reduction order is fixed by the
/// index, so results do not depend on the worker count.
pub fn run_shots<F>(shots: usize, shot_fn: F) -> Vec<ShotRecord>
where
    F: Fn(u64) -> ShotRecord + Sync + Send,
{
    (0..shots as u64).into_par_iter().map(shot_fn).collect()
}

#[derive(Debug, Clone, Default)]
pub struct LossBreakdown {
    pub surface: usize,
    pub escaped: usize,
    pub timeout: usize,
    pub aperture: usize,
    pub other: usize,
}

impl LossBreakdown {
    pub fn total(&self) -> usize {
        self.surface + self.escaped + self.timeout + self.other
    }

    pub fn summary(&self) -> String {
        format!(
            "surface: {}, escaped: {}, timeout: {}, aperture-blocked: {}, other: {}",
            self.surface, self.escaped, self.timeout, self.aperture, self.other
        )
    }
}

/// Beam observables at the measurement plane plus per-shot records.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub shots: usize,
    /// Shots with a measurement-plane record.
    pub arrived: usize,
    /// Mean longitudinal velocity at the measurement plane, m/s.
    pub mean_velocity: f64,
    /// 1-sigma longitudinal velocity spread, m/s.
    pub delta_v: f64,
    /// Full-angle divergence 2 sigma_r / L, rad.
    pub divergence_full: f64,
    /// 1-sigma radius of the radial distribution at the measurement plane
    /// (per-axis Gaussian sigma), m.
    pub spot_sigma: f64,
    /// Beam centroid at the measurement plane, m.
    pub centroid: (f64, f64),
    /// Mean detector arrival time (from the extraction request), s.
    pub tof_mean: f64,
    /// 1-sigma spread of the detector arrival times, s.
    pub tof_sigma: f64,
    /// Velocity spread derived from the TOF width, `tof_sigma * v^2 / L`
    /// (the spectrum-based definition used for source characterization);
    /// departure-time jitter makes it larger than the true velocity spread
    /// `delta_v`.
    pub delta_v_tof: f64,
    /// Fraction of aperture-plane arrivals passing the aperture stop.
    pub transmission: Option<f64>,
    /// Detector arrivals after the efficiency draw.
    pub detected: usize,
    pub losses: LossBreakdown,
    pub measurement_plane: f64,
    pub detector_plane: f64,
    pub records: Vec<ShotRecord>,
}

/// Aggregate observables from per-shot records (pure; the stats recompute
/// identically from stored records).
pub fn compute_stats(
    records: Vec<ShotRecord>,
    scene: &SceneSpec,
    shots: usize,
) -> CoreResult<EnsembleStats> {
    let mut losses = LossBreakdown::default();
    let mut meas: Vec<PlaneRecord> = Vec::new();
    let mut tofs: Vec<f64> = Vec::new();
    let mut aperture_arrivals = 0usize;
    let mut aperture_passed = 0usize;
    let mut detected = 0usize;
    for r in &records {
        match &r.outcome {
            ShotOutcome::Lost { termination } => match termination {
                Termination::SurfaceHit => losses.surface += 1,
                Termination::EscapedDomain => losses.escaped += 1,
                Termination::MaxTime | Termination::MaxSteps => losses.timeout += 1,
                _ => losses.other += 1,
            },
            ShotOutcome::Arrived {
                measurement,
                aperture,
                aperture_blocked,
                detector,
                detected: det,
                ..
            } => {
                if let Some(m) = measurement {
                    meas.push(*m);
                }
                if aperture.is_some() {
                    aperture_arrivals += 1;
                    if *aperture_blocked {
                        losses.aperture += 1;
                    } else {
                        aperture_passed += 1;
                    }
                }
                if let Some(d) = detector {
                    tofs.push(d.t);
                    if *det {
                        detected += 1;
                    }
                }
            }
        }
    }
    if meas.is_empty() {
        return Err(CoreError::EmptyEnsemble {
            lost: records.len(),
            breakdown: losses.summary(),
        });
    }
    let n = meas.len() as f64;
    let mean_velocity = meas.iter().map(|m| m.vz).sum::<f64>() / n;
    let delta_v =
        (meas.iter().map(|m| (m.vz - mean_velocity).powi(2)).sum::<f64>() / n).sqrt();
    let cx = meas.iter().map(|m| m.x).sum::<f64>() / n;
    let cy = meas.iter().map(|m| m.y).sum::<f64>() / n;
    let var_x = meas.iter().map(|m| (m.x - cx).powi(2)).sum::<f64>() / n;
    let var_y = meas.iter().map(|m| (m.y - cy).powi(2)).sum::<f64>() / n;
    // Per-axis sigma of the (assumed isotropic) transverse Gaussian.
    let spot_sigma = (0.5 * (var_x + var_y)).sqrt();
    let l = scene.measurement_plane_distance;
    let divergence_full = 2.0 * spot_sigma / l;
    let transmission = scene.aperture_radius.map(|_| {
        if aperture_arrivals == 0 {
            0.0
        } else {
            aperture_passed as f64 / aperture_arrivals as f64
        }
    });
    let (tof_mean, tof_sigma) = if tofs.is_empty() {
        (f64::NAN, 0.0)
    } else {
        let nt = tofs.len() as f64;
        let mu = tofs.iter().sum::<f64>() / nt;
        let var = tofs.iter().map(|t| (t - mu) * (t - mu)).sum::<f64>() / nt;
        (mu, var.sqrt())
    };
    let delta_v_tof = tof_sigma * mean_velocity * mean_velocity / scene.detector_distance;

    Ok(EnsembleStats {
        shots,
        arrived: meas.len(),
        mean_velocity,
        delta_v,
        divergence_full,
        spot_sigma,
        centroid: (cx, cy),
        tof_mean,
        tof_sigma,
        delta_v_tof,
        transmission,
        detected,
        losses,
        measurement_plane: scene.measurement_plane_distance,
        detector_plane: scene.detector_distance,
        records,
    })
}

/// Prepared inputs shared by every shot of a run.
pub struct ExtractionSetup<'a> {
    pub config: &'a RunConfig,
    pub engine: FieldEngine,
    pub secular: SecularResult,
    pub policy: DtPolicy,
    pub terminators: Terminators,
    pub extra_planes: Vec<f64>,
}

impl<'a> ExtractionSetup<'a> {
    /// Build the per-run machinery: schedule, composite field engine,
    /// secular analysis at the trap minimum, step policy, terminators.
    pub fn prepare(
        config: &'a RunConfig,
        trap_basis: &BasisFieldSet,
        lens_basis: Option<&BasisFieldSet>,
        extra_planes: Vec<f64>,
    ) -> CoreResult<ExtractionSetup<'a>> {
        config.validate()?;
        let mut schedule = build_schedule(&config.drive, Some(&config.extraction))?;
        // Energize the lens center electrode when a lens is in the scene.
        if let (Some(lens), Some(_)) = (&config.scene.lens, lens_basis) {
            schedule.channels.push(crate::dynamics::ChannelWaveform {
                channel: crate::geometry::ChannelId::Lens(1),
                static_level: lens.center_voltage,
                rf: None,
                switch: None,
            });
        }
        let mut bases: Vec<&BasisFieldSet> = vec![trap_basis];
        if let Some(lb) = lens_basis {
            bases.push(lb);
        }
        let engine = FieldEngine::new(&bases, &schedule)?;

        // Secular analysis at the trapping configuration; the crystal sits
        // midway between the endcap segments.
        let field = TrapField::new(trap_basis, &config.drive);
        let mid_seg = config.scene.trap.n_segments.div_ceil(2) + 1;
        let (lo, hi) = config.scene.trap.segment_span(mid_seg);
        let start = Vec3::new(0.0, 0.0, 0.5 * (lo + hi));
        let scale = config.scene.trap.face_separation / 2.0;
        let minimum = find_minimum(&config.species, &field, start, scale)?;
        let secular = secular_frequencies(&config.species, &field, minimum, scale)?;

        let mut policy = DtPolicy::for_rf_period(1.0 / config.drive.rf_frequency);
        policy.ramp_windows = schedule.ramp_windows();

        let mut record_planes = vec![
            config.scene.measurement_plane_distance,
            config.scene.detector_distance,
        ];
        if config.scene.aperture_radius.is_some() {
            record_planes.push(config.scene.aperture_distance);
        }
        record_planes.extend(extra_planes.iter().copied());
        let terminal = record_planes
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let clearance = SceneClearance::new(&config.scene, 0.15e-3);
        let terminators = Terminators {
            record_planes,
            terminal_plane: Some(terminal),
            clearance: Some(clearance.as_fn()),
            domain: Some((
                Vec3::new(-5e-3, -5e-3, -40e-3),
                Vec3::new(5e-3, 5e-3, terminal + 1e-3),
            )),
            max_time: config.max_flight_time,
            max_steps: 10_000_000,
        };
        Ok(ExtractionSetup {
            config,
            engine,
            secular,
            policy,
            terminators,
            extra_planes,
        })
    }

    /// Run one shot: thermal draw, integration, plane bookkeeping.
    pub fn shot(&self, shot: u64) -> ShotRecord {
        let cfg = self.config;
        let mut rng = shot_rng(cfg.seed, shot);
        let initial = draw_thermal(cfg.temperature, &self.secular, &cfg.species, &mut rng);
        let init_state = TrajectoryState {
            t: cfg.extraction.request_time,
            position: initial.position,
            velocity: initial.velocity,
        };
        let traj = integrate(
            init_state,
            &cfg.species,
            |p, t| self.engine.field(p, t),
            &self.policy,
            &self.terminators,
            0,
        );
        if traj.termination != Termination::TerminalPlane {
            return ShotRecord {
                shot,
                initial,
                outcome: ShotOutcome::Lost {
                    termination: traj.termination,
                },
            };
        }
        let find = |plane: f64| traj.crossing_at(plane).map(PlaneRecord::from_crossing);
        let measurement = find(cfg.scene.measurement_plane_distance);
        let aperture = if cfg.scene.aperture_radius.is_some() {
            find(cfg.scene.aperture_distance)
        } else {
            None
        };
        let aperture_blocked = match (&aperture, cfg.scene.aperture_radius) {
            (Some(a), Some(r)) => a.radius() > r,
            _ => false,
        };
        let detector = if aperture_blocked {
            None
        } else {
            find(cfg.scene.detector_distance)
        };
        let extra: Vec<PlaneRecord> = self
            .extra_planes
            .iter()
            .filter_map(|&z| find(z))
            .collect();
        let detected = detector.is_some()
            && (cfg.detection_efficiency >= 1.0
                || rng.random::<f64>() < cfg.detection_efficiency);
        ShotRecord {
            shot,
            initial,
            outcome: ShotOutcome::Arrived {
                measurement,
                aperture,
                detector,
                aperture_blocked,
                detected,
                extra,
            },
        }
    }
}

/// Run a full extraction ensemble against prepared basis fields.
pub fn run_extraction_ensemble(
    config: &RunConfig,
    trap_basis: &BasisFieldSet,
    lens_basis: Option<&BasisFieldSet>,
) -> CoreResult<EnsembleStats> {
    let setup = ExtractionSetup::prepare(config, trap_basis, lens_basis, Vec::new())?;
    let records = run_shots(config.shots, |i| setup.shot(i));
    compute_stats(records, &config.scene, config.shots)
}

/// Mean arrival-time ratio of two species under identical settings.
pub struct SpeciesTofRatio {
    pub mean_tof_a: f64,
    pub mean_tof_b: f64,
    /// t_b / t_a at the detector plane.
    pub ratio: f64,
    /// v_a / v_b: the limit of the time ratio as the drift length grows.
    pub drift_limit_ratio: f64,
}

pub fn tof_species_ratio(
    config: &RunConfig,
    species_a: &IonSpecies,
    species_b: &IonSpecies,
    trap_basis: &BasisFieldSet,
) -> CoreResult<SpeciesTofRatio> {
    let run = |species: &IonSpecies| -> CoreResult<(f64, f64)> {
        let mut cfg = config.clone();
        cfg.species = species.clone();
        let stats = run_extraction_ensemble(&cfg, trap_basis, None)?;
        let mut tofs = Vec::new();
        for r in &stats.records {
            if let ShotOutcome::Arrived {
                detector: Some(d), ..
            } = &r.outcome
            {
                tofs.push(d.t - config.extraction.request_time);
            }
        }
        if tofs.is_empty() {
            return Err(CoreError::EmptyEnsemble {
                lost: stats.shots,
                breakdown: stats.losses.summary(),
            });
        }
        let mean_tof = tofs.iter().sum::<f64>() / tofs.len() as f64;
        Ok((mean_tof, stats.mean_velocity))
    };
    let (ta, va) = run(species_a)?;
    let (tb, vb) = run(species_b)?;
    Ok(SpeciesTofRatio {
        mean_tof_a: ta,
        mean_tof_b: tb,
        ratio: tb / ta,
        drift_limit_ratio: va / vb,
    })
}
