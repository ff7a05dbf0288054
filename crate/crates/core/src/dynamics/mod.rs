//! Time-dependent dynamics: voltage schedules, phase-synchronized
//! extraction, velocity-Verlet integration and event detection.

mod engine;
mod integrate;
mod waveform;

pub use engine::{FieldEngine, SceneClearance};
pub use integrate::{
    integrate, DtPolicy, PlaneCrossing, Termination, Terminators, Trajectory, TrajectoryState,
};
pub use waveform::{
    build_schedule, phase_sync_trigger, ChannelWaveform, ExtractionConfig, RampShape, RfTerm,
    SwitchEvent, WaveformSchedule,
};
