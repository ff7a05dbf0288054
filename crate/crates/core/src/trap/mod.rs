//! Static trap analysis: pseudopotential, trap minimum, secular
//! frequencies, linear-crystal equilibria and normal modes, dark-ion mass
//! inference.

mod crystal;
mod pseudo;

pub use crystal::{
    equilibrium_positions, infer_dark_mass, normal_modes, CrystalConfig, MassInference,
    ModeSpectrum,
};
pub use pseudo::{
    find_minimum, pseudopotential, secular_frequencies, DriveConfig, IonSpecies, SecularResult,
    StaticTrapField, TrapField,
};
