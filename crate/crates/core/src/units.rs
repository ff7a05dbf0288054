//! Physical constants (SI) and unit helpers.

/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.8541878128e-12;

/// Coulomb constant 1/(4 pi eps0), m/F.
pub const COULOMB: f64 = 1.0 / (4.0 * core::f64::consts::PI * EPSILON_0);

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;

/// Atomic mass unit, kg.
pub const AMU: f64 = 1.66053906660e-27;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;

/// Planck constant, J s.
pub const PLANCK: f64 = 6.62607015e-34;

/// Electron volt, J.
pub const EV: f64 = ELEMENTARY_CHARGE;

pub fn joule_to_ev(e: f64) -> f64 {
    e / EV
}

pub fn ev_to_joule(e: f64) -> f64 {
    e * EV
}

pub fn kg_to_amu(m: f64) -> f64 {
    m / AMU
}

pub fn amu_to_kg(m: f64) -> f64 {
    m * AMU
}

/// Angular frequency (rad/s) from an ordinary frequency in Hz.
pub fn hz_to_angular(f: f64) -> f64 {
    2.0 * core::f64::consts::PI * f
}

/// Ordinary frequency (Hz) from an angular frequency in rad/s.
pub fn angular_to_hz(w: f64) -> f64 {
    w / (2.0 * core::f64::consts::PI)
}
