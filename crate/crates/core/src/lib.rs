//! Simulation library for a deterministic single-ion source built on a
//! segmented linear Paul trap.
//!
//! The crate is organised around one data-flow:
//!
//! 1. [`geometry`] builds a panel mesh of the trap electrodes (and optional
//!    downstream einzel lens) from a parametric description.
//! 2. [`bem`] solves the Dirichlet problem on that mesh by collocation BEM,
//!    one unit-voltage solve per electrical channel, with the Coulomb sums
//!    accelerated by the fast multipole method in [`fmm`].
//! 3. [`field`] caches the per-channel solutions as a [`field::BasisFieldSet`]
//!    and serves potential/field superpositions, optionally through sampled
//!    interpolation grids.
//! 4. [`trap`] derives static trap properties (pseudopotential, secular
//!    frequencies, ion-crystal modes, dark-ion mass inference).
//! 5. [`dynamics`] integrates single-ion trajectories through time-dependent
//!    voltage schedules (RF drive, phase-synchronized extraction switch).
//! 6. [`ensemble`] runs thermal Monte-Carlo shot ensembles and computes the
//!    beam observables (velocity spread, divergence, TOF spectra, focal
//!    spots, aperture transmission).
//!
//! All internal computation is SI; convenience conversions live in [`units`].

pub mod bem;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod field;
pub mod fmm;
pub mod geometry;
pub mod trap;
pub mod units;
pub mod vec3;

pub use error::CoreError;
pub use vec3::Vec3;
