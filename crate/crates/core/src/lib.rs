//! Storage of a single propagating photon in a single three-level atom inside
//! a lossy optical cavity.
//!
//! The crate is organised around the single-excitation sector of the
//! atom–cavity–transmission-line system:
//!
//! * [`model`] holds the physical parameters, the basis, photon envelopes and
//!   the discretised transmission line.
//! * [`propagator`] builds the arrowhead Hamiltonian, integrates the
//!   non-Hermitian amplitude equations (and the full Lindblad equation as a
//!   reference) and extracts observables.
//! * [`pulses`] contains the analytic control pulses, the closed-form
//!   efficiency bounds and the phase/two-photon-detuning gauge map.
//! * [`io_oracle`] is the low-dimensional input–output model used as an
//!   independent check of the full-mode propagator.
//! * [`grape`] optimises piecewise-constant pulses in the lossless model.
//!
//! All rates are angular frequencies in rad/μs, times are in μs and the speed
//! of light is 1, so line lengths are light-travel times in μs.

pub mod csv_io;
pub mod error;
pub mod expm;
pub mod grape;
pub mod io_oracle;
pub mod model;
pub mod numeric;
pub mod ode;
pub mod propagator;
pub mod pulses;

pub use error::{Error, Result};
pub use propagator::{QuantumState, SimulationRecord};
pub use pulses::{ControlPulse, EfficiencyBounds};
pub use model::{
    mhz, BasisIndex, EnvelopeRule, Geometry, PhotonEnvelope, SampledEnvelope, SystemParams,
};



/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex64;
