//! Simulation and estimation toolkit for sensing the parameters of a
//! phase-space displacement with a single trapped ion.
//!
//! A classical force drives one (or two) motional modes of the ion while
//! sideband lasers couple the motion to a three-level (Λ) or five-level
//! (four-pod) internal structure. After adiabatic elimination of the phonons
//! the force magnitude ends up in an effective Rabi frequency and its phase
//! (and transverse direction) in the phases of the atomic couplings, so both
//! can be read out from atomic populations alone.
//!
//! The crate is organised bottom-up:
//!
//! - [`params`]: physical inputs, unit conversion, config documents.
//! - [`hilbert`]: dense operators on spin ⊗ Fock spaces, Hermitian
//!   propagation, and a Lanczos propagator for the large two-mode spaces.
//! - [`hamiltonians`]: interaction Hamiltonians, elimination generators,
//!   effective spin-only models, the displacement operator.
//! - [`dynamics`]: full protocol simulation and population readout.
//! - [`analytic`]: closed-form propagators, post-pulse states and
//!   probability models.
//! - [`fisher`]: classical and quantum Fisher information, Cramér–Rao
//!   bounds, chart changes.
//! - [`estimation`]: shot sampling, maximum likelihood, covariance studies.
//!
//! Internally ħ = 1, time is measured in milliseconds and angular
//! frequencies in rad/ms.

pub mod analytic;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod fisher;
pub mod hamiltonians;
pub mod hilbert;
pub mod params;

pub use error::{Error, Result};
pub use fisher::{FisherKind, FisherMatrix, ParamChart};
pub use hamiltonians::{HamiltonianSet, SystemModel};
pub use hilbert::{FockSpace, Operator, StateVector, C64};
pub use params::{InternalParams, ProtocolParams};
