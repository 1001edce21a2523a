//! Symmetric exclusion on ℤ from step initial profiles.
//!
//! The crate is a small laboratory around the right-most particle of the
//! exclusion process: exact random-walk numerics ([`walk`]), initial
//! profiles ([`profile`]), event-driven simulation under three couplings
//! ([`sim`]), the zero-range picture of ASEP with drift into the step
//! ([`zero_range`]), closed-form limit predictions ([`theory`]) and the
//! statistics used to confront samples with those predictions ([`stats`]).

pub mod conv;
pub mod normal;
pub mod profile;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod theory;
pub mod walk;
pub mod zero_range;

pub use profile::{Configuration, ProfileError, StepProfile};
pub use rng::StreamKey;
pub use sim::{Coupling, ObservableSample, SimError};
pub use walk::{JumpKernel, KernelError, PmfTable};
