//! Core numerics for a boundary-controlled Euler-Bernoulli beam with
//! fading-memory forcing.
//!
//! The crate builds finite-difference realizations of the beam generator
//! (clamped at `x = 0`, feedback-controlled at `x = 1`), evaluates the
//! associated semigroup through dense matrix exponentials, solves the
//! semilinear memory problem by Picard iteration on the variation-of-constants
//! formula or by exponential time stepping, and certifies exponential decay
//! of solution differences from the measured semigroup type.
//!
//! Everything here is `no_std` + `alloc`; file formats, configuration and the
//! command-line driver live in the companion `memorybeam` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod generator;
pub mod linalg;
pub mod memory;
pub mod solver;
pub mod stability;
pub mod state_space;

pub use error::{Error, Result};
pub use generator::{BeamParams, DiscreteGenerator, EstimateMethod, SemigroupEstimate};
pub use memory::{CustomKernel, ExpKernel, KernelConditionReport, MemoryKernel};
pub use solver::{
    DependenceEntry, DependenceReport, ForcingFunction, PicardInit, PicardOptions, ProblemSpec,
    SolverKind, Trajectory,
};
pub use stability::{
    AttractorReport, BeamStabilityCertificate, EnvelopeReport, StabilityCertificate,
};
pub use state_space::{BeamState, EnergyWeights, Grid, StateNorm};
