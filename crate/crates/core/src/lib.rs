//! Multi-point Metropolis sampling with generic weight functions.
//!
//! The crate provides
//!
//! * target and proposal abstractions ([`density`]),
//! * weight-function families ([`weights`]),
//! * the generalized multi-point kernel and its baselines ([`samplers`]),
//! * an exact transition-matrix builder for finite state spaces
//!   ([`verification`]),
//! * chain diagnostics and the averaged benchmark harness ([`diagnostics`],
//!   [`experiment`]).

pub mod density;
pub mod diagnostics;
pub mod discrete;
pub mod error;
pub mod experiment;
pub mod samplers;
pub mod toy;
pub mod verification;
pub mod weights;

pub use density::{PointSet, ProposalSequence, State, TargetDensity};
pub use error::{Error, Result};
pub use samplers::{run_chain, ChainTrace, MultiPointConfig, Sampler, Scheme, StepKernel, StepOutcome};
pub use weights::{Lambda, LambdaKind, WeightFamily};
