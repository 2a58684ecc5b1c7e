//! Reward-guided hyperparameter tuning for "segment everything" instance segmenters.
//!
//! A segmenter is treated as a black box that maps an image and a named
//! hyperparameter vector to a set of instance masks. Candidate mask sets are
//! scored with physics-motivated rewards (overlap fidelity, morphology, size
//! sensitivity and coverage) and the hyperparameters are searched with a
//! mixed-integer NSGA-II.
//!
//! Module map:
//!
//! - [`mask`]: run-length encoded masks, IoU, perimeter, connected components, file formats.
//! - [`reward`]: reward functions and objective vectors.
//! - [`space`]: the typed, bounded hyperparameter search space.
//! - [`nsga2`]: non-dominated sorting, crowding, genetic operators and the evolution loop.
//! - [`segmenter`]: the builtin reference segmenter and the external worker protocol.
//! - [`synth`]: synthetic scenes with known ground truth.
//! - [`campaign`]: tuning campaigns, artifacts and the command line front end.

pub mod campaign;
pub mod error;
pub mod mask;
pub mod nsga2;
pub mod reward;
pub mod segmenter;
pub mod space;
pub mod synth;

pub use error::{Error, Result};
pub use mask::{ImageGrid, Mask, MaskSet};
pub use nsga2::{evolve, GaConfig, Individual, ParetoFront};
pub use reward::{ObjectiveId, ObjectiveVector, RewardSpec};
pub use space::{HyperparamVector, SearchSpace};
