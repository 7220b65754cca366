//! Pathwise Föllmer integration and functional Itô calculus on sampled paths.
//!
//! Paths live on a uniform master grid ([`path::SampledPath`]); partitions are
//! subsets of that grid ([`partition::Partition`]); functionals are
//! expression trees with exact vertical and horizontal derivatives
//! ([`functional::Functional`]). The [`calculus`] module implements the
//! discrete objects (quadratic variation, Riemann sums, isometry gap,
//! remainders, rough-smooth decomposition) and [`experiment`] runs level
//! ladders over them and writes reports.

pub mod calculus;
pub mod error;
pub mod experiment;
pub mod functional;
pub mod numeric;
pub mod partition;
pub mod path;
pub mod rng;

pub use error::{Error, Result};
pub use experiment::{run_experiment, ConvergenceReport, ExperimentConfig, ExperimentKind};
pub use functional::{builtin, parse_functional, Functional};
pub use partition::{Partition, PartitionKind, PartitionSequence};
pub use path::{Grid, HolderEstimate, SampledPath};
