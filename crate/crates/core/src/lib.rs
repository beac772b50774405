//! Simulation and verification kernels for low moments of random
//! multiplicative functions and critical multiplicative chaos.
//!
//! Modules, bottom up:
//! - [`numtheory`]: sieve, factorization, smooth and prime-block counts.
//! - [`rmf`]: Steinhaus/Rademacher samples and their partial sums.
//! - [`characters`]: exact Dirichlet-character moment oracle.
//! - [`products`]: Euler products, increments, barrier events, chaos integrals.
//! - [`walks`]: Gaussian random-walk barrier probabilities (MC and DP).
//! - [`tilt`]: importance-sampled tilted probabilities vs Gaussian references.
//! - [`experiments`]: headline estimators, configuration and persistence.

#![allow(clippy::too_many_arguments)]

pub mod characters;
pub mod error;
pub mod experiments;
pub mod numtheory;
pub mod products;
pub mod rmf;
pub mod rng;
pub mod stats;
pub mod tilt;
pub mod walks;

pub use error::{Error, Result};
pub use numtheory::{build_prime_table, Factorization, PrimeTable, PrimeWeight};
pub use rmf::{sample_rmf, PartialSumSeries, Restriction, RmfModel, RmfSample, SumWorkspace};
pub use rng::{Domain, StreamId};
pub use stats::MomentEstimate;
pub use experiments::{run_and_write, run_experiment, Config, ExperimentKind, Format, RunManifest, RunOutput, Table};
pub use products::{ProductSpec, Power};
pub use tilt::{BandEvent, TiltSpec};
pub use walks::{Corridor, WalkSpec};
