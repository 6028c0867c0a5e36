//! Iterative cleaning of noisily labeled datasets.
//!
//! The engine trains small dense classifiers on a noisy dataset and
//! watches each example's learning dynamics: the first epoch at which an
//! example is predicted as its given label for k consecutive epochs.
//! Examples that are only ever learned late (or never) are high-probability
//! label errors; each iteration keeps the early-learned examples, retrains
//! from scratch on the smaller set, and stops once the removal budget
//! exceeds the declared noise rate. Everything is deterministic in the
//! master seed.
//!
//! The crate ships a library (this) and a `latestop` CLI for dataset
//! generation, noise injection, runs, rankings, reports, and sweeps.
//!
//! ```
//! use latestop::{data, engine, noise};
//!
//! // Two separable classes with 30% of the labels flipped.
//! let clean = data::generate_synthetic(&data::SyntheticSpec {
//!     num_classes: 2,
//!     examples_per_class: 60,
//!     feature_dim: 2,
//!     layout: data::ClusterLayout::Auto {
//!         clusters_per_class: 1,
//!         weights: vec![1.0],
//!         separation: 3.0,
//!         spread: 1.0,
//!     },
//!     seed: 1,
//! })?;
//! let (noisy, report) = noise::inject_symmetric(&clean, &noise::NoiseSpec::symmetric(0.3, 2))?;
//!
//! let mut cfg = engine::LateStopConfig::new(20.0, 30.0, 3);
//! cfg.hidden_widths = vec![8];
//! cfg.t_max = 40;
//! cfg.warmup_epochs = 2;
//! cfg.batch_size = 32;
//! let run = engine::run(&cfg, &noisy, None)?;
//!
//! // The kept set is cleaner than what went in.
//! let kept = noisy.subset(&run.kept)?;
//! assert!(kept.noise_rate()? < report.realized_rate);
//! # Ok::<(), latestop::Error>(())
//! ```

pub mod cli;
pub mod data;
pub mod engine;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod nn;
pub mod noise;
pub mod rng;
pub mod rundir;
pub mod tracker;

pub use data::{Dataset, SplitSpec, SyntheticSpec, TrainView};
pub use engine::{
    derive_iteration_seed, inner_halt, outer_stop, run, run_with_progress, HaltReason,
    IterationResult, LateStopConfig, OuterStopKind, RunResult,
};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use nn::{Activation, NetworkSpec, OptimizerState, Parameters};
pub use noise::{NoiseKind, NoiseReport, NoiseSpec};
pub use rng::RngState;
pub use tracker::{FkLRecord, FkLTracker, PredictionLog, RankCriterion, Ranking};
