//! Experiment harness: synthetic data, masks, metrics, sweeps, image stacks
//! and run configuration.

pub mod config;
pub mod images;
pub mod metrics;
pub mod sweep;
pub mod synthetic;

pub use config::{default_family, resolve_model, ModelKind, RunConfig};
pub use metrics::{psnr, relative_error, CompletionMetrics};
pub use sweep::{read_records, run_cell, sweep, ExperimentRecord, SweepSpec, SUCCESS_RE};
pub use synthetic::{gen_mask, gen_synthetic, random_permutation, FactorSource, SyntheticSpec};
