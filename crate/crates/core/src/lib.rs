//! Missing-value imputation by unsupervised backpropagation.
//!
//! The crate is organized the way an experiment flows:
//!
//! - [`dataset`]: loading, normalization, one-hot encoding and MCAR corruption
//! - [`mlp`]: the logistic network with weight and input gradients
//! - [`trainer`]: three-phase latent/weight training and its single-phase ablation
//! - [`imputers`]: baseline, fuzzy k-means, instance-based, matrix factorization,
//!   nonlinear PCA and UBP imputers behind one entry point
//! - [`eval`]: scoring, parameter sweeps and pairwise comparisons
//! - [`stats`]: the Wilcoxon signed-ranks test

pub mod dataset;
pub mod error;
pub mod eval;
pub mod imputers;
pub mod mlp;
pub mod stats;
pub mod trainer;

pub use dataset::{corrupt_mcar, AttributeKind, AttributeSpec, Cell, CorruptionPlan, Dataset, EncodedMatrix, LoadOptions};
pub use error::{Error, Result};
pub use eval::{compare_pairwise, score, sweep, ErrorReport, PairwiseComparison, SweepConfig, SweepResult};
pub use imputers::{impute, ImputationResult, ImputeOptions, ImputerSpec, Method};
pub use mlp::{MlpModel, Topology};
pub use trainer::{nlpca_train, ubp_train, EpochRecord, LatentMatrix, TrainConfig, TrainedModel};
