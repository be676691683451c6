//! Fusion of feature vectors from several pre-trained models into one
//! downstream representation.
//!
//! The crate is organised bottom-up:
//!
//! - [`numeric`]: dense `f64` matrices and a reverse-mode gradient tape.
//! - [`attention`]: self-attention and cross-attention blocks over bank
//!   vectors, with a multi-head variant.
//! - [`fusion`]: architectures composed from those blocks plus the
//!   add/concatenate baselines and a linear classifier head.
//! - [`training`]: cross-entropy, SGD with momentum and weight decay,
//!   the training loop and evaluation.
//! - [`infotheory`]: exact mutual-information computations on small
//!   discrete joint distributions.
//! - [`bankio`]: bank CSV files, checkpoints, configs and synthetic tasks.

pub mod attention;
pub mod bankio;
pub mod error;
pub mod fusion;
pub mod infotheory;
pub mod numeric;
pub mod training;

pub use attention::{
    cab_forward, mha_wrap, sab_forward, CrossAttentionBlock, MultiHeadConfig, ProjectionTriple,
    SelfAttentionBlock,
};
pub use bankio::{FeatureBankDataset, Sample, Split, SyntheticKind, SyntheticTaskSpec};
pub use error::{Error, Result};
pub use fusion::{aggregate, ArchitectureKind, FusionModel};
pub use numeric::{Gradients, Graph, Matrix, Var};
pub use training::{cross_entropy, evaluate, train, Metrics, Sgd, TrainConfig};
