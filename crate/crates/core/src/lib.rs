//! Transfer of samples between Markov decision processes with fitted
//! Q-iteration.
//!
//! * [`mdp`]: the continuous chain-walk task family and its generative model.
//! * [`features`], [`linear_q`]: Gaussian features, linear Q-functions and the
//!   least-squares projection.
//! * [`fqi`]: the fitted Q-iteration loop and policy evaluation.
//! * [`transfer`]: random tasks design, the estimated transfer error and the
//!   AST, BAT and BTT algorithms.
//! * [`oracle`]: exhaustive lattice search used to validate the optimizers.
//! * [`harness`]: seeded multi-run experiments and CSV / plot-data output.

pub mod error;
pub mod features;
pub mod fqi;
pub mod harness;
pub mod linear_q;
pub mod mdp;
pub mod oracle;
pub mod transfer;

pub use error::{Error, Result};
pub use features::{FeatureMap, FeatureMatrix, GaussianForm};
pub use fqi::{EvalConfig, FqiConfig, TrainingSet, TransferSample};
pub use linear_q::{LinearQ, WeightVector};
pub use mdp::{Action, ChainParams, InputDistribution, StateAction, TaskModel, Transition};
pub use transfer::{AuxiliarySet, BetaVector, ProportionVector, SamplePool, TransferErrorEstimator};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The random stream used everywhere; portable and reproducible across
/// platforms.
pub type SimRng = rand_chacha::ChaCha8Rng;
