//! Sample transfer between tasks: random tasks design, the auxiliary set and
//! the estimated transfer error, and the AST / BAT / BTT algorithms.
//!
//! Task positions are 0-based throughout; position 0 is the target.

mod auxiliary;
mod bat;
mod btt;
mod sampling;
pub mod simplex;

pub use auxiliary::{
    build_auxiliary_at, build_auxiliary_set, build_auxiliary_set_with, estimated_transfer_error,
    AuxiliarySet, NextStateNoise, TransferErrorEstimator,
};
pub use bat::{bat_minimize, run_ast, run_bat, BatOptions, BatRun};
pub use btt::{btt_objective, btt_optimize, run_btt, BttOptions, BttRun};
pub use sampling::{draw_capped_training_set, round_half_up, sample_random_tasks_design, SamplePool};

use crate::error::{Error, Result};

/// Absolute tolerance on `Σ λ_m = 1`.
pub const SUM_TOLERANCE: f64 = 1e-9;
/// Entries above `-NEG_TOLERANCE` are accepted and clipped to 0.
pub const NEG_TOLERANCE: f64 = 1e-12;

/// Mixing proportions over the tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct ProportionVector(Vec<f64>);

impl ProportionVector {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::InvalidProportions("empty".into()));
        }
        if lambda.iter().any(|l| !l.is_finite() || *l < -NEG_TOLERANCE) {
            return Err(Error::InvalidProportions(format!("{lambda:?} has negative entries")));
        }
        let sum: f64 = lambda.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidProportions(format!("{lambda:?} sums to {sum}")));
        }
        Ok(ProportionVector(lambda.into_iter().map(|l| l.max(0.0)).collect()))
    }

    /// Clips negatives and renormalizes. Used on solver output.
    pub(crate) fn normalized(lambda: Vec<f64>) -> Self {
        let clipped: Vec<f64> = lambda.into_iter().map(|l| l.max(0.0)).collect();
        let sum: f64 = clipped.iter().sum();
        debug_assert!(sum > 0.0);
        ProportionVector(clipped.into_iter().map(|l| l / sum).collect())
    }

    /// All mass on task `m`.
    pub fn unit(len: usize, m: usize) -> Self {
        let mut v = vec![0.0; len];
        v[m] = 1.0;
        ProportionVector(v)
    }

    /// Uniform over the sources, nothing on the target.
    pub fn uniform_sources(len: usize) -> Self {
        assert!(len >= 2);
        let w = 1.0 / (len - 1) as f64;
        let mut v = vec![w; len];
        v[0] = 0.0;
        ProportionVector(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ProportionVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Per-task fractions `β_m ∈ [0, 1]` of the `caps[m]` available samples.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaVector {
    pub beta: Vec<f64>,
    pub caps: Vec<usize>,
}

impl BetaVector {
    pub fn new(beta: Vec<f64>, caps: Vec<usize>) -> Result<Self> {
        if beta.len() != caps.len() {
            return Err(Error::Dimension(format!("{} fractions for {} caps", beta.len(), caps.len())));
        }
        if beta.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::InvalidProportions(format!("beta {beta:?} outside [0, 1]")));
        }
        Ok(BetaVector { beta, caps })
    }

    /// `Σ β_m N_m`.
    pub fn total(&self) -> f64 {
        self.beta.iter().zip(&self.caps).map(|(b, n)| b * *n as f64).sum()
    }

    /// `λ_m = β_m N_m / Σ β_m' N_m'`.
    pub fn induced_lambda(&self) -> Result<ProportionVector> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::ZeroBeta);
        }
        Ok(ProportionVector::normalized(
            self.beta.iter().zip(&self.caps).map(|(b, n)| b * *n as f64 / total).collect(),
        ))
    }

    /// Sample counts `round(β_m N_m)`, rounding halves up.
    pub fn counts(&self) -> Vec<usize> {
        self.beta.iter().zip(&self.caps).map(|(b, n)| round_half_up(b * *n as f64)).collect()
    }
}
