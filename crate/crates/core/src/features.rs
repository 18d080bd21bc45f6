//! Gaussian radial-basis features with one block per action.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, StateAction};

/// Denominator convention for the Gaussian bumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianForm {
    /// `exp(-(x - c)^2 / (2 sigma2))`
    #[default]
    Standard,
    /// `exp(-(x - c)^2 / sigma2)`
    Narrow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureMap {
    pub centers: Vec<f64>,
    pub sigma2: f64,
    #[serde(default)]
    pub form: GaussianForm,
}

impl Default for FeatureMap {
    /// 9 centers at `-20, -15, ..., 20`, `sigma2 = 16`, two actions, `d = 20`.
    fn default() -> Self {
        FeatureMap::uniform(-20.0, 20.0, 9, 16.0)
    }
}

impl FeatureMap {
    pub fn uniform(lo: f64, hi: f64, count: usize, sigma2: f64) -> Self {
        let centers = match count {
            0 => vec![],
            1 => vec![0.5 * (lo + hi)],
            n => (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect(),
        };
        FeatureMap {
            centers,
            sigma2,
            form: GaussianForm::Standard,
        }
    }

    #[inline]
    pub fn num_actions(&self) -> usize {
        Action::COUNT
    }

    /// Features per action block: one per center plus the constant.
    #[inline]
    pub fn block_len(&self) -> usize {
        self.centers.len() + 1
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.block_len() * self.num_actions()
    }

    #[inline]
    fn denom(&self) -> f64 {
        match self.form {
            GaussianForm::Standard => 2.0 * self.sigma2,
            GaussianForm::Narrow => self.sigma2,
        }
    }

    /// Writes the per-block features of `x` (Gaussians then the constant)
    /// into `out`, which must have length `block_len()`.
    #[inline]
    pub fn fill_block(&self, x: f64, out: &mut [f64]) {
        let denom = self.denom();
        for (o, c) in out.iter_mut().zip(&self.centers) {
            let dx = x - c;
            *o = (-dx * dx / denom).exp();
        }
        out[self.centers.len()] = 1.0;
    }

    pub fn fill(&self, sa: StateAction, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        out.fill(0.0);
        let k = self.block_len();
        let start = sa.a.index() * k;
        self.fill_block(sa.x, &mut out[start..start + k]);
    }

    pub fn feature_vector(&self, sa: StateAction) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        self.fill(sa, &mut v);
        v
    }

    pub fn matrix(&self, inputs: impl IntoIterator<Item = StateAction>) -> FeatureMatrix {
        let inputs: Vec<StateAction> = inputs.into_iter().collect();
        let d = self.dim();
        let mut m = DMatrix::zeros(inputs.len(), d);
        let mut row = vec![0.0; d];
        for (i, sa) in inputs.iter().enumerate() {
            self.fill(*sa, &mut row);
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        FeatureMatrix(m)
    }
}

/// `L x d` matrix whose row `l` is the feature vector of the `l`-th input.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(pub DMatrix<f64>);

impl FeatureMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("ragged feature rows".into()));
        }
        Ok(FeatureMatrix(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j])))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramDiagnostic {
    /// Smallest eigenvalue of `(1/N) Σ φ φ^T`.
    pub omega: f64,
    /// Fewer samples than feature dimensions.
    pub ill_conditioned: bool,
}

pub fn gram_min_eigenvalue_of(phi: &FeatureMatrix) -> GramDiagnostic {
    let n = phi.rows();
    let d = phi.dim();
    if n == 0 || d == 0 {
        return GramDiagnostic {
            omega: 0.0,
            ill_conditioned: true,
        };
    }
    let gram = phi.0.tr_mul(&phi.0) / n as f64;
    let eig = SymmetricEigen::new(gram);
    GramDiagnostic {
        omega: eig.eigenvalues.min(),
        ill_conditioned: n < d,
    }
}

pub fn gram_min_eigenvalue(fm: &FeatureMap, samples: &[StateAction]) -> GramDiagnostic {
    gram_min_eigenvalue_of(&fm.matrix(samples.iter().copied()))
}
