//! Linear action-value functions, truncation and the least-squares projection.

use std::fmt::Write as _;

use nalgebra::{DVector, QR, SVD};

use crate::error::{Error, Result};
use crate::features::{FeatureMap, FeatureMatrix};
use crate::mdp::{Action, StateAction};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// `f_α(x, a) = φ(x, a)^T α`, read through the truncation `[-v_max, v_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearQ {
    pub alpha: Vec<f64>,
    pub feature_map: FeatureMap,
    pub v_max: f64,
}

impl LinearQ {
    pub fn new(alpha: Vec<f64>, feature_map: FeatureMap, v_max: f64) -> Result<Self> {
        if alpha.len() != feature_map.dim() {
            return Err(Error::Dimension(format!(
                "weight vector has length {}, feature map has d = {}",
                alpha.len(),
                feature_map.dim()
            )));
        }
        Ok(LinearQ {
            alpha,
            feature_map,
            v_max,
        })
    }

    /// The zero function.
    pub fn zero(feature_map: FeatureMap, v_max: f64) -> Self {
        LinearQ {
            alpha: vec![0.0; feature_map.dim()],
            feature_map,
            v_max,
        }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha_norm(&self) -> f64 {
        self.alpha.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    #[inline]
    fn truncate(&self, v: f64) -> f64 {
        v.clamp(-self.v_max, self.v_max)
    }

    /// Untruncated inner product `φ(sa)^T α`.
    pub fn evaluate_raw(&self, sa: StateAction) -> f64 {
        let k = self.feature_map.block_len();
        let mut block = vec![0.0; k];
        self.feature_map.fill_block(sa.x, &mut block);
        let start = sa.a.index() * k;
        dot(&block, &self.alpha[start..start + k])
    }

    pub fn evaluate_truncated(&self, sa: StateAction) -> f64 {
        self.truncate(self.evaluate_raw(sa))
    }

    /// Truncated values of both actions at `x`.
    pub fn action_values(&self, x: f64) -> [f64; Action::COUNT] {
        let k = self.feature_map.block_len();
        let mut block = vec![0.0; k];
        self.feature_map.fill_block(x, &mut block);
        let mut out = [0.0; Action::COUNT];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.truncate(dot(&block, &self.alpha[i * k..(i + 1) * k]));
        }
        out
    }

    /// Best action and its truncated value; ties go to the lower action index.
    pub fn greedy_value(&self, x: f64) -> (Action, f64) {
        let values = self.action_values(x);
        let mut best = 0;
        for (i, v) in values.iter().enumerate().skip(1) {
            if *v > values[best] {
                best = i;
            }
        }
        (Action::from_index(best).unwrap(), values[best])
    }

    pub fn max_value(&self, x: f64) -> f64 {
        self.greedy_value(x).1
    }

    pub fn weights(&self) -> WeightVector {
        WeightVector {
            alpha: self.alpha.clone(),
            v_max: self.v_max,
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizer of `(1/L) Σ (φ_l^T α - p_l)^2`; the minimum-norm one when `Φ`
/// is rank deficient.
///
/// `Φ = QR` is factored first, then the pseudo-inverse of the small `d x d`
/// factor `R` is applied to `Q^T p`.
pub fn least_squares_fit(phi: &FeatureMatrix, targets: &[f64]) -> Result<Vec<f64>> {
    let (l, d) = (phi.rows(), phi.dim());
    if l == 0 {
        return Err(Error::Dimension("empty feature matrix".into()));
    }
    if targets.len() != l {
        return Err(Error::Dimension(format!("{} targets for {l} rows", targets.len())));
    }
    if phi.0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature matrix"));
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression targets"));
    }

    let mut qtp = DVector::from_column_slice(targets);
    let (r, rhs) = if l >= d {
        let qr = QR::new(phi.0.clone());
        qr.q_tr_mul(&mut qtp);
        (qr.r(), qtp.rows(0, d).into_owned())
    } else {
        (phi.0.clone(), qtp)
    };

    let svd = SVD::new(r, true, true);
    let s_max = svd.singular_values.max();
    if s_max == 0.0 {
        return Ok(vec![0.0; d]);
    }
    let alpha = svd
        .solve(&rhs, RANK_TOLERANCE * s_max)
        .map_err(|e| Error::Dimension(e.to_string()))?;
    Ok(alpha.iter().copied().collect())
}

/// Mean squared residual of `alpha` on `(phi, targets)`.
pub fn mean_squared_loss(phi: &FeatureMatrix, alpha: &[f64], targets: &[f64]) -> f64 {
    let a = DVector::from_column_slice(alpha);
    let pred = &phi.0 * a;
    let n = targets.len().max(1) as f64;
    pred.iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n
}

/// Checkpoint format for weight vectors:
///
/// ```text
/// d <dimension>
/// v_max <bound>
/// <alpha_1>
/// ...
/// <alpha_d>
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub alpha: Vec<f64>,
    pub v_max: f64,
}

impl WeightVector {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "d {}", self.alpha.len());
        let _ = writeln!(s, "v_max {:?}", self.v_max);
        for a in &self.alpha {
            let _ = writeln!(s, "{a:?}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = |line: Option<&str>, key: &str| -> Result<String> {
            let line = line.ok_or_else(|| Error::Parse(format!("missing `{key}` header")))?;
            line.strip_prefix(key)
                .map(|v| v.trim().to_string())
                .ok_or_else(|| Error::Parse(format!("expected `{key}`, found `{line}`")))
        };
        let d: usize = header(lines.next(), "d")?
            .parse()
            .map_err(|e| Error::Parse(format!("d: {e}")))?;
        let v_max: f64 = header(lines.next(), "v_max")?
            .parse()
            .map_err(|e| Error::Parse(format!("v_max: {e}")))?;
        let alpha = lines
            .map(|l| l.parse::<f64>().map_err(|e| Error::Parse(format!("`{l}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if alpha.len() != d {
            return Err(Error::Parse(format!("header says d = {d}, found {} values", alpha.len())));
        }
        Ok(WeightVector { alpha, v_max })
    }

    pub fn into_q(self, feature_map: FeatureMap) -> Result<LinearQ> {
        LinearQ::new(self.alpha, feature_map, self.v_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Action::{Left, Right};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, l: usize, d: usize) -> FeatureMatrix {
        let rows: Vec<Vec<f64>> = (0..l)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        FeatureMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn recovers_exact_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi = random_matrix(&mut rng, 60, 8);
        let alpha0: Vec<f64> = (0..8).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p: Vec<f64> = (0..60)
            .map(|i| (0..8).map(|j| phi.0[(i, j)] * alpha0[j]).sum())
            .collect();
        let alpha = least_squares_fit(&phi, &p).unwrap();
        let err: f64 = alpha.iter().zip(&alpha0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = alpha0.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err / norm < 1e-8, "{err}");
    }

    #[test]
    fn hand_solved_two_by_two() {
        let phi = FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let alpha = least_squares_fit(&phi, &[1.0, 1.0, 2.0]).unwrap();
        assert!((alpha[0] - 1.0).abs() < 1e-12 && (alpha[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_targets_give_zero_weights() {
        let phi = FeatureMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(least_squares_fit(&phi, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn rank_deficient_is_minimum_norm() {
        // duplicated column: any (a, b) with a + b = 2 fits; min-norm is (1, 1)
        let phi = FeatureMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]).unwrap();
        let alpha = least_squares_fit(&phi, &[2.0, 4.0, 6.0]).unwrap();
        assert!((alpha[0] - 1.0).abs() < 1e-10 && (alpha[1] - 1.0).abs() < 1e-10, "{alpha:?}");

        // fewer rows than columns
        let phi = FeatureMatrix::from_rows(&[vec![1.0, 0.0, 1.0]]).unwrap();
        let alpha = least_squares_fit(&phi, &[2.0]).unwrap();
        assert!((alpha[0] - 1.0).abs() < 1e-12 && alpha[1].abs() < 1e-12 && (alpha[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let phi = FeatureMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert!(matches!(least_squares_fit(&phi, &[1.0, f64::NAN]), Err(Error::NonFinite(_))));
        let phi = FeatureMatrix::from_rows(&[vec![f64::INFINITY], vec![1.0]]).unwrap();
        assert!(matches!(least_squares_fit(&phi, &[1.0, 1.0]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn truncation() {
        let fm = FeatureMap::default();
        let q = LinearQ::zero(fm.clone(), 10.0);
        assert_eq!(q.evaluate_truncated(StateAction::new(3.0, Right)), 0.0);

        // the constant feature of the left block is index 9
        let mut alpha = vec![0.0; 20];
        alpha[9] = 20.0;
        let q = LinearQ::new(alpha.clone(), fm.clone(), 10.0).unwrap();
        assert_eq!(q.evaluate_truncated(StateAction::new(-17.0, Left)), 10.0);
        alpha[9] = -3.5;
        let q = LinearQ::new(alpha, fm, 10.0).unwrap();
        assert_eq!(q.evaluate_truncated(StateAction::new(-17.0, Left)), -3.5);
    }

    #[test]
    fn greedy_ties_and_preferences() {
        let fm = FeatureMap::default();
        let q = LinearQ::zero(fm.clone(), 10.0);
        assert_eq!(q.greedy_value(4.0), (Left, 0.0));

        let mut alpha = vec![0.0; 20];
        alpha[19] = 1.0;
        let q = LinearQ::new(alpha, fm.clone(), 10.0).unwrap();
        assert_eq!(q.greedy_value(4.0), (Right, 1.0));

        // spot state checked against both actions
        let alpha: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let q = LinearQ::new(alpha, fm, 10.0).unwrap();
        let left = q.evaluate_truncated(StateAction::new(7.0, Left));
        let right = q.evaluate_truncated(StateAction::new(7.0, Right));
        let (a, v) = q.greedy_value(7.0);
        assert_eq!(v, left.max(right));
        assert_eq!(a, if right > left { Right } else { Left });
    }

    #[test]
    fn weight_text_round_trip() {
        let w = WeightVector {
            alpha: vec![0.1, -2.5e-9, 1.0 / 3.0, 0.0],
            v_max: 50.0,
        };
        let text = w.to_text();
        assert!(text.starts_with("d 4\nv_max 50.0\n"));
        assert_eq!(WeightVector::parse(&text).unwrap(), w);
        assert!(WeightVector::parse("d 3\nv_max 1\n1\n2\n").is_err());
        assert!(WeightVector::parse("v_max 1\n").is_err());
    }
}
