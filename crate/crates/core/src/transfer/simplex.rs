//! Convex quadratic minimization over the probability simplex:
//!
//! ```text
//! minimize  x^T H x - 2 g^T x   subject to  x >= 0,  Σ x = 1
//! ```
//!
//! with `H` symmetric positive semidefinite. A primal active-set method over
//! the non-negativity constraints; each subproblem on the free coordinates
//! is solved in a null-space basis of the sum constraint with a
//! pseudo-inverse, so when minimizers are not unique the minimum-norm one is
//! returned. Projected gradient is the fallback when the active set fails
//! its optimality check.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenvalues of a reduced Hessian below this fraction of the largest are
/// treated as zero.
const PINV_TOLERANCE: f64 = 1e-10;
/// Step and decrease used by the first-order optimality check.
pub const CHECK_STEP: f64 = 1e-4;
pub const CHECK_DECREASE: f64 = 1e-8;

pub fn objective(h: &DMatrix<f64>, g: &DVector<f64>, x: &[f64]) -> f64 {
    let x = DVector::from_column_slice(x);
    x.dot(&(h * &x)) - 2.0 * g.dot(&x)
}

/// Largest decrease of `f` along the feasible directions `e_j - x` at the
/// given step. Non-positive at a minimizer up to curvature.
pub fn vertex_direction_decrease(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> f64 {
    let base = f(x);
    let mut worst = f64::NEG_INFINITY;
    let mut y = vec![0.0; x.len()];
    for j in 0..x.len() {
        for (i, yi) in y.iter_mut().enumerate() {
            let e = if i == j { 1.0 } else { 0.0 };
            *yi = x[i] + step * (e - x[i]);
        }
        worst = worst.max(base - f(&y));
    }
    worst
}

/// Euclidean projection onto `{x >= 0, Σ x = 1}`.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|vi| (vi - theta).max(0.0)).collect()
}

/// Orthonormal basis of `{z : Σ z = 0}` in `R^n` (Helmert contrasts), as
/// the columns of an `n x (n-1)` matrix.
fn sum_zero_basis(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n - 1, |i, k| {
        let k1 = (k + 1) as f64;
        let norm = (k1 * (k1 + 1.0)).sqrt();
        if i <= k {
            1.0 / norm
        } else if i == k + 1 {
            -k1 / norm
        } else {
            0.0
        }
    })
}

/// Minimum-norm minimizer of the objective on `{x_F sums to 1, x_rest = 0}`.
fn solve_face(h: &DMatrix<f64>, g: &DVector<f64>, free: &[usize]) -> Vec<f64> {
    let n = h.nrows();
    let f = free.len();
    let mut x = vec![0.0; n];
    if f == 1 {
        x[free[0]] = 1.0;
        return x;
    }
    let hf = DMatrix::from_fn(f, f, |i, j| h[(free[i], free[j])]);
    let gf = DVector::from_fn(f, |i, _| g[free[i]]);
    let x0 = DVector::from_element(f, 1.0 / f as f64);
    let z = sum_zero_basis(f);
    let reduced = z.tr_mul(&(&hf * &z));
    let rhs = -(z.tr_mul(&(&hf * &x0 - &gf)));

    let eig = SymmetricEigen::new(reduced);
    let e_max = eig.eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let mut y = DVector::zeros(f - 1);
    if e_max > 0.0 {
        for (i, e) in eig.eigenvalues.iter().enumerate() {
            if *e > PINV_TOLERANCE * e_max {
                let v = eig.eigenvectors.column(i);
                y += v * (v.dot(&rhs) / e);
            }
        }
    }
    let xf = x0 + z * y;
    for (i, &idx) in free.iter().enumerate() {
        x[idx] = xf[i];
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Set when the projected-gradient fallback produced the answer.
    pub fallback: bool,
}

pub fn minimize(h: &DMatrix<f64>, g: &DVector<f64>) -> SimplexSolution {
    let n = h.nrows();
    assert!(n >= 1 && h.ncols() == n && g.len() == n);
    if n == 1 {
        return SimplexSolution {
            x: vec![1.0],
            objective: objective(h, g, &[1.0]),
            iterations: 0,
            fallback: false,
        };
    }

    let scale = h.iter().chain(g.iter()).fold(1e-300f64, |m, v| m.max(v.abs()));
    let (x, iterations, converged) = active_set(h, g, scale);
    let f = |y: &[f64]| objective(h, g, y);
    let ok = converged && vertex_direction_decrease(f, &x, CHECK_STEP) <= CHECK_DECREASE * 1e-2;
    if ok {
        let objective = f(&x);
        return SimplexSolution {
            x,
            objective,
            iterations,
            fallback: false,
        };
    }

    let pg = projected_gradient(h, g, &x, 20_000);
    let (best, fallback) = if f(&pg) < f(&x) { (pg, true) } else { (x, false) };
    SimplexSolution {
        objective: f(&best),
        x: best,
        iterations,
        fallback,
    }
}

fn active_set(h: &DMatrix<f64>, g: &DVector<f64>, scale: f64) -> (Vec<f64>, usize, bool) {
    let n = h.nrows();
    let mut x = vec![1.0 / n as f64; n];
    let mut at_zero = vec![false; n];
    let max_iter = 50 * n + 50;
    for iter in 1..=max_iter {
        let free: Vec<usize> = (0..n).filter(|&i| !at_zero[i]).collect();
        let cand = solve_face(h, g, &free);

        let infeasible = free.iter().any(|&i| cand[i] < -1e-14);
        if !infeasible {
            x = cand.into_iter().map(|v| v.max(0.0)).collect();
            let grad = gradient(h, g, &x);
            let nu = free.iter().map(|&i| grad[i]).sum::<f64>() / free.len() as f64;
            let tol = 1e-12 * scale;
            let release = (0..n)
                .filter(|&i| at_zero[i])
                .map(|i| (i, grad[i] - nu))
                .filter(|&(_, mu)| mu < -tol)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match release {
                None => return (x, iter, true),
                Some((i, _)) => at_zero[i] = false,
            }
        } else {
            let mut step = 1.0;
            let mut blocking = None;
            for &i in &free {
                if cand[i] < x[i] && cand[i] < 0.0 {
                    let ratio = x[i] / (x[i] - cand[i]);
                    if ratio < step {
                        step = ratio;
                        blocking = Some(i);
                    }
                }
            }
            for i in 0..n {
                x[i] += step * (cand[i] - x[i]);
            }
            if let Some(b) = blocking {
                x[b] = 0.0;
                at_zero[b] = true;
            }
            let sum: f64 = x.iter().map(|v| v.max(0.0)).sum();
            for v in &mut x {
                *v = v.max(0.0) / sum;
            }
        }
    }
    (x, max_iter, false)
}

fn gradient(h: &DMatrix<f64>, g: &DVector<f64>, x: &[f64]) -> Vec<f64> {
    let xv = DVector::from_column_slice(x);
    ((h * xv - g) * 2.0).iter().copied().collect()
}

pub fn projected_gradient(h: &DMatrix<f64>, g: &DVector<f64>, start: &[f64], iterations: usize) -> Vec<f64> {
    let lmax = SymmetricEigen::new(h.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, e| m.max(*e));
    if lmax <= 0.0 {
        return start.to_vec();
    }
    let step = 1.0 / (2.0 * lmax);
    let mut x = project_to_simplex(start);
    for _ in 0..iterations {
        let grad = gradient(h, g, &x);
        let y: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - step * gi).collect();
        let next = project_to_simplex(&y);
        let delta = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        if delta < 1e-15 {
            break;
        }
    }
    x
}
