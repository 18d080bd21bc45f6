//! Exhaustive lattice search for the BAT and BTT objectives. Independent of
//! the solvers in `transfer`; used to validate them.

use crate::error::{Error, Result};
use crate::transfer::TransferErrorEstimator;

/// Largest number of lattice points either oracle will enumerate.
pub const MAX_POINTS: f64 = 5e7;
pub const MAX_TASKS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptimum {
    /// `λ` (BAT, target entry 0) or `β` (BTT).
    pub point: Vec<f64>,
    pub value: f64,
    /// Largest change of the objective between the optimum and a lattice
    /// neighbour one step away. A lattice-based solver that lands next to
    /// the oracle optimum is within this of it.
    pub gap: f64,
    pub evaluated: usize,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn check_size(m: usize, points: f64) -> Result<()> {
    if m > MAX_TASKS {
        return Err(Error::InstanceTooLarge(format!("M = {m} exceeds {MAX_TASKS}")));
    }
    if points > MAX_POINTS {
        return Err(Error::InstanceTooLarge(format!("{points:.0} lattice points")));
    }
    Ok(())
}

/// Minimum of `Ê_λ` over `{λ_1 = 0, λ_m = k_m / steps, Σ k_m = steps}`.
pub fn bat_grid(est: &TransferErrorEstimator, steps: usize) -> Result<GridOptimum> {
    let m = est.num_tasks();
    if m < 2 || steps == 0 {
        return Err(Error::Dimension("BAT oracle needs M >= 2 and a positive resolution".into()));
    }
    let n = m - 1;
    check_size(m, binomial(steps + n - 1, n - 1))?;

    let h = 1.0 / steps as f64;
    let eval = |ticks: &[usize]| {
        let mut lambda = vec![0.0; m];
        for (i, t) in ticks.iter().enumerate() {
            lambda[i + 1] = *t as f64 * h;
        }
        est.evaluate_direct(&lambda)
    };

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut evaluated = 0usize;
    let mut ticks = vec![0usize; n];
    compositions(steps, &mut ticks, 0, &mut |t| {
        evaluated += 1;
        let v = eval(t);
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, t.to_vec()));
        }
    });
    let (value, at) = best.expect("non-empty lattice");

    let mut gap = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j && at[i] > 0 {
                let mut nb = at.clone();
                nb[i] -= 1;
                nb[j] += 1;
                gap = gap.max((eval(&nb) - value).abs());
            }
        }
    }

    let mut point = vec![0.0];
    point.extend(at.iter().map(|&t| t as f64 * h));
    Ok(GridOptimum {
        point,
        value,
        gap,
        evaluated,
    })
}

fn compositions(remaining: usize, ticks: &mut [usize], i: usize, f: &mut impl FnMut(&[usize])) {
    if i + 1 == ticks.len() {
        ticks[i] = remaining;
        f(ticks);
        return;
    }
    for k in 0..=remaining {
        ticks[i] = k;
        compositions(remaining - k, ticks, i + 1, f);
    }
}

/// Minimum of `Ê_β + τ sqrt(d / Σ β_m N_m)` over `β_m ∈ {0, 1/steps, ..., 1}`.
pub fn btt_grid(est: &TransferErrorEstimator, caps: &[usize], tau: f64, d: usize, steps: usize) -> Result<GridOptimum> {
    let m = est.num_tasks();
    if caps.len() != m || steps == 0 {
        return Err(Error::Dimension("BTT oracle needs one cap per task and a positive resolution".into()));
    }
    check_size(m, ((steps + 1) as f64).powi(m as i32))?;

    let h = 1.0 / steps as f64;
    let eval = |ticks: &[usize]| -> f64 {
        let weights: Vec<f64> = ticks.iter().zip(caps).map(|(t, n)| *t as f64 * h * *n as f64).collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return f64::INFINITY;
        }
        let lambda: Vec<f64> = weights.iter().map(|w| w / total).collect();
        est.evaluate_direct(&lambda) + tau * (d as f64 / total).sqrt()
    };

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut evaluated = 0usize;
    let mut ticks = vec![0usize; m];
    'outer: loop {
        evaluated += 1;
        let v = eval(&ticks);
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, ticks.clone()));
        }
        for t in ticks.iter_mut() {
            if *t < steps {
                *t += 1;
                continue 'outer;
            }
            *t = 0;
        }
        break;
    }
    let (value, at) = best.expect("non-empty lattice");

    let mut gap = 0.0f64;
    for i in 0..m {
        for delta in [-1i64, 1] {
            let t = at[i] as i64 + delta;
            if (0..=steps as i64).contains(&t) {
                let mut nb = at.clone();
                nb[i] = t as usize;
                let v = eval(&nb);
                if v.is_finite() {
                    gap = gap.max((v - value).abs());
                }
            }
        }
    }

    Ok(GridOptimum {
        point: at.iter().map(|&t| t as f64 * h).collect(),
        value,
        gap,
        evaluated,
    })
}
