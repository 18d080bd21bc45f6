use rand::Rng;

use super::auxiliary::{AuxiliarySet, TransferErrorEstimator};
use super::sampling::{draw_capped_training_set, SamplePool};
use super::BetaVector;
use crate::error::{Error, Result};
use crate::fqi::{run_fqi, FqiConfig, FqiRun, TrainingSet};
use crate::linear_q::LinearQ;

/// Ticks per unit of `β` on the fine lattice (resolution 0.01).
pub(crate) const FINE_TICKS: usize = 100;

/// `Ê_β + τ sqrt(d / Σ β_m N_m)`, where `Ê_β` is the transfer error at the
/// induced proportions with the target included in the mixture.
pub fn btt_objective(est: &TransferErrorEstimator, beta: &BetaVector, tau: f64, d: usize) -> Result<f64> {
    if beta.beta.len() != est.num_tasks() {
        return Err(Error::Dimension(format!(
            "{} fractions for {} tasks",
            beta.beta.len(),
            est.num_tasks()
        )));
    }
    let total = beta.total();
    if !(total > 0.0) {
        return Err(Error::ZeroBeta);
    }
    let lambda = beta.induced_lambda()?;
    Ok(est.evaluate(lambda.as_slice()) + tau * (d as f64 / total).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BttOptions {
    pub tau: f64,
    /// Coarse grid spacing in fine ticks (25 ticks = 0.25).
    pub coarse_ticks: usize,
    /// Best coarse points used as coordinate-descent starts.
    pub grid_starts: usize,
    /// Additional uniformly random starts.
    pub random_starts: usize,
    /// Exhaustively search the best coarse cell at the fine resolution when
    /// it holds at most this many points.
    pub exhaustive_limit: usize,
}

impl Default for BttOptions {
    fn default() -> Self {
        BttOptions {
            tau: 0.75,
            coarse_ticks: 25,
            grid_starts: 8,
            random_starts: 4,
            exhaustive_limit: 200_000,
        }
    }
}

/// Objective over lattice points `β_m = ticks_m / 100`.
struct Lattice<'a> {
    est: &'a TransferErrorEstimator,
    caps: Vec<f64>,
    tau: f64,
    d: f64,
    lambda: Vec<f64>,
    best: Option<(f64, Vec<usize>)>,
}

impl<'a> Lattice<'a> {
    fn value(&mut self, ticks: &[usize]) -> f64 {
        let total: f64 = ticks
            .iter()
            .zip(&self.caps)
            .map(|(t, n)| *t as f64 / FINE_TICKS as f64 * n)
            .sum();
        if !(total > 0.0) {
            return f64::INFINITY;
        }
        for ((l, t), n) in self.lambda.iter_mut().zip(ticks).zip(&self.caps) {
            *l = *t as f64 / FINE_TICKS as f64 * n / total;
        }
        let v = self.est.evaluate(&self.lambda) + self.tau * (self.d / total).sqrt();
        let better = match &self.best {
            None => true,
            Some((bv, bt)) => v < *bv || (v == *bv && ticks < bt.as_slice()),
        };
        if better {
            self.best = Some((v, ticks.to_vec()));
        }
        v
    }

    /// Exact coordinate minimization over the fine lattice until no
    /// coordinate moves.
    fn coordinate_descent(&mut self, start: Vec<usize>) {
        let mut x = start;
        let mut fx = self.value(&x);
        for _ in 0..200 {
            let mut moved = false;
            for m in 0..x.len() {
                let current = x[m];
                let mut best_tick = current;
                for tick in 0..=FINE_TICKS {
                    if tick == current {
                        continue;
                    }
                    x[m] = tick;
                    let v = self.value(&x);
                    if v < fx {
                        fx = v;
                        best_tick = tick;
                    }
                }
                x[m] = best_tick;
                moved |= best_tick != current;
            }
            if !moved {
                break;
            }
        }
    }
}

/// Visits every point of `Π_m {lo_m, lo_m + step, ..., hi_m}`.
fn for_each_point(lo: &[usize], hi: &[usize], step: usize, mut f: impl FnMut(&[usize])) {
    let mut x = lo.to_vec();
    loop {
        f(&x);
        let mut m = 0;
        loop {
            if m == x.len() {
                return;
            }
            if x[m] + step <= hi[m] {
                x[m] += step;
                break;
            }
            x[m] = lo[m];
            m += 1;
        }
    }
}

/// Approximate minimizer of the tradeoff objective over `[0, 1]^M`.
///
/// Every point of the coarse grid is evaluated; the best ones plus a few
/// random points seed exact coordinate descent on the 0.01 lattice, and the
/// best coarse cell is searched exhaustively when small enough. The result
/// is the best lattice point evaluated (ties broken lexicographically).
pub fn btt_optimize<R: Rng + ?Sized>(
    est: &TransferErrorEstimator,
    caps: &[usize],
    d: usize,
    opts: &BttOptions,
    rng: &mut R,
) -> Result<BetaVector> {
    let m = est.num_tasks();
    if caps.len() != m {
        return Err(Error::Dimension(format!("{} caps for {m} tasks", caps.len())));
    }
    if caps.iter().all(|&c| c == 0) {
        return Err(Error::ZeroBeta);
    }
    let coarse = opts.coarse_ticks.clamp(1, FINE_TICKS);
    let mut lattice = Lattice {
        est,
        caps: caps.iter().map(|&c| c as f64).collect(),
        tau: opts.tau,
        d: d as f64,
        lambda: vec![0.0; m],
        best: None,
    };

    let mut coarse_points: Vec<(f64, Vec<usize>)> = Vec::new();
    let top = vec![FINE_TICKS / coarse * coarse; m];
    for_each_point(&vec![0; m], &top, coarse, |x| {
        let v = lattice.value(x);
        if v.is_finite() {
            coarse_points.push((v, x.to_vec()));
        }
    });
    // make sure the upper face is on the coarse grid even if 100 % coarse != 0
    let ones = vec![FINE_TICKS; m];
    let v = lattice.value(&ones);
    coarse_points.push((v, ones));
    coarse_points.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

    let best_cell = coarse_points[0].1.clone();
    let lo: Vec<usize> = best_cell.iter().map(|&t| t.saturating_sub(coarse)).collect();
    let hi: Vec<usize> = best_cell.iter().map(|&t| (t + coarse).min(FINE_TICKS)).collect();
    let cell_size = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| (h - l + 1) as f64)
        .product::<f64>();
    if cell_size <= opts.exhaustive_limit as f64 {
        for_each_point(&lo, &hi, 1, |x| {
            lattice.value(x);
        });
    }

    let mut starts: Vec<Vec<usize>> = coarse_points
        .iter()
        .take(opts.grid_starts.max(1))
        .map(|(_, x)| x.clone())
        .collect();
    for _ in 0..opts.random_starts {
        starts.push((0..m).map(|_| rng.random_range(0..=FINE_TICKS)).collect());
    }
    for s in starts {
        lattice.coordinate_descent(s);
    }

    let (_, ticks) = lattice.best.expect("at least one point evaluated");
    BetaVector::new(ticks.iter().map(|&t| t as f64 / FINE_TICKS as f64).collect(), caps.to_vec())
}

#[derive(Debug, Clone, Default)]
pub struct BttRun {
    pub fqi: FqiRun,
    /// `β̂^k` per iteration.
    pub betas: Vec<BetaVector>,
    /// Samples drawn from each task per iteration.
    pub counts: Vec<Vec<usize>>,
    /// Objective value of `β̂^k`.
    pub objectives: Vec<f64>,
}

/// Each iteration: `β̂ = argmin Ê_β(Q^{k-1}) + τ sqrt(d / Σ β_m N_m)`, then
/// one fitted iteration on `round(β̂_m N_m)` samples per task drawn without
/// replacement from the pool.
pub fn run_btt<R: Rng + ?Sized>(
    pool: &SamplePool,
    aux: &AuxiliarySet,
    opts: &BttOptions,
    cfg: &FqiConfig,
    rng: &mut R,
) -> Result<BttRun> {
    let caps = pool.caps();
    if aux.num_tasks() != caps.len() {
        return Err(Error::Dimension(format!(
            "auxiliary set covers {} tasks, pool holds {}",
            aux.num_tasks(),
            caps.len()
        )));
    }
    let d = cfg.feature_map.dim();
    let mut betas = Vec::new();
    let mut counts = Vec::new();
    let mut objectives = Vec::new();
    let mut provider = |_k: usize, q_prev: &LinearQ| -> Result<TrainingSet> {
        let est = TransferErrorEstimator::new(aux, q_prev, cfg.gamma)?;
        let beta = btt_optimize(&est, &caps, d, opts, rng)?;
        objectives.push(btt_objective(&est, &beta, opts.tau, d)?);
        let ts = draw_capped_training_set(pool, &beta, rng)?;
        counts.push(ts.counts(caps.len()));
        betas.push(beta);
        Ok(ts)
    };
    let fqi = run_fqi(&mut provider, cfg)?;
    Ok(BttRun {
        fqi,
        betas,
        counts,
        objectives,
    })
}
