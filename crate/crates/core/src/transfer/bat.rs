use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::auxiliary::{AuxiliarySet, TransferErrorEstimator};
use super::sampling::sample_random_tasks_design;
use super::{simplex, ProportionVector};
use crate::error::{Error, Result};
use crate::fqi::{run_fqi, FqiConfig, FqiRun, TrainingSet};
use crate::linear_q::LinearQ;
use crate::mdp::{InputDistribution, TaskModel};

/// Minimizes `Ê_λ` over proportions with `λ_1 = 0`, i.e. the simplex over
/// the sources. Non-unique minimizers resolve to the minimum-norm one.
pub fn bat_minimize(est: &TransferErrorEstimator) -> Result<ProportionVector> {
    let m = est.num_tasks();
    if m < 2 {
        return Err(Error::Dimension(format!("BAT needs at least one source, got M = {m}")));
    }
    if m == 2 {
        return Ok(ProportionVector::unit(2, 1));
    }
    let n = m - 1;
    let h = DMatrix::from_fn(n, n, |i, j| est.hessian()[(i + 1, j + 1)]);
    let g = DVector::from_fn(n, |i, _| est.linear()[i + 1]);
    let sol = simplex::minimize(&h, &g);
    let mut lambda = Vec::with_capacity(m);
    lambda.push(0.0);
    lambda.extend(sol.x);
    Ok(ProportionVector::normalized(lambda))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatOptions {
    /// Training samples `L` drawn per iteration.
    pub training_size: usize,
    /// Also train on the target transitions stored in the auxiliary set.
    pub include_target: bool,
}

#[derive(Debug, Clone, Default)]
pub struct BatRun {
    pub fqi: FqiRun,
    /// `λ̂^k` per iteration.
    pub lambdas: Vec<ProportionVector>,
    /// `Ê_{λ̂^k}(Q^{k-1})` per iteration.
    pub transfer_errors: Vec<f64>,
    pub counts: Vec<Vec<usize>>,
}

/// Each iteration: `λ̂ = argmin Ê_λ(Q^{k-1})`, then one fitted iteration on
/// `L` fresh samples drawn by random tasks design at `λ̂`.
pub fn run_bat<R: Rng + ?Sized>(
    tasks: &[TaskModel],
    aux: &AuxiliarySet,
    mu: &InputDistribution,
    opts: BatOptions,
    cfg: &FqiConfig,
    rng: &mut R,
) -> Result<BatRun> {
    if aux.num_tasks() != tasks.len() {
        return Err(Error::Dimension(format!(
            "auxiliary set covers {} tasks, {} given",
            aux.num_tasks(),
            tasks.len()
        )));
    }
    let target_samples = opts.include_target.then(|| aux.task_samples(0));
    let mut lambdas = Vec::new();
    let mut errors = Vec::new();
    let mut counts = Vec::new();
    let mut provider = |_k: usize, q_prev: &LinearQ| -> Result<TrainingSet> {
        let est = TransferErrorEstimator::new(aux, q_prev, cfg.gamma)?;
        let lambda = bat_minimize(&est)?;
        errors.push(est.evaluate(lambda.as_slice()));
        let mut ts = sample_random_tasks_design(tasks, &lambda, opts.training_size, mu, rng)?;
        if let Some(target) = &target_samples {
            ts.extend(target.clone());
        }
        counts.push(ts.counts(tasks.len()));
        lambdas.push(lambda);
        Ok(ts)
    };
    let fqi = run_fqi(&mut provider, cfg)?;
    Ok(BatRun {
        fqi,
        lambdas,
        transfer_errors: errors,
        counts,
    })
}

/// Fitted iterations on fresh random-tasks-design draws at a fixed `λ`.
pub fn run_ast<R: Rng + ?Sized>(
    tasks: &[TaskModel],
    lambda: &ProportionVector,
    training_size: usize,
    mu: &InputDistribution,
    cfg: &FqiConfig,
    rng: &mut R,
) -> Result<FqiRun> {
    let mut provider =
        |_k: usize, _q: &LinearQ| sample_random_tasks_design(tasks, lambda, training_size, mu, rng);
    run_fqi(&mut provider, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMap;
    use crate::mdp::task_catalog;
    use crate::transfer::build_auxiliary_set;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_source_is_forced() {
        let est = TransferErrorEstimator::from_values(2, vec![1.0, 3.0, 0.5, -2.0]);
        assert_eq!(bat_minimize(&est).unwrap().as_slice(), &[0.0, 1.0]);
        let est = TransferErrorEstimator::from_values(1, vec![1.0]);
        assert!(bat_minimize(&est).is_err());
    }

    #[test]
    fn reward_identity_on_first_task_set() {
        let tasks = task_catalog(1).unwrap();
        let mu = InputDistribution::Uniform { lo: -20.0, hi: 20.0 };
        let aux = build_auxiliary_set(&tasks, 1000, 1, &mu, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let q = LinearQ::zero(FeatureMap::default(), 50.0);
        let est = TransferErrorEstimator::new(&aux, &q, 0.9).unwrap();
        let l = bat_minimize(&est).unwrap();
        assert!(est.evaluate(l.as_slice()) <= 1e-6);
        assert!((5.0 * (l[2] - l[1]) - 1.0).abs() <= 0.02, "{l:?}");
        assert!((l[3] - l[4]).abs() <= 0.02, "{l:?}");
        // minimum-norm member of the family
        assert!((l[1] - 0.15).abs() < 1e-6 && (l[2] - 0.35).abs() < 1e-6, "{l:?}");
    }

    #[test]
    fn two_tasks_reduce_to_single_source_ast() {
        let tasks: Vec<_> = task_catalog(1).unwrap().into_iter().take(2).collect();
        let mu = InputDistribution::Uniform { lo: -20.0, hi: 20.0 };
        let aux = build_auxiliary_set(&tasks, 50, 1, &mu, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut cfg = FqiConfig::new(0.9, 5.0, FeatureMap::default());
        cfg.iterations = 3;
        let opts = BatOptions { training_size: 300, include_target: false };
        let bat = run_bat(&tasks, &aux, &mu, opts, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let ast = run_ast(&tasks, &ProportionVector::unit(2, 1), 300, &mu, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(bat.fqi.iterates, ast.iterates);
        assert!(bat.lambdas.iter().all(|l| l.as_slice() == [0.0, 1.0]));
    }

    #[test]
    fn target_samples_are_appended() {
        let tasks = task_catalog(1).unwrap();
        let mu = InputDistribution::Uniform { lo: -20.0, hi: 20.0 };
        let aux = build_auxiliary_set(&tasks, 40, 1, &mu, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut cfg = FqiConfig::new(0.9, 5.0, FeatureMap::default());
        cfg.iterations = 2;
        let opts = BatOptions { training_size: 100, include_target: true };
        let run = run_bat(&tasks, &aux, &mu, opts, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(run.counts.iter().all(|c| c[0] == 40 && c.iter().sum::<usize>() == 140));
    }
}
