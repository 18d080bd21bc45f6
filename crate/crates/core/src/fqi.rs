//! Fitted Q-iteration with a linear space and Monte Carlo evaluation of the
//! greedy policy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{gram_min_eigenvalue_of, FeatureMap};
use crate::linear_q::{least_squares_fit, mean_squared_loss, LinearQ};
use crate::mdp::{Action, StateAction, TaskModel, Transition};

pub const DEFAULT_ITERATIONS: usize = 13;

/// One training tuple. `task` is the 0-based position of the task that
/// generated `(y, r)` in the experiment's task list; the target is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferSample {
    pub x: f64,
    pub a: Action,
    pub y: f64,
    pub r: f64,
    pub task: usize,
}

impl TransferSample {
    pub fn from_transition(t: Transition, task: usize) -> Self {
        TransferSample {
            x: t.x,
            a: t.a,
            y: t.y,
            r: t.r,
            task,
        }
    }

    pub fn input(&self) -> StateAction {
        StateAction::new(self.x, self.a)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub samples: Vec<TransferSample>,
}

impl TrainingSet {
    pub fn new(samples: Vec<TransferSample>) -> Self {
        TrainingSet { samples }
    }

    pub fn from_transitions(ts: &[Transition], task: usize) -> Self {
        TrainingSet::new(ts.iter().map(|t| TransferSample::from_transition(*t, task)).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of samples contributed by each of `num_tasks` tasks.
    pub fn counts(&self, num_tasks: usize) -> Vec<usize> {
        let mut c = vec![0; num_tasks];
        for s in &self.samples {
            if s.task < num_tasks {
                c[s.task] += 1;
            }
        }
        c
    }

    pub fn extend(&mut self, other: TrainingSet) {
        self.samples.extend(other.samples);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FqiConfig {
    pub iterations: usize,
    pub gamma: f64,
    pub v_max: f64,
    pub feature_map: FeatureMap,
}

impl FqiConfig {
    /// `v_max = r_max / (1 - gamma)`.
    pub fn new(gamma: f64, r_max: f64, feature_map: FeatureMap) -> Self {
        FqiConfig {
            iterations: DEFAULT_ITERATIONS,
            gamma,
            v_max: r_max / (1.0 - gamma),
            feature_map,
        }
    }

    pub fn initial_q(&self) -> LinearQ {
        LinearQ::zero(self.feature_map.clone(), self.v_max)
    }
}

/// `p_l = r_l + γ max_a' Q(y_l, a')` with `Q` truncated.
pub fn bellman_targets(ts: &TrainingSet, q_prev: &LinearQ, gamma: f64) -> Vec<f64> {
    ts.samples
        .iter()
        .map(|s| s.r + gamma * q_prev.max_value(s.y))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationDiagnostics {
    /// Mean squared residual of the fit.
    pub loss: f64,
    pub alpha_norm: f64,
    /// Smallest eigenvalue of the empirical Gram matrix of the inputs.
    pub omega: f64,
    pub samples: usize,
}

/// One body iteration: regress the Bellman targets onto the feature space.
pub fn fqi_iterate(ts: &TrainingSet, q_prev: &LinearQ, cfg: &FqiConfig) -> Result<LinearQ> {
    fqi_iterate_diagnosed(ts, q_prev, cfg).map(|(q, _)| q)
}

pub fn fqi_iterate_diagnosed(
    ts: &TrainingSet,
    q_prev: &LinearQ,
    cfg: &FqiConfig,
) -> Result<(LinearQ, IterationDiagnostics)> {
    if ts.is_empty() {
        return Err(Error::Dimension("empty training set".into()));
    }
    let targets = bellman_targets(ts, q_prev, cfg.gamma);
    let phi = cfg.feature_map.matrix(ts.samples.iter().map(TransferSample::input));
    let alpha = least_squares_fit(&phi, &targets)?;
    let diag = IterationDiagnostics {
        loss: mean_squared_loss(&phi, &alpha, &targets),
        alpha_norm: alpha.iter().map(|a| a * a).sum::<f64>().sqrt(),
        omega: gram_min_eigenvalue_of(&phi).omega,
        samples: ts.len(),
    };
    Ok((LinearQ::new(alpha, cfg.feature_map.clone(), cfg.v_max)?, diag))
}

/// Supplies the training set of iteration `k` (1-based) given `Q^{k-1}`.
pub trait SampleProvider {
    fn training_set(&mut self, iteration: usize, q_prev: &LinearQ) -> Result<TrainingSet>;
}

impl<F> SampleProvider for F
where
    F: FnMut(usize, &LinearQ) -> Result<TrainingSet>,
{
    fn training_set(&mut self, iteration: usize, q_prev: &LinearQ) -> Result<TrainingSet> {
        self(iteration, q_prev)
    }
}

/// Reuses one draw at every iteration.
#[derive(Debug, Clone)]
pub struct FixedSet(pub TrainingSet);

impl SampleProvider for FixedSet {
    fn training_set(&mut self, _iteration: usize, _q_prev: &LinearQ) -> Result<TrainingSet> {
        Ok(self.0.clone())
    }
}

#[derive(Debug, Clone, Default)]
pub struct FqiRun {
    /// `Q^1, ..., Q^K`.
    pub iterates: Vec<LinearQ>,
    pub diagnostics: Vec<IterationDiagnostics>,
}

impl FqiRun {
    pub fn final_q(&self) -> Option<&LinearQ> {
        self.iterates.last()
    }
}

pub fn run_fqi<P: SampleProvider + ?Sized>(provider: &mut P, cfg: &FqiConfig) -> Result<FqiRun> {
    run_fqi_from(provider, cfg, cfg.initial_q())
}

pub fn run_fqi_from<P: SampleProvider + ?Sized>(
    provider: &mut P,
    cfg: &FqiConfig,
    initial: LinearQ,
) -> Result<FqiRun> {
    let mut run = FqiRun::default();
    let mut q = initial;
    for k in 1..=cfg.iterations.max(1) {
        let ts = provider.training_set(k, &q).map_err(|e| Error::Provider {
            iteration: k,
            source: Box::new(e),
        })?;
        let (next, diag) = fqi_iterate_diagnosed(&ts, &q, cfg)?;
        run.iterates.push(next.clone());
        run.diagnostics.push(diag);
        q = next;
    }
    Ok(run)
}

pub trait Policy {
    fn act(&self, x: f64) -> Action;
}

impl Policy for LinearQ {
    fn act(&self, x: f64) -> Action {
        self.greedy_value(x).0
    }
}

/// Always takes the same action.
#[derive(Debug, Clone, Copy)]
pub struct FixedAction(pub Action);

impl Policy for FixedAction {
    fn act(&self, _x: f64) -> Action {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub episodes: usize,
    pub horizon: usize,
    pub start: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            episodes: 50,
            horizon: 50,
            start: 0.0,
        }
    }
}

/// Mean of `Σ_{t<H} γ^t r_t` over rollouts of `policy` on `task`.
pub fn evaluate_policy<P: Policy + ?Sized, R: Rng + ?Sized>(
    policy: &P,
    task: &TaskModel,
    cfg: &EvalConfig,
    rng: &mut R,
) -> f64 {
    let episodes = cfg.episodes.max(1);
    let gamma = task.gamma();
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut x = cfg.start;
        let mut discount = 1.0;
        let mut ret = 0.0;
        for _ in 0..cfg.horizon {
            let sa = StateAction::new(x, policy.act(x));
            ret += discount * task.reward(sa);
            x = task.next_state(sa, rng);
            discount *= gamma;
        }
        total += ret;
    }
    total / episodes as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{chain_task, ChainParams, RewardRegion};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(fm: FeatureMap, r_max: f64) -> FqiConfig {
        FqiConfig::new(0.9, r_max, fm)
    }

    #[test]
    fn zero_continuation_targets_are_rewards() {
        let fm = FeatureMap::default();
        let q = LinearQ::zero(fm, 10.0);
        let ts = TrainingSet::new(vec![
            TransferSample { x: 0.0, a: Action::Left, y: 1.0, r: 1.0, task: 0 },
            TransferSample { x: 3.0, a: Action::Right, y: 2.0, r: -5.0, task: 1 },
        ]);
        assert_eq!(bellman_targets(&ts, &q, 0.9), vec![1.0, -5.0]);
    }

    #[test]
    fn target_arithmetic() {
        // constant 50 in both blocks
        let fm = FeatureMap::default();
        let mut alpha = vec![0.0; 20];
        alpha[9] = 50.0;
        alpha[19] = 50.0;
        let q = LinearQ::new(alpha, fm, 50.0).unwrap();
        let ts = TrainingSet::new(vec![TransferSample { x: 0.0, a: Action::Left, y: 4.0, r: 1.0, task: 0 }]);
        let p = bellman_targets(&ts, &q, 0.9);
        assert!((p[0] - 46.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rewards_fit_zero() {
        let fm = FeatureMap::default();
        let c = cfg(fm.clone(), 1.0);
        let ts = TrainingSet::new(
            (0..40)
                .map(|i| TransferSample {
                    x: i as f64 - 20.0,
                    a: if i % 2 == 0 { Action::Left } else { Action::Right },
                    y: 0.0,
                    r: 0.0,
                    task: 0,
                })
                .collect(),
        );
        let q = fqi_iterate(&ts, &c.initial_q(), &c).unwrap();
        assert!(q.alpha.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn empty_set_rejected() {
        let c = cfg(FeatureMap::default(), 1.0);
        assert!(fqi_iterate(&TrainingSet::default(), &c.initial_q(), &c).is_err());
    }

    #[test]
    fn provider_failure_reports_iteration() {
        let c = cfg(FeatureMap::default(), 1.0);
        let mut provider = |k: usize, _q: &LinearQ| -> Result<TrainingSet> {
            if k == 3 {
                Err(Error::DegenerateAuxiliary)
            } else {
                Ok(TrainingSet::new(vec![TransferSample { x: 0.0, a: Action::Left, y: 0.0, r: 0.0, task: 0 }]))
            }
        };
        match run_fqi(&mut provider, &c) {
            Err(Error::Provider { iteration, .. }) => assert_eq!(iteration, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_state_loop_converges_to_geometric_series() {
        // states {0, 1}; right from 1 clamps back to 1 and pays r each step
        let r = 2.0;
        let gamma = 0.9;
        let params = ChainParams {
            p: 1.0,
            l: 1.0,
            eta: 0.0,
            reward_regions: vec![RewardRegion { lo: 0.5, hi: 1.5, value: r }],
            state_bounds: (0.0, 1.0),
            gamma,
            boundary: Default::default(),
        };
        let task = TaskModel::new("loop", params).unwrap();
        let fm = FeatureMap { centers: vec![0.0, 1.0], sigma2: 1e-3, form: Default::default() };
        let mut c = FqiConfig::new(gamma, r, fm);
        c.iterations = 200;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let samples: Vec<_> = [0.0, 1.0]
            .iter()
            .flat_map(|&x| Action::ALL.map(|a| StateAction::new(x, a)))
            .map(|sa| TransferSample::from_transition(task.step(sa, &mut rng), 0))
            .collect();
        let run = run_fqi(&mut FixedSet(TrainingSet::new(samples)), &c).unwrap();
        let q = run.final_q().unwrap();
        let q_star = r / (1.0 - gamma);
        assert!((q.evaluate_truncated(StateAction::new(1.0, Action::Right)) - q_star).abs() < 1e-6);
        assert!((q.evaluate_truncated(StateAction::new(0.0, Action::Right)) - gamma * q_star).abs() < 1e-6);
    }

    #[test]
    fn k_equals_one_is_a_single_iteration() {
        let task = chain_task(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ts = TrainingSet::from_transitions(&crate::mdp::collect_samples(&task, 0.0, 50, 500, &mut rng), 0);
        let mut c = cfg(FeatureMap::default(), 1.0);
        c.iterations = 1;
        let run = run_fqi(&mut FixedSet(ts.clone()), &c).unwrap();
        assert_eq!(run.iterates.len(), 1);
        assert_eq!(run.iterates[0], fqi_iterate(&ts, &c.initial_q(), &c).unwrap());
    }

    #[test]
    fn zero_reward_task_evaluates_to_zero() {
        let mut p = chain_task(1).unwrap().params;
        p.reward_regions.clear();
        let task = TaskModel::new("flat", p).unwrap();
        let v = evaluate_policy(&FixedAction(Action::Right), &task, &EvalConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(v, 0.0);
    }

    #[test]
    fn evaluation_is_seed_deterministic() {
        let task = chain_task(1).unwrap();
        let q = LinearQ::zero(FeatureMap::default(), 10.0);
        let a = evaluate_policy(&q, &task, &EvalConfig::default(), &mut ChaCha8Rng::seed_from_u64(5));
        let b = evaluate_policy(&q, &task, &EvalConfig::default(), &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }
}
