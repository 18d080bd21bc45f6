use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::fqi::{TrainingSet, TransferSample};
use crate::linear_q::LinearQ;
use crate::mdp::{draw_uniforms, InputDistribution, StateAction, TaskModel};

/// How next states of different tasks at the same auxiliary pair relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NextStateNoise {
    /// One pair of uniforms per `(s, t)` drives every task's transition
    /// (common random numbers). Tasks with equal dynamics get equal draws.
    #[default]
    Shared,
    /// Every task draws its own uniforms.
    Independent,
}

/// `S` state-action pairs with the reward of every task and `T` next states
/// per task.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliarySet {
    inputs: Vec<StateAction>,
    num_tasks: usize,
    num_next: usize,
    /// `S x M`, row-major.
    rewards: Vec<f64>,
    /// `S x M x T`, row-major.
    next_states: Vec<f64>,
}

impl AuxiliarySet {
    pub fn from_parts(
        inputs: Vec<StateAction>,
        num_tasks: usize,
        num_next: usize,
        rewards: Vec<f64>,
        next_states: Vec<f64>,
    ) -> Result<Self> {
        let s = inputs.len();
        if num_tasks == 0 || num_next == 0 {
            return Err(Error::Dimension("auxiliary set needs M >= 1 and T >= 1".into()));
        }
        if rewards.len() != s * num_tasks || next_states.len() != s * num_tasks * num_next {
            return Err(Error::Dimension(format!(
                "auxiliary set with S = {s}, M = {num_tasks}, T = {num_next} has {} rewards and {} next states",
                rewards.len(),
                next_states.len()
            )));
        }
        Ok(AuxiliarySet {
            inputs,
            num_tasks,
            num_next,
            rewards,
            next_states,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    pub fn num_next(&self) -> usize {
        self.num_next
    }

    pub fn input(&self, s: usize) -> StateAction {
        self.inputs[s]
    }

    pub fn inputs(&self) -> &[StateAction] {
        &self.inputs
    }

    pub fn reward(&self, s: usize, m: usize) -> f64 {
        self.rewards[s * self.num_tasks + m]
    }

    pub fn next_state(&self, s: usize, m: usize, t: usize) -> f64 {
        self.next_states[(s * self.num_tasks + m) * self.num_next + t]
    }

    pub fn next_states(&self, s: usize, m: usize) -> &[f64] {
        let start = (s * self.num_tasks + m) * self.num_next;
        &self.next_states[start..start + self.num_next]
    }

    /// The transitions `(X_s, A_s, Y_{s,m}^1, R_{s,m})` of task `m`.
    pub fn task_samples(&self, m: usize) -> TrainingSet {
        TrainingSet::new(
            (0..self.len())
                .map(|s| {
                    let sa = self.inputs[s];
                    TransferSample {
                        x: sa.x,
                        a: sa.a,
                        y: self.next_state(s, m, 0),
                        r: self.reward(s, m),
                        task: m,
                    }
                })
                .collect(),
        )
    }
}

/// Auxiliary set at the given inputs.
pub fn build_auxiliary_at<R: Rng + ?Sized>(
    tasks: &[TaskModel],
    inputs: Vec<StateAction>,
    t: usize,
    noise: NextStateNoise,
    rng: &mut R,
) -> Result<AuxiliarySet> {
    let m = tasks.len();
    if m == 0 || t == 0 {
        return Err(Error::Dimension("auxiliary set needs M >= 1 and T >= 1".into()));
    }
    let s = inputs.len();
    let mut rewards = Vec::with_capacity(s * m);
    let mut next_states = vec![0.0; s * m * t];
    for (i, sa) in inputs.iter().enumerate() {
        rewards.extend(tasks.iter().map(|task| task.reward(*sa)));
        for step in 0..t {
            let shared = draw_uniforms(rng);
            for (j, task) in tasks.iter().enumerate() {
                let (coin, u) = match noise {
                    NextStateNoise::Shared => shared,
                    NextStateNoise::Independent => draw_uniforms(rng),
                };
                next_states[(i * m + j) * t + step] = task.transition(*sa, coin, u);
            }
        }
    }
    AuxiliarySet::from_parts(inputs, m, t, rewards, next_states)
}

/// `S` pairs from `mu` with shared next-state noise.
pub fn build_auxiliary_set<R: Rng + ?Sized>(
    tasks: &[TaskModel],
    s: usize,
    t: usize,
    mu: &InputDistribution,
    rng: &mut R,
) -> Result<AuxiliarySet> {
    build_auxiliary_set_with(tasks, s, t, mu, NextStateNoise::Shared, rng)
}

pub fn build_auxiliary_set_with<R: Rng + ?Sized>(
    tasks: &[TaskModel],
    s: usize,
    t: usize,
    mu: &InputDistribution,
    noise: NextStateNoise,
    rng: &mut R,
) -> Result<AuxiliarySet> {
    if s == 0 {
        return Err(Error::DegenerateAuxiliary);
    }
    let inputs = mu.sample(s, rng);
    build_auxiliary_at(tasks, inputs, t, noise, rng)
}

/// `Ê_λ(Q)` evaluated directly from the auxiliary set. The residual of pair
/// `s` is `c_{s,1} - Σ_m λ_m c_{s,m}` with
/// `c_{s,m} = R_{s,m} + (γ/T) Σ_t max_a' Q(Y_{s,m}^t, a')`; with `λ_1 = 0`
/// the sum runs over the sources only.
pub fn estimated_transfer_error(aux: &AuxiliarySet, q: &LinearQ, lambda: &[f64], gamma: f64) -> f64 {
    let m = aux.num_tasks();
    let t = aux.num_next() as f64;
    let mut total = 0.0;
    for s in 0..aux.len() {
        let continuation =
            |task: usize| aux.next_states(s, task).iter().map(|&y| q.max_value(y)).sum::<f64>() * gamma / t;
        let mut residual = aux.reward(s, 0) + continuation(0);
        for (task, l) in lambda.iter().enumerate().take(m) {
            if *l != 0.0 {
                residual -= l * (aux.reward(s, task) + continuation(task));
            }
        }
        total += residual * residual;
    }
    total / aux.len().max(1) as f64
}

/// `Ê_λ(Q)` for a fixed `(aux, Q)`, as the quadratic
/// `k - 2 g^T λ + λ^T H λ` over the full proportion vector.
#[derive(Debug, Clone)]
pub struct TransferErrorEstimator {
    num_tasks: usize,
    /// `S x M`, row-major.
    c: Vec<f64>,
    h: DMatrix<f64>,
    g: DVector<f64>,
    k: f64,
}

impl TransferErrorEstimator {
    pub fn new(aux: &AuxiliarySet, q: &LinearQ, gamma: f64) -> Result<Self> {
        if aux.is_empty() {
            return Err(Error::DegenerateAuxiliary);
        }
        let m = aux.num_tasks();
        let t = aux.num_next() as f64;
        let mut c = Vec::with_capacity(aux.len() * m);
        for s in 0..aux.len() {
            for task in 0..m {
                let cont: f64 = aux.next_states(s, task).iter().map(|&y| q.max_value(y)).sum();
                c.push(aux.reward(s, task) + gamma * cont / t);
            }
        }
        Ok(Self::from_values(m, c))
    }

    /// From a precomputed `S x M` value matrix (row-major).
    pub fn from_values(num_tasks: usize, c: Vec<f64>) -> Self {
        assert!(num_tasks > 0 && c.len().is_multiple_of(num_tasks) && !c.is_empty());
        let s = c.len() / num_tasks;
        let cm = DMatrix::from_row_slice(s, num_tasks, &c);
        let c0 = cm.column(0).into_owned();
        let n = s as f64;
        let h = cm.tr_mul(&cm) / n;
        let g = cm.tr_mul(&c0) / n;
        let k = c0.dot(&c0) / n;
        TransferErrorEstimator {
            num_tasks,
            c,
            h,
            g,
            k,
        }
    }

    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    pub fn num_pairs(&self) -> usize {
        self.c.len() / self.num_tasks
    }

    pub fn value(&self, s: usize, m: usize) -> f64 {
        self.c[s * self.num_tasks + m]
    }

    /// `H = C^T C / S`.
    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// `g = C^T c_1 / S`.
    pub fn linear(&self) -> &DVector<f64> {
        &self.g
    }

    pub fn constant(&self) -> f64 {
        self.k
    }

    pub fn evaluate(&self, lambda: &[f64]) -> f64 {
        debug_assert_eq!(lambda.len(), self.num_tasks);
        let m = self.num_tasks;
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..m {
            if lambda[i] == 0.0 {
                continue;
            }
            lin += self.g[i] * lambda[i];
            let mut row = 0.0;
            for j in 0..m {
                row += self.h[(i, j)] * lambda[j];
            }
            quad += lambda[i] * row;
        }
        (self.k - 2.0 * lin + quad).max(0.0)
    }

    /// Same value through the cached `c` matrix.
    pub fn evaluate_direct(&self, lambda: &[f64]) -> f64 {
        let m = self.num_tasks;
        let total: f64 = self
            .c
            .chunks_exact(m)
            .map(|row| {
                let r = row[0] - row.iter().zip(lambda).map(|(c, l)| c * l).sum::<f64>();
                r * r
            })
            .sum();
        total / self.num_pairs() as f64
    }

    /// `∇Ê = 2 (H λ - g)`.
    pub fn gradient(&self, lambda: &[f64]) -> Vec<f64> {
        let l = DVector::from_column_slice(lambda);
        ((&self.h * l - &self.g) * 2.0).iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMap;
    use crate::mdp::{chain_task, task_catalog};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mu() -> InputDistribution {
        InputDistribution::Uniform { lo: -20.0, hi: 20.0 }
    }

    #[test]
    fn shape() {
        let tasks = task_catalog(1).unwrap();
        let aux = build_auxiliary_set(&tasks[..2], 1, 1, &mu(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!((aux.len(), aux.num_tasks(), aux.num_next()), (1, 2, 1));
        assert_eq!(aux.next_states(0, 1).len(), 1);
        assert!(matches!(
            build_auxiliary_set(&tasks, 0, 1, &mu(), &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::DegenerateAuxiliary)
        ));
    }

    #[test]
    fn identical_tasks_share_everything() {
        let m1 = chain_task(1).unwrap();
        let tasks = vec![m1.clone(), m1.clone(), m1];
        let aux = build_auxiliary_set_with(&tasks, 50, 2, &mu(), NextStateNoise::Shared, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        for s in 0..aux.len() {
            assert_eq!(aux.reward(s, 0), aux.reward(s, 1));
            assert_eq!(aux.reward(s, 0), aux.reward(s, 2));
            assert_eq!(aux.next_states(s, 0), aux.next_states(s, 2));
        }
    }

    #[test]
    fn independent_noise_differs() {
        let m1 = chain_task(1).unwrap();
        let tasks = vec![m1.clone(), m1];
        let aux = build_auxiliary_set_with(&tasks, 50, 1, &mu(), NextStateNoise::Independent, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        assert!((0..50).any(|s| aux.next_state(s, 0, 0) != aux.next_state(s, 1, 0)));
    }

    #[test]
    fn cached_matches_direct() {
        let tasks = task_catalog(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let aux = build_auxiliary_set_with(&tasks, 40, 3, &mu(), NextStateNoise::Independent, &mut rng).unwrap();
        let alpha: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let q = LinearQ::new(alpha, FeatureMap::default(), 50.0).unwrap();
        let est = TransferErrorEstimator::new(&aux, &q, 0.9).unwrap();
        for lambda in [[0.0, 0.1, 0.2, 0.3, 0.4], [0.0, 1.0, 0.0, 0.0, 0.0], [0.3, 0.1, 0.1, 0.1, 0.4]] {
            let a = est.evaluate(&lambda);
            let b = est.evaluate_direct(&lambda);
            let c = estimated_transfer_error(&aux, &q, &lambda, 0.9);
            assert!((a - b).abs() <= 1e-12 * b.max(1.0), "{a} {b}");
            assert!((b - c).abs() <= 1e-12 * c.max(1.0), "{b} {c}");
        }
        assert_eq!(est.evaluate(&[1.0, 0.0, 0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn target_samples_view() {
        let tasks = task_catalog(1).unwrap();
        let aux = build_auxiliary_set(&tasks, 10, 1, &mu(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let ts = aux.task_samples(0);
        assert_eq!(ts.len(), 10);
        for (s, sample) in ts.samples.iter().enumerate() {
            assert_eq!(sample.x, aux.input(s).x);
            assert_eq!(sample.y, aux.next_state(s, 0, 0));
            assert_eq!(sample.r, tasks[0].reward_at(sample.x));
        }
    }
}
