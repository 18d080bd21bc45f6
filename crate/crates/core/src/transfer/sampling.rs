use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng;

use super::{BetaVector, ProportionVector};
use crate::error::{Error, Result};
use crate::fqi::{TrainingSet, TransferSample};
use crate::mdp::{InputDistribution, TaskModel};

/// `floor(v + 0.5)` for non-negative `v`.
pub fn round_half_up(v: f64) -> usize {
    (v + 0.5).floor().max(0.0) as usize
}

/// Random tasks design: `L` inputs from `mu`, each observed by a task drawn
/// from `Multinomial(λ)`.
pub fn sample_random_tasks_design<R: Rng + ?Sized>(
    tasks: &[TaskModel],
    lambda: &ProportionVector,
    l: usize,
    mu: &InputDistribution,
    rng: &mut R,
) -> Result<TrainingSet> {
    if lambda.len() != tasks.len() {
        return Err(Error::Dimension(format!("{} proportions for {} tasks", lambda.len(), tasks.len())));
    }
    let which = WeightedIndex::new(lambda.as_slice()).map_err(|e| Error::InvalidProportions(e.to_string()))?;
    let inputs = mu.sample(l, rng);
    let samples = inputs
        .into_iter()
        .map(|sa| {
            let m = which.sample(rng);
            let t = tasks[m].step(sa, rng);
            TransferSample::from_transition(t, m)
        })
        .collect();
    Ok(TrainingSet::new(samples))
}

/// Pre-generated transitions per task. `caps()` are the reservoir sizes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SamplePool {
    pub reservoirs: Vec<Vec<TransferSample>>,
}

impl SamplePool {
    pub fn new(reservoirs: Vec<Vec<TransferSample>>) -> Self {
        SamplePool { reservoirs }
    }

    /// `caps[m]` transitions of task `m` at inputs drawn from `mu`.
    pub fn generate<R: Rng + ?Sized>(
        tasks: &[TaskModel],
        caps: &[usize],
        mu: &InputDistribution,
        rng: &mut R,
    ) -> Self {
        let reservoirs = tasks
            .iter()
            .zip(caps)
            .enumerate()
            .map(|(m, (task, &n))| {
                mu.sample(n, rng)
                    .into_iter()
                    .map(|sa| TransferSample::from_transition(task.step(sa, rng), m))
                    .collect()
            })
            .collect();
        SamplePool { reservoirs }
    }

    pub fn caps(&self) -> Vec<usize> {
        self.reservoirs.iter().map(Vec::len).collect()
    }
}

/// Takes `round(β_m N_m)` distinct samples from each reservoir.
pub fn draw_capped_training_set<R: Rng + ?Sized>(
    pool: &SamplePool,
    beta: &BetaVector,
    rng: &mut R,
) -> Result<TrainingSet> {
    if beta.caps.len() != pool.reservoirs.len() {
        return Err(Error::Dimension(format!(
            "beta covers {} tasks, pool holds {}",
            beta.caps.len(),
            pool.reservoirs.len()
        )));
    }
    let counts = beta.counts();
    let mut samples = Vec::with_capacity(counts.iter().sum());
    for (m, (reservoir, &count)) in pool.reservoirs.iter().zip(&counts).enumerate() {
        if count > reservoir.len() {
            return Err(Error::ReservoirExhausted {
                task: m,
                requested: count,
                available: reservoir.len(),
            });
        }
        if count == reservoir.len() {
            samples.extend_from_slice(reservoir);
        } else {
            let mut picked = index::sample(rng, reservoir.len(), count).into_vec();
            picked.sort_unstable();
            samples.extend(picked.into_iter().map(|i| reservoir[i]));
        }
    }
    Ok(TrainingSet::new(samples))
}
