use rand::SeedableRng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{Algorithm, ExperimentConfig};
use super::stats::{mean, sample_std};
use crate::error::{Error, Result};
use crate::fqi::{evaluate_policy, run_fqi, FixedSet, FqiConfig, FqiRun, TrainingSet};
use crate::linear_q::LinearQ;
use crate::mdp::{collect_samples, InputDistribution, TaskModel};
use crate::transfer::{
    build_auxiliary_set_with, run_bat, run_btt, sample_random_tasks_design, BatOptions, BttOptions, SamplePool,
};
use crate::SimRng;

/// Per-iteration record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub samples: usize,
    pub loss: f64,
    pub alpha_norm: f64,
    pub omega: f64,
    /// `Ê_λ̂` for BAT, the tradeoff objective for BTT, NaN otherwise.
    pub objective: f64,
    /// `λ` (single task, AST, BAT) or `β` (BTT), one entry per task.
    pub weights: Vec<f64>,
    /// Samples used from each task.
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub tau: f64,
    pub budget: usize,
    pub run_id: usize,
    pub seed: u64,
    pub performance: f64,
    pub iterations: Vec<IterationRecord>,
}

impl RunRecord {
    fn key(&self) -> (Algorithm, f64, usize, usize) {
        (self.algorithm, self.tau, self.budget, self.run_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub algorithm: Algorithm,
    pub tau: f64,
    pub budget: usize,
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
}

/// Raw rows, ordered by (algorithm, tau, budget, run_id).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<RunRecord>,
}

impl ResultTable {
    pub fn new(mut rows: Vec<RunRecord>) -> Self {
        rows.sort_by(|a, b| {
            let (ka, kb) = (a.key(), b.key());
            ka.0.cmp(&kb.0)
                .then(ka.1.total_cmp(&kb.1))
                .then(ka.2.cmp(&kb.2))
                .then(ka.3.cmp(&kb.3))
        });
        ResultTable { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn select(&self, algorithm: Algorithm, budget: usize) -> impl Iterator<Item = &RunRecord> {
        self.rows
            .iter()
            .filter(move |r| r.algorithm == algorithm && r.budget == budget)
    }

    /// Performances in run order; for sweeps, pick a tau with
    /// [`ResultTable::performances_at`].
    pub fn performances(&self, algorithm: Algorithm, budget: usize) -> Vec<f64> {
        self.select(algorithm, budget).map(|r| r.performance).collect()
    }

    pub fn performances_at(&self, algorithm: Algorithm, tau: f64, budget: usize) -> Vec<f64> {
        self.select(algorithm, budget)
            .filter(|r| r.tau == tau)
            .map(|r| r.performance)
            .collect()
    }

    /// Mean and sample standard deviation per (algorithm, tau, budget),
    /// computed from the raw rows.
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut out: Vec<AggregateRow> = Vec::new();
        let mut start = 0;
        while start < self.rows.len() {
            let first = &self.rows[start];
            let end = self.rows[start..]
                .iter()
                .position(|r| r.algorithm != first.algorithm || r.tau != first.tau || r.budget != first.budget)
                .map_or(self.rows.len(), |p| start + p);
            let perf: Vec<f64> = self.rows[start..end].iter().map(|r| r.performance).collect();
            out.push(AggregateRow {
                algorithm: first.algorithm,
                tau: first.tau,
                budget: first.budget,
                runs: perf.len(),
                mean: mean(&perf),
                std: sample_std(&perf),
            });
            start = end;
        }
        out
    }
}

/// Seed of one (algorithm, budget, run) cell: the first 8 bytes of
/// `SHA-256(master || algorithm || budget || run_id)`.
pub fn child_seed(master: u64, algorithm: Algorithm, budget: usize, run_id: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(algorithm.name().as_bytes());
    h.update([0u8]);
    h.update((budget as u64).to_le_bytes());
    h.update((run_id as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

struct Setup {
    tasks: Vec<TaskModel>,
    fqi: FqiConfig,
    mu: InputDistribution,
}

fn iteration_records(run: &FqiRun, weights: &[Vec<f64>], objectives: &[f64], counts: &[Vec<usize>]) -> Vec<IterationRecord> {
    run.diagnostics
        .iter()
        .enumerate()
        .map(|(k, d)| IterationRecord {
            iteration: k + 1,
            samples: d.samples,
            loss: d.loss,
            alpha_norm: d.alpha_norm,
            omega: d.omega,
            objective: objectives.get(k).copied().unwrap_or(f64::NAN),
            weights: weights[k.min(weights.len() - 1)].clone(),
            counts: counts[k.min(counts.len() - 1)].clone(),
        })
        .collect()
}

fn run_cell(cfg: &ExperimentConfig, setup: &Setup, algorithm: Algorithm, budget: usize, run_id: usize) -> Result<RunRecord> {
    let seed = child_seed(cfg.seed, algorithm, budget, run_id);
    let mut rng = SimRng::seed_from_u64(seed);
    let mut eval_rng = SimRng::seed_from_u64(seed);
    eval_rng.set_stream(1);

    let tasks = &setup.tasks;
    let m = tasks.len();
    let target = &tasks[0];
    let noise = cfg.next_state_noise.into();

    let (fqi, iterations) = match algorithm {
        Algorithm::SingleTask => {
            let data = collect_samples(target, cfg.episode_start, cfg.episode_horizon, budget, &mut rng);
            let mut provider = FixedSet(TrainingSet::from_transitions(&data, 0));
            let run = run_fqi(&mut provider, &setup.fqi)?;
            let mut w = vec![0.0; m];
            w[0] = 1.0;
            let mut c = vec![0; m];
            c[0] = budget;
            let recs = iteration_records(&run, &[w], &[], &[c]);
            (run, recs)
        }
        Algorithm::Ast => {
            let lambda = cfg.ast_lambda()?;
            let mut counts = Vec::new();
            let mut provider = |_k: usize, _q: &LinearQ| {
                let ts = sample_random_tasks_design(tasks, &lambda, cfg.training_size, &setup.mu, &mut rng)?;
                counts.push(ts.counts(m));
                Ok(ts)
            };
            let run = run_fqi(&mut provider, &setup.fqi)?;
            let recs = iteration_records(&run, &[lambda.as_slice().to_vec()], &[], &counts);
            (run, recs)
        }
        Algorithm::Bat | Algorithm::BatPlusTarget => {
            let aux = build_auxiliary_set_with(tasks, budget, cfg.next_states, &setup.mu, noise, &mut rng)?;
            let opts = BatOptions {
                training_size: cfg.training_size,
                include_target: algorithm == Algorithm::BatPlusTarget,
            };
            let bat = run_bat(tasks, &aux, &setup.mu, opts, &setup.fqi, &mut rng)?;
            let weights: Vec<Vec<f64>> = bat.lambdas.iter().map(|l| l.as_slice().to_vec()).collect();
            let recs = iteration_records(&bat.fqi, &weights, &bat.transfer_errors, &bat.counts);
            (bat.fqi, recs)
        }
        Algorithm::Btt => {
            let aux = build_auxiliary_set_with(tasks, budget, cfg.next_states, &setup.mu, noise, &mut rng)?;
            let mut caps = vec![0];
            caps.extend(cfg.source_caps());
            let mut pool = SamplePool::generate(tasks, &caps, &setup.mu, &mut rng);
            pool.reservoirs[0] = aux.task_samples(0).samples;
            let opts = BttOptions {
                tau: cfg.tau,
                ..Default::default()
            };
            let btt = run_btt(&pool, &aux, &opts, &setup.fqi, &mut rng)?;
            let weights: Vec<Vec<f64>> = btt.betas.iter().map(|b| b.beta.clone()).collect();
            let recs = iteration_records(&btt.fqi, &weights, &btt.objectives, &btt.counts);
            (btt.fqi, recs)
        }
    };

    let q = fqi.final_q().ok_or(Error::Dimension("no fitted iterate".into()))?;
    let performance = evaluate_policy(q, target, &cfg.eval, &mut eval_rng);
    Ok(RunRecord {
        algorithm,
        tau: cfg.tau,
        budget,
        run_id,
        seed,
        performance,
        iterations,
    })
}

/// Runs every (algorithm, budget, run) cell of `cfg`. Cells run in
/// parallel, at most `jobs` at a time when given; the result does not
/// depend on the execution order.
pub fn run_experiment_with(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<ResultTable> {
    cfg.validate()?;
    let tasks = cfg.task_models()?;
    let setup = Setup {
        fqi: cfg.fqi_config(&tasks),
        mu: cfg.input_distribution(&tasks[0]),
        tasks,
    };
    let cells: Vec<(Algorithm, usize, usize)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| {
            cfg.schedule
                .iter()
                .flat_map(move |&b| (0..cfg.runs).map(move |r| (a, b, r)))
        })
        .collect();
    let work = || -> Result<Vec<RunRecord>> {
        cells
            .par_iter()
            .map(|&(a, b, r)| run_cell(cfg, &setup, a, b, r))
            .collect()
    };
    let rows = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(vec![format!("thread pool: {e}")]))?
            .install(work)?,
        None => work()?,
    };
    Ok(ResultTable::new(rows))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    run_experiment_with(cfg, None)
}

/// One experiment per `τ`, rows tagged with their `τ`. Seeds do not depend
/// on `τ`, so runs with equal ids are paired across values.
pub fn sweep_tau(cfg: &ExperimentConfig, taus: &[f64], jobs: Option<usize>) -> Result<ResultTable> {
    if taus.is_empty() {
        return Err(Error::Config(vec!["taus must not be empty".into()]));
    }
    let mut rows = Vec::new();
    for &tau in taus {
        let c = ExperimentConfig { tau, ..cfg.clone() };
        rows.extend(run_experiment_with(&c, jobs)?.rows);
    }
    Ok(ResultTable::new(rows))
}
