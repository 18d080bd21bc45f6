//! Oracle instance files.
//!
//! ```toml
//! # either explicit values, one row per auxiliary pair, target column first
//! c = [[1.0, 0.5, 2.0], [0.0, 1.0, -1.0]]
//! # or pairs generated from catalog tasks with the zero Q-function
//! # tasks = [1, 2, 3]
//! # pairs = 1000
//! # seed = 0
//!
//! steps = 100          # lattice resolution, 1 / steps
//! caps = [50, 500, 500] # optional: also run BTT with these N_m
//! tau = 0.75
//! d = 20
//! ```

use rand::SeedableRng;
use sample_transfer::harness::ExperimentConfig;
use sample_transfer::oracle::{bat_grid, btt_grid, GridOptimum};
use sample_transfer::transfer::{bat_minimize, btt_objective, btt_optimize, build_auxiliary_set, BttOptions};
use sample_transfer::{Error, FeatureMap, LinearQ, Result, SimRng, TransferErrorEstimator};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub c: Option<Vec<Vec<f64>>>,
    pub tasks: Option<Vec<usize>>,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    pub caps: Option<Vec<usize>>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_d")]
    pub d: usize,
}

fn default_pairs() -> usize {
    1000
}
fn default_steps() -> usize {
    100
}
fn default_tau() -> f64 {
    0.75
}
fn default_d() -> usize {
    20
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub oracle_value: f64,
    pub oracle_point: Vec<f64>,
    pub grid_gap: f64,
    pub lattice_points: usize,
    pub solver_value: f64,
    pub solver_point: Vec<f64>,
    pub within_gap: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tasks: usize,
    pub pairs: usize,
    pub bat: Comparison,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub btt: Option<Comparison>,
}

impl Instance {
    pub fn parse(text: &str) -> Result<Self> {
        let inst: Instance = toml::from_str(text).map_err(|e| Error::Config(vec![e.message().to_string()]))?;
        let mut v = Vec::new();
        if inst.c.is_some() == inst.tasks.is_some() {
            v.push("exactly one of c and tasks must be given".to_string());
        }
        if let Some(c) = &inst.c {
            let m = c.first().map_or(0, Vec::len);
            if m == 0 || c.iter().any(|row| row.len() != m) {
                v.push("c must be a non-empty matrix with rows of equal length".into());
            }
            if c.iter().flatten().any(|x| !x.is_finite()) {
                v.push("c must be finite".into());
            }
        }
        if inst.pairs == 0 {
            v.push("pairs must be positive".into());
        }
        if inst.steps == 0 {
            v.push("steps must be positive".into());
        }
        if !(inst.tau >= 0.0) {
            v.push(format!("tau must be non-negative, got {}", inst.tau));
        }
        if v.is_empty() {
            Ok(inst)
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn estimator(&self) -> Result<TransferErrorEstimator> {
        if let Some(c) = &self.c {
            return Ok(TransferErrorEstimator::from_values(c[0].len(), c.concat()));
        }
        let cfg = ExperimentConfig {
            tasks: self.tasks.clone(),
            ..Default::default()
        };
        cfg.validate()?;
        let tasks = cfg.task_models()?;
        let mu = cfg.input_distribution(&tasks[0]);
        let aux = build_auxiliary_set(&tasks, self.pairs, 1, &mu, &mut SimRng::seed_from_u64(self.seed))?;
        TransferErrorEstimator::new(&aux, &LinearQ::zero(FeatureMap::default(), 1.0), cfg.fqi.gamma)
    }

    pub fn run(&self) -> Result<Report> {
        let est = self.estimator()?;
        let m = est.num_tasks();

        let grid = bat_grid(&est, self.steps)?;
        let sol = bat_minimize(&est)?;
        let bat = compare(grid, est.evaluate_direct(sol.as_slice()), sol.into_inner());

        let btt = match &self.caps {
            None => None,
            Some(caps) => {
                if caps.len() != m {
                    return Err(Error::Config(vec![format!("caps has {} entries for {m} tasks", caps.len())]));
                }
                let grid = btt_grid(&est, caps, self.tau, self.d, self.steps)?;
                let opts = BttOptions {
                    tau: self.tau,
                    ..Default::default()
                };
                let beta = btt_optimize(&est, caps, self.d, &opts, &mut SimRng::seed_from_u64(self.seed))?;
                let value = btt_objective(&est, &beta, self.tau, self.d)?;
                Some(compare(grid, value, beta.beta))
            }
        };
        Ok(Report {
            tasks: m,
            pairs: est.num_pairs(),
            bat,
            btt,
        })
    }
}

fn compare(grid: GridOptimum, solver_value: f64, solver_point: Vec<f64>) -> Comparison {
    Comparison {
        within_gap: solver_value <= grid.value + grid.gap + 1e-12 * grid.value.abs().max(1.0),
        oracle_value: grid.value,
        oracle_point: grid.point,
        grid_gap: grid.gap,
        lattice_points: grid.evaluated,
        solver_value,
        solver_point,
    }
}
