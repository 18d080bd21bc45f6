use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::fqi::{EvalConfig, FqiConfig, DEFAULT_ITERATIONS};
use crate::mdp::{chain_task, task_catalog, InputDistribution, TaskModel, DEFAULT_GAMMA};
use crate::transfer::{NextStateNoise, ProportionVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    SingleTask,
    Ast,
    Bat,
    BatPlusTarget,
    Btt,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::SingleTask,
        Algorithm::Ast,
        Algorithm::Bat,
        Algorithm::BatPlusTarget,
        Algorithm::Btt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SingleTask => "single_task",
            Algorithm::Ast => "ast",
            Algorithm::Bat => "bat",
            Algorithm::BatPlusTarget => "bat_plus_target",
            Algorithm::Btt => "btt",
        }
    }

    pub fn parse(s: &str) -> Option<Algorithm> {
        Algorithm::ALL.into_iter().find(|a| a.name() == s)
    }

    /// What the budget on the x-axis counts for this algorithm.
    pub fn budget_meaning(self) -> &'static str {
        match self {
            Algorithm::SingleTask => "target training samples",
            Algorithm::Ast => "unused (no target samples)",
            Algorithm::Bat | Algorithm::BatPlusTarget => "auxiliary set size S",
            Algorithm::Btt => "target samples N_1 (= auxiliary set size)",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FqiSettings {
    pub iterations: usize,
    pub gamma: f64,
}

impl Default for FqiSettings {
    fn default() -> Self {
        FqiSettings {
            iterations: DEFAULT_ITERATIONS,
            gamma: DEFAULT_GAMMA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSetting {
    #[default]
    Shared,
    Independent,
}

impl From<NoiseSetting> for NextStateNoise {
    fn from(n: NoiseSetting) -> Self {
        match n {
            NoiseSetting::Shared => NextStateNoise::Shared,
            NoiseSetting::Independent => NextStateNoise::Independent,
        }
    }
}

pub const DEFAULT_SOURCE_CAP: usize = 5000;
pub const DEFAULT_RUNS: usize = 20;
pub const DEFAULT_EXPERIMENT_HORIZON: usize = 100;

/// One experiment: every algorithm in `algorithms` is run `runs` times at
/// every budget of `schedule`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task_set: u8,
    /// Catalog indices (1-9) overriding the task set; the first is the target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tasks: Option<Vec<usize>>,
    #[serde(default)]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub schedule: Vec<usize>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    /// `L`, samples drawn per iteration by AST and BAT.
    #[serde(default = "default_training_size")]
    pub training_size: usize,
    /// Fixed proportions for AST; uniform over the sources when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    /// `T`, next states per task and auxiliary pair.
    #[serde(default = "default_next_states")]
    pub next_states: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// `N_m` for each source (BTT); 5000 each when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caps: Option<Vec<usize>>,
    #[serde(default = "default_horizon")]
    pub episode_horizon: usize,
    #[serde(default)]
    pub episode_start: f64,
    #[serde(default)]
    pub next_state_noise: NoiseSetting,
    #[serde(default)]
    pub fqi: FqiSettings,
    #[serde(default)]
    pub eval: EvalConfig,
}

fn default_runs() -> usize {
    DEFAULT_RUNS
}
fn default_training_size() -> usize {
    10_000
}
fn default_next_states() -> usize {
    1
}
fn default_tau() -> f64 {
    0.75
}
fn default_horizon() -> usize {
    DEFAULT_EXPERIMENT_HORIZON
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task_set: 1,
            tasks: None,
            algorithms: vec![Algorithm::SingleTask, Algorithm::Bat],
            schedule: vec![100, 1000, 10_000],
            runs: DEFAULT_RUNS,
            seed: 0,
            training_size: default_training_size(),
            lambda: None,
            next_states: 1,
            tau: default_tau(),
            caps: None,
            episode_horizon: DEFAULT_EXPERIMENT_HORIZON,
            episode_start: 0.0,
            next_state_noise: NoiseSetting::Shared,
            fqi: FqiSettings::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Every key accepted in an experiment file, with a one-line description.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("task_set", "1 (M1-M5) or 2 (M1, M6-M9)"),
    ("tasks", "optional catalog indices overriding task_set; first is the target"),
    ("algorithms", "any of single_task, ast, bat, bat_plus_target, btt"),
    ("schedule", "strictly increasing target-sample budgets"),
    ("runs", "independent runs per (algorithm, budget), default 20"),
    ("seed", "master seed, default 0"),
    ("training_size", "L, samples per iteration for ast/bat, default 10000"),
    ("lambda", "fixed proportions for ast (target first), default uniform over sources"),
    ("next_states", "T, next states per auxiliary pair and task, default 1"),
    ("tau", "BTT tradeoff weight, default 0.75"),
    ("caps", "BTT per-source sample caps N_m, default 5000 each"),
    ("episode_horizon", "steps per random-action collection episode, default 100"),
    ("episode_start", "start state of collection episodes, default 0"),
    ("next_state_noise", "shared or independent auxiliary next-state noise, default shared"),
    ("fqi.iterations", "fitted Q-iterations, default 13"),
    ("fqi.gamma", "discount factor, default 0.9"),
    ("eval.episodes", "evaluation rollouts, default 50"),
    ("eval.horizon", "rollout length, default 50"),
    ("eval.start", "rollout start state, default 0"),
];

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(vec![e.message().to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn num_tasks(&self) -> usize {
        match &self.tasks {
            Some(t) => t.len(),
            None if self.task_set == 1 || self.task_set == 2 => 5,
            None => 0,
        }
    }

    pub fn source_caps(&self) -> Vec<usize> {
        self.caps
            .clone()
            .unwrap_or_else(|| vec![DEFAULT_SOURCE_CAP; self.num_tasks().saturating_sub(1)])
    }

    /// Every violated constraint, empty when the config is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        match &self.tasks {
            None => {
                if task_catalog(self.task_set).is_err() {
                    v.push(format!("task_set must be 1 or 2, got {}", self.task_set));
                }
            }
            Some(list) => {
                if list.is_empty() {
                    v.push("tasks must not be empty".into());
                }
                for &i in list {
                    if chain_task(i).is_none() {
                        v.push(format!("tasks references unknown task M{i}"));
                    }
                }
            }
        }
        let m = self.num_tasks();
        if self.algorithms.is_empty() {
            v.push("algorithms must not be empty".into());
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if self.algorithms[..i].contains(a) {
                v.push(format!("algorithm {a} listed twice"));
            }
        }
        let transfer = self.algorithms.iter().any(|a| *a != Algorithm::SingleTask);
        if transfer && m == 1 {
            v.push("transfer algorithms need at least one source task".into());
        }
        if self.schedule.is_empty() {
            v.push("schedule must not be empty".into());
        }
        if self.schedule.first() == Some(&0) {
            v.push("schedule budgets must be positive".into());
        }
        if self.schedule.windows(2).any(|w| w[0] >= w[1]) {
            v.push("schedule must be strictly increasing".into());
        }
        if self.runs < 1 {
            v.push("runs must be at least 1".into());
        }
        if self.training_size < 1 {
            v.push("training_size must be at least 1".into());
        }
        if let Some(l) = &self.lambda {
            if l.len() != m {
                v.push(format!("lambda has {} entries for {m} tasks", l.len()));
            } else if let Err(e) = ProportionVector::new(l.clone()) {
                v.push(format!("lambda: {e}"));
            }
        }
        if self.next_states < 1 {
            v.push("next_states must be at least 1".into());
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            v.push(format!("tau must be finite and non-negative, got {}", self.tau));
        }
        if let Some(c) = &self.caps {
            if c.len() + 1 != m {
                v.push(format!("caps has {} entries for {} sources", c.len(), m.saturating_sub(1)));
            }
        }
        if self.algorithms.contains(&Algorithm::Btt) && self.source_caps().iter().all(|&c| c == 0) && m > 1 {
            v.push("btt needs at least one positive source cap".into());
        }
        if self.episode_horizon < 1 {
            v.push("episode_horizon must be at least 1".into());
        }
        if !self.episode_start.is_finite() {
            v.push("episode_start must be finite".into());
        }
        if self.fqi.iterations < 1 {
            v.push("fqi.iterations must be at least 1".into());
        }
        if !(self.fqi.gamma > 0.0 && self.fqi.gamma < 1.0) {
            v.push(format!("fqi.gamma must lie in (0, 1), got {}", self.fqi.gamma));
        }
        if self.eval.episodes < 1 {
            v.push("eval.episodes must be at least 1".into());
        }
        if !self.eval.start.is_finite() {
            v.push("eval.start must be finite".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// Target first, with the configured discount.
    pub fn task_models(&self) -> Result<Vec<TaskModel>> {
        let mut tasks = match &self.tasks {
            None => task_catalog(self.task_set)?,
            Some(list) => list
                .iter()
                .map(|&i| chain_task(i).ok_or_else(|| Error::Config(vec![format!("unknown task M{i}")])))
                .collect::<Result<Vec<_>>>()?,
        };
        for t in &mut tasks {
            t.params.gamma = self.fqi.gamma;
        }
        Ok(tasks)
    }

    pub fn fqi_config(&self, tasks: &[TaskModel]) -> FqiConfig {
        let r_max = tasks.iter().map(|t| t.r_max).fold(0.0, f64::max);
        let mut cfg = FqiConfig::new(self.fqi.gamma, r_max, FeatureMap::default());
        cfg.iterations = self.fqi.iterations;
        cfg
    }

    /// Random-action episodes on the target from `episode_start`.
    pub fn input_distribution(&self, target: &TaskModel) -> InputDistribution {
        InputDistribution::Episodic {
            dynamics: target.clone(),
            start: self.episode_start,
            horizon: self.episode_horizon,
        }
    }

    pub fn ast_lambda(&self) -> Result<ProportionVector> {
        match &self.lambda {
            Some(l) => ProportionVector::new(l.clone()),
            None => Ok(ProportionVector::uniform_sources(self.num_tasks())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = ExperimentConfig::default();
        assert!(cfg.violations().is_empty());
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn minimal_file() {
        let cfg = ExperimentConfig::from_toml("task_set = 2\nalgorithms = [\"single_task\"]\nschedule = [100]\n").unwrap();
        assert_eq!(cfg.runs, 20);
        assert_eq!(cfg.fqi.iterations, 13);
        assert_eq!(cfg.source_caps(), vec![5000; 4]);
        assert_eq!(cfg.task_models().unwrap()[4].name, "M9");
    }

    #[test]
    fn all_violations_reported() {
        let cfg = ExperimentConfig {
            task_set: 3,
            runs: 0,
            schedule: vec![100, 100],
            tau: -1.0,
            ..Default::default()
        };
        let v = cfg.violations();
        assert_eq!(v.len(), 4, "{v:?}");
        match cfg.validate() {
            Err(Error::Config(list)) => assert_eq!(list, v),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ExperimentConfig::from_toml("task_set = 1\nalgorithms = [\"bat\"]\nschedule = [1]\nbogus = 3\n");
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn custom_task_list() {
        let cfg = ExperimentConfig {
            tasks: Some(vec![1, 3, 12]),
            ..Default::default()
        };
        assert_eq!(cfg.violations(), vec!["tasks references unknown task M12".to_string()]);
    }

    #[test]
    fn gamma_propagates_to_tasks() {
        let mut cfg = ExperimentConfig::default();
        cfg.fqi.gamma = 0.95;
        assert!(cfg.task_models().unwrap().iter().all(|t| t.gamma() == 0.95));
        assert!((cfg.fqi_config(&cfg.task_models().unwrap()).v_max - 100.0).abs() < 1e-9);
    }
}
