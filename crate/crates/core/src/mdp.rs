//! Generative chain-walk tasks.
//!
//! A task is a continuous one-dimensional chain with two actions. Each action
//! moves the state by `l + u` (with `u ~ Uniform[-eta, eta]`) in the intended
//! direction with probability `p` and in the opposite direction otherwise.
//! States are clamped to `state_bounds`. Rewards are deterministic and depend
//! only on the current state: `r_t = R(x_t, a_t)` is observed before the
//! transition.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GAMMA: f64 = 0.9;
pub const DEFAULT_BOUNDS: (f64, f64) = (-20.0, 20.0);
pub const DEFAULT_EPISODE_HORIZON: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Left = 0,
    Right = 1,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Left, Action::Right];
    pub const COUNT: usize = 2;

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        match i {
            0 => Some(Action::Left),
            1 => Some(Action::Right),
            _ => None,
        }
    }

    #[inline]
    fn direction(self) -> f64 {
        match self {
            Action::Left => -1.0,
            Action::Right => 1.0,
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Action {
        if rng.random_bool(0.5) {
            Action::Right
        } else {
            Action::Left
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateAction {
    pub x: f64,
    pub a: Action,
}

impl StateAction {
    pub fn new(x: f64, a: Action) -> Self {
        StateAction { x, a }
    }
}

/// One observed transition `(x, a, y, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub x: f64,
    pub a: Action,
    pub y: f64,
    pub r: f64,
}

/// A rewarding interval `[lo, hi]` (inclusive) paying `value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 3]", from = "[f64; 3]")]
pub struct RewardRegion {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

impl From<RewardRegion> for [f64; 3] {
    fn from(r: RewardRegion) -> Self {
        [r.lo, r.hi, r.value]
    }
}

impl From<[f64; 3]> for RewardRegion {
    fn from([lo, hi, value]: [f64; 3]) -> Self {
        RewardRegion { lo, hi, value }
    }
}

/// What happens when a transition leaves the state interval. Only clamping
/// is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Clamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainParams {
    pub p: f64,
    pub l: f64,
    pub eta: f64,
    #[serde(rename = "regions")]
    pub reward_regions: Vec<RewardRegion>,
    #[serde(rename = "bounds", default = "default_bounds")]
    pub state_bounds: (f64, f64),
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub boundary: Boundary,
}

fn default_bounds() -> (f64, f64) {
    DEFAULT_BOUNDS
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

impl ChainParams {
    /// Chain with the default bounds and discount and a symmetric pair of
    /// reward regions `[-c-w, -c+w] ∪ [c-w, c+w]`.
    pub fn symmetric(p: f64, l: f64, eta: f64, center: f64, half_width: f64, value: f64) -> Self {
        ChainParams {
            p,
            l,
            eta,
            reward_regions: vec![
                RewardRegion {
                    lo: -center - half_width,
                    hi: -center + half_width,
                    value,
                },
                RewardRegion {
                    lo: center - half_width,
                    hi: center + half_width,
                    value,
                },
            ],
            state_bounds: DEFAULT_BOUNDS,
            gamma: DEFAULT_GAMMA,
            boundary: Boundary::Clamp,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let finite = [self.p, self.l, self.eta, self.gamma, self.state_bounds.0, self.state_bounds.1];
        if finite.iter().any(|x| !x.is_finite()) {
            v.push("all parameters must be finite".to_string());
        }
        if !(0.0..=1.0).contains(&self.p) {
            v.push(format!("p = {} not in [0, 1]", self.p));
        }
        if !(self.l > 0.0) {
            v.push(format!("l = {} must be positive", self.l));
        }
        if !(self.eta >= 0.0) {
            v.push(format!("eta = {} must be non-negative", self.eta));
        }
        if !(self.state_bounds.0 < self.state_bounds.1) {
            v.push(format!(
                "bounds ({}, {}) must satisfy lo < hi",
                self.state_bounds.0, self.state_bounds.1
            ));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            v.push(format!("gamma = {} not in (0, 1)", self.gamma));
        }
        for (i, r) in self.reward_regions.iter().enumerate() {
            if !(r.lo < r.hi) || !r.value.is_finite() {
                v.push(format!("region {i} = [{}, {}, {}] must satisfy lo < hi", r.lo, r.hi, r.value));
            }
        }
        v
    }
}

/// An immutable generative model for one chain-walk task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskModel {
    pub name: String,
    pub params: ChainParams,
    pub r_max: f64,
}

impl TaskModel {
    pub fn new(name: impl Into<String>, params: ChainParams) -> Result<Self> {
        let name = name.into();
        let violations = params.violations();
        if !violations.is_empty() {
            return Err(Error::InvalidParams(format!("{name}: {}", violations.join("; "))));
        }
        let r_max = params
            .reward_regions
            .iter()
            .map(|r| r.value.abs())
            .fold(0.0, f64::max);
        Ok(TaskModel { name, params, r_max })
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.params.gamma
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.params.state_bounds
    }

    /// Region value if `x` lies in any reward region, 0 otherwise. When
    /// regions overlap the first match wins.
    pub fn reward(&self, sa: StateAction) -> f64 {
        self.reward_at(sa.x)
    }

    #[inline]
    pub fn reward_at(&self, x: f64) -> f64 {
        self.params
            .reward_regions
            .iter()
            .find(|r| r.lo <= x && x <= r.hi)
            .map_or(0.0, |r| r.value)
    }

    /// Deterministic transition given the two uniforms that drive it:
    /// `coin ∈ [0, 1)` decides the direction, `noise ∈ [-1, 1]` scales `eta`.
    /// Sharing these draws across tasks gives common random numbers.
    #[inline]
    pub fn transition(&self, sa: StateAction, coin: f64, noise: f64) -> f64 {
        let p = &self.params;
        let dir = if coin < p.p {
            sa.a.direction()
        } else {
            -sa.a.direction()
        };
        let y = sa.x + dir * (p.l + p.eta * noise);
        y.clamp(p.state_bounds.0, p.state_bounds.1)
    }

    pub fn next_state<R: Rng + ?Sized>(&self, sa: StateAction, rng: &mut R) -> f64 {
        let (coin, noise) = draw_uniforms(rng);
        self.transition(sa, coin, noise)
    }

    pub fn step<R: Rng + ?Sized>(&self, sa: StateAction, rng: &mut R) -> Transition {
        Transition {
            x: sa.x,
            a: sa.a,
            y: self.next_state(sa, rng),
            r: self.reward(sa),
        }
    }
}

/// The pair of uniforms consumed by one transition.
#[inline]
pub fn draw_uniforms<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let coin: f64 = rng.random();
    let noise: f64 = rng.random_range(-1.0..=1.0);
    (coin, noise)
}

/// Tasks `M1..M9`. Set 1 holds `M1..M5`, set 2 holds `M1, M6..M9`.
pub fn chain_task(index: usize) -> Option<TaskModel> {
    let params = match index {
        1 => ChainParams::symmetric(0.9, 1.0, 0.1, 10.0, 1.0, 1.0),
        2 => ChainParams::symmetric(0.9, 2.0, 0.1, 10.0, 1.0, -5.0),
        3 => ChainParams::symmetric(0.9, 1.0, 0.1, 10.0, 1.0, 5.0),
        4 => ChainParams::symmetric(0.9, 1.0, 0.1, 5.0, 1.0, 1.0),
        5 => ChainParams::symmetric(0.9, 1.0, 0.1, 5.0, 1.0, -1.0),
        6 => ChainParams::symmetric(0.7, 1.0, 0.1, 10.0, 1.0, 1.0),
        7 => ChainParams::symmetric(0.1, 1.0, 0.1, 10.0, 1.0, 1.0),
        8 => ChainParams::symmetric(0.9, 1.0, 0.1, 10.0, 1.0, -5.0),
        9 => ChainParams::symmetric(0.7, 1.0, 0.5, 10.0, 1.0, 5.0),
        _ => return None,
    };
    Some(TaskModel::new(format!("M{index}"), params).expect("catalog entries are valid"))
}

/// The two task sets. The target `M1` is always first.
pub fn task_catalog(set_id: u8) -> Result<Vec<TaskModel>> {
    let ids: &[usize] = match set_id {
        1 => &[1, 2, 3, 4, 5],
        2 => &[1, 6, 7, 8, 9],
        other => return Err(Error::UnknownTaskSet(other)),
    };
    Ok(ids.iter().map(|&i| chain_task(i).unwrap()).collect())
}

/// Random-action episode from `start`. The `y` of step `t` is the `x` of
/// step `t + 1`.
pub fn collect_episode<R: Rng + ?Sized>(
    task: &TaskModel,
    start: f64,
    horizon: usize,
    rng: &mut R,
) -> Vec<Transition> {
    let mut x = start;
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let tr = task.step(StateAction::new(x, Action::random(rng)), rng);
        x = tr.y;
        out.push(tr);
    }
    out
}

/// Random-action episodes from `start`, concatenated and truncated to `n`.
pub fn collect_samples<R: Rng + ?Sized>(
    task: &TaskModel,
    start: f64,
    horizon: usize,
    n: usize,
    rng: &mut R,
) -> Vec<Transition> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let ep = collect_episode(task, start, horizon.min(n - out.len()), rng);
        out.extend(ep);
    }
    out
}

/// The state-action distribution `μ` that training inputs and auxiliary
/// pairs are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub enum InputDistribution {
    /// `x ~ Uniform[lo, hi]`, uniform action.
    Uniform { lo: f64, hi: f64 },
    /// Visitation distribution of random-action episodes of `horizon` steps
    /// from `start` under the transition model of `dynamics`: each draw is
    /// an independent episode stopped at a uniformly random step.
    Episodic {
        dynamics: TaskModel,
        start: f64,
        horizon: usize,
    },
}

impl InputDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<StateAction> {
        match self {
            InputDistribution::Uniform { lo, hi } => (0..n)
                .map(|_| StateAction::new(rng.random_range(*lo..=*hi), Action::random(rng)))
                .collect(),
            InputDistribution::Episodic {
                dynamics,
                start,
                horizon,
            } => (0..n)
                .map(|_| {
                    let t = rng.random_range(0..(*horizon).max(1));
                    let mut x = *start;
                    for _ in 0..t {
                        let a = Action::random(rng);
                        x = dynamics.next_state(StateAction::new(x, a), rng);
                    }
                    StateAction::new(x, Action::random(rng))
                })
                .collect(),
        }
    }
}
