//! Sample-based learners over Q-tables.
//!
//! All learners drive the same [`Interaction`] loop against a [`JointMdp`]
//! and are scored by exact policy evaluation of their greedy joint profile.

mod bql;
mod independent;
mod jql;
mod ma2ql;

pub use bql::{
    bql_tabular_train, BqlAgent, BqlConfig, BufferSeries, BufferStats, EpochBuffer,
    ExpectationSource, ExplorationPlan, ModelSlice,
};
pub use independent::{
    bql_single_buffer_train, hysteretic_iql_train, iql_train, BqlSingleConfig, HystereticAgent,
    HystereticConfig, IndependentLearner, IqlConfig, SingleBufferBqlAgent,
};
pub use jql::{jql_train, JqlConfig};
pub use ma2ql::{ma2ql_train, Ma2qlConfig};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{sample_initial_state, sample_step, DeterministicPolicyProfile, JointMdp};
use crate::oracle::{argmax, evaluate_joint_policy, max_of, optimal_return};
use crate::record::RunRecord;
use crate::seed::{derive_rng, stream, Rng};

/// Per-agent table of action values, indexed (state, own action).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    init_value: f64,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize, init_value: f64) -> Self {
        Self {
            n_states,
            n_actions,
            init_value,
            values: vec![init_value; n_states * n_actions],
        }
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.n_actions + action]
    }

    #[inline]
    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.values[state * self.n_actions + action] = value;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn max(&self, state: usize) -> f64 {
        max_of(self.row(state))
    }

    /// Greedy action; ties go to the smallest index.
    pub fn greedy(&self, state: usize) -> usize {
        argmax(self.row(state))
    }

    pub fn state_values(&self) -> Vec<f64> {
        (0..self.n_states).map(|s| self.max(s)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn init_value(&self) -> f64 {
        self.init_value
    }
}

/// Linear decay from `start` to `end` over the first `decay_fraction` of
/// training, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_fraction: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            decay_fraction: 0.5,
        }
    }
}

impl EpsilonSchedule {
    pub fn constant(eps: f64) -> Self {
        Self {
            start: eps,
            end: eps,
            decay_fraction: 0.0,
        }
    }

    pub fn value(&self, step: u64, total: u64) -> f64 {
        let horizon = self.decay_fraction * total as f64;
        if horizon <= 0.0 || step as f64 >= horizon {
            return self.end;
        }
        self.start + (self.end - self.start) * (step as f64 / horizon)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        for (name, v) in [("start", self.start), ("end", self.end), ("decay_fraction", self.decay_fraction)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("epsilon {name} {v} not in [0,1]")));
            }
        }
        Ok(())
    }
}

pub(crate) fn epsilon_greedy(q: &QTable, state: usize, eps: f64, rng: &mut Rng) -> usize {
    if eps > 0.0 && rng.gen::<f64>() < eps {
        rng.gen_range(0..q.n_actions())
    } else {
        q.greedy(state)
    }
}

/// Result of a tabular training run.
#[derive(Debug, Clone)]
pub struct TabularRun {
    pub record: RunRecord,
    /// Final per-agent greedy tables (for JQL, a single joint table).
    pub q: Vec<QTable>,
}

/// Environment side of the interaction loop: tracks the current state,
/// truncates episodes at `horizon`, and counts steps.
pub struct Interaction<'a> {
    mdp: &'a JointMdp,
    rng: Rng,
    state: usize,
    t: usize,
    horizon: usize,
    steps: u64,
    episodes: u64,
}

impl<'a> Interaction<'a> {
    pub fn new(mdp: &'a JointMdp, horizon: usize, mut rng: Rng) -> Self {
        let state = sample_initial_state(mdp, &mut rng);
        Self {
            mdp,
            rng,
            state,
            t: 0,
            horizon: horizon.max(1),
            steps: 0,
            episodes: 0,
        }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    /// Applies a joint action; returns `(state, next_state, reward)`.
    pub fn step(&mut self, joint: usize) -> (usize, usize, f64) {
        let s = self.state;
        let (next, r) = sample_step(self.mdp, s, joint, &mut self.rng);
        self.steps += 1;
        self.t += 1;
        if self.t >= self.horizon {
            self.t = 0;
            self.episodes += 1;
            self.state = sample_initial_state(self.mdp, &mut self.rng);
        } else {
            self.state = next;
        }
        (s, next, r)
    }

    /// Convenience for per-agent action lists.
    pub fn step_actions(&mut self, actions: &[usize]) -> (usize, usize, f64) {
        let joint = self.mdp.codec().encode(actions);
        self.step(joint)
    }
}

/// Scores greedy profiles by exact policy evaluation.
pub struct Evaluator<'a> {
    mdp: &'a JointMdp,
    optimal: f64,
}

impl<'a> Evaluator<'a> {
    pub fn new(mdp: &'a JointMdp) -> Result<Self> {
        Ok(Self {
            mdp,
            optimal: optimal_return(mdp)?,
        })
    }

    pub fn optimal_return(&self) -> f64 {
        self.optimal
    }

    /// `(return, return / optimal)`.
    pub fn score(&self, profile: &DeterministicPolicyProfile) -> Result<(f64, f64)> {
        let ret = evaluate_joint_policy(self.mdp, profile)?;
        Ok((ret, normalize(ret, self.optimal)))
    }

    pub fn score_tables(&self, tables: &[QTable]) -> Result<(f64, f64)> {
        self.score(&greedy_profile(self.mdp, tables))
    }
}

pub fn normalize(ret: f64, optimal: f64) -> f64 {
    if optimal == 0.0 {
        if ret == 0.0 {
            1.0
        } else {
            ret
        }
    } else {
        ret / optimal
    }
}

/// Each agent's greedy action per state, from its own table.
pub fn greedy_profile(mdp: &JointMdp, tables: &[QTable]) -> DeterministicPolicyProfile {
    let actions = tables
        .iter()
        .map(|q| (0..mdp.n_states()).map(|s| q.greedy(s)).collect())
        .collect();
    DeterministicPolicyProfile::new(mdp, actions).expect("greedy actions are in range")
}

pub(crate) fn default_init(mdp: &JointMdp) -> f64 {
    mdp.r_min() / (1.0 - mdp.gamma())
}

pub(crate) fn env_rng(seed: u64) -> Rng {
    derive_rng(seed, &[stream::ENV])
}

pub(crate) fn agent_rng(seed: u64, agent: usize) -> Rng {
    derive_rng(seed, &[stream::AGENT, agent as u64])
}

pub(crate) fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::config(msg))
    }
}
