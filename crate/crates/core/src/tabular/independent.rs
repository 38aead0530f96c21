//! Independent learners with epsilon-greedy behavior and a per-agent FIFO
//! replay buffer: IQL, Hysteretic IQL (Distributed IQL at `lambda_h = 0`)
//! and single-buffer BQL.

use serde::{Deserialize, Serialize};

use super::{
    agent_rng, default_init, env_rng, epsilon_greedy, require, EpsilonSchedule, Evaluator,
    Interaction, QTable, TabularRun,
};
use crate::error::Result;
use crate::game::{JointMdp, Transition};
use crate::record::RunRecord;
use crate::replay::RingBuffer;
use crate::seed::Rng;

/// Shared interaction settings for the replay-based independent learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IqlConfig {
    pub total_steps: u64,
    pub alpha: f64,
    pub epsilon: EpsilonSchedule,
    pub buffer_capacity: usize,
    /// Replayed samples per environment step.
    pub updates_per_step: usize,
    pub horizon: usize,
    /// Evaluate every this many environment steps.
    pub eval_every: u64,
    pub init_value: Option<f64>,
}

impl Default for IqlConfig {
    fn default() -> Self {
        Self {
            total_steps: 200_000,
            alpha: 0.1,
            epsilon: EpsilonSchedule::default(),
            buffer_capacity: 10_000,
            updates_per_step: 1,
            horizon: 100,
            eval_every: 2000,
            init_value: None,
        }
    }
}

impl IqlConfig {
    pub fn validate(&self) -> Result<()> {
        require(self.total_steps > 0, "total_steps must be positive")?;
        require(self.alpha > 0.0 && self.alpha <= 1.0, "alpha must be in (0,1]")?;
        require(self.buffer_capacity > 0, "buffer_capacity must be positive")?;
        require(self.horizon > 0, "horizon must be positive")?;
        require(self.eval_every > 0, "eval_every must be positive")?;
        self.epsilon.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HystereticConfig {
    #[serde(flatten)]
    pub base: IqlConfig,
    /// Learning-rate multiplier for negative errors; 0 is Distributed IQL.
    pub lambda_h: f64,
}

impl Default for HystereticConfig {
    fn default() -> Self {
        Self {
            base: IqlConfig::default(),
            lambda_h: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BqlSingleConfig {
    #[serde(flatten)]
    pub base: IqlConfig,
    /// Weight of downward corrections of `Q` toward `Qe`.
    pub lambda: f64,
    /// `Q` is synchronized with `Qe` every this many samples.
    pub sync_every: usize,
}

impl Default for BqlSingleConfig {
    fn default() -> Self {
        Self {
            base: IqlConfig::default(),
            lambda: 0.01,
            sync_every: 1,
        }
    }
}

/// An independent learner fed one transition at a time.
pub trait IndependentLearner {
    fn q(&self) -> &QTable;
    fn update(&mut self, t: &Transition, gamma: f64);
}

/// Q-learning with an asymmetric step: `alpha` for positive TD errors,
/// `alpha * lambda_h` otherwise. `lambda_h = 1` is plain Q-learning.
#[derive(Debug, Clone)]
pub struct HystereticAgent {
    pub q: QTable,
    pub alpha: f64,
    pub lambda_h: f64,
}

impl HystereticAgent {
    pub fn new(q: QTable, alpha: f64, lambda_h: f64) -> Self {
        Self { q, alpha, lambda_h }
    }
}

impl IndependentLearner for HystereticAgent {
    fn q(&self) -> &QTable {
        &self.q
    }

    fn update(&mut self, t: &Transition, gamma: f64) {
        let target = t.reward + gamma * self.q.max(t.next_state);
        let current = self.q.get(t.state, t.action);
        let step = if target - current > 0.0 {
            self.alpha
        } else {
            self.alpha * self.lambda_h
        };
        // Convex form so that a unit step lands exactly on the target.
        self.q.set(t.state, t.action, (1.0 - step) * current + step * target);
    }
}

/// Single-buffer BQL: `Qe` tracks sampled targets with rate `alpha`, and
/// `Q` moves toward `Qe` with weight 1 when `Qe > Q`, `lambda` otherwise.
#[derive(Debug, Clone)]
pub struct SingleBufferBqlAgent {
    pub q: QTable,
    pub qe: QTable,
    pub alpha: f64,
    pub lambda: f64,
    pub sync_every: usize,
    samples: u64,
    pending: Vec<(usize, usize)>,
}

impl SingleBufferBqlAgent {
    pub fn new(q: QTable, alpha: f64, lambda: f64, sync_every: usize) -> Self {
        let qe = q.clone();
        Self {
            q,
            qe,
            alpha,
            lambda,
            sync_every: sync_every.max(1),
            samples: 0,
            pending: Vec::new(),
        }
    }

    fn sync(&mut self) {
        for (s, a) in self.pending.drain(..) {
            let (q, qe) = (self.q.get(s, a), self.qe.get(s, a));
            let w = if qe > q { 1.0 } else { self.lambda };
            self.q.set(s, a, (1.0 - w) * q + w * qe);
        }
    }
}

impl IndependentLearner for SingleBufferBqlAgent {
    fn q(&self) -> &QTable {
        &self.q
    }

    fn update(&mut self, t: &Transition, gamma: f64) {
        let target = t.reward + gamma * self.q.max(t.next_state);
        let qe = self.qe.get(t.state, t.action);
        self.qe
            .set(t.state, t.action, (1.0 - self.alpha) * qe + self.alpha * target);
        if !self.pending.contains(&(t.state, t.action)) {
            self.pending.push((t.state, t.action));
        }
        self.samples += 1;
        if self.samples % self.sync_every as u64 == 0 {
            self.sync();
        }
    }
}

fn run_independent<A: IndependentLearner>(
    mdp: &JointMdp,
    config: &IqlConfig,
    seed: u64,
    name: &str,
    mut agents: Vec<A>,
) -> Result<TabularRun> {
    config.validate()?;
    let evaluator = Evaluator::new(mdp)?;
    let n_agents = mdp.n_agents();
    let mut rngs: Vec<Rng> = (0..n_agents).map(|i| agent_rng(seed, i)).collect();
    let mut buffers: Vec<RingBuffer<Transition>> = (0..n_agents)
        .map(|_| RingBuffer::new(config.buffer_capacity))
        .collect();
    let mut interaction = Interaction::new(mdp, config.horizon, env_rng(seed));
    let mut record = RunRecord::new(name, seed);
    let mut actions = vec![0; n_agents];
    let gamma = mdp.gamma();

    for t in 0..config.total_steps {
        let eps = config.epsilon.value(t, config.total_steps);
        let s = interaction.state();
        for ((slot, agent), rng) in actions.iter_mut().zip(&agents).zip(rngs.iter_mut()) {
            *slot = epsilon_greedy(agent.q(), s, eps, rng);
        }
        let (s, next, r) = interaction.step_actions(&actions);
        for i in 0..n_agents {
            buffers[i].push(Transition {
                state: s,
                action: actions[i],
                next_state: next,
                reward: r,
            });
            for _ in 0..config.updates_per_step {
                let sample = *buffers[i].sample(&mut rngs[i]);
                agents[i].update(&sample, gamma);
            }
        }
        let steps = interaction.steps();
        if steps % config.eval_every == 0 || steps == config.total_steps {
            let tables: Vec<QTable> = agents.iter().map(|a| a.q().clone()).collect();
            let (ret, norm) = evaluator.score_tables(&tables)?;
            record.push(steps, ret, norm);
        }
    }
    Ok(TabularRun {
        record,
        q: agents.iter().map(|a| a.q().clone()).collect(),
    })
}

fn tables(mdp: &JointMdp, init: Option<f64>) -> Vec<QTable> {
    let init = init.unwrap_or_else(|| default_init(mdp));
    (0..mdp.n_agents())
        .map(|i| QTable::new(mdp.n_states(), mdp.n_actions(i), init))
        .collect()
}

pub fn iql_train(mdp: &JointMdp, config: &IqlConfig, seed: u64) -> Result<TabularRun> {
    let agents = tables(mdp, config.init_value)
        .into_iter()
        .map(|q| HystereticAgent::new(q, config.alpha, 1.0))
        .collect();
    run_independent(mdp, config, seed, "iql", agents)
}

pub fn hysteretic_iql_train(mdp: &JointMdp, config: &HystereticConfig, seed: u64) -> Result<TabularRun> {
    require(
        (0.0..=1.0).contains(&config.lambda_h),
        "lambda_h must be in [0,1]",
    )?;
    let agents = tables(mdp, config.base.init_value)
        .into_iter()
        .map(|q| HystereticAgent::new(q, config.base.alpha, config.lambda_h))
        .collect();
    run_independent(mdp, &config.base, seed, "hysteretic_iql", agents)
}

pub fn bql_single_buffer_train(mdp: &JointMdp, config: &BqlSingleConfig, seed: u64) -> Result<TabularRun> {
    require((0.0..=1.0).contains(&config.lambda), "lambda must be in [0,1]")?;
    require(config.sync_every > 0, "sync_every must be positive")?;
    let agents = tables(mdp, config.base.init_value)
        .into_iter()
        .map(|q| SingleBufferBqlAgent::new(q, config.base.alpha, config.lambda, config.sync_every))
        .collect();
    run_independent(mdp, &config.base, seed, "bql_single", agents)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(state: usize, action: usize, next_state: usize, reward: f64) -> Transition {
        Transition { state, action, next_state, reward }
    }

    #[test]
    fn hysteretic_zero_is_pointwise_max() {
        let mut a = HystereticAgent::new(QTable::new(2, 2, 0.0), 1.0, 0.0);
        a.update(&t(0, 1, 1, 0.7), 0.5);
        assert_eq!(a.q.get(0, 1), 0.7);
        a.update(&t(0, 1, 1, 0.2), 0.5);
        assert_eq!(a.q.get(0, 1), 0.7);
    }

    #[test]
    fn hysteretic_negative_error_uses_slow_rate() {
        let mut a = HystereticAgent::new(QTable::new(1, 1, 1.0), 0.5, 0.1);
        a.update(&t(0, 0, 0, 0.0), 0.0);
        assert!((a.q.get(0, 0) - 0.95).abs() < 1e-15);
    }

    #[test]
    fn single_buffer_lambda_one_tracks_qe() {
        let mut a = SingleBufferBqlAgent::new(QTable::new(1, 1, 1.0), 0.5, 1.0, 1);
        a.update(&t(0, 0, 0, 0.0), 0.0);
        assert_eq!(a.qe.get(0, 0), 0.5);
        assert_eq!(a.q.get(0, 0), 0.5);
    }

    #[test]
    fn single_buffer_syncs_only_on_schedule() {
        let mut a = SingleBufferBqlAgent::new(QTable::new(1, 2, 0.0), 1.0, 0.0, 2);
        a.update(&t(0, 0, 0, 1.0), 0.0);
        assert_eq!(a.q.get(0, 0), 0.0);
        a.update(&t(0, 1, 0, 2.0), 0.0);
        assert_eq!(a.q.get(0, 0), 1.0);
        assert_eq!(a.q.get(0, 1), 2.0);
    }

    #[test]
    fn single_agent_iql_approaches_optimal_values() {
        let mdp = crate::game::generate_random_game(1, 3, 2, 0.5, 4).unwrap();
        let cfg = IqlConfig {
            total_steps: 60_000,
            alpha: 0.02,
            eval_every: 60_000,
            ..IqlConfig::default()
        };
        let run = iql_train(&mdp, &cfg, 1).unwrap();
        let q = crate::oracle::joint_value_iteration(&mdp, 1e-12, 10_000).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                assert!((run.q[0].get(s, a) - q.get(s, a)).abs() < 0.05);
            }
        }
    }
}
