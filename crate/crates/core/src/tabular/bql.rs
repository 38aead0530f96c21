//! Best possible Q-learning with Q-tables and a buffer series.
//!
//! Training is split into epochs. In each epoch every agent fixes a
//! deterministic behavior (greedy on its table, except on a random subset
//! of states where it follows a random deterministic policy), so each
//! epoch's buffer holds experience from a single induced transition
//! function. Training repeatedly picks one buffer, computes the expected
//! backup `Qe(s,a)` of every pair it covers, and raises `Q(s,a)` to
//! `max(Q(s,a), Qe(s,a))`.

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{agent_rng, default_init, env_rng, require, Evaluator, Interaction, QTable, TabularRun};
use crate::error::Result;
use crate::game::{JointMdp, Transition};
use crate::record::RunRecord;
use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BqlConfig {
    /// Environment step budget; the number of epochs is
    /// `total_steps / buffer_capacity`.
    pub total_steps: u64,
    /// Transitions collected per epoch, i.e. the size of each buffer.
    pub buffer_capacity: usize,
    /// Fraction of states on which the random deterministic policy is used.
    pub subset_fraction: f64,
    /// Operator applications (one randomly chosen buffer each) per epoch.
    pub sweeps_per_epoch: usize,
    /// Pairs with fewer samples in the chosen buffer are skipped.
    pub min_count: usize,
    /// Evaluate every this many epochs.
    pub eval_every: usize,
    pub horizon: usize,
    /// Defaults to the minimal return `r_min / (1 - gamma)`.
    pub init_value: Option<f64>,
}

impl Default for BqlConfig {
    fn default() -> Self {
        Self {
            total_steps: 200_000,
            buffer_capacity: 2000,
            subset_fraction: 1.0,
            sweeps_per_epoch: 200,
            min_count: 3,
            eval_every: 1,
            horizon: 100,
            init_value: None,
        }
    }
}

impl BqlConfig {
    pub fn validate(&self) -> Result<()> {
        require(self.buffer_capacity > 0, "buffer_capacity must be positive")?;
        require(
            self.total_steps >= self.buffer_capacity as u64,
            "total_steps must cover at least one epoch",
        )?;
        require(
            (0.0..=1.0).contains(&self.subset_fraction),
            "subset_fraction must be in [0,1]",
        )?;
        require(self.min_count > 0, "min_count must be positive")?;
        require(self.eval_every > 0, "eval_every must be positive")?;
        require(self.horizon > 0, "horizon must be positive")?;
        Ok(())
    }

    pub fn epochs(&self) -> usize {
        (self.total_steps / self.buffer_capacity as u64) as usize
    }
}

/// Something that can evaluate `E[r + gamma * V(s')]` for a state-action
/// pair under one fixed induced transition function.
pub trait ExpectationSource {
    fn expected_backup(&self, state: usize, action: usize, values: &[f64], gamma: f64) -> Option<f64>;
}

/// Experience gathered during one epoch under one fixed behavior profile.
#[derive(Debug, Clone)]
pub struct EpochBuffer {
    epoch: usize,
    capacity: usize,
    transitions: Vec<Transition>,
}

impl EpochBuffer {
    pub fn new(epoch: usize, capacity: usize) -> Self {
        Self {
            epoch,
            capacity,
            transitions: Vec::with_capacity(capacity),
        }
    }

    /// Returns `false` (and drops the transition) once full.
    pub fn push(&mut self, t: Transition) -> bool {
        if self.transitions.len() >= self.capacity {
            return false;
        }
        self.transitions.push(t);
        true
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Sufficient statistics for empirical expected backups.
    pub fn summarize(&self, n_states: usize, n_actions: usize, min_count: usize) -> BufferStats {
        let mut stats = BufferStats {
            epoch: self.epoch,
            n_states,
            n_actions,
            min_count,
            counts: vec![0; n_states * n_actions],
            reward_sum: vec![0.0; n_states * n_actions],
            next_counts: vec![0; n_states * n_actions * n_states],
        };
        for t in &self.transitions {
            let pair = t.state * n_actions + t.action;
            stats.counts[pair] += 1;
            stats.reward_sum[pair] += t.reward;
            stats.next_counts[pair * n_states + t.next_state] += 1;
        }
        stats
    }
}

/// Per-pair counts, reward sums and next-state histograms of a sealed
/// epoch buffer. The empirical mean of `r + gamma * V(s')` over the buffer
/// is `(sum r + gamma * sum_s' n(s') V(s')) / n`.
#[derive(Debug, Clone)]
pub struct BufferStats {
    epoch: usize,
    n_states: usize,
    n_actions: usize,
    min_count: usize,
    counts: Vec<u32>,
    reward_sum: Vec<f64>,
    next_counts: Vec<u32>,
}

impl BufferStats {
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn count(&self, state: usize, action: usize) -> u32 {
        self.counts[state * self.n_actions + action]
    }
}

impl ExpectationSource for BufferStats {
    fn expected_backup(&self, state: usize, action: usize, values: &[f64], gamma: f64) -> Option<f64> {
        let pair = state * self.n_actions + action;
        let n = self.counts[pair];
        if (n as usize) < self.min_count || n == 0 {
            return None;
        }
        let hist = &self.next_counts[pair * self.n_states..(pair + 1) * self.n_states];
        let future: f64 = hist
            .iter()
            .zip(values)
            .filter(|(c, _)| **c > 0)
            .map(|(&c, v)| c as f64 * v)
            .sum();
        Some((self.reward_sum[pair] + gamma * future) / n as f64)
    }
}

/// Ordered buffers `D^1 .. D^m` of one agent.
#[derive(Debug, Clone, Default)]
pub struct BufferSeries {
    buffers: Vec<BufferStats>,
}

impl BufferSeries {
    pub fn push(&mut self, stats: BufferStats) {
        if let Some(last) = self.buffers.last() {
            assert!(stats.epoch > last.epoch, "epochs must increase");
        }
        self.buffers.push(stats);
    }

    pub fn len(&self) -> usize {
        self.buffers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffers.is_empty()
    }

    pub fn get(&self, j: usize) -> &BufferStats {
        &self.buffers[j]
    }
}

/// Exact expectations under one slice of the model: for each state the
/// other agents play the fixed joint action `others[state]`. Used to run
/// the simplified operator without sampling error.
pub struct ModelSlice<'a> {
    pub mdp: &'a JointMdp,
    pub agent: usize,
    pub others: Vec<usize>,
}

impl ExpectationSource for ModelSlice<'_> {
    fn expected_backup(&self, state: usize, action: usize, values: &[f64], _gamma: f64) -> Option<f64> {
        let joint = self.mdp.codec().compose(self.agent, action, self.others[state]);
        Some(self.mdp.backup(state, joint, values))
    }
}

/// The per-epoch exploration plan of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationPlan {
    pub policy: Vec<usize>,
    pub in_subset: Vec<bool>,
}

impl ExplorationPlan {
    pub fn random(n_states: usize, n_actions: usize, fraction: f64, rng: &mut Rng) -> Self {
        let policy = (0..n_states).map(|_| rng.gen_range(0..n_actions)).collect();
        let size = ((fraction * n_states as f64).round() as usize).min(n_states);
        let mut in_subset = vec![false; n_states];
        for s in sample(rng, n_states, size).iter() {
            in_subset[s] = true;
        }
        Self { policy, in_subset }
    }

    pub fn subset_size(&self) -> usize {
        self.in_subset.iter().filter(|b| **b).count()
    }

    /// Random action inside the subset, greedy action elsewhere.
    pub fn action(&self, state: usize, q: &QTable) -> usize {
        if self.in_subset[state] {
            self.policy[state]
        } else {
            q.greedy(state)
        }
    }
}

/// Tables of one BQL agent.
#[derive(Debug, Clone)]
pub struct BqlAgent {
    pub q: QTable,
    pub qe: QTable,
}

impl BqlAgent {
    pub fn new(n_states: usize, n_actions: usize, init_value: f64) -> Self {
        Self {
            q: QTable::new(n_states, n_actions, init_value),
            qe: QTable::new(n_states, n_actions, init_value),
        }
    }

    /// One synchronous application of the simplified operator: every pair
    /// the source covers gets `Qe <- E[r + gamma max Q(s')]` and then
    /// `Q <- max(Q, Qe)`. Returns the number of pairs covered.
    pub fn apply(&mut self, source: &impl ExpectationSource, gamma: f64) -> usize {
        let v = self.q.state_values();
        let mut covered = 0;
        for s in 0..self.q.n_states() {
            for a in 0..self.q.n_actions() {
                if let Some(e) = source.expected_backup(s, a, &v, gamma) {
                    covered += 1;
                    self.qe.set(s, a, e);
                    if e > self.q.get(s, a) {
                        self.q.set(s, a, e);
                    }
                }
            }
        }
        covered
    }
}

pub fn bql_tabular_train(mdp: &JointMdp, config: &BqlConfig, seed: u64) -> Result<TabularRun> {
    config.validate()?;
    let evaluator = Evaluator::new(mdp)?;
    let n_agents = mdp.n_agents();
    let n_states = mdp.n_states();
    let init = config.init_value.unwrap_or_else(|| default_init(mdp));
    let mut agents: Vec<BqlAgent> = (0..n_agents)
        .map(|i| BqlAgent::new(n_states, mdp.n_actions(i), init))
        .collect();
    let mut series = vec![BufferSeries::default(); n_agents];
    let mut rngs: Vec<Rng> = (0..n_agents).map(|i| agent_rng(seed, i)).collect();
    let mut interaction = Interaction::new(mdp, config.horizon, env_rng(seed));
    let mut record = RunRecord::new("bql", seed);
    let epochs = config.epochs();
    let mut actions = vec![0; n_agents];

    for m in 0..epochs {
        let plans: Vec<ExplorationPlan> = (0..n_agents)
            .map(|i| ExplorationPlan::random(n_states, mdp.n_actions(i), config.subset_fraction, &mut rngs[i]))
            .collect();
        // Behavior is frozen for the whole epoch.
        let behavior: Vec<Vec<usize>> = plans
            .iter()
            .zip(&agents)
            .map(|(plan, agent)| (0..n_states).map(|s| plan.action(s, &agent.q)).collect())
            .collect();
        let mut buffers: Vec<EpochBuffer> = (0..n_agents)
            .map(|_| EpochBuffer::new(m, config.buffer_capacity))
            .collect();
        for _ in 0..config.buffer_capacity {
            let s = interaction.state();
            for (slot, pi) in actions.iter_mut().zip(&behavior) {
                *slot = pi[s];
            }
            let (s, next, r) = interaction.step_actions(&actions);
            for (buf, &a) in buffers.iter_mut().zip(&actions) {
                buf.push(Transition {
                    state: s,
                    action: a,
                    next_state: next,
                    reward: r,
                });
            }
        }
        for (i, buf) in buffers.into_iter().enumerate() {
            series[i].push(buf.summarize(n_states, mdp.n_actions(i), config.min_count));
        }
        for ((agent, buffers), rng) in agents.iter_mut().zip(&series).zip(rngs.iter_mut()) {
            for _ in 0..config.sweeps_per_epoch {
                let j = rng.gen_range(0..buffers.len());
                agent.apply(buffers.get(j), mdp.gamma());
            }
        }
        if (m + 1) % config.eval_every == 0 || m + 1 == epochs {
            let tables: Vec<QTable> = agents.iter().map(|a| a.q.clone()).collect();
            let (ret, norm) = evaluator.score_tables(&tables)?;
            record.push(interaction.steps(), ret, norm);
        }
    }

    Ok(TabularRun {
        record,
        q: agents.into_iter().map(|a| a.q).collect(),
    })
}
