//! Multi-agent alternate Q-learning: agents take turns, one learning
//! on-policy from fresh transitions while the others act greedily on
//! frozen tables.

use serde::{Deserialize, Serialize};

use super::{agent_rng, default_init, env_rng, epsilon_greedy, require, Evaluator, Interaction, QTable, TabularRun};
use crate::error::Result;
use crate::game::JointMdp;
use crate::record::RunRecord;
use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ma2qlConfig {
    pub total_steps: u64,
    /// Episodes per turn.
    pub round_length: usize,
    pub alpha: f64,
    /// Exploration rate of the learning agent.
    pub epsilon: f64,
    pub horizon: usize,
    pub eval_every: u64,
    pub init_value: Option<f64>,
    /// Optional initial greedy action per agent, installed by raising that
    /// action's initial value by `preference_bonus` in every state.
    pub initial_preference: Vec<Option<usize>>,
    pub preference_bonus: f64,
}

impl Default for Ma2qlConfig {
    fn default() -> Self {
        Self {
            total_steps: 200_000,
            round_length: 50,
            alpha: 0.1,
            epsilon: 0.1,
            horizon: 100,
            eval_every: 2000,
            init_value: None,
            initial_preference: Vec::new(),
            preference_bonus: 1.0,
        }
    }
}

impl Ma2qlConfig {
    pub fn validate(&self, mdp: &JointMdp) -> Result<()> {
        require(self.total_steps > 0, "total_steps must be positive")?;
        require(self.round_length >= 1, "round_length must be at least one episode")?;
        require(self.alpha > 0.0 && self.alpha <= 1.0, "alpha must be in (0,1]")?;
        require((0.0..=1.0).contains(&self.epsilon), "epsilon must be in [0,1]")?;
        require(self.horizon > 0, "horizon must be positive")?;
        require(self.eval_every > 0, "eval_every must be positive")?;
        require(
            self.initial_preference.len() <= mdp.n_agents(),
            "initial_preference has more entries than agents",
        )?;
        for (i, p) in self.initial_preference.iter().enumerate() {
            if let Some(a) = p {
                require(*a < mdp.n_actions(i), "initial_preference action out of range")?;
            }
        }
        Ok(())
    }
}

pub fn ma2ql_train(mdp: &JointMdp, config: &Ma2qlConfig, seed: u64) -> Result<TabularRun> {
    config.validate(mdp)?;
    let evaluator = Evaluator::new(mdp)?;
    let n_agents = mdp.n_agents();
    let init = config.init_value.unwrap_or_else(|| default_init(mdp));
    let mut tables: Vec<QTable> = (0..n_agents)
        .map(|i| {
            let mut q = QTable::new(mdp.n_states(), mdp.n_actions(i), init);
            if let Some(Some(a)) = config.initial_preference.get(i) {
                for s in 0..mdp.n_states() {
                    q.set(s, *a, init + config.preference_bonus);
                }
            }
            q
        })
        .collect();
    let mut rngs: Vec<Rng> = (0..n_agents).map(|i| agent_rng(seed, i)).collect();
    let mut interaction = Interaction::new(mdp, config.horizon, env_rng(seed));
    let mut record = RunRecord::new("ma2ql", seed);
    let steps_per_round = (config.round_length * config.horizon) as u64;
    let mut actions = vec![0; n_agents];
    let gamma = mdp.gamma();

    for t in 0..config.total_steps {
        let learner = ((t / steps_per_round) % n_agents as u64) as usize;
        let s = interaction.state();
        for (i, slot) in actions.iter_mut().enumerate() {
            *slot = if i == learner {
                epsilon_greedy(&tables[i], s, config.epsilon, &mut rngs[i])
            } else {
                tables[i].greedy(s)
            };
        }
        let (s, next, r) = interaction.step_actions(&actions);
        let q = &mut tables[learner];
        let a = actions[learner];
        let target = r + gamma * q.max(next);
        let cur = q.get(s, a);
        q.set(s, a, (1.0 - config.alpha) * cur + config.alpha * target);

        let steps = interaction.steps();
        if steps % config.eval_every == 0 || steps == config.total_steps {
            let (ret, norm) = evaluator.score_tables(&tables)?;
            record.push(steps, ret, norm);
        }
    }
    Ok(TabularRun { record, q: tables })
}
