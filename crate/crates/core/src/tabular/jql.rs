//! Centralized joint-action Q-learning, the sample-efficiency reference.

use super::{agent_rng, default_init, env_rng, epsilon_greedy, Evaluator, IqlConfig, Interaction, QTable, TabularRun};
use crate::error::Result;
use crate::game::{DeterministicPolicyProfile, JointMdp, Transition};
use crate::record::RunRecord;
use crate::replay::RingBuffer;

/// JQL shares the interaction settings of the independent learners.
pub type JqlConfig = IqlConfig;

fn joint_greedy_profile(mdp: &JointMdp, q: &QTable) -> DeterministicPolicyProfile {
    let codec = mdp.codec();
    let mut actions = vec![vec![0; mdp.n_states()]; mdp.n_agents()];
    let mut buf = vec![0; mdp.n_agents()];
    for s in 0..mdp.n_states() {
        codec.decode_into(q.greedy(s), &mut buf);
        for (agent, &a) in buf.iter().enumerate() {
            actions[agent][s] = a;
        }
    }
    DeterministicPolicyProfile::new(mdp, actions).expect("decoded actions are in range")
}

/// One learner over the joint action space; the returned run holds a single
/// (state x joint action) table.
pub fn jql_train(mdp: &JointMdp, config: &JqlConfig, seed: u64) -> Result<TabularRun> {
    config.validate()?;
    let evaluator = Evaluator::new(mdp)?;
    let init = config.init_value.unwrap_or_else(|| default_init(mdp));
    let mut q = QTable::new(mdp.n_states(), mdp.n_joint(), init);
    let mut rng = agent_rng(seed, 0);
    let mut buffer = RingBuffer::new(config.buffer_capacity);
    let mut interaction = Interaction::new(mdp, config.horizon, env_rng(seed));
    let mut record = RunRecord::new("jql", seed);
    let gamma = mdp.gamma();

    for t in 0..config.total_steps {
        let eps = config.epsilon.value(t, config.total_steps);
        let joint = epsilon_greedy(&q, interaction.state(), eps, &mut rng);
        let (s, next, r) = interaction.step(joint);
        buffer.push(Transition {
            state: s,
            action: joint,
            next_state: next,
            reward: r,
        });
        for _ in 0..config.updates_per_step {
            let x = *buffer.sample(&mut rng);
            let target = x.reward + gamma * q.max(x.next_state);
            let cur = q.get(x.state, x.action);
            q.set(x.state, x.action, (1.0 - config.alpha) * cur + config.alpha * target);
        }
        let steps = interaction.steps();
        if steps % config.eval_every == 0 || steps == config.total_steps {
            let (ret, norm) = evaluator.score(&joint_greedy_profile(mdp, &q))?;
            record.push(steps, ret, norm);
        }
    }
    Ok(TabularRun { record, q: vec![q] })
}
