//! Cooperative stochastic games.
//!
//! A [`JointMdp`] is the full model seen by an omniscient observer: every
//! agent's action set, the joint transition tensor `P(s' | s, a)` and the
//! shared reward `R(s, s')`. Individual agents never see the joint action;
//! from agent `i`'s point of view the environment is the induced MDP whose
//! transition rows depend on what the other agents do
//! ([`induced_transition`]).

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, Rng};

const ROW_SUM_TOL: f64 = 1e-9;

/// Mixed-radix encoding of joint actions. Agent 0 is the most significant
/// digit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointActionCodec {
    radices: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl JointActionCodec {
    pub fn new(radices: &[usize]) -> Self {
        let mut strides = vec![0; radices.len()];
        let mut size = 1usize;
        for (i, &r) in radices.iter().enumerate().rev() {
            strides[i] = size;
            size *= r;
        }
        Self {
            radices: radices.to_vec(),
            strides,
            size,
        }
    }

    pub fn n_joint(&self) -> usize {
        self.size
    }

    pub fn n_agents(&self) -> usize {
        self.radices.len()
    }

    pub fn encode(&self, actions: &[usize]) -> usize {
        debug_assert_eq!(actions.len(), self.radices.len());
        actions
            .iter()
            .zip(&self.strides)
            .map(|(a, s)| a * s)
            .sum()
    }

    pub fn decode(&self, joint: usize) -> Vec<usize> {
        let mut out = vec![0; self.radices.len()];
        self.decode_into(joint, &mut out);
        out
    }

    pub fn decode_into(&self, joint: usize, out: &mut [usize]) {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = (joint / self.strides[i]) % self.radices[i];
        }
    }

    pub fn action_of(&self, joint: usize, agent: usize) -> usize {
        (joint / self.strides[agent]) % self.radices[agent]
    }

    /// Number of joint actions of all agents except `agent`.
    pub fn n_others(&self, agent: usize) -> usize {
        self.size / self.radices[agent]
    }

    /// Joint index of `(own, others)` where `others` enumerates the other
    /// agents' actions in mixed radix, lowest agent index most significant.
    pub fn compose(&self, agent: usize, own: usize, others: usize) -> usize {
        // Splitting `others` at the position of `agent`: the digits below
        // `agent` keep their stride, the digits above shift up by one radix.
        let low_stride = self.strides[agent];
        let low = others % low_stride;
        let high = others / low_stride;
        high * low_stride * self.radices[agent] + own * low_stride + low
    }

    /// Inverse of [`compose`](Self::compose) for the other-agents part.
    pub fn others_of(&self, joint: usize, agent: usize) -> usize {
        let low_stride = self.strides[agent];
        let low = joint % low_stride;
        let high = joint / (low_stride * self.radices[agent]);
        high * low_stride + low
    }
}

/// Full cooperative stochastic game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "GameDocument", try_from = "GameDocument")]
pub struct JointMdp {
    n_states: usize,
    actions_per_agent: Vec<usize>,
    codec: JointActionCodec,
    /// (state, joint, next) row-major.
    transition: Vec<f64>,
    /// (state, next) row-major.
    reward: Vec<f64>,
    gamma: f64,
    initial: Vec<f64>,
    r_min: f64,
    r_max: f64,
}

impl JointMdp {
    /// Builds a game from flat row-major tables and validates every
    /// invariant.
    pub fn new(
        actions_per_agent: Vec<usize>,
        n_states: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
        initial: Vec<f64>,
        r_min: f64,
        r_max: f64,
    ) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::invalid("n_states must be at least 1"));
        }
        if actions_per_agent.is_empty() || actions_per_agent.contains(&0) {
            return Err(Error::invalid("every agent needs at least one action"));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::invalid(format!("gamma {gamma} not in [0,1)")));
        }
        let codec = JointActionCodec::new(&actions_per_agent);
        let n_joint = codec.n_joint();
        if transition.len() != n_states * n_joint * n_states {
            return Err(Error::DimensionMismatch {
                expected: n_states * n_joint * n_states,
                actual: transition.len(),
            });
        }
        if reward.len() != n_states * n_states {
            return Err(Error::DimensionMismatch {
                expected: n_states * n_states,
                actual: reward.len(),
            });
        }
        if initial.len() != n_states {
            return Err(Error::DimensionMismatch {
                expected: n_states,
                actual: initial.len(),
            });
        }
        for (row_idx, row) in transition.chunks(n_states).enumerate() {
            check_distribution(row).map_err(|e| {
                Error::invalid(format!(
                    "transition row (state {}, joint {}): {e}",
                    row_idx / n_joint,
                    row_idx % n_joint
                ))
            })?;
        }
        check_distribution(&initial)
            .map_err(|e| Error::invalid(format!("initial distribution: {e}")))?;
        if !(r_min <= r_max) {
            return Err(Error::invalid("r_min must not exceed r_max"));
        }
        if let Some(r) = reward
            .iter()
            .find(|r| !r.is_finite() || **r < r_min || **r > r_max)
        {
            return Err(Error::invalid(format!(
                "reward {r} outside [{r_min}, {r_max}]"
            )));
        }
        Ok(Self {
            n_states,
            actions_per_agent,
            codec,
            transition,
            reward,
            gamma,
            initial,
            r_min,
            r_max,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_agents(&self) -> usize {
        self.actions_per_agent.len()
    }

    pub fn n_actions(&self, agent: usize) -> usize {
        self.actions_per_agent[agent]
    }

    pub fn actions_per_agent(&self) -> &[usize] {
        &self.actions_per_agent
    }

    pub fn n_joint(&self) -> usize {
        self.codec.n_joint()
    }

    pub fn codec(&self) -> &JointActionCodec {
        &self.codec
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn initial_distribution(&self) -> &[f64] {
        &self.initial
    }

    /// Transition row `P(. | state, joint)`.
    pub fn row(&self, state: usize, joint: usize) -> &[f64] {
        let start = (state * self.n_joint() + joint) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn reward(&self, state: usize, next: usize) -> f64 {
        self.reward[state * self.n_states + next]
    }

    pub fn reward_row(&self, state: usize) -> &[f64] {
        &self.reward[state * self.n_states..(state + 1) * self.n_states]
    }

    /// Expected one-step reward `sum_s' P(s'|s,a) R(s,s')`.
    pub fn expected_reward(&self, state: usize, joint: usize) -> f64 {
        dot(self.row(state, joint), self.reward_row(state))
    }

    /// `sum_s' P(s'|s,a) (R(s,s') + gamma * values[s'])`.
    pub fn backup(&self, state: usize, joint: usize, values: &[f64]) -> f64 {
        let rewards = self.reward_row(state);
        self.row(state, joint)
            .iter()
            .zip(rewards.iter().zip(values))
            .map(|(p, (r, v))| p * (r + self.gamma * v))
            .sum()
    }

    /// Whether every transition row puts all its mass on one next state.
    pub fn is_deterministic(&self) -> bool {
        self.transition
            .chunks(self.n_states)
            .all(|row| row.iter().any(|&p| p == 1.0))
    }

    /// Copy with a different reward table (same bounds checks apply).
    pub fn with_reward(&self, reward: Vec<f64>, r_min: f64, r_max: f64) -> Result<Self> {
        Self::new(
            self.actions_per_agent.clone(),
            self.n_states,
            self.transition.clone(),
            reward,
            self.gamma,
            self.initial.clone(),
            r_min,
            r_max,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn check_distribution(row: &[f64]) -> std::result::Result<(), String> {
    if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(format!("invalid probability {p}"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(format!("sums to {sum}"));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Serialized form of a [`JointMdp`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameDocument {
    pub n_states: usize,
    pub n_agents: usize,
    pub actions_per_agent: Vec<usize>,
    pub gamma: f64,
    /// `transition[s][joint][s']`
    pub transition: Vec<Vec<Vec<f64>>>,
    /// `reward[s][s']`
    pub reward: Vec<Vec<f64>>,
    pub initial_distribution: Vec<f64>,
    pub r_min: f64,
    pub r_max: f64,
}

impl From<JointMdp> for GameDocument {
    fn from(m: JointMdp) -> Self {
        let n = m.n_states;
        let n_joint = m.n_joint();
        let transition = (0..n)
            .map(|s| (0..n_joint).map(|a| m.row(s, a).to_vec()).collect())
            .collect();
        let reward = m.reward.chunks(n).map(<[f64]>::to_vec).collect();
        GameDocument {
            n_states: n,
            n_agents: m.n_agents(),
            actions_per_agent: m.actions_per_agent,
            gamma: m.gamma,
            transition,
            reward,
            initial_distribution: m.initial,
            r_min: m.r_min,
            r_max: m.r_max,
        }
    }
}

impl TryFrom<GameDocument> for JointMdp {
    type Error = Error;

    fn try_from(doc: GameDocument) -> Result<Self> {
        if doc.n_agents != doc.actions_per_agent.len() {
            return Err(Error::DimensionMismatch {
                expected: doc.n_agents,
                actual: doc.actions_per_agent.len(),
            });
        }
        if doc.transition.len() != doc.n_states || doc.reward.len() != doc.n_states {
            return Err(Error::invalid("outer table length differs from n_states"));
        }
        let transition: Vec<f64> = doc.transition.into_iter().flatten().flatten().collect();
        let reward: Vec<f64> = doc.reward.into_iter().flatten().collect();
        JointMdp::new(
            doc.actions_per_agent,
            doc.n_states,
            transition,
            reward,
            doc.gamma,
            doc.initial_distribution,
            doc.r_min,
            doc.r_max,
        )
    }
}

/// Per-agent mapping state -> action. `actions[agent][state]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicPolicyProfile {
    actions: Vec<Vec<usize>>,
}

impl DeterministicPolicyProfile {
    pub fn new(mdp: &JointMdp, actions: Vec<Vec<usize>>) -> Result<Self> {
        if actions.len() != mdp.n_agents() {
            return Err(Error::DimensionMismatch {
                expected: mdp.n_agents(),
                actual: actions.len(),
            });
        }
        for (agent, per_state) in actions.iter().enumerate() {
            if per_state.len() != mdp.n_states() {
                return Err(Error::DimensionMismatch {
                    expected: mdp.n_states(),
                    actual: per_state.len(),
                });
            }
            if per_state.iter().any(|&a| a >= mdp.n_actions(agent)) {
                return Err(Error::invalid(format!(
                    "agent {agent} maps a state to an invalid action"
                )));
            }
        }
        Ok(Self { actions })
    }

    /// Every agent plays `0` everywhere.
    pub fn constant_zero(mdp: &JointMdp) -> Self {
        Self {
            actions: vec![vec![0; mdp.n_states()]; mdp.n_agents()],
        }
    }

    /// Uniformly random deterministic profile.
    pub fn random(mdp: &JointMdp, rng: &mut Rng) -> Self {
        let actions = (0..mdp.n_agents())
            .map(|i| {
                (0..mdp.n_states())
                    .map(|_| rng.gen_range(0..mdp.n_actions(i)))
                    .collect()
            })
            .collect();
        Self { actions }
    }

    pub fn action(&self, agent: usize, state: usize) -> usize {
        self.actions[agent][state]
    }

    pub fn agent_policy(&self, agent: usize) -> &[usize] {
        &self.actions[agent]
    }

    pub fn set(&mut self, agent: usize, state: usize, action: usize) {
        self.actions[agent][state] = action;
    }

    pub fn n_agents(&self) -> usize {
        self.actions.len()
    }

    pub fn joint_action(&self, codec: &JointActionCodec, state: usize) -> usize {
        self.actions
            .iter()
            .zip(&codec.strides)
            .map(|(pi, stride)| pi[state] * stride)
            .sum()
    }

    /// The other agents' joint action at `state`, in [`JointActionCodec::compose`] order.
    pub fn others_action(&self, codec: &JointActionCodec, agent: usize, state: usize) -> usize {
        codec.others_of(self.joint_action(codec, state), agent)
    }
}

/// One decentralized experience `(s, a_i, s', r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
    pub reward: f64,
}

/// Transition tensor `P_i(s' | s, a_i)` of one agent's induced MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedTransition {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl InducedTransition {
    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.n_actions + action) * self.n_states;
        &self.probs[start..start + self.n_states]
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
}

/// Induced transition of `agent` when the other agents follow the
/// deterministic `others` profile (the agent's own entry is ignored). The
/// sum over the others' joint action collapses to a single slice.
pub fn induced_transition(
    mdp: &JointMdp,
    agent: usize,
    others: &DeterministicPolicyProfile,
) -> Result<InducedTransition> {
    check_agent(mdp, agent)?;
    let codec = mdp.codec();
    let n = mdp.n_states();
    let n_actions = mdp.n_actions(agent);
    let mut probs = Vec::with_capacity(n * n_actions * n);
    for s in 0..n {
        let o = others.others_action(codec, agent, s);
        for a in 0..n_actions {
            probs.extend_from_slice(mdp.row(s, codec.compose(agent, a, o)));
        }
    }
    Ok(InducedTransition {
        n_states: n,
        n_actions,
        probs,
    })
}

/// Induced transition under a stochastic policy of the other agents.
/// `others_weights[s]` is a distribution over the others' joint actions.
pub fn induced_transition_mixed(
    mdp: &JointMdp,
    agent: usize,
    others_weights: &[Vec<f64>],
) -> Result<InducedTransition> {
    check_agent(mdp, agent)?;
    let codec = mdp.codec();
    let n = mdp.n_states();
    let n_others = codec.n_others(agent);
    if others_weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: others_weights.len(),
        });
    }
    for w in others_weights {
        if w.len() != n_others {
            return Err(Error::DimensionMismatch {
                expected: n_others,
                actual: w.len(),
            });
        }
        check_distribution(w).map_err(|e| Error::invalid(format!("others policy: {e}")))?;
    }
    let n_actions = mdp.n_actions(agent);
    let mut probs = vec![0.0; n * n_actions * n];
    for s in 0..n {
        for a in 0..n_actions {
            let out = &mut probs[(s * n_actions + a) * n..(s * n_actions + a + 1) * n];
            for (o, &w) in others_weights[s].iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (slot, p) in out.iter_mut().zip(mdp.row(s, codec.compose(agent, a, o))) {
                    *slot += w * p;
                }
            }
        }
    }
    Ok(InducedTransition {
        n_states: n,
        n_actions,
        probs,
    })
}

fn check_agent(mdp: &JointMdp, agent: usize) -> Result<()> {
    if agent >= mdp.n_agents() {
        return Err(Error::invalid(format!(
            "agent {agent} out of range for {} agents",
            mdp.n_agents()
        )));
    }
    Ok(())
}

/// Draws an index from a probability row by inversion.
pub(crate) fn sample_index(row: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Samples `(next_state, reward)` for a joint action.
pub fn sample_step(mdp: &JointMdp, state: usize, joint: usize, rng: &mut Rng) -> (usize, f64) {
    let next = sample_index(mdp.row(state, joint), rng);
    (next, mdp.reward(state, next))
}

pub fn sample_initial_state(mdp: &JointMdp, rng: &mut Rng) -> usize {
    sample_index(mdp.initial_distribution(), rng)
}

fn check_generator_args(n_agents: usize, n_states: usize, n_actions: usize, gamma: f64) -> Result<()> {
    if n_agents == 0 || n_states == 0 || n_actions == 0 {
        return Err(Error::invalid("agent, state and action counts must be >= 1"));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma {gamma} not in [0,1)")));
    }
    Ok(())
}

/// Random game with full-support transition rows (normalized i.i.d.
/// uniform weights), rewards uniform in [0, 1] and a uniform initial
/// distribution.
pub fn generate_random_game(
    n_agents: usize,
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    seed: u64,
) -> Result<JointMdp> {
    check_generator_args(n_agents, n_states, n_actions, gamma)?;
    let mut rng = rng_from_seed(seed);
    let n_joint = n_actions.pow(n_agents as u32);
    let mut transition = Vec::with_capacity(n_states * n_joint * n_states);
    for _ in 0..n_states * n_joint {
        let weights: Vec<f64> = (0..n_states).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        transition.extend(weights.iter().map(|w| w / total));
    }
    let reward = (0..n_states * n_states).map(|_| rng.gen::<f64>()).collect();
    let initial = vec![1.0 / n_states as f64; n_states];
    JointMdp::new(
        vec![n_actions; n_agents],
        n_states,
        transition,
        reward,
        gamma,
        initial,
        0.0,
        1.0,
    )
}

/// Random game whose every (state, joint action) leads to one uniformly
/// chosen next state.
pub fn generate_deterministic_game(
    n_agents: usize,
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    seed: u64,
) -> Result<JointMdp> {
    check_generator_args(n_agents, n_states, n_actions, gamma)?;
    let mut rng = rng_from_seed(seed);
    let n_joint = n_actions.pow(n_agents as u32);
    let mut transition = vec![0.0; n_states * n_joint * n_states];
    for row in transition.chunks_mut(n_states) {
        row[rng.gen_range(0..n_states)] = 1.0;
    }
    let reward = (0..n_states * n_states).map(|_| rng.gen::<f64>()).collect();
    let initial = vec![1.0 / n_states as f64; n_states];
    JointMdp::new(
        vec![n_actions; n_agents],
        n_states,
        transition,
        reward,
        gamma,
        initial,
        0.0,
        1.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> JointMdp {
        // 2 agents x 2 actions, 2 states; each joint action is a distinct row.
        let transition = vec![
            // state 0
            0.9, 0.1, // (0,0)
            0.6, 0.4, // (0,1)
            0.3, 0.7, // (1,0)
            0.0, 1.0, // (1,1)
            // state 1
            0.5, 0.5, //
            0.2, 0.8, //
            1.0, 0.0, //
            0.7, 0.3, //
        ];
        JointMdp::new(
            vec![2, 2],
            2,
            transition,
            vec![0.1, 0.2, 0.3, 0.4],
            0.9,
            vec![0.5, 0.5],
            0.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn paper_scale_game_has_256_joint_actions() {
        let g = generate_random_game(4, 30, 4, 0.99, 7).unwrap();
        assert_eq!(g.n_joint(), 256);
        assert_eq!(g.n_states(), 30);
    }

    #[test]
    fn single_state_single_action_row_is_one() {
        let g = generate_random_game(1, 1, 1, 0.0, 0).unwrap();
        assert_eq!(g.row(0, 0), &[1.0]);
    }

    #[test]
    fn generator_is_deterministic_in_seed() {
        let a = generate_random_game(3, 5, 2, 0.9, 11).unwrap();
        let b = generate_random_game(3, 5, 2, 0.9, 11).unwrap();
        assert_eq!(a, b);
        let c = generate_random_game(3, 5, 2, 0.9, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generator_rejects_bad_arguments() {
        assert!(generate_random_game(0, 3, 2, 0.9, 0).is_err());
        assert!(generate_random_game(2, 0, 2, 0.9, 0).is_err());
        assert!(generate_random_game(2, 3, 0, 0.9, 0).is_err());
        assert!(generate_random_game(2, 3, 2, 1.0, 0).is_err());
        assert!(generate_random_game(2, 3, 2, -0.1, 0).is_err());
    }

    #[test]
    fn new_rejects_unnormalized_rows() {
        let err = JointMdp::new(vec![1], 2, vec![0.5, 0.4, 0.0, 1.0], vec![0.0; 4], 0.5, vec![1.0, 0.0], 0.0, 1.0);
        assert!(err.is_err());
    }

    #[test]
    fn new_rejects_reward_outside_bounds() {
        let err = JointMdp::new(vec![1], 1, vec![1.0], vec![2.0], 0.5, vec![1.0], 0.0, 1.0);
        assert!(err.is_err());
    }

    #[test]
    fn codec_agent_zero_is_most_significant() {
        let c = JointActionCodec::new(&[2, 3]);
        assert_eq!(c.encode(&[1, 0]), 3);
        assert_eq!(c.encode(&[0, 2]), 2);
        assert_eq!(c.decode(5), vec![1, 2]);
    }

    #[test]
    fn compose_and_others_of_are_inverse() {
        let c = JointActionCodec::new(&[2, 3, 4]);
        for agent in 0..3 {
            for joint in 0..c.n_joint() {
                let own = c.action_of(joint, agent);
                let o = c.others_of(joint, agent);
                assert!(o < c.n_others(agent));
                assert_eq!(c.compose(agent, own, o), joint);
            }
        }
    }

    #[test]
    fn induced_transition_with_degenerate_other_agent_is_env_slice() {
        let transition = vec![0.2, 0.8, 0.6, 0.4, 1.0, 0.0, 0.3, 0.7];
        let g = JointMdp::new(vec![2, 1], 2, transition, vec![0.0; 4], 0.9, vec![1.0, 0.0], 0.0, 1.0).unwrap();
        let profile = DeterministicPolicyProfile::constant_zero(&g);
        let p = induced_transition(&g, 0, &profile).unwrap();
        for s in 0..2 {
            for a in 0..2 {
                assert_eq!(p.row(s, a), g.row(s, g.codec().encode(&[a, 0])));
            }
        }
    }

    #[test]
    fn induced_transition_matches_brute_force_sum() {
        let g = two_by_two();
        // Agent 1 plays action 1 in state 0 and action 0 in state 1.
        let profile = DeterministicPolicyProfile::new(&g, vec![vec![0, 0], vec![1, 0]]).unwrap();
        let p = induced_transition(&g, 0, &profile).unwrap();
        // Brute force over a_{-i} with indicator weights.
        for s in 0..2 {
            for a in 0..2 {
                let mut expect = [0.0; 2];
                for other in 0..2 {
                    let w = if profile.action(1, s) == other { 1.0 } else { 0.0 };
                    let row = g.row(s, 2 * a + other);
                    for k in 0..2 {
                        expect[k] += w * row[k];
                    }
                }
                assert_eq!(p.row(s, a), &expect);
            }
        }
        // Hand-picked slices.
        assert_eq!(p.row(0, 0), &[0.6, 0.4]);
        assert_eq!(p.row(0, 1), &[0.0, 1.0]);
        assert_eq!(p.row(1, 0), &[0.5, 0.5]);
        assert_eq!(p.row(1, 1), &[1.0, 0.0]);
    }

    #[test]
    fn induced_transition_mixture_is_convex_combination() {
        let g = two_by_two();
        let weights = vec![vec![0.25, 0.75], vec![0.5, 0.5]];
        let p = induced_transition_mixed(&g, 1, &weights).unwrap();
        // Agent 1 own action a, agent 0 action o: joint = 2*o + a.
        for s in 0..2 {
            for a in 0..2 {
                let mut expect = [0.0; 2];
                for o in 0..2 {
                    for k in 0..2 {
                        expect[k] += weights[s][o] * g.row(s, 2 * o + a)[k];
                    }
                }
                for k in 0..2 {
                    assert!((p.row(s, a)[k] - expect[k]).abs() < 1e-15);
                }
                assert!((p.row(s, a).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn induced_transition_rejects_bad_agent() {
        let g = two_by_two();
        let profile = DeterministicPolicyProfile::constant_zero(&g);
        assert!(induced_transition(&g, 2, &profile).is_err());
    }

    #[test]
    fn sample_step_deterministic_row() {
        let g = JointMdp::new(vec![1], 3, vec![0., 1., 0., 0., 1., 0., 0., 1., 0.], vec![0.5; 9], 0.5, vec![1., 0., 0.], 0.0, 1.0).unwrap();
        let mut rng = rng_from_seed(3);
        for _ in 0..1000 {
            assert_eq!(sample_step(&g, 0, 0, &mut rng), (1, 0.5));
        }
    }

    #[test]
    fn sample_step_single_state() {
        let g = generate_random_game(2, 1, 3, 0.5, 9).unwrap();
        let mut rng = rng_from_seed(4);
        for j in 0..g.n_joint() {
            assert_eq!(sample_step(&g, 0, j, &mut rng).0, 0);
        }
    }

    #[test]
    fn sample_step_frequency_half() {
        let g = JointMdp::new(vec![1], 2, vec![0.5, 0.5, 0.5, 0.5], vec![0.0, 1.0, 0.0, 1.0], 0.5, vec![1., 0.], 0.0, 1.0).unwrap();
        let mut rng = rng_from_seed(5);
        let n = 100_000;
        let ones = (0..n).filter(|_| sample_step(&g, 0, 0, &mut rng).0 == 1).count();
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.01, "{freq}");
    }

    #[test]
    fn json_round_trip() {
        let g = generate_random_game(2, 3, 2, 0.9, 1).unwrap();
        let text = g.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["n_states", "n_agents", "actions_per_agent", "gamma", "transition", "reward", "initial_distribution", "r_min", "r_max"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["transition"].as_array().unwrap().len(), 3);
        assert_eq!(v["transition"][0].as_array().unwrap().len(), 4);
        assert_eq!(JointMdp::from_json(&text).unwrap(), g);
    }

    #[test]
    fn deterministic_generator_is_deterministic() {
        let g = generate_deterministic_game(3, 6, 2, 0.9, 2).unwrap();
        assert!(g.is_deterministic());
        assert!(!generate_random_game(3, 6, 2, 0.9, 2).unwrap().is_deterministic());
    }
}
