//! Environments as seen by the neural learners: a feature vector per state,
//! discrete per-agent actions, and a task-specific greedy evaluation.

use crate::envs::{DifferentialGameEnv, DIFFERENTIAL_AGENTS};
use crate::error::{Error, Result};
use crate::game::{sample_initial_state, sample_step, DeterministicPolicyProfile, JointMdp};
use crate::oracle::{evaluate_joint_policy, optimal_return};
use crate::seed::{derive_rng, stream, Rng};
use crate::tabular::normalize;

/// Greedy action of `agent` for a state feature vector.
pub type GreedyFn<'a> = dyn Fn(usize, &[f64]) -> usize + 'a;

pub trait NeuralTask: Sync {
    type State: Clone;

    fn n_agents(&self) -> usize;
    fn n_actions(&self, agent: usize) -> usize;
    fn feature_dim(&self) -> usize;
    fn gamma(&self) -> f64;
    /// Episodes are truncated (not terminated) after this many steps.
    fn horizon(&self) -> usize;
    fn reset(&self, rng: &mut Rng) -> Self::State;
    fn features(&self, state: &Self::State) -> Vec<f64>;
    fn step(&self, state: &Self::State, actions: &[usize], rng: &mut Rng) -> (Self::State, f64);
    /// `(return, normalized return)` of the greedy profile.
    fn evaluate(&self, greedy: &GreedyFn<'_>, seed: u64) -> Result<(f64, f64)>;
}

/// A [`JointMdp`] with one-hot state features, scored by exact policy
/// evaluation.
#[derive(Debug, Clone)]
pub struct MdpTask {
    mdp: JointMdp,
    horizon: usize,
    optimal: f64,
}

impl MdpTask {
    pub fn new(mdp: JointMdp, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon must be positive"));
        }
        let optimal = optimal_return(&mdp)?;
        Ok(Self { mdp, horizon, optimal })
    }

    pub fn mdp(&self) -> &JointMdp {
        &self.mdp
    }

    pub fn optimal_return(&self) -> f64 {
        self.optimal
    }

    pub fn one_hot(&self, state: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.mdp.n_states()];
        x[state] = 1.0;
        x
    }

    pub fn greedy_profile(&self, greedy: &GreedyFn<'_>) -> DeterministicPolicyProfile {
        let actions = (0..self.mdp.n_agents())
            .map(|i| (0..self.mdp.n_states()).map(|s| greedy(i, &self.one_hot(s))).collect())
            .collect();
        DeterministicPolicyProfile::new(&self.mdp, actions).expect("greedy actions are in range")
    }
}

impl NeuralTask for MdpTask {
    type State = usize;

    fn n_agents(&self) -> usize {
        self.mdp.n_agents()
    }

    fn n_actions(&self, agent: usize) -> usize {
        self.mdp.n_actions(agent)
    }

    fn feature_dim(&self) -> usize {
        self.mdp.n_states()
    }

    fn gamma(&self) -> f64 {
        self.mdp.gamma()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&self, rng: &mut Rng) -> usize {
        sample_initial_state(&self.mdp, rng)
    }

    fn features(&self, state: &usize) -> Vec<f64> {
        self.one_hot(*state)
    }

    fn step(&self, state: &usize, actions: &[usize], rng: &mut Rng) -> (usize, f64) {
        sample_step(&self.mdp, *state, self.mdp.codec().encode(actions), rng)
    }

    fn evaluate(&self, greedy: &GreedyFn<'_>, _seed: u64) -> Result<(f64, f64)> {
        let ret = evaluate_joint_policy(&self.mdp, &self.greedy_profile(greedy))?;
        Ok((ret, normalize(ret, self.optimal)))
    }
}

/// The differential game with raw positions as features. Evaluation runs
/// greedy episodes with a fixed seed and reports the mean undiscounted
/// episode return; the normalized value divides by the horizon, the largest
/// attainable return.
#[derive(Debug, Clone)]
pub struct DifferentialTask {
    pub env: DifferentialGameEnv,
    pub gamma: f64,
    pub eval_episodes: usize,
}

impl DifferentialTask {
    pub fn new(env: DifferentialGameEnv, gamma: f64, eval_episodes: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::invalid(format!("gamma {gamma} not in [0,1)")));
        }
        if eval_episodes == 0 {
            return Err(Error::invalid("eval_episodes must be positive"));
        }
        Ok(Self {
            env,
            gamma,
            eval_episodes,
        })
    }
}

impl NeuralTask for DifferentialTask {
    type State = [f64; DIFFERENTIAL_AGENTS];

    fn n_agents(&self) -> usize {
        DIFFERENTIAL_AGENTS
    }

    fn n_actions(&self, _agent: usize) -> usize {
        self.env.n_actions
    }

    fn feature_dim(&self) -> usize {
        DIFFERENTIAL_AGENTS
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn horizon(&self) -> usize {
        self.env.horizon
    }

    fn reset(&self, rng: &mut Rng) -> Self::State {
        self.env.reset(rng)
    }

    fn features(&self, state: &Self::State) -> Vec<f64> {
        state.to_vec()
    }

    fn step(&self, state: &Self::State, actions: &[usize], rng: &mut Rng) -> (Self::State, f64) {
        self.env.step(state, actions, rng)
    }

    fn evaluate(&self, greedy: &GreedyFn<'_>, seed: u64) -> Result<(f64, f64)> {
        let mut rng = derive_rng(seed, &[stream::EVAL]);
        let mut total = 0.0;
        let mut actions = [0usize; DIFFERENTIAL_AGENTS];
        for _ in 0..self.eval_episodes {
            let mut x = self.env.reset(&mut rng);
            for _ in 0..self.env.horizon {
                for (i, a) in actions.iter_mut().enumerate() {
                    *a = greedy(i, &x);
                }
                let (next, r) = self.env.step(&x, &actions, &mut rng);
                total += r;
                x = next;
            }
        }
        let ret = total / self.eval_episodes as f64;
        Ok((ret, ret / self.env.horizon as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::make_one_stage_game;

    #[test]
    fn mdp_task_scores_constant_policy_exactly() {
        let task = MdpTask::new(make_one_stage_game().to_joint_mdp(), 1).unwrap();
        assert_eq!(task.evaluate(&|_, _| 0, 0).unwrap(), (8.0, 1.0));
        assert_eq!(task.evaluate(&|_, _| 1, 0).unwrap().0, 0.0);
    }

    #[test]
    fn differential_eval_is_seeded() {
        let task = DifferentialTask::new(DifferentialGameEnv::with_beta(0.4).unwrap(), 0.95, 3).unwrap();
        let policy = |_: usize, x: &[f64]| if x[0] > 0.0 { 0 } else { 8 };
        let a = task.evaluate(&policy, 11).unwrap();
        assert_eq!(a, task.evaluate(&policy, 11).unwrap());
        assert!(a.1 >= 0.0 && a.1 <= 1.0);
    }
}
