//! Hand-specified evaluation environments: one-stage matrix games, the
//! stochastic differential game, and random reward shaping for games with
//! several optimal joint policies.

use std::io::Write;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::game::JointMdp;
use crate::seed::{rng_from_seed, Rng};

/// Two-player one-stage game. `payoff[a0][a1]` is the shared reward.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    payoff: Vec<Vec<f64>>,
}

impl MatrixGame {
    pub fn new(payoff: Vec<Vec<f64>>) -> Result<Self> {
        let cols = payoff.first().map(Vec::len).unwrap_or(0);
        if payoff.is_empty() || cols == 0 || payoff.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("payoff table must be rectangular and non-empty"));
        }
        if payoff.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("payoffs must be finite"));
        }
        Ok(Self { payoff })
    }

    pub fn payoff(&self, a0: usize, a1: usize) -> f64 {
        self.payoff[a0][a1]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.payoff.len(), self.payoff[0].len())
    }

    /// The game as a one-step [`JointMdp`] with `gamma = 0`.
    ///
    /// Rewards of a [`JointMdp`] depend on `(s, s')` only, so the joint
    /// action is made observable through the next state: state 0 is the
    /// decision state and joint action `j` moves deterministically to
    /// outcome state `1 + j`, collecting `payoff(j)`. Outcome states return
    /// to state 0. Episodes start in state 0 and last one step.
    pub fn to_joint_mdp(&self) -> JointMdp {
        let (n0, n1) = self.shape();
        let n_joint = n0 * n1;
        let n = 1 + n_joint;
        let lo = self.payoff.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let hi = self.payoff.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut transition = vec![0.0; n * n_joint * n];
        let mut reward = vec![lo; n * n];
        for j in 0..n_joint {
            transition[j * n + 1 + j] = 1.0;
            reward[1 + j] = self.payoff[j / n1][j % n1];
        }
        for s in 1..n {
            for j in 0..n_joint {
                transition[(s * n_joint + j) * n] = 1.0;
            }
        }
        let mut initial = vec![0.0; n];
        initial[0] = 1.0;
        JointMdp::new(vec![n0, n1], n, transition, reward, 0.0, initial, lo, hi)
            .expect("matrix game view is a valid game")
    }
}

/// The 3x3 climbing-style game: 8 is the global optimum, the 0 block holds
/// a sub-optimal Nash equilibrium.
pub fn make_one_stage_game() -> MatrixGame {
    MatrixGame::new(vec![
        vec![8.0, -12.0, -12.0],
        vec![-12.0, 0.0, 0.0],
        vec![-12.0, 0.0, 0.0],
    ])
    .expect("constant table")
}

/// 2x2 game with two optimal joint actions, `(0,1)` and `(1,0)`, both
/// paying 1, and miscoordinated pairs paying `1 - delta`.
pub fn make_coordination_game(delta: f64) -> Result<MatrixGame> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::invalid("delta must be positive"));
    }
    MatrixGame::new(vec![vec![1.0 - delta, 1.0], vec![1.0, 1.0 - delta]])
}

/// Reward as a function of the normalized radius `l`.
pub fn differential_reward(l: f64) -> Result<f64> {
    if !(l >= 0.0) {
        return Err(Error::invalid(format!("radius {l} must be non-negative")));
    }
    use std::f64::consts::PI;
    Ok(if l <= 0.25 {
        0.5 * (4.0 * l * PI).cos() + 0.5
    } else if l <= 0.6 {
        0.0
    } else if l <= 1.0 {
        0.15 * (5.0 * PI * (l - 0.8)).cos() + 0.15
    } else {
        0.0
    })
}

/// `sqrt(2/3 * sum x_i^2)`.
pub fn radius(positions: &[f64]) -> f64 {
    (2.0 / 3.0 * positions.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

pub const DIFFERENTIAL_AGENTS: usize = 3;

/// Three agents moving on `[-1, 1]` with random sign flips.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialGameEnv {
    pub beta: f64,
    pub n_actions: usize,
    pub horizon: usize,
}

impl DifferentialGameEnv {
    pub fn new(beta: f64, n_actions: usize, horizon: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::invalid(format!("beta {beta} not in [0,1]")));
        }
        if n_actions < 2 {
            return Err(Error::invalid("need at least two discrete actions"));
        }
        if horizon == 0 {
            return Err(Error::invalid("horizon must be positive"));
        }
        Ok(Self {
            beta,
            n_actions,
            horizon,
        })
    }

    /// Nine evenly spaced actions and 100-step episodes.
    pub fn with_beta(beta: f64) -> Result<Self> {
        Self::new(beta, 9, 100)
    }

    /// Continuous value of a discrete action index, evenly spaced on [-1, 1].
    pub fn action_value(&self, action: usize) -> f64 {
        -1.0 + 2.0 * action as f64 / (self.n_actions - 1) as f64
    }

    pub fn reset(&self, rng: &mut Rng) -> [f64; DIFFERENTIAL_AGENTS] {
        [
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        ]
    }

    /// One transition; the reward is computed on the post-transition
    /// positions.
    pub fn step(
        &self,
        positions: &[f64; DIFFERENTIAL_AGENTS],
        actions: &[usize],
        rng: &mut Rng,
    ) -> ([f64; DIFFERENTIAL_AGENTS], f64) {
        debug_assert_eq!(actions.len(), DIFFERENTIAL_AGENTS);
        let mut next = *positions;
        for (x, &a) in next.iter_mut().zip(actions) {
            if rng.gen_bool(self.beta) {
                *x = -*x;
            } else {
                *x = (*x + 0.1 * self.action_value(a)).clamp(-1.0, 1.0);
            }
        }
        let r = differential_reward(radius(&next)).expect("radius is non-negative");
        (next, r)
    }
}

/// One row of a dumped differential-game trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: usize,
    pub positions: [f64; DIFFERENTIAL_AGENTS],
    pub actions: [f64; DIFFERENTIAL_AGENTS],
    pub reward: f64,
}

pub fn write_trajectory_csv<W: Write>(out: W, rows: &[TrajectoryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x1", "x2", "x3", "a1", "a2", "a3", "r"])?;
    for row in rows {
        let mut rec = vec![row.t.to_string()];
        rec.extend(row.positions.iter().map(f64::to_string));
        rec.extend(row.actions.iter().map(f64::to_string));
        rec.push(row.reward.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// A game with a fixed random positive bonus added to every reward entry.
#[derive(Debug, Clone)]
pub struct ShapedRewardWrapper {
    base: JointMdp,
    bonus: Vec<f64>,
    eps_tol: f64,
}

impl ShapedRewardWrapper {
    /// Draws `bonus(s, s')` uniformly from `(0, (1 - gamma) * eps_tol]`.
    pub fn new(base: &JointMdp, eps_tol: f64, seed: u64) -> Result<Self> {
        if !(eps_tol > 0.0) || !eps_tol.is_finite() {
            return Err(Error::invalid("eps_tol must be positive"));
        }
        let scale = (1.0 - base.gamma()) * eps_tol;
        let mut rng = rng_from_seed(seed);
        let n = base.n_states();
        // gen() is in [0, 1), so 1 - u is in (0, 1].
        let bonus = (0..n * n).map(|_| (1.0 - rng.gen::<f64>()) * scale).collect();
        Ok(Self {
            base: base.clone(),
            bonus,
            eps_tol,
        })
    }

    pub fn bonus(&self, state: usize, next: usize) -> f64 {
        self.bonus[state * self.base.n_states() + next]
    }

    pub fn bonus_bound(&self) -> f64 {
        (1.0 - self.base.gamma()) * self.eps_tol
    }

    pub fn base(&self) -> &JointMdp {
        &self.base
    }

    pub fn shaped(&self) -> JointMdp {
        let n = self.base.n_states();
        let reward: Vec<f64> = (0..n * n)
            .map(|k| self.base.reward(k / n, k % n) + self.bonus[k])
            .collect();
        self.base
            .with_reward(reward, self.base.r_min(), self.base.r_max() + self.bonus_bound())
            .expect("shaped rewards stay within the widened bounds")
    }
}

pub fn wrap_shaped_reward(mdp: &JointMdp, eps_tol: f64, seed: u64) -> Result<JointMdp> {
    Ok(ShapedRewardWrapper::new(mdp, eps_tol, seed)?.shaped())
}
