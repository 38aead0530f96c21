//! Model-based ground truth.
//!
//! Joint value iteration gives the optimal joint Q-value; projecting it with
//! a max over the other agents' actions gives the per-agent target that
//! every decentralized learner in this crate is trying to reach. The exact
//! best possible operator is iterated here directly on the model, which is
//! what the sample-based learners approximate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{DeterministicPolicyProfile, JointActionCodec, JointMdp};

/// Tolerance used when the oracle is asked for "the" optimal values.
pub const ORACLE_TOLERANCE: f64 = 1e-11;
pub const ORACLE_MAX_ITERS: usize = 1_000_000;

/// Optimal joint action values, indexed (state, joint action).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointQ {
    n_states: usize,
    n_joint: usize,
    values: Vec<f64>,
}

impl JointQ {
    pub fn zeros(n_states: usize, n_joint: usize) -> Self {
        Self {
            n_states,
            n_joint,
            values: vec![0.0; n_states * n_joint],
        }
    }

    pub fn get(&self, state: usize, joint: usize) -> f64 {
        self.values[state * self.n_joint + joint]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.n_joint..(state + 1) * self.n_joint]
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_joint(&self) -> usize {
        self.n_joint
    }

    pub fn max(&self, state: usize) -> f64 {
        self.row(state).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self, state: usize) -> usize {
        argmax(self.row(state))
    }

    /// Whether the best joint action in `state` beats the runner-up by more
    /// than `gap`.
    pub fn has_unique_optimum(&self, state: usize, gap: f64) -> bool {
        let row = self.row(state);
        let best = argmax(row);
        row.iter()
            .enumerate()
            .all(|(j, &v)| j == best || row[best] - v > gap)
    }
}

/// First index of the maximum; ties go to the smallest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Per-agent action values, indexed (state, own action), together with the
/// other agents' joint action that attains each entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedQ {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
    argmax_others: Vec<usize>,
}

impl ProjectedQ {
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.n_actions + action]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Conditional best response of the other agents given `(state, action)`.
    pub fn best_others(&self, state: usize, action: usize) -> usize {
        self.argmax_others[state * self.n_actions + action]
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn greedy_action(&self, state: usize) -> usize {
        argmax(self.row(state))
    }

    pub fn sup_distance(&self, other: &[f64]) -> f64 {
        sup_distance(&self.values, other)
    }
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct ValueIterationReport {
    pub q: JointQ,
    /// Sup-norm change between consecutive iterates.
    pub residuals: Vec<f64>,
}

fn check_tolerance(tolerance: f64) -> Result<()> {
    if !(tolerance > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    Ok(())
}

/// Synchronous joint value iteration from `Q = 0`.
pub fn joint_value_iteration(mdp: &JointMdp, tolerance: f64, max_iters: usize) -> Result<JointQ> {
    joint_value_iteration_traced(mdp, tolerance, max_iters).map(|r| r.q)
}

pub fn joint_value_iteration_traced(
    mdp: &JointMdp,
    tolerance: f64,
    max_iters: usize,
) -> Result<ValueIterationReport> {
    check_tolerance(tolerance)?;
    let n = mdp.n_states();
    let n_joint = mdp.n_joint();
    let mut q = JointQ::zeros(n, n_joint);
    let mut next = q.clone();
    let mut v = vec![0.0; n];
    let mut residuals = Vec::new();
    for _ in 0..max_iters {
        for (s, slot) in v.iter_mut().enumerate() {
            *slot = q.max(s);
        }
        let mut residual = 0.0f64;
        for s in 0..n {
            for a in 0..n_joint {
                let value = mdp.backup(s, a, &v);
                let idx = s * n_joint + a;
                residual = residual.max((value - q.values[idx]).abs());
                next.values[idx] = value;
            }
        }
        std::mem::swap(&mut q, &mut next);
        residuals.push(residual);
        if residual <= tolerance {
            return Ok(ValueIterationReport { q, residuals });
        }
    }
    Err(Error::NotConverged {
        what: "joint value iteration",
        iterations: max_iters,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// `max` over the other agents' joint actions of the joint Q-value.
pub fn project_max(q: &JointQ, codec: &JointActionCodec, agent: usize) -> Result<ProjectedQ> {
    if agent >= codec.n_agents() {
        return Err(Error::invalid(format!("agent {agent} out of range")));
    }
    if q.n_joint() != codec.n_joint() {
        return Err(Error::DimensionMismatch {
            expected: codec.n_joint(),
            actual: q.n_joint(),
        });
    }
    let n_actions = codec.n_joint() / codec.n_others(agent);
    let n_others = codec.n_others(agent);
    let mut values = Vec::with_capacity(q.n_states() * n_actions);
    let mut argmax_others = Vec::with_capacity(q.n_states() * n_actions);
    for s in 0..q.n_states() {
        for a in 0..n_actions {
            // Others indices increase with the flat joint index for fixed
            // `a`, so the first maximum is also the smallest joint index.
            let mut best_o = 0;
            let mut best = q.get(s, codec.compose(agent, a, 0));
            for o in 1..n_others {
                let v = q.get(s, codec.compose(agent, a, o));
                if v > best {
                    best = v;
                    best_o = o;
                }
            }
            values.push(best);
            argmax_others.push(best_o);
        }
    }
    Ok(ProjectedQ {
        n_states: q.n_states(),
        n_actions,
        values,
        argmax_others,
    })
}

/// Per-iteration diagnostics of [`exact_best_possible_iteration`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestPossibleStep {
    /// `||Q^k - Q^{k-1}||_inf`
    pub change: f64,
    /// `||Q^k - ref||_inf`, when a reference was supplied.
    pub distance_to_ref: Option<f64>,
    /// `max (Q^k - ref)`; non-positive while the iterate stays below the reference.
    pub excess_over_ref: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BestPossibleReport {
    pub q: ProjectedQ,
    /// Entry 0 describes the initialization; entry k the k-th sweep.
    pub trace: Vec<BestPossibleStep>,
}

/// One application of the exact best possible operator for `agent`:
/// `Q(s,a) <- max_{a_-i} E[r + gamma * max_a' Q(s',a')]`.
///
/// The max over deterministic other-agent policies is taken slice by slice
/// because for a fixed `(s, a_i)` each such policy selects exactly one
/// joint-action row.
pub fn best_possible_sweep(
    mdp: &JointMdp,
    agent: usize,
    q: &[f64],
    out: &mut [f64],
    argmax_others: &mut [usize],
) {
    let n = mdp.n_states();
    let n_actions = mdp.n_actions(agent);
    let codec = mdp.codec();
    let n_others = codec.n_others(agent);
    let v: Vec<f64> = (0..n)
        .map(|s| max_of(&q[s * n_actions..(s + 1) * n_actions]))
        .collect();
    for s in 0..n {
        for a in 0..n_actions {
            let mut best = f64::NEG_INFINITY;
            let mut best_o = 0;
            for o in 0..n_others {
                let value = mdp.backup(s, codec.compose(agent, a, o), &v);
                if value > best {
                    best = value;
                    best_o = o;
                }
            }
            out[s * n_actions + a] = best;
            argmax_others[s * n_actions + a] = best_o;
        }
    }
}

/// Iterates the exact best possible operator from the minimal return
/// `r_min / (1 - gamma)` until the sup-norm change is at most `tolerance`.
pub fn exact_best_possible_iteration(
    mdp: &JointMdp,
    agent: usize,
    tolerance: f64,
    max_iters: usize,
    reference: Option<&ProjectedQ>,
) -> Result<BestPossibleReport> {
    check_tolerance(tolerance)?;
    if agent >= mdp.n_agents() {
        return Err(Error::invalid(format!("agent {agent} out of range")));
    }
    let n = mdp.n_states();
    let n_actions = mdp.n_actions(agent);
    let init = mdp.r_min() / (1.0 - mdp.gamma());
    let mut q = vec![init; n * n_actions];
    let mut next = q.clone();
    let mut argmax_others = vec![0; n * n_actions];
    let diagnose = |q: &[f64], change: f64| BestPossibleStep {
        change,
        distance_to_ref: reference.map(|r| r.sup_distance(q)),
        excess_over_ref: reference.map(|r| {
            q.iter()
                .zip(r.values())
                .map(|(x, y)| x - y)
                .fold(f64::NEG_INFINITY, f64::max)
        }),
    };
    let mut trace = vec![diagnose(&q, f64::INFINITY)];
    for _ in 0..max_iters {
        best_possible_sweep(mdp, agent, &q, &mut next, &mut argmax_others);
        let change = sup_distance(&q, &next);
        std::mem::swap(&mut q, &mut next);
        trace.push(diagnose(&q, change));
        if change <= tolerance {
            return Ok(BestPossibleReport {
                q: ProjectedQ {
                    n_states: n,
                    n_actions,
                    values: q,
                    argmax_others,
                },
                trace,
            });
        }
    }
    Err(Error::NotConverged {
        what: "best possible iteration",
        iterations: max_iters,
        residual: trace.last().map(|t| t.change).unwrap_or(f64::INFINITY),
    })
}

/// Greedy joint profile of a joint Q-table, decoded per agent.
pub fn greedy_joint_profile(mdp: &JointMdp, q: &JointQ) -> DeterministicPolicyProfile {
    let codec = mdp.codec();
    let mut actions = vec![vec![0; mdp.n_states()]; mdp.n_agents()];
    let mut buf = vec![0; mdp.n_agents()];
    for s in 0..mdp.n_states() {
        codec.decode_into(q.argmax(s), &mut buf);
        for (agent, &a) in buf.iter().enumerate() {
            actions[agent][s] = a;
        }
    }
    DeterministicPolicyProfile::new(mdp, actions).expect("decoded actions are in range")
}

/// `E_{s0}[max_a Q(s0, a)]` of the converged joint Q-value.
pub fn optimal_return(mdp: &JointMdp) -> Result<f64> {
    let q = joint_value_iteration(mdp, ORACLE_TOLERANCE, ORACLE_MAX_ITERS)?;
    Ok(optimal_return_from(mdp, &q))
}

pub fn optimal_return_from(mdp: &JointMdp, q: &JointQ) -> f64 {
    mdp.initial_distribution()
        .iter()
        .enumerate()
        .map(|(s, p)| p * q.max(s))
        .sum()
}

/// State values of a deterministic joint profile, by iterative policy
/// evaluation.
pub fn policy_state_values(mdp: &JointMdp, profile: &DeterministicPolicyProfile) -> Result<Vec<f64>> {
    if profile.n_agents() != mdp.n_agents() {
        return Err(Error::DimensionMismatch {
            expected: mdp.n_agents(),
            actual: profile.n_agents(),
        });
    }
    let n = mdp.n_states();
    let joint: Vec<usize> = (0..n).map(|s| profile.joint_action(mdp.codec(), s)).collect();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..ORACLE_MAX_ITERS {
        for s in 0..n {
            next[s] = mdp.backup(s, joint[s], &v);
        }
        residual = sup_distance(&v, &next);
        std::mem::swap(&mut v, &mut next);
        if residual <= ORACLE_TOLERANCE {
            return Ok(v);
        }
    }
    Err(Error::NotConverged {
        what: "policy evaluation",
        iterations: ORACLE_MAX_ITERS,
        residual,
    })
}

/// Expected discounted return of a deterministic joint profile from the
/// initial distribution.
pub fn evaluate_joint_policy(mdp: &JointMdp, profile: &DeterministicPolicyProfile) -> Result<f64> {
    let v = policy_state_values(mdp, profile)?;
    Ok(mdp
        .initial_distribution()
        .iter()
        .zip(&v)
        .map(|(p, v)| p * v)
        .sum())
}

/// Precomputed ground truth for a game: optimal joint values, optimal
/// return and every agent's projected values.
#[derive(Debug, Clone)]
pub struct GameOracle {
    pub joint_q: JointQ,
    pub optimal_return: f64,
    pub projected: Vec<ProjectedQ>,
}

impl GameOracle {
    pub fn solve(mdp: &JointMdp) -> Result<Self> {
        let joint_q = joint_value_iteration(mdp, ORACLE_TOLERANCE, ORACLE_MAX_ITERS)?;
        let optimal_return = optimal_return_from(mdp, &joint_q);
        let projected = (0..mdp.n_agents())
            .map(|i| project_max(&joint_q, mdp.codec(), i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            joint_q,
            optimal_return,
            projected,
        })
    }

    /// Whether every state has a joint optimum separated by more than `gap`.
    pub fn unique_optimum(&self, gap: f64) -> bool {
        (0..self.joint_q.n_states()).all(|s| self.joint_q.has_unique_optimum(s, gap))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::generate_random_game;

    fn single_state(reward: f64, gamma: f64) -> JointMdp {
        JointMdp::new(vec![1], 1, vec![1.0], vec![reward], gamma, vec![1.0], 0.0, reward.max(1.0)).unwrap()
    }

    #[test]
    fn geometric_series_value() {
        let q = joint_value_iteration(&single_state(1.0, 0.5), 1e-12, 1000).unwrap();
        assert!((q.get(0, 0) - 2.0).abs() < 1e-11);
        assert!((optimal_return(&single_state(1.0, 0.5)).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn gamma_zero_is_expected_reward() {
        let g = generate_random_game(2, 3, 2, 0.0, 5).unwrap();
        let q = joint_value_iteration(&g, 1e-12, 10).unwrap();
        for s in 0..3 {
            for a in 0..4 {
                assert!((q.get(s, a) - g.expected_reward(s, a)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn non_convergence_reports_residual() {
        let g = generate_random_game(2, 3, 2, 0.99, 5).unwrap();
        match joint_value_iteration(&g, 1e-12, 3) {
            Err(Error::NotConverged { iterations, residual, .. }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
        assert!(joint_value_iteration(&g, 0.0, 3).is_err());
    }

    #[test]
    fn project_max_with_single_action_others_is_slice() {
        let g = JointMdp::new(vec![3, 1], 1, vec![1.0; 3], vec![0.5], 0.5, vec![1.0], 0.0, 1.0).unwrap();
        let mut q = JointQ::zeros(1, 3);
        q.values = vec![1.0, 3.0, 2.0];
        let p = project_max(&q, g.codec(), 0).unwrap();
        assert_eq!(p.row(0), &[1.0, 3.0, 2.0]);
        let p1 = project_max(&q, g.codec(), 1).unwrap();
        assert_eq!(p1.row(0), &[3.0]);
        assert_eq!(p1.best_others(0, 0), 1);
    }

    #[test]
    fn project_max_ties_go_to_smallest_index() {
        let codec = JointActionCodec::new(&[2, 2]);
        let mut q = JointQ::zeros(1, 4);
        q.values = vec![1.0, 1.0, 0.0, 0.0];
        let p = project_max(&q, &codec, 0).unwrap();
        assert_eq!(p.best_others(0, 0), 0);
        assert_eq!(p.best_others(0, 1), 0);
    }

    #[test]
    fn exact_iteration_gamma_zero_converges_in_one_sweep() {
        let g = generate_random_game(2, 3, 2, 0.0, 8).unwrap();
        let r = exact_best_possible_iteration(&g, 0, 1e-12, 10, None).unwrap();
        // One sweep reaches the fixed point, a second confirms zero change.
        assert!(r.trace.len() <= 3);
        for s in 0..3 {
            for a in 0..2 {
                let expect = (0..2)
                    .map(|o| g.expected_reward(s, g.codec().compose(0, a, o)))
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(r.q.get(s, a), expect);
            }
        }
    }

    #[test]
    fn exact_iteration_matches_projection() {
        for seed in 0..5 {
            let g = generate_random_game(2, 4, 3, 0.9, seed).unwrap();
            let oracle = GameOracle::solve(&g).unwrap();
            for agent in 0..2 {
                let r = exact_best_possible_iteration(&g, agent, 1e-12, 10_000, Some(&oracle.projected[agent])).unwrap();
                assert!(oracle.projected[agent].sup_distance(r.q.values()) < 1e-8);
            }
        }
    }

    #[test]
    fn greedy_profile_attains_optimal_return() {
        let g = generate_random_game(3, 5, 2, 0.9, 21).unwrap();
        let oracle = GameOracle::solve(&g).unwrap();
        let profile = greedy_joint_profile(&g, &oracle.joint_q);
        let value = evaluate_joint_policy(&g, &profile).unwrap();
        assert!((value - oracle.optimal_return).abs() < 1e-6);
    }

    #[test]
    fn single_state_policy_value() {
        let g = JointMdp::new(vec![2], 1, vec![1.0, 1.0], vec![0.25], 0.8, vec![1.0], 0.0, 1.0).unwrap();
        let profile = DeterministicPolicyProfile::new(&g, vec![vec![1]]).unwrap();
        let value = evaluate_joint_policy(&g, &profile).unwrap();
        assert!((value - 0.25 / 0.2).abs() < 1e-9);
    }
}
