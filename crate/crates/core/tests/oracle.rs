//! Oracle checks against independently coded brute-force references.

use bql_core::envs::make_one_stage_game;
use bql_core::game::{induced_transition, sample_initial_state, sample_step};
use bql_core::oracle::{
    evaluate_joint_policy, exact_best_possible_iteration, greedy_joint_profile, joint_value_iteration,
    joint_value_iteration_traced, optimal_return, project_max, GameOracle, ProjectedQ,
};
use bql_core::seed::rng_from_seed;
use bql_core::{generate_random_game, DeterministicPolicyProfile, JointMdp};
use proptest::prelude::*;

/// Value iteration over explicitly enumerated action tuples, written
/// without the library's codec or backup helpers.
fn brute_force_vi(mdp: &JointMdp, iters: usize) -> Vec<Vec<f64>> {
    let n = mdp.n_states();
    let sizes = mdp.actions_per_agent().to_vec();
    let tuples = enumerate(&sizes);
    let mut q = vec![vec![0.0; tuples.len()]; n];
    for _ in 0..iters {
        let v: Vec<f64> = q.iter().map(|row| row.iter().cloned().fold(f64::MIN, f64::max)).collect();
        let mut next = q.clone();
        for s in 0..n {
            for (j, tuple) in tuples.iter().enumerate() {
                // Flat index with agent 0 most significant.
                let flat = tuple.iter().zip(&sizes).fold(0, |acc, (a, k)| acc * k + a);
                assert_eq!(flat, j);
                let row = mdp.row(s, flat);
                next[s][j] = (0..n).map(|t| row[t] * (mdp.reward(s, t) + mdp.gamma() * v[t])).sum();
            }
        }
        q = next;
    }
    q
}

fn enumerate(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &k in sizes {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |a| {
                    let mut p = p.clone();
                    p.push(a);
                    p
                })
            })
            .collect();
    }
    out
}

#[test]
fn joint_vi_matches_brute_force() {
    for seed in 0..5 {
        let mdp = generate_random_game(2, 3, 2, 0.8, seed).unwrap();
        let q = joint_value_iteration(&mdp, 1e-13, 100_000).unwrap();
        let bf = brute_force_vi(&mdp, 400);
        for s in 0..3 {
            for j in 0..4 {
                assert!((q.get(s, j) - bf[s][j]).abs() < 1e-8, "seed {seed} s {s} j {j}");
            }
        }
    }
}

#[test]
fn project_max_matches_enumeration() {
    let mdp = generate_random_game(2, 4, 3, 0.9, 21).unwrap();
    let q = joint_value_iteration(&mdp, 1e-12, 100_000).unwrap();
    let tuples = enumerate(mdp.actions_per_agent());
    for agent in 0..2 {
        let p = project_max(&q, mdp.codec(), agent).unwrap();
        for s in 0..4 {
            for a in 0..3 {
                let best = tuples
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t[agent] == a)
                    .map(|(j, _)| q.get(s, j))
                    .fold(f64::MIN, f64::max);
                assert_eq!(p.get(s, a), best);
            }
        }
    }
}

#[test]
fn one_stage_projection_and_operator() {
    let mdp = make_one_stage_game().to_joint_mdp();
    let q = joint_value_iteration(&mdp, 1e-12, 1000).unwrap();
    for agent in 0..2 {
        let p = project_max(&q, mdp.codec(), agent).unwrap();
        assert_eq!(p.row(0), &[8.0, 0.0, 0.0]);
        let exact = exact_best_possible_iteration(&mdp, agent, 1e-12, 1000, None).unwrap();
        assert_eq!(exact.q.row(0), &[8.0, 0.0, 0.0]);
    }
    assert_eq!(optimal_return(&mdp).unwrap(), 8.0);
}

#[test]
fn exact_operator_converges_to_projection() {
    for seed in 0..10 {
        let mdp = generate_random_game(3, 5, 2, 0.9, 100 + seed).unwrap();
        let oracle = GameOracle::solve(&mdp).unwrap();
        for agent in 0..3 {
            let r = exact_best_possible_iteration(&mdp, agent, 1e-12, 100_000, Some(&oracle.projected[agent])).unwrap();
            assert!(oracle.projected[agent].sup_distance(r.q.values()) < 1e-8);
        }
    }
}

#[test]
fn optimal_return_equals_greedy_policy_value() {
    for seed in 0..5 {
        let mdp = generate_random_game(2, 6, 3, 0.9, 40 + seed).unwrap();
        let q = joint_value_iteration(&mdp, 1e-12, 100_000).unwrap();
        let profile = greedy_joint_profile(&mdp, &q);
        let v = evaluate_joint_policy(&mdp, &profile).unwrap();
        assert!((v - optimal_return(&mdp).unwrap()).abs() < 1e-6);
    }
}

#[test]
fn policy_value_matches_monte_carlo() {
    let mdp = generate_random_game(2, 4, 2, 0.8, 77).unwrap();
    let mut rng = rng_from_seed(3);
    let profile = DeterministicPolicyProfile::random(&mdp, &mut rng);
    let exact = evaluate_joint_policy(&mdp, &profile).unwrap();
    let episodes = 20_000;
    // 0.8^120 is negligible against the sampling error.
    let mut samples = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut s = sample_initial_state(&mdp, &mut rng);
        let (mut g, mut discount) = (0.0, 1.0);
        for _ in 0..120 {
            let (next, r) = sample_step(&mdp, s, profile.joint_action(mdp.codec(), s), &mut rng);
            g += discount * r;
            discount *= mdp.gamma();
            s = next;
        }
        samples.push(g);
    }
    let mean = samples.iter().sum::<f64>() / episodes as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (episodes - 1) as f64;
    let se = (var / episodes as f64).sqrt();
    assert!((mean - exact).abs() < 3.0 * se, "mc {mean} exact {exact} se {se}");
}

#[test]
fn individual_greedy_equals_joint_greedy_when_optimum_unique() {
    let mut checked = 0;
    for seed in 0..30 {
        let mdp = generate_random_game(3, 6, 3, 0.9, 500 + seed).unwrap();
        let oracle = GameOracle::solve(&mdp).unwrap();
        if !oracle.unique_optimum(1e-6) {
            continue;
        }
        checked += 1;
        let joint = greedy_joint_profile(&mdp, &oracle.joint_q);
        for agent in 0..3 {
            let r = exact_best_possible_iteration(&mdp, agent, 1e-12, 100_000, None).unwrap();
            for s in 0..6 {
                assert_eq!(r.q.greedy_action(s), joint.action(agent, s), "seed {seed} agent {agent} s {s}");
            }
        }
    }
    assert!(checked >= 20);
}

#[test]
fn induced_rows_per_pair_bounded_by_other_joint_actions() {
    let mdp = generate_random_game(3, 2, 2, 0.9, 8).unwrap();
    let agent = 1;
    let n_others = mdp.codec().n_others(agent);
    // Enumerate every deterministic profile of the other two agents.
    for s in 0..2 {
        for a in 0..2 {
            let mut rows: Vec<Vec<u64>> = Vec::new();
            for code in 0..16u32 {
                let mut actions = vec![vec![0; 2]; 3];
                let bits = [code & 1, (code >> 1) & 1, (code >> 2) & 1, (code >> 3) & 1];
                actions[0] = vec![bits[0] as usize, bits[1] as usize];
                actions[2] = vec![bits[2] as usize, bits[3] as usize];
                let profile = DeterministicPolicyProfile::new(&mdp, actions).unwrap();
                let p = induced_transition(&mdp, agent, &profile).unwrap();
                let key: Vec<u64> = p.row(s, a).iter().map(|x| x.to_bits()).collect();
                if !rows.contains(&key) {
                    rows.push(key);
                }
            }
            assert!(rows.len() <= n_others);
        }
    }
}

fn small_game() -> impl Strategy<Value = JointMdp> {
    (2usize..=3, 1usize..=6, 1usize..=3, any::<u64>())
        .prop_map(|(agents, states, actions, seed)| generate_random_game(agents, states, actions, 0.9, seed).unwrap())
}

fn reference(mdp: &JointMdp, agent: usize) -> ProjectedQ {
    let q = joint_value_iteration(mdp, 1e-12, 1_000_000).unwrap();
    project_max(&q, mdp.codec(), agent).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rows_sum_to_one(mdp in small_game()) {
        for s in 0..mdp.n_states() {
            for j in 0..mdp.n_joint() {
                let sum: f64 = mdp.row(s, j).iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-9);
                prop_assert!(mdp.row(s, j).iter().all(|p| *p >= 0.0));
            }
        }
    }

    #[test]
    fn exact_operator_contracts_and_stays_below_reference(mdp in small_game()) {
        for agent in 0..mdp.n_agents() {
            let r = reference(&mdp, agent);
            let report = exact_best_possible_iteration(&mdp, agent, 1e-12, 1_000_000, Some(&r)).unwrap();
            let gamma = mdp.gamma();
            for k in 1..report.trace.len() {
                let prev = report.trace[k - 1].distance_to_ref.unwrap();
                let cur = report.trace[k].distance_to_ref.unwrap();
                prop_assert!(cur <= gamma * prev + 1e-9, "k {} {} > {} * {}", k, cur, gamma, prev);
            }
            for step in &report.trace {
                prop_assert!(step.excess_over_ref.unwrap() <= 1e-9);
            }
        }
    }

    #[test]
    fn value_iteration_residuals_shrink(mdp in small_game()) {
        let report = joint_value_iteration_traced(&mdp, 1e-10, 1_000_000).unwrap();
        for w in report.residuals.windows(2) {
            prop_assert!(w[1] <= w[0] * mdp.gamma() + 1e-12);
        }
    }
}
