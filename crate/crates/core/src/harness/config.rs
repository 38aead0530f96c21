//! Experiment configuration documents.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::envs::{make_coordination_game, make_one_stage_game, wrap_shaped_reward, DifferentialGameEnv};
use crate::error::{Error, Result};
use crate::game::{generate_deterministic_game, generate_random_game, JointMdp};
use crate::neural::{DifferentialTask, NeuralConfig};
use crate::seed::{derive_seed, stream};
use crate::tabular::{BqlConfig, BqlSingleConfig, HystereticConfig, IqlConfig, Ma2qlConfig};

/// A learner together with its hyperparameters, tagged by `name`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum LearnerSpec {
    Bql(BqlConfig),
    BqlSingle(BqlSingleConfig),
    Iql(IqlConfig),
    HystereticIql(HystereticConfig),
    Ma2ql(Ma2qlConfig),
    Jql(IqlConfig),
    BqlNeural(NeuralConfig),
    IqlNeural(NeuralConfig),
}

impl LearnerSpec {
    pub const NAMES: [&'static str; 8] = [
        "bql",
        "bql_single",
        "iql",
        "hysteretic_iql",
        "ma2ql",
        "jql",
        "bql_neural",
        "iql_neural",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::Bql(_) => "bql",
            LearnerSpec::BqlSingle(_) => "bql_single",
            LearnerSpec::Iql(_) => "iql",
            LearnerSpec::HystereticIql(_) => "hysteretic_iql",
            LearnerSpec::Ma2ql(_) => "ma2ql",
            LearnerSpec::Jql(_) => "jql",
            LearnerSpec::BqlNeural(_) => "bql_neural",
            LearnerSpec::IqlNeural(_) => "iql_neural",
        }
    }

    /// Default hyperparameters for a registered learner name.
    pub fn default_for(name: &str) -> Result<Self> {
        Ok(match name {
            "bql" => LearnerSpec::Bql(BqlConfig::default()),
            "bql_single" => LearnerSpec::BqlSingle(BqlSingleConfig::default()),
            "iql" => LearnerSpec::Iql(IqlConfig::default()),
            "hysteretic_iql" => LearnerSpec::HystereticIql(HystereticConfig::default()),
            "ma2ql" => LearnerSpec::Ma2ql(Ma2qlConfig::default()),
            "jql" => LearnerSpec::Jql(IqlConfig::default()),
            "bql_neural" => LearnerSpec::BqlNeural(NeuralConfig::default()),
            "iql_neural" => LearnerSpec::IqlNeural(NeuralConfig::default()),
            other => return Err(unknown_learner(other)),
        })
    }

    pub fn is_neural(&self) -> bool {
        matches!(self, LearnerSpec::BqlNeural(_) | LearnerSpec::IqlNeural(_))
    }
}

fn unknown_learner(name: &str) -> Error {
    Error::config(format!(
        "unknown learner `{name}` (expected one of {})",
        LearnerSpec::NAMES.join(", ")
    ))
}

/// Which game(s) to run on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    /// Randomly generated stochastic games, one per game index.
    Random {
        n_agents: usize,
        n_states: usize,
        n_actions: usize,
        gamma: f64,
    },
    /// Random games with deterministic transitions.
    Deterministic {
        n_agents: usize,
        n_states: usize,
        n_actions: usize,
        gamma: f64,
    },
    /// The 3x3 one-stage game with a penalized optimum.
    OneStage,
    /// 2x2 game with two optimal joint actions.
    Coordination { delta: f64 },
    /// Three-agent differential game with discretized actions.
    Differential {
        beta: f64,
        #[serde(default = "default_differential_actions")]
        n_actions: usize,
        #[serde(default = "default_horizon")]
        horizon: usize,
        #[serde(default = "default_differential_gamma")]
        gamma: f64,
        #[serde(default = "default_eval_episodes")]
        eval_episodes: usize,
    },
}

fn default_differential_actions() -> usize {
    9
}

fn default_horizon() -> usize {
    100
}

fn default_differential_gamma() -> f64 {
    0.99
}

fn default_eval_episodes() -> usize {
    10
}

impl EnvSpec {
    pub fn desk_suite() -> Self {
        EnvSpec::Random {
            n_agents: 3,
            n_states: 10,
            n_actions: 3,
            gamma: 0.95,
        }
    }

    pub fn paper_suite() -> Self {
        EnvSpec::Random {
            n_agents: 4,
            n_states: 30,
            n_actions: 4,
            gamma: 0.99,
        }
    }
}

/// A built environment instance.
#[derive(Debug, Clone)]
pub enum Environment {
    Game(JointMdp),
    Differential(DifferentialTask),
}

/// Full description of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub learner: LearnerSpec,
    pub env: EnvSpec,
    #[serde(default = "one")]
    pub n_games: usize,
    #[serde(default = "one")]
    pub n_seeds: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// When set, every game's reward gets a fixed random positive bonus of
    /// at most `(1 - gamma) * eps_tol`.
    #[serde(default)]
    pub eps_tol: Option<f64>,
    /// Episode length for neural learners on tabular games.
    #[serde(default = "default_horizon")]
    pub neural_horizon: usize,
    #[serde(default = "default_output")]
    pub output: String,
}

fn one() -> usize {
    1
}

fn default_output() -> String {
    "out".to_string()
}

/// Parameters `sweep` can vary.
pub const SWEEPABLE: [&str; 5] = ["lambda", "buffer_capacity", "subset_fraction", "alpha", "eps_tol"];

impl ExperimentConfig {
    pub fn new(learner: LearnerSpec, env: EnvSpec) -> Self {
        Self {
            learner,
            env,
            n_games: 1,
            n_seeds: 1,
            master_seed: 0,
            eps_tol: None,
            neural_horizon: default_horizon(),
            output: default_output(),
        }
    }

    /// Named starting points: `desk` (10 games of 3 agents, 10 states,
    /// 3 actions) and `paper` (20 games of 4 agents, 30 states, 4 actions).
    pub fn preset(name: &str) -> Result<Self> {
        let (env, n_games) = match name {
            "desk" => (EnvSpec::desk_suite(), 10),
            "paper" => (EnvSpec::paper_suite(), 20),
            other => return Err(Error::config(format!("unknown preset `{other}` (expected desk or paper)"))),
        };
        Ok(Self {
            n_games,
            n_seeds: 4,
            ..Self::new(LearnerSpec::Bql(BqlConfig::default()), env)
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        Self::from_value(value)
    }

    /// Parses a JSON value, reporting unknown learners by name.
    pub fn from_value(value: Value) -> Result<Self> {
        if let Some(name) = value.get("learner").and_then(|l| l.get("name")).and_then(Value::as_str) {
            if !LearnerSpec::NAMES.contains(&name) {
                return Err(unknown_learner(name));
            }
        }
        let config: Self = serde_json::from_value(value).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_games == 0 || self.n_seeds == 0 {
            return Err(Error::config("n_games and n_seeds must be positive"));
        }
        if self.neural_horizon == 0 {
            return Err(Error::config("neural_horizon must be positive"));
        }
        if let Some(eps) = self.eps_tol {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::config(format!("eps_tol {eps} must be positive")));
            }
        }
        match &self.env {
            EnvSpec::Random { n_agents, n_states, n_actions, gamma }
            | EnvSpec::Deterministic { n_agents, n_states, n_actions, gamma } => {
                if *n_agents == 0 || *n_states == 0 || *n_actions == 0 {
                    return Err(Error::config("game dimensions must be positive"));
                }
                if !(0.0..1.0).contains(gamma) {
                    return Err(Error::config(format!("gamma {gamma} not in [0,1)")));
                }
            }
            EnvSpec::Coordination { delta } if !(*delta > 0.0) => {
                return Err(Error::config("coordination delta must be positive"));
            }
            EnvSpec::Differential { .. } => {
                if !self.learner.is_neural() {
                    return Err(Error::config(format!(
                        "learner `{}` needs a tabular game; the differential game takes bql_neural or iql_neural",
                        self.learner.name()
                    )));
                }
                if self.eps_tol.is_some() {
                    return Err(Error::config("eps_tol applies to tabular games only"));
                }
            }
            _ => {}
        }
        match &self.learner {
            LearnerSpec::Bql(c) => c.validate(),
            LearnerSpec::BqlSingle(c) => c.base.validate(),
            LearnerSpec::Iql(c) | LearnerSpec::Jql(c) => c.validate(),
            LearnerSpec::HystereticIql(c) => c.base.validate(),
            LearnerSpec::Ma2ql(_) => Ok(()),
            LearnerSpec::BqlNeural(c) | LearnerSpec::IqlNeural(c) => c.validate(),
        }
    }

    /// Stable short hash of the canonical config JSON.
    pub fn fingerprint(&self) -> Result<String> {
        crate::record::config_fingerprint(self)
    }

    pub fn game_seed(&self, game: usize) -> u64 {
        derive_seed(self.master_seed, &[stream::GAME, game as u64])
    }

    pub fn run_seed(&self, game: usize, seed: usize) -> u64 {
        derive_seed(self.master_seed, &[stream::RUN, game as u64, seed as u64])
    }

    /// Builds game `game` of the suite, with shaping applied if configured.
    pub fn build_env(&self, game: usize) -> Result<Environment> {
        let seed = self.game_seed(game);
        let mdp = match &self.env {
            EnvSpec::Random { n_agents, n_states, n_actions, gamma } => {
                generate_random_game(*n_agents, *n_states, *n_actions, *gamma, seed)?
            }
            EnvSpec::Deterministic { n_agents, n_states, n_actions, gamma } => {
                generate_deterministic_game(*n_agents, *n_states, *n_actions, *gamma, seed)?
            }
            EnvSpec::OneStage => make_one_stage_game().to_joint_mdp(),
            EnvSpec::Coordination { delta } => make_coordination_game(*delta)?.to_joint_mdp(),
            EnvSpec::Differential { beta, n_actions, horizon, gamma, eval_episodes } => {
                let env = DifferentialGameEnv::new(*beta, *n_actions, *horizon)?;
                return Ok(Environment::Differential(DifferentialTask::new(env, *gamma, *eval_episodes)?));
            }
        };
        let mdp = match self.eps_tol {
            Some(eps) => wrap_shaped_reward(&mdp, eps, derive_seed(seed, &[stream::SHAPING]))?,
            None => mdp,
        };
        Ok(Environment::Game(mdp))
    }

    /// Copy with one sweepable parameter replaced.
    pub fn with_parameter(&self, parameter: &str, value: f64) -> Result<Self> {
        if !SWEEPABLE.contains(&parameter) {
            return Err(Error::config(format!(
                "`{parameter}` is not sweepable (expected one of {})",
                SWEEPABLE.join(", ")
            )));
        }
        let mut doc = serde_json::to_value(self)?;
        if parameter == "eps_tol" {
            doc["eps_tol"] = Value::from(value);
        } else {
            let learner = doc
                .get_mut("learner")
                .and_then(Value::as_object_mut)
                .expect("learner serializes as an object");
            let key = if parameter == "lambda" && !learner.contains_key("lambda") {
                "lambda_h"
            } else {
                parameter
            };
            let slot = learner.get_mut(key).ok_or_else(|| {
                Error::config(format!("learner `{}` has no parameter `{parameter}`", self.learner.name()))
            })?;
            *slot = if slot.is_u64() {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::config(format!("`{parameter}` needs a non-negative integer, got {value}")));
                }
                Value::from(value as u64)
            } else {
                Value::from(value)
            };
        }
        Self::from_value(doc)
    }
}

/// Recursively overlays `patch` onto `base` (objects merge, other values
/// replace).
pub fn merge_json(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge_json(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tagged_learner() {
        let c = ExperimentConfig::from_json(
            r#"{"learner":{"name":"hysteretic_iql","lambda_h":0.0,"alpha":1.0},"env":{"kind":"one_stage"}}"#,
        )
        .unwrap();
        match c.learner {
            LearnerSpec::HystereticIql(h) => {
                assert_eq!(h.lambda_h, 0.0);
                assert_eq!(h.base.alpha, 1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_learner_is_config_error() {
        let e = ExperimentConfig::from_json(r#"{"learner":{"name":"vdn"},"env":{"kind":"one_stage"}}"#).unwrap_err();
        assert!(matches!(e, Error::Config(m) if m.contains("vdn")));
    }

    #[test]
    fn rejects_unknown_fields() {
        assert!(ExperimentConfig::from_json(r#"{"learner":{"name":"bql","typo":1},"env":{"kind":"one_stage"}}"#).is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = ExperimentConfig::preset("desk").unwrap();
        assert_eq!(ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap(), c);
    }

    #[test]
    fn sweep_parameter_substitution() {
        let c = ExperimentConfig::preset("desk").unwrap();
        let d = c.with_parameter("buffer_capacity", 200.0).unwrap();
        assert!(matches!(d.learner, LearnerSpec::Bql(ref b) if b.buffer_capacity == 200));
        assert!(c.with_parameter("alpha", 0.5).is_err());
        assert!(c.with_parameter("gamma", 0.5).is_err());
        let h = ExperimentConfig::new(LearnerSpec::default_for("hysteretic_iql").unwrap(), EnvSpec::OneStage);
        assert!(matches!(h.with_parameter("lambda", 0.0).unwrap().learner, LearnerSpec::HystereticIql(ref x) if x.lambda_h == 0.0));
        assert_eq!(c.with_parameter("eps_tol", 0.01).unwrap().eps_tol, Some(0.01));
    }

    #[test]
    fn differential_needs_neural_learner() {
        let c = r#"{"learner":{"name":"iql"},"env":{"kind":"differential","beta":0.4}}"#;
        assert!(ExperimentConfig::from_json(c).is_err());
    }

    #[test]
    fn merge_overlays_nested_objects() {
        let mut a: Value = serde_json::json!({"x": {"y": 1, "z": 2}, "w": 3});
        merge_json(&mut a, serde_json::json!({"x": {"y": 5}}));
        assert_eq!(a, serde_json::json!({"x": {"y": 5, "z": 2}, "w": 3}));
    }
}
