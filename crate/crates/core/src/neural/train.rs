//! Training loops for neural BQL and the neural IQL baseline.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::loss::{qe_loss_and_grad, qi_weighted_loss_and_grad, td_loss_and_grad, FeatureTransition};
use super::mlp::MlpQNetwork;
use super::optim::{soft_update, OptimizerState};
use super::task::NeuralTask;
use crate::error::Result;
use crate::oracle::argmax;
use crate::record::RunRecord;
use crate::replay::RingBuffer;
use crate::seed::{derive_rng, stream, Rng};
use crate::tabular::{require, EpsilonSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralConfig {
    pub total_steps: u64,
    /// Weight of downward corrections in the main-network loss.
    pub lambda: f64,
    /// Soft target update rate.
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub epsilon: EpsilonSchedule,
    pub hidden_width: usize,
    pub learning_rate: f64,
    /// One gradient step per network every this many environment steps.
    pub update_every: u64,
    /// Environment steps collected before the first gradient step.
    pub learning_starts: u64,
    pub eval_every: u64,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        Self {
            total_steps: 100_000,
            lambda: 0.01,
            tau: 0.01,
            batch_size: 32,
            buffer_capacity: 50_000,
            epsilon: EpsilonSchedule::default(),
            hidden_width: 64,
            learning_rate: 1e-3,
            update_every: 1,
            learning_starts: 1000,
            eval_every: 5000,
        }
    }
}

impl NeuralConfig {
    pub fn validate(&self) -> Result<()> {
        require(self.total_steps > 0, "total_steps must be positive")?;
        require((0.0..=1.0).contains(&self.lambda), "lambda must be in [0,1]")?;
        require(self.tau > 0.0 && self.tau <= 1.0, "tau must be in (0,1]")?;
        require(self.batch_size > 0, "batch_size must be positive")?;
        require(self.buffer_capacity > 0, "buffer_capacity must be positive")?;
        require(self.hidden_width > 0, "hidden_width must be positive")?;
        require(self.learning_rate > 0.0, "learning_rate must be positive")?;
        require(self.update_every > 0, "update_every must be positive")?;
        require(self.eval_every > 0, "eval_every must be positive")?;
        self.epsilon.validate()
    }
}

/// Per-agent networks of neural BQL.
#[derive(Debug, Clone)]
pub struct NeuralBqlAgent {
    pub q: MlpQNetwork,
    /// Lagged copy of `q` used for the bootstrap in the `Qe` target.
    pub q_target: MlpQNetwork,
    pub qe: MlpQNetwork,
    pub qe_target: MlpQNetwork,
    opt_q: OptimizerState,
    opt_e: OptimizerState,
}

/// Per-agent networks of neural IQL.
#[derive(Debug, Clone)]
pub struct NeuralIqlAgent {
    pub q: MlpQNetwork,
    pub q_target: MlpQNetwork,
    opt: OptimizerState,
}

trait NeuralLearner {
    fn q(&self) -> &MlpQNetwork;
    fn train(&mut self, batch: &[&FeatureTransition], gamma: f64, config: &NeuralConfig) -> Result<()>;
}

impl NeuralBqlAgent {
    pub fn new(input: usize, n_actions: usize, config: &NeuralConfig, rng: &mut Rng) -> Result<Self> {
        let q = MlpQNetwork::two_hidden(input, config.hidden_width, n_actions, rng)?;
        let qe = MlpQNetwork::two_hidden(input, config.hidden_width, n_actions, rng)?;
        Ok(Self {
            opt_q: OptimizerState::adam(q.n_params(), config.learning_rate),
            opt_e: OptimizerState::adam(qe.n_params(), config.learning_rate),
            qe_target: qe.clone(),
            q_target: q.clone(),
            q,
            qe,
        })
    }
}

impl NeuralLearner for NeuralBqlAgent {
    fn q(&self) -> &MlpQNetwork {
        &self.q
    }

    fn train(&mut self, batch: &[&FeatureTransition], gamma: f64, config: &NeuralConfig) -> Result<()> {
        let e = qe_loss_and_grad(&self.qe, &self.q_target, batch, gamma)?;
        self.opt_e.apply(self.qe.params_mut(), &e.grad)?;
        let i = qi_weighted_loss_and_grad(&self.q, &self.qe_target, config.lambda, batch)?;
        self.opt_q.apply(self.q.params_mut(), &i.grad)?;
        soft_update(&mut self.qe_target, &self.qe, config.tau)?;
        soft_update(&mut self.q_target, &self.q, config.tau)
    }
}

impl NeuralIqlAgent {
    pub fn new(input: usize, n_actions: usize, config: &NeuralConfig, rng: &mut Rng) -> Result<Self> {
        let q = MlpQNetwork::two_hidden(input, config.hidden_width, n_actions, rng)?;
        Ok(Self {
            opt: OptimizerState::adam(q.n_params(), config.learning_rate),
            q_target: q.clone(),
            q,
        })
    }
}

impl NeuralLearner for NeuralIqlAgent {
    fn q(&self) -> &MlpQNetwork {
        &self.q
    }

    fn train(&mut self, batch: &[&FeatureTransition], gamma: f64, config: &NeuralConfig) -> Result<()> {
        let lg = td_loss_and_grad(&self.q, &self.q_target, batch, gamma)?;
        self.opt.apply(self.q.params_mut(), &lg.grad)?;
        soft_update(&mut self.q_target, &self.q, config.tau)
    }
}

/// Result of a neural training run.
#[derive(Debug, Clone)]
pub struct NeuralRun {
    pub record: RunRecord,
    /// Final main network of each agent.
    pub q: Vec<MlpQNetwork>,
    /// Largest greedy value `max_a Q_i(s0, a)` seen at the last evaluation,
    /// over agents and the evaluation start states.
    pub max_q_estimate: f64,
}

fn greedy(net: &MlpQNetwork, x: &[f64]) -> usize {
    argmax(&net.forward(x).expect("feature dimension checked at construction"))
}

fn run<T: NeuralTask, L: NeuralLearner>(
    task: &T,
    config: &NeuralConfig,
    seed: u64,
    name: &str,
    mut agents: Vec<L>,
    mut rngs: Vec<Rng>,
) -> Result<NeuralRun> {
    let n_agents = task.n_agents();
    let mut buffers: Vec<RingBuffer<FeatureTransition>> = (0..n_agents)
        .map(|_| RingBuffer::new(config.buffer_capacity))
        .collect();
    let mut env_rng = derive_rng(seed, &[stream::ENV]);
    let mut record = RunRecord::new(name, seed);
    let mut state = task.reset(&mut env_rng);
    let mut features = task.features(&state);
    let mut t_episode = 0;
    let mut actions = vec![0; n_agents];
    let mut max_q = f64::NEG_INFINITY;
    let gamma = task.gamma();

    for t in 0..config.total_steps {
        let eps = config.epsilon.value(t, config.total_steps);
        for (i, slot) in actions.iter_mut().enumerate() {
            let rng = &mut rngs[i];
            *slot = if eps > 0.0 && rng.gen::<f64>() < eps {
                rng.gen_range(0..task.n_actions(i))
            } else {
                greedy(agents[i].q(), &features)
            };
        }
        let (next, r) = task.step(&state, &actions, &mut env_rng);
        let next_features = task.features(&next);
        for i in 0..n_agents {
            buffers[i].push(FeatureTransition {
                state: features.clone(),
                action: actions[i],
                reward: r,
                next_state: next_features.clone(),
            });
        }
        t_episode += 1;
        if t_episode >= task.horizon() {
            t_episode = 0;
            state = task.reset(&mut env_rng);
            features = task.features(&state);
        } else {
            state = next;
            features = next_features;
        }

        let steps = t + 1;
        if steps >= config.learning_starts && steps % config.update_every == 0 {
            for i in 0..n_agents {
                let idx = buffers[i].sample_indices(config.batch_size, &mut rngs[i]);
                let batch: Vec<&FeatureTransition> = idx.iter().map(|&k| buffers[i].get(k)).collect();
                agents[i].train(&batch, gamma, config)?;
            }
        }
        if steps % config.eval_every == 0 || steps == config.total_steps {
            let policy = |i: usize, x: &[f64]| greedy(agents[i].q(), x);
            let (ret, norm) = task.evaluate(&policy, seed)?;
            record.push(steps, ret, norm);
            max_q = f64::NEG_INFINITY;
            let mut probe = derive_rng(seed, &[stream::EVAL, 1]);
            for _ in 0..16 {
                let x = task.features(&task.reset(&mut probe));
                for a in &agents {
                    max_q = max_q.max(crate::oracle::max_of(&a.q().forward(&x)?));
                }
            }
        }
    }
    Ok(NeuralRun {
        record,
        q: agents.iter().map(|a| a.q().clone()).collect(),
        max_q_estimate: max_q,
    })
}

fn agent_rngs(seed: u64, n: usize) -> Vec<Rng> {
    (0..n).map(|i| derive_rng(seed, &[stream::AGENT, i as u64])).collect()
}

/// Neural BQL: per step, one gradient step on the expectation network, one
/// on the lambda-weighted main-network loss, then a soft target update.
pub fn bql_neural_train<T: NeuralTask>(task: &T, config: &NeuralConfig, seed: u64) -> Result<NeuralRun> {
    config.validate()?;
    let mut rngs = agent_rngs(seed, task.n_agents());
    let agents = (0..task.n_agents())
        .map(|i| NeuralBqlAgent::new(task.feature_dim(), task.n_actions(i), config, &mut rngs[i]))
        .collect::<Result<Vec<_>>>()?;
    run(task, config, seed, "bql_neural", agents, rngs)
}

/// Independent deep Q-learning with a soft-updated target network.
pub fn iql_neural_train<T: NeuralTask>(task: &T, config: &NeuralConfig, seed: u64) -> Result<NeuralRun> {
    config.validate()?;
    let mut rngs = agent_rngs(seed, task.n_agents());
    let agents = (0..task.n_agents())
        .map(|i| NeuralIqlAgent::new(task.feature_dim(), task.n_actions(i), config, &mut rngs[i]))
        .collect::<Result<Vec<_>>>()?;
    run(task, config, seed, "iql_neural", agents, rngs)
}
