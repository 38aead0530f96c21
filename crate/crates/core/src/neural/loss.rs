//! Regression losses for the two networks of neural BQL, with gradients.

use serde::{Deserialize, Serialize};

use super::mlp::MlpQNetwork;
use crate::error::{Error, Result};
use crate::oracle::max_of;

/// One stored experience with state feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTransition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Scalar loss and its gradient in the network's flat parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

fn non_empty<T>(batch: &[T]) -> Result<()> {
    if batch.is_empty() {
        Err(Error::invalid("empty batch"))
    } else {
        Ok(())
    }
}

/// Mean of `w * (net(x)[a] - y)^2`, with `w = weight(current, target)`
/// held constant in the gradient.
fn weighted_regression<'a, I, W>(net: &MlpQNetwork, samples: I, n: usize, weight: W) -> Result<LossGrad>
where
    I: Iterator<Item = (&'a [f64], usize, f64)>,
    W: Fn(f64, f64) -> f64,
{
    let mut grad = vec![0.0; net.n_params()];
    let mut loss = 0.0;
    let mut d_out = vec![0.0; net.output_dim()];
    for (x, a, y) in samples {
        let cache = net.forward_cached(x)?;
        let current = cache.output()[a];
        let w = weight(current, y);
        let d = current - y;
        loss += w * d * d;
        if w == 0.0 {
            continue;
        }
        d_out.fill(0.0);
        d_out[a] = 2.0 * w * d / n as f64;
        net.backward(&cache, &d_out, &mut grad);
    }
    Ok(LossGrad {
        loss: loss / n as f64,
        grad,
    })
}

/// Plain mean squared error of `net(x)[a]` against fixed targets.
pub fn mse_loss_and_grad(net: &MlpQNetwork, inputs: &[&[f64]], actions: &[usize], targets: &[f64]) -> Result<LossGrad> {
    non_empty(inputs)?;
    if actions.len() != inputs.len() || targets.len() != inputs.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            actual: actions.len().min(targets.len()),
        });
    }
    let n = inputs.len();
    let mut grad = vec![0.0; net.n_params()];
    let mut loss = 0.0;
    for i in 0..n {
        let cache = net.forward_cached(inputs[i])?;
        let d = cache.output()[actions[i]] - targets[i];
        loss += d * d;
        let mut d_out = vec![0.0; net.output_dim()];
        d_out[actions[i]] = 2.0 * d / n as f64;
        net.backward(&cache, &d_out, &mut grad);
    }
    Ok(LossGrad {
        loss: loss / n as f64,
        grad,
    })
}

/// Loss of the expectation network: regress `Qe(s, a)` onto
/// `r + gamma * Q(s', argmax Q(s'))`, the target computed from the frozen
/// `q` network.
pub fn qe_loss_and_grad(
    net_e: &MlpQNetwork,
    q_frozen: &MlpQNetwork,
    batch: &[&FeatureTransition],
    gamma: f64,
) -> Result<LossGrad> {
    non_empty(batch)?;
    let mut targets = Vec::with_capacity(batch.len());
    for t in batch {
        let next = q_frozen.forward(&t.next_state)?;
        targets.push(t.reward + gamma * max_of(&next));
    }
    weighted_regression(
        net_e,
        batch.iter().zip(&targets).map(|(t, &y)| (t.state.as_slice(), t.action, y)),
        batch.len(),
        |_, _| 1.0,
    )
}

/// Loss of the main network: `w * (Q(s, a) - Qe_target(s, a))^2` with
/// `w = 1` when the target exceeds the current value and `lambda` otherwise.
pub fn qi_weighted_loss_and_grad(
    net_i: &MlpQNetwork,
    target_e: &MlpQNetwork,
    lambda: f64,
    batch: &[&FeatureTransition],
) -> Result<LossGrad> {
    non_empty(batch)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("lambda {lambda} not in [0,1]")));
    }
    let mut targets = Vec::with_capacity(batch.len());
    for t in batch {
        targets.push(target_e.forward(&t.state)?[t.action]);
    }
    weighted_regression(
        net_i,
        batch.iter().zip(&targets).map(|(t, &y)| (t.state.as_slice(), t.action, y)),
        batch.len(),
        |current, target| if target > current { 1.0 } else { lambda },
    )
}

/// Loss of neural IQL: regress `Q(s, a)` onto `r + gamma * max Q_target(s')`.
pub fn td_loss_and_grad(
    net: &MlpQNetwork,
    target: &MlpQNetwork,
    batch: &[&FeatureTransition],
    gamma: f64,
) -> Result<LossGrad> {
    non_empty(batch)?;
    let mut targets = Vec::with_capacity(batch.len());
    for t in batch {
        targets.push(t.reward + gamma * max_of(&target.forward(&t.next_state)?));
    }
    weighted_regression(
        net,
        batch.iter().zip(&targets).map(|(t, &y)| (t.state.as_slice(), t.action, y)),
        batch.len(),
        |_, _| 1.0,
    )
}
