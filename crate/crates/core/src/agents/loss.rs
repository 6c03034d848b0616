use super::{Actor, Transition};
use crate::neural::{Gradients, Tape, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct LossOutput {
    /// Batch mean of `γ·log π − r`, the quantity being minimised.
    pub objective: f64,
    /// Mean policy entropy over the batch states.
    pub entropy: f64,
    pub grads: Gradients,
}

/// Detached per-sample weights `w_b` of the surrogate `Σ_b w_b·log π_b`.
///
/// The score-function factor is `γ·log π_b − r_b`; with `baseline` on it is
/// centred on its batch mean, which leaves the expected gradient unchanged
/// and removes the large common offset `γ·E[log π]`. The extra `γ` is the
/// direct derivative of the `γ·log π` term.
pub fn surrogate_weights(logp: &[f64], rewards: &[f64], gamma: f64, baseline: bool) -> Vec<f64> {
    let n = logp.len() as f64;
    let mut factor: Vec<f64> = logp.iter().zip(rewards).map(|(lp, r)| gamma * lp - r).collect();
    if baseline {
        let mean = factor.iter().sum::<f64>() / n;
        factor.iter_mut().for_each(|f| *f -= mean);
    }
    factor.into_iter().map(|f| (f + gamma) / n).collect()
}

/// Policy loss on a mini-batch; `log π` is recomputed by the current
/// network at the stored raw actions.
pub fn actor_loss(actor: &Actor, batch: &[&Transition], gamma: f64, baseline: bool) -> Result<LossOutput> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if let Some(t) = batch.iter().find(|t| t.kind != actor.kind) {
        return Err(Error::Dimension(format!("{:?} transition in a {:?} batch", t.kind, actor.kind)));
    }
    let states: Vec<_> = batch.iter().map(|t| &t.state).collect();
    let actions: Vec<&[f64]> = batch.iter().map(|t| t.action.as_slice()).collect();
    let rewards: Vec<f64> = batch.iter().map(|t| t.reward).collect();

    let mut tape = Tape::new();
    let heads = actor.forward(&mut tape, actor.input_tensor(&states)?)?;
    let logp = actor.log_prob(&mut tape, &heads, &actions)?;
    let lp = tape.value(logp).data().to_vec();
    let n = lp.len() as f64;
    let objective = lp.iter().zip(&rewards).map(|(l, r)| gamma * l - r).sum::<f64>() / n;
    let entropy = [heads.log_std_re, heads.log_std_im]
        .iter()
        .flat_map(|h| tape.value(*h).data().iter())
        .map(|s| super::actor::gaussian_entropy(*s))
        .sum::<f64>()
        / n;
    let w = Tensor::new(&[lp.len()], surrogate_weights(&lp, &rewards, gamma, baseline))?;
    let loss = tape.dot(logp, w)?;
    let grads = tape.backward(loss)?;
    Ok(LossOutput { objective, entropy, grads })
}
