//! Finite-difference check of an actor's analytic gradients.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Actor, AgentState};
use crate::neural::{Tape, Tensor};
use crate::Result;

/// A fixed probe: states, stored actions, and the standard draws and
/// weights that turn the network outputs into one scalar.
struct Probe {
    input: Tensor,
    actions: Vec<Vec<f64>>,
    eps: [Tensor; 2],
    w_logp: Tensor,
    w_action: [Tensor; 2],
    w_sample_logp: Tensor,
}

impl Probe {
    fn new<R: Rng + ?Sized>(actor: &Actor, states: &[&AgentState], actions: &[Vec<f64>], rng: &mut R) -> Result<Self> {
        let (b, a) = (states.len(), actor.action_dim());
        let mut normal = |shape: &[usize]| Tensor::new(shape, (0..shape.iter().product()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
        let eps = [normal(&[b, a])?, normal(&[b, a])?];
        let w_action = [normal(&[b, a])?, normal(&[b, a])?];
        let w_logp = normal(&[b])?;
        let w_sample_logp = normal(&[b])?;
        Ok(Probe { input: actor.input_tensor(states)?, actions: actions.to_vec(), eps, w_logp, w_action, w_sample_logp })
    }

    /// Scalar combining the fixed-action log-density and a
    /// reparameterised draw with its log-density, so every head and both
    /// Gaussian paths carry gradient.
    fn loss<'p>(&self, actor: &'p Actor, tape: &mut Tape<'p>) -> Result<crate::neural::NodeId> {
        let heads = actor.forward(tape, self.input.clone())?;
        let acts: Vec<&[f64]> = self.actions.iter().map(|a| a.as_slice()).collect();
        let lp = actor.log_prob(tape, &heads, &acts)?;
        let mut total = tape.dot(lp, self.w_logp.clone())?;
        let (re, lre) = tape.gaussian_sample_with(heads.mu_re, heads.log_std_re, self.eps[0].clone())?;
        let (im, lim) = tape.gaussian_sample_with(heads.mu_im, heads.log_std_im, self.eps[1].clone())?;
        let lps = tape.add(lre, lim)?;
        for term in [
            tape.dot(re, self.w_action[0].clone())?,
            tape.dot(im, self.w_action[1].clone())?,
            tape.dot(lps, self.w_sample_logp.clone())?,
        ] {
            total = tape.add(total, term)?;
        }
        Ok(total)
    }

    fn value(&self, actor: &Actor) -> Result<(f64, Vec<bool>)> {
        let mut tape = Tape::new();
        let l = self.loss(actor, &mut tape)?;
        Ok((tape.value(l).item(), tape.active_set()))
    }
}

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Worst relative error `|g − ĝ| / max(|g|, |ĝ|, floor)`.
    pub max_rel_error: f64,
    /// Coordinates compared.
    pub checked: usize,
    /// Coordinates redrawn because the ±step evaluations fell on different
    /// sides of a ReLU or clamp kink, where a central difference does not
    /// estimate the derivative.
    pub skipped: usize,
}

/// Compares analytic and central-difference derivatives on `per_layer`
/// randomly chosen weights and biases of every layer.
pub fn check_gradients<R: Rng + ?Sized>(
    actor: &Actor,
    states: &[&AgentState],
    actions: &[Vec<f64>],
    per_layer: usize,
    step: f64,
    rng: &mut R,
) -> Result<GradCheck> {
    const FLOOR: f64 = 1e-6;
    let probe = Probe::new(actor, states, actions, rng)?;
    let grads = {
        let mut tape = Tape::new();
        let l = probe.loss(actor, &mut tape)?;
        tape.backward(l)?
    };
    let (_, base_set) = probe.value(actor)?;
    let mut work = actor.clone();
    let mut out = GradCheck { max_rel_error: 0.0, checked: 0, skipped: 0 };
    for li in 0..actor.layers().len() {
        let name = actor.layers()[li].name.clone();
        let g = grads.layer(&name).cloned();
        for bias in [false, true] {
            let len = if bias { actor.layers()[li].bias.len() } else { actor.layers()[li].weight.len() };
            let want = per_layer.min(len);
            // Candidates in random order; kink-crossing ones are passed over.
            let order = rand::seq::index::sample(rng, len, len.min(want * 16));
            let mut done = 0;
            for i in order {
                if done == want {
                    break;
                }
                let analytic = g.as_ref().map_or(0.0, |g| if bias { g.bias.data()[i] } else { g.weight.data()[i] });
                let orig = param(&work, li, bias, i);
                set_param(&mut work, li, bias, i, orig + step);
                let (up, up_set) = probe.value(&work)?;
                set_param(&mut work, li, bias, i, orig - step);
                let (down, down_set) = probe.value(&work)?;
                set_param(&mut work, li, bias, i, orig);
                if up_set != base_set || down_set != base_set {
                    out.skipped += 1;
                    continue;
                }
                let fd = (up - down) / (2.0 * step);
                let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(FLOOR);
                out.max_rel_error = out.max_rel_error.max(rel);
                out.checked += 1;
                done += 1;
            }
        }
    }
    Ok(out)
}

/// Worst relative error of [`check_gradients`].
pub fn max_relative_gradient_error<R: Rng + ?Sized>(
    actor: &Actor,
    states: &[&AgentState],
    actions: &[Vec<f64>],
    per_layer: usize,
    step: f64,
    rng: &mut R,
) -> Result<f64> {
    Ok(check_gradients(actor, states, actions, per_layer, step, rng)?.max_rel_error)
}

fn param(a: &Actor, li: usize, bias: bool, i: usize) -> f64 {
    let l = &a.layers()[li];
    if bias {
        l.bias.data()[i]
    } else {
        l.weight.data()[i]
    }
}

fn set_param(a: &mut Actor, li: usize, bias: bool, i: usize, v: f64) {
    let l = &mut a.layers_mut()[li];
    if bias {
        l.bias.data_mut()[i] = v;
    } else {
        l.weight.data_mut()[i] = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{encode_state, ActorKind, Scaling};
    use crate::channel::complex_normal_row;
    use crate::seed::SeedTree;

    #[test]
    fn small_actor_gradients_match_finite_differences() {
        let mut rng = SeedTree::new(11).rng();
        let actor = Actor::new(ActorKind::Hab, 2, 4, Scaling { csi: 1.0, beam: 1.0, action: 1.0 }, &mut rng).unwrap();
        let states: Vec<AgentState> = (0..3)
            .map(|_| {
                let rows: Vec<_> = (0..2).map(|_| complex_normal_row(4, &mut rng)).collect();
                encode_state(&rows.iter().collect::<Vec<_>>(), None, 2, 4).unwrap()
            })
            .collect();
        let actions: Vec<Vec<f64>> = (0..3).map(|_| (0..16).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let refs: Vec<&AgentState> = states.iter().collect();
        let err = max_relative_gradient_error(&actor, &refs, &actions, 6, 1e-5, &mut rng).unwrap();
        assert!(err < 1e-4, "{err}");
    }
}
