use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AgentState;
use crate::channel::{free_space_db, ChannelParams};
use crate::neural::{adam_step, AdamConfig, Gradients, LayerKind, LayerParams, NodeId, Tape, Tensor, HALF_LN_2PI, LOG_STD_MAX, LOG_STD_MIN};
use crate::radio::{BeamformingMatrix, RadioParams};
use crate::scenario::{ScenarioConfig, HAPS};
use crate::{Error, Result, C64};

pub const CONV_CHANNELS: usize = 16;
pub const HIDDEN_UNITS: usize = 512;
pub const KERNEL: usize = 3;

const LAYER_NAMES: [&str; 7] = ["conv1", "conv2", "dense", "mu_re", "log_std_re", "mu_im", "log_std_im"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActorKind {
    Hab,
    Haps,
}

impl ActorKind {
    pub fn prefix(self) -> &'static str {
        match self {
            ActorKind::Hab => "hab",
            ActorKind::Haps => "haps",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    /// Draw from the policy.
    Sample,
    /// Use the policy mean.
    Mean,
}

/// Fixed normalisation between physical units and network units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    /// Multiplies CSI entries on the way in.
    pub csi: f64,
    /// Multiplies previous-beam entries on the way in.
    pub beam: f64,
    /// Multiplies raw actions on the way out (amplitude per real coefficient).
    pub action: f64,
}

impl Scaling {
    /// CSI is normalised by the free-space gain at the platform's own
    /// altitude; actions are scaled so a unit-variance draw carries about
    /// the baseline power per beam.
    pub fn for_station(altitude_m: f64, antennas: usize, beam_power_w: f64, channel: &ChannelParams) -> Result<Self> {
        let l_ref = 10f64.powf(free_space_db(altitude_m, channel.f_c_hz, channel.c_mps)? / 10.0);
        let action = (beam_power_w / (2.0 * antennas as f64)).sqrt();
        Ok(Scaling { csi: 1.0 / l_ref.sqrt(), beam: 1.0 / action, action })
    }
}

/// Head outputs of one forward pass, each `[batch, rows·antennas]`.
#[derive(Debug, Clone, Copy)]
pub struct Heads {
    pub mu_re: NodeId,
    pub log_std_re: NodeId,
    pub mu_im: NodeId,
    pub log_std_im: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActOutput {
    /// `[Re | Im]`, each `rows·antennas` long, row-major in (user, antenna).
    pub raw: Vec<f64>,
    pub logp: f64,
    /// Differential entropy of the policy at this state.
    pub entropy: f64,
}

/// One stochastic actor: two convolutions, a 512-unit trunk and four
/// Gaussian heads over the real and imaginary beam coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub kind: ActorKind,
    pub rows: usize,
    pub antennas: usize,
    pub scaling: Scaling,
    layers: Vec<LayerParams>,
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(kind: ActorKind, rows: usize, antennas: usize, scaling: Scaling, rng: &mut R) -> Result<Self> {
        if rows == 0 || antennas == 0 {
            return Err(Error::Dimension(format!("actor with {rows}×{antennas} action")));
        }
        let layers = LAYER_NAMES
            .iter()
            .zip(layer_kinds(rows, antennas))
            .map(|(n, k)| LayerParams::new(&format!("{}.{n}", kind.prefix()), k, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Actor { kind, rows, antennas, scaling, layers })
    }

    /// Rebuilds an actor from stored layers, checking every shape.
    pub fn from_layers(kind: ActorKind, rows: usize, antennas: usize, scaling: Scaling, layers: Vec<LayerParams>) -> Result<Self> {
        if layers.len() != LAYER_NAMES.len() {
            return Err(Error::CheckpointMismatch(format!("{} actor needs {} layers, got {}", kind.prefix(), LAYER_NAMES.len(), layers.len())));
        }
        for ((name, want), got) in LAYER_NAMES.iter().zip(layer_kinds(rows, antennas)).zip(&layers) {
            let name = format!("{}.{name}", kind.prefix());
            if name != got.name || want != got.kind {
                return Err(Error::CheckpointMismatch(format!("layer {} {:?} does not fit {name} {want:?}", got.name, got.kind)));
            }
        }
        Ok(Actor { kind, rows, antennas, scaling, layers })
    }

    /// Coefficients per head, `rows·antennas`.
    pub fn action_dim(&self) -> usize {
        self.rows * self.antennas
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.parameter_count()).sum()
    }

    /// Scaled `[batch, 4, rows, antennas]` input.
    pub fn input_tensor(&self, states: &[&AgentState]) -> Result<Tensor> {
        let plane = self.action_dim();
        let mut data = Vec::with_capacity(states.len() * 4 * plane);
        for s in states {
            if s.rows != self.rows || s.antennas != self.antennas {
                return Err(Error::Dimension(format!(
                    "{} actor takes {}×{} states, got {}×{}",
                    self.kind.prefix(),
                    self.rows,
                    self.antennas,
                    s.rows,
                    s.antennas
                )));
            }
            data.extend(s.data[..2 * plane].iter().map(|v| v * self.scaling.csi));
            data.extend(s.data[2 * plane..].iter().map(|v| v * self.scaling.beam));
        }
        Tensor::new(&[states.len(), 4, self.rows, self.antennas], data)
    }

    pub fn forward<'p>(&'p self, tape: &mut Tape<'p>, input: Tensor) -> Result<Heads> {
        let l = &self.layers;
        let x = tape.input(input);
        let x = tape.conv2d(x, &l[0])?;
        let x = tape.relu(x);
        let x = tape.conv2d(x, &l[1])?;
        let x = tape.relu(x);
        let x = tape.flatten(x)?;
        let x = tape.dense(x, &l[2])?;
        let x = tape.relu(x);
        Ok(Heads {
            mu_re: tape.dense(x, &l[3])?,
            log_std_re: tape.dense(x, &l[4])?,
            mu_im: tape.dense(x, &l[5])?,
            log_std_im: tape.dense(x, &l[6])?,
        })
    }

    /// Row-wise `log π(action | state)`, `[batch]`. Actions are `[Re | Im]`.
    pub fn log_prob<'p>(&'p self, tape: &mut Tape<'p>, heads: &Heads, actions: &[&[f64]]) -> Result<NodeId> {
        let a = self.action_dim();
        let b = actions.len();
        if let Some(bad) = actions.iter().find(|x| x.len() != 2 * a) {
            return Err(Error::Dimension(format!("action of length {}, expected {}", bad.len(), 2 * a)));
        }
        let re = Tensor::new(&[b, a], actions.iter().flat_map(|x| x[..a].iter().copied()).collect())?;
        let im = Tensor::new(&[b, a], actions.iter().flat_map(|x| x[a..].iter().copied()).collect())?;
        let lre = tape.gaussian_log_prob(heads.mu_re, heads.log_std_re, re)?;
        let lim = tape.gaussian_log_prob(heads.mu_im, heads.log_std_im, im)?;
        tape.add(lre, lim)
    }

    /// One action per state through the same weights; the whole batch
    /// shares a single forward pass.
    pub fn act<R: Rng + ?Sized>(&self, states: &[&AgentState], mode: ActionMode, rng: &mut R) -> Result<Vec<ActOutput>> {
        let a = self.action_dim();
        let mut tape = Tape::new();
        let heads = self.forward(&mut tape, self.input_tensor(states)?)?;
        let (re, im, logp) = match mode {
            ActionMode::Sample => {
                let (re, lre) = tape.gaussian_sample(heads.mu_re, heads.log_std_re, rng)?;
                let (im, lim) = tape.gaussian_sample(heads.mu_im, heads.log_std_im, rng)?;
                let logp = tape.add(lre, lim)?;
                (re, im, logp)
            }
            ActionMode::Mean => {
                let mu_re = tape.value(heads.mu_re).clone();
                let mu_im = tape.value(heads.mu_im).clone();
                let lre = tape.gaussian_log_prob(heads.mu_re, heads.log_std_re, mu_re)?;
                let lim = tape.gaussian_log_prob(heads.mu_im, heads.log_std_im, mu_im)?;
                let logp = tape.add(lre, lim)?;
                (heads.mu_re, heads.mu_im, logp)
            }
        };
        let (re, im, lp) = (tape.value(re).data(), tape.value(im).data(), tape.value(logp).data());
        let (sre, sim) = (tape.value(heads.log_std_re).data(), tape.value(heads.log_std_im).data());
        let mut out = Vec::with_capacity(states.len());
        for i in 0..states.len() {
            let span = i * a..(i + 1) * a;
            let mut raw = Vec::with_capacity(2 * a);
            raw.extend_from_slice(&re[span.clone()]);
            raw.extend_from_slice(&im[span.clone()]);
            if raw.iter().any(|v| !v.is_finite()) || !lp[i].is_finite() {
                return Err(Error::NonFinite(format!("{} actor output", self.kind.prefix())));
            }
            let entropy = sre[span.clone()].iter().chain(&sim[span]).map(|s| gaussian_entropy(*s)).sum();
            out.push(ActOutput { raw, logp: lp[i], entropy });
        }
        Ok(out)
    }

    /// Assembles the complex `antennas × rows` matrix of a raw action,
    /// before any power projection.
    pub fn decode(&self, raw: &[f64], bs_id: usize, radio: &RadioParams) -> Result<BeamformingMatrix> {
        let a = self.action_dim();
        if raw.len() != 2 * a {
            return Err(Error::Dimension(format!("action of length {}, expected {}", raw.len(), 2 * a)));
        }
        let mut w = BeamformingMatrix::zeros(bs_id, self.antennas, self.rows, radio);
        let s = self.scaling.action;
        for u in 0..self.rows {
            for n in 0..self.antennas {
                let i = u * self.antennas + n;
                w.w[(n, u)] = C64::new(s * raw[i], s * raw[a + i]);
            }
        }
        Ok(w)
    }

    /// One Adam step on every layer that received a gradient.
    pub fn apply(&mut self, grads: &Gradients, adam: &AdamConfig) {
        for layer in &mut self.layers {
            if let Some(g) = grads.layer(&layer.name) {
                adam_step(layer, g, adam);
            }
        }
    }
}

fn layer_kinds(rows: usize, antennas: usize) -> [LayerKind; 7] {
    let a = rows * antennas;
    let head = LayerKind::Dense { inputs: HIDDEN_UNITS, outputs: a };
    [
        LayerKind::Conv2d { in_ch: 4, out_ch: CONV_CHANNELS, kernel: KERNEL },
        LayerKind::Conv2d { in_ch: CONV_CHANNELS, out_ch: CONV_CHANNELS, kernel: KERNEL },
        LayerKind::Dense { inputs: CONV_CHANNELS * a, outputs: HIDDEN_UNITS },
        head,
        head,
        head,
        head,
    ]
}

/// Entropy of one Gaussian coordinate with (clamped) log-std `s`.
pub fn gaussian_entropy(s: f64) -> f64 {
    s.clamp(LOG_STD_MIN, LOG_STD_MAX) + HALF_LN_2PI + 0.5
}

/// The shared HAB actor and the HAPS actor.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorPair {
    pub hab: Actor,
    pub haps: Actor,
}

impl ActorPair {
    /// Fresh networks sized for the scenario. The HAB network comes first
    /// in the `init` stream, then the HAPS network.
    pub fn new<R: Rng + ?Sized>(scenario: &ScenarioConfig, channel: &ChannelParams, radio: &RadioParams, rng: &mut R) -> Result<Self> {
        let k = scenario.users_per_cluster;
        let u = scenario.total_users();
        let hab_scale = Scaling::for_station(scenario.hab_alt_m, scenario.hab_antennas, radio.baseline_power(1, k), channel)?;
        let haps_scale = Scaling::for_station(scenario.haps_alt_m, scenario.haps_antennas, radio.baseline_power(HAPS, u), channel)?;
        Ok(ActorPair {
            hab: Actor::new(ActorKind::Hab, k, scenario.hab_antennas, hab_scale, rng)?,
            haps: Actor::new(ActorKind::Haps, u, scenario.haps_antennas, haps_scale, rng)?,
        })
    }

    /// Errors unless both actors' head sizes fit the scenario.
    pub fn check_scenario(&self, scenario: &ScenarioConfig) -> Result<()> {
        let want = [
            (&self.hab, scenario.users_per_cluster, scenario.hab_antennas),
            (&self.haps, scenario.total_users(), scenario.haps_antennas),
        ];
        for (actor, rows, antennas) in want {
            if actor.rows != rows || actor.antennas != antennas {
                return Err(Error::CheckpointMismatch(format!(
                    "{} head size {} (= 2·{}·{}) but the config needs {} (= 2·{rows}·{antennas})",
                    actor.kind.prefix(),
                    2 * actor.action_dim(),
                    actor.rows,
                    actor.antennas,
                    2 * rows * antennas
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::encode_state;
    use crate::channel::complex_normal_row;
    use crate::seed::SeedTree;

    fn small_actor(seed: u64) -> Actor {
        let scaling = Scaling { csi: 1.0, beam: 1.0, action: 0.5 };
        Actor::new(ActorKind::Hab, 2, 4, scaling, &mut SeedTree::new(seed).rng()).unwrap()
    }

    fn state(seed: u64) -> AgentState {
        let mut rng = SeedTree::new(seed).rng();
        let rows: Vec<_> = (0..2).map(|_| complex_normal_row(4, &mut rng)).collect();
        encode_state(&rows.iter().collect::<Vec<_>>(), None, 2, 4).unwrap()
    }

    #[test]
    fn mean_mode_is_deterministic() {
        let actor = small_actor(1);
        let s = state(2);
        let mut rng = SeedTree::new(3).rng();
        let a = actor.act(&[&s], ActionMode::Mean, &mut rng).unwrap();
        let b = actor.act(&[&s], ActionMode::Mean, &mut rng).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_assembles_antenna_by_user_matrix() {
        let actor = small_actor(1);
        let s = state(2);
        let out = actor.act(&[&s], ActionMode::Sample, &mut SeedTree::new(3).rng()).unwrap();
        let w = actor.decode(&out[0].raw, 1, &RadioParams::default()).unwrap();
        assert_eq!((w.antennas(), w.users()), (4, 2));
        assert_eq!(w.w[(3, 1)], C64::new(0.5 * out[0].raw[7], 0.5 * out[0].raw[8 + 7]));
    }

    #[test]
    fn logp_falls_as_the_draw_moves_away_from_the_mean() {
        let actor = small_actor(4);
        let s = state(5);
        let mean = actor.act(&[&s], ActionMode::Mean, &mut SeedTree::new(0).rng()).unwrap().remove(0);
        let mut last = f64::INFINITY;
        for scale in [0.0, 0.5, 1.0, 2.0] {
            let shifted: Vec<f64> = mean.raw.iter().map(|m| m + scale).collect();
            let mut tape = Tape::new();
            let heads = actor.forward(&mut tape, actor.input_tensor(&[&s]).unwrap()).unwrap();
            let lp = actor.log_prob(&mut tape, &heads, &[&shifted]).unwrap();
            let v = tape.value(lp).item();
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn batched_act_matches_one_at_a_time_in_mean_mode() {
        let actor = small_actor(6);
        let (s1, s2) = (state(7), state(8));
        let mut rng = SeedTree::new(0).rng();
        let both = actor.act(&[&s1, &s2], ActionMode::Mean, &mut rng).unwrap();
        let one = actor.act(&[&s2], ActionMode::Mean, &mut rng).unwrap();
        assert_eq!(both[1], one[0]);
    }

    #[test]
    fn table_one_head_sizes() {
        let sc = ScenarioConfig::default();
        let pair = ActorPair::new(&sc, &ChannelParams::default(), &RadioParams::default(), &mut SeedTree::new(1).rng()).unwrap();
        assert_eq!(pair.hab.action_dim(), 4 * 36);
        assert_eq!(pair.haps.action_dim(), 16 * 64);
        pair.check_scenario(&sc).unwrap();
        let k8 = ScenarioConfig { users_per_cluster: 8, ..sc };
        assert!(matches!(pair.check_scenario(&k8), Err(Error::CheckpointMismatch(_))));
    }

    #[test]
    fn unit_draw_carries_about_the_baseline_power() {
        let s = Scaling::for_station(2000.0, 36, 10.0, &ChannelParams::default()).unwrap();
        assert!((2.0 * 36.0 * s.action * s.action - 10.0).abs() < 1e-12);
        assert!((s.beam * s.action - 1.0).abs() < 1e-15);
    }

    #[test]
    fn from_layers_rejects_other_shapes() {
        let actor = small_actor(1);
        let layers = actor.layers().to_vec();
        assert!(Actor::from_layers(ActorKind::Hab, 2, 4, actor.scaling, layers.clone()).is_ok());
        assert!(Actor::from_layers(ActorKind::Hab, 3, 4, actor.scaling, layers.clone()).is_err());
        assert!(Actor::from_layers(ActorKind::Haps, 2, 4, actor.scaling, layers).is_err());
    }
}
