use std::fmt::Write as _;
use std::path::Path;

use super::{encode_state, save_checkpoint, actor_loss, ActionMode, Actor, ActorKind, ActorPair, AgentState, CheckpointManifest, ReplayBuffer, Transition};
use crate::env::Environment;
use crate::harness::RunConfig;
use crate::neural::AdamConfig;
use crate::radio::{project_power, BeamformingMatrix};
use crate::scenario::HAPS;
use crate::seed::{Rng, SeedTree};
use crate::{Error, Result};

pub const TRAIN_LOG_HEADER: &str = "episode,mean_reward,loss_hab,loss_haps,entropy_hab,entropy_haps";

/// Per-episode training summary. Losses are `NaN` for episodes without an
/// update tick; entropies are the mean policy entropy over acting steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub mean_reward: f64,
    pub loss_hab: f64,
    pub loss_haps: f64,
    pub entropy_hab: f64,
    pub entropy_haps: f64,
}

impl EpisodeLog {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.episode, self.mean_reward, self.loss_hab, self.loss_haps, self.entropy_hab, self.entropy_haps
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub actors: ActorPair,
    pub log: Vec<EpisodeLog>,
    pub hab_buffer: ReplayBuffer,
    pub haps_buffer: ReplayBuffer,
    /// Update ticks performed (one Adam step per actor each).
    pub updates: usize,
}

impl TrainOutcome {
    pub fn log_csv(&self) -> String {
        let mut s = String::from(TRAIN_LOG_HEADER);
        s.push('\n');
        for e in &self.log {
            let _ = writeln!(s, "{}", e.csv_line());
        }
        s
    }
}

/// Initial networks for a run, drawn from the `init` stream.
pub fn initial_actors(cfg: &RunConfig) -> Result<ActorPair> {
    let mut rng = SeedTree::new(cfg.run.seed).stream("init");
    ActorPair::new(&cfg.scenario, &cfg.channel, &cfg.radio, &mut rng)
}

/// States of every agent for the current slot: HABs in cluster order,
/// then the HAPS.
pub(crate) fn agent_states(env: &Environment, prev: Option<&[BeamformingMatrix]>) -> Result<(Vec<AgentState>, AgentState)> {
    let sc = &env.scenario;
    let habs = (0..sc.habs)
        .map(|b| encode_state(&env.hab_csi(b), prev.map(|p| &p[b + 1]), sc.users_per_cluster, sc.hab_antennas))
        .collect::<Result<Vec<_>>>()?;
    let haps = encode_state(&env.haps_csi(), prev.map(|p| &p[HAPS]), sc.total_users(), sc.haps_antennas)?;
    Ok((habs, haps))
}

/// Acting step shared by training and evaluation. Returns the executed
/// (projected) beams, HAPS first, along with the raw outputs.
pub(crate) fn joint_action(
    actors: &ActorPair,
    env: &Environment,
    habs: &[AgentState],
    haps: &AgentState,
    mode: ActionMode,
    rng: &mut Rng,
) -> Result<(Vec<BeamformingMatrix>, Vec<super::ActOutput>, super::ActOutput)> {
    let refs: Vec<&AgentState> = habs.iter().collect();
    let hab_out = actors.hab.act(&refs, mode, rng)?;
    let haps_out = actors.haps.act(&[haps], mode, rng)?.remove(0);
    let mut beams = Vec::with_capacity(habs.len() + 1);
    beams.push(project_power(&actors.haps.decode(&haps_out.raw, HAPS, &env.radio)?)?);
    for (b, out) in hab_out.iter().enumerate() {
        beams.push(project_power(&actors.hab.decode(&out.raw, b + 1, &env.radio)?)?);
    }
    Ok((beams, hab_out, haps_out))
}

struct Learner<'a> {
    actor: &'a mut Actor,
    buffer: &'a mut ReplayBuffer,
    gamma: f64,
}

/// The training loop. Checkpoints go to `checkpoint_dir/episode_NNNN.bin`
/// every `eta_ckpt` episodes when a directory is given.
pub fn train(cfg: &RunConfig, checkpoint_dir: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let hp = &cfg.hyperparams;
    let root = SeedTree::new(cfg.run.seed);
    let mut actors = initial_actors(cfg)?;
    let mut policy_rng = root.stream("policy");
    let mut replay_rng = root.stream("replay");
    let adam = AdamConfig::with_lr(hp.lr);
    let config_hash = cfg.hash();

    let mut env = Environment::new(cfg.scenario.clone(), cfg.channel.clone(), cfg.radio.clone())?;
    let mut hab_buffer = ReplayBuffer::new(hp.buffer_capacity);
    let mut haps_buffer = ReplayBuffer::new(hp.buffer_capacity);
    let mut log = Vec::with_capacity(hp.episodes);
    let mut updates = 0;
    let slots = cfg.scenario.slots;

    for episode in 0..hp.episodes {
        env.reset(&root.child("train").index(episode as u64))?;
        let mut prev: Option<Vec<BeamformingMatrix>> = None;
        let (mut reward_sum, mut ent_hab, mut ent_haps) = (0.0, 0.0, 0.0);
        let (mut loss_hab, mut loss_haps, mut ticks) = (0.0, 0.0, 0usize);
        for slot in 0..slots {
            if slot > 0 {
                env.advance()?;
            }
            let (habs, haps) = agent_states(&env, prev.as_deref())?;
            let (beams, hab_out, haps_out) = joint_action(&actors, &env, &habs, &haps, ActionMode::Sample, &mut policy_rng)?;
            let reward = env.evaluate(&beams)?.reward;
            if !reward.is_finite() {
                return Err(Error::Diverged { episode, slot, what: "reward".into() });
            }
            reward_sum += reward;
            ent_hab += hab_out.iter().map(|o| o.entropy).sum::<f64>() / hab_out.len() as f64;
            ent_haps += haps_out.entropy;
            for (state, out) in habs.into_iter().zip(hab_out) {
                hab_buffer.push(Transition { kind: ActorKind::Hab, state, action: out.raw, reward, episode, slot });
            }
            haps_buffer.push(Transition { kind: ActorKind::Haps, state: haps, action: haps_out.raw, reward, episode, slot });
            prev = Some(beams);

            if (slot + 1) % hp.eta == 0 {
                let learners = [
                    Learner { actor: &mut actors.hab, buffer: &mut hab_buffer, gamma: hp.gamma },
                    Learner { actor: &mut actors.haps, buffer: &mut haps_buffer, gamma: hp.gamma_haps },
                ];
                let mut losses = [0.0; 2];
                for (i, l) in learners.into_iter().enumerate() {
                    let batch = l.buffer.sample(hp.batch_size, &mut replay_rng);
                    let out = actor_loss(l.actor, &batch, l.gamma, hp.reward_baseline)?;
                    let finite = out.objective.is_finite() && out.grads.layers.values().all(|g| g.weight.all_finite() && g.bias.all_finite());
                    if !finite {
                        let what = format!("{} loss", l.actor.kind.prefix());
                        return Err(Error::Diverged { episode, slot, what });
                    }
                    l.actor.apply(&out.grads, &adam);
                    losses[i] = out.objective;
                }
                loss_hab += losses[0];
                loss_haps += losses[1];
                ticks += 1;
                updates += 1;
            }
        }
        let n = slots as f64;
        let per_tick = |x: f64| if ticks == 0 { f64::NAN } else { x / ticks as f64 };
        log.push(EpisodeLog {
            episode: episode + 1,
            mean_reward: reward_sum / n,
            loss_hab: per_tick(loss_hab),
            loss_haps: per_tick(loss_haps),
            entropy_hab: ent_hab / n,
            entropy_haps: ent_haps / n,
        });
        if let Some(dir) = checkpoint_dir {
            if (episode + 1) % hp.eta_ckpt == 0 {
                let manifest = CheckpointManifest::new(&actors, episode + 1, &config_hash, hp);
                save_checkpoint(&dir.join(format!("episode_{:04}.bin", episode + 1)), &actors, &manifest)?;
            }
        }
    }
    Ok(TrainOutcome { actors, log, hab_buffer, haps_buffer, updates })
}
