use super::train::{agent_states, joint_action};
use super::{ActionMode, ActorPair};
use crate::env::Environment;
use crate::harness::RunConfig;
use crate::radio::{baseline_beams, Baseline, BeamformingMatrix};
use crate::seed::SeedTree;
use crate::Result;

#[derive(Debug, Clone, Copy)]
pub enum Method<'a> {
    Drl { actors: &'a ActorPair, mode: ActionMode },
    Baseline(Baseline),
}

impl Method<'_> {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Drl { .. } => "drl",
            Method::Baseline(Baseline::Zf) => "zf",
            Method::Baseline(Baseline::Mrt) => "mrt",
        }
    }
}

/// Sum-rate statistics of one method, indexed by slot.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSeries {
    pub method: &'static str,
    pub episodes: usize,
    /// Mean sum-rate per slot across episodes, bps/Hz.
    pub mean: Vec<f64>,
    /// Sample standard deviation per slot (0 for a single episode).
    pub std: Vec<f64>,
    /// Time-averaged sum-rate of each episode.
    pub episode_means: Vec<f64>,
    /// Time-averaged reward (mean user rate) of each episode.
    pub episode_rewards: Vec<f64>,
    /// Digest of every true channel the method was evaluated on.
    pub draw_digest: [u8; 32],
}

impl EvalSeries {
    /// Mean over slots of the per-slot mean.
    pub fn time_average(&self) -> f64 {
        self.mean.iter().sum::<f64>() / self.mean.len().max(1) as f64
    }

    pub fn mean_reward(&self) -> f64 {
        self.episode_rewards.iter().sum::<f64>() / self.episode_rewards.len().max(1) as f64
    }
}

/// Runs `episodes` frozen-policy episodes. Episode `e` draws its channels
/// from `eval/e` of the master seed, so every method sees the same
/// realizations; the DRL policy samples from that episode's own `policy`
/// stream.
pub fn evaluate(method: Method<'_>, cfg: &RunConfig, episodes: usize) -> Result<EvalSeries> {
    if let Method::Drl { actors, .. } = method {
        actors.check_scenario(&cfg.scenario)?;
    }
    let slots = cfg.scenario.slots;
    let root = SeedTree::new(cfg.run.seed).child("eval");
    let mut env = Environment::new(cfg.scenario.clone(), cfg.channel.clone(), cfg.radio.clone())?;
    env.track_draws(true);
    let mut sum = vec![0.0; slots];
    let mut sum_sq = vec![0.0; slots];
    let mut episode_means = Vec::with_capacity(episodes);
    let mut episode_rewards = Vec::with_capacity(episodes);
    for e in 0..episodes {
        let seeds = root.index(e as u64);
        env.reset(&seeds)?;
        let mut policy_rng = seeds.stream("policy");
        let mut prev: Option<Vec<BeamformingMatrix>> = None;
        let (mut total, mut reward) = (0.0, 0.0);
        for slot in 0..slots {
            if slot > 0 {
                env.advance()?;
            }
            let beams = match method {
                Method::Baseline(kind) => baseline_beams(kind, env.association(), env.true_channels(), &env.radio)?,
                Method::Drl { actors, mode } => {
                    let (habs, haps) = agent_states(&env, prev.as_deref())?;
                    joint_action(actors, &env, &habs, &haps, mode, &mut policy_rng)?.0
                }
            };
            let report = env.evaluate(&beams)?;
            sum[slot] += report.sum_rate;
            sum_sq[slot] += report.sum_rate * report.sum_rate;
            total += report.sum_rate;
            reward += report.reward;
            prev = Some(beams);
        }
        episode_means.push(total / slots as f64);
        episode_rewards.push(reward / slots as f64);
    }
    let n = episodes as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| if episodes > 1 { ((sq - n * m * m) / (n - 1.0)).max(0.0).sqrt() } else { 0.0 })
        .collect();
    Ok(EvalSeries {
        method: method.tag(),
        episodes,
        mean,
        std,
        episode_means,
        episode_rewards,
        draw_digest: env.draw_digest().unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::train::initial_actors;
    use crate::scenario::ScenarioConfig;

    fn cfg(slots: usize) -> RunConfig {
        let mut c = RunConfig::default();
        c.scenario = ScenarioConfig { habs: 2, users_per_cluster: 2, hab_antennas: 4, haps_antennas: 4, slots, ..Default::default() };
        c
    }

    #[test]
    fn zf_twice_is_identical() {
        let c = cfg(5);
        let a = evaluate(Method::Baseline(Baseline::Zf), &c, 3).unwrap();
        let b = evaluate(Method::Baseline(Baseline::Zf), &c, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mean.len(), 5);
    }

    #[test]
    fn all_methods_see_the_same_channels() {
        let c = cfg(4);
        let actors = initial_actors(&c).unwrap();
        let zf = evaluate(Method::Baseline(Baseline::Zf), &c, 2).unwrap();
        let mrt = evaluate(Method::Baseline(Baseline::Mrt), &c, 2).unwrap();
        let drl = evaluate(Method::Drl { actors: &actors, mode: ActionMode::Sample }, &c, 2).unwrap();
        assert_eq!(zf.draw_digest, mrt.draw_digest);
        assert_eq!(zf.draw_digest, drl.draw_digest);
    }

    #[test]
    fn series_length_is_the_episode_length() {
        let c = cfg(50);
        let s = evaluate(Method::Baseline(Baseline::Mrt), &c, 1).unwrap();
        assert_eq!((s.mean.len(), s.std.len()), (50, 50));
        assert!(s.std.iter().all(|v| *v == 0.0));
        assert!(s.mean.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn mismatched_actors_are_rejected() {
        let c = cfg(2);
        let actors = initial_actors(&c).unwrap();
        let mut other = c.clone();
        other.scenario.users_per_cluster = 3;
        other.scenario.hab_antennas = 9;
        assert!(matches!(
            evaluate(Method::Drl { actors: &actors, mode: ActionMode::Mean }, &other, 1),
            Err(crate::Error::CheckpointMismatch(_))
        ));
    }
}
