//! Episodic network environment: users, mobility and per-slot channels for
//! every (BS, user) pair, driven by labelled RNG streams.

use sha2::{Digest, Sha256};

use crate::channel::{realize_channel, ChannelParams, ChannelRngs, ChannelRow, LinkState};
use crate::radio::{rate_report, Association, BeamformingMatrix, RadioParams, RateReport};
use crate::scenario::{build_layout, spawn_users, step_mobility, Layout, ScenarioConfig, UserState, HAPS};
use crate::seed::{Rng, SeedTree};
use crate::{Error, Result};

struct EpisodeRngs {
    mobility: Rng,
    shadowing: Rng,
    nlos: Rng,
    csi: Rng,
}

impl EpisodeRngs {
    fn new(seeds: &SeedTree) -> Self {
        EpisodeRngs {
            mobility: seeds.stream("mobility"),
            shadowing: seeds.stream("shadowing"),
            nlos: seeds.stream("nlos"),
            csi: seeds.stream("csi-noise"),
        }
    }
}

pub struct Environment {
    pub scenario: ScenarioConfig,
    pub channel: ChannelParams,
    pub radio: RadioParams,
    layout: Layout,
    assoc: Association,
    rho: f64,
    users: Vec<UserState>,
    /// `[bs][user]`
    links: Vec<Vec<LinkState>>,
    /// True channels, `[bs][user]`, mirrored from `links`.
    h: Vec<Vec<ChannelRow>>,
    slot: usize,
    rngs: Option<EpisodeRngs>,
    digest: Option<Sha256>,
}

impl Environment {
    pub fn new(scenario: ScenarioConfig, channel: ChannelParams, radio: RadioParams) -> Result<Self> {
        scenario.validate()?;
        channel.validate()?;
        radio.validate()?;
        if scenario.users_per_cluster > scenario.hab_antennas {
            return Err(Error::Config(format!(
                "K = {} exceeds N_b = {}",
                scenario.users_per_cluster, scenario.hab_antennas
            )));
        }
        let layout = build_layout(&scenario);
        let assoc = Association { clusters: scenario.habs, users_per_cluster: scenario.users_per_cluster };
        let rho = channel.correlation(scenario.v_mps, scenario.slot_s);
        Ok(Environment {
            scenario,
            channel,
            radio,
            layout,
            assoc,
            rho,
            users: Vec::new(),
            links: Vec::new(),
            h: Vec::new(),
            slot: 0,
            rngs: None,
            digest: None,
        })
    }

    /// Hash every true channel realization into a running digest.
    pub fn track_draws(&mut self, on: bool) {
        self.digest = on.then(Sha256::new);
    }

    /// Digest of all true channels realized since tracking was enabled.
    pub fn draw_digest(&self) -> Option<[u8; 32]> {
        self.digest.as_ref().map(|d| d.clone().finalize().into())
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn association(&self) -> &Association {
        &self.assoc
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn users(&self) -> &[UserState] {
        &self.users
    }

    /// Zero-based slot index within the episode.
    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn link(&self, bs: usize, user: usize) -> &LinkState {
        &self.links[bs][user]
    }

    pub fn true_channels(&self) -> &[Vec<ChannelRow>] {
        &self.h
    }

    /// Corrupted CSI of the users served by HAB `cluster`.
    pub fn hab_csi(&self, cluster: usize) -> Vec<&ChannelRow> {
        self.assoc.cluster_users(cluster).map(|u| &self.links[cluster + 1][u].h_tilde).collect()
    }

    /// Corrupted CSI of every user at the HAPS.
    pub fn haps_csi(&self) -> Vec<&ChannelRow> {
        self.links[HAPS].iter().map(|l| &l.h_tilde).collect()
    }

    /// Starts an episode: users are placed, headings drawn and the
    /// scattered components initialised fresh.
    pub fn reset(&mut self, seeds: &SeedTree) -> Result<()> {
        let mut rngs = EpisodeRngs::new(seeds);
        self.users = spawn_users(&self.scenario, &self.layout, &mut rngs.mobility);
        self.slot = 0;
        self.links.clear();
        self.realize(&mut rngs)?;
        self.rngs = Some(rngs);
        Ok(())
    }

    /// Moves every user one slot and advances the channels.
    pub fn advance(&mut self) -> Result<()> {
        let mut rngs = self.rngs.take().ok_or_else(|| Error::Config("advance before reset".into()))?;
        for u in self.users.iter_mut() {
            let center = self.layout.centers[u.cluster_id];
            *u = step_mobility(u, center, &self.scenario, &mut rngs.mobility);
        }
        self.slot += 1;
        let r = self.realize(&mut rngs);
        self.rngs = Some(rngs);
        r
    }

    fn realize(&mut self, rngs: &mut EpisodeRngs) -> Result<()> {
        let fresh = self.links.is_empty();
        let mut links = Vec::with_capacity(self.layout.stations.len());
        for (b, bs) in self.layout.stations.iter().enumerate() {
            let mut row = Vec::with_capacity(self.users.len());
            for (u, user) in self.users.iter().enumerate() {
                let prev = if fresh { None } else { Some(&self.links[b][u]) };
                let r = ChannelRngs { shadowing: &mut rngs.shadowing, nlos: &mut rngs.nlos, csi: &mut rngs.csi };
                row.push(realize_channel(bs, user, prev, &self.channel, self.rho, r)?);
            }
            links.push(row);
        }
        self.h = links.iter().map(|r| r.iter().map(|l| l.h.clone()).collect()).collect();
        if let Some(d) = self.digest.as_mut() {
            for x in self.h.iter().flatten().flat_map(|r| r.iter()) {
                d.update(x.re.to_le_bytes());
                d.update(x.im.to_le_bytes());
            }
        }
        self.links = links;
        Ok(())
    }

    /// Rates under the true channels for executed (projected) beams.
    pub fn evaluate(&self, beams: &[BeamformingMatrix]) -> Result<RateReport> {
        rate_report(&self.assoc, &self.h, beams, self.channel.noise_w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::{baseline_beams, Baseline};

    fn small() -> Environment {
        let sc = ScenarioConfig { habs: 2, users_per_cluster: 2, hab_antennas: 16, haps_antennas: 16, ..Default::default() };
        Environment::new(sc, ChannelParams::default(), RadioParams::default()).unwrap()
    }

    #[test]
    fn reset_is_deterministic() {
        let mut a = small();
        let mut b = small();
        a.reset(&SeedTree::new(4)).unwrap();
        b.reset(&SeedTree::new(4)).unwrap();
        for _ in 0..5 {
            a.advance().unwrap();
            b.advance().unwrap();
        }
        assert_eq!(a.true_channels(), b.true_channels());
        assert_eq!(a.users(), b.users());
        assert_eq!(a.slot(), 5);
    }

    #[test]
    fn dimensions() {
        let mut e = small();
        e.reset(&SeedTree::new(1)).unwrap();
        assert_eq!(e.true_channels().len(), 3);
        assert!(e.true_channels().iter().all(|r| r.len() == 4));
        assert_eq!(e.hab_csi(1).len(), 2);
        assert_eq!(e.haps_csi().len(), 4);
        let beams = baseline_beams(Baseline::Zf, e.association(), e.true_channels(), &e.radio).unwrap();
        let r = e.evaluate(&beams).unwrap();
        assert!(r.sum_rate > 0.0 && r.sum_rate.is_finite());
    }

    #[test]
    fn csi_noise_stream_does_not_touch_true_channels() {
        let mut perfect = small();
        let mut noisy = small();
        noisy.channel.xi = 0.6;
        for e in [&mut perfect, &mut noisy] {
            e.track_draws(true);
            e.reset(&SeedTree::new(9)).unwrap();
            e.advance().unwrap();
        }
        assert_eq!(perfect.draw_digest(), noisy.draw_digest());
        assert_ne!(perfect.haps_csi(), noisy.haps_csi());
    }
}
