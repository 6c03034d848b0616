//! Network geometry and ground-user mobility.
//!
//! Cluster centres sit on a square grid with spacing `l`; each cluster has
//! one HAB hovering above its centre and the single HAPS hovers above the
//! centroid of all centres. Users move in straight lines at constant speed
//! and pick a new heading whenever a step would leave their cluster disc.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Heading resamples attempted before a user stays put for one slot.
pub const MAX_HEADING_RETRIES: usize = 64;

/// Index of the HAPS in every per-BS collection.
pub const HAPS: usize = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Number of HABs (= clusters).
    #[serde(rename = "B")]
    pub habs: usize,
    /// Users per cluster.
    #[serde(rename = "K")]
    pub users_per_cluster: usize,
    /// Antennas per HAB (perfect square).
    #[serde(rename = "N_b")]
    pub hab_antennas: usize,
    /// Antennas at the HAPS (perfect square).
    #[serde(rename = "N_b0")]
    pub haps_antennas: usize,
    /// Cluster radius.
    pub q_m: f64,
    /// Centre-to-centre cluster spacing.
    pub l_m: f64,
    pub hab_alt_m: f64,
    pub haps_alt_m: f64,
    /// User speed.
    pub v_mps: f64,
    /// Slot duration.
    #[serde(rename = "T_c_s")]
    pub slot_s: f64,
    /// Slots per episode.
    #[serde(rename = "T")]
    pub slots: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            habs: 4,
            users_per_cluster: 4,
            hab_antennas: 36,
            haps_antennas: 64,
            q_m: 2000.0,
            l_m: 6000.0,
            hab_alt_m: 2000.0,
            haps_alt_m: 20000.0,
            v_mps: 1.0,
            slot_s: 0.02,
            slots: 50,
        }
    }
}

impl ScenarioConfig {
    pub fn total_users(&self) -> usize {
        self.habs * self.users_per_cluster
    }

    /// Distance a user covers in one slot.
    pub fn step_length(&self) -> f64 {
        self.v_mps * self.slot_s
    }

    /// Clusters intersect when the spacing is below one diameter.
    pub fn overlapping(&self) -> bool {
        self.l_m < 2.0 * self.q_m
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("scenario: {m}")));
        if self.habs == 0 {
            return fail("B must be at least 1");
        }
        if self.users_per_cluster == 0 {
            return fail("K must be at least 1");
        }
        for (name, n) in [("N_b", self.hab_antennas), ("N_b0", self.haps_antennas)] {
            if n == 0 || square_side(n).is_none() {
                return fail(&format!("{name} = {n} is not a positive perfect square"));
            }
        }
        if !(self.q_m > 0.0) {
            return fail("q_m must be positive");
        }
        if !(self.l_m >= 0.0) {
            return fail("l_m must be non-negative");
        }
        if !(self.hab_alt_m > 0.0 && self.haps_alt_m > 0.0) {
            return fail("altitudes must be positive");
        }
        if !(self.v_mps >= 0.0 && self.slot_s >= 0.0) || !self.step_length().is_finite() {
            return fail("v_mps and T_c_s must be non-negative");
        }
        if self.slots == 0 {
            return fail("T must be at least 1");
        }
        Ok(())
    }
}

/// `Some(s)` when `n == s * s`.
pub fn square_side(n: usize) -> Option<usize> {
    let s = (n as f64).sqrt().round() as usize;
    (s * s == n).then_some(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsPose {
    /// 0 is the HAPS, `1..=B` the HABs.
    pub bs_id: usize,
    pub position: [f64; 3],
    pub antennas: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserState {
    pub user_id: usize,
    pub cluster_id: usize,
    pub position: [f64; 2],
    /// Radians in `[0, 2π)`.
    pub heading: f64,
}

/// Static part of the scenario: cluster centres and BS poses.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub centers: Vec<[f64; 2]>,
    /// Index [`HAPS`] first, then HAB `b` at index `b + 1` for cluster `b`.
    pub stations: Vec<BsPose>,
}

impl Layout {
    pub fn hab(&self, cluster: usize) -> &BsPose {
        &self.stations[cluster + 1]
    }

    pub fn haps(&self) -> &BsPose {
        &self.stations[HAPS]
    }
}

pub fn build_layout(cfg: &ScenarioConfig) -> Layout {
    let side = (cfg.habs as f64).sqrt().ceil() as usize;
    let centers: Vec<[f64; 2]> = (0..cfg.habs)
        .map(|i| [(i % side) as f64 * cfg.l_m, (i / side) as f64 * cfg.l_m])
        .collect();
    let n = centers.len() as f64;
    let cx = centers.iter().map(|c| c[0]).sum::<f64>() / n;
    let cy = centers.iter().map(|c| c[1]).sum::<f64>() / n;

    let mut stations = Vec::with_capacity(cfg.habs + 1);
    stations.push(BsPose {
        bs_id: HAPS,
        position: [cx, cy, cfg.haps_alt_m],
        antennas: cfg.haps_antennas,
    });
    for (b, c) in centers.iter().enumerate() {
        stations.push(BsPose {
            bs_id: b + 1,
            position: [c[0], c[1], cfg.hab_alt_m],
            antennas: cfg.hab_antennas,
        });
    }
    Layout { centers, stations }
}

/// `K` users per cluster, uniform on each disc, uniform headings.
pub fn spawn_users<R: Rng + ?Sized>(cfg: &ScenarioConfig, layout: &Layout, rng: &mut R) -> Vec<UserState> {
    let mut users = Vec::with_capacity(cfg.total_users());
    for (cluster, c) in layout.centers.iter().enumerate() {
        for _ in 0..cfg.users_per_cluster {
            let r = cfg.q_m * rng.random::<f64>().sqrt();
            let a = TAU * rng.random::<f64>();
            users.push(UserState {
                user_id: users.len(),
                cluster_id: cluster,
                position: [c[0] + r * a.cos(), c[1] + r * a.sin()],
                heading: TAU * rng.random::<f64>(),
            });
        }
    }
    users
}

/// Advance one slot along the current heading, re-drawing the heading
/// when the move would leave the cluster disc.
pub fn step_mobility<R: Rng + ?Sized>(
    user: &UserState,
    center: [f64; 2],
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> UserState {
    let step = cfg.step_length();
    let target = |heading: f64| {
        [
            user.position[0] + step * heading.cos(),
            user.position[1] + step * heading.sin(),
        ]
    };
    let inside = |p: [f64; 2]| (p[0] - center[0]).hypot(p[1] - center[1]) <= cfg.q_m;

    let mut heading = user.heading;
    let mut next = target(heading);
    let mut tries = 0;
    while !inside(next) {
        if tries == MAX_HEADING_RETRIES {
            return *user;
        }
        heading = TAU * rng.random::<f64>();
        next = target(heading);
        tries += 1;
    }
    UserState {
        position: next,
        heading,
        ..*user
    }
}

/// Distance, elevation and azimuth of a user seen from a BS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub distance: f64,
    /// From the horizontal plane, in `(0, π/2]`.
    pub elevation: f64,
    /// `atan2(Δy, Δx)` from BS toward user.
    pub azimuth: f64,
}

pub fn geometry(bs: &BsPose, user: &UserState) -> Result<LinkGeometry> {
    let dx = user.position[0] - bs.position[0];
    let dy = user.position[1] - bs.position[1];
    let dz = bs.position[2];
    let distance = (dx * dx + dy * dy + dz * dz).sqrt();
    if distance == 0.0 {
        return Err(Error::CoLocated {
            bs: bs.bs_id,
            user: user.user_id,
        });
    }
    Ok(LinkGeometry {
        distance,
        elevation: (dz / distance).clamp(-1.0, 1.0).asin(),
        azimuth: dy.atan2(dx),
    })
}
