//! Time-correlated Rician channels between a UPA base station and a
//! single-antenna ground user.
//!
//! Per slot, for every (BS, user) pair:
//!
//! ```text
//! h     = ĥ · √L
//! L_dB  = 20·log10(c / (4π f_c d)) − ψ,        ψ ~ N(0, σ_ψ²)
//! ĥ     = √(X/(1+X)) · ĥ_los + √(1/(1+X)) · ĥ_nlos
//! ĥ_nlos(t) = ρ · ĥ_nlos(t−1) + √(1−ρ²) · z,   z ~ CN(0, I)
//! ĥ_los = a(θ, φ) ⊗ b(θ, φ)
//! ```
//!
//! The agents only ever see the corrupted estimate `h̃ = ξ·h + √(1−ξ²)·e`,
//! where the error `e` has the same per-entry power as the small-scale
//! component of `h` (see [`realize_channel`]).

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scenario::{geometry, square_side, BsPose, UserState, HAPS};
use crate::special::bessel_j0;
use crate::{Error, Result, C64};

pub type ChannelRow = DVector<C64>;

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Doppler correlation setting: derived from mobility or pinned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rho {
    Auto,
    Fixed(f64),
}

impl Serialize for Rho {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Rho::Auto => s.serialize_str("auto"),
            Rho::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Rho {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Rho::Fixed(v)),
            Raw::Int(v) => Ok(Rho::Fixed(v as f64)),
            Raw::Str(s) if s == "auto" => Ok(Rho::Auto),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("rho must be \"auto\" or a number, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadowVariance {
    /// dB² on HAB links.
    pub hab: f64,
    /// dB² on HAPS links.
    pub haps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannelParams")]
pub struct ChannelParams {
    pub f_c_hz: f64,
    pub c_mps: f64,
    #[serde(rename = "rician_X")]
    pub rician_x: f64,
    pub rho: Rho,
    pub shadow_var_db: ShadowVariance,
    pub xi: f64,
    pub noise_w: f64,
    pub freeze_shadowing: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannelParams {
    f_c_hz: Option<f64>,
    c_mps: Option<f64>,
    #[serde(rename = "rician_X")]
    rician_x: Option<f64>,
    rho: Option<Rho>,
    shadow_var_db: Option<ShadowVariance>,
    xi: Option<f64>,
    noise_w: Option<f64>,
    noise_dbm: Option<f64>,
    freeze_shadowing: Option<bool>,
}

impl TryFrom<RawChannelParams> for ChannelParams {
    type Error = String;

    fn try_from(raw: RawChannelParams) -> std::result::Result<Self, String> {
        let d = ChannelParams::default();
        let noise_w = match (raw.noise_w, raw.noise_dbm) {
            (Some(_), Some(_)) => return Err("give either noise_w or noise_dbm, not both".into()),
            (Some(w), None) => w,
            (None, Some(dbm)) => dbm_to_watts(dbm),
            (None, None) => d.noise_w,
        };
        Ok(ChannelParams {
            f_c_hz: raw.f_c_hz.unwrap_or(d.f_c_hz),
            c_mps: raw.c_mps.unwrap_or(d.c_mps),
            rician_x: raw.rician_x.unwrap_or(d.rician_x),
            rho: raw.rho.unwrap_or(d.rho),
            shadow_var_db: raw.shadow_var_db.unwrap_or(d.shadow_var_db),
            xi: raw.xi.unwrap_or(d.xi),
            noise_w,
            freeze_shadowing: raw.freeze_shadowing.unwrap_or(d.freeze_shadowing),
        })
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            f_c_hz: 2.0e9,
            c_mps: SPEED_OF_LIGHT,
            rician_x: 10.0,
            rho: Rho::Auto,
            shadow_var_db: ShadowVariance { hab: 3.0, haps: 3.0 },
            xi: 1.0,
            noise_w: dbm_to_watts(-100.0),
            freeze_shadowing: false,
        }
    }
}

impl ChannelParams {
    pub fn wavelength(&self) -> f64 {
        self.c_mps / self.f_c_hz
    }

    /// Effective AR(1) coefficient. `Auto` uses Jakes' J0(2π f_d T_c) with
    /// `f_d = v f_c / c`.
    pub fn correlation(&self, speed_mps: f64, slot_s: f64) -> f64 {
        match self.rho {
            Rho::Fixed(r) => r,
            Rho::Auto => {
                let doppler = speed_mps * self.f_c_hz / self.c_mps;
                bessel_j0(TAU * doppler * slot_s)
            }
        }
    }

    pub fn shadow_variance(&self, bs_id: usize) -> f64 {
        if self.freeze_shadowing {
            0.0
        } else if bs_id == HAPS {
            self.shadow_var_db.haps
        } else {
            self.shadow_var_db.hab
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("channel: {m}")));
        if !(self.f_c_hz > 0.0 && self.c_mps > 0.0) {
            return fail("f_c_hz and c_mps must be positive");
        }
        if !(self.rician_x >= 0.0) {
            return fail("rician_X must be non-negative");
        }
        if let Rho::Fixed(r) = self.rho {
            if !(0.0..=1.0).contains(&r) {
                return fail("rho must lie in [0, 1]");
            }
        }
        if !(self.shadow_var_db.hab >= 0.0 && self.shadow_var_db.haps >= 0.0) {
            return fail("shadow variances must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.xi) {
            return fail("xi must lie in [0, 1]");
        }
        if !(self.noise_w > 0.0) || !self.noise_w.is_finite() {
            return fail("noise power must be positive");
        }
        Ok(())
    }
}

/// Free-space part of the large-scale gain, in dB.
pub fn free_space_db(distance: f64, f_c_hz: f64, c_mps: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::NonPositiveDistance(distance));
    }
    Ok(20.0 * (c_mps / (4.0 * PI * f_c_hz * distance)).log10())
}

/// Linear large-scale gain with a fresh log-normal shadowing draw.
pub fn large_scale_gain<R: Rng + ?Sized>(distance: f64, params: &ChannelParams, shadow_var_db: f64, rng: &mut R) -> Result<f64> {
    let mut db = free_space_db(distance, params.f_c_hz, params.c_mps)?;
    if shadow_var_db > 0.0 {
        let psi: f64 = Normal::new(0.0, shadow_var_db.sqrt())
            .map_err(|e| Error::Config(e.to_string()))?
            .sample(rng);
        db -= psi;
    }
    Ok(10f64.powf(db / 10.0))
}

/// UPA response `a(θ, φ) ⊗ b(θ, φ)` for half-wavelength spacing.
pub fn steering_vector(elevation: f64, azimuth: f64, antennas: usize) -> Result<ChannelRow> {
    steering_vector_spaced(elevation, azimuth, antennas, 0.5, 0.5)
}

/// UPA response with element spacings given in wavelengths.
pub fn steering_vector_spaced(elevation: f64, azimuth: f64, antennas: usize, dx: f64, dy: f64) -> Result<ChannelRow> {
    let side = square_side(antennas).ok_or(Error::NotSquare(antennas))?;
    // sin(π/2 − θ) is exactly zero at nadir, where cos(π/2) is not.
    let cos_el = (FRAC_PI_2 - elevation).sin();
    let dh = dx * cos_el * azimuth.sin();
    let dv = dy * cos_el * azimuth.cos();
    let a: Vec<C64> = (0..side).map(|m| C64::from_polar(1.0, TAU * m as f64 * dh)).collect();
    let b: Vec<C64> = (0..side).map(|n| C64::from_polar(1.0, TAU * n as f64 * dv)).collect();
    Ok(ChannelRow::from_fn(antennas, |i, _| a[i / side] * b[i % side]))
}

/// One circularly-symmetric CN(0, 1) sample.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_normal_row<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ChannelRow {
    ChannelRow::from_fn(n, |_, _| complex_normal(rng))
}

/// Jakes AR(1) step of the scattered component.
pub fn advance_nlos<R: Rng + ?Sized>(prev: &ChannelRow, rho: f64, rng: &mut R) -> ChannelRow {
    if rho == 1.0 {
        return prev.clone();
    }
    let innov = (1.0 - rho * rho).max(0.0).sqrt();
    prev.map(|p| p * rho + complex_normal(rng) * innov)
}

/// Rician mixture of the LoS and scattered components.
pub fn compose_small_scale(los: &ChannelRow, nlos: &ChannelRow, rician_x: f64) -> Result<ChannelRow> {
    if los.len() != nlos.len() {
        return Err(Error::Dimension(format!("LoS length {} vs NLoS length {}", los.len(), nlos.len())));
    }
    if rician_x == 0.0 {
        return Ok(nlos.clone());
    }
    let wl = (rician_x / (1.0 + rician_x)).sqrt();
    let wn = (1.0 / (1.0 + rician_x)).sqrt();
    Ok(los.zip_map(nlos, |l, n| l * wl + n * wn))
}

/// `ξ·h + √(1−ξ²)·e` with unit-variance complex Gaussian `e`.
pub fn corrupt_csi<R: Rng + ?Sized>(h: &ChannelRow, xi: f64, rng: &mut R) -> ChannelRow {
    if xi == 1.0 {
        return h.clone();
    }
    let s = (1.0 - xi * xi).max(0.0).sqrt();
    h.map(|v| v * xi + complex_normal(rng) * s)
}

/// Channel of one (BS, user) pair at one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    /// True channel `ĥ·√L`.
    pub h: ChannelRow,
    /// Persistent scattered component.
    pub nlos: ChannelRow,
    pub los: ChannelRow,
    /// Linear large-scale gain.
    pub gain: f64,
    /// Corrupted estimate available to the serving agent.
    pub h_tilde: ChannelRow,
}

impl LinkState {
    /// Small-scale part `ĥ = h / √L`.
    pub fn small_scale(&self) -> ChannelRow {
        self.h.map(|x| x / self.gain.sqrt())
    }
}

/// RNG handles consumed by [`realize_channel`], one per random source.
pub struct ChannelRngs<'a, R: Rng + ?Sized> {
    pub shadowing: &'a mut R,
    pub nlos: &'a mut R,
    pub csi: &'a mut R,
}

/// Realizes the link for the current slot. `prev = None` marks the first
/// slot of an episode, where the scattered component is drawn fresh.
pub fn realize_channel<R: Rng + ?Sized>(
    bs: &BsPose,
    user: &UserState,
    prev: Option<&LinkState>,
    params: &ChannelParams,
    rho: f64,
    rngs: ChannelRngs<'_, R>,
) -> Result<LinkState> {
    let g = geometry(bs, user)?;
    let gain = large_scale_gain(g.distance, params, params.shadow_variance(bs.bs_id), rngs.shadowing)?;
    let los = steering_vector(g.elevation, g.azimuth, bs.antennas)?;
    let nlos = match prev {
        Some(p) if p.nlos.len() == bs.antennas => advance_nlos(&p.nlos, rho, rngs.nlos),
        Some(p) => {
            return Err(Error::Dimension(format!(
                "previous NLoS length {} for a {}-antenna BS",
                p.nlos.len(),
                bs.antennas
            )))
        }
        None => complex_normal_row(bs.antennas, rngs.nlos),
    };
    let small = compose_small_scale(&los, &nlos, params.rician_x)?;
    let amp = gain.sqrt();
    let h = small.map(|x| x * amp);
    // Estimation error is relative to the small-scale power, so ξ acts as
    // a reliability knob independent of the path loss.
    let h_tilde = corrupt_csi(&small, params.xi, rngs.csi).map(|x| x * amp);
    Ok(LinkState { h, nlos, los, gain, h_tilde })
}
