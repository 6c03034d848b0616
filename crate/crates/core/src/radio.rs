//! SINR, rates, the shared reward, power-budget projection and the ZF/MRT
//! reference precoders.
//!
//! Channel and beam collections are indexed by BS: index [`HAPS`] is the
//! HAPS, index `b + 1` is the HAB of cluster `b`. Users are numbered
//! cluster-major, so the HAB of cluster `b` serves users
//! `b·K .. (b+1)·K` in column order and the HAPS serves every user.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRow;
use crate::scenario::HAPS;
use crate::{Error, Result, C64};

/// Relative slack before [`project_power`] rescales. Keeps projection
/// idempotent under rounding of the rescaled norm.
const PROJECTION_SLACK: f64 = 1e-12;

/// ZF refuses channel matrices worse conditioned than this.
pub const ZF_MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    /// Σ_u ‖w_u‖² ≤ P_max.
    Total,
    /// ‖w_u‖² ≤ P_max for every column.
    PerBeam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioParams {
    pub p_max_hab_w: f64,
    pub p_max_haps_w: f64,
    pub haps_power_mode: PowerMode,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            p_max_hab_w: 40.0,
            p_max_haps_w: 100.0,
            haps_power_mode: PowerMode::PerBeam,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_max_hab_w > 0.0 && self.p_max_haps_w > 0.0) {
            return Err(Error::Config("radio: power budgets must be positive".into()));
        }
        Ok(())
    }

    pub fn budget(&self, bs_id: usize) -> (f64, PowerMode) {
        if bs_id == HAPS {
            (self.p_max_haps_w, self.haps_power_mode)
        } else {
            (self.p_max_hab_w, PowerMode::Total)
        }
    }

    /// Power per served user used by the ZF and MRT baselines: an equal
    /// split under a total budget, the full cap under a per-beam one.
    pub fn baseline_power(&self, bs_id: usize, served: usize) -> f64 {
        match self.budget(bs_id) {
            (p, PowerMode::Total) => p / served as f64,
            (p, PowerMode::PerBeam) => p,
        }
    }
}

/// Precoder of one BS, one column per served user.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingMatrix {
    pub bs_id: usize,
    pub w: DMatrix<C64>,
    pub p_max: f64,
    pub mode: PowerMode,
}

impl BeamformingMatrix {
    pub fn zeros(bs_id: usize, antennas: usize, users: usize, radio: &RadioParams) -> Self {
        let (p_max, mode) = radio.budget(bs_id);
        BeamformingMatrix { bs_id, w: DMatrix::zeros(antennas, users), p_max, mode }
    }

    pub fn antennas(&self) -> usize {
        self.w.nrows()
    }

    pub fn users(&self) -> usize {
        self.w.ncols()
    }

    pub fn column_power(&self, col: usize) -> f64 {
        self.w.column(col).norm_squared()
    }

    pub fn total_power(&self) -> f64 {
        self.w.norm_squared()
    }

    /// True when the matrix meets its budget within `tol` watts.
    pub fn is_feasible(&self, tol: f64) -> bool {
        match self.mode {
            PowerMode::Total => self.total_power() <= self.p_max + tol,
            PowerMode::PerBeam => (0..self.users()).all(|c| self.column_power(c) <= self.p_max + tol),
        }
    }
}

/// Scales the matrix (total budget) or each offending column (per-beam
/// budget) back onto the feasible set. Feasible inputs come back unchanged.
pub fn project_power(beams: &BeamformingMatrix) -> Result<BeamformingMatrix> {
    if beams.w.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::NonFinite(format!("beamforming matrix of BS {}", beams.bs_id)));
    }
    let limit = beams.p_max * (1.0 + PROJECTION_SLACK);
    let mut out = beams.clone();
    match beams.mode {
        PowerMode::Total => {
            let s = beams.total_power();
            if s > limit {
                out.w *= C64::from((beams.p_max / s).sqrt());
            }
        }
        PowerMode::PerBeam => {
            for c in 0..beams.users() {
                let s = beams.column_power(c);
                if s > limit {
                    let k = C64::from((beams.p_max / s).sqrt());
                    out.w.column_mut(c).iter_mut().for_each(|x| *x *= k);
                }
            }
        }
    }
    Ok(out)
}

/// Non-conjugating inner product `h · w`.
pub fn gain(h: &ChannelRow, w: nalgebra::DVectorView<'_, C64>) -> C64 {
    h.iter().zip(w.iter()).map(|(a, b)| a * b).sum()
}

/// Which users each BS serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Association {
    pub clusters: usize,
    pub users_per_cluster: usize,
}

impl Association {
    pub fn users(&self) -> usize {
        self.clusters * self.users_per_cluster
    }

    pub fn cluster_of(&self, user: usize) -> usize {
        user / self.users_per_cluster
    }

    /// Column of `user` in its HAB's precoder.
    pub fn hab_column(&self, user: usize) -> usize {
        user % self.users_per_cluster
    }

    pub fn cluster_users(&self, cluster: usize) -> std::ops::Range<usize> {
        cluster * self.users_per_cluster..(cluster + 1) * self.users_per_cluster
    }

    fn check(&self, h: &[Vec<ChannelRow>], beams: &[BeamformingMatrix]) -> Result<()> {
        let want = self.clusters + 1;
        if h.len() != want || beams.len() != want {
            return Err(Error::Dimension(format!(
                "expected {want} BSs, got {} channel sets and {} precoders",
                h.len(),
                beams.len()
            )));
        }
        for (b, (rows, w)) in h.iter().zip(beams).enumerate() {
            let cols = if b == HAPS { self.users() } else { self.users_per_cluster };
            if rows.len() != self.users() || w.users() != cols {
                return Err(Error::Dimension(format!(
                    "BS {b}: {} channel rows, {} beam columns (want {} and {cols})",
                    rows.len(),
                    w.users(),
                    self.users()
                )));
            }
            if let Some(r) = rows.iter().find(|r| r.len() != w.antennas()) {
                return Err(Error::Dimension(format!(
                    "BS {b}: channel length {} vs {} antennas",
                    r.len(),
                    w.antennas()
                )));
            }
        }
        Ok(())
    }
}

/// HAB-layer SINR of `user`: interference from every HAB beam not aimed
/// at this user, seen through the user's channel to that HAB.
pub fn sinr_hab(user: usize, assoc: &Association, h: &[Vec<ChannelRow>], beams: &[BeamformingMatrix], noise_w: f64) -> Result<f64> {
    assoc.check(h, beams)?;
    Ok(hab_sinr_unchecked(user, assoc, h, beams, noise_w))
}

fn hab_sinr_unchecked(user: usize, assoc: &Association, h: &[Vec<ChannelRow>], beams: &[BeamformingMatrix], noise_w: f64) -> f64 {
    let own = assoc.cluster_of(user) + 1;
    let own_col = assoc.hab_column(user);
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (b, w) in beams.iter().enumerate().skip(1) {
        let row = &h[b][user];
        for c in 0..w.users() {
            let p = gain(row, w.w.column(c)).norm_sqr();
            if b == own && c == own_col {
                signal = p;
            } else {
                interference += p;
            }
        }
    }
    signal / (interference + noise_w)
}

/// HAPS-layer SINR of `user`: only the other HAPS beams interfere.
pub fn sinr_haps(user: usize, assoc: &Association, h: &[Vec<ChannelRow>], beams: &[BeamformingMatrix], noise_w: f64) -> Result<f64> {
    assoc.check(h, beams)?;
    Ok(haps_sinr_unchecked(user, h, beams, noise_w))
}

fn haps_sinr_unchecked(user: usize, h: &[Vec<ChannelRow>], beams: &[BeamformingMatrix], noise_w: f64) -> f64 {
    let row = &h[HAPS][user];
    let w = &beams[HAPS];
    let mut signal = 0.0;
    let mut interference = 0.0;
    for c in 0..w.users() {
        let p = gain(row, w.w.column(c)).norm_sqr();
        if c == user {
            signal = p;
        } else {
            interference += p;
        }
    }
    signal / (interference + noise_w)
}

/// Dual-connectivity rate in bps/Hz: the two layers use disjoint bands, so
/// their rates add.
pub fn dual_rate(sinr_hab: f64, sinr_haps: f64) -> f64 {
    (1.0 + sinr_hab).log2() + (1.0 + sinr_haps).log2()
}

pub fn user_rate(user: usize, assoc: &Association, h: &[Vec<ChannelRow>], beams: &[BeamformingMatrix], noise_w: f64) -> Result<f64> {
    assoc.check(h, beams)?;
    Ok(dual_rate(
        hab_sinr_unchecked(user, assoc, h, beams, noise_w),
        haps_sinr_unchecked(user, h, beams, noise_w),
    ))
}

/// Mean per-user rate shared by every agent.
pub fn reward(rates: &[f64]) -> f64 {
    if rates.is_empty() {
        return 0.0;
    }
    rates.iter().sum::<f64>() / rates.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub sinr_hab: Vec<f64>,
    pub sinr_haps: Vec<f64>,
    /// Per-user rate, bps/Hz.
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    pub reward: f64,
}

pub fn rate_report(assoc: &Association, h: &[Vec<ChannelRow>], beams: &[BeamformingMatrix], noise_w: f64) -> Result<RateReport> {
    assoc.check(h, beams)?;
    let n = assoc.users();
    let sinr_hab: Vec<f64> = (0..n).map(|u| hab_sinr_unchecked(u, assoc, h, beams, noise_w)).collect();
    let sinr_haps: Vec<f64> = (0..n).map(|u| haps_sinr_unchecked(u, h, beams, noise_w)).collect();
    let rates: Vec<f64> = sinr_hab.iter().zip(&sinr_haps).map(|(a, b)| dual_rate(*a, *b)).collect();
    let sum_rate = rates.iter().sum();
    Ok(RateReport { reward: reward(&rates), sinr_hab, sinr_haps, rates, sum_rate })
}

/// Matched-filter precoder: column `u` is `√p · h_uᴴ / ‖h_u‖`.
pub fn mrt_precoder(bs_id: usize, rows: &[&ChannelRow], radio: &RadioParams) -> Result<BeamformingMatrix> {
    let n = rows.first().map(|r| r.len()).ok_or_else(|| Error::Dimension("MRT with no users".into()))?;
    let mut out = BeamformingMatrix::zeros(bs_id, n, rows.len(), radio);
    let amp = radio.baseline_power(bs_id, rows.len()).sqrt();
    for (c, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Dimension(format!("MRT rows of length {} and {n}", row.len())));
        }
        let norm = row.norm();
        if norm == 0.0 {
            return Err(Error::ZeroChannel { bs: bs_id, user: c });
        }
        for (i, x) in row.iter().enumerate() {
            out.w[(i, c)] = x.conj() * (amp / norm);
        }
    }
    Ok(out)
}

/// Zero-forcing precoder from the pseudo-inverse of the stacked channel,
/// columns normalised and scaled with the same power policy as MRT.
pub fn zf_precoder(bs_id: usize, rows: &[&ChannelRow], radio: &RadioParams) -> Result<BeamformingMatrix> {
    let k = rows.len();
    let n = rows.first().map(|r| r.len()).ok_or_else(|| Error::Dimension("ZF with no users".into()))?;
    if k > n {
        return Err(Error::Dimension(format!("ZF needs users ({k}) ≤ antennas ({n}) at BS {bs_id}")));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("ZF rows of unequal length".into()));
    }
    let hm = DMatrix::from_fn(k, n, |r, c| rows[r][c]);
    let svd = hm.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= ZF_MAX_CONDITION) {
        return Err(Error::RankDeficient { bs: bs_id, cond });
    }
    // H = U Σ Vᴴ  ⇒  H⁺ = V Σ⁻¹ Uᴴ
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut v = v_t.adjoint();
    for (j, s) in svd.singular_values.iter().enumerate() {
        v.column_mut(j).iter_mut().for_each(|x| *x /= C64::from(*s));
    }
    let dirs = v * u.adjoint();

    let mut out = BeamformingMatrix::zeros(bs_id, n, k, radio);
    let amp = radio.baseline_power(bs_id, k).sqrt();
    for c in 0..k {
        let col = dirs.column(c);
        let norm = col.norm();
        for i in 0..n {
            out.w[(i, c)] = col[i] * (amp / norm);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Mrt,
    Zf,
}

/// Precoders for every BS from perfect CSI.
pub fn baseline_beams(kind: Baseline, assoc: &Association, h: &[Vec<ChannelRow>], radio: &RadioParams) -> Result<Vec<BeamformingMatrix>> {
    let build = |bs: usize, rows: Vec<&ChannelRow>| match kind {
        Baseline::Mrt => mrt_precoder(bs, &rows, radio),
        Baseline::Zf => zf_precoder(bs, &rows, radio),
    };
    let mut out = Vec::with_capacity(assoc.clusters + 1);
    out.push(build(HAPS, h[HAPS].iter().collect())?);
    for b in 0..assoc.clusters {
        out.push(build(b + 1, assoc.cluster_users(b).map(|u| &h[b + 1][u]).collect())?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_normal_row;
    use crate::seed::SeedTree;
    use nalgebra::DVector;
    use rand::Rng;

    fn row(v: &[C64]) -> ChannelRow {
        DVector::from_row_slice(v)
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    /// One cluster, one user, HAPS beams zero.
    fn single_user(h_hab: ChannelRow, w_hab: DMatrix<C64>) -> (Association, Vec<Vec<ChannelRow>>, Vec<BeamformingMatrix>) {
        let assoc = Association { clusters: 1, users_per_cluster: 1 };
        let radio = RadioParams::default();
        let n = h_hab.len();
        let haps = BeamformingMatrix::zeros(HAPS, n, 1, &radio);
        let mut hab = BeamformingMatrix::zeros(1, n, 1, &radio);
        hab.w = w_hab;
        (assoc, vec![vec![h_hab.clone()], vec![h_hab]], vec![haps, hab])
    }

    #[test]
    fn lone_user_sinr() {
        let (a, h, b) = single_user(row(&[c(1.0), c(0.0)]), DMatrix::from_column_slice(2, 1, &[c(1.0), c(0.0)]));
        assert_eq!(sinr_hab(0, &a, &h, &b, 1.0).unwrap(), 1.0);
        assert_eq!(sinr_hab(0, &a, &h, &b, 2.0).unwrap(), 0.5);
        assert_eq!(sinr_haps(0, &a, &h, &b, 1.0).unwrap(), 0.0);
        assert_eq!(user_rate(0, &a, &h, &b, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn rates_and_reward() {
        assert_eq!(dual_rate(3.0, 3.0), 4.0);
        assert_eq!(dual_rate(1.0, 0.0), 1.0);
        assert_eq!(reward(&[2.0, 4.0]), 3.0);
        let (a, h, mut b) = single_user(row(&[c(1.0), c(2.0)]), DMatrix::zeros(2, 1));
        b[0].w.fill(c(0.0));
        assert_eq!(rate_report(&a, &h, &b, 1e-13).unwrap().reward, 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let (a, h, b) = single_user(row(&[c(1.0), c(0.0)]), DMatrix::zeros(2, 1));
        assert!(sinr_hab(0, &a, &h[..1], &b, 1.0).is_err());
        let bad = vec![h[0].clone(), vec![row(&[c(1.0)])]];
        assert!(matches!(sinr_haps(0, &a, &bad, &b, 1.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn identity_channel_zf() {
        let radio = RadioParams { p_max_hab_w: 2.0, ..Default::default() };
        let h0 = row(&[c(1.0), c(0.0)]);
        let h1 = row(&[c(0.0), c(1.0)]);
        let w = zf_precoder(1, &[&h0, &h1], &radio).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((w.w[(i, j)] - c(want)).norm() < 1e-12);
            }
        }
        // SINR = 1/σ² with p = 1 and no cross terms.
        let assoc = Association { clusters: 1, users_per_cluster: 2 };
        let haps = BeamformingMatrix::zeros(HAPS, 2, 2, &radio);
        let h = vec![vec![h0.clone(), h1.clone()], vec![h0, h1]];
        let beams = vec![haps, w];
        let s = sinr_hab(0, &assoc, &h, &beams, 0.25).unwrap();
        assert!((s - 4.0).abs() < 1e-9);
    }

    #[test]
    fn zf_two_by_two_nulls() {
        let mut rng = SeedTree::new(21).rng();
        let radio = RadioParams::default();
        let h0 = complex_normal_row(2, &mut rng);
        let h1 = complex_normal_row(2, &mut rng);
        let w = zf_precoder(1, &[&h0, &h1], &radio).unwrap();
        let sig = gain(&h0, w.w.column(0)).norm_sqr();
        let leak = gain(&h0, w.w.column(1)).norm_sqr();
        assert!(leak / sig < 1e-18, "{}", leak / sig);
    }

    #[test]
    fn zf_rejects_collinear_rows() {
        let radio = RadioParams::default();
        let h0 = row(&[c(1.0), c(0.0)]);
        let a = 1e-13f64;
        let h1 = row(&[c(a.cos()), c(a.sin())]);
        assert!(matches!(zf_precoder(3, &[&h0, &h1], &radio), Err(Error::RankDeficient { bs: 3, .. })));
        let h2 = row(&[c(1.0), c(0.0)]);
        assert!(matches!(zf_precoder(1, &[&h0, &h2], &radio), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn mrt_matches_channel_norm() {
        let radio = RadioParams { p_max_hab_w: 1.0, ..Default::default() };
        let h = row(&[c(3.0), c(4.0)]);
        let w = mrt_precoder(1, &[&h], &radio).unwrap();
        assert!((gain(&h, w.w.column(0)).norm_sqr() - 25.0).abs() < 1e-12);
        assert!((w.total_power() - 1.0).abs() < 1e-12);

        let h = row(&[C64::new(0.3, -0.4)]);
        let w = mrt_precoder(1, &[&h], &radio).unwrap();
        let g = gain(&h, w.w.column(0));
        assert!(g.im.abs() < 1e-15 && g.re > 0.0);

        let zero = row(&[c(0.0), c(0.0)]);
        assert!(matches!(mrt_precoder(1, &[&zero], &radio), Err(Error::ZeroChannel { .. })));
    }

    #[test]
    fn baselines_saturate_budget() {
        let mut rng = SeedTree::new(2).rng();
        let radio = RadioParams::default();
        let rows: Vec<ChannelRow> = (0..4).map(|_| complex_normal_row(36, &mut rng)).collect();
        let refs: Vec<&ChannelRow> = rows.iter().collect();
        for w in [mrt_precoder(1, &refs, &radio).unwrap(), zf_precoder(1, &refs, &radio).unwrap()] {
            assert!((w.total_power() - 40.0).abs() < 1e-9);
        }
        for w in [mrt_precoder(HAPS, &refs, &radio).unwrap(), zf_precoder(HAPS, &refs, &radio).unwrap()] {
            for col in 0..4 {
                assert!((w.column_power(col) - 100.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mrt_loses_to_zf_with_two_users() {
        let mut rng = SeedTree::new(33).rng();
        let radio = RadioParams::default();
        let assoc = Association { clusters: 1, users_per_cluster: 2 };
        for _ in 0..100 {
            let rows: Vec<ChannelRow> = (0..2).map(|_| complex_normal_row(4, &mut rng)).collect();
            let refs: Vec<&ChannelRow> = rows.iter().collect();
            let h = vec![rows.clone(), rows.clone()];
            let hab = BeamformingMatrix::zeros(1, 4, 2, &radio);
            let eval = |w: BeamformingMatrix| {
                let beams = vec![w, hab.clone()];
                sinr_haps(0, &assoc, &h, &beams, 1e-3).unwrap()
            };
            let mrt = eval(mrt_precoder(HAPS, &refs, &radio).unwrap());
            let zf = eval(zf_precoder(HAPS, &refs, &radio).unwrap());
            assert!(mrt < zf, "mrt {mrt} zf {zf}");
        }
    }

    #[test]
    fn projection_cases() {
        let radio = RadioParams::default();
        let mut hab = BeamformingMatrix::zeros(1, 4, 4, &radio);
        hab.w.fill(c(10f64.sqrt())); // 16 entries × 10 W = 160 W
        let p = project_power(&hab).unwrap();
        for (a, b) in p.w.iter().zip(hab.w.iter()) {
            assert!((a - b * 0.5).norm() < 1e-12);
        }

        let mut ok = BeamformingMatrix::zeros(1, 2, 2, &radio);
        ok.w[(0, 0)] = C64::new(1.5, -2.0);
        assert_eq!(project_power(&ok).unwrap(), ok);

        let mut haps = BeamformingMatrix::zeros(HAPS, 4, 3, &radio);
        haps.w.column_mut(0).fill(c(10.0)); // 400 W = 4·P_max
        haps.w.column_mut(1).fill(c(1.0));
        let p = project_power(&haps).unwrap();
        assert!((p.w[(0, 0)] - c(5.0)).norm() < 1e-12);
        assert_eq!(p.w.column(1), haps.w.column(1));

        let mut bad = ok.clone();
        bad.w[(1, 1)] = C64::new(f64::NAN, 0.0);
        assert!(project_power(&bad).is_err());
    }

    #[test]
    fn zeroed_habs_leave_haps_rate() {
        let mut rng = SeedTree::new(8).rng();
        let radio = RadioParams::default();
        let assoc = Association { clusters: 2, users_per_cluster: 2 };
        let h: Vec<Vec<ChannelRow>> = (0..3).map(|_| (0..4).map(|_| complex_normal_row(16, &mut rng)).collect()).collect();
        let mut beams = baseline_beams(Baseline::Zf, &assoc, &h, &radio).unwrap();
        for b in beams.iter_mut().skip(1) {
            b.w.fill(c(0.0));
        }
        let r = rate_report(&assoc, &h, &beams, 1.0).unwrap();
        assert!(r.sinr_hab.iter().all(|s| *s == 0.0));
        let haps_mean = r.sinr_haps.iter().map(|s| (1.0 + s).log2()).sum::<f64>() / 4.0;
        assert!((r.reward - haps_mean).abs() < 1e-12);
    }

    #[test]
    fn rate_grows_with_own_power() {
        let mut rng = SeedTree::new(17).rng();
        let radio = RadioParams { p_max_hab_w: 1e6, ..Default::default() };
        let assoc = Association { clusters: 2, users_per_cluster: 2 };
        let h: Vec<Vec<ChannelRow>> = (0..3).map(|_| (0..4).map(|_| complex_normal_row(4, &mut rng)).collect()).collect();
        let mut beams = baseline_beams(Baseline::Mrt, &assoc, &h, &radio).unwrap();
        let mut last = 0.0;
        for k in 1..20 {
            beams[1].w.column_mut(0).iter_mut().for_each(|x| *x *= C64::from(1.1));
            let r = user_rate(0, &assoc, &h, &beams, 0.1).unwrap();
            assert!(r >= last, "step {k}");
            last = r;
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn projection_properties(seed in 0u64..10_000, scale in 0.01f64..100.0, haps in proptest::bool::ANY) {
            let mut rng = SeedTree::new(seed).rng();
            let radio = RadioParams::default();
            let bs = if haps { HAPS } else { 1 };
            let mut m = BeamformingMatrix::zeros(bs, 9, 3, &radio);
            for x in m.w.iter_mut() {
                *x = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * scale;
            }
            let p = project_power(&m).unwrap();
            proptest::prop_assert!(p.is_feasible(1e-9));
            proptest::prop_assert_eq!(&project_power(&p).unwrap(), &p);
            for col in 0..3 {
                let ratio = p.column_power(col) / m.column_power(col);
                proptest::prop_assert!(ratio <= 1.0 + 1e-15);
                for i in 0..9 {
                    let d = p.w[(i, col)] - m.w[(i, col)] * ratio.sqrt();
                    proptest::prop_assert!(d.norm() <= 1e-12 * m.w[(i, col)].norm().max(1e-300));
                }
            }
        }
    }
}
