//! C ABI for the aerobeam simulator.
//!
//! Every object crosses the boundary as an opaque pointer created by an
//! `ab_*_new`/`ab_*_load` function and released with the matching
//! `ab_*_free`. Fallible calls return an [`AbStatus`]; on failure a
//! description is available from [`ab_last_error`] on the same thread
//! until the next failing call.
//!
//! Beam buffers are flat `double` arrays holding, for each base station in
//! order (HAPS first, then HAB 1..B), its `antennas × users` matrix in
//! column-major order with interleaved real and imaginary parts.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use aerobeam::agents::{evaluate, load_checkpoint, save_checkpoint, train, ActionMode, ActorPair, CheckpointManifest, Method};
use aerobeam::env::Environment;
use aerobeam::harness::RunConfig;
use aerobeam::radio::{baseline_beams, project_power, Baseline, BeamformingMatrix};
use aerobeam::seed::SeedTree;
use aerobeam::{Error, C64};

/// Result of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    CheckpointMismatch = 4,
    CheckpointFormat = 5,
    Diverged = 6,
    Io = 7,
    Dimension = 8,
    Numerical = 9,
    Panic = 10,
}

/// Beamformer used by [`ab_env_evaluate_baseline`] and [`ab_evaluate`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbMethod {
    Zf = 0,
    Mrt = 1,
    /// The policy passed alongside, sampling actions.
    DrlSample = 2,
    /// The policy passed alongside, acting with its mean.
    DrlMean = 3,
}

/// Rates of one slot.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AbRates {
    /// Sum over users of the dual-connectivity rate, bps/Hz.
    pub sum_rate: f64,
    /// Mean user rate (the shared reward), bps/Hz.
    pub reward: f64,
}

/// Run configuration.
pub struct AbConfig(RunConfig);

/// One simulated network.
pub struct AbEnv(Environment);

/// A trained (or freshly initialised) pair of actors.
pub struct AbPolicy(ActorPair);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> AbStatus {
    match e {
        Error::Config(_) | Error::NotSquare(_) => AbStatus::Config,
        Error::CheckpointMismatch(_) => AbStatus::CheckpointMismatch,
        Error::CheckpointFormat(_) | Error::MissingCheckpoints(_) => AbStatus::CheckpointFormat,
        Error::Diverged { .. } => AbStatus::Diverged,
        Error::Io { .. } => AbStatus::Io,
        Error::Dimension(_) => AbStatus::Dimension,
        _ => AbStatus::Numerical,
    }
}

struct Fail(AbStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AbStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            AbStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(AbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(AbStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default (full-scale) configuration.
#[no_mangle]
pub extern "C" fn ab_config_default() -> *mut AbConfig {
    Box::into_raw(Box::new(AbConfig(RunConfig::default())))
}

/// Parses a TOML run configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ab_config_from_toml(toml: *const c_char, out: *mut *mut AbConfig) -> AbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let cfg = RunConfig::from_toml(str_arg(toml, "toml")?)?;
        *out = Box::into_raw(Box::new(AbConfig(cfg)));
        Ok(())
    })
}

/// Serialises a configuration to TOML. Free the result with
/// [`ab_string_free`].
///
/// # Safety
/// `cfg` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ab_config_to_toml(cfg: *const AbConfig, out: *mut *mut c_char) -> AbStatus {
    guard(|| {
        let cfg = in_ref(cfg, "cfg")?;
        let out = out_ptr(out, "out")?;
        let text = cfg.0.to_toml()?;
        *out = CString::new(text).map_err(|_| Fail(AbStatus::Config, "NUL in config".into()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn ab_config_set_seed(cfg: *mut AbConfig, seed: u64) -> AbStatus {
    guard(|| {
        out_ptr(cfg, "cfg")?.0.run.seed = seed;
        Ok(())
    })
}

/// Sets the number of training episodes.
///
/// # Safety
/// `cfg` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn ab_config_set_episodes(cfg: *mut AbConfig, episodes: usize) -> AbStatus {
    guard(|| {
        out_ptr(cfg, "cfg")?.0.hyperparams.episodes = episodes;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ab_config_free(cfg: *mut AbConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates an environment. Call [`ab_env_reset`] before stepping.
///
/// # Safety
/// `cfg` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ab_env_new(cfg: *const AbConfig, out: *mut *mut AbEnv) -> AbStatus {
    guard(|| {
        let cfg = &in_ref(cfg, "cfg")?.0;
        let out = out_ptr(out, "out")?;
        cfg.validate()?;
        let env = Environment::new(cfg.scenario.clone(), cfg.channel.clone(), cfg.radio.clone())?;
        *out = Box::into_raw(Box::new(AbEnv(env)));
        Ok(())
    })
}

/// # Safety
/// `env` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ab_env_free(env: *mut AbEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Starts an episode whose randomness derives from `(seed, episode)`.
///
/// # Safety
/// `env` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn ab_env_reset(env: *mut AbEnv, seed: u64, episode: u64) -> AbStatus {
    guard(|| {
        let env = out_ptr(env, "env")?;
        env.0.reset(&SeedTree::new(seed).child("eval").index(episode))?;
        Ok(())
    })
}

/// Moves users one slot and advances the channels.
///
/// # Safety
/// `env` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn ab_env_advance(env: *mut AbEnv) -> AbStatus {
    guard(|| {
        out_ptr(env, "env")?.0.advance()?;
        Ok(())
    })
}

/// Number of `double`s in a full beam buffer (see the crate docs).
///
/// # Safety
/// `env` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn ab_env_beam_len(env: *const AbEnv) -> usize {
    match env.as_ref() {
        Some(e) => beam_shapes(&e.0).iter().map(|(n, u)| 2 * n * u).sum(),
        None => 0,
    }
}

fn beam_shapes(env: &Environment) -> Vec<(usize, usize)> {
    let sc = &env.scenario;
    let mut v = vec![(sc.haps_antennas, sc.total_users())];
    v.extend(std::iter::repeat_n((sc.hab_antennas, sc.users_per_cluster), sc.habs));
    v
}

fn report(env: &Environment, beams: &[BeamformingMatrix]) -> Result<AbRates, Fail> {
    let r = env.evaluate(beams)?;
    Ok(AbRates { sum_rate: r.sum_rate, reward: r.reward })
}

/// Rates of the current slot under ZF or MRT beams from perfect CSI.
///
/// # Safety
/// `env` must come from this library and have been reset; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ab_env_evaluate_baseline(env: *const AbEnv, method: AbMethod, out: *mut AbRates) -> AbStatus {
    guard(|| {
        let env = &in_ref(env, "env")?.0;
        let out = out_ptr(out, "out")?;
        let kind = match method {
            AbMethod::Zf => Baseline::Zf,
            AbMethod::Mrt => Baseline::Mrt,
            _ => return Err(Fail(AbStatus::InvalidArgument, "not a baseline method".into())),
        };
        if env.true_channels().is_empty() {
            return Err(Fail(AbStatus::InvalidArgument, "environment has not been reset".into()));
        }
        let beams = baseline_beams(kind, env.association(), env.true_channels(), &env.radio)?;
        *out = report(env, &beams)?;
        Ok(())
    })
}

/// Rates of the current slot under caller-supplied beams, which are first
/// projected onto the power budgets.
///
/// # Safety
/// `env` must come from this library and have been reset; `beams` must
/// point to `len` doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ab_env_evaluate_beams(env: *const AbEnv, beams: *const f64, len: usize, out: *mut AbRates) -> AbStatus {
    guard(|| {
        let env = &in_ref(env, "env")?.0;
        let out = out_ptr(out, "out")?;
        if beams.is_null() {
            return Err(null("beams"));
        }
        if env.true_channels().is_empty() {
            return Err(Fail(AbStatus::InvalidArgument, "environment has not been reset".into()));
        }
        let shapes = beam_shapes(env);
        let want: usize = shapes.iter().map(|(n, u)| 2 * n * u).sum();
        if len != want {
            return Err(Fail(AbStatus::Dimension, format!("beam buffer has {len} doubles, expected {want}")));
        }
        let data = std::slice::from_raw_parts(beams, len);
        let mut mats = Vec::with_capacity(shapes.len());
        let mut pos = 0;
        for (bs, (n, u)) in shapes.into_iter().enumerate() {
            let mut w = BeamformingMatrix::zeros(bs, n, u, &env.radio);
            for col in 0..u {
                for row in 0..n {
                    w.w[(row, col)] = C64::new(data[pos], data[pos + 1]);
                    pos += 2;
                }
            }
            mats.push(project_power(&w)?);
        }
        *out = report(env, &mats)?;
        Ok(())
    })
}

/// Copies the true channel of (`bs`, `user`) as interleaved re/im into
/// `out`, which must hold `2 × antennas(bs)` doubles.
///
/// # Safety
/// `env` must come from this library; `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ab_env_channel(env: *const AbEnv, bs: usize, user: usize, out: *mut f64, len: usize) -> AbStatus {
    guard(|| {
        let env = &in_ref(env, "env")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let h = env
            .true_channels()
            .get(bs)
            .and_then(|r| r.get(user))
            .ok_or_else(|| Fail(AbStatus::InvalidArgument, format!("no channel for BS {bs}, user {user}")))?;
        if len != 2 * h.len() {
            return Err(Fail(AbStatus::Dimension, format!("buffer of {len}, need {}", 2 * h.len())));
        }
        let out = std::slice::from_raw_parts_mut(out, len);
        for (i, x) in h.iter().enumerate() {
            out[2 * i] = x.re;
            out[2 * i + 1] = x.im;
        }
        Ok(())
    })
}

/// Loads a checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ab_policy_load(path: *const c_char, out: *mut *mut AbPolicy) -> AbStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        let out = out_ptr(out, "out")?;
        let (pair, _) = load_checkpoint(&path)?;
        *out = Box::into_raw(Box::new(AbPolicy(pair)));
        Ok(())
    })
}

/// # Safety
/// `policy` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ab_policy_free(policy: *mut AbPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Trains both actors. When `checkpoint_path` is non-null the final
/// checkpoint is written there.
///
/// # Safety
/// `cfg` must come from this library; `checkpoint_path` null or a
/// NUL-terminated string; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ab_train(cfg: *const AbConfig, checkpoint_path: *const c_char, out: *mut *mut AbPolicy) -> AbStatus {
    guard(|| {
        let cfg = &in_ref(cfg, "cfg")?.0;
        let out = out_ptr(out, "out")?;
        let path = if checkpoint_path.is_null() { None } else { Some(PathBuf::from(str_arg(checkpoint_path, "checkpoint_path")?)) };
        let outcome = train(cfg, None)?;
        if let Some(path) = path {
            let manifest = CheckpointManifest::new(&outcome.actors, cfg.hyperparams.episodes, &cfg.hash(), &cfg.hyperparams);
            save_checkpoint(&path, &outcome.actors, &manifest)?;
        }
        *out = Box::into_raw(Box::new(AbPolicy(outcome.actors)));
        Ok(())
    })
}

/// Evaluates a method over `episodes` paired-seed episodes and writes the
/// per-slot mean sum-rate into `out_mean` (`len` must equal the episode
/// length `T`). `policy` is required for the DRL methods and ignored
/// otherwise.
///
/// # Safety
/// `cfg` must come from this library; `policy` null or from this library;
/// `out_mean` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ab_evaluate(
    cfg: *const AbConfig,
    policy: *const AbPolicy,
    method: AbMethod,
    episodes: usize,
    out_mean: *mut f64,
    len: usize,
) -> AbStatus {
    guard(|| {
        let cfg = &in_ref(cfg, "cfg")?.0;
        if out_mean.is_null() {
            return Err(null("out_mean"));
        }
        if len != cfg.scenario.slots {
            return Err(Fail(AbStatus::Dimension, format!("series buffer of {len}, episode length is {}", cfg.scenario.slots)));
        }
        let m = match method {
            AbMethod::Zf => Method::Baseline(Baseline::Zf),
            AbMethod::Mrt => Method::Baseline(Baseline::Mrt),
            AbMethod::DrlSample | AbMethod::DrlMean => {
                let actors = &in_ref(policy, "policy")?.0;
                let mode = if method == AbMethod::DrlMean { ActionMode::Mean } else { ActionMode::Sample };
                Method::Drl { actors, mode }
            }
        };
        let series = evaluate(m, cfg, episodes)?;
        std::slice::from_raw_parts_mut(out_mean, len).copy_from_slice(&series.mean);
        Ok(())
    })
}
