//! `aerobeam` command line.
//!
//! Exit codes: 0 success, 2 usage, 3 configuration, 4 checkpoint does not
//! fit the configuration, 5 unreadable or malformed checkpoint, 6 training
//! diverged, 7 selftest failure, 8 output could not be written, 1 anything
//! else.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::results::{emit_results, ResultRow};
use super::selftest::run_selftest;
use super::sweep::{parse_values, per_k_path, run_sweep, PolicySource, SweepOptions, SweepParam};
use super::{Mode, RunConfig};
use crate::agents::{save_checkpoint, train, ActionMode, CheckpointManifest};
use crate::Error;

/// Overrides `run.output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "AEROBEAM_OUTPUT_DIR";

pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const CHECKPOINT_MISMATCH: i32 = 4;
    pub const CHECKPOINT_FORMAT: i32 = 5;
    pub const DIVERGED: i32 = 6;
    pub const SELFTEST: i32 = 7;
    pub const OUTPUT: i32 = 8;
}

#[derive(Parser, Debug)]
#[command(name = "aerobeam", version, about = "Two-layer HAPS/HAB beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Run-configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train both actors; writes the training log and checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
        /// Where to write the final checkpoint (default: <output>/checkpoint.bin).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate a checkpoint against ZF and MRT on paired seeds.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Trained actors (default: run.checkpoint from the config).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Act with the policy mean instead of sampling.
        #[arg(long)]
        mean_action: bool,
        /// Override the number of evaluation episodes.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Sweep ξ, l or K.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Swept parameter: xi, l or K.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        /// Checkpoint used at every point (ξ and l sweeps).
        #[arg(long, conflicts_with = "checkpoint_dir")]
        checkpoint: Option<PathBuf>,
        /// Directory holding k<K>.bin for every K (K sweeps).
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
        /// Act with the policy mean instead of sampling.
        #[arg(long)]
        mean_action: bool,
        /// Override the number of evaluation episodes per point.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Run the built-in invariant checks.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::NotSquare(_) => exit::CONFIG,
            Error::CheckpointMismatch(_) => exit::CHECKPOINT_MISMATCH,
            Error::CheckpointFormat(_) | Error::MissingCheckpoints(_) => exit::CHECKPOINT_FORMAT,
            Error::Diverged { .. } | Error::NonFinite(_) => exit::DIVERGED,
            _ => exit::OTHER,
        };
        Failure { code, message: e.to_string() }
    }
}

fn fail(code: i32, e: impl std::fmt::Display) -> Failure {
    Failure { code, message: e.to_string() }
}

/// Runs the CLI and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => exit::OK,
        Err(f) => {
            eprintln!("aerobeam: {}", f.message);
            f.code
        }
    }
}

fn load_config(common: &Common, mode: Mode) -> Result<RunConfig, Failure> {
    let mut cfg = match RunConfig::load(&common.config) {
        Ok(c) => c,
        Err(Error::Io { path, source }) => return Err(fail(exit::CONFIG, format!("cannot read config {}: {source}", path.display()))),
        Err(e) => return Err(e.into()),
    };
    cfg.run.mode = mode;
    if let Some(s) = common.seed {
        cfg.run.seed = s;
    }
    if let Some(d) = &common.output_dir {
        cfg.run.output_dir = d.clone();
    }
    if let Some(d) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
        cfg.run.output_dir = PathBuf::from(d);
    }
    Ok(cfg)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| fail(exit::OUTPUT, format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| fail(exit::OUTPUT, format!("{}: {e}", path.display())))
}

fn output_error(e: Error) -> Failure {
    match e {
        Error::Io { .. } => fail(exit::OUTPUT, e),
        e => e.into(),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train { common, checkpoint } => {
            let cfg = load_config(&common, Mode::Train)?;
            let out_dir = cfg.run.output_dir.clone();
            write(&out_dir.join("config.toml"), cfg.to_toml()?)?;
            let outcome = train(&cfg, Some(&out_dir.join("checkpoints"))).map_err(output_error)?;
            write(&out_dir.join("train_log.csv"), outcome.log_csv())?;
            let path = checkpoint.or_else(|| cfg.run.checkpoint.clone()).unwrap_or_else(|| out_dir.join("checkpoint.bin"));
            let manifest = CheckpointManifest::new(&outcome.actors, cfg.hyperparams.episodes, &cfg.hash(), &cfg.hyperparams);
            save_checkpoint(&path, &outcome.actors, &manifest).map_err(output_error)?;
            let last = outcome.log.last().map_or(f64::NAN, |e| e.mean_reward);
            println!("trained {} episodes; final mean reward {last:.4}; checkpoint {}", outcome.log.len(), path.display());
            Ok(())
        }
        Command::Eval { common, checkpoint, mean_action, episodes } => {
            let cfg = load_config(&common, Mode::Eval)?;
            let path = checkpoint
                .or_else(|| cfg.run.checkpoint.clone())
                .ok_or_else(|| fail(exit::USAGE, "eval needs --checkpoint (or run.checkpoint in the config)"))?;
            let opts = SweepOptions {
                episodes: episodes.unwrap_or(cfg.hyperparams.eval_episodes),
                mode: if mean_action || cfg.run.mean_action { ActionMode::Mean } else { ActionMode::Sample },
            };
            let rows = run_sweep(&cfg, SweepParam::Xi, &[cfg.channel.xi], &PolicySource::Single(path), &opts)?;
            finish(&cfg, &rows)
        }
        Command::Sweep { common, param, values, checkpoint, checkpoint_dir, mean_action, episodes } => {
            let cfg = load_config(&common, Mode::Sweep)?;
            let param: SweepParam = param.parse().map_err(|e| fail(exit::USAGE, e))?;
            let values = parse_values(&values).map_err(|e| fail(exit::USAGE, e))?;
            let policy = match (checkpoint.or_else(|| cfg.run.checkpoint.clone()), checkpoint_dir) {
                (_, Some(dir)) => PolicySource::PerK(dir),
                (Some(path), None) => PolicySource::Single(path),
                (None, None) => PolicySource::None,
            };
            if let (SweepParam::K, PolicySource::Single(p)) = (param, &policy) {
                if values.len() > 1 {
                    let dir = p.parent().unwrap_or(Path::new("."));
                    return Err(fail(
                        exit::USAGE,
                        format!("a K sweep needs one checkpoint per K; pass --checkpoint-dir with files like {}", per_k_path(dir, 4).display()),
                    ));
                }
            }
            let opts = SweepOptions {
                episodes: episodes.unwrap_or(cfg.hyperparams.eval_episodes),
                mode: if mean_action || cfg.run.mean_action { ActionMode::Mean } else { ActionMode::Sample },
            };
            let rows = run_sweep(&cfg, param, &values, &policy, &opts)?;
            finish(&cfg, &rows)
        }
        Command::Selftest { seed } => {
            let checks = run_selftest(seed);
            for c in &checks {
                println!("{} {:<18} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(fail(exit::SELFTEST, "selftest failed"))
            }
        }
    }
}

fn finish(cfg: &RunConfig, rows: &[ResultRow]) -> Result<(), Failure> {
    emit_results(rows, &cfg.run.output_dir).map_err(output_error)?;
    println!("wrote {} rows to {}", rows.len(), cfg.run.output_dir.join("results.csv").display());
    Ok(())
}
