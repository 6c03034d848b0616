use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Actor, ActorKind, ActorPair, Hyperparams, Scaling};
use crate::neural::checkpoint::{decode, encode};
use crate::neural::LayerParams;
use crate::{Error, Result};

pub const MANIFEST_FORMAT: &str = "aerobeam-actors/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorManifest {
    pub kind: ActorKind,
    pub rows: usize,
    pub antennas: usize,
    /// Real coefficients per head.
    pub action_dim: usize,
    pub scaling: Scaling,
}

impl ActorManifest {
    fn of(a: &Actor) -> Self {
        ActorManifest { kind: a.kind, rows: a.rows, antennas: a.antennas, action_dim: a.action_dim(), scaling: a.scaling }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    /// Training episodes completed when the file was written.
    pub episodes: usize,
    /// SHA-256 (hex) of the run configuration that produced it.
    pub config_hash: String,
    pub hyperparams: Hyperparams,
    pub actors: Vec<ActorManifest>,
}

impl CheckpointManifest {
    pub fn new(pair: &ActorPair, episodes: usize, config_hash: &str, hyperparams: &Hyperparams) -> Self {
        CheckpointManifest {
            format: MANIFEST_FORMAT.into(),
            episodes,
            config_hash: config_hash.into(),
            hyperparams: hyperparams.clone(),
            actors: vec![ActorManifest::of(&pair.hab), ActorManifest::of(&pair.haps)],
        }
    }
}

pub fn checkpoint_bytes(pair: &ActorPair, manifest: &CheckpointManifest) -> Result<Vec<u8>> {
    let json = serde_json::to_string(manifest).map_err(|e| Error::CheckpointFormat(e.to_string()))?;
    let layers: Vec<&LayerParams> = pair.hab.layers().iter().chain(pair.haps.layers()).collect();
    Ok(encode(&json, &layers))
}

pub fn save_checkpoint(path: &Path, pair: &ActorPair, manifest: &CheckpointManifest) -> Result<()> {
    let bytes = checkpoint_bytes(pair, manifest)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<(ActorPair, CheckpointManifest)> {
    let (json, layers) = decode(bytes)?;
    let manifest: CheckpointManifest = serde_json::from_str(&json).map_err(|e| Error::CheckpointFormat(format!("manifest: {e}")))?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(Error::CheckpointFormat(format!("unknown manifest format {:?}", manifest.format)));
    }
    let [hab, haps] = manifest.actors.as_slice() else {
        return Err(Error::CheckpointFormat("manifest must list two actors".into()));
    };
    if hab.kind != ActorKind::Hab || haps.kind != ActorKind::Haps {
        return Err(Error::CheckpointFormat("actors must be listed HAB then HAPS".into()));
    }
    let (hab_layers, haps_layers): (Vec<_>, Vec<_>) = layers.into_iter().partition(|l| l.name.starts_with("hab."));
    let build = |m: &ActorManifest, layers| Actor::from_layers(m.kind, m.rows, m.antennas, m.scaling, layers);
    let pair = ActorPair { hab: build(hab, hab_layers)?, haps: build(haps, haps_layers)? };
    Ok((pair, manifest))
}

pub fn load_checkpoint(path: &Path) -> Result<(ActorPair, CheckpointManifest)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&bytes)
}
