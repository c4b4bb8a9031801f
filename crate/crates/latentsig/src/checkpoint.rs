//! Training checkpoints.
//!
//! A checkpoint is one JSON object:
//!
//! ```text
//! { "format": "latentsig-checkpoint", "version": 1,
//!   "sha256": "<hex digest of the body text>",
//!   "body": { "train_config": {..}, "state": { "params": {..}, "adam": {..},
//!             "next_epoch": n, "history": {..} } } }
//! ```
//!
//! The digest covers the exact bytes of `body` as written. Loading checks
//! format, version and digest before anything is deserialised, so a
//! truncated or edited file never yields a partial state.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use latentsig_core::trainkit::{TrainConfig, TrainState};

use crate::io::atomic_write;

pub const FORMAT: &str = "latentsig-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint: {0}")]
    Parse(String),
    #[error("unexpected format tag {0:?}")]
    Format(String),
    #[error("checkpoint version {found} is not supported (expected {VERSION})")]
    Version { found: u32 },
    #[error("checksum mismatch: file is corrupted")]
    Checksum,
    #[error("write failed: {0}")]
    Write(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub train_config: TrainConfig,
    pub state: TrainState,
}

#[derive(Serialize)]
struct EnvelopeOut<'a> {
    format: &'a str,
    version: u32,
    sha256: String,
    body: &'a RawValue,
}

#[derive(Deserialize)]
struct EnvelopeIn<'a> {
    format: String,
    version: u32,
    sha256: String,
    #[serde(borrow)]
    body: &'a RawValue,
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn to_bytes(ck: &Checkpoint) -> Result<Vec<u8>, CheckpointError> {
    let body = serde_json::to_string(ck).map_err(|e| CheckpointError::Write(e.to_string()))?;
    let raw = RawValue::from_string(body).map_err(|e| CheckpointError::Write(e.to_string()))?;
    let env = EnvelopeOut {
        format: FORMAT,
        version: VERSION,
        sha256: hex_digest(raw.get().as_bytes()),
        body: &raw,
    };
    let mut out = serde_json::to_vec(&env).map_err(|e| CheckpointError::Write(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CheckpointError::Parse(e.to_string()))?;
    let env: EnvelopeIn<'_> = serde_json::from_str(text).map_err(|e| CheckpointError::Parse(e.to_string()))?;
    if env.format != FORMAT {
        return Err(CheckpointError::Format(env.format));
    }
    if env.version != VERSION {
        return Err(CheckpointError::Version { found: env.version });
    }
    if hex_digest(env.body.get().as_bytes()) != env.sha256 {
        return Err(CheckpointError::Checksum);
    }
    serde_json::from_str(env.body.get()).map_err(|e| CheckpointError::Parse(e.to_string()))
}

pub fn save(path: &Path, ck: &Checkpoint) -> Result<(), CheckpointError> {
    atomic_write(path, &to_bytes(ck)?).map_err(|e| CheckpointError::Write(format!("{e:#}")))
}

pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
    from_bytes(&std::fs::read(path)?)
}
