//! Loading of the preprocessed data and checkpoint, and the query path
//! shared by the command line and the HTTP service.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::climate::{ClimateError, TemperatureVectors};
use crate::corpus::{CorpusError, Vocabulary};
use crate::export::{snapshot_hash, Provenance};
use crate::generation::{self, GenerationError, GenerationQuery, GenerationResult, RangeResult};
use crate::training::{Checkpoint, CheckpointError};

pub const TEMPERATURES_FILE: &str = "temperatures.json";
pub const VOCAB_FILE: &str = "vocab.json";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "history.json";
pub const CLIMATE_FILE: &str = "tokyo_tmax_monthly.csv";
pub const CORPUS_DIR: &str = "corpus";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("temperature snapshot {0} not found; run `tempered preprocess` first")]
    MissingSnapshot(PathBuf),
    #[error("checkpoint {0} not found; run `tempered train` first")]
    MissingCheckpoint(PathBuf),
    #[error(transparent)]
    Climate(#[from] ClimateError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// Year-indexed temperatures plus the hash of their canonical text.
#[derive(Clone, Debug)]
pub struct LoadedData {
    pub vectors: TemperatureVectors,
    pub snapshot_hash: String,
}

impl LoadedData {
    pub fn new(vectors: TemperatureVectors) -> Self {
        let snapshot_hash = snapshot_hash(&vectors);
        Self { vectors, snapshot_hash }
    }

    pub fn load(data_dir: &Path) -> Result<Self, EngineError> {
        let path = data_dir.join(TEMPERATURES_FILE);
        if !path.exists() {
            return Err(EngineError::MissingSnapshot(path));
        }
        Ok(Self::new(TemperatureVectors::load(&path)?))
    }
}

/// An immutable checkpoint with its content hash.
#[derive(Clone, Debug)]
pub struct LoadedModel {
    pub checkpoint: Checkpoint,
    pub checkpoint_hash: String,
}

impl LoadedModel {
    pub fn new(checkpoint: Checkpoint) -> Self {
        let checkpoint_hash = checkpoint.content_hash();
        Self { checkpoint, checkpoint_hash }
    }

    /// Load `path`; when `vocab_path` exists the checkpoint must match it.
    pub fn load(path: &Path, vocab_path: Option<&Path>) -> Result<Self, EngineError> {
        if !path.exists() {
            return Err(EngineError::MissingCheckpoint(path.to_path_buf()));
        }
        let checkpoint = Checkpoint::load(path)?;
        if let Some(vp) = vocab_path.filter(|p| p.exists()) {
            checkpoint.ensure_vocab(&Vocabulary::load(vp)?)?;
        }
        Ok(Self::new(checkpoint))
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.checkpoint.vocab
    }

    pub fn sql(&self) -> usize {
        self.checkpoint.config.sql
    }

    pub fn provenance(&self, data: &LoadedData) -> Provenance {
        Provenance {
            checkpoint_hash: self.checkpoint_hash.clone(),
            snapshot_hash: data.snapshot_hash.clone(),
            vocab_hash: self.checkpoint.vocab_hash(),
        }
    }
}

pub fn default_checkpoint(data_dir: &Path) -> PathBuf {
    data_dir.join(CHECKPOINT_FILE)
}

/// The single generation entry point behind `generate` and `POST /api/generate`.
pub fn run_query(
    query: &GenerationQuery,
    model: &LoadedModel,
    data: &LoadedData,
) -> Result<GenerationResult, GenerationError> {
    generation::generate(query, &model.checkpoint, &data.vectors)
}

pub fn run_range(
    from: i32,
    to: i32,
    template: &GenerationQuery,
    model: &LoadedModel,
    data: &LoadedData,
) -> Result<RangeResult, GenerationError> {
    generation::generate_range(from, to, template, &model.checkpoint, &data.vectors)
}
