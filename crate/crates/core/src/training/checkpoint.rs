//! Binary checkpoint container.
//!
//! Layout: 8-byte magic, `u32` version, `u64` header length, a JSON header,
//! every tensor as little-endian `f64` in header order, then a SHA-256 of all
//! preceding bytes. Integers are little-endian.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{TrainConfig, TrainHistory};
use crate::corpus::Vocabulary;
use crate::neural::{ModelDims, ModelParams, TENSOR_NAMES};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"TMPRCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

const PREFIX_LEN: usize = 8 + 4 + 8;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint is truncated or corrupt: {0}")]
    Truncated(String),
    #[error("checkpoint header: {0}")]
    Header(String),
    #[error(
        "checkpoint was trained against vocabulary {checkpoint} but the supplied vocabulary hashes to {supplied}; rerun `train` or use the matching vocab.json"
    )]
    VocabMismatch { checkpoint: String, supplied: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dims: ModelDims,
    config: TrainConfig,
    vocab: serde_json::Value,
    vocab_hash: String,
    history: TrainHistory,
    tensors: Vec<TensorInfo>,
}

/// A trained model with everything needed to use it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub history: TrainHistory,
}

impl Checkpoint {
    pub fn vocab_hash(&self) -> String {
        self.vocab.content_hash()
    }

    pub fn tensor_info(&self) -> Vec<TensorInfo> {
        self.params
            .tensors()
            .iter()
            .map(|(name, m)| TensorInfo { name: name.to_string(), shape: [m.rows(), m.cols()] })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            dims: self.params.dims,
            config: self.config.clone(),
            vocab: serde_json::from_str(&self.vocab.to_json()).expect("vocabulary json is valid"),
            vocab_hash: self.vocab_hash(),
            history: self.history.clone(),
            tensors: self.tensor_info(),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(PREFIX_LEN + header.len() + self.params.parameter_count() * 8 + 32);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, m) in self.params.tensors() {
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 8 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        if bytes.len() < PREFIX_LEN + DIGEST_LEN {
            return Err(CheckpointError::Truncated(format!("only {} bytes", bytes.len())));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(CheckpointError::Truncated("checksum does not match contents".into()));
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let data_start = PREFIX_LEN
            .checked_add(header_len)
            .filter(|&end| end <= body.len())
            .ok_or_else(|| CheckpointError::Truncated("header runs past end of file".into()))?;
        let header: Header = serde_json::from_slice(&body[PREFIX_LEN..data_start])
            .map_err(|e| CheckpointError::Header(e.to_string()))?;
        let vocab_text = serde_json::to_string(&header.vocab).map_err(|e| CheckpointError::Header(e.to_string()))?;
        let vocab = Vocabulary::from_json(&vocab_text).map_err(|e| CheckpointError::Header(e.to_string()))?;
        if vocab.content_hash() != header.vocab_hash {
            return Err(CheckpointError::Header("embedded vocabulary does not match its hash".into()));
        }
        if header.dims.pitch_vocab != vocab.pitch_len() || header.dims.duration_vocab != vocab.duration_len() {
            return Err(CheckpointError::Header("model dims disagree with the vocabulary".into()));
        }

        let mut params = ModelParams::zeros(header.dims);
        if header.tensors.len() != TENSOR_NAMES.len() {
            return Err(CheckpointError::Header(format!("expected {} tensors", TENSOR_NAMES.len())));
        }
        let mut data = &body[data_start..];
        for ((name, m), info) in params.tensors_mut().into_iter().zip(&header.tensors) {
            if info.name != name || info.shape != [m.rows(), m.cols()] {
                return Err(CheckpointError::Header(format!(
                    "tensor {} {:?} does not match expected {} {:?}",
                    info.name,
                    info.shape,
                    name,
                    [m.rows(), m.cols()]
                )));
            }
            let n = m.len() * 8;
            if data.len() < n {
                return Err(CheckpointError::Truncated(format!("tensor {name} is incomplete")));
            }
            for (v, chunk) in m.as_mut_slice().iter_mut().zip(data[..n].chunks_exact(8)) {
                *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            }
            data = &data[n..];
        }
        if !data.is_empty() {
            return Err(CheckpointError::Truncated(format!("{} trailing bytes", data.len())));
        }
        Ok(Self { params, config: header.config, vocab, history: header.history })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes())
            .map_err(|e| CheckpointError::Io { path: path.display().to_string(), source: e })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CheckpointError::Io { path: path.display().to_string(), source: e })?;
        Self::from_bytes(&bytes)
    }

    /// Load and refuse unless the checkpoint was trained on `vocab`.
    pub fn load_for(path: &Path, vocab: &Vocabulary) -> Result<Self, CheckpointError> {
        let ckpt = Self::load(path)?;
        ckpt.ensure_vocab(vocab)?;
        Ok(ckpt)
    }

    pub fn ensure_vocab(&self, vocab: &Vocabulary) -> Result<(), CheckpointError> {
        let (checkpoint, supplied) = (self.vocab_hash(), vocab.content_hash());
        if checkpoint != supplied {
            return Err(CheckpointError::VocabMismatch { checkpoint, supplied });
        }
        Ok(())
    }

    /// SHA-256 of the serialized checkpoint, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Event, Melody};
    use crate::training::StopReason;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn sample() -> Checkpoint {
        let m = Melody::new("m", vec![Event::parse("A4", "1").unwrap(), Event::parse("R", "1/2").unwrap()]);
        let vocab = Vocabulary::build(&[m]).unwrap();
        let config = TrainConfig { hidden: 4, pitch_embed: 2, duration_embed: 2, sql: 3, ..Default::default() };
        let params = ModelParams::init(config.dims(&vocab), &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        let history = TrainHistory {
            train_windows: 1,
            validation_windows: 1,
            initial_train_loss: 2.0,
            initial_validation_loss: 2.1,
            epochs: vec![],
            best_epoch: 0,
            best_validation_loss: 2.1,
            stopped_epoch: 0,
            stop_reason: StopReason::MaxEpochs,
        };
        Checkpoint { params, config, vocab, history }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn corrupt_last_byte_is_truncation() {
        let mut bytes = sample().to_bytes();
        *bytes.last_mut().unwrap() ^= 0xff;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(CheckpointError::Truncated(_))));
        let bytes = sample().to_bytes();
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 9]),
            Err(CheckpointError::Truncated(_))
        ));
    }

    #[test]
    fn version_and_magic_are_checked() {
        let mut bytes = sample().to_bytes();
        bytes[8] = 9;
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(CheckpointError::VersionMismatch { found: 9, expected: 1 })
        ));
        assert!(matches!(Checkpoint::from_bytes(b"NOTACKPT...."), Err(CheckpointError::BadMagic)));
    }

    #[test]
    fn vocab_mismatch_names_both_hashes() {
        let c = sample();
        let other = Vocabulary::build(&[Melody::new("x", vec![Event::parse("C4", "1").unwrap()])]).unwrap();
        let err = c.ensure_vocab(&other).unwrap_err();
        let text = err.to_string();
        assert!(text.contains(&c.vocab_hash()) && text.contains(&other.content_hash()));
        assert!(c.ensure_vocab(&c.vocab).is_ok());
    }
}
