//! Melody corpus: MusicXML ingestion, key normalization, vocabularies and
//! training windows.

mod key;
mod musicxml;
mod token;
mod vocab;
mod window;

use std::path::Path;

use thiserror::Error;

pub use key::{augment_all_keys, normalize_key, shortest_shift, transpose, Normalized, TonicSource, TARGET_TONIC};
pub use musicxml::{load_corpus_dir, load_musicxml, parse_musicxml};
pub use token::{DurationToken, Event, KeySignature, Melody, Mode, Note, PitchToken, Step};
pub use vocab::{TokenPair, Vocabulary, PAD, PAD_TEXT};
pub use window::{windowize, TrainingWindow};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed MusicXML at line {line}, column {column}: {message}")]
    Xml { line: u32, column: u32, message: String },

    #[error("{path}: {inner}")]
    InFile { path: String, inner: Box<CorpusError> },

    #[error("unsupported MusicXML: {0}")]
    Unsupported(String),

    #[error("no note events could be extracted")]
    EmptyMelody,

    #[error("no melodies found in {0}")]
    EmptyCorpus(String),

    #[error("invalid token {0:?}")]
    InvalidToken(String),

    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(String),

    #[error("transposition leaves the MIDI range (pitch {0})")]
    PitchOutOfRange(i32),

    #[error("token {0} is not in the vocabulary")]
    OutOfVocabulary(String),

    #[error("index {0} does not name a vocabulary token")]
    BadIndex(usize),

    #[error("bad vocab.json: {0}")]
    VocabFormat(String),

    #[error("window length must be at least 1")]
    InvalidWindow,

    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    fn in_file(self, path: &Path) -> Self {
        CorpusError::InFile { path: path.display().to_string(), inner: Box::new(self) }
    }
}

/// Options for turning a directory of scores into training melodies.
#[derive(Clone, Copy, Debug)]
pub struct CorpusOptions {
    pub target_tonic: i32,
    pub augment: bool,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self { target_tonic: TARGET_TONIC, augment: false }
    }
}

/// Load, key-normalize and optionally augment a corpus directory.
pub fn prepare_corpus(dir: &Path, options: CorpusOptions) -> Result<Vec<Melody>, CorpusError> {
    let raw = load_corpus_dir(dir)?;
    let normalized = raw
        .iter()
        .map(|m| normalize_key(m, options.target_tonic).map(|n| n.melody))
        .collect::<Result<Vec<_>, _>>()?;
    if options.augment {
        augment_all_keys(&normalized)
    } else {
        Ok(normalized)
    }
}
