//! MIDI, MusicXML and CSV/JSON serializations of generation results.

mod midi;
mod score;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::climate::TemperatureVectors;
use crate::corpus::{Melody, Vocabulary};
use crate::generation::{GenerationQuery, GenerationResult, RangeResult, Temperatures};

pub use midi::{to_midi, DEFAULT_TEMPO_BPM, NOTE_VELOCITY, TICKS_PER_QUARTER};
pub use score::to_musicxml;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot export an empty melody")]
    EmptyMelody,
    #[error("pitch {0} is outside the MIDI range 0-127")]
    PitchOutOfRange(i32),
    #[error("tempo {0} bpm is not positive")]
    InvalidTempo(f64),
    #[error("csv: {0}")]
    Csv(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Attention CSV: `step,pos0..pos{sql-1}` with oldest window position first.
pub fn attention_csv(result: &GenerationResult) -> Result<String, ExportError> {
    let width = result.attention.first().map_or(result.query.sql, Vec::len);
    let header = std::iter::once("step".to_string()).chain((0..width).map(|i| format!("pos{i}")));
    matrix_csv(header, &result.attention)
}

/// Pitch candidate CSV: `step` then one column per pitch token, PAD first.
pub fn candidates_csv(result: &GenerationResult, vocab: &Vocabulary) -> Result<String, ExportError> {
    let header = std::iter::once("step".to_string()).chain(vocab.pitch_labels());
    matrix_csv(header, &result.pitch_candidates)
}

fn matrix_csv(header: impl Iterator<Item = String>, rows: &[Vec<f64>]) -> Result<String, ExportError> {
    let csv_err = |e: csv::Error| ExportError::Csv(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for (step, row) in rows.iter().enumerate() {
        w.write_record(std::iter::once(step.to_string()).chain(row.iter().map(f64::to_string)))
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| ExportError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Labelled matrices as the UI consumes them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixMirror {
    pub attention: Vec<Vec<f64>>,
    pub pitch_labels: Vec<String>,
    pub pitch_candidates: Vec<Vec<f64>>,
    pub duration_labels: Vec<String>,
    pub duration_candidates: Vec<Vec<f64>>,
}

impl MatrixMirror {
    pub fn new(result: &GenerationResult, vocab: &Vocabulary) -> Self {
        Self {
            attention: result.attention.clone(),
            pitch_labels: vocab.pitch_labels(),
            pitch_candidates: result.pitch_candidates.clone(),
            duration_labels: vocab.duration_labels(),
            duration_candidates: result.duration_candidates.clone(),
        }
    }
}

/// Everything needed to rerun a generation and check the result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub query: GenerationQuery,
    pub temperatures: Temperatures,
    pub checkpoint_hash: String,
    pub snapshot_hash: String,
    pub vocab_hash: String,
    pub tempo_bpm: f64,
    pub melody: Melody,
    pub seed_len: usize,
    pub files: Vec<String>,
    pub matrices: MatrixMirror,
}

/// Hashes identifying the model and data a result came from.
#[derive(Clone, Debug)]
pub struct Provenance {
    pub checkpoint_hash: String,
    pub snapshot_hash: String,
    pub vocab_hash: String,
}

/// SHA-256 of the canonical `temperatures.json` text.
pub fn snapshot_hash(vectors: &TemperatureVectors) -> String {
    hex::encode(Sha256::digest(vectors.to_json().as_bytes()))
}

/// Paths written for one result, in manifest order.
#[derive(Clone, Debug, PartialEq)]
pub struct BundlePaths {
    pub midi: PathBuf,
    pub musicxml: PathBuf,
    pub attention: PathBuf,
    pub candidates: PathBuf,
    pub manifest: PathBuf,
}

impl BundlePaths {
    pub fn for_stem(dir: &Path, stem: &str) -> Self {
        let p = |ext: &str| dir.join(format!("{stem}.{ext}"));
        Self {
            midi: p("mid"),
            musicxml: p("musicxml"),
            attention: p("attention.csv"),
            candidates: p("candidates.csv"),
            manifest: p("manifest.json"),
        }
    }

    pub fn all(&self) -> [&Path; 5] {
        [&self.midi, &self.musicxml, &self.attention, &self.candidates, &self.manifest]
    }
}

pub fn bundle_stem(query: &GenerationQuery) -> String {
    format!("{}_{}", query.year, query.rng_seed)
}

pub fn manifest(
    result: &GenerationResult,
    vocab: &Vocabulary,
    provenance: &Provenance,
    tempo_bpm: f64,
) -> BundleManifest {
    let stem = bundle_stem(&result.query);
    let files = ["mid", "musicxml", "attention.csv", "candidates.csv", "manifest.json"]
        .iter()
        .map(|ext| format!("{stem}.{ext}"))
        .collect();
    BundleManifest {
        query: result.query.clone(),
        temperatures: result.temperatures,
        checkpoint_hash: provenance.checkpoint_hash.clone(),
        snapshot_hash: provenance.snapshot_hash.clone(),
        vocab_hash: provenance.vocab_hash.clone(),
        tempo_bpm,
        melody: result.melody.clone(),
        seed_len: result.seed_len,
        files,
        matrices: MatrixMirror::new(result, vocab),
    }
}

/// Write `<year>_<rngseed>.{mid,musicxml,attention.csv,candidates.csv,manifest.json}`.
pub fn write_bundle(
    result: &GenerationResult,
    vocab: &Vocabulary,
    provenance: &Provenance,
    tempo_bpm: f64,
    dir: &Path,
) -> Result<BundlePaths, ExportError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let paths = BundlePaths::for_stem(dir, &bundle_stem(&result.query));
    let mut manifest_text =
        serde_json::to_string_pretty(&manifest(result, vocab, provenance, tempo_bpm)).expect("manifest serializes");
    manifest_text.push('\n');
    let contents: [(&Path, Vec<u8>); 5] = [
        (&paths.midi, to_midi(&result.melody, tempo_bpm)?),
        (&paths.musicxml, to_musicxml(&result.melody).into_bytes()),
        (&paths.attention, attention_csv(result)?.into_bytes()),
        (&paths.candidates, candidates_csv(result, vocab)?.into_bytes()),
        (&paths.manifest, manifest_text.into_bytes()),
    ];
    for (path, bytes) in contents {
        std::fs::write(path, bytes).map_err(|e| io_err(path, e))?;
    }
    Ok(paths)
}

/// Per-year bundles plus `<from>-<to>_<rngseed>.{mid,musicxml}` holding the
/// concatenated melody.
pub fn write_range(
    range: &RangeResult,
    vocab: &Vocabulary,
    provenance: &Provenance,
    tempo_bpm: f64,
    dir: &Path,
) -> Result<(Vec<BundlePaths>, [PathBuf; 2]), ExportError> {
    let bundles = range
        .results
        .iter()
        .map(|r| write_bundle(r, vocab, provenance, tempo_bpm, dir))
        .collect::<Result<Vec<_>, _>>()?;
    let stem = &range.melody.source;
    let midi = dir.join(format!("{stem}.mid"));
    let xml = dir.join(format!("{stem}.musicxml"));
    std::fs::write(&midi, to_midi(&range.melody, tempo_bpm)?).map_err(|e| io_err(&midi, e))?;
    std::fs::write(&xml, to_musicxml(&range.melody)).map_err(|e| io_err(&xml, e))?;
    Ok((bundles, [midi, xml]))
}

pub fn read_manifest(path: &Path) -> Result<BundleManifest, ExportError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| ExportError::Csv(format!("manifest {}: {e}", path.display())))
}

fn io_err(path: &Path, source: std::io::Error) -> ExportError {
    ExportError::Io { path: path.display().to_string(), source }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Event;

    fn result() -> (GenerationResult, Vocabulary) {
        let melody = Melody::new(
            "2021_3",
            vec![Event::parse("A4", "1").unwrap(), Event::parse("C5", "1/2").unwrap()],
        );
        let vocab = Vocabulary::build(std::slice::from_ref(&melody)).unwrap();
        let r = GenerationResult {
            query: GenerationQuery { year: 2021, rng_seed: 3, sql: 2, ..Default::default() },
            temperatures: Temperatures { pitch: 0.2, duration: 1.0 },
            melody,
            seed_len: 1,
            attention: vec![vec![0.25, 0.75]],
            pitch_candidates: vec![vec![0.0, 0.1, 0.9]],
            duration_candidates: vec![vec![0.0, 0.5, 0.5]],
        };
        (r, vocab)
    }

    #[test]
    fn csv_shapes() {
        let (r, v) = result();
        let a = attention_csv(&r).unwrap();
        assert_eq!(a, "step,pos0,pos1\n0,0.25,0.75\n");
        let c = candidates_csv(&r, &v).unwrap();
        let header = c.lines().next().unwrap();
        assert_eq!(header, "step,PAD,A4,C5");
        assert_eq!(header.split(',').count(), v.pitch_len() + 1);
    }

    #[test]
    fn bundle_files() {
        let (r, v) = result();
        let dir = tempfile::tempdir().unwrap();
        let prov = Provenance { checkpoint_hash: "c".into(), snapshot_hash: "s".into(), vocab_hash: "v".into() };
        let paths = write_bundle(&r, &v, &prov, 90.0, dir.path()).unwrap();
        assert_eq!(paths.midi.file_name().unwrap(), "2021_3.mid");
        for p in paths.all() {
            assert!(p.exists(), "{}", p.display());
        }
        let m = read_manifest(&paths.manifest).unwrap();
        assert_eq!(m.query, r.query);
        assert_eq!(m.melody, r.melody);
        assert_eq!(m.matrices.attention, r.attention);
    }
}
