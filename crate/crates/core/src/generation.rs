//! Year-driven melody generation.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::climate::TemperatureVectors;
use crate::corpus::{CorpusError, Event, Melody, TokenPair, Vocabulary, PAD};
use crate::neural::{self, temperature_softmax, ModelParams, NeuralError};
use crate::training::Checkpoint;

/// 16 so the default one-note seed plus continuation comes to 16 events.
pub const DEFAULT_MXX: usize = 16;
pub const DEFAULT_MXL: usize = 16;
pub const DEFAULT_SQL: usize = 16;
pub const DEFAULT_YEAR: i32 = 2021;
/// Near-miss candidates listed for an out-of-vocabulary seed token.
const NEAREST_CANDIDATES: usize = 3;

pub fn default_seed() -> Vec<Event> {
    vec![Event::parse("A4", "1").expect("valid literal")]
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("year {year} is outside the data range {first}-{last}")]
    UnknownYear { year: i32, first: i32, last: i32 },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("seed {kind} {token} is not in the vocabulary; nearest: {}", nearest.join(", "))]
    OutOfVocabulary { kind: &'static str, token: String, nearest: Vec<String> },
    #[error("query sql {query} does not match the checkpoint's sql {checkpoint}")]
    SqlMismatch { query: usize, checkpoint: usize },
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationQuery {
    pub year: i32,
    pub seed: Vec<Event>,
    /// Maximum number of newly sampled events.
    pub mxx: usize,
    /// Cap on total output length including the seed.
    pub mxl: usize,
    /// Model window length; must equal the checkpoint's.
    pub sql: usize,
    pub rng_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch_temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_temperature: Option<f64>,
}

impl Default for GenerationQuery {
    fn default() -> Self {
        Self {
            year: DEFAULT_YEAR,
            seed: default_seed(),
            mxx: DEFAULT_MXX,
            mxl: DEFAULT_MXL,
            sql: DEFAULT_SQL,
            rng_seed: 0,
            pitch_temperature: None,
            duration_temperature: None,
        }
    }
}

impl GenerationQuery {
    pub fn validate(&self) -> Result<(), GenerationError> {
        let bad = |m: String| Err(GenerationError::InvalidQuery(m));
        if self.mxx < 1 {
            return bad("mxx must be at least 1".into());
        }
        if self.mxl < 1 || self.mxl < self.seed.len() {
            return bad(format!("mxl {} must be at least 1 and the seed length {}", self.mxl, self.seed.len()));
        }
        if self.sql < 1 {
            return bad("sql must be at least 1".into());
        }
        for (name, t) in [("pitch", self.pitch_temperature), ("duration", self.duration_temperature)] {
            if let Some(t) = t {
                if !(0.0..=1.0).contains(&t) {
                    return bad(format!("{name} temperature override {t} must lie in [0, 1]"));
                }
            }
        }
        Ok(())
    }

    /// `min(mxx, mxl − len(seed))`
    pub fn new_event_count(&self) -> usize {
        self.mxx.min(self.mxl.saturating_sub(self.seed.len()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Temperatures {
    pub pitch: f64,
    pub duration: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub query: GenerationQuery,
    pub temperatures: Temperatures,
    /// Seed events followed by generated events.
    pub melody: Melody,
    pub seed_len: usize,
    /// One row per generated step, one column per window position.
    pub attention: Vec<Vec<f64>>,
    /// One row per generated step over the full pitch vocabulary (PAD first).
    pub pitch_candidates: Vec<Vec<f64>>,
    pub duration_candidates: Vec<Vec<f64>>,
}

impl GenerationResult {
    pub fn generated(&self) -> &[Event] {
        &self.melody.events[self.seed_len..]
    }
}

/// The query's overrides win; otherwise the year's vector entries.
pub fn resolve_temperatures(
    query: &GenerationQuery,
    vectors: &TemperatureVectors,
) -> Result<Temperatures, GenerationError> {
    if let (Some(pitch), Some(duration)) = (query.pitch_temperature, query.duration_temperature) {
        return Ok(Temperatures { pitch, duration });
    }
    let t = vectors.get(query.year).ok_or_else(|| GenerationError::UnknownYear {
        year: query.year,
        first: vectors.first_year().unwrap_or(0),
        last: vectors.last_year().unwrap_or(0),
    })?;
    Ok(Temperatures {
        pitch: query.pitch_temperature.unwrap_or(t.pitch),
        duration: query.duration_temperature.unwrap_or(t.duration),
    })
}

/// Left-PAD to `sql`, keeping the last `sql` seed events.
pub fn prime_window(seed: &[Event], sql: usize, vocab: &Vocabulary) -> Result<Vec<TokenPair>, GenerationError> {
    let mut pairs = Vec::with_capacity(seed.len());
    for e in seed {
        let pitch = vocab.pitch_index(&e.pitch).ok_or_else(|| GenerationError::OutOfVocabulary {
            kind: "pitch",
            token: e.pitch.to_string(),
            nearest: vocab.nearest_pitches(&e.pitch, NEAREST_CANDIDATES).iter().map(|p| p.to_string()).collect(),
        })?;
        let duration = vocab.duration_index(&e.duration).ok_or_else(|| GenerationError::OutOfVocabulary {
            kind: "duration",
            token: e.duration.to_string(),
            nearest: vocab
                .nearest_durations(&e.duration, NEAREST_CANDIDATES)
                .iter()
                .map(|d| d.to_string())
                .collect(),
        })?;
        pairs.push(TokenPair::new(pitch, duration));
    }
    let keep = &pairs[pairs.len().saturating_sub(sql)..];
    let mut window = vec![TokenPair::PAD; sql - keep.len()];
    window.extend_from_slice(keep);
    Ok(window)
}

/// Temperature softmax over the non-PAD logits, with PAD's probability 0.
pub fn masked_distribution(logits: &[f64], temperature: f64) -> Vec<f64> {
    let mut q = Vec::with_capacity(logits.len());
    q.push(0.0);
    q.extend(temperature_softmax(&logits[PAD + 1..], temperature));
    q
}

/// Uniform double in [0, 1) from the top 53 bits of one `u64` draw.
pub fn uniform01(rng: &mut dyn RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Inverse-CDF draw; never returns an index with zero probability.
pub fn sample_categorical(probs: &[f64], rng: &mut dyn RngCore) -> usize {
    let u = uniform01(rng);
    let mut cumulative = 0.0;
    let mut last = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            cumulative += p;
            last = i;
            if u < cumulative {
                return i;
            }
        }
    }
    last
}

pub fn query_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Sample `min(mxx, mxl − len(seed))` events after the seed.
pub fn generate(
    query: &GenerationQuery,
    model: &Checkpoint,
    vectors: &TemperatureVectors,
) -> Result<GenerationResult, GenerationError> {
    query.validate()?;
    if query.sql != model.config.sql {
        return Err(GenerationError::SqlMismatch { query: query.sql, checkpoint: model.config.sql });
    }
    let temperatures = resolve_temperatures(query, vectors)?;
    generate_with(query, temperatures, &model.params, &model.vocab)
}

/// Generation with already resolved temperatures.
pub fn generate_with(
    query: &GenerationQuery,
    temperatures: Temperatures,
    params: &ModelParams,
    vocab: &Vocabulary,
) -> Result<GenerationResult, GenerationError> {
    query.validate()?;
    let mut window = prime_window(&query.seed, query.sql, vocab)?;
    let mut rng = query_rng(query.rng_seed);
    let steps = query.new_event_count();
    let mut events = query.seed.clone();
    let mut attention = Vec::with_capacity(steps);
    let mut pitch_candidates = Vec::with_capacity(steps);
    let mut duration_candidates = Vec::with_capacity(steps);
    for _ in 0..steps {
        let trace = neural::model_forward(params, &window)?;
        let qp = masked_distribution(&trace.pitch_logits, temperatures.pitch);
        let qd = masked_distribution(&trace.duration_logits, temperatures.duration);
        let pair = TokenPair::new(sample_categorical(&qp, &mut rng), sample_categorical(&qd, &mut rng));
        events.push(vocab.decode_pair(pair)?);
        window.remove(0);
        window.push(pair);
        attention.push(trace.attention.weights);
        pitch_candidates.push(qp);
        duration_candidates.push(qd);
    }
    let melody = Melody::new(format!("{}_{}", query.year, query.rng_seed), events);
    Ok(GenerationResult {
        query: query.clone(),
        temperatures,
        melody,
        seed_len: query.seed.len(),
        attention,
        pitch_candidates,
        duration_candidates,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeResult {
    pub results: Vec<GenerationResult>,
    /// All per-year melodies back to back.
    pub melody: Melody,
}

/// One generation per year from `from` to `to`, each using `template` with
/// its year replaced.
pub fn generate_range(
    from: i32,
    to: i32,
    template: &GenerationQuery,
    model: &Checkpoint,
    vectors: &TemperatureVectors,
) -> Result<RangeResult, GenerationError> {
    if from > to {
        return Err(GenerationError::InvalidQuery(format!("range start {from} is after its end {to}")));
    }
    for year in [from, to] {
        if vectors.get(year).is_none() {
            return Err(GenerationError::UnknownYear {
                year,
                first: vectors.first_year().unwrap_or(0),
                last: vectors.last_year().unwrap_or(0),
            });
        }
    }
    let results = (from..=to)
        .map(|year| generate(&GenerationQuery { year, ..template.clone() }, model, vectors))
        .collect::<Result<Vec<_>, _>>()?;
    let events = results.iter().flat_map(|r| r.melody.events.iter().copied()).collect();
    Ok(RangeResult { melody: Melody::new(format!("{from}-{to}_{}", template.rng_seed), events), results })
}
