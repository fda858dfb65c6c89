use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::token::{DurationToken, Event, Melody, PitchToken};
use super::CorpusError;

/// Reserved index for padding in both vocabularies.
pub const PAD: usize = 0;
pub const PAD_TEXT: &str = "PAD";

/// A (pitch index, duration index) pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenPair {
    pub pitch: usize,
    pub duration: usize,
}

impl TokenPair {
    pub const PAD: TokenPair = TokenPair { pitch: PAD, duration: PAD };

    pub fn new(pitch: usize, duration: usize) -> Self {
        Self { pitch, duration }
    }
}

/// Dense 0-based indices for pitch and duration tokens. Index 0 is PAD.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    pitches: Vec<PitchToken>,
    durations: Vec<DurationToken>,
    pitch_index: HashMap<PitchToken, usize>,
    duration_index: HashMap<DurationToken, usize>,
}

/// On-disk form of `vocab.json`: token strings in index order, `"PAD"` first.
#[derive(Debug, Serialize, Deserialize)]
struct VocabFile {
    duration_tokens: Vec<String>,
    pitch_tokens: Vec<String>,
}

impl Vocabulary {
    /// Pitches sort by MIDI number then spelling with the rest right after
    /// PAD; durations ascend.
    pub fn build(corpus: &[Melody]) -> Result<Self, CorpusError> {
        if corpus.is_empty() {
            return Err(CorpusError::EmptyCorpus("vocabulary input".into()));
        }
        let mut has_rest = false;
        let mut notes = BTreeMap::new();
        let mut durations = BTreeSet::new();
        for event in corpus.iter().flat_map(|m| m.events.iter()) {
            match event.pitch {
                PitchToken::Rest => has_rest = true,
                PitchToken::Note(n) => {
                    notes.insert((n.midi(), n.to_string()), n);
                }
            }
            durations.insert(event.duration);
        }
        let mut pitches = Vec::with_capacity(notes.len() + 1);
        if has_rest {
            pitches.push(PitchToken::Rest);
        }
        pitches.extend(notes.into_values().map(PitchToken::Note));
        Ok(Self::from_tokens(pitches, durations.into_iter().collect()))
    }

    /// `pitches` and `durations` exclude PAD; their positions become indices 1..
    pub fn from_tokens(pitches: Vec<PitchToken>, durations: Vec<DurationToken>) -> Self {
        let pitch_index = pitches.iter().enumerate().map(|(i, p)| (*p, i + 1)).collect();
        let duration_index = durations.iter().enumerate().map(|(i, d)| (*d, i + 1)).collect();
        Self { pitches, durations, pitch_index, duration_index }
    }

    /// Vocabulary sizes including PAD.
    pub fn pitch_len(&self) -> usize {
        self.pitches.len() + 1
    }

    pub fn duration_len(&self) -> usize {
        self.durations.len() + 1
    }

    pub fn pitch_index(&self, token: &PitchToken) -> Option<usize> {
        self.pitch_index.get(token).copied()
    }

    pub fn duration_index(&self, token: &DurationToken) -> Option<usize> {
        self.duration_index.get(token).copied()
    }

    /// `None` for PAD or an out-of-range index.
    pub fn pitch(&self, index: usize) -> Option<PitchToken> {
        index.checked_sub(1).and_then(|i| self.pitches.get(i)).copied()
    }

    pub fn duration(&self, index: usize) -> Option<DurationToken> {
        index.checked_sub(1).and_then(|i| self.durations.get(i)).copied()
    }

    pub fn pitch_tokens(&self) -> &[PitchToken] {
        &self.pitches
    }

    pub fn duration_tokens(&self) -> &[DurationToken] {
        &self.durations
    }

    /// Column labels including PAD, in index order.
    pub fn pitch_labels(&self) -> Vec<String> {
        std::iter::once(PAD_TEXT.to_string())
            .chain(self.pitches.iter().map(|p| p.to_string()))
            .collect()
    }

    pub fn duration_labels(&self) -> Vec<String> {
        std::iter::once(PAD_TEXT.to_string())
            .chain(self.durations.iter().map(|d| d.to_string()))
            .collect()
    }

    pub fn encode_event(&self, event: &Event) -> Result<TokenPair, CorpusError> {
        let pitch = self
            .pitch_index(&event.pitch)
            .ok_or_else(|| CorpusError::OutOfVocabulary(event.pitch.to_string()))?;
        let duration = self
            .duration_index(&event.duration)
            .ok_or_else(|| CorpusError::OutOfVocabulary(event.duration.to_string()))?;
        Ok(TokenPair { pitch, duration })
    }

    pub fn encode(&self, melody: &Melody) -> Result<Vec<TokenPair>, CorpusError> {
        melody.events.iter().map(|e| self.encode_event(e)).collect()
    }

    pub fn decode_pair(&self, pair: TokenPair) -> Result<Event, CorpusError> {
        let pitch = self.pitch(pair.pitch).ok_or(CorpusError::BadIndex(pair.pitch))?;
        let duration = self.duration(pair.duration).ok_or(CorpusError::BadIndex(pair.duration))?;
        Ok(Event { pitch, duration })
    }

    pub fn decode(&self, source: &str, pairs: &[TokenPair]) -> Result<Melody, CorpusError> {
        let events = pairs.iter().map(|p| self.decode_pair(*p)).collect::<Result<_, _>>()?;
        Ok(Melody::new(source, events))
    }

    pub fn to_json(&self) -> String {
        let file = VocabFile {
            duration_tokens: self.duration_labels(),
            pitch_tokens: self.pitch_labels(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("vocabulary serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        let file: VocabFile =
            serde_json::from_str(text).map_err(|e| CorpusError::VocabFormat(e.to_string()))?;
        fn strip_pad(list: &[String], what: &str) -> Result<Vec<String>, CorpusError> {
            match list.split_first() {
                Some((first, rest)) if first == PAD_TEXT => Ok(rest.to_vec()),
                _ => Err(CorpusError::VocabFormat(format!("{what} must start with \"PAD\""))),
            }
        }
        let pitches = strip_pad(&file.pitch_tokens, "pitch_tokens")?
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<PitchToken>, _>>()?;
        let durations = strip_pad(&file.duration_tokens, "duration_tokens")?
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<DurationToken>, _>>()?;
        let vocab = Self::from_tokens(pitches, durations);
        if vocab.pitch_index.len() != vocab.pitches.len()
            || vocab.duration_index.len() != vocab.durations.len()
        {
            return Err(CorpusError::VocabFormat("duplicate token".into()));
        }
        Ok(vocab)
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        std::fs::write(path, self.to_json())
            .map_err(|e| CorpusError::Io { path: path.display().to_string(), source: e })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CorpusError::Io { path: path.display().to_string(), source: e })?;
        Self::from_json(&text)
    }

    /// Up to `n` in-vocabulary pitches closest to `token` by MIDI distance.
    pub fn nearest_pitches(&self, token: &PitchToken, n: usize) -> Vec<PitchToken> {
        let target = token.midi();
        let mut candidates: Vec<_> = self
            .pitches
            .iter()
            .map(|p| {
                let dist = match (target, p.midi()) {
                    (Some(a), Some(b)) => (a - b).abs(),
                    (None, None) => 0,
                    _ => i32::MAX,
                };
                (dist, *p)
            })
            .collect();
        candidates.sort_by_key(|(d, _)| *d);
        candidates.into_iter().take(n).map(|(_, p)| p).collect()
    }

    pub fn nearest_durations(&self, token: &DurationToken, n: usize) -> Vec<DurationToken> {
        let mut candidates: Vec<_> = self.durations.to_vec();
        candidates.sort_by_key(|d| {
            let diff = d.ratio() - token.ratio();
            if diff < num_rational::Ratio::from_integer(0) {
                -diff
            } else {
                diff
            }
        });
        candidates.truncate(n);
        candidates
    }
}
