use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::CorpusError;

/// Diatonic letter name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Step {
    C,
    D,
    E,
    F,
    G,
    A,
    B,
}

impl Step {
    pub const ALL: [Step; 7] = [Step::C, Step::D, Step::E, Step::F, Step::G, Step::A, Step::B];

    /// Pitch class of the natural note.
    pub fn pitch_class(self) -> i32 {
        match self {
            Step::C => 0,
            Step::D => 2,
            Step::E => 4,
            Step::F => 5,
            Step::G => 7,
            Step::A => 9,
            Step::B => 11,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Step::C => 'C',
            Step::D => 'D',
            Step::E => 'E',
            Step::F => 'F',
            Step::G => 'G',
            Step::A => 'A',
            Step::B => 'B',
        }
    }

    pub fn from_letter(c: char) -> Option<Step> {
        Some(match c.to_ascii_uppercase() {
            'C' => Step::C,
            'D' => Step::D,
            'E' => Step::E,
            'F' => Step::F,
            'G' => Step::G,
            'A' => Step::A,
            'B' => Step::B,
            _ => return None,
        })
    }
}

/// A spelled pitch in scientific pitch notation (A4 is MIDI 69).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Note {
    pub step: Step,
    /// Semitone alteration, -2 (double flat) to +2 (double sharp).
    pub alter: i8,
    pub octave: i8,
}

impl Note {
    pub fn new(step: Step, alter: i8, octave: i8) -> Self {
        Self { step, alter, octave }
    }

    pub fn midi(&self) -> i32 {
        12 * (self.octave as i32 + 1) + self.step.pitch_class() + self.alter as i32
    }

    pub fn pitch_class(&self) -> i32 {
        self.midi().rem_euclid(12)
    }

    /// Spell a MIDI number, preferring sharps or flats for black keys.
    pub fn from_midi(midi: i32, prefer_flats: bool) -> Self {
        const SHARPS: [(Step, i8); 12] = [
            (Step::C, 0),
            (Step::C, 1),
            (Step::D, 0),
            (Step::D, 1),
            (Step::E, 0),
            (Step::F, 0),
            (Step::F, 1),
            (Step::G, 0),
            (Step::G, 1),
            (Step::A, 0),
            (Step::A, 1),
            (Step::B, 0),
        ];
        const FLATS: [(Step, i8); 12] = [
            (Step::C, 0),
            (Step::D, -1),
            (Step::D, 0),
            (Step::E, -1),
            (Step::E, 0),
            (Step::F, 0),
            (Step::G, -1),
            (Step::G, 0),
            (Step::A, -1),
            (Step::A, 0),
            (Step::B, -1),
            (Step::B, 0),
        ];
        let pc = midi.rem_euclid(12) as usize;
        let octave = (midi.div_euclid(12) - 1) as i8;
        let (step, alter) = if prefer_flats { FLATS[pc] } else { SHARPS[pc] };
        Note { step, alter, octave }
    }
}

impl fmt::Display for Note {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let accidental = match self.alter {
            -2 => "bb",
            -1 => "b",
            0 => "",
            1 => "#",
            2 => "##",
            _ => "?",
        };
        write!(f, "{}{}{}", self.step.letter(), accidental, self.octave)
    }
}

/// The pitch half of a melody event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PitchToken {
    Note(Note),
    Rest,
}

impl PitchToken {
    pub fn note(step: Step, alter: i8, octave: i8) -> Self {
        PitchToken::Note(Note::new(step, alter, octave))
    }

    pub fn midi(&self) -> Option<i32> {
        match self {
            PitchToken::Note(n) => Some(n.midi()),
            PitchToken::Rest => None,
        }
    }

    pub fn is_rest(&self) -> bool {
        matches!(self, PitchToken::Rest)
    }
}

impl fmt::Display for PitchToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PitchToken::Note(n) => n.fmt(f),
            PitchToken::Rest => f.write_str("R"),
        }
    }
}

impl FromStr for PitchToken {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CorpusError::InvalidToken(s.to_string());
        let t = s.trim();
        if t.eq_ignore_ascii_case("r") || t.eq_ignore_ascii_case("rest") {
            return Ok(PitchToken::Rest);
        }
        let mut chars = t.chars();
        let step = chars.next().and_then(Step::from_letter).ok_or_else(bad)?;
        let rest = chars.as_str();
        let acc_len = rest.find(|c: char| c != '#' && c != 'b').unwrap_or(rest.len());
        let (acc, octave) = rest.split_at(acc_len);
        let alter = match acc {
            "" => 0,
            "#" => 1,
            "##" => 2,
            "b" => -1,
            "bb" => -2,
            _ => return Err(bad()),
        };
        let octave: i8 = octave.parse().map_err(|_| bad())?;
        Ok(PitchToken::Note(Note::new(step, alter, octave)))
    }
}

impl Serialize for PitchToken {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PitchToken {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A strictly positive note length in quarter notes, held as an exact rational.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DurationToken(Ratio<i64>);

impl DurationToken {
    pub fn new(quarter_length: Ratio<i64>) -> Result<Self, CorpusError> {
        if quarter_length.is_positive() {
            Ok(Self(quarter_length))
        } else {
            Err(CorpusError::NonPositiveDuration(quarter_length.to_string()))
        }
    }

    /// Shorthand for `numer/denom` quarter notes. Panics on a non-positive value.
    pub fn quarters(numer: i64, denom: i64) -> Self {
        Self::new(Ratio::new(numer, denom)).expect("duration must be positive")
    }

    pub fn ratio(&self) -> Ratio<i64> {
        self.0
    }

    pub fn as_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl fmt::Display for DurationToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for DurationToken {
    type Err = CorpusError;

    /// Accepts `3/2`, `1.5` or `2`. Decimals are converted exactly.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let bad = || CorpusError::InvalidToken(s.to_string());
        let value = if let Some((n, d)) = t.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ratio::new(n, d)
        } else if let Some((int, frac)) = t.split_once('.') {
            if frac.len() > 12 || !frac.chars().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            let int: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
            let scale = 10i64.pow(frac.len() as u32);
            let frac: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
            if int < 0 || t.starts_with('-') {
                return Err(CorpusError::NonPositiveDuration(t.to_string()));
            }
            Ratio::new(int * scale + frac, scale)
        } else {
            Ratio::from_integer(t.parse::<i64>().map_err(|_| bad())?)
        };
        if value.is_zero() || value.is_negative() {
            return Err(CorpusError::NonPositiveDuration(t.to_string()));
        }
        Ok(Self(value))
    }
}

impl Serialize for DurationToken {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DurationToken {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One monophonic melody event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub pitch: PitchToken,
    pub duration: DurationToken,
}

impl Event {
    pub fn new(pitch: PitchToken, duration: DurationToken) -> Self {
        Self { pitch, duration }
    }

    /// Build from text tokens, e.g. `Event::parse("A4", "1/2")`.
    pub fn parse(pitch: &str, duration: &str) -> Result<Self, CorpusError> {
        Ok(Self { pitch: pitch.parse()?, duration: duration.parse()? })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Major,
    Minor,
}

/// Key signature as notated: number of sharps (positive) or flats (negative).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeySignature {
    pub fifths: i8,
    pub mode: Mode,
}

impl KeySignature {
    pub fn tonic_pitch_class(&self) -> i32 {
        let major = (self.fifths as i32 * 7).rem_euclid(12);
        match self.mode {
            Mode::Major => major,
            Mode::Minor => (major + 9) % 12,
        }
    }

    /// The signature whose tonic is `pitch_class` in the given mode.
    pub fn for_tonic(pitch_class: i32, mode: Mode) -> Self {
        let major_pc = match mode {
            Mode::Major => pitch_class.rem_euclid(12),
            Mode::Minor => (pitch_class + 3).rem_euclid(12),
        };
        // fifths in -5..=6 (F# rather than Gb)
        let fifths = (-5..=6).find(|f: &i32| (f * 7).rem_euclid(12) == major_pc).unwrap_or(0);
        Self { fifths: fifths as i8, mode }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Melody {
    pub source: String,
    pub events: Vec<Event>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<KeySignature>,
}

impl Melody {
    pub fn new(source: impl Into<String>, events: Vec<Event>) -> Self {
        Self { source: source.into(), events, key: None }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn total_quarters(&self) -> Ratio<i64> {
        self.events.iter().fold(Ratio::zero(), |acc, e| acc + e.duration.ratio())
    }

    pub fn durations(&self) -> impl Iterator<Item = DurationToken> + '_ {
        self.events.iter().map(|e| e.duration)
    }
}
