use super::token::{Event, KeySignature, Melody, Note, PitchToken};
use super::CorpusError;

/// Where the tonic used for normalization came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TonicSource {
    KeySignature,
    /// No key signature: the last sounding note was taken as the tonic.
    FinalNote,
    /// No key signature and no sounding note; the melody is left as is.
    Undetected,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub melody: Melody,
    pub semitones: i32,
    pub tonic_source: TonicSource,
}

/// Transpose `melody` so its tonic lands on `target_tonic` (a pitch class).
///
/// The smaller of the upward and downward shifts wins; a tritone goes down.
pub fn normalize_key(melody: &Melody, target_tonic: i32) -> Result<Normalized, CorpusError> {
    if melody.is_empty() {
        return Err(CorpusError::EmptyMelody);
    }
    let target = target_tonic.rem_euclid(12);
    let (tonic, source) = match melody.key {
        Some(key) => (Some(key.tonic_pitch_class()), TonicSource::KeySignature),
        None => {
            let last = melody.events.iter().rev().find_map(|e| match e.pitch {
                PitchToken::Note(n) => Some(n.pitch_class()),
                PitchToken::Rest => None,
            });
            match last {
                Some(pc) => (Some(pc), TonicSource::FinalNote),
                None => (None, TonicSource::Undetected),
            }
        }
    };
    if source != TonicSource::KeySignature {
        log::warn!(
            "{}: no key signature, tonic {} by final-note heuristic",
            melody.source,
            if tonic.is_some() { "taken" } else { "not found" }
        );
    }
    let Some(tonic) = tonic else {
        return Ok(Normalized { melody: melody.clone(), semitones: 0, tonic_source: source });
    };
    let semitones = shortest_shift(tonic, target);
    Ok(Normalized { melody: transpose(melody, semitones)?, semitones, tonic_source: source })
}

/// Signed shift from `from` to `to` with the smallest magnitude; ties go down.
pub fn shortest_shift(from: i32, to: i32) -> i32 {
    let up = (to - from).rem_euclid(12);
    if up < 12 - up {
        up
    } else {
        up - 12
    }
}

/// Shift every note by `semitones`. Zero returns an identical copy.
pub fn transpose(melody: &Melody, semitones: i32) -> Result<Melody, CorpusError> {
    if semitones == 0 {
        return Ok(melody.clone());
    }
    let key = melody.key.map(|k| {
        KeySignature::for_tonic(k.tonic_pitch_class() + semitones, k.mode)
    });
    let prefer_flats = match key {
        Some(k) => k.fifths < 0,
        None => false,
    };
    let events = melody
        .events
        .iter()
        .map(|e| {
            let pitch = match e.pitch {
                PitchToken::Note(n) => {
                    let midi = n.midi() + semitones;
                    if !(0..=127).contains(&midi) {
                        return Err(CorpusError::PitchOutOfRange(midi));
                    }
                    PitchToken::Note(Note::from_midi(midi, prefer_flats))
                }
                PitchToken::Rest => PitchToken::Rest,
            };
            Ok(Event::new(pitch, e.duration))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Melody { source: melody.source.clone(), events, key })
}

/// One copy of every melody per pitch class. Shifts run -5..=6 so registers
/// stay close to the original; the first copy of each melody is the original.
pub fn augment_all_keys(corpus: &[Melody]) -> Result<Vec<Melody>, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus("augmentation input".into()));
    }
    let mut out = Vec::with_capacity(corpus.len() * 12);
    for melody in corpus {
        for k in 0..12 {
            let shift = if k <= 6 { k } else { k - 12 };
            let mut m = transpose(melody, shift)?;
            if shift != 0 {
                m.source = format!("{}@{:+}", melody.source, shift);
            }
            out.push(m);
        }
    }
    Ok(out)
}

/// Default normalization target: C.
pub const TARGET_TONIC: i32 = 0;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::token::{DurationToken, Event, Mode};

    fn melody(notes: &[&str], key: Option<KeySignature>) -> Melody {
        let events = notes.iter().map(|n| Event::parse(n, "1").unwrap()).collect();
        Melody { source: "t".into(), events, key }
    }

    #[test]
    fn already_in_c_is_identity() {
        let m = melody(&["C4", "E4", "G4"], Some(KeySignature { fifths: 0, mode: Mode::Major }));
        let n = normalize_key(&m, 0).unwrap();
        assert_eq!(n.melody, m);
        assert_eq!(n.semitones, 0);
    }

    #[test]
    fn d_melody_moves_down_two() {
        let m = melody(&["D4", "F#4", "A4", "R"], Some(KeySignature { fifths: 2, mode: Mode::Major }));
        let n = normalize_key(&m, 0).unwrap();
        assert_eq!(n.semitones, -2);
        let expected = melody(&["C4", "E4", "G4", "R"], Some(KeySignature { fifths: 0, mode: Mode::Major }));
        assert_eq!(n.melody, expected);
    }

    #[test]
    fn g_major_takes_the_smaller_shift() {
        // enumerate both candidate transpositions and keep the smaller magnitude
        let candidates = [5, -7];
        let best = *candidates.iter().min_by_key(|s: &&i32| s.abs()).unwrap();
        assert_eq!(best, 5);
        let m = melody(&["G4", "B4", "D5"], Some(KeySignature { fifths: 1, mode: Mode::Major }));
        let n = normalize_key(&m, 0).unwrap();
        assert_eq!(n.semitones, best);
        assert_eq!(n.melody.events[0].pitch.midi(), Some(72));
    }

    #[test]
    fn tritone_breaks_downward() {
        assert_eq!(shortest_shift(6, 0), -6);
        assert_eq!(shortest_shift(0, 6), -6);
        assert_eq!(shortest_shift(11, 0), 1);
    }

    #[test]
    fn final_note_fallback() {
        let m = melody(&["E4", "D4", "A4", "R"], None);
        let n = normalize_key(&m, 0).unwrap();
        assert_eq!(n.tonic_source, TonicSource::FinalNote);
        assert_eq!(n.semitones, 3);
        assert_eq!(n.melody.events[2].pitch.midi(), Some(72));
    }

    #[test]
    fn all_rest_melody_is_left_alone() {
        let m = melody(&["R", "R"], None);
        let n = normalize_key(&m, 0).unwrap();
        assert_eq!(n.tonic_source, TonicSource::Undetected);
        assert_eq!(n.melody, m);
    }

    #[test]
    fn minor_key_tonic_maps_to_c() {
        let m = melody(&["A4", "C5", "E5"], Some(KeySignature { fifths: 0, mode: Mode::Minor }));
        let n = normalize_key(&m, 0).unwrap();
        assert_eq!(n.semitones, 3);
        assert_eq!(n.melody.key, Some(KeySignature { fifths: -3, mode: Mode::Minor }));
        assert_eq!(n.melody.events[1].pitch.to_string(), "Eb5");
    }

    #[test]
    fn augmentation_covers_twelve_keys() {
        let m = melody(&["C4", "D4", "R"], Some(KeySignature { fifths: 0, mode: Mode::Major }));
        let out = augment_all_keys(std::slice::from_ref(&m)).unwrap();
        assert_eq!(out.len(), 12);
        assert_eq!(out[0], m);
        let mut classes: Vec<i32> =
            out.iter().map(|x| x.events[0].pitch.midi().unwrap().rem_euclid(12)).collect();
        classes.sort();
        assert_eq!(classes, (0..12).collect::<Vec<_>>());
        for x in &out {
            let d: Vec<DurationToken> = x.durations().collect();
            assert_eq!(d, m.durations().collect::<Vec<_>>());
        }
    }

    #[test]
    fn out_of_range_transposition_errors() {
        let m = melody(&["G9"], None);
        assert!(matches!(transpose(&m, 2), Err(CorpusError::PitchOutOfRange(129))));
    }
}
