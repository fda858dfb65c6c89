//! Corpus and climate properties over the vendored data and random inputs.

mod common;

use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use tempered::climate::{build_temperature_vectors, ClimateTable};
use tempered::corpus::{
    augment_all_keys, normalize_key, windowize, DurationToken, Event, KeySignature, Melody, Mode, Note, PitchToken,
    Vocabulary, TARGET_TONIC,
};

#[test]
fn corpus_matches_its_manifest() {
    let text = std::fs::read_to_string(common::data_dir().join("corpus/manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&text).unwrap();
    let files = manifest["files"].as_array().unwrap();
    let corpus = common::corpus();
    assert_eq!(corpus.len(), files.len());
    let by_name: BTreeMap<String, usize> = corpus.iter().map(|m| (m.source.clone(), m.len())).collect();
    for f in files {
        let stem = f["file"].as_str().unwrap().trim_end_matches(".musicxml");
        assert_eq!(by_name[stem] as u64, f["events"].as_u64().unwrap(), "{stem}");
    }
}

#[test]
fn window_count_is_the_brute_force_count() {
    let corpus = common::corpus();
    let vocab = Vocabulary::build(&corpus).unwrap();
    for sql in [1, 4, 16, 40, 64] {
        let mut expected = 0;
        for m in &corpus {
            let mut n = 0;
            let mut start = 0;
            while start + sql < m.len() {
                n += 1;
                start += 1;
            }
            expected += n.max(1);
        }
        let windows = windowize(&corpus, &vocab, sql).unwrap();
        assert_eq!(windows.len(), expected, "sql {sql}");
        assert!(windows.iter().all(|w| w.input.len() == sql));
    }
}

#[test]
fn corpus_tokens_round_trip_and_vocabulary_is_a_bijection() {
    let corpus = common::corpus();
    let vocab = Vocabulary::build(&corpus).unwrap();
    for m in &corpus {
        let decoded = vocab.decode(&m.source, &vocab.encode(m).unwrap()).unwrap();
        assert_eq!(decoded.events, m.events);
    }
    let pitches: HashSet<_> = vocab.pitch_tokens().iter().collect();
    // index 0 is PAD, which the token lists leave out
    assert_eq!(pitches.len() + 1, vocab.pitch_len());
    for (i, p) in vocab.pitch_tokens().iter().enumerate() {
        assert_eq!(vocab.pitch_index(p), Some(i + 1));
    }
    for (i, d) in vocab.duration_tokens().iter().enumerate() {
        assert_eq!(vocab.duration_index(d), Some(i + 1));
    }
    assert_eq!(Vocabulary::from_json(&vocab.to_json()).unwrap(), vocab);
    let shipped = Vocabulary::load(&common::data_dir().join("vocab.json")).unwrap();
    assert_eq!(shipped, vocab);
}

#[test]
fn augmentation_keeps_rhythm() {
    let corpus = common::corpus();
    let all = augment_all_keys(&corpus).unwrap();
    assert_eq!(all.len(), 12 * corpus.len());
    for (i, m) in all.iter().enumerate() {
        let original = &corpus[i / 12];
        assert!(m.durations().eq(original.durations()));
    }
    assert!(corpus.iter().all(|m| all.contains(m)));
}

fn melody_strategy() -> impl Strategy<Value = Melody> {
    let event = (prop::option::weighted(0.9, 48i32..84), prop::bool::ANY, 1i64..8, prop::sample::select(vec![1i64, 2, 4]))
        .prop_map(|(midi, flats, n, d)| {
            let pitch = midi.map_or(PitchToken::Rest, |m| PitchToken::Note(Note::from_midi(m, flats)));
            Event::new(pitch, DurationToken::quarters(n, d))
        });
    let key = prop::option::of((-6i8..=6, prop::bool::ANY));
    (prop::collection::vec(event, 1..30), key).prop_map(|(events, key)| {
        let mut m = Melody::new("p", events);
        m.key = key.map(|(fifths, minor)| KeySignature { fifths, mode: if minor { Mode::Minor } else { Mode::Major } });
        m
    })
}

proptest! {
    #[test]
    fn key_normalization_is_idempotent(m in melody_strategy()) {
        let once = normalize_key(&m, TARGET_TONIC).unwrap();
        let twice = normalize_key(&once.melody, TARGET_TONIC).unwrap();
        prop_assert_eq!(twice.semitones, 0);
        prop_assert_eq!(&twice.melody, &once.melody);
        prop_assert!(once.semitones.abs() <= 6);
        prop_assert!(once.melody.durations().eq(m.durations()));
    }

    #[test]
    fn climate_temperatures_stay_in_unit_range(
        rows in prop::collection::btree_map(1876i32..1900, prop::array::uniform12(0.0f64..35.0), 3..20),
        offset in -5.0f64..5.0,
    ) {
        let table = ClimateTable::from_rows(rows.clone(), "random");
        let Ok(v) = build_temperature_vectors(&table) else { return Ok(()) };
        let first = *rows.keys().next().unwrap();
        for t in v.years.values() {
            prop_assert!((0.0..=1.0).contains(&t.pitch) && (0.0..=1.0).contains(&t.duration));
        }
        // shifting a year by a constant moves its mean but not its month-to-month shape
        let mut shifted = rows.clone();
        let last = *rows.keys().next_back().unwrap();
        for x in shifted.get_mut(&last).unwrap().iter_mut() {
            *x += offset;
        }
        if let Ok(w) = build_temperature_vectors(&ClimateTable::from_rows(shifted, "shifted")) {
            if last != first {
                prop_assert!((w.get(last).unwrap().pitch - v.get(last).unwrap().pitch).abs() < 1e-9);
            }
        }
    }
}
