#![allow(dead_code)]

use std::path::PathBuf;

use tempered::climate::{build_temperature_vectors, ClimateTable, TemperatureVectors};
use tempered::corpus::{prepare_corpus, windowize, CorpusOptions, Event, Melody, Vocabulary};
use tempered::engine::{LoadedData, LoadedModel, CLIMATE_FILE, CORPUS_DIR};
use tempered::training::{train, Checkpoint, TrainConfig};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn climate_table() -> ClimateTable {
    ClimateTable::load(&data_dir().join(CLIMATE_FILE)).expect("vendored climate table")
}

pub fn vectors() -> TemperatureVectors {
    build_temperature_vectors(&climate_table()).expect("vendored table is well formed")
}

pub fn corpus() -> Vec<Melody> {
    prepare_corpus(&data_dir().join(CORPUS_DIR), CorpusOptions::default()).expect("vendored corpus")
}

/// A small model on the vendored corpus with the default window length.
pub fn small_checkpoint(hidden: usize, epochs: usize) -> Checkpoint {
    let corpus = corpus();
    let vocab = Vocabulary::build(&corpus).unwrap();
    let config = TrainConfig {
        hidden,
        pitch_embed: 6,
        duration_embed: 3,
        max_epochs: epochs,
        learning_rate: 5e-3,
        ..Default::default()
    };
    let windows = windowize(&corpus, &vocab, config.sql).unwrap();
    let outcome = train(&windows, &vocab, &config).unwrap();
    Checkpoint { params: outcome.params, config, vocab, history: outcome.history }
}

pub fn loaded(hidden: usize, epochs: usize) -> (LoadedData, LoadedModel) {
    (LoadedData::new(vectors()), LoadedModel::new(small_checkpoint(hidden, epochs)))
}

pub fn repeating(name: &str, pattern: &[(&str, &str)], repeats: usize) -> Melody {
    let events = pattern
        .iter()
        .cycle()
        .take(pattern.len() * repeats)
        .map(|(p, d)| Event::parse(p, d).unwrap())
        .collect();
    Melody::new(name, events)
}

/// Three short melodies, each one phrase repeated.
pub fn synthetic_corpus() -> Vec<Melody> {
    vec![
        repeating("a", &[("C4", "1"), ("E4", "1"), ("G4", "2")], 6),
        repeating("b", &[("D4", "1/2"), ("F4", "1/2"), ("A4", "1")], 6),
        repeating("c", &[("G4", "1"), ("R", "1"), ("C5", "2")], 6),
    ]
}

pub fn synthetic_config() -> TrainConfig {
    TrainConfig {
        hidden: 16,
        pitch_embed: 4,
        duration_embed: 2,
        sql: 4,
        learning_rate: 1e-2,
        max_epochs: 300,
        validation_fraction: 0.2,
        ..Default::default()
    }
}
