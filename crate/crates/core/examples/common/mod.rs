//! Shared setup for the examples: the vendored data directory and a model,
//! either the trained `data/model.ckpt` or a small one trained on the spot.

#![allow(dead_code)]

use std::path::PathBuf;

use tempered::climate::{build_temperature_vectors, ClimateTable};
use tempered::corpus::{prepare_corpus, windowize, CorpusOptions, Vocabulary};
use tempered::engine::{self, LoadedData, LoadedModel};
use tempered::training::{train, Checkpoint, TrainConfig};

pub fn data_dir() -> PathBuf {
    std::env::var_os("TEMPERED_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

/// `temperatures.json` when present, otherwise recomputed from the CSV.
pub fn data() -> Result<LoadedData, Box<dyn std::error::Error>> {
    let dir = data_dir();
    match LoadedData::load(&dir) {
        Ok(d) => Ok(d),
        Err(_) => {
            let table = ClimateTable::load(&dir.join(engine::CLIMATE_FILE))?;
            Ok(LoadedData::new(build_temperature_vectors(&table)?))
        }
    }
}

pub fn model() -> Result<LoadedModel, Box<dyn std::error::Error>> {
    let dir = data_dir();
    let path = engine::default_checkpoint(&dir);
    if path.exists() {
        return Ok(LoadedModel::load(&path, None)?);
    }
    eprintln!("{} not found; training a small model for the example", path.display());
    let corpus = prepare_corpus(&dir.join(engine::CORPUS_DIR), CorpusOptions::default())?;
    let vocab = Vocabulary::build(&corpus)?;
    let config = TrainConfig {
        hidden: 32,
        pitch_embed: 8,
        duration_embed: 4,
        max_epochs: 15,
        learning_rate: 5e-3,
        ..Default::default()
    };
    let windows = windowize(&corpus, &vocab, config.sql)?;
    let outcome = train(&windows, &vocab, &config)?;
    Ok(LoadedModel::new(Checkpoint { params: outcome.params, config, vocab, history: outcome.history }))
}

pub fn out_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("tempered-examples").join(name);
    std::fs::create_dir_all(&dir).expect("temp dir is writable");
    dir
}
