//! Load the MusicXML corpus, normalize keys, build the vocabulary and cut
//! training windows.

use std::collections::BTreeMap;

use tempered::corpus::{load_corpus_dir, normalize_key, windowize, Vocabulary, TARGET_TONIC};
use tempered::engine::CORPUS_DIR;

#[path = "common/mod.rs"]
mod common;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = common::data_dir().join(CORPUS_DIR);
    let raw = load_corpus_dir(&dir)?;
    let mut corpus = Vec::new();
    for m in &raw {
        let n = normalize_key(m, TARGET_TONIC)?;
        println!("{:<28} {:>3} events  shift {:+3}  ({:?})", m.source, m.len(), n.semitones, n.tonic_source);
        corpus.push(n.melody);
    }

    let vocab = Vocabulary::build(&corpus)?;
    println!("\npitch tokens:    {}", vocab.pitch_labels().join(" "));
    println!("duration tokens: {}", vocab.duration_labels().join(" "));

    let mut usage: BTreeMap<String, usize> = BTreeMap::new();
    for e in corpus.iter().flat_map(|m| &m.events) {
        *usage.entry(e.duration.to_string()).or_default() += 1;
    }
    println!("duration usage:  {usage:?}");

    for sql in [4, 16] {
        let windows = windowize(&corpus, &vocab, sql)?;
        println!("sql {sql:>2}: {} windows", windows.len());
    }
    Ok(())
}
