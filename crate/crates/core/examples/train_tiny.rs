//! Train on three short repeating melodies until the model has memorized
//! them, then save and reload the checkpoint.

use tempered::corpus::{windowize, Event, Melody, Vocabulary};
use tempered::training::{train, Checkpoint, TrainConfig};

#[path = "common/mod.rs"]
mod common;

fn melody(name: &str, pattern: &[(&str, &str)], repeats: usize) -> Melody {
    let events = pattern
        .iter()
        .cycle()
        .take(pattern.len() * repeats)
        .map(|(p, d)| Event::parse(p, d).expect("valid token"))
        .collect();
    Melody::new(name, events)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = vec![
        melody("a", &[("C4", "1"), ("E4", "1"), ("G4", "2")], 6),
        melody("b", &[("D4", "1/2"), ("F4", "1/2"), ("A4", "1")], 6),
        melody("c", &[("G4", "1"), ("R", "1"), ("C5", "2")], 6),
    ];
    let vocab = Vocabulary::build(&corpus)?;
    let config = TrainConfig {
        hidden: 16,
        pitch_embed: 4,
        duration_embed: 2,
        sql: 4,
        learning_rate: 1e-2,
        max_epochs: 300,
        validation_fraction: 0.2,
        ..Default::default()
    };
    let windows = windowize(&corpus, &vocab, config.sql)?;
    let outcome = train(&windows, &vocab, &config)?;
    let h = &outcome.history;
    println!("{} train / {} validation windows", h.train_windows, h.validation_windows);
    println!("initial validation loss {:.4}", h.initial_validation_loss);
    for e in h.epochs.iter().filter(|e| e.epoch % 10 == 0 || e.epoch == h.stopped_epoch) {
        println!("epoch {:>3}  train {:.4}  validation {:.4}", e.epoch, e.train_loss, e.validation_loss);
    }
    println!(
        "best epoch {} ({:.5}), stopped at {} by {:?}",
        h.best_epoch, h.best_validation_loss, h.stopped_epoch, h.stop_reason
    );

    let checkpoint = Checkpoint { params: outcome.params, config, vocab, history: outcome.history };
    let path = common::out_dir("train_tiny").join("tiny.ckpt");
    checkpoint.save(&path)?;
    let reloaded = Checkpoint::load(&path)?;
    assert_eq!(reloaded, checkpoint);
    println!("saved {} ({} bytes, sha256 {})", path.display(), std::fs::metadata(&path)?.len(), &checkpoint.content_hash()[..16]);
    Ok(())
}
