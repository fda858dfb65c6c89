use serde::{Deserialize, Serialize};

use super::token::Melody;
use super::vocab::{TokenPair, Vocabulary};
use super::CorpusError;

/// `input` holds `sql` consecutive events; `target` is the event that follows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingWindow {
    pub input: Vec<TokenPair>,
    pub target: TokenPair,
    /// Index of the source melody in the corpus slice.
    pub melody: usize,
}

/// Slide a window of `sql` events over every melody.
///
/// A melody of length `len > sql` yields `len - sql` windows. Shorter
/// melodies are left-padded so they still contribute exactly one window
/// whose target is their last event.
pub fn windowize(
    corpus: &[Melody],
    vocab: &Vocabulary,
    sql: usize,
) -> Result<Vec<TrainingWindow>, CorpusError> {
    if sql == 0 {
        return Err(CorpusError::InvalidWindow);
    }
    let mut windows = Vec::new();
    for (index, melody) in corpus.iter().enumerate() {
        if melody.is_empty() {
            return Err(CorpusError::EmptyMelody);
        }
        let encoded = vocab.encode(melody)?;
        if encoded.len() > sql {
            for start in 0..encoded.len() - sql {
                windows.push(TrainingWindow {
                    input: encoded[start..start + sql].to_vec(),
                    target: encoded[start + sql],
                    melody: index,
                });
            }
        } else {
            let (target, history) = encoded.split_last().expect("non-empty");
            let mut input = vec![TokenPair::PAD; sql - history.len()];
            input.extend_from_slice(history);
            windows.push(TrainingWindow { input, target: *target, melody: index });
        }
    }
    Ok(windows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::token::Event;

    fn melody(n: usize) -> Melody {
        let notes = ["C4", "D4", "E4", "F4", "G4", "A4", "B4"];
        Melody::new("m", (0..n).map(|i| Event::parse(notes[i % 7], "1").unwrap()).collect())
    }

    #[test]
    fn one_window_when_length_is_sql_plus_one() {
        let corpus = [melody(5)];
        let vocab = Vocabulary::build(&corpus).unwrap();
        let w = windowize(&corpus, &vocab, 4).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].target, vocab.encode_event(&corpus[0].events[4]).unwrap());
        assert_eq!(w[0].input, vocab.encode(&corpus[0]).unwrap()[..4]);
    }

    #[test]
    fn short_melody_is_left_padded() {
        let corpus = [melody(3)];
        let vocab = Vocabulary::build(&corpus).unwrap();
        let w = windowize(&corpus, &vocab, 4).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(&w[0].input[..2], &[TokenPair::PAD, TokenPair::PAD]);
        assert_ne!(w[0].input[2], TokenPair::PAD);
        assert_eq!(w[0].target, vocab.encode_event(&corpus[0].events[2]).unwrap());
    }

    #[test]
    fn count_law() {
        let corpus: Vec<_> = [1, 2, 4, 5, 9, 20].iter().map(|&n| melody(n)).collect();
        let vocab = Vocabulary::build(&corpus).unwrap();
        for sql in 1..8 {
            let expected: usize = corpus.iter().map(|m| m.len().saturating_sub(sql).max(1)).sum();
            assert_eq!(windowize(&corpus, &vocab, sql).unwrap().len(), expected);
        }
    }

    #[test]
    fn zero_sql_is_rejected() {
        let corpus = [melody(3)];
        let vocab = Vocabulary::build(&corpus).unwrap();
        assert!(windowize(&corpus, &vocab, 0).is_err());
    }
}
