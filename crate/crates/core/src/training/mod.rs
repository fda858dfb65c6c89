//! Single-example training with validation-based early stopping.

mod checkpoint;
mod optimizer;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{TrainingWindow, Vocabulary};
use crate::neural::{self, ModelDims, ModelParams, NeuralError};

pub use checkpoint::{Checkpoint, CheckpointError, TensorInfo, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use optimizer::{Optimizer, OptimizerKind};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("need at least 2 training windows, got {0}")]
    TooFewWindows(usize),
    #[error("non-finite loss {loss} in epoch {epoch} on window {window} (melody {melody})")]
    NonFiniteLoss { epoch: usize, window: usize, melody: usize, loss: f64 },
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden: usize,
    pub pitch_embed: usize,
    pub duration_embed: usize,
    pub sql: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub max_epochs: usize,
    pub patience: usize,
    /// An epoch only resets the patience counter when it beats the best
    /// validation loss by more than this.
    pub min_delta: f64,
    pub validation_fraction: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: ModelDims::DEFAULT_HIDDEN,
            pitch_embed: ModelDims::DEFAULT_PITCH_EMBED,
            duration_embed: ModelDims::DEFAULT_DURATION_EMBED,
            sql: 16,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            max_epochs: 500,
            patience: 10,
            min_delta: 1e-4,
            validation_fraction: 0.1,
            batch_size: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.patience < 1 {
            return bad("patience must be at least 1");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction <= 0.5) {
            return bad("validation fraction must lie in (0, 0.5]");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(self.min_delta.is_finite() && self.min_delta >= 0.0) {
            return bad("min_delta must be non-negative");
        }
        if self.sql == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return bad("sql, batch size and max epochs must be positive");
        }
        Ok(())
    }

    pub fn dims(&self, vocab: &Vocabulary) -> ModelDims {
        ModelDims {
            pitch_vocab: vocab.pitch_len(),
            duration_vocab: vocab.duration_len(),
            pitch_embed: self.pitch_embed,
            duration_embed: self.duration_embed,
            hidden: self.hidden,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss over the epoch's updates, each taken before its step.
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStopping,
    MaxEpochs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_windows: usize,
    pub validation_windows: usize,
    pub initial_train_loss: f64,
    pub initial_validation_loss: f64,
    pub epochs: Vec<EpochRecord>,
    /// 0 when no epoch beat the initial parameters.
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub stopped_epoch: usize,
    pub stop_reason: StopReason,
}

impl TrainHistory {
    pub fn final_train_loss(&self) -> f64 {
        self.epochs.last().map_or(self.initial_train_loss, |e| e.train_loss)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("history serializes");
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: TrainHistory,
}

// Independent ChaCha streams derived from the one configured seed.
const STREAM_INIT: u64 = 0;
const STREAM_SPLIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;

fn rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Validation size is `max(1, round(n · fraction))`, never leaving training empty.
pub fn validation_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).max(1).min(n.saturating_sub(1))
}

/// Shuffle with the seed, then take the validation set from the front.
pub fn split_train_val(
    windows: &[TrainingWindow],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<TrainingWindow>, Vec<TrainingWindow>), TrainError> {
    if windows.len() < 2 {
        return Err(TrainError::TooFewWindows(windows.len()));
    }
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(TrainError::InvalidConfig("validation fraction must lie in (0, 0.5]".into()));
    }
    let mut shuffled = windows.to_vec();
    shuffled.shuffle(&mut rng(seed, STREAM_SPLIT));
    let train = shuffled.split_off(validation_count(windows.len(), fraction));
    Ok((train, shuffled))
}

/// Mean loss over `windows`, evaluated in parallel and summed in order.
pub fn mean_loss(params: &ModelParams, windows: &[TrainingWindow]) -> Result<f64, NeuralError> {
    let losses = windows
        .par_iter()
        .map(|w| {
            let t = neural::model_forward(params, &w.input)?;
            neural::loss(&t.pitch_logits, &t.duration_logits, w.target)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len().max(1) as f64)
}

/// Split, initialize and train. Returns the parameters with the lowest
/// validation loss seen, including the initial ones.
pub fn train(
    windows: &[TrainingWindow],
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if let Some(w) = windows.iter().find(|w| w.input.len() != config.sql) {
        return Err(TrainError::InvalidConfig(format!(
            "window length {} does not match sql {}",
            w.input.len(),
            config.sql
        )));
    }
    let (train_set, val_set) = split_train_val(windows, config.validation_fraction, config.seed)?;
    let params = ModelParams::init(config.dims(vocab), &mut rng(config.seed, STREAM_INIT))?;
    train_split(params, &train_set, &val_set, config)
}

/// Training on an explicit split, starting from `params`.
pub fn train_split(
    mut params: ModelParams,
    train_set: &[TrainingWindow],
    val_set: &[TrainingWindow],
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(TrainError::TooFewWindows(train_set.len() + val_set.len()));
    }
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, params.dims);
    let mut shuffle_rng = rng(config.seed, STREAM_SHUFFLE);
    let initial_train_loss = mean_loss(&params, train_set)?;
    let initial_validation_loss = mean_loss(&params, val_set)?;
    let mut best = params.clone();
    let mut best_epoch = 0;
    let mut best_loss = initial_validation_loss;
    let mut reference_loss = initial_validation_loss;
    let mut stale = 0;
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut grads = ModelParams::zeros(params.dims);
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.fill(0.0);
            let scale = 1.0 / batch.len() as f64;
            for &wi in batch {
                let w = &train_set[wi];
                let trace = neural::model_forward(&params, &w.input)?;
                let l = neural::backward_scaled(&params, &trace, w.target, scale, &mut grads)?;
                if !l.is_finite() {
                    return Err(TrainError::NonFiniteLoss { epoch, window: wi, melody: w.melody, loss: l });
                }
                total += l;
            }
            optimizer.step(&mut params, &grads);
        }
        params.check_finite()?;
        let train_loss = total / train_set.len() as f64;
        let validation_loss = mean_loss(&params, val_set)?;
        log::info!("epoch {epoch}: train {train_loss:.6} validation {validation_loss:.6}");
        epochs.push(EpochRecord { epoch, train_loss, validation_loss });

        if validation_loss < best_loss {
            best_loss = validation_loss;
            best_epoch = epoch;
            best.clone_from(&params);
        }
        if validation_loss < reference_loss - config.min_delta {
            reference_loss = validation_loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                stop_reason = StopReason::EarlyStopping;
                break;
            }
        }
    }

    let stopped_epoch = epochs.len();
    Ok(TrainOutcome {
        params: best,
        history: TrainHistory {
            train_windows: train_set.len(),
            validation_windows: val_set.len(),
            initial_train_loss,
            initial_validation_loss,
            epochs,
            best_epoch,
            best_validation_loss: best_loss,
            stopped_epoch,
            stop_reason,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{windowize, Event, Melody, TokenPair};

    fn windows(n: usize) -> Vec<TrainingWindow> {
        (0..n)
            .map(|i| TrainingWindow { input: vec![TokenPair::new(1, 1)], target: TokenPair::new(1, 1), melody: i })
            .collect()
    }

    #[test]
    fn split_sizes() {
        let (t, v) = split_train_val(&windows(100), 0.1, 7).unwrap();
        assert_eq!((t.len(), v.len()), (90, 10));
        let (t, v) = split_train_val(&windows(7), 0.1, 7).unwrap();
        assert_eq!((t.len(), v.len()), (6, 1));
        let (t, v) = split_train_val(&windows(2), 0.5, 7).unwrap();
        assert_eq!((t.len(), v.len()), (1, 1));
        assert!(matches!(split_train_val(&windows(1), 0.1, 7), Err(TrainError::TooFewWindows(1))));
    }

    #[test]
    fn split_is_seeded_partition() {
        let w = windows(50);
        let a = split_train_val(&w, 0.2, 3).unwrap();
        let b = split_train_val(&w, 0.2, 3).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let mut ids: Vec<usize> = a.0.iter().chain(&a.1).map(|w| w.melody).collect();
        ids.sort();
        assert_eq!(ids, (0..50).collect::<Vec<_>>());
        let c = split_train_val(&w, 0.2, 4).unwrap();
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn config_invariants() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.patience = 0;
        assert!(c.validate().is_err());
        c = TrainConfig { validation_fraction: 0.6, ..Default::default() };
        assert!(c.validate().is_err());
        c = TrainConfig { validation_fraction: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    fn tiny_setup() -> (Vec<TrainingWindow>, Vocabulary, TrainConfig) {
        let notes = ["C4", "E4", "G4", "E4", "C4", "D4"];
        let m = Melody::new("t", notes.iter().map(|n| Event::parse(n, "1").unwrap()).collect());
        let vocab = Vocabulary::build(std::slice::from_ref(&m)).unwrap();
        let sql = 2;
        let w = windowize(std::slice::from_ref(&m), &vocab, sql).unwrap();
        let config = TrainConfig {
            hidden: 6,
            pitch_embed: 3,
            duration_embed: 2,
            sql,
            learning_rate: 0.01,
            max_epochs: 20,
            validation_fraction: 0.25,
            seed: 5,
            ..Default::default()
        };
        (w, vocab, config)
    }

    #[test]
    fn loss_drops_on_small_corpus() {
        let (w, vocab, config) = tiny_setup();
        assert_eq!(w.len(), 4);
        let out = train(&w, &vocab, &config).unwrap();
        assert!(out.history.final_train_loss() < out.history.initial_train_loss);
    }

    #[test]
    fn returns_minimum_validation_parameters() {
        let (w, vocab, config) = tiny_setup();
        let out = train(&w, &vocab, &config).unwrap();
        let h = &out.history;
        let min = h.epochs.iter().map(|e| e.validation_loss).fold(h.initial_validation_loss, f64::min);
        assert_eq!(h.best_validation_loss, min);
        let (_, val) = split_train_val(&w, config.validation_fraction, config.seed).unwrap();
        assert_eq!(mean_loss(&out.params, &val).unwrap(), min);
        assert!(h.stopped_epoch - h.best_epoch <= config.patience);
    }

    #[test]
    fn momentum_optimizer_also_trains() {
        let (w, vocab, mut config) = tiny_setup();
        config.optimizer = OptimizerKind::Momentum;
        config.learning_rate = 0.05;
        config.batch_size = 2;
        let out = train(&w, &vocab, &config).unwrap();
        assert!(out.history.final_train_loss() < out.history.initial_train_loss);
    }

    #[test]
    fn rejects_mismatched_window_length() {
        let (w, vocab, mut config) = tiny_setup();
        config.sql = 3;
        assert!(matches!(train(&w, &vocab, &config), Err(TrainError::InvalidConfig(_))));
    }
}
