use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{Matrix, NeuralError};

/// Layer sizes. Vocabulary sizes include PAD.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub pitch_vocab: usize,
    pub duration_vocab: usize,
    pub pitch_embed: usize,
    pub duration_embed: usize,
    pub hidden: usize,
}

impl ModelDims {
    pub const DEFAULT_HIDDEN: usize = 256;
    pub const DEFAULT_PITCH_EMBED: usize = 64;
    pub const DEFAULT_DURATION_EMBED: usize = 16;

    pub fn with_vocab(pitch_vocab: usize, duration_vocab: usize) -> Self {
        Self {
            pitch_vocab,
            duration_vocab,
            pitch_embed: Self::DEFAULT_PITCH_EMBED,
            duration_embed: Self::DEFAULT_DURATION_EMBED,
            hidden: Self::DEFAULT_HIDDEN,
        }
    }

    /// Width of the concatenated embedding fed to the LSTM.
    pub fn input(&self) -> usize {
        self.pitch_embed + self.duration_embed
    }

    /// Width of `[h_prev; x]`.
    pub fn concat(&self) -> usize {
        self.hidden + self.input()
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let fields = [
            ("pitch_vocab", self.pitch_vocab, 2),
            ("duration_vocab", self.duration_vocab, 2),
            ("pitch_embed", self.pitch_embed, 1),
            ("duration_embed", self.duration_embed, 1),
            ("hidden", self.hidden, 1),
        ];
        for (name, value, min) in fields {
            if value < min {
                return Err(NeuralError::Dims(format!("{name} must be at least {min}, got {value}")));
            }
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        let h = self.hidden;
        self.pitch_vocab * self.pitch_embed
            + self.duration_vocab * self.duration_embed
            + 4 * (h * self.concat() + h)
            + h * h
            + self.pitch_vocab * (h + 1)
            + self.duration_vocab * (h + 1)
    }
}

/// `y = W x + b`, with the bias stored as an `n × 1` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Linear {
    pub fn zeros(out: usize, inp: usize) -> Self {
        Self { weight: Matrix::zeros(out, inp), bias: Matrix::zeros(out, 1) }
    }

    /// `W x + b`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.bias.as_slice().to_vec();
        self.weight.mul_vec_add(x, &mut y);
        y
    }

    fn uniform(out: usize, inp: usize, rng: &mut dyn RngCore) -> Self {
        let k = 1.0 / (inp as f64).sqrt();
        Self { weight: uniform(out, inp, k, rng), bias: uniform(out, 1, k, rng) }
    }
}

/// Every trainable tensor of the model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub pitch_embedding: Matrix,
    pub duration_embedding: Matrix,
    pub input_gate: Linear,
    pub forget_gate: Linear,
    pub candidate: Linear,
    pub output_gate: Linear,
    pub attention: Matrix,
    pub pitch_head: Linear,
    pub duration_head: Linear,
}

/// Gradients share the parameter layout.
pub type Gradients = ModelParams;

/// Tensor names in canonical order, as used by checkpoints and diagnostics.
pub const TENSOR_NAMES: [&str; 15] = [
    "pitch_embedding",
    "duration_embedding",
    "lstm.input.weight",
    "lstm.input.bias",
    "lstm.forget.weight",
    "lstm.forget.bias",
    "lstm.candidate.weight",
    "lstm.candidate.bias",
    "lstm.output.weight",
    "lstm.output.bias",
    "attention.weight",
    "pitch_head.weight",
    "pitch_head.bias",
    "duration_head.weight",
    "duration_head.bias",
];

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Self {
        let h = dims.hidden;
        Self {
            dims,
            pitch_embedding: Matrix::zeros(dims.pitch_vocab, dims.pitch_embed),
            duration_embedding: Matrix::zeros(dims.duration_vocab, dims.duration_embed),
            input_gate: Linear::zeros(h, dims.concat()),
            forget_gate: Linear::zeros(h, dims.concat()),
            candidate: Linear::zeros(h, dims.concat()),
            output_gate: Linear::zeros(h, dims.concat()),
            attention: Matrix::zeros(h, h),
            pitch_head: Linear::zeros(dims.pitch_vocab, h),
            duration_head: Linear::zeros(dims.duration_vocab, h),
        }
    }

    /// Uniform(-k, k) with `k = 1/sqrt(fan_in)`; embeddings see a one-hot
    /// input so their fan-in is 1. Forget-gate biases start at 1.
    pub fn init(dims: ModelDims, rng: &mut dyn RngCore) -> Result<Self, NeuralError> {
        dims.validate()?;
        let h = dims.hidden;
        let c = dims.concat();
        let mut forget_gate = Linear::uniform(h, c, rng);
        forget_gate.bias.fill(1.0);
        Ok(Self {
            dims,
            pitch_embedding: uniform(dims.pitch_vocab, dims.pitch_embed, 1.0, rng),
            duration_embedding: uniform(dims.duration_vocab, dims.duration_embed, 1.0, rng),
            input_gate: Linear::uniform(h, c, rng),
            forget_gate,
            candidate: Linear::uniform(h, c, rng),
            output_gate: Linear::uniform(h, c, rng),
            attention: uniform(h, h, 1.0 / (h as f64).sqrt(), rng),
            pitch_head: Linear::uniform(dims.pitch_vocab, h, rng),
            duration_head: Linear::uniform(dims.duration_vocab, h, rng),
        })
    }

    /// Tensors paired with their names, in `TENSOR_NAMES` order.
    pub fn tensors(&self) -> [(&'static str, &Matrix); 15] {
        let t = [
            &self.pitch_embedding,
            &self.duration_embedding,
            &self.input_gate.weight,
            &self.input_gate.bias,
            &self.forget_gate.weight,
            &self.forget_gate.bias,
            &self.candidate.weight,
            &self.candidate.bias,
            &self.output_gate.weight,
            &self.output_gate.bias,
            &self.attention,
            &self.pitch_head.weight,
            &self.pitch_head.bias,
            &self.duration_head.weight,
            &self.duration_head.bias,
        ];
        let mut i = 0;
        t.map(|m| {
            i += 1;
            (TENSOR_NAMES[i - 1], m)
        })
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Matrix); 15] {
        let t = [
            &mut self.pitch_embedding,
            &mut self.duration_embedding,
            &mut self.input_gate.weight,
            &mut self.input_gate.bias,
            &mut self.forget_gate.weight,
            &mut self.forget_gate.bias,
            &mut self.candidate.weight,
            &mut self.candidate.bias,
            &mut self.output_gate.weight,
            &mut self.output_gate.bias,
            &mut self.attention,
            &mut self.pitch_head.weight,
            &mut self.pitch_head.bias,
            &mut self.duration_head.weight,
            &mut self.duration_head.bias,
        ];
        let mut i = 0;
        t.map(|m| {
            i += 1;
            (TENSOR_NAMES[i - 1], m)
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.len()).sum()
    }

    /// Errors with the tensor name and flat index of the first NaN or inf.
    pub fn check_finite(&self) -> Result<(), NeuralError> {
        for (name, m) in self.tensors() {
            if let Some(index) = m.first_non_finite() {
                return Err(NeuralError::NonFinite {
                    tensor: name.to_string(),
                    index,
                    value: m.as_slice()[index],
                });
            }
        }
        Ok(())
    }

    /// `self += scale · other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_scaled(b, scale);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, m) in self.tensors_mut() {
            m.scale(factor);
        }
    }

    pub fn fill(&mut self, value: f64) {
        for (_, m) in self.tensors_mut() {
            m.fill(value);
        }
    }
}

fn uniform(rows: usize, cols: usize, k: f64, rng: &mut dyn RngCore) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-k..k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn dims() -> ModelDims {
        ModelDims { pitch_vocab: 6, duration_vocab: 4, pitch_embed: 3, duration_embed: 2, hidden: 5 }
    }

    #[test]
    fn shapes_and_count() {
        let p = ModelParams::init(dims(), &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        assert_eq!(p.input_gate.weight.shape(), (5, 10));
        assert_eq!(p.attention.shape(), (5, 5));
        assert_eq!(p.pitch_head.weight.shape(), (6, 5));
        assert_eq!(p.parameter_count(), dims().parameter_count());
        assert!(p.forget_gate.bias.as_slice().iter().all(|b| *b == 1.0));
    }

    #[test]
    fn init_bounds_follow_fan_in() {
        let p = ModelParams::init(dims(), &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
        let k = 1.0 / 10f64.sqrt();
        assert!(p.candidate.weight.as_slice().iter().all(|w| w.abs() < k));
        let k = 1.0 / 5f64.sqrt();
        assert!(p.attention.as_slice().iter().all(|w| w.abs() < k));
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let a = ModelParams::init(dims(), &mut ChaCha20Rng::seed_from_u64(3)).unwrap();
        let b = ModelParams::init(dims(), &mut ChaCha20Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn names_the_bad_tensor() {
        let mut p = ModelParams::zeros(dims());
        assert!(p.check_finite().is_ok());
        p.attention.set(1, 2, f64::INFINITY);
        match p.check_finite() {
            Err(NeuralError::NonFinite { tensor, index, .. }) => {
                assert_eq!(tensor, "attention.weight");
                assert_eq!(index, 7);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_tiny_dims() {
        let mut d = dims();
        d.hidden = 0;
        assert!(ModelParams::init(d, &mut ChaCha20Rng::seed_from_u64(0)).is_err());
    }
}
