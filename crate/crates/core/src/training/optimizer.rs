use serde::{Deserialize, Serialize};

use crate::neural::{Gradients, ModelDims, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Adaptive moments with β1 0.9, β2 0.999, ε 1e-8.
    Adam,
    /// Gradient descent with momentum 0.9.
    Momentum,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(Self::Adam),
            "momentum" | "sgd" => Ok(Self::Momentum),
            other => Err(format!("unknown optimizer {other:?} (expected adam or momentum)")),
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;
pub const MOMENTUM: f64 = 0.9;

#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: i32,
    first: ModelParams,
    second: Option<ModelParams>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, dims: ModelDims) -> Self {
        let second = (kind == OptimizerKind::Adam).then(|| ModelParams::zeros(dims));
        Self { kind, lr, step: 0, first: ModelParams::zeros(dims), second }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &Gradients) {
        self.step += 1;
        match (self.kind, self.second.as_mut()) {
            (OptimizerKind::Adam, Some(second)) => {
                let c1 = 1.0 - ADAM_BETA1.powi(self.step);
                let c2 = 1.0 - ADAM_BETA2.powi(self.step);
                let lr = self.lr;
                for (((_, p), (_, g)), ((_, m), (_, v))) in params
                    .tensors_mut()
                    .into_iter()
                    .zip(grads.tensors())
                    .zip(self.first.tensors_mut().into_iter().zip(second.tensors_mut()))
                {
                    let (p, g) = (p.as_mut_slice(), g.as_slice());
                    let (m, v) = (m.as_mut_slice(), v.as_mut_slice());
                    for k in 0..p.len() {
                        m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * g[k];
                        v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * g[k] * g[k];
                        p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPSILON);
                    }
                }
            }
            _ => {
                self.first.scale(MOMENTUM);
                self.first.add_scaled(grads, 1.0);
                params.add_scaled(&self.first, -self.lr);
            }
        }
    }
}
