use crate::corpus::{TokenPair, PAD};

use super::matrix::dot;
use super::softmax::{log_sum_exp, temperature_softmax};
use super::{Gradients, Matrix, ModelParams, NeuralError};

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self { h: vec![0.0; hidden], c: vec![0.0; hidden] }
    }
}

/// Activations kept from one LSTM step for the backward pass.
#[derive(Clone, Debug)]
struct StepCache {
    z: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Result of bilinear attention over a sequence of hidden states.
#[derive(Clone, Debug, PartialEq)]
pub struct Attention {
    /// `W_a · query`
    pub projected_query: Vec<f64>,
    pub scores: Vec<f64>,
    pub weights: Vec<f64>,
    pub context: Vec<f64>,
}

/// Everything computed by one forward pass over a window.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub window: Vec<TokenPair>,
    pub hidden_states: Vec<Vec<f64>>,
    pub attention: Attention,
    pub pitch_logits: Vec<f64>,
    pub duration_logits: Vec<f64>,
    steps: Vec<StepCache>,
}

impl ForwardTrace {
    pub fn attention_weights(&self) -> &[f64] {
        &self.attention.weights
    }

    pub fn final_state(&self) -> &[f64] {
        self.hidden_states.last().expect("window is non-empty")
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn check_pair(params: &ModelParams, pair: TokenPair) -> Result<(), NeuralError> {
    let d = params.dims;
    if pair.pitch >= d.pitch_vocab {
        return Err(NeuralError::TokenOutOfRange { what: "pitch", index: pair.pitch, len: d.pitch_vocab });
    }
    if pair.duration >= d.duration_vocab {
        return Err(NeuralError::TokenOutOfRange {
            what: "duration",
            index: pair.duration,
            len: d.duration_vocab,
        });
    }
    Ok(())
}

/// `[E_p[pitch]; E_d[duration]]`
pub fn embed(params: &ModelParams, pair: TokenPair) -> Result<Vec<f64>, NeuralError> {
    check_pair(params, pair)?;
    let mut x = Vec::with_capacity(params.dims.input());
    x.extend_from_slice(params.pitch_embedding.row(pair.pitch));
    x.extend_from_slice(params.duration_embedding.row(pair.duration));
    Ok(x)
}

fn cell(params: &ModelParams, x: &[f64], state: &LstmState) -> (LstmState, StepCache) {
    let mut z = Vec::with_capacity(params.dims.concat());
    z.extend_from_slice(&state.h);
    z.extend_from_slice(x);
    let i: Vec<f64> = params.input_gate.apply(&z).into_iter().map(sigmoid).collect();
    let f: Vec<f64> = params.forget_gate.apply(&z).into_iter().map(sigmoid).collect();
    let g: Vec<f64> = params.candidate.apply(&z).into_iter().map(f64::tanh).collect();
    let o: Vec<f64> = params.output_gate.apply(&z).into_iter().map(sigmoid).collect();
    let c: Vec<f64> = (0..f.len()).map(|k| f[k] * state.c[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = o.iter().zip(&tanh_c).map(|(o, t)| o * t).collect();
    let cache = StepCache { z, i, f, g, o, c_prev: state.c.clone(), tanh_c };
    (LstmState { h, c }, cache)
}

/// One LSTM step on an input vector of width `pitch_embed + duration_embed`.
pub fn lstm_cell_forward(
    params: &ModelParams,
    x: &[f64],
    state: &LstmState,
) -> Result<LstmState, NeuralError> {
    let d = params.dims;
    for (what, expected, actual) in [
        ("lstm input", d.input(), x.len()),
        ("hidden state", d.hidden, state.h.len()),
        ("cell state", d.hidden, state.c.len()),
    ] {
        if expected != actual {
            return Err(NeuralError::Shape { what: what.into(), expected, actual });
        }
    }
    Ok(cell(params, x, state).0)
}

/// Bilinear attention: `s_i = h_iᵀ W_a q`, weights are `softmax(s)`.
pub fn attention(hidden: &[Vec<f64>], query: &[f64], weight: &Matrix) -> Attention {
    let projected_query = weight.mul_vec(query);
    let scores: Vec<f64> = hidden.iter().map(|h| dot(h, &projected_query)).collect();
    let weights = temperature_softmax(&scores, 1.0);
    let mut context = vec![0.0; query.len()];
    for (w, h) in weights.iter().zip(hidden) {
        for (c, v) in context.iter_mut().zip(h) {
            *c += w * v;
        }
    }
    Attention { projected_query, scores, weights, context }
}

/// Run the window through embeddings, LSTM, attention and both heads.
pub fn model_forward(params: &ModelParams, window: &[TokenPair]) -> Result<ForwardTrace, NeuralError> {
    if window.is_empty() {
        return Err(NeuralError::EmptyWindow);
    }
    let mut state = LstmState::zeros(params.dims.hidden);
    let mut steps = Vec::with_capacity(window.len());
    let mut hidden_states = Vec::with_capacity(window.len());
    for pair in window {
        let x = embed(params, *pair)?;
        let (next, cache) = cell(params, &x, &state);
        hidden_states.push(next.h.clone());
        steps.push(cache);
        state = next;
    }
    let attention = attention(&hidden_states, &state.h, &params.attention);
    let pitch_logits = params.pitch_head.apply(&attention.context);
    let duration_logits = params.duration_head.apply(&attention.context);
    Ok(ForwardTrace {
        window: window.to_vec(),
        hidden_states,
        attention,
        pitch_logits,
        duration_logits,
        steps,
    })
}

fn check_target(pitch_len: usize, duration_len: usize, target: TokenPair) -> Result<(), NeuralError> {
    if target.pitch == PAD || target.duration == PAD {
        return Err(NeuralError::PadTarget);
    }
    if target.pitch >= pitch_len {
        return Err(NeuralError::TokenOutOfRange { what: "pitch", index: target.pitch, len: pitch_len });
    }
    if target.duration >= duration_len {
        return Err(NeuralError::TokenOutOfRange {
            what: "duration",
            index: target.duration,
            len: duration_len,
        });
    }
    Ok(())
}

/// Summed cross-entropy of both heads at unit temperature.
pub fn loss(pitch_logits: &[f64], duration_logits: &[f64], target: TokenPair) -> Result<f64, NeuralError> {
    check_target(pitch_logits.len(), duration_logits.len(), target)?;
    Ok(log_sum_exp(pitch_logits) - pitch_logits[target.pitch] + log_sum_exp(duration_logits)
        - duration_logits[target.duration])
}

/// Loss and a fresh gradient for one window.
pub fn backward(
    params: &ModelParams,
    trace: &ForwardTrace,
    target: TokenPair,
) -> Result<(f64, Gradients), NeuralError> {
    let mut grads = ModelParams::zeros(params.dims);
    let l = backward_scaled(params, trace, target, 1.0, &mut grads)?;
    Ok((l, grads))
}

/// Adds `scale · ∂loss/∂θ` into `grads` and returns the unscaled loss.
pub fn backward_scaled(
    params: &ModelParams,
    trace: &ForwardTrace,
    target: TokenPair,
    scale: f64,
    grads: &mut Gradients,
) -> Result<f64, NeuralError> {
    let l = loss(&trace.pitch_logits, &trace.duration_logits, target)?;
    let hsize = params.dims.hidden;
    let pe = params.dims.pitch_embed;
    let seq = trace.hidden_states.len();

    let output_delta = |logits: &[f64], t: usize| {
        let mut d = temperature_softmax(logits, 1.0);
        d[t] -= 1.0;
        d.iter_mut().for_each(|v| *v *= scale);
        d
    };
    let dzp = output_delta(&trace.pitch_logits, target.pitch);
    let dzd = output_delta(&trace.duration_logits, target.duration);

    let att = &trace.attention;
    let ctx = &att.context;
    grads.pitch_head.weight.add_outer(&dzp, ctx);
    add_into(grads.pitch_head.bias.as_mut_slice(), &dzp);
    grads.duration_head.weight.add_outer(&dzd, ctx);
    add_into(grads.duration_head.bias.as_mut_slice(), &dzd);

    let mut dctx = vec![0.0; hsize];
    params.pitch_head.weight.tmul_vec_add(&dzp, &mut dctx);
    params.duration_head.weight.tmul_vec_add(&dzd, &mut dctx);

    // context = Σ w_i h_i, w = softmax(s), s_i = h_i · u, u = W_a q
    let mut dh: Vec<Vec<f64>> = att.weights.iter().map(|w| dctx.iter().map(|g| w * g).collect()).collect();
    let dw: Vec<f64> = trace.hidden_states.iter().map(|h| dot(&dctx, h)).collect();
    let mean = dot(&att.weights, &dw);
    let ds: Vec<f64> = att.weights.iter().zip(&dw).map(|(w, g)| w * (g - mean)).collect();
    let mut du = vec![0.0; hsize];
    for ((dh_i, h_i), s) in dh.iter_mut().zip(&trace.hidden_states).zip(&ds) {
        for k in 0..hsize {
            dh_i[k] += s * att.projected_query[k];
            du[k] += s * h_i[k];
        }
    }
    let query = &trace.hidden_states[seq - 1];
    grads.attention.add_outer(&du, query);
    params.attention.tmul_vec_add(&du, &mut dh[seq - 1]);

    let mut dh_next = vec![0.0; hsize];
    let mut dc_next = vec![0.0; hsize];
    let mut dz = vec![0.0; params.dims.concat()];
    for t in (0..seq).rev() {
        let s = &trace.steps[t];
        let dht: Vec<f64> = dh[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
        let mut dc = vec![0.0; hsize];
        let mut da_i = vec![0.0; hsize];
        let mut da_f = vec![0.0; hsize];
        let mut da_g = vec![0.0; hsize];
        let mut da_o = vec![0.0; hsize];
        for k in 0..hsize {
            dc[k] = dc_next[k] + dht[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
            da_o[k] = dht[k] * s.tanh_c[k] * s.o[k] * (1.0 - s.o[k]);
            da_f[k] = dc[k] * s.c_prev[k] * s.f[k] * (1.0 - s.f[k]);
            da_i[k] = dc[k] * s.g[k] * s.i[k] * (1.0 - s.i[k]);
            da_g[k] = dc[k] * s.i[k] * (1.0 - s.g[k] * s.g[k]);
        }
        dz.iter_mut().for_each(|v| *v = 0.0);
        for (gate, grad, da) in [
            (&params.input_gate, &mut grads.input_gate, &da_i),
            (&params.forget_gate, &mut grads.forget_gate, &da_f),
            (&params.candidate, &mut grads.candidate, &da_g),
            (&params.output_gate, &mut grads.output_gate, &da_o),
        ] {
            grad.weight.add_outer(da, &s.z);
            add_into(grad.bias.as_mut_slice(), da);
            gate.weight.tmul_vec_add(da, &mut dz);
        }
        dh_next.copy_from_slice(&dz[..hsize]);
        for k in 0..hsize {
            dc_next[k] = dc[k] * s.f[k];
        }
        let pair = trace.window[t];
        add_into(grads.pitch_embedding.row_mut(pair.pitch), &dz[hsize..hsize + pe]);
        add_into(grads.duration_embedding.row_mut(pair.duration), &dz[hsize + pe..]);
    }
    Ok(l)
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::ModelDims;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn small() -> ModelParams {
        let dims = ModelDims { pitch_vocab: 6, duration_vocab: 4, pitch_embed: 3, duration_embed: 2, hidden: 8 };
        ModelParams::init(dims, &mut ChaCha20Rng::seed_from_u64(11)).unwrap()
    }

    fn window() -> Vec<TokenPair> {
        vec![TokenPair::PAD, TokenPair::new(2, 1), TokenPair::new(5, 3)]
    }

    #[test]
    fn zero_weights_give_half_cell() {
        // all-zero weights: gates are σ(0) = 1/2, candidate tanh(0) = 0
        let dims = ModelDims { pitch_vocab: 2, duration_vocab: 2, pitch_embed: 1, duration_embed: 1, hidden: 2 };
        let p = ModelParams::zeros(dims);
        let s = lstm_cell_forward(&p, &[1.0, -1.0], &LstmState { h: vec![0.0; 2], c: vec![2.0, -2.0] })
            .unwrap();
        assert_eq!(s.c, vec![1.0, -1.0]);
        assert!((s.h[0] - 0.5 * 1f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn cell_rejects_wrong_width() {
        let p = small();
        assert!(lstm_cell_forward(&p, &[0.0; 4], &LstmState::zeros(8)).is_err());
    }

    #[test]
    fn attention_on_identical_states_is_uniform() {
        let h = vec![vec![1.0, 2.0]; 4];
        let a = attention(&h, &[0.3, 0.1], &Matrix::from_vec(2, 2, vec![1.0, 0.5, -0.2, 2.0]).unwrap());
        for w in &a.weights {
            assert!((w - 0.25).abs() < 1e-15);
        }
        assert!((a.context[0] - 1.0).abs() < 1e-15 && (a.context[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn attention_weights_sum_to_one() {
        let p = small();
        let t = model_forward(&p, &window()).unwrap();
        assert_eq!(t.attention_weights().len(), 3);
        assert!((t.attention_weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(t.pitch_logits.len(), 6);
        assert_eq!(t.duration_logits.len(), 4);
    }

    #[test]
    fn loss_of_uniform_logits() {
        let l = loss(&[0.0; 4], &[0.0; 2], TokenPair::new(1, 1)).unwrap();
        assert!((l - (4f64.ln() + 2f64.ln())).abs() < 1e-14);
        assert!(matches!(loss(&[0.0; 4], &[0.0; 2], TokenPair::new(0, 1)), Err(NeuralError::PadTarget)));
    }

    #[test]
    fn out_of_range_tokens_error() {
        let p = small();
        assert!(model_forward(&p, &[TokenPair::new(6, 1)]).is_err());
        assert!(model_forward(&p, &[]).is_err());
    }

    fn numeric(p: &ModelParams, w: &[TokenPair], target: TokenPair, tensor: usize, idx: usize) -> f64 {
        let h = 1e-5;
        let eval = |delta: f64| {
            let mut q = p.clone();
            q.tensors_mut()[tensor].1.as_mut_slice()[idx] += delta;
            let t = model_forward(&q, w).unwrap();
            loss(&t.pitch_logits, &t.duration_logits, target).unwrap()
        };
        (eval(h) - eval(-h)) / (2.0 * h)
    }

    #[test]
    fn gradients_match_central_differences() {
        let p = small();
        let w = window();
        let target = TokenPair::new(3, 2);
        let (_, g) = backward(&p, &model_forward(&p, &w).unwrap(), target).unwrap();
        for (ti, (name, m)) in g.tensors().iter().enumerate() {
            for idx in 0..m.len() {
                let a = m.as_slice()[idx];
                let n = numeric(&p, &w, target, ti, idx);
                let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
                assert!(rel < 1e-4, "{name}[{idx}]: analytic {a} numeric {n}");
            }
        }
    }

    #[test]
    fn scaled_backward_accumulates() {
        let p = small();
        let t = model_forward(&p, &window()).unwrap();
        let target = TokenPair::new(1, 1);
        let (_, g1) = backward(&p, &t, target).unwrap();
        let mut g = ModelParams::zeros(p.dims);
        backward_scaled(&p, &t, target, 0.5, &mut g).unwrap();
        backward_scaled(&p, &t, target, 0.5, &mut g).unwrap();
        for ((_, a), (_, b)) in g.tensors().iter().zip(g1.tensors()) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
