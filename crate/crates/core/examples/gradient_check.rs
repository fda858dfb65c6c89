//! Compare the hand-written backward pass with central finite differences.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use tempered::corpus::TokenPair;
use tempered::neural::{backward, loss, model_forward, ModelDims, ModelParams};

const STEP: f64 = 1e-5;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dims = ModelDims { pitch_vocab: 6, duration_vocab: 4, pitch_embed: 3, duration_embed: 2, hidden: 8 };
    let params = ModelParams::init(dims, &mut ChaCha20Rng::seed_from_u64(1))?;
    let window = [TokenPair::PAD, TokenPair::new(2, 1), TokenPair::new(5, 3)];
    let target = TokenPair::new(3, 2);

    let trace = model_forward(&params, &window)?;
    let (value, grads) = backward(&params, &trace, target)?;
    println!("loss {value:.6}, {} parameters", params.parameter_count());

    let eval = |p: &ModelParams| -> f64 {
        let t = model_forward(p, &window).expect("valid window");
        loss(&t.pitch_logits, &t.duration_logits, target).expect("valid target")
    };
    let mut worst_overall: f64 = 0.0;
    for (ti, (name, g)) in grads.tensors().iter().enumerate() {
        let mut worst: f64 = 0.0;
        for idx in 0..g.len() {
            let mut plus = params.clone();
            plus.tensors_mut()[ti].1.as_mut_slice()[idx] += STEP;
            let mut minus = params.clone();
            minus.tensors_mut()[ti].1.as_mut_slice()[idx] -= STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * STEP);
            let analytic = g.as_slice()[idx];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        println!("{name:<24} {:>4} values  max rel err {worst:.2e}", g.len());
        worst_overall = worst_overall.max(worst);
    }
    println!("worst {worst_overall:.2e}");
    Ok(())
}
