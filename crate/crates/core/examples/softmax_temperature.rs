//! How the sampling temperature reshapes one logit vector.

use tempered::neural::{argmax, temperature_softmax, TEMPERATURE_EPSILON};

fn entropy(p: &[f64]) -> f64 {
    0.0 - p.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

fn main() {
    let logits = [2.0, 1.0, 0.5, 0.0, -1.0];
    println!("logits {logits:?}, argmax {}", argmax(&logits));
    println!("{:>7}  {:<42} entropy", "T", "distribution");
    for t in [0.0, TEMPERATURE_EPSILON / 2.0, 0.1, 0.25, 0.5, 0.75, 1.0] {
        let p = temperature_softmax(&logits, t);
        let shown: Vec<String> = p.iter().map(|x| format!("{x:.3}")).collect();
        println!("{t:>7.4}  {:<42} {:.4}", shown.join(" "), entropy(&p));
    }
}
