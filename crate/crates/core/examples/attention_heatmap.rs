//! Text rendering of the attention and candidate matrices of one generation.

use tempered::engine::run_query;
use tempered::export::{attention_csv, candidates_csv};
use tempered::generation::GenerationQuery;

#[path = "common/mod.rs"]
mod common;

const SHADES: [char; 5] = [' ', '.', ':', '*', '#'];

fn shade(v: f64, max: f64) -> char {
    let i = if max > 0.0 { (v / max * 4.0).round() as usize } else { 0 };
    SHADES[i.min(4)]
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = common::data()?;
    let model = common::model()?;
    let query = GenerationQuery { year: 2004, mxx: 12, rng_seed: 5, sql: model.sql(), ..Default::default() };
    let result = run_query(&query, &model, &data)?;

    println!("attention (rows: generated steps, columns: window positions, oldest first)");
    for (row, event) in result.attention.iter().zip(result.generated()) {
        let max = row.iter().cloned().fold(0.0, f64::max);
        let cells: String = row.iter().map(|v| shade(*v, max)).collect();
        println!("|{cells}| {}", event.pitch);
    }

    let labels = model.vocab().pitch_labels();
    println!("\npitch candidates (columns: {})", labels.join(" "));
    for (row, event) in result.pitch_candidates.iter().zip(result.generated()) {
        let max = row.iter().cloned().fold(0.0, f64::max);
        let cells: String = row.iter().map(|v| shade(*v, max)).collect();
        println!("|{cells}| {}", event.pitch);
    }

    let csv = attention_csv(&result)?;
    println!("\nattention.csv header: {}", csv.lines().next().unwrap_or(""));
    let csv = candidates_csv(&result, model.vocab())?;
    println!("candidates.csv header: {}", csv.lines().next().unwrap_or(""));
    Ok(())
}
