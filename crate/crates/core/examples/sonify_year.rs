//! Generate a melody for one year and write the five-file export bundle.
//!
//! ```text
//! cargo run --release --example sonify_year -- 2004 7
//! ```

use tempered::engine::run_query;
use tempered::export::{write_bundle, DEFAULT_TEMPO_BPM};
use tempered::generation::GenerationQuery;

#[path = "common/mod.rs"]
mod common;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let year: i32 = args.next().map_or(Ok(2021), |s| s.parse())?;
    let rng_seed: u64 = args.next().map_or(Ok(0), |s| s.parse())?;

    let data = common::data()?;
    let model = common::model()?;
    let query = GenerationQuery { year, rng_seed, sql: model.sql(), ..Default::default() };
    let result = run_query(&query, &model, &data)?;
    println!(
        "{year}: pitch temperature {:.4}, duration temperature {:.4}",
        result.temperatures.pitch, result.temperatures.duration
    );
    let line: Vec<String> = result.melody.events.iter().map(|e| format!("{}:{}", e.pitch, e.duration)).collect();
    println!("{}", line.join(" "));

    let dir = common::out_dir("sonify_year");
    let paths = write_bundle(&result, model.vocab(), &model.provenance(&data), DEFAULT_TEMPO_BPM, &dir)?;
    for p in paths.all() {
        println!("wrote {}", p.display());
    }
    Ok(())
}
