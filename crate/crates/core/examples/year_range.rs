//! One short melody per year across a decade, concatenated, with an empty
//! seed and four events per year.

use tempered::engine::run_range;
use tempered::export::{write_range, DEFAULT_TEMPO_BPM};
use tempered::generation::GenerationQuery;

#[path = "common/mod.rs"]
mod common;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = common::data()?;
    let model = common::model()?;
    let template = GenerationQuery { seed: vec![], mxx: 4, mxl: 4, sql: model.sql(), rng_seed: 3, ..Default::default() };
    for (from, to) in [(1876, 1886), (2011, 2021)] {
        let range = run_range(from, to, &template, &model, &data)?;
        println!("{from}-{to}:");
        for r in &range.results {
            let notes: Vec<String> = r.melody.events.iter().map(|e| format!("{}:{}", e.pitch, e.duration)).collect();
            println!("  {} (T {:.3}/{:.3})  {}", r.query.year, r.temperatures.pitch, r.temperatures.duration, notes.join(" "));
        }
        let (_, [midi, xml]) =
            write_range(&range, model.vocab(), &model.provenance(&data), DEFAULT_TEMPO_BPM, &common::out_dir("year_range"))?;
        println!("  {} events -> {} and {}", range.melody.len(), midi.display(), xml.display());
    }
    Ok(())
}
