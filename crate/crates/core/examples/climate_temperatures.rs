//! Derive the two year-indexed sampling temperatures from the monthly table.
//!
//! ```text
//! cargo run --example climate_temperatures [-- path/to/table.csv]
//! ```

use std::path::PathBuf;

use tempered::climate::{build_temperature_vectors, forward_difference, ClimateTable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/tokyo_tmax_monthly.csv"));
    let table = ClimateTable::load(&path)?;
    println!("{} years from {}", table.len(), path.display());

    let vectors = build_temperature_vectors(&table)?;
    println!("{:>6} {:>8} {:>9} {:>8}", "year", "mean", "pitch", "duration");
    for year in [1876, 1900, 1950, 1980, 2004, 2021] {
        let t = vectors.get(year).ok_or("year missing")?;
        println!("{year:>6} {:>8.3} {:>9.4} {:>8.4}", table.annual_mean(year)?, t.pitch, t.duration);
    }

    let delta = forward_difference(table.monthly(2021)?);
    let shown: Vec<String> = delta.iter().map(|d| format!("{d:+.1}")).collect();
    println!("2021 month-to-month change: {}", shown.join(" "));

    let (warmest, _) = vectors
        .years
        .iter()
        .max_by(|a, b| a.1.duration.total_cmp(&b.1.duration))
        .ok_or("empty table")?;
    println!("warmest year: {warmest}");
    Ok(())
}
