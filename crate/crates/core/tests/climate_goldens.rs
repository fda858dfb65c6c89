//! Sampling temperatures recomputed from the vendored table by a separate,
//! plain-arithmetic implementation.

mod common;

use std::collections::BTreeMap;

use tempered::climate::{TemperatureVectors, FIRST_YEAR, LAST_YEAR};
use tempered::engine::TEMPERATURES_FILE;

fn raw_rows() -> BTreeMap<i32, Vec<f64>> {
    let text = std::fs::read_to_string(common::data_dir().join("tokyo_tmax_monthly.csv")).unwrap();
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            (cells[0].parse().unwrap(), cells[1..].iter().map(|c| c.parse().unwrap()).collect())
        })
        .collect()
}

fn oracle() -> BTreeMap<i32, (f64, f64)> {
    let rows = raw_rows();
    let diff = |v: &Vec<f64>| -> Vec<f64> { v.windows(2).map(|w| w[1] - w[0]).collect() };
    let base = diff(&rows[&1876]);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let means: BTreeMap<i32, f64> = rows.iter().map(|(y, v)| (*y, v.iter().sum::<f64>() / 12.0)).collect();
    let lo = means.values().cloned().fold(f64::MAX, f64::min);
    let hi = means.values().cloned().fold(f64::MIN, f64::max);
    rows.iter()
        .map(|(y, v)| {
            let d = diff(v);
            let cos = d.iter().zip(&base).map(|(a, b)| a * b).sum::<f64>() / (norm(&d) * norm(&base));
            let pitch = if *y == 1876 { 0.0 } else { (1.0 - cos).clamp(0.0, 1.0) };
            (*y, (pitch, (means[y] - lo) / (hi - lo)))
        })
        .collect()
}

#[test]
fn every_year_matches_the_oracle() {
    let v = common::vectors();
    let o = oracle();
    assert_eq!(v.years.len(), 146);
    assert_eq!(v.first_year(), Some(FIRST_YEAR));
    assert_eq!(v.last_year(), Some(LAST_YEAR));
    for (year, (pitch, duration)) in o {
        let t = v.get(year).unwrap();
        assert!((t.pitch - pitch).abs() < 1e-12, "{year} pitch {} vs {pitch}", t.pitch);
        assert!((t.duration - duration).abs() < 1e-12, "{year} duration {} vs {duration}", t.duration);
    }
}

#[test]
fn exact_endpoints() {
    let v = common::vectors();
    assert_eq!(v.get(1876).unwrap().pitch, 0.0);
    assert_eq!(v.get(2021).unwrap().duration, 1.0);
    let warmest = v.years.iter().max_by(|a, b| a.1.duration.total_cmp(&b.1.duration)).unwrap();
    assert_eq!(*warmest.0, 2021);
    assert!(v.years.values().any(|t| t.duration == 0.0));
}

#[test]
fn pinned_values_from_the_data_manifest() {
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(common::data_dir().join("manifest.json")).unwrap()).unwrap();
    let pinned = &manifest["climate"]["recomputed"];
    let v = common::vectors();
    for year in [1876, 1980, 2004, 2021] {
        let t = v.get(year).unwrap();
        let p = pinned[format!("pitch_temperature_{year}")].as_f64().unwrap();
        let d = pinned[format!("duration_temperature_{year}")].as_f64().unwrap();
        assert!((t.pitch - p).abs() <= 5e-7, "{year}: {} vs {p}", t.pitch);
        assert!((t.duration - d).abs() <= 5e-7, "{year}: {} vs {d}", t.duration);
    }
    let table = common::climate_table();
    assert_eq!(manifest["climate"]["sha256"].as_str().unwrap(), table.provenance.sha256);
}

#[test]
fn shipped_snapshot_is_the_recomputation() {
    let shipped = TemperatureVectors::load(&common::data_dir().join(TEMPERATURES_FILE)).unwrap();
    let fresh = common::vectors();
    assert_eq!(shipped.reference_year, fresh.reference_year);
    assert_eq!(shipped.to_json(), fresh.to_json());
    for (year, t) in &fresh.years {
        let s = shipped.get(*year).unwrap();
        assert!((s.pitch - t.pitch).abs() <= 5e-7 && (s.duration - t.duration).abs() <= 5e-7);
    }
}
