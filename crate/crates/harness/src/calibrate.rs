use std::path::Path;

use anyhow::{bail, Context, Result};
use iqa_attack::{calibrate_logistic, Bounds, Mapping};
use serde::Deserialize;

use crate::report::write_json;

#[derive(Deserialize)]
struct Row {
    raw_score: f64,
    mos: f64,
}

/// Reads a `raw_score,mos` CSV into two columns.
pub fn read_score_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    if reader.headers()?.iter().collect::<Vec<_>>() != ["raw_score", "mos"] {
        bail!("{} must start with the header `raw_score,mos`", path.display());
    }
    let mut raw = Vec::new();
    let mut mos = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.with_context(|| format!("{} row {}", path.display(), i + 1))?;
        raw.push(row.raw_score);
        mos.push(row.mos);
    }
    Ok((raw, mos))
}

/// Fits the logistic mapping to the table at `scores` and writes it as JSON.
pub fn cmd_calibrate(scores: &Path, bounds: Bounds, out: &Path) -> Result<Mapping> {
    let (raw, mos) = read_score_table(scores)?;
    let mapping = calibrate_logistic(&raw, &mos, bounds)?;
    write_json(out, &mapping)?;
    Ok(mapping)
}

pub fn load_mapping(path: &Path) -> Result<Mapping> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing mapping {}", path.display()))
}
