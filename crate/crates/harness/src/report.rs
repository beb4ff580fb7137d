//! Per-image records, aggregate metrics and the report files built from them.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use iqa_attack::{calibrate_logistic, metrics, Bounds, Config, Mapping, Pair};
use serde::{Deserialize, Serialize};

pub const REPORT_FILE: &str = "report.json";
pub const AGGREGATES_FILE: &str = "aggregates.csv";
pub const CURVE_FILE: &str = "curve.csv";
pub const RECORD_SUFFIX: &str = ".record.json";

/// Stored aggregates must be reproducible from the records to this tolerance.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-12;

/// Outcome for one attacked (or rescored) image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    /// The clean image.
    pub image: PathBuf,
    /// File name of the adversarial PNG, relative to the record's directory.
    pub adversarial: String,
    pub mos: f64,
    pub original_score: f64,
    /// Score of the adversarial image exactly as saved.
    pub adversarial_score: f64,
    pub rgo: f64,
    pub linf: f64,
    /// Search queries, including the one for the initial perturbation.
    pub queries: u64,
    /// Queries spent scoring the clean image.
    pub anchor_queries: u64,
    /// Queries spent rescoring the image after 8-bit quantization.
    pub verification_queries: u64,
    pub seed: u64,
    pub stream: u64,
    pub aborted: Option<String>,
}

impl ImageRecord {
    pub fn pair(&self) -> Pair {
        Pair::new(self.original_score, self.adversarial_score).with_mos(self.mos)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("{} is not an attack record", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub image: PathBuf,
    pub error: String,
}

/// SRCC and PLCC against MOS, before and after the attack. `None` when the
/// correlation is undefined (fewer than two images or constant scores).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub srcc_before: Option<f64>,
    pub srcc_after: Option<f64>,
    pub plcc_before: Option<f64>,
    pub plcc_after: Option<f64>,
}

impl Correlations {
    fn compute(before: &[f64], after: &[f64], mos: &[f64]) -> Self {
        Correlations {
            srcc_before: metrics::srcc(before, mos).ok(),
            srcc_after: metrics::srcc(after, mos).ok(),
            plcc_before: metrics::plcc(before, mos).ok(),
            plcc_after: metrics::plcc(after, mos).ok(),
        }
    }

    fn fields(&self) -> [(&'static str, Option<f64>); 4] {
        [
            ("srcc_before", self.srcc_before),
            ("srcc_after", self.srcc_after),
            ("plcc_before", self.plcc_before),
            ("plcc_after", self.plcc_after),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub count: usize,
    pub rgo: f64,
    #[serde(flatten)]
    pub raw: Correlations,
    /// Logistic mapping applied before the mapped correlations: the one
    /// supplied, or else one fitted to the clean scores against MOS.
    pub mapping: Option<Mapping>,
    pub mapped: Option<Correlations>,
}

impl Aggregates {
    /// Computes every aggregate. Without a `mapping`, one is fitted on the
    /// clean scores; mapped correlations are absent if that fit fails.
    pub fn compute(records: &[ImageRecord], bounds: &Bounds, mapping: Option<&Mapping>) -> Result<Self> {
        let pairs: Vec<Pair> = records.iter().map(ImageRecord::pair).collect();
        let rgo = metrics::rgo(&pairs, bounds)?;
        let before: Vec<f64> = records.iter().map(|r| r.original_score).collect();
        let after: Vec<f64> = records.iter().map(|r| r.adversarial_score).collect();
        let mos: Vec<f64> = records.iter().map(|r| r.mos).collect();
        let mapping = match mapping {
            Some(m) => Some(*m),
            None => calibrate_logistic(&before, &mos, *bounds).ok(),
        };
        let mapped = mapping.map(|m| {
            let map = |v: &[f64]| v.iter().map(|s| m.map(*s)).collect::<Vec<_>>();
            Correlations::compute(&map(&before), &map(&after), &mos)
        });
        Ok(Aggregates {
            count: records.len(),
            rgo,
            raw: Correlations::compute(&before, &after, &mos),
            mapping,
            mapped,
        })
    }

    /// Named values in a fixed order, for CSV output.
    pub fn columns(&self) -> Vec<(String, Option<f64>)> {
        let mut cols = vec![("rgo".to_string(), Some(self.rgo))];
        cols.extend(self.raw.fields().iter().map(|(k, v)| (k.to_string(), *v)));
        let mapped = self.mapped.unwrap_or_default();
        cols.extend(mapped.fields().iter().map(|(k, v)| (format!("mapped_{k}"), *v)));
        cols
    }

    /// First field that differs from `other` by more than `tol`.
    pub fn mismatch(&self, other: &Aggregates, tol: f64) -> Option<String> {
        if self.count != other.count {
            return Some(format!("count {} vs {}", self.count, other.count));
        }
        if self.mapped.is_some() != other.mapped.is_some() {
            return Some("mapped correlations present in only one".into());
        }
        let (a, b) = (self.columns(), other.columns());
        a.into_iter().zip(b).find_map(|((name, x), (_, y))| match (x, y) {
            (None, None) => None,
            (Some(x), Some(y)) if (x - y).abs() <= tol => None,
            _ => Some(format!("{name}: {x:?} vs {y:?}")),
        })
    }
}

/// Mean per-image RGO of the incumbent after `iteration` search steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    /// Search queries spent so far, per image.
    pub queries: u64,
    pub mean_rgo: f64,
}

/// Samples the RGO-vs-query curve every `every` iterations and at the end.
/// `incumbents[i][t]` is the best score of image `i` after step `t`; shorter
/// (aborted) traces hold their last value.
pub fn rgo_curve(
    originals: &[f64],
    incumbents: &[Vec<f64>],
    bounds: &Bounds,
    max_iterations: usize,
    every: usize,
) -> Vec<CurvePoint> {
    if originals.is_empty() || every == 0 {
        return Vec::new();
    }
    let mut steps: Vec<usize> = (0..=max_iterations).step_by(every).collect();
    if steps.last() != Some(&max_iterations) {
        steps.push(max_iterations);
    }
    steps
        .into_iter()
        .map(|t| {
            let total: f64 = originals
                .iter()
                .zip(incumbents)
                .map(|(s0, trace)| {
                    let s = trace.get(t).or(trace.last()).copied().unwrap_or(*s0);
                    Pair::new(*s0, s).gain_ratio(bounds)
                })
                .sum();
            CurvePoint {
                iteration: t,
                queries: t as u64 + 1,
                mean_rgo: total / originals.len() as f64,
            }
        })
        .collect()
}

/// What produced a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum RunInfo {
    Attack {
        oracle: String,
        manifest: PathBuf,
        config: Config,
        /// Requested sample size; `null` attacks every image.
        sample: Option<usize>,
        sample_seed: u64,
        curve_every: usize,
        mapping: Option<Mapping>,
    },
    Transfer {
        oracle: String,
        source: PathBuf,
        bounds: Bounds,
        mapping: Option<Mapping>,
    },
}

impl RunInfo {
    pub fn bounds(&self) -> Bounds {
        match self {
            RunInfo::Attack { config, .. } => config.bounds,
            RunInfo::Transfer { bounds, .. } => *bounds,
        }
    }

    pub fn mapping(&self) -> Option<&Mapping> {
        match self {
            RunInfo::Attack { mapping, .. } | RunInfo::Transfer { mapping, .. } => mapping.as_ref(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub run: RunInfo,
    pub aggregates: Aggregates,
    pub records: Vec<ImageRecord>,
    pub failures: Vec<Failure>,
    pub curve: Vec<CurvePoint>,
}

impl EvaluationReport {
    pub fn new(run: RunInfo, records: Vec<ImageRecord>, failures: Vec<Failure>, curve: Vec<CurvePoint>) -> Result<Self> {
        let aggregates = Aggregates::compute(&records, &run.bounds(), run.mapping())?;
        Ok(EvaluationReport {
            run,
            aggregates,
            records,
            failures,
            curve,
        })
    }

    /// Recomputes the aggregates from the records and compares.
    pub fn check_consistency(&self) -> Result<()> {
        if let Some(m) = self.run.mapping() {
            if self.aggregates.mapping.as_ref() != Some(m) {
                bail!("stored mapping differs from the one the run was given");
            }
        }
        let fresh = Aggregates::compute(&self.records, &self.run.bounds(), self.aggregates.mapping.as_ref())?;
        if let Some(diff) = fresh.mismatch(&self.aggregates, CONSISTENCY_TOLERANCE) {
            bail!("stored aggregates disagree with records: {diff}");
        }
        Ok(())
    }

    /// Reads `report.json` (or a directory containing one) and verifies it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut path = path.as_ref().to_path_buf();
        if path.is_dir() {
            path.push(REPORT_FILE);
        }
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let report: EvaluationReport =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        report
            .check_consistency()
            .with_context(|| path.display().to_string())?;
        Ok(report)
    }

    /// Writes `report.json`, `aggregates.csv` and, when sampled, `curve.csv`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_json(&dir.join(REPORT_FILE), self)?;

        let mut w = csv::Writer::from_path(dir.join(AGGREGATES_FILE))?;
        let cols = self.aggregates.columns();
        w.write_record(std::iter::once("count".to_string()).chain(cols.iter().map(|c| c.0.clone())))?;
        w.write_record(
            std::iter::once(self.aggregates.count.to_string()).chain(cols.iter().map(|c| fmt_opt(c.1))),
        )?;
        w.flush()?;

        if !self.curve.is_empty() {
            let mut w = csv::Writer::from_path(dir.join(CURVE_FILE))?;
            w.write_record(["iteration", "queries", "mean_rgo"])?;
            for p in &self.curve {
                w.write_record([p.iteration.to_string(), p.queries.to_string(), p.mean_rgo.to_string()])?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
