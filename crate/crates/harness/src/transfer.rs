//! Rescoring adversarial examples under a different oracle.

use std::fs;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use iqa_attack::wire::DEFAULT_TIMEOUT;
use iqa_attack::{load_image, Bounds, Image, Mapping};

use crate::manifest::DatasetManifest;
use crate::oracle_spec::OracleSpec;
use crate::report::{EvaluationReport, Failure, ImageRecord, RunInfo, RECORD_SUFFIX};

#[derive(Clone, Debug)]
pub struct TransferJob {
    /// Output directory of an attack run.
    pub source: PathBuf,
    /// When given, MOS values come from here instead of the records.
    pub manifest: Option<PathBuf>,
    pub oracle: OracleSpec,
    pub bounds: Bounds,
    pub out: PathBuf,
    pub timeout: Duration,
    pub mapping: Option<Mapping>,
}

impl TransferJob {
    pub fn new(source: impl Into<PathBuf>, oracle: OracleSpec, out: impl Into<PathBuf>) -> Self {
        TransferJob {
            source: source.into(),
            manifest: None,
            oracle,
            bounds: Bounds::default(),
            out: out.into(),
            timeout: DEFAULT_TIMEOUT,
            mapping: None,
        }
    }
}

/// Record files in `dir`, sorted by name.
pub fn record_files(dir: &std::path::Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(RECORD_SUFFIX))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Scores every original/adversarial pair recorded in `job.source` under
/// `job.oracle`, without running any attack iterations.
pub fn cmd_transfer(job: &TransferJob) -> Result<EvaluationReport> {
    let files = record_files(&job.source)?;
    if files.is_empty() {
        bail!("{} holds no attack records", job.source.display());
    }
    let sources = files
        .iter()
        .map(|f| ImageRecord::load(f))
        .collect::<Result<Vec<_>>>()?;
    let manifest = job
        .manifest
        .as_ref()
        .map(|m| DatasetManifest::load(m, job.bounds))
        .transpose()?;

    let oracle = job.oracle.connect(job.bounds, job.timeout)?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for src in sources {
        let mos = match &manifest {
            Some(m) => match m.find(&src.image) {
                Some(e) => e.mos,
                None => bail!("{} is not in the manifest", src.image.display()),
            },
            None => src.mos,
        };
        let rescored = (|| -> Result<ImageRecord> {
            let x: Image = load_image(&src.image)?;
            let adv: Image = load_image(job.source.join(&src.adversarial))?;
            let original_score = oracle.score(&x)?;
            let adversarial_score = oracle.score(&adv)?;
            Ok(ImageRecord {
                mos,
                original_score,
                adversarial_score,
                rgo: iqa_attack::Pair::new(original_score, adversarial_score).gain_ratio(&job.bounds),
                linf: adv.linf_distance(&x)?,
                queries: 0,
                anchor_queries: 0,
                verification_queries: 0,
                ..src.clone()
            })
        })();
        match rescored {
            Ok(r) => records.push(r),
            Err(e) => failures.push(Failure {
                image: src.image.clone(),
                error: format!("{e:#}"),
            }),
        }
    }
    if records.is_empty() {
        bail!("no record could be rescored; first error: {}", failures[0].error);
    }

    let run = RunInfo::Transfer {
        oracle: job.oracle.to_string(),
        source: job.source.clone(),
        bounds: job.bounds,
        mapping: job.mapping,
    };
    let report = EvaluationReport::new(run, records, failures, Vec::new())?;
    report.save(&job.out)?;
    Ok(report)
}
