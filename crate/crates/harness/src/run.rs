//! Intra-model attack over a manifest.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use iqa_attack::wire::DEFAULT_TIMEOUT;
use iqa_attack::{load_image, save_image, Attack, Config, Image, ImageTensor, Mapping, Pair, QualityOracle};

use crate::manifest::{canonical, DatasetManifest, ManifestEntry};
use crate::oracle_spec::OracleSpec;
use crate::report::{rgo_curve, EvaluationReport, Failure, ImageRecord, RunInfo, RECORD_SUFFIX};

pub const DEFAULT_SAMPLE: usize = 50;
pub const DEFAULT_CURVE_EVERY: usize = 100;

#[derive(Clone, Debug)]
pub struct AttackJob {
    pub manifest: PathBuf,
    pub oracle: OracleSpec,
    pub config: Config,
    pub out: PathBuf,
    pub jobs: usize,
    /// Images to sample; `None` attacks the whole manifest.
    pub sample: Option<usize>,
    /// Seed for choosing the sample; defaults to the attack seed.
    pub sample_seed: Option<u64>,
    pub timeout: Duration,
    pub curve_every: usize,
    pub mapping: Option<Mapping>,
}

impl AttackJob {
    pub fn new(manifest: impl Into<PathBuf>, oracle: OracleSpec, out: impl Into<PathBuf>) -> Self {
        AttackJob {
            manifest: manifest.into(),
            oracle,
            config: Config::default(),
            out: out.into(),
            jobs: 1,
            sample: Some(DEFAULT_SAMPLE),
            sample_seed: None,
            timeout: DEFAULT_TIMEOUT,
            curve_every: DEFAULT_CURVE_EVERY,
            mapping: None,
        }
    }

    fn sample_seed(&self) -> u64 {
        self.sample_seed.unwrap_or(self.config.seed)
    }
}

struct Task<'a> {
    index: usize,
    entry: &'a ManifestEntry,
    stem: String,
}

struct Done {
    record: ImageRecord,
    incumbents: Vec<f64>,
}

/// File stems for the chosen entries; colliding stems get the manifest index
/// appended.
fn stems(manifest: &DatasetManifest, chosen: &[usize]) -> Vec<String> {
    let base: Vec<String> = chosen
        .iter()
        .map(|&i| {
            manifest.entries()[i]
                .path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("image{i}"))
        })
        .collect();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in &base {
        *counts.entry(s).or_default() += 1;
    }
    base.iter()
        .zip(chosen)
        .map(|(s, i)| if counts[s.as_str()] > 1 { format!("{s}-{i}") } else { s.clone() })
        .collect()
}

/// Rounds `adv` to 8-bit levels without leaving the budget around the
/// (on-grid) clean image `x`.
pub fn snap_to_levels(x: &Image, adv: &Image, rho: f64) -> Image {
    let steps = (rho * 255.0 + 1e-9).floor();
    let data = x
        .data()
        .iter()
        .zip(adv.data())
        .map(|(o, a)| {
            let center = (o * 255.0).round();
            let level = (a * 255.0 + 0.5).floor();
            level.clamp(center - steps, center + steps).clamp(0.0, 255.0) / 255.0
        })
        .collect();
    ImageTensor::new(x.shape(), data).expect("levels stay in range")
}

fn attack_one(task: &Task, oracle: &dyn QualityOracle<f64>, config: &Config, out: &Path) -> Result<Done> {
    let x: Image = load_image(&task.entry.path)?;
    let result = Attack::new(config).stream(task.index as u64).run(&x, oracle)?;

    let adv = snap_to_levels(&x, &result.adversarial, config.rho);
    let (adv_score, verification) = if adv == result.adversarial {
        (result.final_score, 0)
    } else {
        let s = oracle.score(&adv).context("scoring the quantized adversarial image")?;
        (s, 1)
    };

    let png = format!("{}.adv.png", task.stem);
    save_image(&adv, out.join(&png), false)?;
    let record = ImageRecord {
        image: canonical(&task.entry.path),
        adversarial: png,
        mos: task.entry.mos,
        original_score: result.original_score,
        adversarial_score: adv_score,
        rgo: Pair::new(result.original_score, adv_score).gain_ratio(&config.bounds),
        linf: adv.linf_distance(&x)?,
        queries: result.queries,
        anchor_queries: result.anchor_queries,
        verification_queries: verification,
        seed: config.seed,
        stream: task.index as u64,
        aborted: result.aborted.clone(),
    };
    record.save(&out.join(format!("{}{RECORD_SUFFIX}", task.stem)))?;
    Ok(Done {
        incumbents: result.incumbent_scores(),
        record,
    })
}

/// Attacks the sampled images, writing `<stem>.adv.png` and
/// `<stem>.record.json` per image plus the report files into `job.out`.
///
/// Failed images are listed in the report and skipped; the call fails only
/// when no image succeeds.
pub fn cmd_attack(job: &AttackJob) -> Result<EvaluationReport> {
    let config = &job.config;
    config.validate()?;
    let manifest = DatasetManifest::load(&job.manifest, config.bounds)?;
    let chosen = manifest.sample(job.sample, job.sample_seed());
    let tasks: Vec<Task> = chosen
        .iter()
        .zip(stems(&manifest, &chosen))
        .map(|(&index, stem)| Task {
            index,
            entry: &manifest.entries()[index],
            stem,
        })
        .collect();

    fs::create_dir_all(&job.out).with_context(|| format!("creating {}", job.out.display()))?;
    let workers = job.jobs.clamp(1, tasks.len());
    let oracles = (0..workers)
        .map(|_| job.oracle.connect(config.bounds, job.timeout))
        .collect::<Result<Vec<_>>>()?;

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<Done>>>> = Mutex::new((0..tasks.len()).map(|_| None).collect());
    thread::scope(|scope| {
        for oracle in &oracles {
            let (tasks, next, slots) = (&tasks, &next, &slots);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(task) = tasks.get(i) else { break };
                let done = attack_one(task, oracle.as_ref(), config, &job.out);
                slots.lock().unwrap()[i] = Some(done);
            });
        }
    });

    let mut records = Vec::new();
    let mut incumbents = Vec::new();
    let mut failures = Vec::new();
    for (task, slot) in tasks.iter().zip(slots.into_inner().unwrap()) {
        match slot.expect("every task runs") {
            Ok(done) => {
                incumbents.push(done.incumbents);
                records.push(done.record);
            }
            Err(e) => failures.push(Failure {
                image: task.entry.path.clone(),
                error: format!("{e:#}"),
            }),
        }
    }
    if records.is_empty() {
        let first = failures.first().map(|f| f.error.as_str()).unwrap_or("");
        bail!("all {} images failed; first error: {first}", failures.len());
    }

    let originals: Vec<f64> = records.iter().map(|r| r.original_score).collect();
    let curve = rgo_curve(
        &originals,
        &incumbents,
        &config.bounds,
        config.max_iterations,
        job.curve_every,
    );
    let run = RunInfo::Attack {
        oracle: job.oracle.to_string(),
        manifest: job.manifest.clone(),
        config: config.clone(),
        sample: job.sample,
        sample_seed: job.sample_seed(),
        curve_every: job.curve_every,
        mapping: job.mapping,
    };
    let report = EvaluationReport::new(run, records, failures, curve)?;
    report.save(&job.out)?;
    Ok(report)
}
