//! One-parameter sweeps over attack runs.

use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, ensure, Context, Result};

use crate::report::{fmt_opt, Aggregates};
use crate::run::{cmd_attack, AttackJob};

pub const SWEEP_FILE: &str = "sweep.csv";
pub const SUMMARY_FILE: &str = "sweep_summary.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Rho,
    NumPatches,
    Gamma0,
    Seed,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Rho => "rho",
            SweepParam::NumPatches => "n",
            SweepParam::Gamma0 => "gamma0",
            SweepParam::Seed => "seed",
        })
    }
}

impl FromStr for SweepParam {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rho" => Ok(SweepParam::Rho),
            "n" => Ok(SweepParam::NumPatches),
            "gamma0" => Ok(SweepParam::Gamma0),
            "seed" => Ok(SweepParam::Seed),
            other => bail!("unknown sweep parameter `{other}` (expected rho, n, gamma0 or seed)"),
        }
    }
}

/// Parses `3/255`, `0.01` or `2`.
pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse()?;
            let den: f64 = den.trim().parse()?;
            ensure!(den != 0.0, "zero denominator");
            num / den
        }
        None => s.parse()?,
    };
    ensure!(value.is_finite(), "not a finite number");
    Ok(value)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    /// Values as written, used as row keys.
    pub values: Vec<String>,
}

impl SweepSpec {
    pub fn new(param: SweepParam, values: &[&str]) -> Self {
        SweepSpec {
            param,
            values: values.iter().map(|v| v.to_string()).collect(),
        }
    }

    /// Base job with the parameter set to `value`.
    fn apply(&self, base: &AttackJob, value: &str) -> Result<AttackJob> {
        let mut job = base.clone();
        let bad = |e| anyhow!("bad {} value `{value}`: {e}", self.param);
        match self.param {
            SweepParam::Rho => job.config.rho = parse_number(value).map_err(bad)?,
            SweepParam::Gamma0 => job.config.gamma0 = parse_number(value).map_err(bad)?,
            SweepParam::NumPatches => job.config.num_patches = value.trim().parse().map_err(|e| bad(anyhow!("{e}")))?,
            SweepParam::Seed => {
                job.config.seed = value.trim().parse().map_err(|e| bad(anyhow!("{e}")))?;
                // keep the image sample fixed so only the search randomness varies
                job.sample_seed = Some(base.sample_seed.unwrap_or(base.config.seed));
            }
        }
        job.config.validate()?;
        job.out = base.out.join(format!("{}-{}", self.param, value.trim().replace('/', "_")));
        Ok(job)
    }
}

impl FromStr for SweepSpec {
    type Err = anyhow::Error;

    /// `PARAM=V1,V2,...`
    fn from_str(s: &str) -> Result<Self> {
        let (param, values) = s
            .split_once('=')
            .ok_or_else(|| anyhow!("expected PARAM=V1,V2,..., got `{s}`"))?;
        let values: Vec<String> = values
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        ensure!(!values.is_empty(), "sweep `{s}` lists no values");
        Ok(SweepSpec {
            param: param.trim().parse()?,
            values,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub aggregates: Aggregates,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Mean and sample standard deviation of every metric across rows; metrics
/// undefined in some row are summarized over the rows that define them.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let names: Vec<String> = first.aggregates.columns().into_iter().map(|c| c.0).collect();
    names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let vals: Vec<f64> = rows
                .iter()
                .filter_map(|r| r.aggregates.columns().get(i).and_then(|c| c.1))
                .collect();
            let n = vals.len();
            let mean = if n == 0 { f64::NAN } else { vals.iter().sum::<f64>() / n as f64 };
            let std = if n < 2 {
                0.0
            } else {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            };
            SummaryRow {
                metric: name.clone(),
                mean,
                std,
                count: n,
            }
        })
        .collect()
}

/// Runs one attack per value, each into `<out>/<param>-<value>/`, and writes
/// `sweep.csv` (plus `sweep_summary.csv` for seed sweeps) into `base.out`.
pub fn cmd_sweep(base: &AttackJob, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let jobs = spec
        .values
        .iter()
        .map(|v| spec.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (value, job) in spec.values.iter().zip(&jobs) {
        let report = cmd_attack(job).with_context(|| format!("{}={value}", spec.param))?;
        rows.push(SweepRow {
            value: value.clone(),
            aggregates: report.aggregates,
        });
    }

    let mut w = csv::Writer::from_path(base.out.join(SWEEP_FILE))?;
    let cols = rows[0].aggregates.columns();
    let mut header = vec!["param".to_string(), "value".into(), "count".into()];
    header.extend(cols.into_iter().map(|c| c.0));
    w.write_record(&header)?;
    for row in &rows {
        let mut line = vec![spec.param.to_string(), row.value.clone(), row.aggregates.count.to_string()];
        line.extend(row.aggregates.columns().into_iter().map(|c| fmt_opt(c.1)));
        w.write_record(&line)?;
    }
    w.flush()?;

    if spec.param == SweepParam::Seed {
        let mut w = csv::Writer::from_path(base.out.join(SUMMARY_FILE))?;
        w.write_record(["metric", "mean", "std", "runs"])?;
        for s in summarize(&rows) {
            w.write_record([s.metric, s.mean.to_string(), s.std.to_string(), s.count.to_string()])?;
        }
        w.flush()?;
    }
    Ok(rows)
}
