use std::io::Write;
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use iqa_attack::wire::{serve_stdio, serve_tcp};
use iqa_attack::{Bounds, BuiltinScorer, Config, LossKind, PatchMode, QualityOracle, Scalar, ScoreBounds};
use iqa_attack_harness::{
    cmd_attack, cmd_calibrate, cmd_sweep, cmd_transfer, load_mapping, parse_number, AttackJob, EvaluationReport,
    OracleSpec, SweepParam, SweepSpec, TransferJob,
};

#[derive(Parser)]
#[command(name = "iqa-attack", version, about = "Black-box score attacks on image quality models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Attack images from a manifest and report RGO and correlations.
    Attack(AttackArgs),
    /// Rescore a previous attack's images under another oracle.
    Transfer(TransferArgs),
    /// Repeat an attack across values of one parameter.
    Sweep {
        #[command(flatten)]
        attack: AttackArgs,
        /// rho, n, gamma0 or seed.
        #[arg(long)]
        param: String,
        /// Comma-separated values; fractions such as 3/255 are accepted.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Fit a logistic mapping from raw scores to MOS.
    Calibrate {
        /// CSV with header `raw_score,mos`.
        #[arg(long)]
        scores: PathBuf,
        #[command(flatten)]
        bounds: BoundArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve a built-in scorer over the oracle line protocol.
    ServeOracle(ServeArgs),
}

#[derive(Args, Clone, Copy)]
struct BoundArgs {
    #[arg(long, default_value_t = 0.0)]
    beta1: f64,
    #[arg(long, default_value_t = 10.0)]
    beta2: f64,
}

impl BoundArgs {
    fn bounds<T: Scalar>(self) -> Result<ScoreBounds<T>> {
        Ok(ScoreBounds::new(T::of(self.beta1), T::of(self.beta2))?)
    }
}

#[derive(Args)]
struct AttackArgs {
    /// CSV with header `path,mos`.
    #[arg(long)]
    manifest: PathBuf,
    /// builtin:NAME, cmd:COMMAND or tcp:HOST:PORT.
    #[arg(long)]
    oracle: OracleSpec,
    /// Search iterations per image.
    #[arg(long = "T", default_value_t = 10_000)]
    iterations: usize,
    /// Patches per iteration.
    #[arg(long = "n", default_value_t = 2)]
    patches: usize,
    #[arg(long, default_value = "0.04", value_parser = parse_number)]
    gamma0: f64,
    /// Per-pixel budget in [0, 1] units.
    #[arg(long, default_value = "3/255", value_parser = parse_number)]
    rho: f64,
    #[arg(long, default_value = "bidi")]
    loss: LossKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
    /// Images sampled from the manifest.
    #[arg(long, default_value_t = 50, conflicts_with = "all")]
    k: usize,
    /// Attack every image in the manifest.
    #[arg(long)]
    all: bool,
    /// Start from the clean image instead of a random ±rho perturbation.
    #[arg(long)]
    no_init: bool,
    #[arg(long, default_value = "per-location")]
    patch_mode: PatchMode,
    #[command(flatten)]
    bounds: BoundArgs,
    /// Seconds to wait for an external oracle's reply.
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
    /// Iterations between curve samples.
    #[arg(long, default_value_t = 100)]
    curve_every: usize,
    /// Logistic mapping JSON; fitted on the clean scores when absent.
    #[arg(long)]
    mapping: Option<PathBuf>,
}

impl AttackArgs {
    fn job(&self) -> Result<AttackJob> {
        let config = Config {
            max_iterations: self.iterations,
            num_patches: self.patches,
            gamma0: self.gamma0,
            rho: self.rho,
            bounds: self.bounds.bounds()?,
            loss: self.loss,
            seed: self.seed,
            init_random: !self.no_init,
            patch_mode: self.patch_mode,
        };
        Ok(AttackJob {
            config,
            jobs: self.jobs,
            sample: if self.all { None } else { Some(self.k) },
            timeout: timeout(self.timeout)?,
            curve_every: self.curve_every,
            mapping: self.mapping.as_deref().map(load_mapping).transpose()?,
            ..AttackJob::new(&self.manifest, self.oracle.clone(), &self.out)
        })
    }
}

#[derive(Args)]
struct TransferArgs {
    /// Output directory of a previous `attack` run.
    #[arg(long)]
    adversarial: PathBuf,
    #[arg(long)]
    oracle: OracleSpec,
    /// Take MOS values from this manifest instead of the records.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    bounds: BoundArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
    #[arg(long)]
    mapping: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    scorer: BuiltinScorer,
    /// Serve on stdin/stdout.
    #[arg(long, conflicts_with = "port", required_unless_present = "port")]
    stdio: bool,
    /// Serve on a TCP port; 0 picks a free one.
    #[arg(long)]
    port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[command(flatten)]
    bounds: BoundArgs,
    /// Arithmetic used by the scorer.
    #[arg(long, value_enum, default_value = "f64")]
    precision: Precision,
}

fn timeout(secs: f64) -> Result<Duration> {
    if !(secs.is_finite() && secs > 0.0) {
        bail!("timeout must be a positive number of seconds");
    }
    Ok(Duration::from_secs_f64(secs))
}

fn fmt_corr(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into())
}

fn print_summary(report: &EvaluationReport) {
    let a = &report.aggregates;
    let c = a.mapped.unwrap_or(a.raw);
    println!(
        "{} images ({} failed): RGO {:.4}  SRCC {} -> {}  PLCC {} -> {}{}",
        a.count,
        report.failures.len(),
        a.rgo,
        fmt_corr(c.srcc_before),
        fmt_corr(c.srcc_after),
        fmt_corr(c.plcc_before),
        fmt_corr(c.plcc_after),
        if a.mapped.is_some() { "  (after logistic mapping)" } else { "" },
    );
    for f in &report.failures {
        eprintln!("failed: {}: {}", f.image.display(), f.error);
    }
}

fn serve<T: Scalar>(args: &ServeArgs) -> Result<()> {
    let oracle: Arc<dyn QualityOracle<T>> = Arc::from(args.scorer.build::<T>(args.bounds.bounds()?));
    match args.port {
        None => {
            serve_stdio(&*oracle)?;
        }
        Some(port) => {
            let listener = TcpListener::bind((args.host.as_str(), port))?;
            let mut out = std::io::stdout();
            writeln!(out, "listening on {}", listener.local_addr()?)?;
            out.flush()?;
            serve_tcp(oracle, listener)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Attack(args) => print_summary(&cmd_attack(&args.job()?)?),
        Command::Transfer(args) => {
            let job = TransferJob {
                manifest: args.manifest.clone(),
                bounds: args.bounds.bounds()?,
                timeout: timeout(args.timeout)?,
                mapping: args.mapping.as_deref().map(load_mapping).transpose()?,
                ..TransferJob::new(&args.adversarial, args.oracle.clone(), &args.out)
            };
            print_summary(&cmd_transfer(&job)?);
        }
        Command::Sweep { attack, param, values } => {
            let spec = SweepSpec {
                param: param.parse::<SweepParam>()?,
                values,
            };
            for row in cmd_sweep(&attack.job()?, &spec)? {
                println!("{}={}: RGO {:.4}", spec.param, row.value, row.aggregates.rgo);
            }
        }
        Command::Calibrate { scores, bounds, out } => {
            let b: Bounds = bounds.bounds()?;
            let m = cmd_calibrate(&scores, b, &out)?;
            println!("a={} b={} c={} d={}", m.a, m.b, m.c, m.d);
        }
        Command::ServeOracle(args) => match args.precision {
            Precision::F32 => serve::<f32>(&args)?,
            Precision::F64 => serve::<f64>(&args)?,
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
