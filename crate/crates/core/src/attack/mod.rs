//! Random-search adversarial example generation.
//!
//! The search keeps one incumbent perturbed image. Each iteration writes a
//! few random `±ρ` square patches into the incumbent's delta, queries the
//! oracle once, and keeps the candidate only if it strictly lowers the loss.

mod perturb;
mod rng;
mod schedule;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::loss::LossKind;
use crate::oracle::{QualityOracle, ScoreBounds};
use crate::scalar::Scalar;

pub use perturb::{init_perturbation, perturb};
pub use rng::{stream_rng, AttackRng};
pub use schedule::{decay_schedule, square_size, GammaSchedule, BASE_MILESTONES};

/// How patch values are laid out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatchMode {
    /// An independent sign per spatial location, repeated across channels.
    #[default]
    #[serde(rename = "per-location")]
    PerLocation,
    /// One sign per channel shared by the whole patch.
    #[serde(rename = "constant-per-channel")]
    ConstantPerChannel,
}

impl fmt::Display for PatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatchMode::PerLocation => "per-location",
            PatchMode::ConstantPerChannel => "constant-per-channel",
        })
    }
}

impl FromStr for PatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-location" => Ok(PatchMode::PerLocation),
            "constant-per-channel" => Ok(PatchMode::ConstantPerChannel),
            other => Err(Error::Argument(format!("unknown patch mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct AttackConfig<T> {
    /// Number of search iterations `T`, one query each.
    pub max_iterations: usize,
    /// Patches written per iteration.
    pub num_patches: usize,
    /// Initial patch area as a fraction of the image area.
    pub gamma0: T,
    /// ℓ∞ budget in pixel units.
    pub rho: T,
    pub bounds: ScoreBounds<T>,
    pub loss: LossKind,
    pub seed: u64,
    /// Start from a random `±ρ` perturbation instead of the clean image.
    pub init_random: bool,
    #[serde(default)]
    pub patch_mode: PatchMode,
}

impl<T: Scalar> Default for AttackConfig<T> {
    /// T = 10000, n = 2, γ₀ = 0.04, ρ = 3/255.
    fn default() -> Self {
        AttackConfig {
            max_iterations: 10_000,
            num_patches: 2,
            gamma0: T::of(0.04),
            rho: T::of(3.0 / 255.0),
            bounds: ScoreBounds::default(),
            loss: LossKind::BiDirectional,
            seed: 0,
            init_random: true,
            patch_mode: PatchMode::PerLocation,
        }
    }
}

impl<T: Scalar> AttackConfig<T> {
    /// n = 8, γ₀ = 0.09; the setting used for the LIQE victim.
    pub fn liqe() -> Self {
        AttackConfig {
            num_patches: 8,
            gamma0: T::of(0.09),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_patches == 0 {
            return Err(Error::Argument("num_patches must be at least 1".into()));
        }
        if !(self.gamma0 > T::zero() && self.gamma0 <= T::one()) {
            return Err(Error::Argument(format!(
                "gamma0 must lie in (0, 1], got {}",
                self.gamma0
            )));
        }
        if !(self.rho > T::zero() && self.rho < T::one()) {
            return Err(Error::Argument(format!(
                "rho must lie in (0, 1), got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// One oracle query of the search. Iteration 0 is the initial perturbation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry<T> {
    pub iteration: usize,
    pub loss: T,
    pub score: T,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackResult<T> {
    pub adversarial: ImageTensor<T>,
    /// Score of the clean image; the loss branch is fixed by it.
    pub original_score: T,
    /// Score of `adversarial`.
    pub final_score: T,
    pub loss_trace: Vec<TraceEntry<T>>,
    /// Queries spent by the search itself: `1 + T` for a complete run.
    pub queries: u64,
    /// Queries spent scoring the clean image (0 when the caller supplied it).
    pub anchor_queries: u64,
    pub linf: T,
    /// Set when the oracle failed mid-run; the trace stops at the failure.
    pub aborted: Option<String>,
}

impl<T: Scalar> AttackResult<T> {
    pub fn is_aborted(&self) -> bool {
        self.aborted.is_some()
    }

    pub fn accepted_count(&self) -> usize {
        self.loss_trace.iter().filter(|e| e.accepted).count()
    }

    /// Incumbent score after each trace entry.
    pub fn incumbent_scores(&self) -> Vec<T> {
        let mut current = self.original_score;
        self.loss_trace
            .iter()
            .map(|e| {
                if e.accepted {
                    current = e.score;
                }
                current
            })
            .collect()
    }
}

/// Runs one attack with stream 0 of the configured seed, spending one extra
/// query on the clean image.
pub fn run_attack<T: Scalar, O: QualityOracle<T> + ?Sized>(
    x: &ImageTensor<T>,
    oracle: &O,
    config: &AttackConfig<T>,
) -> Result<AttackResult<T>> {
    Attack::new(config).run(x, oracle)
}

/// Attack builder for callers that need a specific RNG stream, a known clean
/// score, or to observe every candidate.
#[derive(Clone, Debug)]
pub struct Attack<'c, T> {
    config: &'c AttackConfig<T>,
    stream: u64,
    original_score: Option<T>,
}

impl<'c, T: Scalar> Attack<'c, T> {
    pub fn new(config: &'c AttackConfig<T>) -> Self {
        Attack {
            config,
            stream: 0,
            original_score: None,
        }
    }

    pub fn stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn original_score(mut self, score: T) -> Self {
        self.original_score = Some(score);
        self
    }

    pub fn run<O: QualityOracle<T> + ?Sized>(
        &self,
        x: &ImageTensor<T>,
        oracle: &O,
    ) -> Result<AttackResult<T>> {
        self.run_observed(x, oracle, |_, _| {})
    }

    /// Like [`Attack::run`], calling `observe(t, candidate)` before every query.
    ///
    /// Errors are returned only for invalid input or when the clean image
    /// cannot be scored; later oracle failures produce an aborted result.
    pub fn run_observed<O: QualityOracle<T> + ?Sized>(
        &self,
        x: &ImageTensor<T>,
        oracle: &O,
        mut observe: impl FnMut(usize, &ImageTensor<T>),
    ) -> Result<AttackResult<T>> {
        let config = self.config;
        config.validate()?;
        if oracle.bounds() != config.bounds {
            return Err(Error::Argument(format!(
                "oracle bounds {:?} differ from attack bounds {:?}",
                oracle.bounds(),
                config.bounds
            )));
        }
        if !x.is_normalized() {
            return Err(Error::InvalidImage("attack input outside [0, 1]".into()));
        }

        let (original, anchor_queries) = match self.original_score {
            Some(s) => (s, 0),
            None => (checked_score(oracle, x)?, 1),
        };
        let bounds = config.bounds;
        let loss = |score: T| config.loss.evaluate(score, original, &bounds);

        let mut rng = stream_rng(config.seed, self.stream);
        let schedule = GammaSchedule::new(config.gamma0, config.max_iterations);
        let mut trace = Vec::with_capacity(config.max_iterations + 1);
        let mut queries = 0u64;

        let finish = |adversarial: ImageTensor<T>,
                      final_score: T,
                      trace: Vec<TraceEntry<T>>,
                      queries: u64,
                      aborted: Option<String>| {
            let linf = adversarial.linf_distance(x).expect("same shape");
            AttackResult {
                adversarial,
                original_score: original,
                final_score,
                loss_trace: trace,
                queries,
                anchor_queries,
                linf,
                aborted,
            }
        };

        let mut best = init_perturbation(x, config.rho, config.init_random, &mut rng);
        observe(0, &best);
        queries += 1;
        let mut best_score = match checked_score(oracle, &best) {
            Ok(s) => s,
            Err(e) => return Ok(finish(x.clone(), original, trace, queries, Some(e.to_string()))),
        };
        let mut best_loss = loss(best_score);
        trace.push(TraceEntry {
            iteration: 0,
            loss: best_loss,
            score: best_score,
            accepted: true,
        });

        for t in 1..=config.max_iterations {
            let candidate =
                perturb::perturb_with_gamma(x, &best, schedule.gamma_at(t), config, &mut rng)?;
            observe(t, &candidate);
            queries += 1;
            let score = match checked_score(oracle, &candidate) {
                Ok(s) => s,
                Err(e) => {
                    return Ok(finish(best, best_score, trace, queries, Some(e.to_string())))
                }
            };
            let current = loss(score);
            let accepted = current < best_loss;
            if accepted {
                best = candidate;
                best_loss = current;
                best_score = score;
            }
            trace.push(TraceEntry {
                iteration: t,
                loss: current,
                score,
                accepted,
            });
        }

        Ok(finish(best, best_score, trace, queries, None))
    }
}

fn checked_score<T: Scalar, O: QualityOracle<T> + ?Sized>(
    oracle: &O,
    img: &ImageTensor<T>,
) -> Result<T> {
    let s = oracle.score(img)?;
    if !s.is_finite() {
        return Err(Error::Protocol(format!("oracle returned non-finite score {s}")));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Shape;
    use crate::oracle::{counting_wrapper, MeanBrightness, Sharpness};
    use std::sync::atomic::{AtomicU64, Ordering};

    fn image(mean: f64) -> ImageTensor<f64> {
        ImageTensor::from_fn(Shape::new(16, 16, 3), |r, c, ch| {
            let wiggle = ((r * 31 + c * 17 + ch * 7) % 11) as f64 / 255.0;
            (mean + wiggle - 5.0 / 255.0).clamp(0.0, 1.0)
        })
        .unwrap()
    }

    fn cfg(t: usize) -> AttackConfig<f64> {
        AttackConfig {
            max_iterations: t,
            seed: 5,
            ..AttackConfig::default()
        }
    }

    #[test]
    fn zero_iterations_returns_initialization() {
        let x = image(0.7);
        let oracle = counting_wrapper(MeanBrightness::new(ScoreBounds::default()));
        let config = cfg(0);
        let r = run_attack(&x, &oracle, &config).unwrap();
        let expected = init_perturbation(&x, config.rho, true, &mut stream_rng(5, 0));
        assert_eq!(r.adversarial, expected);
        assert_eq!(r.queries, 1);
        assert_eq!(r.anchor_queries, 1);
        assert_eq!(oracle.queries_used(), 2);
        assert_eq!(r.loss_trace.len(), 1);
    }

    #[test]
    fn query_accounting() {
        let x = image(0.3);
        for t in [1, 7, 100] {
            let oracle = counting_wrapper(MeanBrightness::new(ScoreBounds::default()));
            let r = Attack::new(&cfg(t)).original_score(3.0).run(&x, &oracle).unwrap();
            assert_eq!(r.queries, 1 + t as u64);
            assert_eq!(r.anchor_queries, 0);
            assert_eq!(oracle.queries_used(), 1 + t as u64);
        }
    }

    #[test]
    fn accepted_losses_strictly_decrease() {
        let x = image(0.6);
        let oracle = Sharpness::new(ScoreBounds::default());
        let r = run_attack(&x, &oracle, &cfg(300)).unwrap();
        let accepted: Vec<f64> = r.loss_trace.iter().filter(|e| e.accepted).map(|e| e.loss).collect();
        assert!(accepted.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(r.final_score, *r.incumbent_scores().last().unwrap());
        assert_eq!(r.final_score, oracle.evaluate(&r.adversarial).unwrap());
    }

    #[test]
    fn deterministic() {
        let x = image(0.55);
        let oracle = Sharpness::new(ScoreBounds::default());
        let a = run_attack(&x, &oracle, &cfg(200)).unwrap();
        let b = run_attack(&x, &oracle, &cfg(200)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn steers_away_from_original_side() {
        let oracle = MeanBrightness::new(ScoreBounds::default());
        let high = run_attack(&image(0.8), &oracle, &cfg(200)).unwrap();
        assert!(high.final_score < high.original_score);
        let low = run_attack(&image(0.2), &oracle, &cfg(200)).unwrap();
        assert!(low.final_score > low.original_score);
    }

    #[test]
    fn rejects_bound_mismatch_and_bad_config() {
        let x = image(0.5);
        let oracle = MeanBrightness::new(ScoreBounds::new(1.0, 10.0).unwrap());
        assert!(matches!(run_attack(&x, &oracle, &cfg(5)), Err(Error::Argument(_))));
        let oracle = MeanBrightness::new(ScoreBounds::default());
        let bad = AttackConfig {
            rho: 0.0,
            ..cfg(5)
        };
        assert!(run_attack(&x, &oracle, &bad).is_err());
        let bad = AttackConfig {
            num_patches: 0,
            ..cfg(5)
        };
        assert!(run_attack(&x, &oracle, &bad).is_err());
    }

    struct Flaky {
        inner: MeanBrightness<f64>,
        fail_after: u64,
        calls: AtomicU64,
    }

    impl QualityOracle<f64> for Flaky {
        fn score(&self, img: &ImageTensor<f64>) -> Result<f64> {
            if self.calls.fetch_add(1, Ordering::SeqCst) >= self.fail_after {
                return Err(Error::Transport("connection reset".into()));
            }
            self.inner.score(img)
        }

        fn bounds(&self) -> ScoreBounds<f64> {
            self.inner.bounds()
        }

        fn queries_used(&self) -> u64 {
            self.calls.load(Ordering::SeqCst)
        }
    }

    #[test]
    fn oracle_failure_aborts_with_partial_trace() {
        let x = image(0.7);
        let oracle = Flaky {
            inner: MeanBrightness::new(ScoreBounds::default()),
            fail_after: 11,
            calls: AtomicU64::new(0),
        };
        let r = run_attack(&x, &oracle, &cfg(100)).unwrap();
        assert!(r.is_aborted());
        assert!(r.aborted.as_ref().unwrap().contains("connection reset"));
        // anchor + init + 9 iterations succeeded, the 10th failed
        assert_eq!(r.loss_trace.len(), 10);
        assert_eq!(r.queries, 11);
        assert!(r.linf <= 3.0 / 255.0 + 1e-12);

        let dead = Flaky {
            inner: MeanBrightness::new(ScoreBounds::default()),
            fail_after: 0,
            calls: AtomicU64::new(0),
        };
        assert!(run_attack(&x, &dead, &cfg(10)).is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let c = AttackConfig::<f64>::liqe();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"patch_mode\":\"per-location\""));
        assert_eq!(serde_json::from_str::<AttackConfig<f64>>(&s).unwrap(), c);
    }
}
