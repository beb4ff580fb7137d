//! The black-box scorer contract, built-in scorers and score calibration.

mod builtin;
mod calibrate;
mod simplex;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::scalar::Scalar;

pub use builtin::{BuiltinScorer, LumaLogistic, MeanBrightness, Sharpness};
pub use calibrate::{calibrate_logistic, LogisticMapping};
pub use simplex::{minimize, SimplexOptions, SimplexResult};

/// Closed range `[beta1, beta2]` of calibrated scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBounds<T>", bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ScoreBounds<T> {
    beta1: T,
    beta2: T,
}

#[derive(Deserialize)]
struct RawBounds<T> {
    beta1: T,
    beta2: T,
}

impl<T: Scalar> TryFrom<RawBounds<T>> for ScoreBounds<T> {
    type Error = Error;

    fn try_from(raw: RawBounds<T>) -> Result<Self> {
        ScoreBounds::new(raw.beta1, raw.beta2)
    }
}

impl<T: Scalar> ScoreBounds<T> {
    pub fn new(beta1: T, beta2: T) -> Result<Self> {
        if !(beta1.is_finite() && beta2.is_finite() && beta1 < beta2) {
            return Err(Error::Argument(format!(
                "score bounds need finite beta1 < beta2, got ({beta1}, {beta2})"
            )));
        }
        Ok(ScoreBounds { beta1, beta2 })
    }

    pub fn beta1(&self) -> T {
        self.beta1
    }

    pub fn beta2(&self) -> T {
        self.beta2
    }

    pub fn midpoint(&self) -> T {
        (self.beta1 + self.beta2) / T::of(2.0)
    }

    pub fn span(&self) -> T {
        self.beta2 - self.beta1
    }

    pub fn clamp(&self, score: T) -> T {
        score.max(self.beta1).min(self.beta2)
    }

    pub fn contains(&self, score: T) -> bool {
        score >= self.beta1 && score <= self.beta2
    }

    /// Largest possible distance from `score` to either bound.
    pub fn max_deviation(&self, score: T) -> T {
        (self.beta2 - score).max(score - self.beta1)
    }
}

impl<T: Scalar> Default for ScoreBounds<T> {
    /// `[0, 10]`.
    fn default() -> Self {
        ScoreBounds {
            beta1: T::zero(),
            beta2: T::of(10.0),
        }
    }
}

/// A scorer that can only be queried.
///
/// `score` must be a pure function of pixel content and every call must
/// increment `queries_used` by one, successful or not.
pub trait QualityOracle<T: Scalar>: Send + Sync {
    fn score(&self, img: &ImageTensor<T>) -> Result<T>;

    fn bounds(&self) -> ScoreBounds<T>;

    fn queries_used(&self) -> u64;
}

impl<T: Scalar, O: QualityOracle<T> + ?Sized> QualityOracle<T> for &O {
    fn score(&self, img: &ImageTensor<T>) -> Result<T> {
        (**self).score(img)
    }

    fn bounds(&self) -> ScoreBounds<T> {
        (**self).bounds()
    }

    fn queries_used(&self) -> u64 {
        (**self).queries_used()
    }
}

impl<T: Scalar, O: QualityOracle<T> + ?Sized> QualityOracle<T> for Box<O> {
    fn score(&self, img: &ImageTensor<T>) -> Result<T> {
        (**self).score(img)
    }

    fn bounds(&self) -> ScoreBounds<T> {
        (**self).bounds()
    }

    fn queries_used(&self) -> u64 {
        (**self).queries_used()
    }
}

impl<T: Scalar, O: QualityOracle<T> + ?Sized> QualityOracle<T> for Arc<O> {
    fn score(&self, img: &ImageTensor<T>) -> Result<T> {
        (**self).score(img)
    }

    fn bounds(&self) -> ScoreBounds<T> {
        (**self).bounds()
    }

    fn queries_used(&self) -> u64 {
        (**self).queries_used()
    }
}

/// Thread-safe query counter.
#[derive(Debug, Default)]
pub struct QueryCounter(AtomicU64);

impl QueryCounter {
    pub fn tick(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// Delegates to an inner oracle and counts calls made through this wrapper.
#[derive(Debug)]
pub struct CountingOracle<O> {
    inner: O,
    calls: QueryCounter,
}

impl<O> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        CountingOracle {
            inner,
            calls: QueryCounter::default(),
        }
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<T: Scalar, O: QualityOracle<T>> QualityOracle<T> for CountingOracle<O> {
    fn score(&self, img: &ImageTensor<T>) -> Result<T> {
        self.calls.tick();
        self.inner.score(img)
    }

    fn bounds(&self) -> ScoreBounds<T> {
        self.inner.bounds()
    }

    fn queries_used(&self) -> u64 {
        self.calls.get()
    }
}

pub fn counting_wrapper<O>(inner: O) -> CountingOracle<O> {
    CountingOracle::new(inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Shape;

    #[test]
    fn bounds_validation() {
        assert!(ScoreBounds::new(1.0, 1.0).is_err());
        assert!(ScoreBounds::new(2.0, 1.0).is_err());
        assert!(ScoreBounds::new(f64::NAN, 1.0).is_err());
        let b = ScoreBounds::new(1.0, 10.0).unwrap();
        assert_eq!(b.midpoint(), 5.5);
        assert_eq!(ScoreBounds::<f64>::default().midpoint(), 5.0);
        assert_eq!(b.clamp(11.0), 10.0);
        assert_eq!(b.max_deviation(8.0), 7.0);
    }

    #[test]
    fn bounds_deserialize_validates() {
        let ok: ScoreBounds<f64> = serde_json::from_str(r#"{"beta1":0,"beta2":10}"#).unwrap();
        assert_eq!(ok, ScoreBounds::default());
        assert!(serde_json::from_str::<ScoreBounds<f64>>(r#"{"beta1":3,"beta2":1}"#).is_err());
    }

    #[test]
    fn counting_wrapper_counts() {
        let oracle = counting_wrapper(MeanBrightness::<f64>::new(ScoreBounds::default()));
        assert_eq!(oracle.queries_used(), 0);
        let img = ImageTensor::filled(Shape::new(2, 2, 1), 0.5).unwrap();
        for _ in 0..3 {
            oracle.score(&img).unwrap();
        }
        assert_eq!(oracle.queries_used(), 3);
        assert_eq!(oracle.inner().queries_used(), 3);
    }

    #[test]
    fn counter_is_safe_under_concurrency() {
        let oracle = Arc::new(MeanBrightness::<f32>::new(ScoreBounds::default()));
        let img = ImageTensor::filled(Shape::new(2, 2, 1), 0.5f32).unwrap();
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    for _ in 0..250 {
                        oracle.score(&img).unwrap();
                    }
                });
            }
        });
        assert_eq!(oracle.queries_used(), 2000);
    }
}
