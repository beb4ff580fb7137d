//! Deterministic in-process scorers used as verification surrogates.
//!
//! None of these model human perception. They exist so attack behavior can
//! be checked against closed-form answers.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::oracle::{QualityOracle, QueryCounter, ScoreBounds};
use crate::scalar::Scalar;

/// Logistic gain applied to the mean absolute Laplacian.
pub const SHARPNESS_GAIN: f64 = 100.0;
/// Mean absolute Laplacian that maps to the midpoint score.
pub const SHARPNESS_CENTER: f64 = 0.03;
/// Logistic gain applied to `mean luma − 0.5`.
pub const LUMA_GAIN: f64 = 6.0;

/// `β₁ + (β₂ − β₁) · mean(pixels)`.
#[derive(Debug)]
pub struct MeanBrightness<T> {
    bounds: ScoreBounds<T>,
    queries: QueryCounter,
}

impl<T: Scalar> MeanBrightness<T> {
    pub fn new(bounds: ScoreBounds<T>) -> Self {
        MeanBrightness {
            bounds,
            queries: QueryCounter::default(),
        }
    }

    /// Score without touching the query counter.
    pub fn evaluate(&self, img: &ImageTensor<T>) -> T {
        let b = &self.bounds;
        b.clamp(b.beta1() + b.span() * img.mean())
    }
}

impl<T: Scalar> QualityOracle<T> for MeanBrightness<T> {
    fn score(&self, img: &ImageTensor<T>) -> Result<T> {
        self.queries.tick();
        Ok(self.evaluate(img))
    }

    fn bounds(&self) -> ScoreBounds<T> {
        self.bounds
    }

    fn queries_used(&self) -> u64 {
        self.queries.get()
    }
}

/// Mean absolute 4-neighbour Laplacian of luma over interior pixels,
/// squashed by `σ(SHARPNESS_GAIN · (m − SHARPNESS_CENTER))` onto the bounds.
#[derive(Debug)]
pub struct Sharpness<T> {
    bounds: ScoreBounds<T>,
    queries: QueryCounter,
}

impl<T: Scalar> Sharpness<T> {
    pub fn new(bounds: ScoreBounds<T>) -> Self {
        Sharpness {
            bounds,
            queries: QueryCounter::default(),
        }
    }

    /// Mean absolute Laplacian response; needs at least 3×3 pixels.
    pub fn laplacian_energy(img: &ImageTensor<T>) -> Result<T> {
        let (h, w) = (img.height(), img.width());
        if h < 3 || w < 3 {
            return Err(Error::Dimension {
                shape: img.shape(),
                reason: "sharpness needs at least 3x3 pixels",
            });
        }
        let luma = luma_plane(img);
        let at = |r: usize, c: usize| luma[r * w + c];
        let four = T::of(4.0);
        let mut total = T::zero();
        for r in 1..h - 1 {
            for c in 1..w - 1 {
                let lap = four * at(r, c) - at(r - 1, c) - at(r + 1, c) - at(r, c - 1) - at(r, c + 1);
                total = total + lap.abs();
            }
        }
        Ok(total / T::of(((h - 2) * (w - 2)) as f64))
    }

    pub fn evaluate(&self, img: &ImageTensor<T>) -> Result<T> {
        let energy = Self::laplacian_energy(img)?;
        let z = T::of(SHARPNESS_GAIN) * (energy - T::of(SHARPNESS_CENTER));
        Ok(squash(&self.bounds, z))
    }
}

impl<T: Scalar> QualityOracle<T> for Sharpness<T> {
    fn score(&self, img: &ImageTensor<T>) -> Result<T> {
        self.queries.tick();
        self.evaluate(img)
    }

    fn bounds(&self) -> ScoreBounds<T> {
        self.bounds
    }

    fn queries_used(&self) -> u64 {
        self.queries.get()
    }
}

/// `σ(LUMA_GAIN · (mean luma − 0.5))` onto the bounds. Strictly increasing
/// in every pixel, but not linear.
#[derive(Debug)]
pub struct LumaLogistic<T> {
    bounds: ScoreBounds<T>,
    queries: QueryCounter,
}

impl<T: Scalar> LumaLogistic<T> {
    pub fn new(bounds: ScoreBounds<T>) -> Self {
        LumaLogistic {
            bounds,
            queries: QueryCounter::default(),
        }
    }

    pub fn evaluate(&self, img: &ImageTensor<T>) -> T {
        let luma = luma_plane(img);
        let mean = luma.iter().fold(T::zero(), |acc, v| acc + *v) / T::of(luma.len() as f64);
        squash(&self.bounds, T::of(LUMA_GAIN) * (mean - T::of(0.5)))
    }
}

impl<T: Scalar> QualityOracle<T> for LumaLogistic<T> {
    fn score(&self, img: &ImageTensor<T>) -> Result<T> {
        self.queries.tick();
        Ok(self.evaluate(img))
    }

    fn bounds(&self) -> ScoreBounds<T> {
        self.bounds
    }

    fn queries_used(&self) -> u64 {
        self.queries.get()
    }
}

fn squash<T: Scalar>(bounds: &ScoreBounds<T>, z: T) -> T {
    let sigmoid = T::one() / (T::one() + (-z).exp());
    bounds.clamp(bounds.beta1() + bounds.span() * sigmoid)
}

/// Rec. 601 luma for RGB, the channel itself for grayscale, channel mean otherwise.
fn luma_plane<T: Scalar>(img: &ImageTensor<T>) -> Vec<T> {
    let c = img.channels();
    let weights: Vec<T> = match c {
        1 => vec![T::one()],
        3 => vec![T::of(0.299), T::of(0.587), T::of(0.114)],
        _ => vec![T::one() / T::of(c as f64); c],
    };
    img.data()
        .chunks_exact(c)
        .map(|px| {
            px.iter()
                .zip(&weights)
                .fold(T::zero(), |acc, (v, w)| acc + *v * *w)
        })
        .collect()
}

/// Names of the built-in scorers, as used on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BuiltinScorer {
    MeanBrightness,
    Sharpness,
    LumaLogistic,
}

impl BuiltinScorer {
    pub const ALL: [BuiltinScorer; 3] = [
        BuiltinScorer::MeanBrightness,
        BuiltinScorer::Sharpness,
        BuiltinScorer::LumaLogistic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinScorer::MeanBrightness => "mean",
            BuiltinScorer::Sharpness => "sharpness",
            BuiltinScorer::LumaLogistic => "luma",
        }
    }

    /// Whether the score is strictly increasing in every pixel.
    pub fn is_monotone(self) -> bool {
        !matches!(self, BuiltinScorer::Sharpness)
    }

    pub fn build<T: Scalar>(self, bounds: ScoreBounds<T>) -> Box<dyn QualityOracle<T>> {
        match self {
            BuiltinScorer::MeanBrightness => Box::new(MeanBrightness::new(bounds)),
            BuiltinScorer::Sharpness => Box::new(Sharpness::new(bounds)),
            BuiltinScorer::LumaLogistic => Box::new(LumaLogistic::new(bounds)),
        }
    }
}

impl fmt::Display for BuiltinScorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinScorer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" | "mean-brightness" => Ok(BuiltinScorer::MeanBrightness),
            "sharpness" => Ok(BuiltinScorer::Sharpness),
            "luma" | "luma-logistic" => Ok(BuiltinScorer::LumaLogistic),
            other => Err(Error::Argument(format!("unknown built-in scorer `{other}`"))),
        }
    }
}
