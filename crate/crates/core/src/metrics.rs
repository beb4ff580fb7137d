//! Attack and model-fidelity metrics: RGO, SRCC and PLCC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::ScoreBounds;
use crate::scalar::Scalar;

/// Scores of one image before and after attack, plus its MOS when known.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScorePair<T> {
    pub original: T,
    pub adversarial: T,
    pub mos: Option<T>,
}

impl<T: Scalar> ScorePair<T> {
    pub fn new(original: T, adversarial: T) -> Self {
        ScorePair {
            original,
            adversarial,
            mos: None,
        }
    }

    pub fn with_mos(mut self, mos: T) -> Self {
        self.mos = Some(mos);
        self
    }

    /// Achieved change over the largest achievable change for this image.
    pub fn gain_ratio(&self, bounds: &ScoreBounds<T>) -> T {
        (self.adversarial - self.original).abs() / bounds.max_deviation(self.original)
    }
}

/// Mean of per-image gain ratios.
pub fn rgo<T: Scalar>(pairs: &[ScorePair<T>], bounds: &ScoreBounds<T>) -> Result<T> {
    if pairs.is_empty() {
        return Err(Error::Argument("RGO needs at least one score pair".into()));
    }
    let total = pairs
        .iter()
        .fold(T::zero(), |acc, p| acc + p.gain_ratio(bounds));
    Ok(total / T::of(pairs.len() as f64))
}

/// Spearman correlation: Pearson correlation of average ranks.
pub fn srcc<T: Scalar>(predictions: &[T], mos: &[T]) -> Result<T> {
    check_pairs(predictions, mos)?;
    plcc(&average_ranks(predictions), &average_ranks(mos))
}

/// Pearson product-moment correlation.
pub fn plcc<T: Scalar>(predictions: &[T], mos: &[T]) -> Result<T> {
    check_pairs(predictions, mos)?;
    let n = T::of(predictions.len() as f64);
    let mean_x = predictions.iter().fold(T::zero(), |a, v| a + *v) / n;
    let mean_y = mos.iter().fold(T::zero(), |a, v| a + *v) / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (x, y) in predictions.iter().zip(mos) {
        let (dx, dy) = (*x - mean_x, *y - mean_y);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx == T::zero() {
        return Err(Error::DegenerateCorrelation("predictions have zero variance"));
    }
    if syy == T::zero() {
        return Err(Error::DegenerateCorrelation("targets have zero variance"));
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.max(-T::one()).min(T::one()))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![T::zero(); values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j
        let rank = T::of((i + 1 + j) as f64) / T::of(2.0);
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

fn check_pairs<T: Scalar>(a: &[T], b: &[T]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "correlation inputs differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Argument("correlation needs at least two points".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Argument("correlation inputs must be finite".into()));
    }
    Ok(())
}
