//! Four-parameter logistic mapping from raw scorer outputs to the MOS range.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::simplex::{minimize, SimplexOptions};
use crate::oracle::ScoreBounds;
use crate::scalar::Scalar;

pub const MAX_EVALUATIONS: usize = 2000;
pub const TOLERANCE: f64 = 1e-10;
const MIN_POINTS: usize = 5;

/// `d + (a − d) / (1 + exp(−b · (raw − c)))`, clamped to the bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct LogisticMapping<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    pub bounds: ScoreBounds<T>,
}

impl<T: Scalar> LogisticMapping<T> {
    pub fn curve(&self, raw: T) -> T {
        logistic([self.a, self.b, self.c, self.d], raw)
    }

    pub fn map(&self, raw: T) -> T {
        self.bounds.clamp(self.curve(raw))
    }

    pub fn sum_squared_residuals(&self, raw: &[T], mos: &[T]) -> T {
        raw.iter()
            .zip(mos)
            .map(|(x, y)| {
                let r = self.curve(*x) - *y;
                r * r
            })
            .fold(T::zero(), |acc, v| acc + v)
    }

    /// Strict monotonicity of the unclamped curve.
    pub fn is_strictly_monotone(&self) -> bool {
        self.b != T::zero() && self.a != self.d && self.b.is_finite()
    }
}

fn logistic<T: Scalar>(p: [T; 4], x: T) -> T {
    let [a, b, c, d] = p;
    d + (a - d) / (T::one() + (-(b * (x - c))).exp())
}

/// Least-squares fit of the logistic curve.
///
/// Raw scores are centred on their median and scaled by their range before
/// the search so the box and step sizes are data independent. The starting
/// point is `a = β₂`, `d = β₁`, `c` at the median and `b` carrying the sign
/// of the raw/MOS covariance.
pub fn calibrate_logistic<T: Scalar>(
    raw: &[T],
    mos: &[T],
    bounds: ScoreBounds<T>,
) -> Result<LogisticMapping<T>> {
    if raw.len() != mos.len() {
        return Err(Error::Argument(format!(
            "{} raw scores but {} MOS values",
            raw.len(),
            mos.len()
        )));
    }
    if raw.len() < MIN_POINTS {
        return Err(Error::DegenerateFit(format!(
            "need at least {MIN_POINTS} points, got {}",
            raw.len()
        )));
    }
    if raw.iter().chain(mos).any(|v| !v.is_finite()) {
        return Err(Error::Argument("non-finite calibration value".into()));
    }
    let (lo, hi) = raw
        .iter()
        .fold((raw[0], raw[0]), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let range = hi - lo;
    if !(range > T::zero()) {
        return Err(Error::DegenerateFit("all raw scores are equal".into()));
    }

    let mut sorted = raw.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / T::of(2.0)
    };

    let nf = T::of(n as f64);
    let mean_x = raw.iter().fold(T::zero(), |a, v| a + *v) / nf;
    let mean_y = mos.iter().fold(T::zero(), |a, v| a + *v) / nf;
    let cov = raw
        .iter()
        .zip(mos)
        .fold(T::zero(), |a, (x, y)| a + (*x - mean_x) * (*y - mean_y));
    let sign = if cov < T::zero() { -T::one() } else { T::one() };

    let z: Vec<T> = raw.iter().map(|x| (*x - median) / range).collect();
    let objective = |p: &[T]| {
        z.iter()
            .zip(mos)
            .map(|(x, y)| {
                let r = logistic([p[0], p[1], p[2], p[3]], *x) - *y;
                r * r
            })
            .fold(T::zero(), |acc, v| acc + v)
    };

    let span = bounds.span();
    let ten = T::of(10.0);
    let opts = SimplexOptions {
        steps: vec![span / ten, T::one(), T::of(0.1), span / ten],
        lower: vec![
            bounds.beta1() - ten * span,
            T::of(-500.0),
            -ten,
            bounds.beta1() - ten * span,
        ],
        upper: vec![
            bounds.beta2() + ten * span,
            T::of(500.0),
            ten,
            bounds.beta2() + ten * span,
        ],
        max_evaluations: MAX_EVALUATIONS,
        tolerance: T::of(TOLERANCE),
    };
    let start = [bounds.beta2(), sign * T::of(4.0), T::zero(), bounds.beta1()];
    let fit = minimize(objective, &start, &opts);

    let [a, bz, cz, d] = [fit.point[0], fit.point[1], fit.point[2], fit.point[3]];
    let mapping = LogisticMapping {
        a,
        b: bz / range,
        c: median + cz * range,
        d,
        bounds,
    };
    if !mapping.is_strictly_monotone() {
        return Err(Error::DegenerateFit("fitted curve is flat".into()));
    }
    Ok(mapping)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bounds() -> ScoreBounds<f64> {
        ScoreBounds::new(0.0, 10.0).unwrap()
    }

    #[test]
    fn recovers_synthetic_logistic() {
        let truth = LogisticMapping {
            a: 9.5,
            b: 0.08,
            c: 55.0,
            d: 0.7,
            bounds: bounds(),
        };
        let raw: Vec<f64> = (0..25).map(|i| 5.0 + 4.0 * i as f64).collect();
        let mos: Vec<f64> = raw.iter().map(|x| truth.curve(*x)).collect();
        let fit = calibrate_logistic(&raw, &mos, bounds()).unwrap();
        let ssr = fit.sum_squared_residuals(&raw, &mos);
        assert!(ssr < 1e-6, "ssr {ssr}: {fit:?}");
        assert!((fit.a - truth.a).abs() < 1e-2, "{fit:?}");
        assert!((fit.b - truth.b).abs() < 1e-3, "{fit:?}");
        assert!((fit.c - truth.c).abs() < 1e-1, "{fit:?}");
        assert!((fit.d - truth.d).abs() < 1e-2, "{fit:?}");
    }

    #[test]
    fn decreasing_data() {
        let raw: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
        let mos: Vec<f64> = raw.iter().map(|x| 1.0 + 8.0 / (1.0 + (9.0 * (x - 0.4)).exp())).collect();
        let fit = calibrate_logistic(&raw, &mos, bounds()).unwrap();
        assert!(fit.b < 0.0);
        assert!(fit.sum_squared_residuals(&raw, &mos) < 1e-6);
    }

    #[test]
    fn linear_data_is_approximated() {
        let raw: Vec<f64> = (0..21).map(|i| 1.0 + 0.4 * i as f64).collect();
        let mos = raw.clone();
        let fit = calibrate_logistic(&raw, &mos, bounds()).unwrap();
        let rmse = (raw
            .iter()
            .zip(&mos)
            .map(|(x, y)| (fit.map(*x) - y).powi(2))
            .sum::<f64>()
            / raw.len() as f64)
            .sqrt();
        assert!(rmse < 0.1, "rmse {rmse}");
    }

    #[test]
    fn degenerate_inputs() {
        let b = bounds();
        assert!(matches!(
            calibrate_logistic(&[2.0; 6], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], b),
            Err(Error::DegenerateFit(_))
        ));
        assert!(matches!(
            calibrate_logistic(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 2.0], b),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            calibrate_logistic(&[1.0, 2.0], &[1.0, 2.0], b),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn json_shape() {
        let m = LogisticMapping {
            a: 10.0,
            b: 1.0,
            c: 0.0,
            d: 0.0,
            bounds: bounds(),
        };
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"a":10.0,"b":1.0,"c":0.0,"d":0.0,"bounds":{"beta1":0.0,"beta2":10.0}}"#);
        let back: LogisticMapping<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    proptest! {
        #[test]
        fn mapping_is_clamped(a in -50.0f64..50.0, b in -5.0f64..5.0, c in -3.0f64..3.0,
                              d in -50.0f64..50.0, x in -1e3f64..1e3) {
            let m = LogisticMapping { a, b, c, d, bounds: bounds() };
            let y = m.map(x);
            prop_assert!((0.0..=10.0).contains(&y));
        }
    }
}
