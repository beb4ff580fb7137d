//! Attack objectives. Lower is better for the attacker in both.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::oracle::ScoreBounds;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    #[default]
    #[serde(rename = "bidi")]
    BiDirectional,
    #[serde(rename = "mse")]
    MseBaseline,
}

impl LossKind {
    pub fn evaluate<T: Scalar>(self, perturbed: T, original: T, bounds: &ScoreBounds<T>) -> T {
        match self {
            LossKind::BiDirectional => bidirectional_loss(perturbed, original, bounds),
            LossKind::MseBaseline => mse_loss(perturbed, original),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::BiDirectional => "bidi",
            LossKind::MseBaseline => "mse",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "bidi" | "bidirectional" => Ok(LossKind::BiDirectional),
            "mse" => Ok(LossKind::MseBaseline),
            other => Err(Error::Argument(format!("unknown loss `{other}`"))),
        }
    }
}

/// Pushes the score toward the extreme opposite the original's side of the
/// midpoint: the perturbed score itself when the original is strictly above
/// the midpoint, its negation otherwise (including exactly at the midpoint).
pub fn bidirectional_loss<T: Scalar>(perturbed: T, original: T, bounds: &ScoreBounds<T>) -> T {
    if original > bounds.midpoint() {
        perturbed
    } else {
        -perturbed
    }
}

/// Negated squared deviation, so maximising deviation is a minimisation.
pub fn mse_loss<T: Scalar>(perturbed: T, original: T) -> T {
    let d = perturbed - original;
    -(d * d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b() -> ScoreBounds<f64> {
        ScoreBounds::new(0.0, 10.0).unwrap()
    }

    #[test]
    fn bidirectional_examples() {
        assert_eq!(bidirectional_loss(0.25, 8.52, &b()), 0.25);
        assert_eq!(bidirectional_loss(9.72, 3.44, &b()), -9.72);
        // midpoint falls in the second branch
        assert_eq!(bidirectional_loss(7.0, 5.0, &b()), -7.0);
        assert_eq!(bidirectional_loss(7.0, 5.000001, &b()), 7.0);
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(3.0, 3.0), 0.0);
        assert_eq!(mse_loss(2.0, 5.0), -9.0);
        assert_eq!(mse_loss(5.0, 2.0), mse_loss(2.0, 5.0));
    }

    #[test]
    fn kind_parses() {
        assert_eq!("bidi".parse::<LossKind>().unwrap(), LossKind::BiDirectional);
        assert_eq!("mse".parse::<LossKind>().unwrap(), LossKind::MseBaseline);
        assert!("l2".parse::<LossKind>().is_err());
        assert_eq!(serde_json::to_string(&LossKind::MseBaseline).unwrap(), "\"mse\"");
    }

    // The loss minimiser over a fine grid of perturbed scores sits at the far
    // bound, i.e. its deviation equals the RGO denominator.
    #[test]
    fn optimum_matches_max_deviation() {
        let bounds = b();
        let grid: Vec<f64> = (0..=10_000).map(|i| i as f64 / 1000.0).collect();
        for original in [0.3, 1.0, 4.99, 5.01, 7.5, 9.9] {
            let best = grid
                .iter()
                .copied()
                .min_by(|x, y| {
                    bidirectional_loss(*x, original, &bounds)
                        .partial_cmp(&bidirectional_loss(*y, original, &bounds))
                        .unwrap()
                })
                .unwrap();
            let dev = (best - original).abs();
            assert!((dev - bounds.max_deviation(original)).abs() < 1e-12, "{original}");
        }
    }

    proptest! {
        #[test]
        fn branch_monotonicity(original in 0.0f64..=10.0, s1 in 0.0f64..=10.0, s2 in 0.0f64..=10.0) {
            prop_assume!(s1 < s2);
            let (l1, l2) = (bidirectional_loss(s1, original, &b()), bidirectional_loss(s2, original, &b()));
            if original > 5.0 {
                prop_assert!(l1 < l2);
            } else {
                prop_assert!(l1 > l2);
            }
        }

        #[test]
        fn mse_nonpositive(a in -20.0f64..20.0, c in -20.0f64..20.0) {
            let l = mse_loss(a, c);
            prop_assert!(l <= 0.0);
            prop_assert_eq!(l == 0.0, a == c);
        }
    }
}
