//! Patch-size schedule: `s = ⌊√(γ_t·h·w)⌋` with γ halved at fixed milestones.

use crate::scalar::Scalar;

/// Milestones for a 10 000-iteration run.
pub const BASE_MILESTONES: [usize; 9] = [10, 50, 200, 500, 1000, 2000, 4000, 6000, 8000];
pub const BASE_ITERATIONS: usize = 10_000;

/// Iterations at which γ is halved for a run of `max_iterations`.
///
/// Each base milestone `m` becomes `round(m·T / 10000)` (halves round up);
/// zeros are dropped and duplicates collapsed, preserving order.
pub fn decay_schedule(max_iterations: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(BASE_MILESTONES.len());
    for m in BASE_MILESTONES {
        let scaled = (m * max_iterations + BASE_ITERATIONS / 2) / BASE_ITERATIONS;
        if scaled > 0 && out.last() != Some(&scaled) {
            out.push(scaled);
        }
    }
    out
}

/// Side length of a square patch, clamped to `[1, min(h, w)]`.
pub fn square_size<T: Scalar>(gamma: T, height: usize, width: usize) -> usize {
    let area = gamma.as_f64() * height as f64 * width as f64;
    let side = area.sqrt().floor();
    let max = height.min(width).max(1);
    if side.is_nan() || side < 1.0 {
        1
    } else {
        (side as usize).min(max)
    }
}

/// γ in effect at iteration `t` (1-based): γ₀ halved once per milestone ≤ t.
#[derive(Clone, Debug)]
pub struct GammaSchedule<T> {
    gamma0: T,
    milestones: Vec<usize>,
}

impl<T: Scalar> GammaSchedule<T> {
    pub fn new(gamma0: T, max_iterations: usize) -> Self {
        GammaSchedule {
            gamma0,
            milestones: decay_schedule(max_iterations),
        }
    }

    pub fn milestones(&self) -> &[usize] {
        &self.milestones
    }

    pub fn gamma_at(&self, t: usize) -> T {
        let halvings = self.milestones.iter().filter(|m| **m <= t).count();
        self.gamma0 / T::of(2f64.powi(halvings as i32))
    }
}
