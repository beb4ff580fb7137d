//! Box-constrained Nelder–Mead.
//!
//! Points proposed outside the box are projected onto it before evaluation.
//! After convergence the simplex is rebuilt around the incumbent and the
//! search restarts until a restart fails to improve or the budget runs out.

use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct SimplexOptions<T> {
    /// Initial step along each coordinate.
    pub steps: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub max_evaluations: usize,
    /// Stop when the spread of objective values across the simplex drops below this.
    pub tolerance: T,
}

#[derive(Clone, Debug)]
pub struct SimplexResult<T> {
    pub point: Vec<T>,
    pub value: T,
    pub evaluations: usize,
    pub converged: bool,
}

pub fn minimize<T: Scalar>(
    mut objective: impl FnMut(&[T]) -> T,
    start: &[T],
    opts: &SimplexOptions<T>,
) -> SimplexResult<T> {
    let dim = start.len();
    assert!(dim > 0);
    assert_eq!(opts.steps.len(), dim);
    assert_eq!(opts.lower.len(), dim);
    assert_eq!(opts.upper.len(), dim);

    let project = |p: &mut Vec<T>| {
        for ((v, lo), hi) in p.iter_mut().zip(&opts.lower).zip(&opts.upper) {
            *v = v.max(*lo).min(*hi);
        }
    };
    let mut evals = 0usize;
    let mut eval = |p: &[T], evals: &mut usize| {
        *evals += 1;
        let v = objective(p);
        if v.is_nan() {
            T::infinity()
        } else {
            v
        }
    };

    let (one, two, half) = (T::one(), T::of(2.0), T::of(0.5));
    let mut best = start.to_vec();
    project(&mut best);
    let mut best_value = eval(&best, &mut evals);
    let mut converged = false;

    loop {
        // rebuild simplex around incumbent
        let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(dim + 1);
        simplex.push((best.clone(), best_value));
        for i in 0..dim {
            let mut p = best.clone();
            p[i] = p[i] + opts.steps[i];
            if p[i] > opts.upper[i] {
                p[i] = best[i] - opts.steps[i];
            }
            project(&mut p);
            let v = eval(&p, &mut evals);
            simplex.push((p, v));
        }

        let round_start = best_value;
        let mut round_converged = false;
        while evals + dim + 2 <= opts.max_evaluations {
            simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            let spread = simplex[dim].1 - simplex[0].1;
            if spread.abs() < opts.tolerance {
                round_converged = true;
                break;
            }

            let centroid: Vec<T> = (0..dim)
                .map(|j| {
                    simplex[..dim].iter().fold(T::zero(), |acc, (p, _)| acc + p[j])
                        / T::of(dim as f64)
                })
                .collect();
            let along = |coef: T| {
                let mut p: Vec<T> = centroid
                    .iter()
                    .zip(&simplex[dim].0)
                    .map(|(c, w)| *c + coef * (*c - *w))
                    .collect();
                project(&mut p);
                p
            };

            let reflected = along(one);
            let fr = eval(&reflected, &mut evals);
            if fr < simplex[0].1 {
                let expanded = along(two);
                let fe = eval(&expanded, &mut evals);
                simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            } else if fr < simplex[dim - 1].1 {
                simplex[dim] = (reflected, fr);
            } else {
                let contracted = if fr < simplex[dim].1 {
                    along(half)
                } else {
                    along(-half)
                };
                let fc = eval(&contracted, &mut evals);
                if fc < simplex[dim].1.min(fr) {
                    simplex[dim] = (contracted, fc);
                } else {
                    let anchor = simplex[0].0.clone();
                    for entry in simplex.iter_mut().skip(1) {
                        let mut p: Vec<T> = anchor
                            .iter()
                            .zip(&entry.0)
                            .map(|(a, q)| *a + half * (*q - *a))
                            .collect();
                        project(&mut p);
                        let v = eval(&p, &mut evals);
                        *entry = (p, v);
                    }
                }
            }
        }

        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        if simplex[0].1 < best_value {
            best = simplex[0].0.clone();
            best_value = simplex[0].1;
        }
        if !round_converged || evals + dim > opts.max_evaluations {
            break;
        }
        if !(round_start - best_value > opts.tolerance) {
            converged = true;
            break;
        }
    }

    SimplexResult {
        point: best,
        value: best_value,
        evaluations: evals,
        converged,
    }
}
