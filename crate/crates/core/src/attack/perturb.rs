use rand::Rng;

use crate::attack::schedule::{square_size, GammaSchedule};
use crate::attack::{AttackConfig, PatchMode};
use crate::error::Result;
use crate::image::{clamp01, ImageTensor, Shape};
use crate::scalar::Scalar;

#[inline]
fn signed<T: Scalar>(rng: &mut impl Rng, rho: T) -> T {
    if rng.random::<bool>() {
        rho
    } else {
        -rho
    }
}

/// Starting point of the search: every element shifted by an independent
/// uniform `±rho`, then clipped. Returns `x` unchanged when `random` is false.
pub fn init_perturbation<T: Scalar>(
    x: &ImageTensor<T>,
    rho: T,
    random: bool,
    rng: &mut impl Rng,
) -> ImageTensor<T> {
    if !random {
        return x.clone();
    }
    let data = x
        .data()
        .iter()
        .map(|v| clamp01(*v + signed(rng, rho)))
        .collect();
    ImageTensor::from_parts_unchecked(x.shape(), data)
}

/// Proposes the candidate for iteration `t` (1-based).
pub fn perturb<T: Scalar>(
    x: &ImageTensor<T>,
    x_opt: &ImageTensor<T>,
    t: usize,
    config: &AttackConfig<T>,
    rng: &mut impl Rng,
) -> Result<ImageTensor<T>> {
    let schedule = GammaSchedule::new(config.gamma0, config.max_iterations);
    perturb_with_gamma(x, x_opt, schedule.gamma_at(t), config, rng)
}

/// Writes `num_patches` random `s × s` sign patches into `x_opt − x` and
/// returns `clip01(x + delta)`.
///
/// Each patch samples its signs first (row-major over the square, or one per
/// channel in [`PatchMode::ConstantPerChannel`]), then its top-left row and
/// column. Later patches overwrite earlier ones.
pub(crate) fn perturb_with_gamma<T: Scalar>(
    x: &ImageTensor<T>,
    x_opt: &ImageTensor<T>,
    gamma: T,
    config: &AttackConfig<T>,
    rng: &mut impl Rng,
) -> Result<ImageTensor<T>> {
    let mut delta = x_opt.delta_from(x)?;
    let shape = x.shape();
    let Shape {
        height: h,
        width: w,
        channels: c,
    } = shape;
    let s = square_size(gamma, h, w);
    let rho = config.rho;

    let mut signs: Vec<T> = Vec::with_capacity(s * s);
    for _ in 0..config.num_patches {
        signs.clear();
        match config.patch_mode {
            PatchMode::PerLocation => signs.extend((0..s * s).map(|_| signed(rng, rho))),
            PatchMode::ConstantPerChannel => signs.extend((0..c).map(|_| signed(rng, rho))),
        }
        let top = rng.random_range(0..=h - s);
        let left = rng.random_range(0..=w - s);

        let buf = delta.data_mut();
        for i in 0..s {
            for j in 0..s {
                let base = shape.index(top + i, left + j, 0);
                for ch in 0..c {
                    buf[base + ch] = match config.patch_mode {
                        PatchMode::PerLocation => signs[i * s + j],
                        PatchMode::ConstantPerChannel => signs[ch],
                    };
                }
            }
        }
    }
    Ok(x.add(&delta)?.clip01())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::stream_rng;

    fn config(n: usize, gamma0: f64) -> AttackConfig<f64> {
        AttackConfig {
            num_patches: n,
            gamma0,
            max_iterations: 100,
            ..AttackConfig::default()
        }
    }

    #[test]
    fn init_identity_when_disabled() {
        let x = ImageTensor::filled(Shape::new(4, 4, 3), 0.3).unwrap();
        let mut rng = stream_rng(1, 0);
        assert_eq!(init_perturbation(&x, 3.0 / 255.0, false, &mut rng), x);
    }

    #[test]
    fn init_two_point_support_and_frequency() {
        let rho = 3.0 / 255.0;
        let x = ImageTensor::filled(Shape::new(64, 64, 1), 0.5).unwrap();
        let mut rng = stream_rng(42, 0);
        let y = init_perturbation(&x, rho, true, &mut rng);
        let up = y.data().iter().filter(|v| **v == 0.5 + rho).count();
        let down = y.data().iter().filter(|v| **v == 0.5 - rho).count();
        assert_eq!(up + down, 64 * 64);
        let freq = up as f64 / (64.0 * 64.0);
        assert!((freq - 0.5).abs() < 0.05, "{freq}");
    }

    #[test]
    fn init_clips_at_zero() {
        let rho = 3.0 / 255.0;
        let x = ImageTensor::filled(Shape::new(8, 8, 3), 0.0).unwrap();
        let y = init_perturbation(&x, rho, true, &mut stream_rng(3, 0));
        assert!(y.data().iter().all(|v| *v == 0.0 || *v == rho));
        assert!(y.data().contains(&rho));
    }

    #[test]
    fn full_cover_patch_replicates_channels() {
        let rho = 3.0 / 255.0;
        let x = ImageTensor::filled(Shape::new(5, 5, 3), 0.5).unwrap();
        let cfg = config(1, 1.0);
        let out = perturb_with_gamma(&x, &x, 1.0, &cfg, &mut stream_rng(9, 0)).unwrap();
        let d = out.delta_from(&x).unwrap();
        for px in d.data().chunks(3) {
            assert!((px[0].abs() - rho).abs() < 1e-15);
            assert_eq!(px[0], px[1]);
            assert_eq!(px[1], px[2]);
        }
        assert!(d.data().iter().any(|v| *v > 0.0) && d.data().iter().any(|v| *v < 0.0));
    }

    #[test]
    fn constant_per_channel_mode() {
        let x = ImageTensor::filled(Shape::new(5, 5, 3), 0.5).unwrap();
        let cfg = AttackConfig {
            patch_mode: PatchMode::ConstantPerChannel,
            ..config(1, 1.0)
        };
        let out = perturb_with_gamma(&x, &x, 1.0, &cfg, &mut stream_rng(9, 0)).unwrap();
        let d = out.delta_from(&x).unwrap();
        for ch in 0..3 {
            let first = d.data()[ch];
            assert!(d.data().iter().skip(ch).step_by(3).all(|v| *v == first));
        }
    }

    #[test]
    fn untouched_region_keeps_incumbent_delta() {
        let rho = 3.0 / 255.0;
        let x = ImageTensor::filled(Shape::new(16, 16, 1), 0.5).unwrap();
        let x_opt = ImageTensor::filled(Shape::new(16, 16, 1), 0.5 - rho).unwrap();
        let cfg = config(1, 0.01);
        let out = perturb_with_gamma(&x, &x_opt, 0.01, &cfg, &mut stream_rng(5, 0)).unwrap();
        // one 1x1 patch (⌊√2.56⌋ = 1) changes at most one element
        let changed = out.data().iter().zip(x_opt.data()).filter(|(a, b)| a != b).count();
        assert!(changed <= 1);
    }

    #[test]
    fn budget_holds_on_small_images() {
        let rho = 3.0 / 255.0;
        for seed in 0..200u64 {
            let mut rng = stream_rng(seed, 0);
            let x = ImageTensor::from_fn(Shape::new(4, 4, 2), |r, c, ch| {
                [0.0, 1.0, 0.5, 1.0 / 255.0][(r + c + ch + seed as usize) % 4]
            })
            .unwrap();
            let mut x_opt = init_perturbation(&x, rho, true, &mut rng);
            for t in 1..=20 {
                let cfg = config(1 + (seed % 3) as usize, 0.5);
                let cand = perturb(&x, &x_opt, t, &cfg, &mut rng).unwrap();
                assert!(cand.is_normalized());
                assert!(cand.linf_distance(&x).unwrap() <= rho + 1e-12);
                x_opt = cand;
            }
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let x = ImageTensor::from_fn(Shape::new(9, 7, 3), |r, c, ch| ((r * 7 + c + ch) % 255) as f64 / 255.0).unwrap();
        let cfg = config(3, 0.2);
        let a = perturb(&x, &x, 4, &cfg, &mut stream_rng(11, 2)).unwrap();
        let b = perturb(&x, &x, 4, &cfg, &mut stream_rng(11, 2)).unwrap();
        assert_eq!(a, b);
    }
}
