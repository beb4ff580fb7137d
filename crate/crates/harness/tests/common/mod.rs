//! Synthetic 8-bit datasets for harness tests.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use iqa_attack::{save_image, Image, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smooth gradient between two random levels plus a random `±amplitude`
/// texture (in 8-bit levels).
pub fn textured(shape: Shape, seed: u64, amplitude: u8) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = rng.random_range(40.0..120.0);
    let hi = rng.random_range(130.0..215.0);
    let horizontal = rng.random::<bool>();
    let tint: Vec<f64> = (0..shape.channels).map(|_| rng.random_range(-15.0..15.0)).collect();
    let a = f64::from(amplitude);
    let mut texture = vec![0.0; shape.height * shape.width];
    for t in texture.iter_mut() {
        *t = if amplitude == 0 { 0.0 } else { rng.random_range(-a..=a).round() };
    }
    Image::from_fn(shape, |r, c, ch| {
        let along = if horizontal { c as f64 / shape.width as f64 } else { r as f64 / shape.height as f64 };
        let level = (lo + (hi - lo) * along + tint[ch]).round() + texture[r * shape.width + c];
        level.clamp(0.0, 255.0) / 255.0
    })
    .unwrap()
}

/// Uniform random levels in `[lo, hi]`.
pub fn uniform(shape: Shape, seed: u64, lo: u8, hi: u8) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..shape.len())
        .map(|_| f64::from(rng.random_range(lo..=hi)) / 255.0)
        .collect();
    Image::new(shape, data).unwrap()
}

/// Writes each image as `img_<i>.png` and a `manifest.csv` next to them.
/// MOS is ten times the mean intensity, perturbed deterministically.
pub fn write_dataset(dir: &Path, images: &[Image]) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let mut csv = String::from("path,mos\n");
    for (i, img) in images.iter().enumerate() {
        let name = format!("img_{i:03}.png");
        save_image(img, dir.join(&name), false).unwrap();
        let mos = (10.0 * img.mean() + 0.3 * ((i * 7 % 5) as f64 - 2.0)).clamp(0.0, 10.0);
        csv.push_str(&format!("{name},{mos}\n"));
    }
    let manifest = dir.join("manifest.csv");
    fs::write(&manifest, csv).unwrap();
    manifest
}

/// Gradients with texture amplitudes cycling through 0..=9 levels, so that
/// sharpness scores fall on both sides of the midpoint.
pub fn mixed_images(count: usize, side: usize) -> Vec<Image> {
    (0..count)
        .map(|i| textured(Shape::new(side, side, 3), 1000 + i as u64, (i % 10) as u8))
        .collect()
}
