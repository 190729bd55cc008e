//! Structural similarity over a uniform sliding window.
//!
//! Window statistics come from summed-area tables, so each window costs
//! O(1) regardless of its size. Multi-channel images are scored per channel
//! and averaged.

use super::TransformError;
use crate::image::Image;

/// 7x7 keeps enough windows on 28x28 inputs.
pub const DEFAULT_SSIM_WINDOW: usize = 7;

const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

pub fn ssim(a: &Image, b: &Image) -> Result<f64, TransformError> {
    ssim_with_window(a, b, DEFAULT_SSIM_WINDOW)
}

/// Mean SSIM over every fully contained `window x window` patch, with
/// dynamic range 1. The window shrinks to fit images smaller than it.
pub fn ssim_with_window(a: &Image, b: &Image, window: usize) -> Result<f64, TransformError> {
    if a.shape() != b.shape() {
        return Err(TransformError::ShapeMismatch(a.shape(), b.shape()));
    }
    let shape = a.shape();
    let win = window.max(1).min(shape.height).min(shape.width);
    let total: f64 = (0..shape.channels)
        .map(|ch| channel_ssim(a, b, ch, win))
        .sum();
    Ok(total / shape.channels as f64)
}

struct Tables {
    width: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    aa: Vec<f64>,
    bb: Vec<f64>,
    ab: Vec<f64>,
}

impl Tables {
    fn build(a: &Image, b: &Image, ch: usize) -> Self {
        let (h, w) = (a.height(), a.width());
        let stride = w + 1;
        let size = (h + 1) * stride;
        let mut t = Tables {
            width: stride,
            a: vec![0.0; size],
            b: vec![0.0; size],
            aa: vec![0.0; size],
            bb: vec![0.0; size],
            ab: vec![0.0; size],
        };
        for y in 0..h {
            for x in 0..w {
                let (va, vb) = (f64::from(a.get(y, x, ch)), f64::from(b.get(y, x, ch)));
                let here = (y + 1) * stride + x + 1;
                let (up, left, diag) = (here - stride, here - 1, here - stride - 1);
                for (table, v) in [
                    (&mut t.a, va),
                    (&mut t.b, vb),
                    (&mut t.aa, va * va),
                    (&mut t.bb, vb * vb),
                    (&mut t.ab, va * vb),
                ] {
                    table[here] = v + table[up] + table[left] - table[diag];
                }
            }
        }
        t
    }

    fn window_sum(&self, table: &[f64], y: usize, x: usize, win: usize) -> f64 {
        let top = y * self.width + x;
        let bottom = (y + win) * self.width + x;
        table[bottom + win] - table[bottom] - table[top + win] + table[top]
    }
}

fn channel_ssim(a: &Image, b: &Image, ch: usize, win: usize) -> f64 {
    let tables = Tables::build(a, b, ch);
    let n = (win * win) as f64;
    let (rows, cols) = (a.height() - win + 1, a.width() - win + 1);
    let mut sum = 0.0;
    for y in 0..rows {
        for x in 0..cols {
            let mu_a = tables.window_sum(&tables.a, y, x, win) / n;
            let mu_b = tables.window_sum(&tables.b, y, x, win) / n;
            let var_a = tables.window_sum(&tables.aa, y, x, win) / n - mu_a * mu_a;
            let var_b = tables.window_sum(&tables.bb, y, x, win) / n - mu_b * mu_b;
            let cov = tables.window_sum(&tables.ab, y, x, win) / n - mu_a * mu_b;
            sum += ((2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2))
                / ((mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2));
        }
    }
    sum / (rows * cols) as f64
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Image {
        Image::new(h, w, c, (0..h * w * c).map(|_| rng.random::<f32>()).collect()).unwrap()
    }

    #[test]
    fn self_similarity_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let img = random_image(&mut rng, 28, 28, 1);
        assert!((ssim(&img, &img).unwrap() - 1.0).abs() < 1e-9);
        let flat = Image::filled(5, 5, 3, 0.3).unwrap();
        assert!((ssim(&flat, &flat).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let a = random_image(&mut rng, 12, 9, 3);
            let b = random_image(&mut rng, 12, 9, 3);
            let (ab, ba) = (ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
            assert!((ab - ba).abs() < 1e-9);
            assert!((-1.0..1.0).contains(&ab));
        }
    }

    #[test]
    fn inverted_image_scores_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_image(&mut rng, 10, 10, 1);
        let inv = Image::new(10, 10, 1, a.data().iter().map(|v| 1.0 - v).collect()).unwrap();
        assert!(ssim(&a, &inv).unwrap() < 0.0);
    }

    #[test]
    fn small_images_shrink_the_window() {
        let a = Image::new(2, 3, 1, vec![0.0, 0.5, 1.0, 0.2, 0.4, 0.6]).unwrap();
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let a = Image::filled(4, 4, 1, 0.5).unwrap();
        let b = Image::filled(4, 5, 1, 0.5).unwrap();
        assert!(matches!(ssim(&a, &b), Err(TransformError::ShapeMismatch(..))));
    }
}
