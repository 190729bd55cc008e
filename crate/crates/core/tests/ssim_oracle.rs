//! SSIM against a direct, window-by-window evaluation of the formula.

use covswarm_core::transform::{ssim, ssim_with_window};
use covswarm_core::Image;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mean over all fully contained windows of
/// `(2 mu_a mu_b + C1)(2 cov + C2) / ((mu_a^2 + mu_b^2 + C1)(var_a + var_b + C2))`,
/// population statistics, per channel, then averaged over channels.
fn brute_force(a: &Image, b: &Image, window: usize) -> f64 {
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let win = window.min(a.height()).min(a.width());
    let n = (win * win) as f64;
    let mut per_channel = 0.0;
    for ch in 0..a.channels() {
        let mut total = 0.0;
        let mut count = 0usize;
        for y in 0..=a.height() - win {
            for x in 0..=a.width() - win {
                let mut pa = Vec::new();
                let mut pb = Vec::new();
                for dy in 0..win {
                    for dx in 0..win {
                        pa.push(f64::from(a.get(y + dy, x + dx, ch)));
                        pb.push(f64::from(b.get(y + dy, x + dx, ch)));
                    }
                }
                let ma = pa.iter().sum::<f64>() / n;
                let mb = pb.iter().sum::<f64>() / n;
                let va = pa.iter().map(|v| (v - ma).powi(2)).sum::<f64>() / n;
                let vb = pb.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / n;
                let cov = pa.iter().zip(&pb).map(|(p, q)| (p - ma) * (q - mb)).sum::<f64>() / n;
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
        per_channel += total / count as f64;
    }
    per_channel / a.channels() as f64
}

fn random_image(rng: &mut impl Rng, h: usize, w: usize, c: usize) -> Image {
    Image::new(h, w, c, (0..h * w * c).map(|_| rng.random::<f32>()).collect()).unwrap()
}

/// Second image correlated with the first, so scores spread over (-1, 1].
fn perturbed(rng: &mut impl Rng, a: &Image, amount: f32) -> Image {
    let data = a
        .data()
        .iter()
        .map(|&x| (x + amount * (rng.random::<f32>() - 0.5)).clamp(0.0, 1.0))
        .collect();
    Image::new(a.height(), a.width(), a.channels(), data).unwrap()
}

#[test]
fn matches_brute_force_on_twenty_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..20 {
        let (h, w, c) = match i % 4 {
            0 => (28, 28, 1),
            1 => (12, 9, 1),
            2 => (10, 10, 3),
            _ => (5, 6, 1),
        };
        let a = random_image(&mut rng, h, w, c);
        let b = perturbed(&mut rng, &a, 0.1 * (i + 1) as f32);
        let fast = ssim(&a, &b).unwrap();
        let slow = brute_force(&a, &b, 7);
        assert!((fast - slow).abs() < 1e-6, "pair {i}: {fast} vs {slow}");
    }
}

#[test]
fn other_window_sizes_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_image(&mut rng, 16, 16, 1);
    let b = perturbed(&mut rng, &a, 0.4);
    for win in [1, 3, 8, 16, 40] {
        let fast = ssim_with_window(&a, &b, win).unwrap();
        assert!((fast - brute_force(&a, &b, win)).abs() < 1e-6, "window {win}");
    }
}

#[test]
fn shape_mismatch_is_an_error() {
    let a = Image::filled(8, 8, 1, 0.5).unwrap();
    let b = Image::filled(8, 7, 1, 0.5).unwrap();
    assert!(ssim(&a, &b).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn identity_symmetry_and_range(seed in any::<u64>(), h in 7usize..20, w in 7usize..20, amount in 0.0f32..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_image(&mut rng, h, w, 1);
        let b = perturbed(&mut rng, &a, amount);
        prop_assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        let ab = ssim(&a, &b).unwrap();
        prop_assert!((ab - ssim(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&ab));
    }
}
