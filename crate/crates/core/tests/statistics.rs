use homog_core::stats::{fit_rate, moment, moment_value};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); 1.0 + z }).collect()
}

fn mean_std_error(n: usize, seeds: std::ops::Range<u64>) -> f64 {
    let k = seeds.end - seeds.start;
    seeds.map(|s| moment(&gaussian(n, s), 2.0).unwrap().std_error).sum::<f64>() / k as f64
}

#[test]
fn bootstrap_error_shrinks_like_inverse_square_root() {
    for n in [128usize, 256, 512] {
        let ratio = mean_std_error(n, 0..16) / mean_std_error(2 * n, 100..116);
        assert!((1.25..=1.60).contains(&ratio), "N={n}: ratio {ratio}");
    }
}

#[test]
fn log_polluted_power_law_fits_inside_window() {
    let points: Vec<(f64, f64)> = (4..=8).map(|k| {
        let s = f64::from(1u32 << k);
        (s, (2.0 + s).ln() / s)
    }).collect();
    let fit = fit_rate(&points).unwrap();
    assert!(fit.slope > -1.0 && fit.slope < -0.7, "{}", fit.slope);
}

#[test]
fn exact_power_law_is_recovered() {
    let points: Vec<(f64, f64)> = [2.0, 3.0, 5.0, 9.0, 40.0].iter().map(|&s: &f64| (s, 3.0 * s.powf(-1.5))).collect();
    let fit = fit_rate(&points).unwrap();
    assert!((fit.slope + 1.5).abs() < 1e-12);
    assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn moments_are_nondecreasing_in_order(values in prop::collection::vec(-1e3f64..1e3, 1..64), p in 1.0f64..6.0, dp in 0.0f64..4.0) {
        let lo = moment_value(&values, p);
        let hi = moment_value(&values, p + dp);
        prop_assert!(hi >= lo * (1.0 - 1e-12), "{} < {}", hi, lo);
    }
}
