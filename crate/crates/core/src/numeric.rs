//! Compensated summation and small statistics helpers.

use num_complex::Complex64;
use statrs::distribution::{ContinuousCDF, Normal};

/// Neumaier-compensated sum.
pub fn ksum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for x in it {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

/// Compensated complex sum.
pub fn ksum_c<I: IntoIterator<Item = Complex64>>(it: I) -> Complex64 {
    let mut re = Vec::new();
    let mut im = Vec::new();
    for z in it {
        re.push(z.re);
        im.push(z.im);
    }
    Complex64::new(ksum(re), ksum(im))
}

/// Wilson score interval for `k` successes in `n` trials at two-sided confidence `level`.
pub fn wilson_interval(k: u64, n: u64, level: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(0.5 + 0.5 * level);
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Relative difference `|a-b| / max(|a|,|b|, floor)`.
pub fn rel_diff(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancellation() {
        assert_eq!(ksum([1e16, 1.0, -1e16]), 1.0);
        assert_eq!(ksum([0.1; 10]), 1.0);
        assert_eq!(ksum(std::iter::empty()), 0.0);
        let z = ksum_c([Complex64::new(1e16, 1.0), Complex64::new(1.0, -1e16), Complex64::new(-1e16, 1e16)]);
        assert_eq!(z, Complex64::new(1.0, 1.0));
    }

    #[test]
    fn wilson_examples() {
        assert_eq!(wilson_interval(0, 0, 0.95), (0.0, 1.0));
        let (lo, hi) = wilson_interval(50, 100, 0.95);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4, "{lo} {hi}");
        let (lo, hi) = wilson_interval(0, 100, 0.95);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.0370).abs() < 1e-4, "{hi}");
    }

    #[test]
    fn rel_diff_examples() {
        assert_eq!(rel_diff(1.0, 1.5, 0.0), 0.5 / 1.5);
        assert_eq!(rel_diff(0.0, 0.0, 1.0), 0.0);
        assert_eq!(rel_diff(1e-20, 0.0, 1.0), 1e-20);
    }
}
