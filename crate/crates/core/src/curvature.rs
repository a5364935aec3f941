//! Menger curvature, the discrete Melnikov-Verdera identity and linear-programming lower
//! bounds for the positive Cauchy capacity.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::{pt, Point};
use crate::lp::maximize;
use crate::measure::PlanarMeasure;
use crate::numeric::{ksum, ksum_c};
use crate::report::CheckReport;

/// Reciprocal circumradius `4 Area / (|xy| |yz| |zx|)`; zero for degenerate triples.
pub fn menger(x: Point, y: Point, z: Point) -> f64 {
    let (a, b) = (y - x, z - x);
    let cross = (a.re * b.im - a.im * b.re).abs();
    let den = (y - x).norm() * (z - y).norm() * (x - z).norm();
    if cross == 0.0 || den == 0.0 {
        return 0.0;
    }
    2.0 * cross / den
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureResult {
    pub c2: f64,
    /// Ordered triples of distinct atoms included in the sum.
    pub triples: u64,
    pub eps: Option<f64>,
}

/// `sum over ordered distinct (i, j, k) of c(z_i, z_j, z_k)^2 w_i w_j w_k`, optionally only
/// over triples with pairwise distances `> eps`. Rows are summed in parallel and reduced in
/// index order, so the result does not depend on the thread count.
pub fn c2(nu: &PlanarMeasure, eps: Option<f64>) -> CurvatureResult {
    let n = nu.len();
    let far = |a: Point, b: Point| eps.is_none_or(|e| (a - b).norm() > e);
    let rows: Vec<(f64, u64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let zi = nu.z(i);
            let mut terms = Vec::new();
            let mut count = 0u64;
            for j in i + 1..n {
                let zj = nu.z(j);
                if !far(zi, zj) {
                    continue;
                }
                for k in j + 1..n {
                    let zk = nu.z(k);
                    if !far(zi, zk) || !far(zj, zk) {
                        continue;
                    }
                    count += 1;
                    let c = menger(zi, zj, zk);
                    terms.push(c * c * nu.w(j) * nu.w(k));
                }
            }
            (nu.w(i) * ksum(terms), count)
        })
        .collect();
    CurvatureResult {
        c2: 6.0 * ksum(rows.iter().map(|r| r.0)),
        triples: 6 * rows.iter().map(|r| r.1).sum::<u64>(),
        eps,
    }
}

/// `C1(z_i) = sum over j != i of w_j / (z_j - z_i)`.
pub fn cauchy_of_one(mu: &PlanarMeasure) -> Vec<Complex64> {
    (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let zi = mu.z(i);
            ksum_c((0..mu.len()).filter(|&j| j != i).map(|j| mu.w(j) / (mu.z(j) - zi)))
        })
        .collect()
}

/// `sum over i != j of w_i w_j^2 / |z_i - z_j|^2`.
pub fn pair_correction(mu: &PlanarMeasure) -> f64 {
    let rows: Vec<f64> = (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let zi = mu.z(i);
            mu.w(i) * ksum((0..mu.len()).filter(|&j| j != i).map(|j| mu.w(j).powi(2) / (mu.z(j) - zi).norm_sqr()))
        })
        .collect();
    ksum(rows)
}

/// Brute expansion of `|C1|^2` into ordered pairs `(j, k)`, with the distinct-triple part
/// regrouped through the six-permutation formula. Returns `(triple part, pair part)`.
pub fn mv_brute_expansion(mu: &PlanarMeasure) -> (f64, f64) {
    let n = mu.len();
    let rows: Vec<(Complex64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let zi = mu.z(i);
            let mut tri = Vec::new();
            let mut pair = Vec::new();
            for j in (0..n).filter(|&j| j != i) {
                for k in (0..n).filter(|&k| k != i) {
                    let v = mu.w(j) * mu.w(k) / ((mu.z(j) - zi) * (mu.z(k) - zi).conj());
                    if j == k {
                        pair.push(v.re);
                    } else {
                        tri.push(v);
                    }
                }
            }
            (mu.w(i) * ksum_c(tri), mu.w(i) * ksum(pair))
        })
        .collect();
    (ksum_c(rows.iter().map(|r| r.0)).re, ksum(rows.iter().map(|r| r.1)))
}

/// `|C1|^2_{L2(mu)} = c^2(mu) / 6 + sum over i != j of w_i w_j^2 |z_i - z_j|^-2`.
pub fn mv_identity_check(mu: &PlanarMeasure) -> Result<CheckReport> {
    let c1 = cauchy_of_one(mu);
    if c1.iter().any(|v| !v.is_finite()) {
        return domain("duplicate atoms");
    }
    let lhs = ksum(c1.iter().zip(mu.atoms()).map(|(v, a)| v.norm_sqr() * a.w));
    let rhs = c2(mu, None).c2 / 6.0 + pair_correction(mu);
    let rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    let rel = if lhs == rhs { 0.0 } else { rel };
    Ok(CheckReport::upper("mv_identity", rel, 1e-9, mu.len() as u64, 0).with_note(format!("lhs = {lhs}, rhs = {rhs}")))
}

/// `sum over the six permutations of 1 / ((z_s1 - z_s3) conj(z_s2 - z_s3))` and the sum of
/// the moduli of its terms.
pub fn permutation_sum(x: Point, y: Point, z: Point) -> (Complex64, f64) {
    let p = [x, y, z];
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let terms: Vec<Complex64> = perms
        .iter()
        .map(|s| 1.0 / ((p[s[0]] - p[s[2]]) * (p[s[1]] - p[s[2]]).conj()))
        .collect();
    (ksum_c(terms.iter().copied()), terms.iter().map(|t| t.norm()).sum())
}

/// Error of the permutation formula for `c^2`, relative to the sum of moduli of the six
/// terms (the natural scale of the floating-point cancellation), and the imaginary part.
pub fn permutation_error(x: Point, y: Point, z: Point) -> (f64, f64) {
    let (s, scale) = permutation_sum(x, y, z);
    let c = menger(x, y, z);
    ((s.re - c * c).abs() / scale, s.im.abs() / scale)
}

pub fn permutation_identity_check(x: Point, y: Point, z: Point) -> Result<CheckReport> {
    if x == y || y == z || x == z {
        return domain("points must be distinct");
    }
    let (rel, im) = permutation_error(x, y, z);
    let pass = rel <= 1e-10 && im <= 1e-12;
    Ok(CheckReport::verdict("permutation_identity", rel, 1e-10, pass, 1, 0).with_note(format!("imaginary part {im:e}")))
}

/// Uniform random triples in the unit square.
pub fn permutation_identity_batch(triples: u64, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut worst_im = 0.0f64;
    for _ in 0..triples {
        let mut p = || pt(rng.random::<f64>(), rng.random::<f64>());
        let (x, y, z) = (p(), p(), p());
        if x == y || y == z || x == z {
            continue;
        }
        let (r, i) = permutation_error(x, y, z);
        worst = worst.max(r);
        worst_im = worst_im.max(i);
    }
    let pass = worst <= 1e-10 && worst_im <= 1e-12;
    CheckReport::verdict("permutation_identity", worst, 1e-10, pass, triples, seed).with_note(format!("imaginary part {worst_im:e}"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityBound {
    pub value: f64,
    pub weights: Vec<f64>,
    pub constraint_points: Vec<Point>,
    /// `max |C(x)| - 1` over the constraint points for the returned weights.
    pub max_violation: f64,
    /// `sec(pi / d)`: the polygonal relaxation lets `|C|` reach this value.
    pub slack: f64,
}

/// Largest `sum w` over `w >= 0` with `Re(e^{2 pi i k/d} C(x)) <= 1` at every constraint
/// point, `C(x) = sum w_j / (z_j - x)`.
pub fn gamma_plus_lb(support: &PlanarMeasure, grid: &[Point], d: usize) -> Result<CapacityBound> {
    if d < 8 {
        return domain("at least 8 directions are required");
    }
    let slack = 1.0 / (PI / d as f64).cos();
    let n = support.len();
    if n == 0 {
        return Ok(CapacityBound {
            value: 0.0,
            weights: vec![],
            constraint_points: grid.to_vec(),
            max_violation: -1.0,
            slack,
        });
    }
    if grid.iter().any(|x| support.atoms().iter().any(|a| a.z == *x)) {
        return domain("constraint point coincides with a support atom");
    }
    let rots: Vec<Complex64> = (0..d).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / d as f64)).collect();
    let mut a = Vec::with_capacity(grid.len() * d);
    for &x in grid {
        let inv: Vec<Complex64> = (0..n).map(|j| 1.0 / (support.z(j) - x)).collect();
        for r in &rots {
            a.push(inv.iter().map(|v| (r * v).re).collect::<Vec<f64>>());
        }
    }
    let b = vec![1.0; a.len()];
    let sol = maximize(&vec![1.0; n], &a, &b)?;
    let max_violation = grid
        .iter()
        .map(|&x| ksum_c((0..n).map(|j| sol.x[j] / (support.z(j) - x))).norm() - 1.0)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CapacityBound {
        value: sol.value,
        weights: sol.x,
        constraint_points: grid.to_vec(),
        max_violation,
        slack,
    })
}

/// `count` points equally spaced on a circle, starting at angle 0.
pub fn ring(center: Point, radius: f64, count: usize) -> Vec<Point> {
    (0..count)
        .map(|k| center + Complex64::from_polar(radius, 2.0 * PI * k as f64 / count as f64))
        .collect()
}
