//! Truncated expectations, lattice-shift probabilities and periodic sweeping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::{pow2, Rect};
use crate::numeric::{ksum, wilson_interval};
use crate::report::CheckReport;

/// A finite random variable: nonnegative values with probabilities summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl WeightedSample {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.len() != probs.len() {
            return domain("values and probabilities differ in length");
        }
        if values.is_empty() {
            return domain("empty sample");
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return domain("sample values must be finite and nonnegative");
        }
        if probs.iter().any(|p| !(*p > 0.0)) {
            return domain("probabilities must be positive");
        }
        let total = ksum(probs.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return domain(format!("probabilities sum to {total}, not 1"));
        }
        Ok(WeightedSample { values, probs })
    }

    /// Equal-probability sample.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        WeightedSample::new(values, vec![1.0 / n as f64; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn expectation(&self) -> f64 {
        ksum(self.values.iter().zip(&self.probs).map(|(v, p)| v * p))
    }

    /// `P{ xi satisfies pred }`.
    pub fn prob_where(&self, pred: impl Fn(f64) -> bool) -> f64 {
        ksum(
            self.values
                .iter()
                .zip(&self.probs)
                .filter(|(v, _)| pred(**v))
                .map(|(_, p)| *p),
        )
    }
}

/// `E_beta xi`: the expectation after discarding probability `beta` from the largest values,
/// splitting the boundary sample fractionally.
pub fn truncated_expectation(s: &WeightedSample, beta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta) {
        return domain(format!("beta = {beta} not in [0,1)"));
    }
    Ok(trim(&s.values, &s.probs, beta))
}

pub(crate) fn trim(values: &[f64], probs: &[f64], beta: f64) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let mut left = beta;
    let mut kept = Vec::with_capacity(values.len());
    for i in order {
        let p = probs[i];
        if left >= p {
            left -= p;
        } else {
            kept.push(values[i] * (p - left));
            left = 0.0;
        }
    }
    ksum(kept)
}

/// Checks the two defining properties of `E_beta`:
/// A: `P{xi > 0} <= beta` forces `E_beta xi = 0`;
/// B: `P{xi >= E_beta xi / beta} <= 2 beta`.
///
/// When `E_beta xi = 0` the event in B contains `{xi = 0}`, so B is checked in its
/// strict form `P{xi > 0} <= 2 beta`.
pub fn truncated_expectation_properties(s: &WeightedSample, beta: f64) -> Result<CheckReport> {
    if !(beta > 0.0 && beta < 1.0) {
        return domain(format!("beta = {beta} not in (0,1)"));
    }
    let e = truncated_expectation(s, beta)?;
    let positive = s.prob_where(|v| v > 0.0);
    let a_ok = positive > beta || e == 0.0;
    let tail = if e > 0.0 {
        let thr = e / beta;
        s.prob_where(|v| v >= thr)
    } else {
        positive
    };
    let b_ok = tail <= 2.0 * beta * (1.0 + 1e-12);
    let mut r = CheckReport::verdict(
        "truncated_expectation_properties",
        tail,
        2.0 * beta,
        a_ok && b_ok,
        s.values.len() as u64,
        0,
    );
    if !a_ok {
        r = r.with_note(format!("property A failed: P{{xi>0}} = {positive}, E_beta = {e}"));
    }
    Ok(r)
}

/// Badness threshold `16 l^alpha L^(1-alpha)` for the grid lines of side `big_l`.
pub fn rim_width(l: f64, big_l: f64, alpha: f64) -> f64 {
    16.0 * l.powf(alpha) * big_l.powf(1.0 - alpha)
}

/// Per-axis probability that a uniformly placed grid of period `big_l` has a line within
/// `t` of an interval of length `l`.
fn axis_hit(l: f64, t: f64, big_l: f64) -> f64 {
    ((l + 2.0 * t) / big_l).min(1.0)
}

/// Exact probability over the uniform shift that `Q` (side `l`) is within the rim of the
/// grid of squares of side `2^k l`.
pub fn rim_probability_exact(l: f64, k: u32, alpha: f64) -> f64 {
    let big_l = l * pow2(k as i32);
    let p = axis_hit(l, rim_width(l, big_l, alpha), big_l);
    1.0 - (1.0 - p) * (1.0 - p)
}

/// Per-scale bound `68 * 2^(-k alpha)`.
pub fn rim_bound(k: u32, alpha: f64) -> f64 {
    68.0 * pow2(-(k as i32)).powf(alpha)
}

/// Aggregate bound `68 * 2^(-m alpha) / (1 - 2^(-alpha))`.
pub fn rim_bound_aggregate(m: u32, alpha: f64) -> f64 {
    68.0 * pow2(-(m as i32)).powf(alpha) / (1.0 - 2f64.powf(-alpha))
}

/// Whether some grid line of period `big_l` with offset `anchor` lies within `t` of `[a, b]`.
pub fn line_near(a: f64, b: f64, anchor: f64, big_l: f64, t: f64) -> bool {
    let u = (a - anchor).rem_euclid(big_l);
    let width = b - a;
    u <= t || u + width >= big_l - t
}

/// Monte Carlo frequency of rim badness at one scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleEstimate {
    pub k: u32,
    pub hits: u64,
    pub trials: u64,
    pub frequency: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub exact: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Monte Carlo estimate of the part-(1) badness probability of the closed square `q`
/// over uniformly shifted lattices, for every `k` in `ks` and in aggregate over `k >= m`
/// with `2^k l(Q) <= 1/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RimEstimate {
    pub seed: u64,
    pub scales: Vec<ScaleEstimate>,
    pub aggregate: ScaleEstimate,
}

pub fn bad_square_probability(q: &Rect, m: u32, ks: &[u32], alpha: f64, trials: u64, seed: u64) -> Result<RimEstimate> {
    let l = q.x1 - q.x0;
    if !(l > 0.0 && l <= 0.5) {
        return domain("square side must lie in (0, 1/2]");
    }
    if trials < 1000 {
        return domain("at least 1000 trials are required");
    }
    let all_k: Vec<u32> = (m..)
        .take_while(|&k| l * pow2(k as i32) <= 0.5)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = vec![0u64; ks.len()];
    let mut agg_hits = 0u64;
    for _ in 0..trials {
        let ax = rng.random::<f64>() * 0.5 - 0.25 - 0.5;
        let ay = rng.random::<f64>() * 0.5 - 0.25 - 0.5;
        let bad_at = |k: u32| {
            let big_l = l * pow2(k as i32);
            let t = rim_width(l, big_l, alpha);
            line_near(q.x0, q.x1, ax, big_l, t) || line_near(q.y0, q.y1, ay, big_l, t)
        };
        for (h, &k) in hits.iter_mut().zip(ks) {
            if bad_at(k) {
                *h += 1;
            }
        }
        if all_k.iter().any(|&k| bad_at(k)) {
            agg_hits += 1;
        }
    }
    let est = |k: u32, h: u64, exact: f64, bound: f64| {
        let (lo, hi) = wilson_interval(h, trials, 0.99);
        ScaleEstimate {
            k,
            hits: h,
            trials,
            frequency: h as f64 / trials as f64,
            wilson_lo: lo,
            wilson_hi: hi,
            exact,
            bound,
            pass: hi <= bound,
        }
    };
    let scales = ks
        .iter()
        .zip(&hits)
        .map(|(&k, &h)| est(k, h, rim_probability_exact(l, k, alpha), rim_bound(k, alpha)))
        .collect();
    let union_exact_ub = all_k
        .iter()
        .map(|&k| rim_probability_exact(l, k, alpha))
        .sum::<f64>()
        .min(1.0);
    let aggregate = est(m, agg_hits, union_exact_ub, rim_bound_aggregate(m, alpha));
    Ok(RimEstimate {
        seed,
        scales,
        aggregate,
    })
}

/// Atoms of a measure on the circle `R / pZ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicMeasure {
    period: f64,
    atoms: Vec<(f64, f64)>,
    total: f64,
}

impl PeriodicMeasure {
    /// Reduces positions modulo `period` and merges coincident positions.
    pub fn new(period: f64, atoms: &[(f64, f64)]) -> Result<Self> {
        if !(period > 0.0) {
            return domain("period must be positive");
        }
        let mut a: Vec<(f64, f64)> = atoms
            .iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|&(x, w)| (x.rem_euclid(period), w))
            .collect();
        a.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(a.len());
        for (x, w) in a {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        let total = ksum(merged.iter().map(|t| t.1));
        Ok(PeriodicMeasure {
            period,
            atoms: merged,
            total,
        })
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Unwrapped position and mass of the `i`-th atom, `i` ranging over all integers.
    fn unwrapped(&self, i: i64) -> (f64, f64) {
        let n = self.atoms.len() as i64;
        let copy = i.div_euclid(n);
        let (x, w) = self.atoms[i.rem_euclid(n) as usize];
        (x + copy as f64 * self.period, w)
    }

    /// Centred maximal function `sup_r nu([tau - r, tau + r]) / (2r)` of the periodized measure.
    pub fn maximal(&self, tau: f64, stop_level: f64) -> f64 {
        if self.atoms.is_empty() {
            return 0.0;
        }
        let tau = tau.rem_euclid(self.period);
        let mut d: Vec<(f64, f64)> = Vec::new();
        let mut copies = 1i64;
        let n = self.atoms.len() as i64;
        loop {
            d.clear();
            for i in -copies * n..(copies + 1) * n {
                let (x, w) = self.unwrapped(i);
                d.push(((x - tau).abs(), w));
            }
            d.sort_by(|a, b| a.0.total_cmp(&b.0));
            let reach = copies as f64 * self.period;
            let mut cum = 0.0;
            let mut best = 0.0f64;
            let mut k = 0;
            while k < d.len() && d[k].0 <= reach {
                let r = d[k].0;
                while k < d.len() && d[k].0 == r {
                    cum += d[k].1;
                    k += 1;
                }
                if r == 0.0 {
                    return f64::INFINITY;
                }
                best = best.max(cum / (2.0 * r));
            }
            let tail = self.total / self.period + self.total / (2.0 * reach);
            if tail <= stop_level.max(best) || copies > 1 << 20 {
                return best;
            }
            copies *= 2;
        }
    }
}

/// Offsets where the periodized measure has centred maximal function above `tilde_m / 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Bad intervals inside `[0, period)`.
    pub intervals: Vec<(f64, f64)>,
    pub bad_length: f64,
    pub probability: f64,
    /// `4 |nu| / tilde_m`.
    pub bound: f64,
}

/// Exact bad-offset set for the sweeping measure.
///
/// `M nu(tau) > tilde_m / 2` iff some window of consecutive atoms `W` with first and last
/// positions `x_f <= x_l` has `max(tau - x_f, x_l - tau) < nu(W) / tilde_m`.
pub fn sweeping_negligibility(nu: &PeriodicMeasure, tilde_m: f64) -> Result<SweepResult> {
    if !(tilde_m > 0.0) {
        return domain("tilde_m must be positive");
    }
    let p = nu.period;
    let bound = 4.0 * nu.total / tilde_m;
    if nu.atoms.is_empty() {
        return Ok(SweepResult {
            intervals: vec![],
            bad_length: 0.0,
            probability: 0.0,
            bound,
        });
    }
    let ratio = 2.0 * nu.total / (tilde_m * p);
    if ratio >= 1.0 {
        return Ok(SweepResult {
            intervals: vec![(0.0, p)],
            bad_length: p,
            probability: 1.0,
            bound,
        });
    }
    let max_span = (2.0 * nu.total / tilde_m) / (1.0 - ratio);
    let n = nu.atoms.len() as i64;
    let mut raw: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        let (xf, _) = nu.unwrapped(i);
        let mut mass = 0.0;
        let mut j = i;
        loop {
            let (xl, w) = nu.unwrapped(j);
            if xl - xf >= max_span && j > i {
                break;
            }
            mass += w;
            let rho = mass / tilde_m;
            let (lo, hi) = (xl - rho, xf + rho);
            if lo < hi {
                raw.push((lo, hi));
            }
            j += 1;
        }
    }
    let mut pieces: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in raw {
        if hi - lo >= p {
            pieces.push((0.0, p));
            continue;
        }
        let a = lo.rem_euclid(p);
        let b = a + (hi - lo);
        if b > p {
            pieces.push((a, p));
            pieces.push((0.0, b - p));
        } else {
            pieces.push((a, b));
        }
    }
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in pieces {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    let bad_length = ksum(merged.iter().map(|(a, b)| b - a));
    Ok(SweepResult {
        intervals: merged,
        bad_length,
        probability: bad_length / p,
        bound,
    })
}

/// Monte Carlo cross-check of [`sweeping_negligibility`] by direct maximal-function evaluation.
pub fn sweeping_monte_carlo(nu: &PeriodicMeasure, tilde_m: f64, trials: u64, seed: u64) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    for _ in 0..trials {
        let tau = rng.random::<f64>() * nu.period;
        if nu.maximal(tau, tilde_m / 2.0) > tilde_m / 2.0 {
            hits += 1;
        }
    }
    (hits, trials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    #[test]
    fn truncated_expectation_examples() {
        let s = WeightedSample::uniform(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(truncated_expectation(&s, 0.25).unwrap(), 1.5);
        assert_eq!(truncated_expectation(&s, 0.0).unwrap(), 2.5);
        assert!((truncated_expectation(&s, 0.375).unwrap() - 1.125).abs() < 1e-15);
        assert!(truncated_expectation(&s, 1.0).is_err());
        assert!(truncated_expectation(&s, -0.1).is_err());
    }

    #[test]
    fn weighted_sample_validation() {
        assert!(WeightedSample::new(vec![1.0], vec![0.5]).is_err());
        assert!(WeightedSample::new(vec![-1.0], vec![1.0]).is_err());
        assert!(WeightedSample::new(vec![], vec![]).is_err());
        assert!(WeightedSample::new(vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(WeightedSample::new(vec![1.0, 2.0], vec![1.0, 0.0]).is_err());
        let s = WeightedSample::new(vec![0.0, 2.0], vec![0.75, 0.25]).unwrap();
        assert_eq!(s.expectation(), 0.5);
        assert_eq!(s.prob_where(|v| v > 0.0), 0.25);
    }

    #[test]
    fn property_a_sends_small_support_to_zero() {
        let s = WeightedSample::new(vec![0.0, 100.0], vec![0.8, 0.2]).unwrap();
        assert_eq!(truncated_expectation(&s, 0.2).unwrap(), 0.0);
        assert!(truncated_expectation_properties(&s, 0.2).unwrap().passed());
    }

    #[test]
    fn rim_geometry() {
        assert_eq!(rim_width(1.0, 16.0, 0.5), 64.0);
        assert!(line_near(0.1, 0.2, 0.0, 1.0, 0.1));
        assert!(!line_near(0.3, 0.4, 0.0, 1.0, 0.1));
        assert!(line_near(0.8, 0.95, 0.0, 1.0, 0.05));
        assert!(line_near(-1.97, -1.9, 0.0, 1.0, 0.05));
        assert_eq!(rim_probability_exact(0.001, 1, 0.5), 1.0);
        assert_eq!(rim_bound(0, 1.0), 68.0);
        assert!((rim_bound_aggregate(2, 1.0) - 68.0 / 4.0 / 0.5).abs() < 1e-12);
    }

    #[test]
    fn rim_probability_matches_interval_oracle() {
        let l: f64 = 1.0 / 4096.0;
        let alpha = 0.9;
        for k in [8u32, 10] {
            let big_l = l * pow2(k as i32);
            let t = rim_width(l, big_l, alpha);
            let grid = 200_000;
            let mut hit = 0;
            for i in 0..grid {
                let anchor = (i as f64 + 0.5) / grid as f64 * big_l;
                if line_near(0.1, 0.1 + l, anchor, big_l, t) {
                    hit += 1;
                }
            }
            let axis = hit as f64 / grid as f64;
            let oracle = 1.0 - (1.0 - axis).powi(2);
            assert!((oracle - rim_probability_exact(l, k, alpha)).abs() < 1e-4, "{k}");
        }
    }

    #[test]
    fn bad_square_probability_brackets_exact_value() {
        let l = 1.0 / 4096.0;
        let q = Rect::new(0.1, 0.1 + l, 0.2, 0.2 + l);
        let est = bad_square_probability(&q, 8, &[8, 9, 10], 0.9, 400_000, 3).unwrap();
        for s in &est.scales {
            assert!(s.wilson_lo <= s.exact && s.exact <= s.wilson_hi, "{s:?}");
            assert!(s.pass);
        }
        assert!(est.aggregate.frequency <= est.aggregate.exact + 0.02);
        assert!(bad_square_probability(&q, 8, &[8], 0.9, 10, 3).is_err());
        assert!(bad_square_probability(&Rect::new(0.0, 1.0, 0.0, 1.0), 1, &[1], 0.9, 1000, 3).is_err());
    }

    #[test]
    fn sweeping_examples() {
        let empty = PeriodicMeasure::new(1.0, &[]).unwrap();
        assert_eq!(sweeping_negligibility(&empty, 10.0).unwrap().bad_length, 0.0);
        let one = PeriodicMeasure::new(1.0, &[(0.3, 0.5)]).unwrap();
        let r = sweeping_negligibility(&one, 100.0).unwrap();
        assert!((r.bad_length - 2.0 * 0.5 / 100.0).abs() < 1e-15);
        assert!(r.bad_length <= 4.0 * 0.5 / 100.0);
        assert_eq!(r.intervals.len(), 1);
        let heavy = PeriodicMeasure::new(1.0, &[(0.3, 10.0)]).unwrap();
        assert_eq!(sweeping_negligibility(&heavy, 1.0).unwrap().probability, 1.0);
        assert!(sweeping_negligibility(&one, 0.0).is_err());
        assert!(PeriodicMeasure::new(0.0, &[]).is_err());
    }

    #[test]
    fn periodic_measure_reduces_and_merges() {
        let nu = PeriodicMeasure::new(1.0, &[(1.25, 1.0), (0.25, 2.0), (-0.5, 1.0), (0.1, 0.0)]).unwrap();
        assert_eq!(nu.total(), 4.0);
        assert_eq!(nu.atoms, vec![(0.25, 3.0), (0.5, 1.0)]);
        assert_eq!(nu.maximal(0.25, 1.0), f64::INFINITY);
        let single = PeriodicMeasure::new(1.0, &[(0.0, 1.0)]).unwrap();
        assert!((single.maximal(0.25, 0.1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sweeping_exact_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let atoms: Vec<(f64, f64)> = (0..30).map(|_| (rng.random::<f64>() * 2.0, rng.random::<f64>() * 0.1)).collect();
        let nu = PeriodicMeasure::new(2.0, &atoms).unwrap();
        let tm = 20.0;
        let exact = sweeping_negligibility(&nu, tm).unwrap();
        let (hits, n) = sweeping_monte_carlo(&nu, tm, 20_000, 1);
        let (lo, hi) = wilson_interval(hits, n, 0.999);
        assert!(lo <= exact.probability && exact.probability <= hi, "{} not in [{lo}, {hi}]", exact.probability);
        assert!(exact.bad_length <= exact.bound);
        for &(a, b) in &exact.intervals {
            let mid = 0.5 * (a + b);
            assert!(nu.maximal(mid, tm / 2.0) > tm / 2.0);
        }
    }

    proptest! {
        #[test]
        fn truncated_expectation_invariants(vals in proptest::collection::vec(0.0f64..10.0, 1..12), beta in 0.01f64..0.99) {
            let s = WeightedSample::uniform(vals.clone()).unwrap();
            let e = truncated_expectation(&s, beta).unwrap();
            prop_assert!(e >= 0.0 && e <= s.expectation() + 1e-12);
            prop_assert!(truncated_expectation_properties(&s, beta).unwrap().passed());
            let e2 = truncated_expectation(&s, (beta * 0.5).max(0.0)).unwrap();
            prop_assert!(e <= e2 + 1e-12);
            let doubled: Vec<f64> = vals.iter().map(|v| 2.0 * v).collect();
            let s2 = WeightedSample::uniform(doubled).unwrap();
            prop_assert!((truncated_expectation(&s2, beta).unwrap() - 2.0 * e).abs() <= 1e-9 * (1.0 + e));
        }

        #[test]
        fn sweeping_within_bound(atoms in proptest::collection::vec((0.0f64..1.0, 0.0f64..0.05), 0..20), tm in 1.0f64..100.0) {
            let nu = PeriodicMeasure::new(1.0, &atoms).unwrap();
            let r = sweeping_negligibility(&nu, tm).unwrap();
            prop_assert!(r.bad_length <= r.bound + 1e-12 || r.probability == 1.0);
            prop_assert!(r.probability <= 1.0);
        }
    }
}
