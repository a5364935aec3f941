//! Good and bad squares of one lattice relative to an independent second lattice.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::{pow2, skeleton, DyadicLattice, DyadicSquare, Rect, SquareKey};
use crate::measure::{rect_negligibility, PlanarMeasure};
use crate::numeric::wilson_interval;
use crate::probability::{line_near, rim_width};
use crate::report::CheckReport;

/// Parameters of the consolidated badness rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadnessRule {
    pub m: u32,
    pub alpha: f64,
    pub tilde_m: f64,
}

/// Which parts of the consolidated rule fire.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    /// Close to the boundary of a much larger square.
    pub rim: bool,
    /// A nearby square of comparable or larger size has a non-negligible boundary.
    pub boundary: bool,
}

impl Verdict {
    pub fn is_bad(&self) -> bool {
        self.rim || self.boundary
    }
}

/// Part (1): some `R` of the extended second lattice with `l(R) = 2^k l(Q)`, `k >= m`,
/// `l(R) <= 1/2`, has `dist(Q, boundary R) <= 16 l(Q)^alpha l(R)^(1-alpha)`.
pub fn rim_bad(q: &Rect, d2: &DyadicLattice, rule: &BadnessRule) -> bool {
    let l = q.x1 - q.x0;
    let a = d2.anchor();
    let mut k = rule.m;
    loop {
        let big_l = l * pow2(k as i32);
        if big_l > 0.5 {
            return false;
        }
        let t = rim_width(l, big_l, rule.alpha);
        if line_near(q.x0, q.x1, a.re, big_l, t) || line_near(q.y0, q.y1, a.im, big_l, t) {
            return true;
        }
        k += 1;
    }
}

/// `Q` meets a grid line of the second lattice at some scale `2^k l(Q)`, `k >= m`,
/// `2^k l(Q) <= 1/2`: the zero-width version of part (1).
pub fn straddles_grid(q: &Rect, d2: &DyadicLattice, m: u32) -> bool {
    let l = q.x1 - q.x0;
    let a = d2.anchor();
    let mut k = m;
    loop {
        let big_l = l * pow2(k as i32);
        if big_l > 0.5 {
            return false;
        }
        if line_near(q.x0, q.x1, a.re, big_l, 0.0) || line_near(q.y0, q.y1, a.im, big_l, 0.0) {
            return true;
        }
        k += 1;
    }
}

fn expand(r: &Rect, by: f64) -> Rect {
    Rect::new(r.x0 - by, r.x1 + by, r.y0 - by, r.y1 + by)
}

/// Squares of the extended lattice at `level` meeting the closed rectangle `r`.
fn grid_squares_meeting(d2: &DyadicLattice, level: u32, r: &Rect) -> Vec<DyadicSquare> {
    let s = pow2(-(level as i32));
    let a = d2.anchor();
    let i0 = ((r.x0 - a.re) / s).floor() as i64 - 1;
    let i1 = ((r.x1 - a.re) / s).floor() as i64 + 1;
    let j0 = ((r.y0 - a.im) / s).floor() as i64 - 1;
    let j1 = ((r.y1 - a.im) / s).floor() as i64 + 1;
    let mut out = Vec::new();
    for ix in i0..=i1 {
        for iy in j0..=j1 {
            let sq = d2.square(SquareKey::new(level, ix, iy));
            if sq.rect().intersects(r) {
                out.push(sq);
            }
        }
    }
    out
}

/// Part (2): some `R` of the extended second lattice inside the closed `(4 2^m + 1) Q`
/// with `2^-(m+1) l(Q) <= l(R) <= 1/2` has a boundary that is not `tilde_m`-negligible.
///
/// A boundary can only fail when an atom lies within `|mu| / tilde_m` of it, so only squares
/// meeting such neighbourhoods are examined.
pub fn boundary_bad(q: &DyadicSquare, d2: &DyadicLattice, rule: &BadnessRule, mu: &PlanarMeasure) -> bool {
    if mu.is_empty() {
        return false;
    }
    let l = q.side();
    let factor = 4.0 * pow2(rule.m as i32) + 1.0;
    let big = q.dilate(factor);
    let tol = 1e-12 * factor * l;
    let container = expand(&big, tol);
    let rho = mu.total() / rule.tilde_m;
    let near: Vec<usize> = (0..mu.len())
        .filter(|&i| big.dist_point(mu.z(i)) <= rho)
        .collect();
    if near.is_empty() {
        return false;
    }
    let top = (factor * l).min(0.5);
    let bottom = l * pow2(-(rule.m as i32 + 1));
    let n_lo = ((-top.log2()) - 1e-9).ceil().max(1.0) as u32;
    let n_hi = ((-bottom.log2()) + 1e-9).floor() as u32;
    let mut seen: BTreeSet<SquareKey> = BTreeSet::new();
    for level in n_lo.max(1)..=n_hi {
        for &i in &near {
            let p = mu.z(i);
            let probe = Rect::new(p.re - rho, p.re + rho, p.im - rho, p.im + rho);
            for sq in grid_squares_meeting(d2, level, &probe) {
                if !seen.insert(sq.key) {
                    continue;
                }
                let r = sq.rect();
                if !container.contains_rect(&r) {
                    continue;
                }
                if r.dist_boundary(p) > rho {
                    continue;
                }
                if rect_negligibility(mu, &r) > rule.tilde_m {
                    return true;
                }
            }
        }
    }
    false
}

/// Consolidated rule.
pub fn is_bad(q: &DyadicSquare, d2: &DyadicLattice, rule: &BadnessRule, mu: &PlanarMeasure) -> Result<Verdict> {
    if q.side() > 0.5 {
        return domain("badness is defined for squares of side at most 1/2");
    }
    Ok(Verdict {
        rim: rim_bad(&q.rect(), d2, rule),
        boundary: boundary_bad(q, d2, rule, mu),
    })
}

/// Which earlier, scattered badness criteria fire for `Q` against the squares of `D_2`
/// (subsquares of its root).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegacyVerdict {
    /// Disjoint larger square closer than `l(Q)^alpha l(R)^(1-alpha)`.
    pub separation: bool,
    /// Larger square whose skeleton is within `8 l(Q)^alpha l(R)^(1-alpha)`.
    pub skeleton: bool,
    /// Nearby comparable square with a non-negligible child boundary.
    pub negligibility: bool,
}

impl LegacyVerdict {
    pub fn any(&self) -> bool {
        self.separation || self.skeleton || self.negligibility
    }
}

fn lattice_squares_near(d2: &DyadicLattice, level: u32, r: &Rect) -> Vec<DyadicSquare> {
    let n = 1i64 << level;
    grid_squares_meeting(d2, level, r)
        .into_iter()
        .filter(|s| (0..n).contains(&s.key.ix) && (0..n).contains(&s.key.iy))
        .collect()
}

pub fn legacy_bad(q: &DyadicSquare, d2: &DyadicLattice, rule: &BadnessRule, mu: &PlanarMeasure) -> LegacyVerdict {
    let lq = q.side();
    let qr = q.rect();
    let mut v = LegacyVerdict::default();
    let big_m = pow2(rule.m as i32);
    for level in 0..=q.level() + rule.m {
        let lr = pow2(-(level as i32));
        let reach = lq.powf(rule.alpha) * lr.powf(1.0 - rule.alpha);
        if lr > big_m * lq {
            for r in lattice_squares_near(d2, level, &expand(&qr, 8.0 * reach)) {
                let rr = r.rect();
                let apart = !q.meets(&r);
                if apart && qr.dist_rect(&rr) < reach {
                    v.separation = true;
                }
                if skeleton(&r).segments.iter().any(|&(a, b)| seg_rect_dist(a, b, &qr) <= 8.0 * reach) {
                    v.skeleton = true;
                }
            }
        }
        if lr >= lq / big_m && lr <= big_m * lq {
            for r in lattice_squares_near(d2, level, &expand(&qr, big_m * lq)) {
                if qr.dist_rect(&r.rect()) > big_m * lq {
                    continue;
                }
                if r.children()
                    .iter()
                    .any(|c| rect_negligibility(mu, &c.rect()) > rule.tilde_m)
                {
                    v.negligibility = true;
                }
            }
        }
    }
    v
}

/// Distance between an axis-parallel segment and a closed rectangle.
fn seg_rect_dist(a: crate::geometry::Point, b: crate::geometry::Point, r: &Rect) -> f64 {
    let s = Rect::new(a.re.min(b.re), a.re.max(b.re), a.im.min(b.im), a.im.max(b.im));
    s.dist_rect(r)
}

/// Samples second lattices and checks that every legacy-bad square is consolidated-bad.
pub fn badness_implication_check(squares: &[DyadicSquare], rule: &BadnessRule, mu: &PlanarMeasure, lattices: u64, seed: u64) -> CheckReport {
    let mut violations = 0u64;
    let mut legacy_count = 0u64;
    let mut samples = 0u64;
    for t in 0..lattices {
        let d2 = crate::geometry::sample_lattice(seed.wrapping_add(t));
        for q in squares {
            if q.side() > 0.5 {
                continue;
            }
            samples += 1;
            let lv = legacy_bad(q, &d2, rule, mu);
            if lv.any() {
                legacy_count += 1;
                let c = is_bad(q, &d2, rule, mu).expect("side checked");
                if !c.is_bad() {
                    violations += 1;
                }
            }
        }
    }
    CheckReport::verdict("badness_implication", violations as f64, 0.0, violations == 0, samples, seed)
        .with_note(format!("legacy-bad samples: {legacy_count}"))
}

/// Monte Carlo frequency of part (2) of the rule over uniformly shifted second lattices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFrequency {
    pub hits: u64,
    pub trials: u64,
    pub frequency: f64,
    pub wilson_hi: f64,
    pub seed: u64,
}

pub fn boundary_bad_frequency(q: &DyadicSquare, rule: &BadnessRule, mu: &PlanarMeasure, trials: u64, seed: u64) -> BoundaryFrequency {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    for _ in 0..trials {
        let sx = rng.random::<f64>() * 0.5 - 0.25;
        let sy = rng.random::<f64>() * 0.5 - 0.25;
        let d2 = DyadicLattice::with_shift(crate::geometry::pt(sx, sy), seed);
        if boundary_bad(q, &d2, rule, mu) {
            hits += 1;
        }
    }
    let (_, hi) = wilson_interval(hits, trials, 0.99);
    BoundaryFrequency {
        hits,
        trials,
        frequency: hits as f64 / trials.max(1) as f64,
        wilson_hi: hi,
        seed,
    }
}
