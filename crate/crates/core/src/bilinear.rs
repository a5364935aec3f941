//! Splitting of the bilinear form over pairs of martingale differences and the lemma-level
//! inequalities used to bound each piece.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::geometry::{long_distance, pow2, skeleton, whitney, DyadicSquare, Rect, SquareKey};
use crate::martingale::{l2_sqr, Classification, MartingaleDecomposition, Piece, Projections, Status, TerminalKind};
use crate::measure::{ball_mass, rect_negligibility, PlanarMeasure};
use crate::numeric::{ksum, ksum_c};
use crate::report::CheckReport;
use crate::transform::OperatorMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Conj-free `sum over i != j of f_i k(z_i, z_j) g_j w_i w_j` through a kernel matrix with
/// entries `k(z_i, z_j) w_j`.
pub fn bilinear_form(kmat: &OperatorMatrix, mu: &PlanarMeasure, f: &[Complex64], g: &[Complex64]) -> Complex64 {
    let kg = kmat.apply(g);
    ksum_c(f.iter().zip(&kg).zip(mu.atoms()).map(|((a, b), x)| a * b * x.w))
}

/// Bilinear pairing of two sparse pieces.
pub fn piece_form(kmat: &OperatorMatrix, mu: &PlanarMeasure, p: &Piece, q: &Piece) -> Complex64 {
    ksum_c(p.atoms.iter().zip(&p.values).map(|(&i, &v)| {
        let row = ksum_c(q.atoms.iter().zip(&q.values).map(|(&j, &u)| kmat.entry(i, j) * u));
        v * mu.w(i) * row
    }))
}

/// Restriction of a piece to the atoms satisfying a predicate.
pub fn restrict(p: &Piece, keep: impl Fn(usize) -> bool) -> Piece {
    let (atoms, values) = p
        .atoms
        .iter()
        .zip(&p.values)
        .filter(|(i, _)| keep(**i))
        .map(|(i, v)| (*i, *v))
        .unzip();
    Piece {
        key: p.key,
        atoms,
        values,
    }
}

/// One side of the pairing: a lattice classification, its projections, the decomposition of
/// the function and the set of good transit squares.
pub struct Side<'a> {
    pub proj: &'a Projections<'a>,
    pub decomp: &'a MartingaleDecomposition,
    pub good: &'a BTreeSet<SquareKey>,
}

impl Side<'_> {
    fn class(&self) -> &Classification {
        self.proj.class
    }

    fn square(&self, k: &SquareKey) -> DyadicSquare {
        self.class().lattice.square(*k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Sigma1,
    Sigma2,
    Sigma3Term,
    Sigma3Tr,
}

/// A tagged pair `(Q, R)` with `Q` from the first lattice and `R` from the second.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTerm {
    pub q: SquareKey,
    pub r: SquareKey,
    /// `l(Q) > l(R)`: the roles of small and large square are swapped.
    pub mirrored: bool,
    pub tag: Tag,
    /// Child of the large square containing the small one (third family only).
    pub child: Option<SquareKey>,
    pub value: Complex64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BilinearPartition {
    pub pairs: Vec<PairTerm>,
    /// Largest number of first-family partners of a single square.
    pub max_sigma1_count: usize,
    /// Small squares of the third family closer to the skeleton than `l^alpha L^(1-alpha)`.
    pub skeleton_violations: usize,
    /// Whitney support facts that failed, and those that could not be tested because the
    /// centre fell in the truncated collar.
    pub whitney_violations: usize,
    pub whitney_untested: usize,
}

impl BilinearPartition {
    pub fn total(&self) -> Complex64 {
        ksum_c(self.pairs.iter().map(|p| p.value))
    }

    pub fn total_by_tag(&self) -> BTreeMap<Tag, Complex64> {
        let mut out: BTreeMap<Tag, Vec<Complex64>> = BTreeMap::new();
        for p in &self.pairs {
            out.entry(p.tag).or_default().push(p.value);
        }
        out.into_iter().map(|(k, v)| (k, ksum_c(v))).collect()
    }

    pub fn count_by_tag(&self) -> BTreeMap<Tag, usize> {
        let mut out = BTreeMap::new();
        for p in &self.pairs {
            *out.entry(p.tag).or_insert(0) += 1;
        }
        out
    }
}

/// `2^{2m} (4 2^m + 1)^2 (2m + 1)`.
pub fn sigma1_count_bound(m: u32) -> f64 {
    let b = pow2(m as i32);
    b * b * (4.0 * b + 1.0).powi(2) * (2.0 * m as f64 + 1.0)
}

struct Tagged {
    tag: Tag,
    child: Option<SquareKey>,
    skeleton_gap: Option<f64>,
}

/// Tags the pair of a small square `s` and a large square `l` (with `l(s) <= l(L)`), where
/// `l_class` classifies the lattice of the large one.
fn tag_pair(s: &DyadicSquare, l: &DyadicSquare, l_class: &Classification, m: u32, alpha: f64) -> Result<Tagged> {
    let (ls, ll) = (s.side(), l.side());
    if ls >= pow2(-(m as i32)) * ll {
        let tag = if s.dist(l) <= ll { Tag::Sigma1 } else { Tag::Sigma2 };
        return Ok(Tagged {
            tag,
            child: None,
            skeleton_gap: None,
        });
    }
    if !s.meets(l) {
        return Ok(Tagged {
            tag: Tag::Sigma2,
            child: None,
            skeleton_gap: None,
        });
    }
    let Some(child) = l.children().into_iter().find(|c| s.inside(c)) else {
        return invalid(format!("good square {} straddles the children of {}", s.key, l.key));
    };
    let tag = match l_class.status(&child.key) {
        Some(Status::Transit) => Tag::Sigma3Tr,
        Some(Status::Terminal(_)) => Tag::Sigma3Term,
        None => return invalid(format!("child {} of a transit square is unclassified", child.key)),
    };
    let sk = skeleton(l);
    let rect = s.rect();
    let gap = sk
        .segments
        .iter()
        .map(|&(a, b)| Rect::new(a.re.min(b.re), a.re.max(b.re), a.im.min(b.im), a.im.max(b.im)).dist_rect(&rect))
        .fold(f64::INFINITY, f64::min);
    let need = ls.powf(alpha) * ll.powf(1.0 - alpha);
    Ok(Tagged {
        tag,
        child: Some(child.key),
        skeleton_gap: Some(gap / need),
    })
}

/// Whitney support facts for a small good square `s` inside the child `c` of `l`.
fn whitney_fact(s: &DyadicSquare, c: &DyadicSquare, l: &DyadicSquare, alpha: f64, cache: &mut HashMap<SquareKey, Vec<DyadicSquare>>) -> Option<bool> {
    let depth = s.level().saturating_sub(c.level()) + 2;
    let fam = cache
        .entry(c.key)
        .or_insert_with(|| whitney(c, depth.max(2)).map(|w| w.squares).unwrap_or_default());
    let xq = s.center();
    let w = fam.iter().find(|w| w.contains(xq))?;
    let expanded = w.dilate(2.0);
    let inside = expanded.contains_rect(&s.rect());
    let gap = expanded.inner_boundary_gap(&s.rect());
    let need = s.side().powf(alpha) * l.side().powf(1.0 - alpha);
    Some(inside && gap >= w.side() / 4.0 - 1e-15 && w.side() / 4.0 >= need)
}

/// Tags every pair of good transit squares and evaluates its term.
pub fn partition(kmat: &OperatorMatrix, mu: &PlanarMeasure, s1: &Side, s2: &Side, m: u32, alpha: f64) -> Result<BilinearPartition> {
    let qs: Vec<SquareKey> = s1.decomp.deltas.keys().filter(|k| s1.good.contains(k)).copied().collect();
    let rs: Vec<SquareKey> = s2.decomp.deltas.keys().filter(|k| s2.good.contains(k)).copied().collect();
    let rows: Vec<Result<(Vec<PairTerm>, usize, usize, usize)>> = qs
        .par_iter()
        .map(|qk| {
            let q = s1.square(qk);
            let pq = &s1.decomp.deltas[qk];
            let mut out = Vec::with_capacity(rs.len());
            let mut sk_bad = 0;
            let mut wh_bad = 0;
            let mut wh_skip = 0;
            let mut cache = HashMap::new();
            for rk in &rs {
                let r = s2.square(rk);
                let mirrored = q.side() > r.side();
                let t = if mirrored {
                    tag_pair(&r, &q, s1.class(), m, alpha)?
                } else {
                    tag_pair(&q, &r, s2.class(), m, alpha)?
                };
                if let Some(g) = t.skeleton_gap {
                    if g < 1.0 {
                        sk_bad += 1;
                    }
                }
                if let Some(ck) = t.child {
                    let (small, large, lat) = if mirrored { (&r, &q, s1) } else { (&q, &r, s2) };
                    let c = lat.square(&ck);
                    match whitney_fact(small, &c, large, alpha, &mut cache) {
                        Some(true) => {}
                        Some(false) => wh_bad += 1,
                        None => wh_skip += 1,
                    }
                }
                let pr = &s2.decomp.deltas[rk];
                let value = if pq.atoms.is_empty() || pr.atoms.is_empty() {
                    ZERO
                } else {
                    piece_form(kmat, mu, pq, pr)
                };
                out.push(PairTerm {
                    q: *qk,
                    r: *rk,
                    mirrored,
                    tag: t.tag,
                    child: t.child,
                    value,
                });
            }
            Ok((out, sk_bad, wh_bad, wh_skip))
        })
        .collect();
    let mut part = BilinearPartition::default();
    for row in rows {
        let (pairs, a, b, c) = row?;
        part.pairs.extend(pairs);
        part.skeleton_violations += a;
        part.whitney_violations += b;
        part.whitney_untested += c;
    }
    let mut counts: HashMap<(bool, SquareKey), usize> = HashMap::new();
    for p in part.pairs.iter().filter(|p| p.tag == Tag::Sigma1) {
        *counts.entry((false, p.q)).or_insert(0) += 1;
        *counts.entry((true, p.r)).or_insert(0) += 1;
    }
    part.max_sigma1_count = counts.values().copied().max().unwrap_or(0);
    Ok(part)
}

/// Far-interaction bound
/// `3^(1+e) A l(Q)^(e/2) l(R)^(e/2) / D^(1+e) sqrt(mu Q) sqrt(mu R) |f| |g|`.
pub fn far_interaction_bound(q: &DyadicSquare, r: &DyadicSquare, mu_q: f64, mu_r: f64, nf: f64, ng: f64, a_const: f64, eps: f64) -> f64 {
    let d = long_distance(q, r);
    3f64.powf(1.0 + eps) * a_const * (q.side() * r.side()).powf(eps / 2.0) / d.powf(1.0 + eps) * mu_q.sqrt() * mu_r.sqrt() * nf * ng
}

/// Checks the far-interaction inequality for `f` supported in `Q` with mean zero and `g`
/// supported in `R` at distance at least `l(Q)^alpha l(R)^(1-alpha)` from `Q`.
#[allow(clippy::too_many_arguments)]
pub fn far_interaction_verify(kmat: &OperatorMatrix, mu: &PlanarMeasure, q: &DyadicSquare, r: &DyadicSquare, f: &[Complex64], g: &[Complex64], a_const: f64, eps: f64) -> CheckReport {
    let name = "far_interaction";
    let n = mu.len() as u64;
    if q.side() > r.side() {
        return CheckReport::not_applicable(name, "l(Q) > l(R)", n, 0);
    }
    let alpha = eps / (2.0 * (1.0 + eps));
    let mu_q = mu.mass_where(|_, z| q.contains(z));
    let mu_r = mu.mass_where(|_, z| r.contains(z));
    let nf = l2_sqr(mu, f).sqrt();
    let ng = l2_sqr(mu, g).sqrt();
    for i in 0..mu.len() {
        if f[i] != ZERO && !q.contains(mu.z(i)) {
            return CheckReport::not_applicable(name, "f not supported in Q", n, 0);
        }
        if g[i] != ZERO && !r.contains(mu.z(i)) {
            return CheckReport::not_applicable(name, "g not supported in R", n, 0);
        }
    }
    let mean = ksum_c(f.iter().zip(mu.atoms()).map(|(v, a)| v * a.w));
    if mean.norm() > 1e-12 * nf * mu_q.sqrt().max(1e-300) {
        return CheckReport::not_applicable(name, "f has nonzero mean", n, 0);
    }
    let qr = q.rect();
    let sep = (0..mu.len())
        .filter(|&i| g[i] != ZERO)
        .map(|i| qr.dist_point(mu.z(i)))
        .fold(f64::INFINITY, f64::min);
    if sep < q.side().powf(alpha) * r.side().powf(1.0 - alpha) {
        return CheckReport::not_applicable(name, "supports too close", n, 0);
    }
    let lhs = bilinear_form(kmat, mu, f, g).norm();
    let bound = far_interaction_bound(q, r, mu_q, mu_r, nf, ng, a_const, eps);
    CheckReport::upper(name, lhs, bound * (1.0 + 1e-12), n, 0)
}

/// `sup over transit S and atoms y in S of sup_{r >= 2 l(S)} mu(B(y, r)) / r`.
pub fn transit_growth_constant(classes: &[&Classification], mu: &PlanarMeasure) -> f64 {
    let mut best = 0.0f64;
    for c in classes {
        for s in c.transit() {
            let r0 = 2.0 * s.square.side();
            for &i in &s.atoms {
                let y = mu.z(i);
                let d = mu.sorted_distances(y);
                let mut cum = 0.0;
                let mut k = 0;
                let mut v = ball_mass(mu, y, r0) / r0;
                while k < d.len() {
                    let dk = d[k].0;
                    while k < d.len() && d[k].0 == dk {
                        cum += d[k].1;
                        k += 1;
                    }
                    if dk >= r0 {
                        v = v.max(cum / dk);
                    }
                }
                best = best.max(v);
            }
        }
    }
    best
}

/// Result of the matrix check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TqrReport {
    pub m_verified: f64,
    pub constant: f64,
    /// Largest singular value of the nonnegative matrix (Perron value of `T^T T`).
    pub norm: f64,
    pub random: CheckReport,
    /// Per slice `n = log2(l(R)/l(Q))`: `(n, norm of slice, slice bound)`.
    pub slices: Vec<(u32, f64, f64)>,
    pub pass: bool,
}

fn nonneg_norm(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> f64 {
    if entries.is_empty() {
        return 0.0;
    }
    let mut v = vec![1.0f64; cols];
    let mut prev = 0.0;
    for _ in 0..10_000 {
        let mut u = vec![0.0; rows];
        for &(i, j, t) in entries {
            u[i] += t * v[j];
        }
        let mut w = vec![0.0; cols];
        for &(i, j, t) in entries {
            w[j] += t * u[i];
        }
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let lambda: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / vv;
        let wn: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if wn == 0.0 {
            return 0.0;
        }
        if (lambda - prev).abs() <= 1e-12 * lambda {
            return lambda.sqrt();
        }
        prev = lambda;
        v = w.into_iter().map(|x| x / wn).collect();
    }
    prev.sqrt()
}

/// Matrix lemma for `T_{Q,R} = l(Q)^(e/2) l(R)^(e/2) D^-(1+e) sqrt(mu Q) sqrt(mu R)` over
/// transit `Q` of the first and `R` of the second lattice with `l(Q) <= l(R)`.
#[allow(clippy::too_many_arguments)]
pub fn tqr_matrix_verify(c1: &Classification, c2: &Classification, mu: &PlanarMeasure, eps: f64, m_const: f64, a: &BTreeMap<SquareKey, f64>, b: &BTreeMap<SquareKey, f64>, seed: u64) -> Result<TqrReport> {
    if !(eps > 0.0 && eps <= 1.0) {
        return domain("eps must lie in (0,1]");
    }
    let m_verified = transit_growth_constant(&[c1, c2], mu);
    if m_verified > m_const * (1.0 + 1e-12) {
        return invalid(format!("transit growth constant {m_verified} exceeds M = {m_const}"));
    }
    let qs: Vec<_> = c1.transit().collect();
    let rs: Vec<_> = c2.transit().collect();
    let mut entries: Vec<(usize, usize, f64, u32)> = Vec::new();
    for (i, q) in qs.iter().enumerate() {
        for (j, r) in rs.iter().enumerate() {
            let (lq, lr) = (q.square.side(), r.square.side());
            if lq > lr {
                continue;
            }
            let d = long_distance(&q.square, &r.square);
            let t = (lq * lr).powf(eps / 2.0) / d.powf(1.0 + eps) * q.mass.sqrt() * r.mass.sqrt();
            let n = (lr / lq).log2().round() as u32;
            entries.push((i, j, t, n));
        }
    }
    let base = 3f64.powf(1.0 + eps) * (3.0 + 1.0 / eps) * m_const;
    let constant = base / (1.0 - 2f64.powf(-eps / 2.0));
    let flat: Vec<(usize, usize, f64)> = entries.iter().map(|e| (e.0, e.1, e.2)).collect();
    let norm = nonneg_norm(qs.len(), rs.len(), &flat);
    let mut slices = Vec::new();
    let max_n = entries.iter().map(|e| e.3).max().unwrap_or(0);
    for n in 0..=max_n {
        let sl: Vec<(usize, usize, f64)> = entries.iter().filter(|e| e.3 == n).map(|e| (e.0, e.1, e.2)).collect();
        if sl.is_empty() {
            continue;
        }
        slices.push((n, nonneg_norm(qs.len(), rs.len(), &sl), pow2(-(n as i32)).powf(eps / 2.0) * base));
    }
    let av: Vec<f64> = qs.iter().map(|q| a.get(&q.square.key).copied().unwrap_or(0.0)).collect();
    let bv: Vec<f64> = rs.iter().map(|r| b.get(&r.square.key).copied().unwrap_or(0.0)).collect();
    if av.iter().chain(&bv).any(|x| *x < 0.0) {
        return domain("coefficients must be nonnegative");
    }
    let lhs = ksum(entries.iter().map(|&(i, j, t, _)| t * av[i] * bv[j]));
    let na = ksum(av.iter().map(|x| x * x)).sqrt();
    let nb = ksum(bv.iter().map(|x| x * x)).sqrt();
    let random = CheckReport::upper("tqr_bilinear", lhs, constant * na * nb * (1.0 + 1e-12), entries.len() as u64, seed);
    let pass = random.passed() && norm <= constant && slices.iter().all(|s| s.1 <= s.2 * (1.0 + 1e-9));
    Ok(TqrReport {
        m_verified,
        constant,
        norm,
        random,
        slices,
        pass,
    })
}

/// Chain data for the third family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sigma3Coefficients {
    /// `(R, R_Q, c_{R,Q})` along the chain from the root down to (excluding) `R(Q)`.
    pub chain: Vec<(SquareKey, SquareKey, Complex64)>,
    pub r_of_q: SquareKey,
    pub telescoped: Complex64,
    /// `<psi>_{R(Q)} / <h>_{R(Q)}`.
    pub direct: Complex64,
    /// Largest `|Delta_R psi - c h|` on the atoms of `R_Q` along the chain.
    pub restriction_residual: f64,
}

/// `R(Q)`: the deepest transit square of the second lattice containing `Q` with
/// `l(R) >= 2^m l(Q)`; `None` when even the root is too small.
pub fn r_of_q(class2: &Classification, q: &Rect, m: u32) -> Option<Vec<SquareKey>> {
    let lq = q.x1 - q.x0;
    let root = class2.lattice.root;
    if root.side() < pow2(m as i32) * lq || !root.rect().contains_rect(q) {
        return None;
    }
    let mut chain = vec![root.key];
    let mut cur = root;
    loop {
        let Some(c) = cur.children().into_iter().find(|c| c.rect().contains_rect(q)) else {
            break;
        };
        if c.side() < pow2(m as i32) * lq || !class2.is_transit(&c.key) {
            break;
        }
        chain.push(c.key);
        cur = c;
    }
    Some(chain)
}

pub fn sigma3_coefficients(proj2: &Projections, decomp_psi: &MartingaleDecomposition, psi: &[Complex64], q: &Rect, m: u32) -> Option<Sigma3Coefficients> {
    let chain = r_of_q(proj2.class, q, m)?;
    let mut out = Vec::new();
    let mut residual = 0.0f64;
    for w in chain.windows(2) {
        let (r, rq) = (w[0], w[1]);
        let c = proj2.restriction_constant(&r, &rq, psi);
        if let (Some(piece), Some(node)) = (decomp_psi.deltas.get(&r), proj2.class.node(&rq)) {
            let lookup: HashMap<usize, Complex64> = piece.atoms.iter().copied().zip(piece.values.iter().copied()).collect();
            for &i in &node.atoms {
                let v = lookup.get(&i).copied().unwrap_or(ZERO);
                residual = residual.max((v - c * proj2.h[i]).norm());
            }
        }
        out.push((r, rq, c));
    }
    let last = *chain.last().expect("nonempty chain");
    let telescoped = ksum_c(out.iter().map(|t| t.2));
    Some(Sigma3Coefficients {
        chain: out,
        r_of_q: last,
        telescoped,
        direct: proj2.coefficient(&last, psi),
        restriction_residual: residual,
    })
}

/// Carleson numbers `a_R = sum over Q in F(R) of |<Delta_Q phi, K h>|^2 / |Delta_Q phi|^2`
/// with `F(R) = {Q good : R(Q) = R}`, checked against `2 |chi_S K h|^2` and `2 B^2 mu(S)`
/// for every transit `S` of the second lattice.
pub fn sigma3_carleson_numbers(mu: &PlanarMeasure, s1: &Side, class2: &Classification, kh: &[Complex64], m: u32) -> CheckReport {
    let b = kh.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut a: BTreeMap<SquareKey, Vec<f64>> = BTreeMap::new();
    let mut assigned = 0usize;
    let mut members = 0usize;
    for (qk, piece) in &s1.decomp.deltas {
        if !s1.good.contains(qk) {
            continue;
        }
        let n2 = piece.norm_sqr(mu);
        if n2 == 0.0 {
            continue;
        }
        let q = s1.square(qk).rect();
        let Some(chain) = r_of_q(class2, &q, m) else {
            continue;
        };
        let r = *chain.last().expect("nonempty");
        let pair = ksum_c(piece.atoms.iter().zip(&piece.values).map(|(&i, v)| v * mu.w(i) * kh[i]));
        a.entry(r).or_default().push(pair.norm_sqr() / n2);
        assigned += 1;
    }
    let a: BTreeMap<SquareKey, f64> = a
        .into_iter()
        .map(|(k, v)| {
            members += v.len();
            (k, ksum(v))
        })
        .collect();
    let mut worst = 0.0f64;
    let mut pass = members == assigned;
    for s in class2.transit() {
        let sk = s.square.key;
        let lhs = ksum(a.iter().filter(|(k, _)| k.is_within(&sk)).map(|(_, v)| *v));
        let local = 2.0 * ksum(s.atoms.iter().map(|&i| kh[i].norm_sqr() * mu.w(i)));
        let global = 2.0 * b * b * s.mass;
        if lhs > local * (1.0 + 1e-10) + 1e-300 || local > global * (1.0 + 1e-12) {
            pass = false;
        }
        if local > 0.0 {
            worst = worst.max(lhs / local);
        }
    }
    CheckReport::verdict("sigma3_carleson", worst, 1.0, pass, assigned as u64, 0).with_note(format!("B = {b}"))
}

/// Checks `|<eta1, K eta2>| <= 4 M |eta1| |eta2|` for functions on the two sides of the
/// boundary of `rect`, with `M` its measured negligibility constant.
pub fn schur_separated_check(kmat: &OperatorMatrix, mu: &PlanarMeasure, rect: &Rect, eta1: &[Complex64], eta2: &[Complex64]) -> CheckReport {
    let name = "negligible_schur";
    let n = mu.len() as u64;
    let big_m = rect_negligibility(mu, rect);
    if !big_m.is_finite() {
        return CheckReport::not_applicable(name, "atom on the contour", n, 0);
    }
    for i in 0..mu.len() {
        let inside = rect.contains_closed(mu.z(i));
        if (eta1[i] != ZERO && inside) || (eta2[i] != ZERO && !inside) {
            return CheckReport::not_applicable(name, "supports not separated", n, 0);
        }
    }
    let lhs = bilinear_form(kmat, mu, eta1, eta2).norm();
    let bound = 4.0 * big_m * l2_sqr(mu, eta1).sqrt() * l2_sqr(mu, eta2).sqrt();
    CheckReport::upper(name, lhs, bound * (1.0 + 1e-12), n, 0)
}

/// Outcome of the child-pair split of one comparable pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplitReport {
    pub tilde_m: f64,
    /// Largest `|term| / bound` over the two separated terms of all child pairs.
    pub separated_ratio: f64,
    /// Largest `|term| / bound` over overlaps with a terminal child in the envelope.
    pub terminal_ratio: f64,
    /// Largest `|term|` over transit/transit overlaps.
    pub cancellation: f64,
    /// Overlaps that could not be bounded (terminal kind outside the envelope).
    pub unbounded_overlaps: usize,
    pub pass: bool,
}

/// Three-way split of `<Delta_Q phi, K Delta_R psi>` over the children `Q_i`, `R_j`.
/// Requires every child boundary to be negligible; the measured constant is used.
/// Terminal overlaps are bounded with `4 M / delta`, which presumes `theta >= delta dist(., boundary)`
/// on those children.
pub fn negligible_split_verify(kmat: &OperatorMatrix, mu: &PlanarMeasure, s1: &Side, s2: &Side, q: &SquareKey, r: &SquareKey, tilde_m_limit: f64, delta: f64) -> Option<SplitReport> {
    let pq = s1.decomp.deltas.get(q)?;
    let pr = s2.decomp.deltas.get(r)?;
    let qc = s1.square(q).children();
    let rc = s2.square(r).children();
    let mut tilde_m = 0.0f64;
    for c in qc.iter().chain(rc.iter()) {
        tilde_m = tilde_m.max(rect_negligibility(mu, &c.rect()));
    }
    if !(tilde_m <= tilde_m_limit) {
        return None;
    }
    let norm = |p: &Piece| p.norm_sqr(mu).sqrt();
    let mut sep = 0.0f64;
    let mut term = 0.0f64;
    let mut cancel = 0.0f64;
    let mut unbounded = 0usize;
    let mut pass = true;
    for qi in &qc {
        let phi_i = restrict(pq, |a| qi.contains(mu.z(a)));
        for rj in &rc {
            let psi_j = restrict(pr, |a| rj.contains(mu.z(a)));
            if phi_i.atoms.is_empty() || psi_j.atoms.is_empty() {
                continue;
            }
            let in_both = |a: usize| qi.contains(mu.z(a)) && rj.contains(mu.z(a));
            let e1 = restrict(&phi_i, |a| !rj.contains(mu.z(a)));
            let t1 = piece_form(kmat, mu, &e1, &psi_j).norm();
            let b1 = 4.0 * tilde_m * norm(&e1) * norm(&psi_j);
            let e2a = restrict(&phi_i, in_both);
            let e2b = restrict(&psi_j, |a| !qi.contains(mu.z(a)));
            let t2 = piece_form(kmat, mu, &e2a, &e2b).norm();
            let b2 = 4.0 * tilde_m * norm(&e2a) * norm(&e2b);
            for (t, b) in [(t1, b1), (t2, b2)] {
                if t > b * (1.0 + 1e-12) + 1e-300 {
                    pass = false;
                }
                if b > 0.0 {
                    sep = sep.max(t / b);
                }
            }
            let e3b = restrict(&psi_j, in_both);
            if e2a.atoms.is_empty() || e3b.atoms.is_empty() {
                continue;
            }
            let t3 = piece_form(kmat, mu, &e2a, &e3b).norm();
            let sq = s1.proj.class.status(&qi.key);
            let sr = s2.proj.class.status(&rj.key);
            let envelope_kind = |s: Option<Status>| {
                matches!(
                    s,
                    Some(Status::Terminal(TerminalKind::InsideH | TerminalKind::ZeroMass | TerminalKind::HighEnergy))
                )
            };
            let isolated = |s: Option<Status>| matches!(s, Some(Status::Terminal(TerminalKind::AtomIsolated)));
            if sq == Some(Status::Transit) && sr == Some(Status::Transit) {
                cancel = cancel.max(t3);
                if t3 > 1e-10 {
                    pass = false;
                }
            } else if isolated(sq) || isolated(sr) {
                if t3 != 0.0 {
                    pass = false;
                }
            } else if envelope_kind(sq) || envelope_kind(sr) {
                let b3 = 4.0 * tilde_m / delta * norm(&e2a) * norm(&e3b);
                if t3 > b3 * (1.0 + 1e-12) {
                    pass = false;
                }
                if b3 > 0.0 {
                    term = term.max(t3 / b3);
                }
            } else {
                unbounded += 1;
            }
        }
    }
    Some(SplitReport {
        tilde_m,
        separated_ratio: sep,
        terminal_ratio: term,
        cancellation: cancel,
        unbounded_overlaps: unbounded,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::badness::straddles_grid;
    use crate::geometry::{pt, sample_lattice, DyadicLattice};
    use crate::martingale::classify;
    use crate::measure::{generate, DiskSet, Generator};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ONE: Complex64 = Complex64::new(1.0, 0.0);

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn zero_lattice() -> DyadicLattice {
        DyadicLattice::with_shift(pt(0.0, 0.0), 0)
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    fn cantor() -> PlanarMeasure {
        generate(&Generator::CantorCorner { level: 4 })
            .unwrap()
            .normalized(0.2)
            .0
    }

    /// Two atoms in different children of the root: only the root is transit.
    fn two_atoms() -> PlanarMeasure {
        PlanarMeasure::from_points(&[pt(-0.25, -0.25), pt(0.25, 0.25)], &[0.5, 0.5]).unwrap()
    }

    #[test]
    fn bilinear_form_examples() {
        let pair = PlanarMeasure::from_points(&[pt(-1.0, 0.0), pt(1.0, 0.0)], &[1.0, 1.0]).unwrap();
        let k = OperatorMatrix::cauchy(&pair);
        assert_eq!(bilinear_form(&k, &pair, &[ONE, c(0.0)], &[c(0.0), ONE]), c(-0.5));
        let one = PlanarMeasure::from_points(&[pt(0.1, 0.1)], &[1.0]).unwrap();
        assert_eq!(bilinear_form(&OperatorMatrix::cauchy(&one), &one, &[ONE], &[ONE]), c(0.0));
        let mu = cantor();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let theta = crate::kernel::random_envelope(&mut rng, 3).values(&mu);
        let k = OperatorMatrix::suppressed(&mu, &theta).unwrap();
        let f: Vec<Complex64> = (0..mu.len()).map(|_| c(rng.random::<f64>() - 0.5)).collect();
        assert!(bilinear_form(&k, &mu, &f, &f).norm() < 1e-12);
    }

    #[test]
    fn piece_form_matches_dense_form() {
        let mu = cantor();
        let k = OperatorMatrix::cauchy(&mu);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = random_vec(&mut rng, mu.len());
        let p = Piece {
            key: SquareKey::new(0, 0, 0),
            atoms: (0..mu.len()).filter(|i| i % 3 == 0).collect(),
            values: (0..mu.len()).filter(|i| i % 3 == 0).map(|i| v[i]).collect(),
        };
        let q = restrict(&p, |i| i % 2 == 0);
        let dense = bilinear_form(&k, &mu, &p.to_dense(mu.len()), &q.to_dense(mu.len()));
        assert!((piece_form(&k, &mu, &p, &q) - dense).norm() < 1e-12);
    }

    #[test]
    fn root_only_partition_is_sigma1() {
        let mu = two_atoms();
        let l = zero_lattice();
        let class = classify(&l, &mu, &[c(0.0); 2], 0.1, &DiskSet::empty(), 10).unwrap();
        assert_eq!(class.transit().count(), 1);
        let h = [ONE; 2];
        let proj = Projections::new(&class, &mu, &h).unwrap();
        let phi = [c(1.0), c(-1.0)];
        let psi = [Complex64::new(0.0, 2.0), Complex64::new(0.0, -2.0)];
        let d1 = proj.decompose(&phi);
        let d2 = proj.decompose(&psi);
        let good: BTreeSet<SquareKey> = [l.root.key].into_iter().collect();
        let s1 = Side { proj: &proj, decomp: &d1, good: &good };
        let s2 = Side { proj: &proj, decomp: &d2, good: &good };
        let k = OperatorMatrix::cauchy(&mu);
        let part = partition(&k, &mu, &s1, &s2, 2, 0.25).unwrap();
        assert_eq!(part.pairs.len(), 1);
        assert_eq!(part.pairs[0].tag, Tag::Sigma1);
        assert!((part.total() - bilinear_form(&k, &mu, &phi, &psi)).norm() < 1e-14);
    }

    #[test]
    fn tags_of_planted_pairs() {
        let mu = cantor();
        let l = zero_lattice();
        let class = classify(&l, &mu, &vec![c(0.0); mu.len()], 0.1, &DiskSet::empty(), 12).unwrap();
        let a = l.square(SquareKey::new(2, 0, 0));
        let b = l.square(SquareKey::new(2, 3, 0));
        assert_eq!(tag_pair(&a, &b, &class, 2, 0.25).unwrap().tag, Tag::Sigma2);
        let near = l.square(SquareKey::new(2, 1, 0));
        assert_eq!(tag_pair(&a, &near, &class, 2, 0.25).unwrap().tag, Tag::Sigma1);

        let tiny = l.locate(9, pt(-0.3, -0.3));
        let t = tag_pair(&tiny, &l.root, &class, 2, 0.25).unwrap();
        let child = l.root.child(1).unwrap();
        assert_eq!(t.child, Some(child.key));
        let expect = if class.is_transit(&child.key) { Tag::Sigma3Tr } else { Tag::Sigma3Term };
        assert_eq!(t.tag, expect);
    }

    #[test]
    fn partition_is_complete_on_random_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mu = cantor();
        let n = mu.len();
        let delta = 0.1;
        let raw = random_vec(&mut rng, n);
        let mean = ksum_c(raw.iter().zip(mu.atoms()).map(|(v, a)| v * a.w));
        let g: Vec<Complex64> = raw.iter().map(|v| (v - mean) * 0.08).collect();
        let h: Vec<Complex64> = g.iter().map(|v| ONE + v).collect();
        let (l1, l2) = (sample_lattice(5), sample_lattice(6));
        let c1 = classify(&l1, &mu, &g, delta, &DiskSet::empty(), 10).unwrap();
        let c2 = classify(&l2, &mu, &g, delta, &DiskSet::empty(), 10).unwrap();
        let p1 = Projections::new(&c1, &mu, &h).unwrap();
        let p2 = Projections::new(&c2, &mu, &h).unwrap();
        let phi = random_vec(&mut rng, n);
        let psi = random_vec(&mut rng, n);
        let d1 = p1.decompose(&phi);
        let d2 = p2.decompose(&psi);
        let m = 2;
        let good = |cl: &Classification, other: &DyadicLattice| -> BTreeSet<SquareKey> {
            cl.transit()
                .filter(|q| !straddles_grid(&q.square.rect(), other, m))
                .map(|q| q.square.key)
                .collect()
        };
        let (g1, g2) = (good(&c1, &l2), good(&c2, &l1));
        let s1 = Side { proj: &p1, decomp: &d1, good: &g1 };
        let s2 = Side { proj: &p2, decomp: &d2, good: &g2 };
        let theta = crate::kernel::random_envelope(&mut rng, 3).values(&mu);
        let k = OperatorMatrix::suppressed(&mu, &theta).unwrap();
        let part = partition(&k, &mu, &s1, &s2, m, 0.25).unwrap();
        assert_eq!(part.pairs.len(), g1.len() * g2.len());
        let sum = |d: &MartingaleDecomposition, good: &BTreeSet<SquareKey>| {
            crate::martingale::split_good_bad(d, n, |key| !good.contains(key)).0
        };
        let mut f = sum(&d1, &g1);
        let mut gg = sum(&d2, &g2);
        for (v, l) in f.iter_mut().zip(&d1.lambda_part) {
            *v -= l;
        }
        for (v, l) in gg.iter_mut().zip(&d2.lambda_part) {
            *v -= l;
        }
        let direct = bilinear_form(&k, &mu, &f, &gg);
        let scale = part.pairs.iter().map(|p| p.value.norm()).sum::<f64>().max(direct.norm());
        assert!((part.total() - direct).norm() <= 1e-8 * scale);
        assert!(part.max_sigma1_count as f64 <= sigma1_count_bound(m));
        let tags = part.count_by_tag();
        assert_eq!(tags.values().sum::<usize>(), part.pairs.len());
    }

    #[test]
    fn sigma1_bound_values() {
        assert_eq!(sigma1_count_bound(0), 25.0);
        assert_eq!(sigma1_count_bound(1), 4.0 * 81.0 * 3.0);
    }

    #[test]
    fn far_interaction_examples() {
        let mu = cantor();
        let l = zero_lattice();
        let k = OperatorMatrix::cauchy(&mu);
        let n = mu.len();
        let q = l.locate(4, mu.z(0));
        let r = l.locate(2, mu.z(n - 1));
        let zero = vec![c(0.0); n];
        let mut g = zero.clone();
        for i in 0..n {
            if r.contains(mu.z(i)) {
                g[i] = ONE;
            }
        }
        let rep = far_interaction_verify(&k, &mu, &q, &r, &zero, &g, 16.0, 1.0);
        assert_eq!(rep.observed, 0.0);
        assert!(rep.passed());

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut applicable = 0;
        for _ in 0..400 {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            let q = l.locate(rng.random_range(3..7), mu.z(i));
            let r = l.locate(rng.random_range(1..=q.level()), mu.z(j));
            let inq: Vec<usize> = (0..n).filter(|&a| q.contains(mu.z(a))).collect();
            if inq.len() < 2 {
                continue;
            }
            let mut f = zero.clone();
            let vals = random_vec(&mut rng, inq.len());
            let mean = ksum_c(inq.iter().zip(&vals).map(|(&a, v)| v * mu.w(a))) / ksum(inq.iter().map(|&a| mu.w(a)));
            for (&a, v) in inq.iter().zip(&vals) {
                f[a] = v - mean;
            }
            let mut g = zero.clone();
            for a in 0..n {
                if r.contains(mu.z(a)) {
                    g[a] = Complex64::new(rng.random::<f64>(), rng.random::<f64>());
                }
            }
            let rep = far_interaction_verify(&k, &mu, &q, &r, &f, &g, 16.0, 1.0);
            if rep.is_applicable() {
                applicable += 1;
                assert!(rep.passed(), "{} > {:?}", rep.observed, rep.bound);
            }
        }
        assert!(applicable > 20, "{applicable}");
    }

    #[test]
    fn tqr_examples() {
        let mu = two_atoms();
        let l = zero_lattice();
        let class = classify(&l, &mu, &[c(0.0); 2], 0.1, &DiskSet::empty(), 10).unwrap();
        let mv = transit_growth_constant(&[&class], &mu);
        assert!(mv > 0.0);
        let root = l.root.key;
        let one: BTreeMap<SquareKey, f64> = [(root, 1.0)].into_iter().collect();
        let rep = tqr_matrix_verify(&class, &class, &mu, 1.0, mv, &one, &one, 0).unwrap();
        assert!((rep.random.observed - 0.25 * mu.total()).abs() < 1e-15);
        assert!(rep.pass);
        let none = BTreeMap::new();
        let rep = tqr_matrix_verify(&class, &class, &mu, 1.0, mv, &none, &none, 0).unwrap();
        assert_eq!(rep.random.observed, 0.0);
        assert!(tqr_matrix_verify(&class, &class, &mu, 1.0, mv * 0.9, &one, &one, 0).is_err());
        assert!(tqr_matrix_verify(&class, &class, &mu, 0.0, mv, &one, &one, 0).is_err());

        let mu = cantor();
        let (l1, l2) = (sample_lattice(8), sample_lattice(9));
        let zero = vec![c(0.0); mu.len()];
        let c1 = classify(&l1, &mu, &zero, 0.1, &DiskSet::empty(), 10).unwrap();
        let c2 = classify(&l2, &mu, &zero, 0.1, &DiskSet::empty(), 10).unwrap();
        let mv = transit_growth_constant(&[&c1, &c2], &mu);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a: BTreeMap<SquareKey, f64> = c1.transit().map(|q| (q.square.key, rng.random::<f64>())).collect();
        let b: BTreeMap<SquareKey, f64> = c2.transit().map(|q| (q.square.key, rng.random::<f64>())).collect();
        let rep = tqr_matrix_verify(&c1, &c2, &mu, 1.0, mv, &a, &b, 10).unwrap();
        assert!(rep.pass);
        assert!(rep.norm <= rep.constant);
    }

    #[test]
    fn sigma3_coefficients_hand_oracle() {
        let mu = PlanarMeasure::from_points(
            &[pt(-0.4, -0.4), pt(-0.1, -0.1), pt(0.1, 0.1), pt(0.4, 0.4)],
            &[1.0, 1.0, 2.0, 1.0],
        )
        .unwrap();
        let l = zero_lattice();
        let class = classify(&l, &mu, &[c(0.0); 4], 0.1, &DiskSet::empty(), 10).unwrap();
        let h = [ONE; 4];
        let proj = Projections::new(&class, &mu, &h).unwrap();
        let psi = [c(1.0), c(3.0), c(-2.0), c(0.0)];
        let d = proj.decompose(&psi);
        let q = l.locate(6, pt(-0.4, -0.4)).rect();
        let s = sigma3_coefficients(&proj, &d, &psi, &q, 1).unwrap();
        let child = l.root.child(1).unwrap().key;
        assert_eq!(s.r_of_q, child);
        assert_eq!(s.chain.len(), 1);
        assert!((s.chain[0].2 - c(2.0)).norm() < 1e-15);
        assert!((s.telescoped - s.direct).norm() < 1e-15);
        assert!(s.restriction_residual < 1e-15);

        let flat = [c(5.0); 4];
        let lam = proj.lambda_apply(&flat);
        let rest: Vec<Complex64> = flat.iter().zip(&lam).map(|(a, b)| a - b).collect();
        let d = proj.decompose(&rest);
        let s = sigma3_coefficients(&proj, &d, &rest, &q, 1).unwrap();
        assert!(s.chain.iter().all(|t| t.2.norm() < 1e-14));
    }

    #[test]
    fn sigma3_telescoping_on_random_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mu = cantor();
        let n = mu.len();
        let raw = random_vec(&mut rng, n);
        let mean = ksum_c(raw.iter().zip(mu.atoms()).map(|(v, a)| v * a.w));
        let g: Vec<Complex64> = raw.iter().map(|v| (v - mean) * 0.05).collect();
        let h: Vec<Complex64> = g.iter().map(|v| ONE + v).collect();
        let l2 = sample_lattice(12);
        let class = classify(&l2, &mu, &g, 0.1, &DiskSet::empty(), 10).unwrap();
        let proj = Projections::new(&class, &mu, &h).unwrap();
        let psi0 = random_vec(&mut rng, n);
        let lam = proj.lambda_apply(&psi0);
        let psi: Vec<Complex64> = psi0.iter().zip(&lam).map(|(a, b)| a - b).collect();
        let d = proj.decompose(&psi);
        let l1 = sample_lattice(13);
        let mut tested = 0;
        for i in 0..n {
            let q = l1.locate(7, mu.z(i)).rect();
            if let Some(s) = sigma3_coefficients(&proj, &d, &psi, &q, 2) {
                tested += 1;
                assert!((s.telescoped - s.direct).norm() <= 1e-10 * (1.0 + s.direct.norm()));
                assert!(s.restriction_residual <= 1e-12);
            }
        }
        assert!(tested > 0);
    }

    #[test]
    fn sigma3_carleson_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mu = cantor();
        let n = mu.len();
        let zero = vec![c(0.0); n];
        let h = vec![ONE; n];
        let (l1, l2) = (sample_lattice(15), sample_lattice(16));
        let c1 = classify(&l1, &mu, &zero, 0.1, &DiskSet::empty(), 10).unwrap();
        let c2 = classify(&l2, &mu, &zero, 0.1, &DiskSet::empty(), 10).unwrap();
        let p1 = Projections::new(&c1, &mu, &h).unwrap();
        let theta = crate::kernel::random_envelope(&mut rng, 3).values(&mu);
        let k = OperatorMatrix::suppressed(&mu, &theta).unwrap();
        let kh = k.apply(&h);
        let good: BTreeSet<SquareKey> = c1.transit().map(|q| q.square.key).collect();

        let d0 = p1.decompose(&zero);
        let s = Side { proj: &p1, decomp: &d0, good: &good };
        let rep = sigma3_carleson_numbers(&mu, &s, &c2, &kh, 2);
        assert!(rep.passed());
        assert_eq!(rep.observed, 0.0);

        let phi = random_vec(&mut rng, n);
        let d = p1.decompose(&phi);
        let s = Side { proj: &p1, decomp: &d, good: &good };
        let rep = sigma3_carleson_numbers(&mu, &s, &c2, &kh, 2);
        assert!(rep.passed(), "{}", rep.observed);
        assert!(rep.samples > 0);
    }

    #[test]
    fn schur_examples() {
        let mu = PlanarMeasure::from_points(
            &[pt(-0.3, 0.0), pt(-0.2, 0.1), pt(0.2, 0.0), pt(0.3, -0.1)],
            &[0.25; 4],
        )
        .unwrap();
        let rect = Rect::new(0.0, 0.5, -0.25, 0.25);
        let k = OperatorMatrix::cauchy(&mu);
        let e1 = [ONE, c(-1.0), c(0.0), c(0.0)];
        let e2 = [c(0.0), c(0.0), c(2.0), Complex64::new(0.0, 1.0)];
        let rep = schur_separated_check(&k, &mu, &rect, &e1, &e2);
        assert!(rep.passed(), "{} vs {:?}", rep.observed, rep.bound);
        let bad = schur_separated_check(&k, &mu, &rect, &e2, &e1);
        assert!(!bad.is_applicable());
        let on = Rect::new(0.2, 0.5, -0.25, 0.25);
        assert!(!schur_separated_check(&k, &mu, &on, &e1, &e2).is_applicable());
    }

    #[test]
    fn negligible_split_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mu = cantor();
        let n = mu.len();
        let zero = vec![c(0.0); n];
        let h = vec![ONE; n];
        let (l1, l2) = (sample_lattice(18), sample_lattice(19));
        let c1 = classify(&l1, &mu, &zero, 0.1, &DiskSet::empty(), 10).unwrap();
        let c2 = classify(&l2, &mu, &zero, 0.1, &DiskSet::empty(), 10).unwrap();
        let p1 = Projections::new(&c1, &mu, &h).unwrap();
        let p2 = Projections::new(&c2, &mu, &h).unwrap();
        let d1 = p1.decompose(&random_vec(&mut rng, n));
        let d2 = p2.decompose(&random_vec(&mut rng, n));
        let all1: BTreeSet<SquareKey> = c1.transit().map(|q| q.square.key).collect();
        let all2: BTreeSet<SquareKey> = c2.transit().map(|q| q.square.key).collect();
        let s1 = Side { proj: &p1, decomp: &d1, good: &all1 };
        let s2 = Side { proj: &p2, decomp: &d2, good: &all2 };
        let k = OperatorMatrix::cauchy(&mu);
        let mut done = 0;
        for q in &all1 {
            for r in &all2 {
                if q.level != r.level {
                    continue;
                }
                if let Some(rep) = negligible_split_verify(&k, &mu, &s1, &s2, q, r, 1e6, 0.1) {
                    done += 1;
                    assert!(rep.pass, "{q} {r}: {rep:?}");
                    assert!(rep.cancellation <= 1e-10);
                }
            }
        }
        assert!(done > 0);
    }
}
