//! Discrete planar measures, disk unions, Ahlfors geometry and maximal functions.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::{pt, Contour, Point};
use crate::numeric::ksum;
use crate::report::CheckReport;

/// A point mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub z: Point,
    pub w: f64,
}

/// Finite weighted atom cloud with pairwise distinct locations.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarMeasure {
    atoms: Vec<Atom>,
    total: f64,
}

/// Complex values aligned with the atoms of a measure (`b`, `h`, `g`, `phi`, ...).
pub type ComplexDensity = Vec<Complex64>;

impl PlanarMeasure {
    /// Validates positivity, finiteness and distinctness.
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        for (i, a) in atoms.iter().enumerate() {
            if !(a.w > 0.0) || !a.w.is_finite() {
                return domain(format!("atom {i} has non-positive or non-finite mass {}", a.w));
            }
            if !a.z.re.is_finite() || !a.z.im.is_finite() {
                return domain(format!("atom {i} has a non-finite location"));
            }
        }
        let mut order: Vec<usize> = (0..atoms.len()).collect();
        order.sort_by(|&i, &j| {
            let (a, b) = (atoms[i].z, atoms[j].z);
            a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
        });
        for w in order.windows(2) {
            if atoms[w[0]].z == atoms[w[1]].z {
                return domain(format!("atoms {} and {} coincide", w[0], w[1]));
            }
        }
        let total = ksum(atoms.iter().map(|a| a.w));
        Ok(PlanarMeasure { atoms, total })
    }

    pub fn empty() -> Self {
        PlanarMeasure {
            atoms: vec![],
            total: 0.0,
        }
    }

    pub fn from_points(points: &[Point], weights: &[f64]) -> Result<Self> {
        if points.len() != weights.len() {
            return domain("points and weights differ in length");
        }
        PlanarMeasure::new(
            points
                .iter()
                .zip(weights)
                .map(|(&z, &w)| Atom { z, w })
                .collect(),
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn z(&self, i: usize) -> Point {
        self.atoms[i].z
    }

    pub fn w(&self, i: usize) -> f64 {
        self.atoms[i].w
    }

    pub fn points(&self) -> Vec<Point> {
        self.atoms.iter().map(|a| a.z).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.w).collect()
    }

    /// Mass of atoms satisfying a predicate.
    pub fn mass_where(&self, mut pred: impl FnMut(usize, Point) -> bool) -> f64 {
        ksum(
            self.atoms
                .iter()
                .enumerate()
                .filter(|(i, a)| pred(*i, a.z))
                .map(|(_, a)| a.w),
        )
    }

    /// Restriction to the atoms with the given indices.
    pub fn restrict(&self, idx: &[usize]) -> PlanarMeasure {
        let atoms: Vec<Atom> = idx.iter().map(|&i| self.atoms[i]).collect();
        let total = ksum(atoms.iter().map(|a| a.w));
        PlanarMeasure { atoms, total }
    }

    /// Image under `z -> a z + b` with masses multiplied by `c`.
    pub fn affine(&self, a: f64, b: Point, c: f64) -> PlanarMeasure {
        let atoms: Vec<Atom> = self
            .atoms
            .iter()
            .map(|x| Atom {
                z: x.z * a + b,
                w: x.w * c,
            })
            .collect();
        let total = ksum(atoms.iter().map(|x| x.w));
        PlanarMeasure { atoms, total }
    }

    /// Bounding disk (centre of the bounding box, max distance to it).
    pub fn bounding_disk(&self) -> (Point, f64) {
        if self.atoms.is_empty() {
            return (pt(0.0, 0.0), 0.0);
        }
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for a in &self.atoms {
            x0 = x0.min(a.z.re);
            x1 = x1.max(a.z.re);
            y0 = y0.min(a.z.im);
            y1 = y1.max(a.z.im);
        }
        let c = pt(0.5 * (x0 + x1), 0.5 * (y0 + y1));
        let r = self.atoms.iter().map(|a| (a.z - c).norm()).fold(0.0, f64::max);
        (c, r)
    }

    /// Rescales so that the total mass is 1 and the support lies in the closed disk
    /// `B(0, radius)`. Returns the normalized measure with the applied `(scale, centre, mass)`.
    pub fn normalized(&self, radius: f64) -> (PlanarMeasure, Normalization) {
        let (c, r) = self.bounding_disk();
        let scale = if r > 0.0 { radius / r } else { 1.0 };
        let mass = if self.total > 0.0 { 1.0 / self.total } else { 1.0 };
        let out = self.affine(scale, -c * scale, mass);
        (
            out,
            Normalization {
                scale,
                centre: c,
                mass_factor: mass,
            },
        )
    }

    /// Largest distance from an atom to its nearest neighbour (zero with fewer than two atoms).
    pub fn max_nearest_distance(&self) -> f64 {
        let n = self.atoms.len();
        if n < 2 {
            return 0.0;
        }
        (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (self.atoms[j].z - self.atoms[i].z).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Distances from `x` to every atom, sorted increasingly, paired with masses.
    pub fn sorted_distances(&self, x: Point) -> Vec<(f64, f64, usize)> {
        let mut d: Vec<(f64, f64, usize)> = self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| ((a.z - x).norm(), a.w, i))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        d
    }
}

/// Record of the affine normalization applied on ingestion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub scale: f64,
    pub centre: Point,
    pub mass_factor: f64,
}

/// Scenario generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    /// Four-corner Cantor construction in the unit square, `4^level` atoms at the centres
    /// of the level-`level` squares.
    CantorCorner { level: u32 },
    /// `n` equal atoms at the midpoints of `n` equal sub-segments, total mass = length.
    Segment { a: Point, b: Point, n: usize },
    /// `n` equal atoms at the angular midpoints of an arc, total mass = length.
    Arc {
        center: Point,
        radius: f64,
        start: f64,
        span: f64,
        n: usize,
    },
    /// `n` atoms uniform in `[-1/2, 1/2)^2` with masses uniform in `[0.5, 1.5] / n`.
    RandomCloud { seed: u64, n: usize },
}

/// Builds a measure from a generator.
pub fn generate(g: &Generator) -> Result<PlanarMeasure> {
    match *g {
        Generator::CantorCorner { level } => {
            if level < 1 {
                return domain("cantor level must be >= 1");
            }
            let mut corners = vec![(0.0f64, 0.0f64)];
            let mut side = 1.0f64;
            for _ in 0..level {
                let child = side / 4.0;
                let off = side - child;
                let mut next = Vec::with_capacity(corners.len() * 4);
                for &(x, y) in &corners {
                    for (dx, dy) in [(0.0, 0.0), (off, 0.0), (0.0, off), (off, off)] {
                        next.push((x + dx, y + dy));
                    }
                }
                corners = next;
                side = child;
            }
            let w = 0.25f64.powi(level as i32);
            PlanarMeasure::new(
                corners
                    .into_iter()
                    .map(|(x, y)| Atom {
                        z: pt(x + side / 2.0, y + side / 2.0),
                        w,
                    })
                    .collect(),
            )
        }
        Generator::Segment { a, b, n } => {
            if n < 1 {
                return domain("segment needs n >= 1");
            }
            let len = (b - a).norm();
            let w = len / n as f64;
            PlanarMeasure::new(
                (0..n)
                    .map(|k| Atom {
                        z: a + (b - a) * ((k as f64 + 0.5) / n as f64),
                        w,
                    })
                    .collect(),
            )
        }
        Generator::Arc {
            center,
            radius,
            start,
            span,
            n,
        } => {
            if n < 1 {
                return domain("arc needs n >= 1");
            }
            if !(radius > 0.0) {
                return domain("arc radius must be positive");
            }
            let w = radius * span.abs() / n as f64;
            PlanarMeasure::new(
                (0..n)
                    .map(|k| Atom {
                        z: center
                            + Complex64::from_polar(radius, start + span * (k as f64 + 0.5) / n as f64),
                        w,
                    })
                    .collect(),
            )
        }
        Generator::RandomCloud { seed, n } => {
            if n < 1 {
                return domain("random cloud needs n >= 1");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let atoms = (0..n)
                .map(|_| {
                    let x = rng.random::<f64>() - 0.5;
                    let y = rng.random::<f64>() - 0.5;
                    let w = (0.5 + rng.random::<f64>()) / n as f64;
                    Atom { z: pt(x, y), w }
                })
                .collect();
            PlanarMeasure::new(atoms)
        }
    }
}

/// Full circle of radius `r` discretized into `n` atoms.
pub fn circle(center: Point, r: f64, n: usize) -> Result<PlanarMeasure> {
    generate(&Generator::Arc {
        center,
        radius: r,
        start: 0.0,
        span: 2.0 * PI,
        n,
    })
}

/// Closed-ball mass `mu(B(x, r))`.
pub fn ball_mass(mu: &PlanarMeasure, x: Point, r: f64) -> f64 {
    mu.mass_where(|_, z| (z - x).norm() <= r)
}

/// `R(x) = sup{ r > 0 : mu(B(x,r)) > M r }`, zero when the set is empty.
pub fn ahlfors_radius(mu: &PlanarMeasure, m: f64, x: Point) -> f64 {
    ahlfors_radius_above(mu, m, x, 0.0)
}

/// `sup{ r > floor : mu(B(x,r)) > M r }`, zero when the set is empty.
pub fn ahlfors_radius_above(mu: &PlanarMeasure, m: f64, x: Point, floor: f64) -> f64 {
    let d = mu.sorted_distances(x);
    let mut best = 0.0f64;
    let mut cum = 0.0f64;
    let mut k = 0;
    while k < d.len() {
        let dk = d[k].0;
        while k < d.len() && d[k].0 == dk {
            cum += d[k].1;
            k += 1;
        }
        let next = if k < d.len() { d[k].0 } else { f64::INFINITY };
        let top = cum / m;
        if top > dk.max(floor) {
            best = best.max(top.min(next));
        }
    }
    best
}

/// Closed disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Point,
    pub radius: f64,
}

/// Finite union of disks with exact distance-to-complement evaluation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DiskList", into = "DiskList")]
pub struct DiskSet {
    disks: Vec<Disk>,
    arcs: Vec<Vec<(f64, f64)>>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiskList {
    disks: Vec<Disk>,
}

impl TryFrom<DiskList> for DiskSet {
    type Error = crate::error::Error;
    fn try_from(d: DiskList) -> Result<Self> {
        DiskSet::new(d.disks)
    }
}

impl From<DiskSet> for DiskList {
    fn from(d: DiskSet) -> Self {
        DiskList { disks: d.disks }
    }
}

impl DiskSet {
    pub fn new(disks: Vec<Disk>) -> Result<Self> {
        for d in &disks {
            if !(d.radius > 0.0) {
                return domain("disk radii must be positive");
            }
        }
        let arcs = uncovered_arcs(&disks);
        Ok(DiskSet { disks, arcs })
    }

    pub fn empty() -> Self {
        DiskSet::default()
    }

    pub fn disks(&self) -> &[Disk] {
        &self.disks
    }

    pub fn is_empty(&self) -> bool {
        self.disks.is_empty()
    }

    pub fn len(&self) -> usize {
        self.disks.len()
    }

    /// Closed-union membership.
    pub fn contains(&self, p: Point) -> bool {
        self.disks.iter().any(|d| (p - d.center).norm() <= d.radius)
    }

    /// Sufficient test for the closed rectangle to lie in the union: either one disk contains
    /// all four corners, or the centre is deeper than the half-diagonal.
    pub fn contains_rect(&self, r: &crate::geometry::Rect) -> bool {
        let corners = r.corners();
        if self
            .disks
            .iter()
            .any(|d| corners.iter().all(|&c| (c - d.center).norm() <= d.radius))
        {
            return true;
        }
        let half_diag = 0.5 * ((r.x1 - r.x0).hypot(r.y1 - r.y0));
        self.dist_to_complement(r.center()) > half_diag
    }

    /// Mass of the closed union.
    pub fn mass(&self, mu: &PlanarMeasure) -> f64 {
        mu.mass_where(|_, z| self.contains(z))
    }

    /// Exact `dist(p, C \ U)` for the union `U` of the open disks.
    pub fn dist_to_complement(&self, p: Point) -> f64 {
        if !self.disks.iter().any(|d| (p - d.center).norm() < d.radius) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for (d, arcs) in self.disks.iter().zip(&self.arcs) {
            if arcs.is_empty() {
                continue;
            }
            let v = p - d.center;
            let rho = v.norm();
            let theta = if rho > 0.0 { v.arg() } else { 0.0 };
            for &(a, b) in arcs {
                let rel = (theta - a).rem_euclid(2.0 * PI);
                let cand = if rho == 0.0 || rel <= b - a {
                    (d.radius - rho).abs()
                } else {
                    let pa = d.center + Complex64::from_polar(d.radius, a);
                    let pb = d.center + Complex64::from_polar(d.radius, b);
                    (p - pa).norm().min((p - pb).norm())
                };
                best = best.min(cand);
            }
        }
        if best.is_finite() {
            best
        } else {
            0.0
        }
    }
}

/// For each circle, the angular intervals `(a, b)` (with `a <= b <= a + 2 pi`) not covered
/// by the other open disks.
fn uncovered_arcs(disks: &[Disk]) -> Vec<Vec<(f64, f64)>> {
    let tau = 2.0 * PI;
    disks
        .iter()
        .enumerate()
        .map(|(i, di)| {
            let mut covered: Vec<(f64, f64)> = Vec::new();
            for (j, dj) in disks.iter().enumerate() {
                if i == j {
                    continue;
                }
                let v = dj.center - di.center;
                let d = v.norm();
                if d + di.radius <= dj.radius && !(d == 0.0 && di.radius == dj.radius && j > i) {
                    return vec![];
                }
                if d >= di.radius + dj.radius || d + dj.radius <= di.radius {
                    continue;
                }
                let c = (di.radius * di.radius + d * d - dj.radius * dj.radius) / (2.0 * di.radius * d);
                let half = c.clamp(-1.0, 1.0).acos();
                let phi = v.arg();
                let lo = (phi - half).rem_euclid(tau);
                covered.push((lo, lo + 2.0 * half));
            }
            if covered.is_empty() {
                return vec![(0.0, tau)];
            }
            let mut pieces: Vec<(f64, f64)> = Vec::new();
            for (lo, hi) in covered {
                if hi > tau {
                    pieces.push((lo, tau));
                    pieces.push((0.0, hi - tau));
                } else {
                    pieces.push((lo, hi));
                }
            }
            pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut merged: Vec<(f64, f64)> = Vec::new();
            for (lo, hi) in pieces {
                if let Some(last) = merged.last_mut() {
                    if lo <= last.1 {
                        last.1 = last.1.max(hi);
                        continue;
                    }
                }
                merged.push((lo, hi));
            }
            let mut gaps = Vec::new();
            let mut cur = 0.0;
            for &(lo, hi) in &merged {
                if lo > cur {
                    gaps.push((cur, lo));
                }
                cur = cur.max(hi);
            }
            if cur < tau {
                gaps.push((cur, tau));
            }
            if gaps.len() >= 2 && gaps[0].0 == 0.0 && gaps.last().unwrap().1 == tau {
                let first = gaps.remove(0);
                let last = gaps.last_mut().unwrap();
                last.1 = tau + first.1;
            }
            gaps
        })
        .collect()
}

/// Vitali family of disjoint non-Ahlfors disks and the fivefold union `H`.
#[derive(Clone, Debug)]
pub struct ExceptionalSet {
    /// Selected pairwise disjoint disks `B(x_j, r_j)` with `mu(B) > M r_j`.
    pub selected: Vec<Disk>,
    /// `H = union of B(x_j, 5 r_j)`.
    pub h: DiskSet,
    /// Candidate non-Ahlfors disks (one per atom with positive Ahlfors radius).
    pub candidates: Vec<(usize, Disk)>,
}

impl ExceptionalSet {
    pub fn radius_sum(&self) -> f64 {
        ksum(self.selected.iter().map(|d| d.radius))
    }
}

fn non_ahlfors_radius(mu: &PlanarMeasure, m: f64, x: Point, big_r: f64, floor: f64) -> f64 {
    let mut r = big_r * (1.0 - 1e-9);
    for _ in 0..60 {
        if r <= floor {
            break;
        }
        if ball_mass(mu, x, r) > m * r {
            return r;
        }
        r *= 1.0 - 1e-6;
    }
    let d = mu.sorted_distances(x);
    d.iter()
        .map(|t| t.0)
        .filter(|&t| t < big_r && t > floor && ball_mass(mu, x, t) > m * t)
        .fold(0.0, f64::max)
}

/// Greedy Vitali selection (decreasing radius, ties by atom index) over the maximal
/// non-Ahlfors disks centred at atoms.
pub fn exceptional_set(mu: &PlanarMeasure, m: f64) -> Result<ExceptionalSet> {
    exceptional_set_above(mu, m, 0.0)
}

/// Exceptional set built only from non-Ahlfors disks of radius `> floor`.
pub fn exceptional_set_above(mu: &PlanarMeasure, m: f64, floor: f64) -> Result<ExceptionalSet> {
    if !(m > 1.0) {
        return domain(format!("exceptional set needs M > 1, got {m}"));
    }
    if !(floor >= 0.0) {
        return domain("resolution floor must be nonnegative");
    }
    let radii: Vec<f64> = (0..mu.len())
        .into_par_iter()
        .map(|i| ahlfors_radius_above(mu, m, mu.z(i), floor))
        .collect();
    let mut candidates: Vec<(usize, Disk)> = radii
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > 0.0)
        .map(|(i, &r)| {
            let rr = non_ahlfors_radius(mu, m, mu.z(i), r, floor);
            (
                i,
                Disk {
                    center: mu.z(i),
                    radius: rr,
                },
            )
        })
        .filter(|(_, d)| d.radius > floor)
        .collect();
    candidates.sort_by(|a, b| b.1.radius.total_cmp(&a.1.radius).then(a.0.cmp(&b.0)));
    let mut selected: Vec<Disk> = Vec::new();
    for (_, d) in &candidates {
        if selected
            .iter()
            .all(|s| (s.center - d.center).norm() > s.radius + d.radius)
        {
            selected.push(*d);
        }
    }
    let h = DiskSet::new(
        selected
            .iter()
            .map(|d| Disk {
                center: d.center,
                radius: 5.0 * d.radius,
            })
            .collect(),
    )?;
    Ok(ExceptionalSet {
        selected,
        h,
        candidates,
    })
}

/// Minimal `M~` with `mu{dist(., G) <= r} <= M~ r` for all `r > 0`, given the distance
/// of every atom to `G`. Infinite when an atom lies on `G`.
pub fn negligibility_from_distances(dist_mass: &mut [(f64, f64)]) -> f64 {
    dist_mass.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = 0.0f64;
    let mut cum = 0.0f64;
    let mut k = 0;
    while k < dist_mass.len() {
        let d = dist_mass[k].0;
        while k < dist_mass.len() && dist_mass[k].0 == d {
            cum += dist_mass[k].1;
            k += 1;
        }
        if d <= 0.0 {
            return f64::INFINITY;
        }
        best = best.max(cum / d);
    }
    best
}

/// Negligibility constant of a contour with respect to `mu`.
pub fn negligibility_constant(mu: &PlanarMeasure, g: &Contour) -> f64 {
    let mut dm: Vec<(f64, f64)> = mu.atoms().iter().map(|a| (g.dist(a.z), a.w)).collect();
    negligibility_from_distances(&mut dm)
}

/// Negligibility constant of the boundary of a closed rectangle.
pub fn rect_negligibility(mu: &PlanarMeasure, r: &crate::geometry::Rect) -> f64 {
    let mut dm: Vec<(f64, f64)> = mu
        .atoms()
        .iter()
        .map(|a| (r.dist_boundary(a.z), a.w))
        .collect();
    negligibility_from_distances(&mut dm)
}

/// `sup_{r >= R0, r > 0} (1/r) * integral over B(x,r) of |f|`. Infinite when `R0 = 0` and
/// an atom with `f != 0` sits at `x`.
pub fn maximal_m1(mu: &PlanarMeasure, f: &[Complex64], x: Point, r0: f64) -> f64 {
    let d = mu.sorted_distances(x);
    let mut cum = 0.0f64;
    let mut best = 0.0f64;
    let mut k = 0;
    let mut at_r0_done = r0 <= 0.0;
    while k < d.len() {
        let dk = d[k].0;
        if !at_r0_done && dk > r0 {
            best = best.max(cum / r0);
            at_r0_done = true;
        }
        while k < d.len() && d[k].0 == dk {
            cum += f[d[k].2].norm() * d[k].1;
            k += 1;
        }
        if dk >= r0 {
            if dk == 0.0 {
                if cum > 0.0 {
                    return f64::INFINITY;
                }
            } else {
                best = best.max(cum / dk);
            }
        }
    }
    if !at_r0_done {
        best = best.max(cum / r0);
    }
    best
}

/// Value of the ratio inside the sup of `M~_beta` at a single radius.
pub fn maximal_tilde_at(mu: &PlanarMeasure, g: &[Complex64], x: Point, beta: f64, r: f64) -> f64 {
    let num = ksum(
        mu.atoms()
            .iter()
            .enumerate()
            .filter(|(_, a)| (a.z - x).norm() <= r)
            .map(|(i, a)| g[i].norm().powf(beta) * a.w),
    );
    let den = ball_mass(mu, x, 3.0 * r);
    if den > 0.0 {
        (num / den).powf(1.0 / beta)
    } else {
        0.0
    }
}

/// `M~_beta g(x) = sup_r ( (1/mu(B(x,3r))) * integral over B(x,r) of |g|^beta )^(1/beta)`,
/// evaluated at every radius where either ball changes.
pub fn maximal_tilde(mu: &PlanarMeasure, g: &[Complex64], x: Point, beta: f64) -> f64 {
    let d = mu.sorted_distances(x);
    let mut radii: Vec<f64> = d.iter().flat_map(|t| [t.0, t.0 / 3.0]).collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    let (mut kn, mut kd) = (0usize, 0usize);
    let mut best = 0.0f64;
    for r in radii {
        while kn < d.len() && d[kn].0 <= r {
            num += g[d[kn].2].norm().powf(beta) * d[kn].1;
            kn += 1;
        }
        while kd < d.len() && d[kd].0 <= 3.0 * r {
            den += d[kd].1;
            kd += 1;
        }
        if den > 0.0 {
            best = best.max((num / den).powf(1.0 / beta));
        }
    }
    best
}

/// Decreasing profiles with closed-form tails for the comparison inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `eps / t^2`.
    InverseSquare { eps: f64 },
    /// `1 / t^(1+eps)`.
    Power { eps: f64 },
    /// `r (r + t) / t^3`.
    Mixed { r: f64 },
    /// Identically zero.
    Zero,
}

impl Profile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Profile::InverseSquare { eps } => eps / (t * t),
            Profile::Power { eps } => t.powf(-(1.0 + eps)),
            Profile::Mixed { r } => r * (r + t) / (t * t * t),
            Profile::Zero => 0.0,
        }
    }

    /// Integral of the profile over `[R, infinity)`.
    pub fn tail(&self, big_r: f64) -> f64 {
        match *self {
            Profile::InverseSquare { eps } => eps / big_r,
            Profile::Power { eps } => big_r.powf(-eps) / eps,
            Profile::Mixed { r } => r * r / (2.0 * big_r * big_r) + r / big_r,
            Profile::Zero => 0.0,
        }
    }
}

/// Reference set for the comparison inequality.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Point(Point),
    Contour(Contour),
}

impl Target {
    pub fn dist(&self, p: Point) -> f64 {
        match self {
            Target::Point(q) => (p - q).norm(),
            Target::Contour(c) => c.dist(p),
        }
    }
}

/// `sup_{r >= r0} mu{dist(., S) < r} / r`, computed from the jump radii.
pub fn open_growth_constant(mu: &PlanarMeasure, s: &Target, r0: f64) -> f64 {
    let mut dm: Vec<(f64, f64)> = mu.atoms().iter().map(|a| (s.dist(a.z), a.w)).collect();
    dm.sort_by(|a, b| a.0.total_cmp(&b.0));
    let below_r0 = ksum(dm.iter().filter(|t| t.0 < r0).map(|t| t.1));
    let mut best = if r0 > 0.0 { below_r0 / r0 } else { 0.0 };
    let mut cum = 0.0;
    let mut k = 0;
    while k < dm.len() {
        let d = dm[k].0;
        while k < dm.len() && dm[k].0 == d {
            cum += dm[k].1;
            k += 1;
        }
        if d >= r0 {
            if d == 0.0 {
                return f64::INFINITY;
            }
            best = best.max(cum / d);
        }
    }
    best
}

/// Checks `integral over {dist >= R} of U(dist) <= M (R U(R) + integral_R^inf U)` under the
/// hypothesis `mu{dist < r} <= M r` for `r >= R`.
pub fn comparison_lemma_check(mu: &PlanarMeasure, s: &Target, u: Profile, big_r: f64, m: f64) -> CheckReport {
    let name = "comparison_lemma";
    let growth = open_growth_constant(mu, s, big_r);
    if growth > m {
        return CheckReport::not_applicable(name, &format!("growth constant {growth} exceeds M = {m}"), mu.len() as u64, 0);
    }
    let lhs = ksum(
        mu.atoms()
            .iter()
            .map(|a| (s.dist(a.z), a.w))
            .filter(|&(d, _)| d >= big_r)
            .map(|(d, w)| u.eval(d) * w),
    );
    let rhs = m * (big_r * u.eval(big_r) + u.tail(big_r));
    CheckReport::upper(name, lhs, rhs * (1.0 + 1e-12), mu.len() as u64, 0)
}

/// Model constants shared across modules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlobalParams {
    pub delta: f64,
    #[serde(rename = "M")]
    pub m_ahlfors: f64,
    pub m: u32,
    pub eps_cz: f64,
    pub beta: f64,
    pub tilde_m: f64,
    pub eta: f64,
    #[serde(rename = "L")]
    pub l_trunc: f64,
    #[serde(rename = "B")]
    pub b_bound: f64,
}

impl Default for GlobalParams {
    fn default() -> Self {
        GlobalParams {
            delta: 0.01,
            m_ahlfors: 10.0,
            m: 3,
            eps_cz: 1.0,
            beta: 0.1,
            tilde_m: 1.0e4,
            eta: 0.5,
            l_trunc: 10.0,
            b_bound: 10.0,
        }
    }
}

impl GlobalParams {
    /// `alpha = eps / (2 (1 + eps))`, equal to 1/4 for the Cauchy kernel.
    pub fn alpha(&self) -> f64 {
        self.eps_cz / (2.0 * (1.0 + self.eps_cz))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return domain("delta must lie in (0,1)");
        }
        if !(self.m_ahlfors > 1.0) {
            return domain("M must exceed 1");
        }
        if self.m < 1 {
            return domain("m must be >= 1");
        }
        if !(self.eps_cz > 0.0 && self.eps_cz <= 1.0) {
            return domain("eps_cz must lie in (0,1]");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return domain("beta must lie in (0,1)");
        }
        if !(self.tilde_m > 0.0 && self.eta > 0.0 && self.l_trunc > 0.0 && self.b_bound > 0.0) {
            return domain("tilde_m, eta, L and B must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{h1_length, skeleton, Arc, DyadicLattice};
    use rand::Rng;
    use crate::pipeline::NORMAL_RADIUS;
    use proptest::prelude::{prop_assert, proptest};

    fn unit_atom() -> PlanarMeasure {
        PlanarMeasure::from_points(&[pt(0.0, 0.0)], &[1.0]).unwrap()
    }

    fn corners() -> PlanarMeasure {
        PlanarMeasure::from_points(
            &[pt(0.0, 0.0), pt(1.0, 0.0), pt(0.0, 1.0), pt(1.0, 1.0)],
            &[0.25; 4],
        )
        .unwrap()
    }

    fn ones(n: usize) -> Vec<Complex64> {
        vec![Complex64::new(1.0, 0.0); n]
    }

    #[test]
    fn cantor_level_one_has_four_quarter_atoms() {
        let mu = generate(&Generator::CantorCorner { level: 1 }).unwrap();
        assert_eq!(mu.len(), 4);
        assert!(mu.weights().iter().all(|&w| w == 0.25));
        let expect = [pt(0.125, 0.125), pt(0.875, 0.125), pt(0.125, 0.875), pt(0.875, 0.875)];
        for (z, e) in mu.points().iter().zip(expect) {
            assert!((z - e).norm() < 1e-15);
        }
    }

    #[test]
    fn segment_midpoints() {
        let mu = generate(&Generator::Segment {
            a: pt(0.0, 0.0),
            b: pt(1.0, 0.0),
            n: 4,
        })
        .unwrap();
        let xs: Vec<f64> = mu.points().iter().map(|z| z.re).collect();
        assert_eq!(xs, vec![0.125, 0.375, 0.625, 0.875]);
        assert!(mu.weights().iter().all(|&w| w == 0.25));
    }

    #[test]
    fn cantor_level_three_mass_and_spacing() {
        let mu = generate(&Generator::CantorCorner { level: 3 }).unwrap();
        assert_eq!(mu.len(), 64);
        assert!((mu.total() - 1.0).abs() < 1e-14);
        let pts = mu.points();
        let mut min = f64::INFINITY;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                min = min.min((pts[i] - pts[j]).norm());
            }
        }
        assert!((min - 3.0 / 64.0).abs() < 1e-14, "min distance {min}");
    }

    #[test]
    fn arc_mass_is_length_and_cloud_is_seeded() {
        let mu = circle(pt(0.0, 0.0), 0.5, 100).unwrap();
        assert!((mu.total() - PI).abs() < 1e-12);
        let a = generate(&Generator::RandomCloud { seed: 9, n: 50 }).unwrap();
        let b = generate(&Generator::RandomCloud { seed: 9, n: 50 }).unwrap();
        assert_eq!(a, b);
        assert!(generate(&Generator::Segment { a: pt(0.0, 0.0), b: pt(1.0, 0.0), n: 0 }).is_err());
        assert!(generate(&Generator::CantorCorner { level: 0 }).is_err());
    }

    #[test]
    fn ball_mass_examples() {
        let mu = unit_atom();
        assert_eq!(ball_mass(&mu, pt(0.0, 0.0), 0.0), 1.0);
        assert_eq!(ball_mass(&mu, pt(2.0, 0.0), 1.0), 0.0);
        let c1 = generate(&Generator::CantorCorner { level: 1 }).unwrap();
        assert_eq!(ball_mass(&c1, pt(0.5, 0.5), 0.5), 0.0);
        let d = (0.375f64 * 0.375 * 2.0).sqrt();
        assert_eq!(ball_mass(&c1, pt(0.5, 0.5), d + 1e-12), 1.0);
    }

    #[test]
    fn ahlfors_radius_examples() {
        assert!((ahlfors_radius(&unit_atom(), 2.0, pt(0.0, 0.0)) - 0.5).abs() < 1e-12);
        assert!((ahlfors_radius(&corners(), 10.0, pt(0.0, 0.0)) - 0.025).abs() < 1e-12);
        assert_eq!(ahlfors_radius(&unit_atom(), 1.0, pt(10.0, 0.0)), 0.0);
    }

    #[test]
    fn ahlfors_radius_matches_radius_scan() {
        let mu = generate(&Generator::RandomCloud { seed: 3, n: 40 }).unwrap();
        for (i, m) in [(0usize, 5.0), (7, 20.0), (19, 60.0)] {
            let x = mu.z(i);
            let r = ahlfors_radius(&mu, m, x);
            let scan = (1..=200_000)
                .map(|k| k as f64 * 1e-5)
                .filter(|&t| ball_mass(&mu, x, t) > m * t)
                .fold(0.0, f64::max);
            assert!((r - scan).abs() <= 1e-5, "atom {i}: {r} vs {scan}");
            for t in mu.sorted_distances(x).iter().map(|t| t.0).filter(|&t| t > r) {
                assert!(ball_mass(&mu, x, t) <= m * t * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn exceptional_set_examples() {
        let spread = generate(&Generator::Segment {
            a: pt(0.0, 0.0),
            b: pt(1.0, 0.0),
            n: 10,
        })
        .unwrap();
        assert!(exceptional_set_above(&spread, 4.0, spread.max_nearest_distance())
            .unwrap()
            .selected
            .is_empty());

        let e = exceptional_set(&unit_atom(), 2.0).unwrap();
        assert_eq!(e.selected.len(), 1);
        let r = e.selected[0].radius;
        assert!(r < 0.5 && r > 0.499);
        assert!((e.h.disks()[0].radius - 5.0 * r).abs() < 1e-15);

        let cantor = generate(&Generator::CantorCorner { level: 4 }).unwrap();
        let e = exceptional_set(&cantor, 100.0).unwrap();
        assert!(!e.selected.is_empty());
        assert!(e.radius_sum() < 0.01);
        assert!(exceptional_set(&cantor, 1.0).is_err());
    }

    #[test]
    fn exceptional_set_disjoint_and_covering() {
        let cantor = generate(&Generator::CantorCorner { level: 4 }).unwrap();
        let mut masses = Vec::new();
        for m in [10.0, 100.0, 1000.0] {
            let e = exceptional_set(&cantor, m).unwrap();
            for (i, a) in e.selected.iter().enumerate() {
                assert!(ball_mass(&cantor, a.center, a.radius) > m * a.radius);
                for b in &e.selected[i + 1..] {
                    assert!((a.center - b.center).norm() > a.radius + b.radius);
                }
            }
            assert!(e.radius_sum() < cantor.total() / m);
            for (_, d) in &e.candidates {
                for k in 0..16 {
                    let p = d.center + Complex64::from_polar(d.radius, k as f64 * PI / 8.0);
                    assert!(e.h.contains(p));
                }
            }
            masses.push(e.h.mass(&cantor));
        }
        assert!(masses[0] >= masses[1] && masses[1] >= masses[2], "{masses:?}");
    }

    #[test]
    fn negligibility_examples() {
        let g = Contour {
            segments: vec![(pt(0.0, 0.0), pt(1.0, 0.0))],
            arcs: vec![],
        };
        let mu = PlanarMeasure::from_points(&[pt(0.5, 0.5), pt(0.5, 1.0)], &[0.25, 0.75]).unwrap();
        assert!((negligibility_constant(&mu, &g) - 1.0).abs() < 1e-15);
        let far = PlanarMeasure::from_points(&[pt(0.5, 0.1), pt(0.5, 0.2)], &[0.5, 0.5]).unwrap();
        assert!((negligibility_constant(&far, &g) - 5.0).abs() < 1e-12);
        let on = PlanarMeasure::from_points(&[pt(0.5, 0.0)], &[1.0]).unwrap();
        assert_eq!(negligibility_constant(&on, &g), f64::INFINITY);
        assert_eq!(negligibility_constant(&PlanarMeasure::empty(), &g), 0.0);
    }

    #[test]
    fn negligibility_dominates_random_radii() {
        let mu = generate(&Generator::RandomCloud { seed: 11, n: 200 }).unwrap();
        let sq = DyadicLattice::with_shift(pt(0.0, 0.0), 0).root;
        let g = skeleton(&sq.child(1).unwrap());
        let c = negligibility_constant(&mu, &g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let r: f64 = rng.random::<f64>() * 0.5;
            let near = mu.mass_where(|_, z| g.dist(z) <= r);
            assert!(c * r >= near * (1.0 - 1e-12));
        }
    }

    #[test]
    fn maximal_m1_examples() {
        let mu = unit_atom();
        let o = pt(0.0, 0.0);
        assert_eq!(maximal_m1(&mu, &ones(1), o, 0.0), f64::INFINITY);
        assert!((maximal_m1(&mu, &ones(1), o, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(maximal_m1(&mu, &[Complex64::new(0.0, 0.0)], o, 0.0), 0.0);
        let two = PlanarMeasure::from_points(&[pt(-1.0, 0.0), pt(1.0, 0.0)], &[0.5, 0.5]).unwrap();
        assert!((maximal_m1(&two, &ones(2), o, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn maximal_m1_matches_radius_scan() {
        let mu = generate(&Generator::RandomCloud { seed: 4, n: 30 }).unwrap();
        let f: Vec<Complex64> = (0..30).map(|k| Complex64::new((k % 5) as f64 - 2.0, 0.5)).collect();
        let x = pt(0.05, -0.1);
        let r0 = 0.07;
        let exact = maximal_m1(&mu, &f, x, r0);
        let mut scan = 0.0f64;
        for k in 0..=20_000 {
            let r = r0 + k as f64 * 5e-5;
            let s: f64 = mu
                .atoms()
                .iter()
                .enumerate()
                .filter(|(_, a)| (a.z - x).norm() <= r)
                .map(|(i, a)| f[i].norm() * a.w)
                .sum();
            scan = scan.max(s / r);
        }
        assert!(exact >= scan * (1.0 - 1e-12));
        assert!(exact <= scan * 1.01);
    }

    #[test]
    fn maximal_tilde_examples() {
        let mu = unit_atom();
        assert!((maximal_tilde(&mu, &ones(1), pt(0.0, 0.0), 1.0) - 1.0).abs() < 1e-15);
        let cloud = generate(&Generator::RandomCloud { seed: 2, n: 60 }).unwrap();
        let c = vec![Complex64::new(0.0, 2.5); 60];
        for i in 0..10 {
            assert!(maximal_tilde(&cloud, &c, cloud.z(i), 1.0) <= 2.5 * (1.0 + 1e-12));
        }
        let seg = generate(&Generator::Segment {
            a: pt(-1.0, 0.0),
            b: pt(1.0, 0.0),
            n: 2001,
        })
        .unwrap();
        let x = seg.z(1000);
        let ratio = maximal_tilde_at(&seg, &ones(2001), x, 1.0, 0.2);
        assert!((ratio - 1.0 / 3.0).abs() < 2e-3, "ratio {ratio}");
        assert_eq!(maximal_tilde(&PlanarMeasure::empty(), &[], pt(5.0, 0.0), 1.0), 0.0);
    }

    #[test]
    fn comparison_lemma_examples() {
        let seg = generate(&Generator::Segment {
            a: pt(0.0, 0.0),
            b: pt(50.0, 0.0),
            n: 5000,
        })
        .unwrap();
        let s = Target::Point(pt(0.0, 0.0));
        let u = Profile::InverseSquare { eps: 1.0 };
        let rep = comparison_lemma_check(&seg, &s, u, 1.0, 2.0);
        assert_eq!(rep.pass, Some(true));
        assert!(rep.observed > 0.95 && rep.observed < 1.0);
        assert!((rep.bound.unwrap() - 4.0).abs() < 1e-9);

        let near = generate(&Generator::Segment {
            a: pt(0.0, 0.0),
            b: pt(0.5, 0.0),
            n: 50,
        })
        .unwrap();
        let rep = comparison_lemma_check(&near, &s, u, 1.0, 2.0);
        assert_eq!(rep.observed, 0.0);
        assert_eq!(rep.pass, Some(true));

        let rep = comparison_lemma_check(&seg, &s, Profile::Zero, 1.0, 2.0);
        assert_eq!(rep.observed, 0.0);
        assert_eq!(rep.pass, Some(true));

        let rep = comparison_lemma_check(&seg, &s, u, 1.0, 0.5);
        assert!(!rep.is_applicable());
    }

    #[test]
    fn profile_tails_match_quadrature() {
        for u in [
            Profile::InverseSquare { eps: 0.3 },
            Profile::Power { eps: 0.5 },
            Profile::Mixed { r: 0.2 },
        ] {
            let big_r = 0.7;
            let n = 400_000;
            let mut s = 0.0;
            for k in 0..n {
                let v = (k as f64 + 0.5) / n as f64;
                let t = big_r / v;
                s += u.eval(t) * big_r / (v * v) / n as f64;
            }
            assert!((s - u.tail(big_r)).abs() < 1e-3 * u.tail(big_r), "{u:?}: {s}");
        }
    }

    #[test]
    fn h1_length_examples() {
        let seg = Contour {
            segments: vec![(pt(0.0, 0.0), pt(1.0, 0.0))],
            arcs: vec![],
        };
        assert_eq!(h1_length(&seg), 1.0);
        let circ = Contour {
            segments: vec![],
            arcs: vec![Arc {
                center: pt(0.0, 0.0),
                radius: 0.3,
                start: 0.0,
                span: 2.0 * PI,
            }],
        };
        assert!((h1_length(&circ) - 0.6 * PI).abs() < 1e-15);
        let sq = DyadicLattice::with_shift(pt(0.0, 0.0), 0).root;
        assert_eq!(h1_length(&skeleton(&sq)), 6.0);
    }

    #[test]
    fn normalization_fits_radius() {
        let mu = generate(&Generator::CantorCorner { level: 2 }).unwrap();
        let (n, info) = mu.normalized(NORMAL_RADIUS);
        assert!((n.total() - 1.0).abs() < 1e-14);
        assert!(n.bounding_disk().1 <= NORMAL_RADIUS * (1.0 + 1e-12));
        assert!(info.scale > 0.0);
    }

    proptest! {
        #[test]
        fn ball_mass_monotone(seed in 0u64..500, x in -0.5f64..0.5, y in -0.5f64..0.5, r in 0.0f64..1.0, dr in 0.0f64..0.5) {
            let mu = generate(&Generator::RandomCloud { seed, n: 30 }).unwrap();
            prop_assert!(ball_mass(&mu, pt(x, y), r) <= ball_mass(&mu, pt(x, y), r + dr));
        }

        #[test]
        fn m1_nonincreasing_in_r0(seed in 0u64..500, r0 in 0.001f64..0.5, dr in 0.0f64..0.5) {
            let mu = generate(&Generator::RandomCloud { seed, n: 25 }).unwrap();
            let f = ones(25);
            let x = pt(0.01, 0.02);
            prop_assert!(maximal_m1(&mu, &f, x, r0 + dr) <= maximal_m1(&mu, &f, x, r0) * (1.0 + 1e-12));
        }
    }
}
