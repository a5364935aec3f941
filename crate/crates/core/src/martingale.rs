//! Terminal/transit classification, the adapted projections and their norm bounds.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::geometry::{DyadicLattice, DyadicSquare, Rect, SquareKey};
use crate::measure::{DiskSet, PlanarMeasure};
use crate::numeric::{ksum, ksum_c};
use crate::report::CheckReport;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Why subdivision stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalKind {
    InsideH,
    ZeroMass,
    HighEnergy,
    AtomIsolated,
    MaxLevel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum Status {
    Transit,
    Terminal(TerminalKind),
}

/// One classified square.
#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub square: DyadicSquare,
    pub status: Status,
    /// Indices of the atoms inside the half-open square.
    pub atoms: Vec<usize>,
    pub mass: f64,
    pub g_energy: f64,
}

impl Node {
    pub fn is_transit(&self) -> bool {
        self.status == Status::Transit
    }
}

/// Classified tree of a lattice: transit squares and their (transit or terminal) children.
#[derive(Clone, Debug)]
pub struct Classification {
    pub lattice: DyadicLattice,
    pub delta: f64,
    pub n_max: u32,
    nodes: BTreeMap<SquareKey, Node>,
    /// For every atom, the key of the terminal square containing it.
    leaf_of: Vec<SquareKey>,
}

/// Serializable view of a node.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeDump {
    pub square: SquareKey,
    #[serde(flatten)]
    pub status: Status,
    pub mass: f64,
    pub g_energy: f64,
}

/// Recursive subdivision of the root with the terminal rules applied in the order
/// inside-H, zero-mass, high-energy, atom-isolated, max-level. The root is always transit.
pub fn classify(lattice: &DyadicLattice, mu: &PlanarMeasure, g: &[Complex64], delta: f64, h: &DiskSet, n_max: u32) -> Result<Classification> {
    if n_max < 1 {
        return domain("n_max must be >= 1");
    }
    if g.len() != mu.len() {
        return domain("density misaligned with atoms");
    }
    if let Some(i) = (0..mu.len()).find(|&i| !lattice.root.contains(mu.z(i))) {
        return domain(format!("atom {i} lies outside the root square"));
    }
    let energy = |idx: &[usize]| ksum(idx.iter().map(|&i| g[i].norm_sqr() * mu.w(i)));
    let mass = |idx: &[usize]| ksum(idx.iter().map(|&i| mu.w(i)));
    let mut nodes = BTreeMap::new();
    let mut leaf_of = vec![lattice.root.key; mu.len()];
    let all: Vec<usize> = (0..mu.len()).collect();
    let root = Node {
        square: lattice.root,
        status: Status::Transit,
        mass: mass(&all),
        g_energy: energy(&all),
        atoms: all,
    };
    let mut stack = vec![root.square];
    nodes.insert(root.square.key, root);
    while let Some(sq) = stack.pop() {
        let parent_atoms = nodes[&sq.key].atoms.clone();
        let children = sq.children();
        let mut buckets: [Vec<usize>; 4] = Default::default();
        for &i in &parent_atoms {
            let k = children
                .iter()
                .position(|c| c.contains(mu.z(i)))
                .expect("children tile the parent");
            buckets[k].push(i);
        }
        for (c, idx) in children.iter().zip(buckets) {
            let m = mass(&idx);
            let e = energy(&idx);
            let status = if !h.is_empty() && h.contains_rect(&c.rect()) {
                Status::Terminal(TerminalKind::InsideH)
            } else if idx.is_empty() {
                Status::Terminal(TerminalKind::ZeroMass)
            } else if e >= delta * delta * m {
                Status::Terminal(TerminalKind::HighEnergy)
            } else if idx.len() <= 1 {
                Status::Terminal(TerminalKind::AtomIsolated)
            } else if c.level() >= n_max {
                Status::Terminal(TerminalKind::MaxLevel)
            } else {
                Status::Transit
            };
            if status == Status::Transit {
                stack.push(*c);
            } else {
                for &i in &idx {
                    leaf_of[i] = c.key;
                }
            }
            nodes.insert(
                c.key,
                Node {
                    square: *c,
                    status,
                    atoms: idx,
                    mass: m,
                    g_energy: e,
                },
            );
        }
    }
    Ok(Classification {
        lattice: *lattice,
        delta,
        n_max,
        nodes,
        leaf_of,
    })
}

impl Classification {
    pub fn node(&self, key: &SquareKey) -> Option<&Node> {
        self.nodes.get(key)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn transit(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(|n| n.is_transit())
    }

    pub fn terminal(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(|n| !n.is_transit())
    }

    pub fn status(&self, key: &SquareKey) -> Option<Status> {
        self.nodes.get(key).map(|n| n.status)
    }

    pub fn is_transit(&self, key: &SquareKey) -> bool {
        self.status(key) == Some(Status::Transit)
    }

    /// Terminal square containing atom `i`.
    pub fn leaf_of(&self, i: usize) -> SquareKey {
        self.leaf_of[i]
    }

    /// Children of a transit square that are present in the tree.
    pub fn children(&self, key: &SquareKey) -> Vec<&Node> {
        key.children().iter().filter_map(|k| self.nodes.get(k)).collect()
    }

    /// Terminal squares that feed the envelope: inside-H, zero-mass and high-energy.
    /// Atom-isolated and max-level stops are artefacts of finite atom clouds and are left out.
    pub fn envelope_squares(&self) -> Vec<Rect> {
        self.terminal()
            .filter(|n| {
                matches!(
                    n.status,
                    Status::Terminal(TerminalKind::InsideH | TerminalKind::ZeroMass | TerminalKind::HighEnergy)
                )
            })
            .map(|n| n.square.rect())
            .collect()
    }

    pub fn dump(&self) -> Vec<NodeDump> {
        self.nodes
            .values()
            .map(|n| NodeDump {
                square: n.square.key,
                status: n.status,
                mass: n.mass,
                g_energy: n.g_energy,
            })
            .collect()
    }

    /// Counts of terminal squares by reason.
    pub fn terminal_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for n in self.terminal() {
            if let Status::Terminal(k) = n.status {
                *out.entry(format!("{k:?}")).or_insert(0) += 1;
            }
        }
        out
    }
}

fn ratio(num: Complex64, den: Complex64) -> Complex64 {
    if den == ZERO {
        ZERO
    } else {
        num / den
    }
}

/// Sparse function supported on the atoms of one square.
#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    pub key: SquareKey,
    pub atoms: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl Piece {
    pub fn to_dense(&self, n: usize) -> Vec<Complex64> {
        let mut out = vec![ZERO; n];
        for (&i, &v) in self.atoms.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }

    pub fn norm_sqr(&self, mu: &PlanarMeasure) -> f64 {
        ksum(self.atoms.iter().zip(&self.values).map(|(&i, v)| v.norm_sqr() * mu.w(i)))
    }

    pub fn integral(&self, mu: &PlanarMeasure) -> Complex64 {
        ksum_c(self.atoms.iter().zip(&self.values).map(|(&i, v)| v * mu.w(i)))
    }
}

/// `Lambda phi` plus the family of `Delta_Q phi` over transit squares.
#[derive(Clone, Debug)]
pub struct MartingaleDecomposition {
    pub lambda_part: Vec<Complex64>,
    pub deltas: BTreeMap<SquareKey, Piece>,
}

/// The adapted projections of one classification against one density `h`.
#[derive(Clone, Debug)]
pub struct Projections<'a> {
    pub class: &'a Classification,
    pub mu: &'a PlanarMeasure,
    pub h: &'a [Complex64],
    h_int: BTreeMap<SquareKey, Complex64>,
}

impl<'a> Projections<'a> {
    /// Validates `|<h>_Q| >= 1 - delta` on every transit square.
    pub fn new(class: &'a Classification, mu: &'a PlanarMeasure, h: &'a [Complex64]) -> Result<Self> {
        if h.len() != mu.len() {
            return domain("density misaligned with atoms");
        }
        let mut h_int = BTreeMap::new();
        for n in class.nodes() {
            let s = ksum_c(n.atoms.iter().map(|&i| h[i] * mu.w(i)));
            if n.is_transit() && s.norm() < (1.0 - class.delta) * n.mass {
                return invalid(format!(
                    "transit square {} has |<h>| = {} < 1 - delta",
                    n.square.key,
                    s.norm() / n.mass
                ));
            }
            h_int.insert(n.square.key, s);
        }
        Ok(Projections { class, mu, h, h_int })
    }

    /// `<f>_S / <h>_S` on a classified square.
    pub fn coefficient(&self, key: &SquareKey, f: &[Complex64]) -> Complex64 {
        let n = &self.class.nodes[key];
        let s = ksum_c(n.atoms.iter().map(|&i| f[i] * self.mu.w(i)));
        ratio(s, self.h_int[key])
    }

    pub fn lambda_apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let a = self.coefficient(&self.class.lattice.root.key, f);
        self.h.iter().map(|x| a * x).collect()
    }

    /// `Delta_Q f` for a transit square `Q`.
    pub fn delta_piece(&self, key: &SquareKey, f: &[Complex64]) -> Piece {
        let a = self.coefficient(key, f);
        let mut atoms = Vec::new();
        let mut values = Vec::new();
        for c in self.class.children(key) {
            if c.is_transit() {
                let ac = self.coefficient(&c.square.key, f);
                for &i in &c.atoms {
                    atoms.push(i);
                    values.push((ac - a) * self.h[i]);
                }
            } else {
                for &i in &c.atoms {
                    atoms.push(i);
                    values.push(f[i] - a * self.h[i]);
                }
            }
        }
        Piece {
            key: *key,
            atoms,
            values,
        }
    }

    pub fn delta_apply(&self, key: &SquareKey, f: &[Complex64]) -> Vec<Complex64> {
        self.delta_piece(key, f).to_dense(self.mu.len())
    }

    pub fn decompose(&self, phi: &[Complex64]) -> MartingaleDecomposition {
        let deltas = self
            .class
            .transit()
            .map(|n| (n.square.key, self.delta_piece(&n.square.key, phi)))
            .collect();
        MartingaleDecomposition {
            lambda_part: self.lambda_apply(phi),
            deltas,
        }
    }

    /// `c_{R,Q}` for a transit square `R` and a transit child `R_Q`: the constant by which
    /// `Delta_R psi` restricted to `R_Q` is a multiple of `h`.
    pub fn restriction_constant(&self, r: &SquareKey, r_q: &SquareKey, psi: &[Complex64]) -> Complex64 {
        self.coefficient(r_q, psi) - self.coefficient(r, psi)
    }
}

/// Convenience wrapper: validate and decompose.
pub fn decompose(phi: &[Complex64], class: &Classification, mu: &PlanarMeasure, h: &[Complex64]) -> Result<MartingaleDecomposition> {
    Ok(Projections::new(class, mu, h)?.decompose(phi))
}

impl MartingaleDecomposition {
    /// `Lambda phi + sum Delta_Q phi`.
    pub fn reconstruct(&self) -> Vec<Complex64> {
        let mut parts: Vec<Vec<Complex64>> = self.lambda_part.iter().map(|v| vec![*v]).collect();
        for p in self.deltas.values() {
            for (&i, &v) in p.atoms.iter().zip(&p.values) {
                parts[i].push(v);
            }
        }
        parts.into_iter().map(ksum_c).collect()
    }

    /// Squared-norm sum `|Lambda phi|^2 + sum |Delta_Q phi|^2`.
    pub fn energy(&self, mu: &PlanarMeasure) -> f64 {
        let lam = l2_sqr(mu, &self.lambda_part);
        lam + ksum(self.deltas.values().map(|p| p.norm_sqr(mu)))
    }
}

/// `sum |f_i|^2 w_i`.
pub fn l2_sqr(mu: &PlanarMeasure, f: &[Complex64]) -> f64 {
    ksum(f.iter().zip(mu.atoms()).map(|(v, a)| v.norm_sqr() * a.w))
}

/// Hermitian `sum f_i conj(g_i) w_i`.
pub fn inner(mu: &PlanarMeasure, f: &[Complex64], g: &[Complex64]) -> Complex64 {
    ksum_c(f.iter().zip(g).zip(mu.atoms()).map(|((a, b), x)| a * b.conj() * x.w))
}

/// `(|Lambda phi|^2 + sum |Delta_Q phi|^2) / |phi|^2`, passing inside `[1/2, 2]`.
pub fn riesz_ratio(mu: &PlanarMeasure, phi: &[Complex64], d: &MartingaleDecomposition) -> CheckReport {
    let n = l2_sqr(mu, phi);
    if n == 0.0 {
        return CheckReport::not_applicable("riesz_ratio", "phi vanishes", mu.len() as u64, 0);
    }
    let r = d.energy(mu) / n;
    let ok = (0.5 - 1e-10..=2.0 + 1e-10).contains(&r);
    CheckReport::verdict("riesz_ratio", r, 2.0, ok, d.deltas.len() as u64, 0)
}

/// Largest `sum_{Q in R} a_Q / mu(R)` over the classified squares with positive mass.
pub fn carleson_hypothesis_constant(a: &BTreeMap<SquareKey, f64>, class: &Classification) -> f64 {
    let mut below: BTreeMap<SquareKey, f64> = BTreeMap::new();
    let mut keys: Vec<&SquareKey> = class.nodes.keys().collect();
    keys.sort_by(|x, y| y.level.cmp(&x.level));
    for k in keys {
        let own = a.get(k).copied().unwrap_or(0.0);
        let kids = ksum(k.children().iter().map(|c| below.get(c).copied().unwrap_or(0.0)));
        below.insert(*k, own + kids);
    }
    class
        .nodes
        .values()
        .map(|n| {
            let s = below[&n.square.key];
            if n.mass > 0.0 {
                s / n.mass
            } else if s > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Verifies `sum a_Q |<phi>_Q|^2 <= 4 A ||phi||^2` after checking the packing hypothesis
/// `sum_{Q in R} a_Q <= A mu(R)`. Coefficients must sit on classified squares.
pub fn carleson_verify(a: &BTreeMap<SquareKey, f64>, a_hyp: f64, class: &Classification, mu: &PlanarMeasure, phi: &[Complex64]) -> Result<CheckReport> {
    if a.keys().any(|k| class.node(k).is_none()) {
        return domain("coefficient on an unclassified square");
    }
    if a.values().any(|v| !(*v >= 0.0)) {
        return domain("coefficients must be nonnegative");
    }
    let packing = carleson_hypothesis_constant(a, class);
    if packing > a_hyp * (1.0 + 1e-12) {
        return Ok(CheckReport::not_applicable(
            "carleson",
            &format!("packing constant {packing} exceeds {a_hyp}"),
            a.len() as u64,
            0,
        ));
    }
    let lhs = ksum(a.iter().filter(|(_, v)| **v > 0.0).map(|(k, v)| {
        let n = &class.nodes[k];
        let avg = ksum_c(n.atoms.iter().map(|&i| phi[i] * mu.w(i))) / n.mass;
        v * avg.norm_sqr()
    }));
    let rhs = 4.0 * a_hyp * l2_sqr(mu, phi);
    Ok(CheckReport::verdict(
        "carleson",
        lhs,
        rhs,
        lhs <= rhs + 1e-10 * rhs.max(1e-300),
        a.len() as u64,
        0,
    ))
}

/// `a_Q = |standard martingale difference of g on Q|^2` for every transit `Q`.
pub fn standard_difference_energies(class: &Classification, mu: &PlanarMeasure, g: &[Complex64]) -> BTreeMap<SquareKey, f64> {
    let avg = |n: &Node| ksum_c(n.atoms.iter().map(|&i| g[i] * mu.w(i))) / n.mass;
    class
        .transit()
        .map(|q| {
            let aq = avg(q);
            let e = ksum(
                class
                    .children(&q.square.key)
                    .into_iter()
                    .filter(|c| c.mass > 0.0)
                    .map(|c| (avg(c) - aq).norm_sqr() * c.mass),
            );
            (q.square.key, e)
        })
        .collect()
}

/// Maximal squares with `|integral_Q b| <= eta mu(Q)` and positive mass.
#[derive(Clone, Debug)]
pub struct NonAccretive {
    pub squares: Vec<DyadicSquare>,
    pub mass: f64,
    /// Atoms covered by the selected squares.
    pub covered: Vec<bool>,
}

pub fn nonaccretive_squares(lattice: &DyadicLattice, mu: &PlanarMeasure, b: &[Complex64], eta: f64, n_max: u32) -> Result<NonAccretive> {
    if !(eta > 0.0) {
        return domain("eta must be positive");
    }
    let mut covered = vec![false; mu.len()];
    let mut squares = Vec::new();
    let all: Vec<usize> = (0..mu.len())
        .filter(|&i| lattice.root.contains(mu.z(i)))
        .collect();
    let mut stack = vec![(lattice.root, all)];
    while let Some((sq, idx)) = stack.pop() {
        if idx.is_empty() {
            continue;
        }
        let m = ksum(idx.iter().map(|&i| mu.w(i)));
        let s = ksum_c(idx.iter().map(|&i| b[i] * mu.w(i)));
        if s.norm() <= eta * m {
            for &i in &idx {
                covered[i] = true;
            }
            squares.push(sq);
            continue;
        }
        if idx.len() <= 1 || sq.level() >= n_max {
            continue;
        }
        let children = sq.children();
        let mut buckets: [Vec<usize>; 4] = Default::default();
        for &i in &idx {
            let k = children.iter().position(|c| c.contains(mu.z(i))).expect("tiling");
            buckets[k].push(i);
        }
        for (c, bk) in children.into_iter().zip(buckets) {
            stack.push((c, bk));
        }
    }
    squares.sort_by_key(|s| s.key);
    let mass = mu.mass_where(|i, _| covered[i]);
    Ok(NonAccretive {
        squares,
        mass,
        covered,
    })
}

/// `phi_bad = sum over bad Q of Delta_Q phi` and `phi_good = phi - phi_bad`
/// (equal to `Lambda phi + sum over good Q`).
pub fn split_good_bad(d: &MartingaleDecomposition, n: usize, is_bad: impl Fn(&SquareKey) -> bool) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut bad: Vec<Vec<Complex64>> = vec![Vec::new(); n];
    let mut good: Vec<Vec<Complex64>> = d.lambda_part.iter().map(|v| vec![*v]).collect();
    for (k, p) in &d.deltas {
        let target = if is_bad(k) { &mut bad } else { &mut good };
        for (&i, &v) in p.atoms.iter().zip(&p.values) {
            target[i].push(v);
        }
    }
    (
        good.into_iter().map(ksum_c).collect(),
        bad.into_iter().map(ksum_c).collect(),
    )
}

/// Largest `|x|` over a dense vector.
fn sup_norm(f: &[Complex64]) -> f64 {
    f.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Projection algebra on test functions: `Lambda^2 = Lambda`, `Delta_Q^2 = Delta_Q`,
/// `Delta_R Delta_Q = 0` for `R != Q` and `Lambda Delta_Q = Delta_Q Lambda = 0`. Observed is
/// the largest residual relative to `sup |phi|`.
pub fn projection_algebra_check(proj: &Projections, phi: &[Complex64], keys: &[SquareKey]) -> CheckReport {
    let scale = sup_norm(phi).max(f64::MIN_POSITIVE);
    let n = proj.mu.len();
    let mut worst = 0.0f64;
    let lam = proj.lambda_apply(phi);
    let d = proj.decompose(&lam);
    for (a, b) in d.lambda_part.iter().zip(&lam) {
        worst = worst.max((a - b).norm());
    }
    for p in d.deltas.values() {
        worst = worst.max(sup_norm(&p.values));
    }
    for k in keys {
        if proj.class.status(k) != Some(Status::Transit) {
            continue;
        }
        let dq = proj.delta_apply(k, phi);
        let d = proj.decompose(&dq);
        worst = worst.max(sup_norm(&d.lambda_part));
        for (r, p) in &d.deltas {
            if r == k {
                let dense = p.to_dense(n);
                for (a, b) in dense.iter().zip(&dq) {
                    worst = worst.max((a - b).norm());
                }
            } else {
                worst = worst.max(sup_norm(&p.values));
            }
        }
    }
    let rel = worst / scale;
    CheckReport::upper("projection_algebra", rel, 1e-10, keys.len() as u64, 0)
}

/// `|integral Delta_Q phi| <= 1e-12 |phi| sqrt(mu(Q))` on every transit square.
pub fn mean_zero_check(mu: &PlanarMeasure, class: &Classification, d: &MartingaleDecomposition, phi: &[Complex64]) -> CheckReport {
    let norm = l2_sqr(mu, phi).sqrt();
    let mut worst = 0.0f64;
    for (k, p) in &d.deltas {
        let m = class.nodes[k].mass;
        let tol = 1e-12 * norm * m.sqrt();
        let v = p.integral(mu).norm();
        if tol > 0.0 {
            worst = worst.max(v / tol);
        } else if v > 0.0 {
            worst = f64::INFINITY;
        }
    }
    CheckReport::upper("mean_zero", worst, 1.0, d.deltas.len() as u64, 0)
}

/// `1/2 sum |c_Q|^2 |Delta_Q phi|^2 <= |sum c_Q Delta_Q phi|^2 <= 2 sum |c_Q|^2 |Delta_Q phi|^2`.
/// Observed is the largest deviation of the ratio from the interval, as a ratio.
pub fn finite_coefficient_check(mu: &PlanarMeasure, d: &MartingaleDecomposition, coeffs: &BTreeMap<SquareKey, Complex64>) -> CheckReport {
    let mut parts: Vec<Vec<Complex64>> = vec![Vec::new(); mu.len()];
    let mut weighted = Vec::new();
    for (k, c) in coeffs {
        if let Some(p) = d.deltas.get(k) {
            weighted.push(c.norm_sqr() * p.norm_sqr(mu));
            for (&i, &v) in p.atoms.iter().zip(&p.values) {
                parts[i].push(c * v);
            }
        }
    }
    let sum: Vec<Complex64> = parts.into_iter().map(ksum_c).collect();
    let lhs = l2_sqr(mu, &sum);
    let w = ksum(weighted);
    if w == 0.0 {
        return CheckReport::not_applicable("finite_coefficient_riesz", "all selected pieces vanish", coeffs.len() as u64, 0);
    }
    let r = lhs / w;
    let ok = (0.5 - 1e-10..=2.0 + 1e-10).contains(&r);
    CheckReport::verdict("finite_coefficient_riesz", r, 2.0, ok, coeffs.len() as u64, 0)
}

/// `sum over Q of |<Delta_Q phi, psi>|^2 / |Delta_Q phi|^2 <= 2 |psi|^2`.
pub fn bessel_check(mu: &PlanarMeasure, d: &MartingaleDecomposition, psi: &[Complex64]) -> CheckReport {
    let terms = d.deltas.values().filter_map(|p| {
        let n2 = p.norm_sqr(mu);
        (n2 > 0.0).then(|| {
            let ip = ksum_c(p.atoms.iter().zip(&p.values).map(|(&i, v)| v * psi[i].conj() * mu.w(i)));
            ip.norm_sqr() / n2
        })
    });
    let lhs = ksum(terms);
    let rhs = 2.0 * l2_sqr(mu, psi);
    CheckReport::verdict("bessel", lhs, rhs, lhs <= rhs * (1.0 + 1e-10), d.deltas.len() as u64, 0)
}

/// `phi_good + phi_bad = phi` on atoms and both norms at most `2 |phi|`.
pub fn split_check(mu: &PlanarMeasure, phi: &[Complex64], good: &[Complex64], bad: &[Complex64]) -> CheckReport {
    let scale = sup_norm(phi).max(f64::MIN_POSITIVE);
    let resid = phi
        .iter()
        .zip(good.iter().zip(bad))
        .map(|(p, (g, b))| (g + b - p).norm())
        .fold(0.0, f64::max)
        / scale;
    let n = l2_sqr(mu, phi).sqrt();
    let worst = l2_sqr(mu, good).sqrt().max(l2_sqr(mu, bad).sqrt());
    let ok = resid <= 1e-10 && worst <= 2.0 * n * (1.0 + 1e-12);
    CheckReport::verdict("good_bad_split", worst, 2.0 * n, ok, mu.len() as u64, 0).with_note(format!("reconstruction residual {resid:e}"))
}
