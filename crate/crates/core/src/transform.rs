//! Truncated and maximal Cauchy-type transforms, dense operator matrices and the
//! constant-reporting verifiers built on them.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::Point;
use crate::kernel::k_phi_values;
use crate::measure::{maximal_m1, maximal_tilde, Disk, DiskSet, PlanarMeasure};
use crate::numeric::{ksum, ksum_c};
use crate::report::CheckReport;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Terms `(distance, value)` sorted by distance, with the diagonal removed.
fn sorted_terms(mu: &PlanarMeasure, x: Point, term: impl Fn(usize) -> Complex64) -> Vec<(f64, Complex64)> {
    let mut t: Vec<(f64, Complex64)> = (0..mu.len())
        .filter_map(|j| {
            let d = (mu.z(j) - x).norm();
            (d > 0.0).then(|| (d, term(j)))
        })
        .collect();
    t.sort_by(|a, b| a.0.total_cmp(&b.0));
    t
}

/// Suffix sums at every distinct distance: `(d_k, sum over d_j >= d_k)`, descending in `d`.
fn suffix_sums(terms: &[(f64, Complex64)]) -> Vec<(f64, Complex64)> {
    let mut out = Vec::new();
    let mut acc = ZERO;
    let mut k = terms.len();
    while k > 0 {
        let d = terms[k - 1].0;
        while k > 0 && terms[k - 1].0 == d {
            acc += terms[k - 1].1;
            k -= 1;
        }
        out.push((d, acc));
    }
    out
}

fn max_suffix(terms: &[(f64, Complex64)]) -> f64 {
    suffix_sums(terms).iter().map(|t| t.1.norm()).fold(0.0, f64::max)
}

/// `sum over |z_j - z| > eps of g_j w_j / (z_j - z)`.
pub fn cauchy_truncated(mu: &PlanarMeasure, g: &[Complex64], z: Point, eps: f64) -> Complex64 {
    ksum_c(mu.atoms().iter().enumerate().filter_map(|(j, a)| {
        let d = a.z - z;
        (d.norm() > eps).then(|| g[j] * a.w / d)
    }))
}

/// `sup over eps > 0` of the truncated Cauchy transform, over the finitely many breakpoints.
pub fn cauchy_maximal(mu: &PlanarMeasure, g: &[Complex64], z: Point) -> f64 {
    let terms = sorted_terms(mu, z, |j| g[j] * mu.w(j) / (mu.z(j) - z));
    max_suffix(&terms)
}

/// `sum over |y - x| >= eps of k(x, y) g(y) w`, with `phi_atoms` the envelope at the atoms and
/// `phi_x` its value at `x`.
pub fn k_phi_truncated(mu: &PlanarMeasure, phi_atoms: &[f64], g: &[Complex64], x: Point, phi_x: f64, eps: f64) -> Complex64 {
    ksum_c(mu.atoms().iter().enumerate().filter_map(|(j, a)| {
        ((a.z - x).norm() >= eps).then(|| k_phi_values(x, a.z, phi_x, phi_atoms[j]) * g[j] * a.w)
    }))
}

/// Maximal suppressed transform.
pub fn k_phi_maximal(mu: &PlanarMeasure, phi_atoms: &[f64], g: &[Complex64], x: Point, phi_x: f64) -> f64 {
    let terms = sorted_terms(mu, x, |j| k_phi_values(x, mu.z(j), phi_x, phi_atoms[j]) * g[j] * mu.w(j));
    max_suffix(&terms)
}

/// Cauchy transform truncated at radius `phi_x`: `sum over |z_j - x| >= phi_x of g_j w_j / (z_j - x)`.
pub fn c_phi(mu: &PlanarMeasure, phi_x: f64, g: &[Complex64], x: Point) -> Complex64 {
    ksum_c(mu.atoms().iter().enumerate().filter_map(|(j, a)| {
        let d = a.z - x;
        let r = d.norm();
        (r > 0.0 && r >= phi_x).then(|| g[j] * a.w / d)
    }))
}

/// Dense operator `(A f)_i = sum_j k(z_i, z_j) w_j f_j` on `L^2(mu)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    n: usize,
    entries: Vec<Complex64>,
    weights: Vec<f64>,
}

impl OperatorMatrix {
    /// Suppressed kernel with envelope values at the atoms (all zeros gives the Cauchy kernel
    /// `1 / (z_i - z_j)`).
    pub fn suppressed(mu: &PlanarMeasure, phi_atoms: &[f64]) -> Result<Self> {
        if phi_atoms.len() != mu.len() {
            return domain("envelope values misaligned with atoms");
        }
        let n = mu.len();
        let entries: Vec<Complex64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                (0..n).map(move |j| k_phi_values(mu.z(i), mu.z(j), phi_atoms[i], phi_atoms[j]) * mu.w(j))
            })
            .collect();
        Ok(OperatorMatrix {
            n,
            entries,
            weights: mu.weights(),
        })
    }

    pub fn cauchy(mu: &PlanarMeasure) -> Self {
        OperatorMatrix::suppressed(mu, &vec![0.0; mu.len()]).expect("aligned")
    }

    pub fn zeros(mu: &PlanarMeasure) -> Self {
        OperatorMatrix {
            n: mu.len(),
            entries: vec![ZERO; mu.len() * mu.len()],
            weights: mu.weights(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.n + j]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        OperatorMatrix {
            n: self.n,
            entries: self.entries.iter().map(|e| e * c).collect(),
            weights: self.weights.clone(),
        }
    }

    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n)
            .into_par_iter()
            .map(|i| ksum_c((0..n).map(|j| self.entries[i * n + j] * f[j])))
            .collect()
    }

    /// Adjoint in the weighted inner product `<f, g> = sum f_i conj(g_i) w_i`.
    pub fn apply_adjoint(&self, g: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n)
            .into_par_iter()
            .map(|j| {
                ksum_c((0..n).map(|i| self.entries[i * n + j].conj() * self.weights[i] * g[i])) / self.weights[j]
            })
            .collect()
    }

    pub fn inner(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        ksum_c(f.iter().zip(g).zip(&self.weights).map(|((a, b), w)| a * b.conj() * *w))
    }
}

/// Result of power iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub norm: f64,
    pub iterations: u32,
    pub converged: bool,
}

/// Largest singular value in `L^2(mu)` by power iteration on `A* A` from the all-ones vector.
pub fn operator_norm(a: &OperatorMatrix) -> NormEstimate {
    operator_norm_with(a, 1e-8, 10_000)
}

pub fn operator_norm_with(a: &OperatorMatrix, rtol: f64, cap: u32) -> NormEstimate {
    let n = a.dim();
    if n == 0 {
        return NormEstimate {
            norm: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut v = vec![Complex64::new(1.0, 0.0); n];
    let mut prev = f64::NAN;
    for it in 1..=cap {
        let av = a.apply(&v);
        let w = a.apply_adjoint(&av);
        let vv = a.inner(&v, &v).re;
        let lambda = a.inner(&w, &v).re / vv;
        let wn = a.inner(&w, &w).re.sqrt();
        if wn == 0.0 || !lambda.is_finite() {
            return NormEstimate {
                norm: 0.0,
                iterations: it,
                converged: true,
            };
        }
        if (lambda - prev).abs() <= rtol * lambda.abs() {
            return NormEstimate {
                norm: lambda.max(0.0).sqrt(),
                iterations: it,
                converged: true,
            };
        }
        prev = lambda;
        v = w.iter().map(|x| x / wn).collect();
    }
    NormEstimate {
        norm: prev.max(0.0).sqrt(),
        iterations: cap,
        converged: false,
    }
}

/// Full suppressed transform at every atom.
pub fn k_phi_apply(mu: &PlanarMeasure, phi_atoms: &[f64], f: &[Complex64]) -> Vec<Complex64> {
    (0..mu.len())
        .into_par_iter()
        .map(|i| k_phi_truncated(mu, phi_atoms, f, mu.z(i), phi_atoms[i], 0.0))
        .collect()
}

/// `max over atoms x of |K f(x) - C f(x)| / M_{1, phi(x)} f(x)`, where `C` is the Cauchy
/// transform truncated at `phi(x)` taken with the orientation of the kernel
/// (`1 / (x - y)`), i.e. minus [`c_phi`]. Reported without a bound.
pub fn lemma1_constant(mu: &PlanarMeasure, phi_atoms: &[f64], f: &[Complex64]) -> CheckReport {
    let worst = (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let x = mu.z(i);
            let k = k_phi_truncated(mu, phi_atoms, f, x, phi_atoms[i], 0.0);
            let c = -c_phi(mu, phi_atoms[i], f, x);
            let m1 = maximal_m1(mu, f, x, phi_atoms[i]);
            let diff = (k - c).norm();
            if !m1.is_finite() || m1 == 0.0 {
                0.0
            } else {
                diff / m1
            }
        })
        .reduce(|| 0.0, f64::max);
    CheckReport::reported("lemma1_constant", worst, mu.len() as u64, 0)
}

/// Per-atom `eps_0` and the union `G_L = union of B(x, 2 eps_0(x))`.
#[derive(Clone, Debug)]
pub struct GlSet {
    pub eps0: Vec<f64>,
    pub set: DiskSet,
}

/// `eps_0(x)` is the largest breakpoint radius with `|K_{phi, eps} b(x)| >= L`, zero when none.
pub fn epsilon0_and_gl(mu: &PlanarMeasure, phi_atoms: &[f64], b: &[Complex64], l: f64) -> Result<GlSet> {
    if !(l > 0.0) {
        return domain("L must be positive");
    }
    let eps0: Vec<f64> = (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let x = mu.z(i);
            let terms = sorted_terms(mu, x, |j| k_phi_values(x, mu.z(j), phi_atoms[i], phi_atoms[j]) * b[j] * mu.w(j));
            suffix_sums(&terms)
                .iter()
                .find(|(_, s)| s.norm() >= l)
                .map(|t| t.0)
                .unwrap_or(0.0)
        })
        .collect();
    let disks = eps0
        .iter()
        .enumerate()
        .filter(|(_, e)| **e > 0.0)
        .map(|(i, e)| Disk {
            center: mu.z(i),
            radius: 2.0 * e,
        })
        .collect();
    Ok(GlSet {
        eps0,
        set: DiskSet::new(disks)?,
    })
}

/// Cotlar-type aggregate `max over atoms of T* f / (M~[T f] + M M~_beta f + |T| M~_beta f)`
/// for the suppressed operator, after checking `phi >= R(x)` at the atoms.
pub fn cotlar_check(mu: &PlanarMeasure, phi_atoms: &[f64], ahlfors_m: f64, beta: f64, f: &[Complex64]) -> Result<CheckReport> {
    if !(beta > 1.0 && beta < 2.0) {
        return domain("beta must lie in (1,2)");
    }
    let name = "cotlar_aggregate";
    let violated = (0..mu.len()).any(|i| {
        let r = crate::measure::ahlfors_radius(mu, ahlfors_m, mu.z(i));
        phi_atoms[i] < r
    });
    if violated {
        return Ok(CheckReport::not_applicable(name, "envelope below the Ahlfors radius", mu.len() as u64, 0));
    }
    let mat = OperatorMatrix::suppressed(mu, phi_atoms)?;
    let norm = operator_norm(&mat).norm;
    let tf = mat.apply(f);
    let worst = (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let x = mu.z(i);
            let tstar = k_phi_maximal(mu, phi_atoms, f, x, phi_atoms[i]);
            let mt = maximal_tilde(mu, &tf, x, 1.0);
            let mb = maximal_tilde(mu, f, x, beta);
            let den = mt + ahlfors_m * mb + norm * mb;
            if den > 0.0 {
                tstar / den
            } else {
                0.0
            }
        })
        .reduce(|| 0.0, f64::max);
    Ok(CheckReport::reported(name, worst, mu.len() as u64, 0))
}

/// Pointwise check of `b^phi_R f <= 2 b* f + 2 M_{1,R} f` for a kernel with
/// `|b(x,y)| <= 1/|x-y|` and a decreasing profile `0 <= phi <= 1`.
pub fn blanket_check(
    mu: &PlanarMeasure,
    kernel: impl Fn(Point, Point) -> Complex64 + Sync,
    profile: impl Fn(f64) -> f64 + Sync,
    r: f64,
    f: &[Complex64],
) -> Result<CheckReport> {
    if !(r > 0.0) {
        return domain("R must be positive");
    }
    for i in 0..mu.len() {
        for j in 0..mu.len() {
            if i != j {
                let d = (mu.z(i) - mu.z(j)).norm();
                if kernel(mu.z(i), mu.z(j)).norm() * d > 1.0 + 1e-12 {
                    return Ok(CheckReport::not_applicable("blanket", "kernel exceeds 1/|x-y|", mu.len() as u64, 0));
                }
            }
        }
    }
    let (worst, bad) = (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let x = mu.z(i);
            let lhs = ksum_c(mu.atoms().iter().enumerate().filter_map(|(j, a)| {
                let d = (a.z - x).norm();
                (d > r).then(|| kernel(x, a.z) * profile(d) * f[j] * a.w)
            }))
            .norm();
            let terms = sorted_terms(mu, x, |j| kernel(x, mu.z(j)) * f[j] * mu.w(j));
            let bstar = max_suffix(&terms);
            let m1 = maximal_m1(mu, f, x, r);
            let rhs = 2.0 * bstar + 2.0 * m1;
            let ratio = if rhs > 0.0 { lhs / rhs } else if lhs > 0.0 { f64::INFINITY } else { 0.0 };
            (ratio, (lhs > rhs + 1e-10) as u64)
        })
        .reduce(|| (0.0, 0), |a, b| (a.0.max(b.0), a.1 + b.1));
    Ok(CheckReport::verdict("blanket", worst, 1.0, bad == 0, mu.len() as u64, 0)
        .with_note(format!("violations: {bad}")))
}

/// `sup_t t mu{|T nu| > t}` for `T nu(x) = sum_p k(x,p) nu_p` (Cauchy orientation `1/(x-p)`)
/// evaluated on the atoms of `mu`; reported as the ratio to `(M + |T|_2) |nu|`.
pub fn weak_type_experiment(mu: &PlanarMeasure, nu: &PlanarMeasure, ahlfors_m: f64, t_norm: f64) -> Result<CheckReport> {
    for a in nu.atoms() {
        if mu.atoms().iter().any(|b| b.z == a.z) {
            return domain("point masses must avoid the atoms of mu");
        }
    }
    let sup = weak_l1_norm(mu, nu);
    let den = (ahlfors_m + t_norm) * nu.total();
    let ratio = if den > 0.0 { sup / den } else { 0.0 };
    Ok(CheckReport::reported("weak_type", ratio, mu.len() as u64, 0).with_note(format!("weak norm {sup}")))
}

/// `sup_t t mu{|T nu| > t}`.
pub fn weak_l1_norm(mu: &PlanarMeasure, nu: &PlanarMeasure) -> f64 {
    let mut v: Vec<(f64, f64)> = mu
        .atoms()
        .iter()
        .map(|a| {
            let s = ksum_c(nu.atoms().iter().map(|p| k_phi_values(a.z, p.z, 0.0, 0.0) * p.w));
            (s.norm(), a.w)
        })
        .collect();
    v.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut cum = 0.0;
    let mut best = 0.0f64;
    let mut k = 0;
    while k < v.len() {
        let t = v[k].0;
        while k < v.len() && v[k].0 == t {
            cum += v[k].1;
            k += 1;
        }
        best = best.max(t * cum);
    }
    best
}

/// Averaged kernel `c(x,y) = v(|x-y|) / (x - y)` with
/// `v(t) = P{ max(phi(x), phi_omega(x)) <= t }`.
pub fn averaged_kernel(phi_x: f64, family_x: &[f64], probs: &[f64], x: Point, y: Point) -> (f64, Complex64) {
    let t = (x - y).norm();
    let v = ksum(
        family_x
            .iter()
            .zip(probs)
            .filter(|(p, _)| phi_x.max(**p) <= t)
            .map(|(_, q)| *q),
    );
    if t == 0.0 {
        return (v, ZERO);
    }
    (v, Complex64::new(v, 0.0) / (x - y))
}

/// Reported `(MI)` constant `max over atoms |C_phi f| / (c* f + M_{1,phi} f)` where `c*` is the
/// maximal operator of the averaged kernel; `family[w][i]` is `phi_omega` at atom `i`.
pub fn mi_constant(mu: &PlanarMeasure, phi_atoms: &[f64], family: &[Vec<f64>], probs: &[f64], f: &[Complex64]) -> CheckReport {
    let worst = (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let x = mu.z(i);
            let fam: Vec<f64> = family.iter().map(|v| v[i]).collect();
            let lhs = c_phi(mu, phi_atoms[i], f, x).norm();
            let terms = sorted_terms(mu, x, |j| averaged_kernel(phi_atoms[i], &fam, probs, x, mu.z(j)).1 * f[j] * mu.w(j));
            let cstar = max_suffix(&terms);
            let m1 = maximal_m1(mu, f, x, phi_atoms[i]);
            let den = cstar + m1;
            if den > 0.0 && den.is_finite() {
                lhs / den
            } else {
                0.0
            }
        })
        .reduce(|| 0.0, f64::max);
    CheckReport::reported("mi_constant", worst, mu.len() as u64, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pt;
    use crate::measure::{generate, Generator};
    use proptest::prelude::{prop_assert, proptest};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn atoms(points: &[Point], w: f64) -> PlanarMeasure {
        PlanarMeasure::from_points(points, &vec![w; points.len()]).unwrap()
    }

    fn cloud(seed: u64, n: usize) -> PlanarMeasure {
        generate(&Generator::RandomCloud { seed, n }).unwrap()
    }

    fn random_density(seed: u64, n: usize) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    #[test]
    fn cauchy_truncated_examples() {
        let one = atoms(&[pt(0.0, 0.0)], 1.0);
        assert_eq!(cauchy_truncated(&one, &[c(1.0)], pt(2.0, 0.0), 1.0), c(-0.5));
        assert_eq!(cauchy_truncated(&one, &[c(1.0)], pt(2.0, 0.0), 3.0), c(0.0));
        let pair = atoms(&[pt(-1.0, 0.0), pt(1.0, 0.0)], 1.0);
        assert_eq!(cauchy_truncated(&pair, &[c(1.0); 2], pt(0.0, 0.0), 0.5), c(0.0));
        assert_eq!(cauchy_truncated(&one, &[c(1.0)], pt(1.0, 0.0), 1.0), c(0.0));
    }

    #[test]
    fn cauchy_maximal_examples() {
        let three = atoms(&[pt(-1.0, 0.0), pt(1.0, 0.0), pt(2.0, 0.0)], 1.0);
        assert!((cauchy_maximal(&three, &[c(1.0); 3], pt(0.0, 0.0)) - 0.5).abs() < 1e-15);
        assert_eq!(cauchy_maximal(&three, &[c(0.0); 3], pt(0.0, 0.0)), 0.0);
        let one = atoms(&[pt(0.3, 0.4)], 0.7);
        assert!((cauchy_maximal(&one, &[c(1.0)], pt(0.0, 0.0)) - 0.7 / 0.5).abs() < 1e-15);
    }

    #[test]
    fn maximal_dominates_truncations() {
        let mu = cloud(1, 80);
        let g = random_density(2, 80);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let z = pt(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            let m = cauchy_maximal(&mu, &g, z);
            for _ in 0..100 {
                let eps = rng.random::<f64>() * 1.5;
                assert!(cauchy_truncated(&mu, &g, z, eps).norm() <= m * (1.0 + 1e-12) + 1e-15);
            }
        }
    }

    #[test]
    fn suppressed_transform_examples() {
        let mu = cloud(4, 50);
        let g = random_density(5, 50);
        let zero = vec![0.0; 50];
        let z = pt(0.0123, -0.0456);
        for eps in [0.0, 0.1, 0.3] {
            let k = k_phi_truncated(&mu, &zero, &g, z, 0.0, eps);
            assert!((k + cauchy_truncated(&mu, &g, z, eps)).norm() < 1e-12);
        }
        assert!((k_phi_maximal(&mu, &zero, &g, z, 0.0) - cauchy_maximal(&mu, &g, z)).abs() < 1e-12);

        let big = vec![100.0; 50];
        let bound = ksum(g.iter().zip(mu.weights()).map(|(v, w)| v.norm() * w)) / 100.0;
        for i in 0..5 {
            assert!(k_phi_maximal(&mu, &big, &g, mu.z(i), 100.0) <= bound * (1.0 + 1e-12));
        }
        let one = atoms(&[pt(0.2, 0.2)], 1.0);
        assert_eq!(k_phi_truncated(&one, &[0.0], &[c(1.0)], pt(0.2, 0.2), 0.0, 0.0), c(0.0));
    }

    #[test]
    fn c_phi_examples() {
        let mu = atoms(&[pt(0.5, 0.0), pt(2.0, 0.0)], 1.0);
        let g = [c(1.0); 2];
        let o = pt(0.0, 0.0);
        assert!((c_phi(&mu, 1.0, &g, o) - c(0.5)).norm() < 1e-15);
        assert!((c_phi(&mu, 0.0, &g, o) - c(2.5)).norm() < 1e-15);
        assert_eq!(c_phi(&mu, 3.0, &g, o), c(0.0));
        assert!((c_phi(&mu, 0.0, &g, pt(0.5, 0.0)) - c(1.0 / 1.5)).norm() < 1e-15);
    }

    #[test]
    fn lemma1_examples() {
        let mu = cloud(6, 40);
        let f = random_density(7, 40);
        assert_eq!(lemma1_constant(&mu, &vec![0.0; 40], &f).observed, 0.0);
        let one = atoms(&[pt(0.0, 0.0)], 1.0);
        assert_eq!(lemma1_constant(&one, &[0.1], &[c(1.0)]).observed, 0.0);
        let mut obs = Vec::new();
        for n in [100, 200, 400] {
            let seg = generate(&Generator::Segment {
                a: pt(-0.5, 0.0),
                b: pt(0.5, 0.0),
                n,
            })
            .unwrap();
            obs.push(lemma1_constant(&seg, &vec![0.1; n], &vec![c(1.0); n]).observed);
        }
        assert!(obs.iter().all(|v| v.is_finite() && *v > 0.0));
        let (lo, hi) = obs.iter().fold((f64::INFINITY, 0.0f64), |a, v| (a.0.min(*v), a.1.max(*v)));
        assert!(hi / lo <= 1.1, "{obs:?}");
    }

    #[test]
    fn gl_examples() {
        let mu = cloud(8, 60);
        let b = vec![c(1.0); 60];
        let phi = vec![0.0; 60];
        let sup = (0..60)
            .map(|i| k_phi_maximal(&mu, &phi, &b, mu.z(i), 0.0))
            .fold(0.0, f64::max);
        assert!(epsilon0_and_gl(&mu, &phi, &b, sup * 1.01).unwrap().set.is_empty());
        let one = atoms(&[pt(0.0, 0.0)], 1.0);
        assert!(epsilon0_and_gl(&one, &[0.0], &[c(1.0)], 1e-6).unwrap().set.is_empty());
        assert!(epsilon0_and_gl(&one, &[0.0], &[c(1.0)], 0.0).is_err());

        let small = epsilon0_and_gl(&mu, &phi, &b, sup * 0.2).unwrap();
        let large = epsilon0_and_gl(&mu, &phi, &b, sup * 0.6).unwrap();
        assert!(!large.set.is_empty());
        for (a, b) in small.eps0.iter().zip(&large.eps0) {
            assert!(b <= a);
        }
    }

    #[test]
    fn operator_norm_examples() {
        let pair = atoms(&[pt(-1.0, 0.0), pt(1.0, 0.0)], 1.0);
        assert_eq!(operator_norm(&OperatorMatrix::zeros(&pair)).norm, 0.0);
        let k = OperatorMatrix::cauchy(&pair);
        assert_eq!(k.entry(0, 1), c(-0.5));
        let est = operator_norm(&k);
        assert!(est.converged);
        assert!((est.norm - 0.5).abs() < 1e-8);
        let scaled = operator_norm(&k.scaled(Complex64::new(0.0, -3.0))).norm;
        assert!((scaled - 1.5).abs() < 1e-8);
    }

    #[test]
    fn operator_norm_brackets() {
        let mu = cloud(9, 60);
        let a = OperatorMatrix::cauchy(&mu);
        let est = operator_norm(&a).norm;
        let frob = ksum((0..60).flat_map(|i| {
            let a = &a;
            let mu = &mu;
            (0..60).map(move |j| a.entry(i, j).norm_sqr() * mu.w(i) / mu.w(j))
        }))
        .sqrt();
        assert!(est <= frob * (1.0 + 1e-9));
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let f = random_density(rng.random(), 60);
            let af = a.apply(&f);
            let ratio = (a.inner(&af, &af).re / a.inner(&f, &f).re).sqrt();
            assert!(ratio <= est * (1.0 + 1e-6));
        }
    }

    #[test]
    fn suppressed_norm_is_bounded_by_mass_over_lambda() {
        let mu = cloud(11, 80);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let env = crate::kernel::random_envelope(&mut rng, 3);
        let base = env.values(&mu);
        for lambda in [0.1, 1.0] {
            let phi: Vec<f64> = base.iter().map(|v| v + lambda).collect();
            let n = operator_norm(&OperatorMatrix::suppressed(&mu, &phi).unwrap()).norm;
            assert!(n <= mu.total() / lambda, "lambda {lambda}: {n}");
        }
        assert!(OperatorMatrix::suppressed(&mu, &[0.0]).is_err());
    }

    #[test]
    fn bilinear_form_is_antisymmetric() {
        let mu = cloud(13, 70);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let env = crate::kernel::random_envelope(&mut rng, 3);
        let a = OperatorMatrix::suppressed(&mu, &env.values(&mu)).unwrap();
        let f = random_density(15, 70);
        let g = random_density(16, 70);
        let w = mu.weights();
        let pair = |u: &[Complex64], v: &[Complex64]| ksum_c(u.iter().zip(v).zip(&w).map(|((x, y), w)| x * y * *w));
        let lhs = pair(&f, &a.apply(&g));
        let rhs = pair(&a.apply(&f), &g);
        let scale = ksum(f.iter().zip(&w).map(|(x, w)| x.norm() * w)) * ksum(g.iter().zip(&w).map(|(x, w)| x.norm() * w));
        assert!((lhs + rhs).norm() <= 1e-12 * scale.max(1.0) * 100.0);
        let eta: Vec<Complex64> = (0..70).map(|_| c(rng.random::<f64>() - 0.5)).collect();
        assert!(pair(&eta, &a.apply(&eta)).norm() < 1e-10);
    }

    #[test]
    fn cotlar_examples() {
        let seg = |n| {
            generate(&Generator::Segment {
                a: pt(-0.5, 0.0),
                b: pt(0.5, 0.0),
                n,
            })
            .unwrap()
        };
        let mu = seg(64);
        let phi = vec![0.05; 64];
        let zero = cotlar_check(&mu, &phi, 4.0, 1.5, &vec![c(0.0); 64]).unwrap();
        assert_eq!(zero.observed, 0.0);
        let one = atoms(&[pt(0.0, 0.0)], 1.0);
        assert_eq!(cotlar_check(&one, &[1.0], 4.0, 1.5, &[c(1.0)]).unwrap().observed, 0.0);
        assert!(!cotlar_check(&one, &[0.0], 4.0, 1.5, &[c(1.0)]).unwrap().is_applicable());
        assert!(cotlar_check(&one, &[1.0], 4.0, 2.5, &[c(1.0)]).is_err());
        let mut obs = Vec::new();
        for n in [64, 128, 256] {
            let mu = seg(n);
            let phi = vec![0.05; n];
            obs.push(cotlar_check(&mu, &phi, 4.0, 1.5, &vec![c(1.0); n]).unwrap().observed);
        }
        let (lo, hi) = obs.iter().fold((f64::INFINITY, 0.0f64), |a, v| (a.0.min(*v), a.1.max(*v)));
        assert!(lo > 0.0 && hi / lo < 2.0, "{obs:?}");
    }

    #[test]
    fn blanket_examples() {
        let mu = cloud(17, 300);
        let f = random_density(18, 300);
        let cauchy = |x: Point, y: Point| k_phi_values(x, y, 0.0, 0.0);
        for (name, prof) in [
            ("one", Box::new(|_: f64| 1.0) as Box<dyn Fn(f64) -> f64 + Sync>),
            ("zero", Box::new(|_: f64| 0.0)),
            ("decay", Box::new(|t: f64| (0.1 / t).min(1.0))),
        ] {
            let rep = blanket_check(&mu, cauchy, prof, 0.1, &f).unwrap();
            assert_eq!(rep.pass, Some(true), "{name}: {}", rep.observed);
        }
        let bad = |x: Point, y: Point| k_phi_values(x, y, 0.0, 0.0) * 2.0;
        assert!(!blanket_check(&mu, bad, |_| 1.0, 0.1, &f).unwrap().is_applicable());
    }

    #[test]
    fn weak_type_examples() {
        let mu = cloud(19, 100);
        assert_eq!(weak_l1_norm(&mu, &PlanarMeasure::empty()), 0.0);
        let p = PlanarMeasure::from_points(&[pt(5.0, 0.0)], &[2.0]).unwrap();
        let d = mu.atoms().iter().map(|a| (a.z - p.z(0)).norm()).fold(f64::INFINITY, f64::min);
        assert!(weak_l1_norm(&mu, &p) <= mu.total() * 2.0 / d);

        let n = 20_000;
        let eps = 1e-3;
        let seg = generate(&Generator::Segment {
            a: pt(eps, 0.0),
            b: pt(1.0, 0.0),
            n,
        })
        .unwrap();
        let delta = PlanarMeasure::from_points(&[pt(0.0, 0.0)], &[1.0]).unwrap();
        let w = weak_l1_norm(&seg, &delta);
        assert!((w - 1.0).abs() < 2e-3, "{w}");
        let rep = weak_type_experiment(&seg, &delta, 1.0, 1.0).unwrap();
        assert!((rep.observed - w / 2.0).abs() < 1e-15);
        assert!(weak_type_experiment(&seg, &seg.restrict(&[0]), 1.0, 1.0).is_err());
    }

    #[test]
    fn averaged_kernel_examples() {
        let (x, y) = (pt(0.0, 0.0), pt(0.3, 0.0));
        let fam = [0.1, 0.1, 0.1];
        let probs = [1.0 / 3.0; 3];
        let (v, k) = averaged_kernel(0.2, &fam, &probs, x, y);
        assert!((v - 1.0).abs() < 1e-15);
        assert!((k - 1.0 / (x - y)).norm() < 1e-12);
        let (v, k) = averaged_kernel(0.5, &fam, &probs, x, y);
        assert_eq!((v, k), (0.0, c(0.0)));
        let (v, _) = averaged_kernel(0.0, &[0.1, 0.4], &[0.25, 0.75], x, y);
        assert!((v - 0.25).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn maximal_bounds_every_cutoff(seed in 0u64..1000, eps in 0.0f64..2.0) {
            let mu = cloud(seed, 20);
            let g = random_density(seed + 1, 20);
            let z = pt(0.1, 0.05);
            prop_assert!(cauchy_truncated(&mu, &g, z, eps).norm() <= cauchy_maximal(&mu, &g, z) * (1.0 + 1e-12) + 1e-15);
        }
    }
}
