//! Acceptance battery: one function per criterion, each returning its check reports.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::badness::{is_bad, straddles_grid, BadnessRule};
use crate::bilinear::{bilinear_form, far_interaction_verify, negligible_split_verify, partition, schur_separated_check, sigma1_count_bound, tqr_matrix_verify, Side};
use crate::curvature::{mv_identity_check, permutation_identity_batch};
use crate::error::Result;
use crate::geometry::{pt, sample_lattice, DyadicLattice, DyadicSquare, Rect, SquareKey};
use crate::kernel::{build_phi_d, cz_smoothness_check, random_envelope, suppression_bounds_check, trimmed_lipschitz_check, Envelope, TrimmedEnvelope};
use crate::martingale::{
    bessel_check, carleson_hypothesis_constant, carleson_verify, classify, finite_coefficient_check, mean_zero_check, projection_algebra_check, riesz_ratio, split_check, split_good_bad, standard_difference_energies, Classification,
    MartingaleDecomposition, Projections,
};
use crate::measure::{exceptional_set_above, generate, DiskSet, Generator, GlobalParams, PlanarMeasure};
use crate::pipeline::{theorem1_on, theorem3_on, Density, ExperimentConfig, NORMAL_RADIUS};
use crate::probability::{bad_square_probability, truncated_expectation_properties, WeightedSample};
use crate::report::CheckReport;
use crate::transform::{cotlar_check, lemma1_constant, OperatorMatrix};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Sample sizes: `Full` is the acceptance scale, `Quick` a smoke run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Full,
    Quick,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub seed: u64,
    pub scale: Scale,
    pub params: GlobalParams,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 20240601,
            scale: Scale::Full,
            params: GlobalParams::default(),
        }
    }
}

impl SuiteConfig {
    fn pick(&self, full: u64, quick: u64) -> u64 {
        match self.scale {
            Scale::Full => full,
            Scale::Quick => quick,
        }
    }
}

/// Outcome of one criterion.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Criterion {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub summary: String,
    pub checks: Vec<CheckReport>,
    #[serde(skip)]
    pub seconds: f64,
}

impl Criterion {
    fn new(id: u32, name: &str, checks: Vec<CheckReport>, extra_ok: bool, summary: String, started: Instant) -> Self {
        let pass = extra_ok && checks.iter().all(|c| c.pass != Some(false));
        Criterion {
            id,
            name: name.to_string(),
            pass,
            summary,
            checks,
            seconds: started.elapsed().as_secs_f64(),
        }
    }

    /// One line: id, verdict, name, summary.
    pub fn line(&self) -> String {
        format!("criterion {:>2} {} {}: {}", self.id, if self.pass { "PASS" } else { "FAIL" }, self.name, self.summary)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub criteria: Vec<Criterion>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

pub const CRITERIA: [u32; 12] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12];

pub fn run_criterion(id: u32, cfg: &SuiteConfig) -> Result<Criterion> {
    match id {
        1 => Ok(kernel_suite(cfg)),
        2 => martingale_suite(cfg),
        3 => carleson_suite(cfg),
        4 => far_interaction_suite(cfg),
        5 => negligible_suite(cfg),
        6 => bad_square_suite(cfg),
        7 => truncation_suite(cfg),
        8 => curvature_suite(cfg),
        9 => partition_suite(cfg),
        10 => theorem3_suite(cfg),
        11 => stability_suite(cfg),
        12 => exceptional_suite(cfg),
        _ => crate::error::domain(format!("no criterion {id}")),
    }
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let criteria = CRITERIA.iter().map(|&id| run_criterion(id, cfg)).collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport { seed: cfg.seed, criteria })
}

/// Count of failing checks and the worst `observed / bound` among checks with a bound.
fn tally(checks: &[CheckReport]) -> (usize, usize, f64) {
    let applicable = checks.iter().filter(|c| c.pass.is_some()).count();
    let failed = checks.iter().filter(|c| c.pass == Some(false)).count();
    let worst = checks
        .iter()
        .filter_map(|c| match (c.bound, c.pass) {
            (Some(b), Some(_)) if b > 0.0 => Some(c.observed / b),
            _ => None,
        })
        .fold(0.0, f64::max);
    (applicable, failed, worst)
}

/// Collapses many reports of the same check into one.
fn fold_reports(name: &str, reports: &[CheckReport], seed: u64) -> CheckReport {
    let (applicable, failed, worst) = tally(reports);
    let samples: u64 = reports.iter().map(|r| r.samples).sum();
    CheckReport::verdict(name, worst, 1.0, failed == 0, samples, seed).with_note(format!("{applicable} applicable, {failed} failed, worst observed/bound {worst:.4}"))
}

fn random_unit(rng: &mut impl Rng) -> Complex64 {
    let r = rng.random::<f64>().sqrt();
    Complex64::from_polar(r, rng.random::<f64>() * std::f64::consts::TAU)
}

fn random_vector(rng: &mut impl Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| random_unit(rng)).collect()
}

fn normalized(g: &Generator) -> Result<PlanarMeasure> {
    Ok(generate(g)?.normalized(NORMAL_RADIUS).0)
}

fn random_generator(rng: &mut impl Rng, max_atoms: usize) -> Generator {
    let n = rng.random_range(8..=max_atoms.max(8));
    match rng.random_range(0..4) {
        0 => Generator::RandomCloud { seed: rng.random(), n },
        1 => Generator::Segment {
            a: pt(0.0, 0.0),
            b: Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::PI),
            n,
        },
        2 => Generator::Arc {
            center: pt(0.0, 0.0),
            radius: 1.0,
            start: rng.random::<f64>(),
            span: 1.0 + 5.0 * rng.random::<f64>(),
            n,
        },
        _ => {
            let top = ((max_atoms as f64).log(4.0).floor() as u32).clamp(1, 5);
            Generator::CantorCorner { level: rng.random_range(1..=top) }
        }
    }
}

/// A random valid instance: measure, adapted density `h = 1 + g` and a classification.
pub struct Instance {
    pub mu: PlanarMeasure,
    pub g: Vec<Complex64>,
    pub h: Vec<Complex64>,
    pub delta: f64,
    pub class: Classification,
}

/// `g` has modulus up to a random multiple of `delta`, so every kind of terminal square
/// occurs; the exceptional set is empty half of the time.
pub fn random_instance(seed: u64, max_atoms: usize, delta: f64, n_max: u32) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = normalized(&random_generator(&mut rng, max_atoms))?;
    let kappa = [0.5, 1.5, 4.0][rng.random_range(0..3)];
    let g = random_perturbation(&mut rng, &mu, kappa * delta);
    let h: Vec<Complex64> = g.iter().map(|v| ONE + v).collect();
    let hset = if rng.random_bool(0.5) {
        DiskSet::empty()
    } else {
        let m = [3.0, 10.0, 30.0][rng.random_range(0..3)];
        exceptional_set_above(&mu, m, mu.max_nearest_distance())?.h
    };
    let lattice = sample_lattice(rng.random());
    let class = classify(&lattice, &mu, &g, delta, &hset, n_max)?;
    Ok(Instance { mu, g, h, delta, class })
}

/// Random `g` with `|g| <= scale` before centring; centring makes `<h>` over the root equal 1,
/// which keeps the always-transit root admissible.
fn random_perturbation(rng: &mut impl Rng, mu: &PlanarMeasure, scale: f64) -> Vec<Complex64> {
    let g: Vec<Complex64> = (0..mu.len()).map(|_| random_unit(rng) * scale).collect();
    let mean = g.iter().zip(mu.atoms()).map(|(v, a)| v * a.w).sum::<Complex64>() / mu.total();
    g.into_iter().map(|v| v - mean).collect()
}

fn transit_keys(class: &Classification) -> Vec<SquareKey> {
    class.transit().map(|n| n.square.key).collect()
}

/// Criterion 1: suppression bounds, antisymmetry and the smoothness constant.
pub fn kernel_suite(cfg: &SuiteConfig) -> Criterion {
    let t0 = Instant::now();
    let n = cfg.pick(1_000_000, 50_000);
    let zero = Envelope::zero();
    let checks = vec![
        suppression_bounds_check(None, n, cfg.seed),
        suppression_bounds_check(Some(&zero), n, cfg.seed + 1),
        cz_smoothness_check(None, n, cfg.seed + 2),
        cz_smoothness_check(Some(&zero), n, cfg.seed + 3),
    ];
    let secs = t0.elapsed().as_secs_f64();
    let summary = format!(
        "{n} samples per check, max |k| max(phi) or |k||x-y| = {:.6}, CZ constant {:.4} (<= 16), {secs:.1}s (< 30s)",
        checks[0].observed.max(checks[1].observed),
        checks[2].observed.max(checks[3].observed)
    );
    Criterion::new(1, "kernel suite", checks, secs < 30.0, summary, t0)
}

fn martingale_instance(seed: u64, delta: f64) -> Result<Vec<CheckReport>> {
    let inst = random_instance(seed, 1024, delta, 12)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let proj = Projections::new(&inst.class, &inst.mu, &inst.h)?;
    let n = inst.mu.len();
    let phi = random_vector(&mut rng, n);
    let psi = random_vector(&mut rng, n);
    let d = proj.decompose(&phi);
    let recon = d
        .reconstruct()
        .iter()
        .zip(&phi)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let keys = transit_keys(&inst.class);
    let sample: Vec<SquareKey> = (0..keys.len().min(6)).map(|_| keys[rng.random_range(0..keys.len())]).collect();
    let coeffs: BTreeMap<SquareKey, Complex64> = keys
        .iter()
        .filter_map(|k| rng.random_bool(0.6).then(|| (*k, random_unit(&mut rng))))
        .collect();
    let bad: BTreeSet<SquareKey> = keys.iter().filter(|_| rng.random_bool(0.3)).copied().collect();
    let (good_part, bad_part) = split_good_bad(&d, n, |k| bad.contains(k));
    let mut out = vec![
        CheckReport::upper("reconstruction", recon, 1e-9, n as u64, seed),
        projection_algebra_check(&proj, &phi, &sample),
        mean_zero_check(&inst.mu, &inst.class, &d, &phi),
        riesz_ratio(&inst.mu, &phi, &d),
        bessel_check(&inst.mu, &d, &psi),
        split_check(&inst.mu, &phi, &good_part, &bad_part),
    ];
    if !coeffs.is_empty() {
        out.push(finite_coefficient_check(&inst.mu, &d, &coeffs));
    }
    Ok(out)
}

/// Criterion 2: reconstruction, projection algebra, Riesz, finite-coefficient and Bessel
/// bounds on random valid instances.
pub fn martingale_suite(cfg: &SuiteConfig) -> Result<Criterion> {
    let t0 = Instant::now();
    let count = cfg.pick(1000, 60);
    let delta = cfg.params.delta;
    let rows = (0..count)
        .into_par_iter()
        .map(|i| martingale_instance(cfg.seed.wrapping_add(i * 7919), delta))
        .collect::<Result<Vec<_>>>()?;
    let mut by_name: BTreeMap<String, Vec<CheckReport>> = BTreeMap::new();
    for r in rows.into_iter().flatten() {
        by_name.entry(r.name.clone()).or_default().push(r);
    }
    let riesz = &by_name["riesz_ratio"];
    let lo = riesz.iter().map(|r| r.observed).fold(f64::INFINITY, f64::min);
    let hi = riesz.iter().map(|r| r.observed).fold(0.0, f64::max);
    let checks: Vec<CheckReport> = by_name.iter().map(|(k, v)| fold_reports(k, v, cfg.seed)).collect();
    let secs = t0.elapsed().as_secs_f64();
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
    let summary = format!("{count} instances, Riesz ratio in [{lo:.4}, {hi:.4}], failing: {failed:?}, {secs:.1}s (< 120s)");
    Ok(Criterion::new(2, "martingale suite", checks, secs < 120.0, summary, t0))
}

fn carleson_instance(seed: u64, delta: f64) -> Result<Vec<CheckReport>> {
    let inst = random_instance(seed, 512, delta, 12)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xca41);
    let n = inst.mu.len();
    let phi: Vec<Complex64> = random_vector(&mut rng, n)
        .into_iter()
        .map(|v| if rng.random_bool(0.2) { v * 10.0 } else { v })
        .collect();
    let energies = standard_difference_energies(&inst.class, &inst.mu, &inst.g);
    let a1 = carleson_hypothesis_constant(&energies, &inst.class);
    let mut first = carleson_verify(&energies, a1, &inst.class, &inst.mu, &phi)?;
    first.name = "carleson_difference_energies".into();
    let random: BTreeMap<SquareKey, f64> = inst
        .class
        .nodes()
        .filter_map(|node| rng.random_bool(0.5).then(|| (node.square.key, rng.random::<f64>().powi(3) * node.mass * 4.0)))
        .collect();
    let a2 = carleson_hypothesis_constant(&random, &inst.class);
    let mut second = carleson_verify(&random, a2, &inst.class, &inst.mu, &phi)?;
    second.name = "carleson_random_family".into();
    Ok(vec![first, second])
}

/// Criterion 3: Carleson embedding with constant `4 A`.
pub fn carleson_suite(cfg: &SuiteConfig) -> Result<Criterion> {
    let t0 = Instant::now();
    let count = cfg.pick(1000, 60);
    let delta = cfg.params.delta;
    let rows = (0..count)
        .into_par_iter()
        .map(|i| carleson_instance(cfg.seed.wrapping_add(31 + i * 104_729), delta))
        .collect::<Result<Vec<_>>>()?;
    let mut by_name: BTreeMap<String, Vec<CheckReport>> = BTreeMap::new();
    for r in rows.into_iter().flatten() {
        by_name.entry(r.name.clone()).or_default().push(r);
    }
    let checks: Vec<CheckReport> = by_name.iter().map(|(k, v)| fold_reports(k, v, cfg.seed)).collect();
    let summary = checks
        .iter()
        .map(|c| format!("{}: {}", c.name, c.note.clone().unwrap_or_default()))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Criterion::new(3, "Carleson embedding", checks, true, summary, t0))
}

fn square_containing(lattice: &DyadicLattice, level: u32, p: Complex64) -> DyadicSquare {
    lattice.locate(level, p)
}

/// One far-interaction configuration, or `None` when the sampled supports are unusable.
fn far_sample(kmat: &OperatorMatrix, mu: &PlanarMeasure, d1: &DyadicLattice, d2: &DyadicLattice, rng: &mut impl Rng) -> Option<CheckReport> {
    let n = mu.len();
    let lq = rng.random_range(1..=7u32);
    let lr = rng.random_range(1..=lq);
    let q = square_containing(d1, lq, mu.z(rng.random_range(0..n)));
    let r = square_containing(d2, lr, mu.z(rng.random_range(0..n)));
    let in_q: Vec<usize> = (0..n).filter(|&i| q.contains(mu.z(i))).collect();
    if in_q.len() < 2 {
        return None;
    }
    let alpha = 0.25;
    let need = q.side().powf(alpha) * r.side().powf(1.0 - alpha);
    let qr = q.rect();
    let in_r: Vec<usize> = (0..n)
        .filter(|&i| r.contains(mu.z(i)) && qr.dist_point(mu.z(i)) >= need)
        .collect();
    if in_r.is_empty() {
        return None;
    }
    let mut f = vec![Complex64::new(0.0, 0.0); n];
    for &i in &in_q {
        f[i] = random_unit(rng);
    }
    let mq: f64 = in_q.iter().map(|&i| mu.w(i)).sum();
    let mean: Complex64 = in_q.iter().map(|&i| f[i] * mu.w(i)).sum::<Complex64>() / mq;
    for &i in &in_q {
        f[i] -= mean;
    }
    let mut g = vec![Complex64::new(0.0, 0.0); n];
    for &i in &in_r {
        g[i] = random_unit(rng);
    }
    let rep = far_interaction_verify(kmat, mu, &q, &r, &f, &g, 16.0, 1.0);
    rep.is_applicable().then_some(rep)
}

/// Criterion 4: far interaction and the matrix lemma on Cantor and segment measures.
pub fn far_interaction_suite(cfg: &SuiteConfig) -> Result<Criterion> {
    let t0 = Instant::now();
    let target = cfg.pick(10_000, 500);
    let measures = [
        normalized(&Generator::CantorCorner { level: 4 })?,
        normalized(&Generator::Segment { a: pt(0.0, 0.0), b: pt(1.0, 0.3), n: 256 })?,
    ];
    let kernels_per_measure = 5u64;
    let jobs: Vec<(usize, u64)> = (0..measures.len()).flat_map(|m| (0..kernels_per_measure).map(move |k| (m, k))).collect();
    let per_job = target.div_ceil(jobs.len() as u64);
    let far = jobs
        .par_iter()
        .map(|&(mi, k)| {
            let mu = &measures[mi];
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((mi as u64) << 32 | k));
            let phi = if k == 0 { vec![0.0; mu.len()] } else { random_envelope(&mut rng, 4).values(mu) };
            let kmat = OperatorMatrix::suppressed(mu, &phi)?;
            let d1 = sample_lattice(rng.random());
            let d2 = sample_lattice(rng.random());
            let mut out = Vec::new();
            let mut tries = 0;
            while (out.len() as u64) < per_job && tries < per_job * 200 {
                tries += 1;
                if let Some(r) = far_sample(&kmat, mu, &d1, &d2, &mut rng) {
                    out.push(r);
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    let far_report = fold_reports("far_interaction", &far, cfg.seed);
    let pairs = cfg.pick(20, 4);
    let tqr = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mu = &measures[(i % 2) as usize];
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(977 * i));
            let zero = vec![Complex64::new(0.0, 0.0); mu.len()];
            let c1 = classify(&sample_lattice(rng.random()), mu, &zero, cfg.params.delta, &DiskSet::empty(), 10)?;
            let c2 = classify(&sample_lattice(rng.random()), mu, &zero, cfg.params.delta, &DiskSet::empty(), 10)?;
            let m_const = crate::bilinear::transit_growth_constant(&[&c1, &c2], mu);
            let mut reps = Vec::new();
            for _ in 0..5 {
                let a: BTreeMap<SquareKey, f64> = c1.transit().map(|n| (n.square.key, rng.random::<f64>())).collect();
                let b: BTreeMap<SquareKey, f64> = c2.transit().map(|n| (n.square.key, rng.random::<f64>())).collect();
                let t = tqr_matrix_verify(&c1, &c2, mu, 1.0, m_const, &a, &b, i)?;
                reps.push(CheckReport::verdict("tqr_matrix", t.norm, t.constant, t.pass, t.random.samples, i).with_note(format!("M = {:.4}", t.m_verified)));
            }
            Ok(reps)
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    let tqr_report = fold_reports("tqr_matrix", &tqr, cfg.seed);
    let enough = far.len() as u64 >= target;
    let summary = format!(
        "far interaction: {} configurations, {}; T_QR: {} draws, {}",
        far.len(),
        far_report.note.clone().unwrap_or_default(),
        tqr.len(),
        tqr_report.note.clone().unwrap_or_default()
    );
    Ok(Criterion::new(4, "far interaction and T_QR", vec![far_report, tqr_report], enough, summary, t0))
}

fn schur_sample(mu: &PlanarMeasure, rng: &mut impl Rng) -> Result<Option<CheckReport>> {
    let n = mu.len();
    let phi = random_envelope(rng, 4).values(mu);
    let kmat = OperatorMatrix::suppressed(mu, &phi)?;
    let lattice = sample_lattice(rng.random());
    let level = rng.random_range(1..=5u32);
    let rect = square_containing(&lattice, level, mu.z(rng.random_range(0..n))).rect();
    let mut e1 = vec![Complex64::new(0.0, 0.0); n];
    let mut e2 = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        if rect.contains_closed(mu.z(i)) {
            e2[i] = random_unit(rng);
        } else {
            e1[i] = random_unit(rng);
        }
    }
    let rep = schur_separated_check(&kmat, mu, &rect, &e1, &e2);
    Ok(rep.is_applicable().then_some(rep))
}

fn split_instance(seed: u64, cfg: &SuiteConfig) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = normalized(&random_generator(&mut rng, 200))?;
    let n = mu.len();
    let delta = cfg.params.delta;
    let g = random_perturbation(&mut rng, &mu, 0.8 * delta);
    let h: Vec<Complex64> = g.iter().map(|v| ONE + v).collect();
    let c1 = classify(&sample_lattice(rng.random()), &mu, &g, delta, &DiskSet::empty(), 10)?;
    let c2 = classify(&sample_lattice(rng.random()), &mu, &g, delta, &DiskSet::empty(), 10)?;
    let mut rects = c1.envelope_squares();
    rects.extend(c2.envelope_squares());
    let theta = build_phi_d(&Envelope::zero(), &rects).values(&mu);
    let kmat = OperatorMatrix::suppressed(&mu, &theta)?;
    let p1 = Projections::new(&c1, &mu, &h)?;
    let p2 = Projections::new(&c2, &mu, &h)?;
    let d1 = p1.decompose(&random_vector(&mut rng, n));
    let d2 = p2.decompose(&random_vector(&mut rng, n));
    let all1: BTreeSet<SquareKey> = d1.deltas.keys().copied().collect();
    let all2: BTreeSet<SquareKey> = d2.deltas.keys().copied().collect();
    let s1 = Side { proj: &p1, decomp: &d1, good: &all1 };
    let s2 = Side { proj: &p2, decomp: &d2, good: &all2 };
    let mut out = Vec::new();
    for qk in &all1 {
        let q = c1.lattice.square(*qk);
        for rk in &all2 {
            let r = c2.lattice.square(*rk);
            if q.level() != r.level() || !q.rect().intersects(&r.rect()) {
                continue;
            }
            if let Some(rep) = negligible_split_verify(&kmat, &mu, &s1, &s2, qk, rk, cfg.params.tilde_m, delta) {
                let worst = rep.separated_ratio.max(rep.terminal_ratio);
                out.push(CheckReport::verdict("negligible_split", worst, 1.0, rep.pass, 1, seed));
                out.push(CheckReport::upper("transit_cancellation", rep.cancellation, 1e-10, 1, seed));
            }
        }
    }
    Ok(out)
}

/// Criterion 5: the `4 M` separated bound and exact transit/transit cancellation.
pub fn negligible_suite(cfg: &SuiteConfig) -> Result<Criterion> {
    let t0 = Instant::now();
    let samples = cfg.pick(1000, 100);
    let measures = [
        normalized(&Generator::CantorCorner { level: 4 })?,
        normalized(&Generator::Segment { a: pt(0.0, 0.0), b: pt(1.0, 0.0), n: 256 })?,
        normalized(&Generator::RandomCloud { seed: cfg.seed, n: 256 })?,
    ];
    let schur = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(13 * i + 5));
            schur_sample(&measures[(i % 3) as usize], &mut rng)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    let inst = cfg.pick(20, 4);
    let splits = (0..inst)
        .into_par_iter()
        .map(|i| split_instance(cfg.seed.wrapping_add(7 + 1009 * i), cfg))
        .collect::<Result<Vec<_>>>()?
        .concat();
    let (split, cancel): (Vec<CheckReport>, Vec<CheckReport>) = splits.into_iter().partition(|c| c.name == "negligible_split");
    let max_cancel = cancel.iter().map(|c| c.observed).fold(0.0, f64::max);
    let checks = vec![
        fold_reports("negligible_schur", &schur, cfg.seed),
        fold_reports("negligible_split", &split, cfg.seed),
        CheckReport::upper("transit_cancellation", max_cancel, 1e-10, cancel.len() as u64, cfg.seed),
    ];
    let summary = format!(
        "{} separated pairs ({}); {} child splits ({}); max transit/transit term {max_cancel:.2e}",
        schur.len(),
        checks[0].note.clone().unwrap_or_default(),
        split.len(),
        checks[1].note.clone().unwrap_or_default()
    );
    let nonempty = !schur.is_empty() && !split.is_empty();
    Ok(Criterion::new(5, "negligible contours", checks, nonempty, summary, t0))
}

/// Criterion 6: rim badness frequency against `68 2^(-k alpha)` and the exact oracle.
pub fn bad_square_suite(cfg: &SuiteConfig) -> Result<Criterion> {
    let t0 = Instant::now();
    let trials = cfg.pick(10_000, 2_000);
    let m = cfg.params.m;
    let alpha = 0.25;
    let mut checks = Vec::new();
    let mut parts = Vec::new();
    let cases: [(f64, u32); 2] = [(2f64.powi(-10), m), (2f64.powi(-31), 25)];
    for (j, (side, k0)) in cases.into_iter().enumerate() {
        let x0 = 0.013 + 0.1 * j as f64;
        let q = Rect::new(x0, x0 + side, -0.071, -0.071 + side);
        let ks: Vec<u32> = (k0..k0 + 5).collect();
        let est = bad_square_probability(&q, k0, &ks, alpha, trials, cfg.seed + j as u64)?;
        for s in &est.scales {
            let inside = s.exact >= s.wilson_lo && s.exact <= s.wilson_hi;
            checks.push(CheckReport::verdict(&format!("rim_bound_l{}_k{}", -side.log2() as i32, s.k), s.wilson_hi, s.bound, s.pass, trials, est.seed));
            checks.push(
                CheckReport::verdict(&format!("rim_oracle_l{}_k{}", -side.log2() as i32, s.k), s.exact, s.wilson_hi, inside, trials, est.seed)
                    .with_note(format!("MC {} in [{}, {}]", s.frequency, s.wilson_lo, s.wilson_hi)),
            );
            parts.push(format!("k={} freq {:.4} exact {:.4} bound {:.3}", s.k, s.frequency, s.exact, s.bound));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let summary = format!("{trials} trials per scale; {}; {secs:.1}s (< 180s)", parts.join(", "));
    Ok(Criterion::new(6, "bad-square probability", checks, secs < 180.0, summary, t0))
}

/// Criterion 7: properties A and B of the truncated expectation and trimmed envelopes.
pub fn truncation_suite(cfg: &SuiteConfig) -> Result<Criterion> {
    let t0 = Instant::now();
    let count = cfg.pick(1000, 200);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut props = Vec::new();
    for _ in 0..count {
        let n = rng.random_range(1..=40);
        let values: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>().powi(2) * 10.0 })
            .collect();
        let probs: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = probs.iter().sum();
        let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
        let s = WeightedSample::new(values, probs)?;
        let beta = rng.random_range(0.001..0.999);
        props.push(truncated_expectation_properties(&s, beta)?);
    }
    let families = cfg.pick(20, 5);
    let mut lips = Vec::new();
    for f in 0..families {
        let k = rng.random_range(2..=8);
        let envs: Vec<Envelope> = (0..k).map(|_| random_envelope(&mut rng, 4)).collect();
        let t = TrimmedEnvelope::uniform(envs, rng.random_range(0.05..0.95))?;
        lips.push(trimmed_lipschitz_check(&t, 10_000, cfg.seed + f)?);
    }
    let checks = vec![fold_reports("truncated_expectation_properties", &props, cfg.seed), fold_reports("trimmed_lipschitz", &lips, cfg.seed)];
    let summary = format!(
        "{count} samples: {}; {families} trimmed families: {}",
        checks[0].note.clone().unwrap_or_default(),
        checks[1].note.clone().unwrap_or_default()
    );
    Ok(Criterion::new(7, "truncated expectation", checks, true, summary, t0))
}

/// Criterion 8: discrete curvature identity and the permutation formula.
pub fn curvature_suite(cfg: &SuiteConfig) -> Result<Criterion> {
    let t0 = Instant::now();
    let n = cfg.pick(512, 128) as usize;
    let gens = [
        ("line", Generator::Segment { a: pt(0.0, 0.0), b: pt(1.0, 0.0), n }),
        ("circle", Generator::Arc { center: pt(0.0, 0.0), radius: 1.0, start: 0.0, span: std::f64::consts::TAU, n }),
        ("cloud", Generator::RandomCloud { seed: cfg.seed, n }),
        ("cantor", Generator::CantorCorner { level: if n >= 256 { 4 } else { 3 } }),
    ];
    let mut checks = Vec::new();
    let mut parts = Vec::new();
    let mut slowest = 0.0f64;
    for (name, g) in gens {
        let t = Instant::now();
        let mu = generate(&g)?;
        let mut rep = mv_identity_check(&mu)?;
        let secs = t.elapsed().as_secs_f64();
        slowest = slowest.max(secs);
        parts.push(format!("{name}({}) {:.1e}", mu.len(), rep.observed));
        rep.name = format!("mv_identity_{name}");
        checks.push(rep);
    }
    let triples = cfg.pick(100_000, 10_000);
    let perm = permutation_identity_batch(triples, cfg.seed);
    parts.push(format!("permutation worst {:.1e} over {triples}", perm.observed));
    checks.push(perm);
    let summary = format!("{}; slowest {slowest:.2}s (< 60s)", parts.join(", "));
    Ok(Criterion::new(8, "curvature identity", checks, slowest < 60.0, summary, t0))
}

/// Good transit squares. With `strict` the consolidated badness rule decides; otherwise only
/// squares meeting a larger grid line of the other lattice are discarded.
fn good_set(class: &Classification, other: &DyadicLattice, rule: &BadnessRule, mu: &PlanarMeasure, strict: bool) -> Result<BTreeSet<SquareKey>> {
    let mut out = BTreeSet::new();
    for n in class.transit() {
        let bad = if n.square.side() > 0.5 {
            false
        } else if strict {
            is_bad(&n.square, other, rule, mu)?.is_bad()
        } else {
            straddles_grid(&n.square.rect(), other, rule.m)
        };
        if !bad {
            out.insert(n.square.key);
        }
    }
    Ok(out)
}

fn good_sum(d: &MartingaleDecomposition, good: &BTreeSet<SquareKey>, n: usize) -> Vec<Complex64> {
    split_good_bad(d, n, |k| !good.contains(k)).0.iter().zip(&d.lambda_part).map(|(a, l)| a - l).collect()
}

fn partition_instance(seed: u64, cfg: &SuiteConfig, strict: bool) -> Result<(CheckReport, CheckReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = normalized(&random_generator(&mut rng, 256))?;
    let n = mu.len();
    let delta = cfg.params.delta;
    let g = random_perturbation(&mut rng, &mu, 0.8 * delta);
    let h: Vec<Complex64> = g.iter().map(|v| ONE + v).collect();
    let l1 = sample_lattice(rng.random());
    let l2 = sample_lattice(rng.random());
    let c1 = classify(&l1, &mu, &g, delta, &DiskSet::empty(), 10)?;
    let c2 = classify(&l2, &mu, &g, delta, &DiskSet::empty(), 10)?;
    let theta = random_envelope(&mut rng, 4).values(&mu);
    let kmat = OperatorMatrix::suppressed(&mu, &theta)?;
    let p1 = Projections::new(&c1, &mu, &h)?;
    let p2 = Projections::new(&c2, &mu, &h)?;
    let phi = random_vector(&mut rng, n);
    let psi = random_vector(&mut rng, n);
    let d1 = p1.decompose(&phi);
    let d2 = p2.decompose(&psi);
    let rule = BadnessRule {
        m: cfg.params.m,
        alpha: cfg.params.alpha(),
        tilde_m: cfg.params.tilde_m,
    };
    let g1 = good_set(&c1, &l2, &rule, &mu, strict)?;
    let g2 = good_set(&c2, &l1, &rule, &mu, strict)?;
    let s1 = Side { proj: &p1, decomp: &d1, good: &g1 };
    let s2 = Side { proj: &p2, decomp: &d2, good: &g2 };
    let part = partition(&kmat, &mu, &s1, &s2, cfg.params.m, cfg.params.alpha())?;
    let direct = bilinear_form(&kmat, &mu, &good_sum(&d1, &g1, n), &good_sum(&d2, &g2, n));
    let total = part.total();
    let scale = part.pairs.iter().map(|p| p.value.norm()).sum::<f64>().max(direct.norm());
    let rel = if scale > 0.0 { (total - direct).norm() / scale } else { 0.0 };
    let completeness = CheckReport::upper("partition_completeness", rel, 1e-8, part.pairs.len() as u64, seed).with_note(format!("direct {direct}, pairs {}", part.pairs.len()));
    let count = CheckReport::upper("sigma1_count", part.max_sigma1_count as f64, sigma1_count_bound(cfg.params.m), part.pairs.len() as u64, seed);
    Ok((completeness, count))
}

/// Criterion 9: the tagged pair sums reconstruct the good-part form; `sigma_1` counts.
///
/// The consolidated rule leaves only squares of side above `2^-(m+1)` good at these depths
/// (its rim exceeds the grid spacing until `k >= 17`), so a second family keeps every square
/// that does not meet a larger grid line of the other lattice.
pub fn partition_suite(cfg: &SuiteConfig) -> Result<Criterion> {
    let t0 = Instant::now();
    let count = cfg.pick(24, 4);
    let mut checks = Vec::new();
    let mut parts = Vec::new();
    for (label, strict) in [("rule", true), ("non_straddling", false)] {
        let rows = (0..count)
            .into_par_iter()
            .map(|i| partition_instance(cfg.seed.wrapping_add(3 + 7777 * i), cfg, strict))
            .collect::<Result<Vec<_>>>()?;
        let (a, b): (Vec<CheckReport>, Vec<CheckReport>) = rows.into_iter().unzip();
        let worst_rel = a.iter().map(|c| c.observed).fold(0.0, f64::max);
        let worst_count = b.iter().map(|c| c.observed).fold(0.0, f64::max);
        let pairs: u64 = a.iter().map(|c| c.samples).sum();
        checks.push(fold_reports(&format!("partition_completeness_{label}"), &a, cfg.seed));
        checks.push(fold_reports(&format!("sigma1_count_{label}"), &b, cfg.seed));
        parts.push(format!("{label}: {count} instances, {pairs} pairs, worst relative gap {worst_rel:.2e} (<= 1e-8), max sigma1 count {worst_count}"));
    }
    let summary = format!("{}; count bound {}", parts.join("; "), sigma1_count_bound(cfg.params.m));
    Ok(Criterion::new(9, "sigma partition", checks, true, summary, t0))
}

/// Scenarios used for the explicit-fraction run. Atom spacings after normalisation are at
/// least `4e-3`, several times the largest regulariser `tau = 1e-3`.
pub fn theorem3_scenarios() -> Vec<ExperimentConfig> {
    let seg = Generator::Segment { a: pt(0.0, 0.0), b: pt(1.0, 0.0), n: 64 };
    let circ = Generator::Arc { center: pt(0.0, 0.0), radius: 1.0, start: 0.0, span: std::f64::consts::TAU, n: 256 };
    let cantor = Generator::CantorCorner { level: 3 };
    let mut out = vec![
        ExperimentConfig::new("segment-one", seg.clone()),
        ExperimentConfig::new("circle-one", circ),
        ExperimentConfig::new("cantor-one", cantor.clone()),
    ];
    let mut c = ExperimentConfig::new("segment-checker", seg);
    c.density = Density::Checkerboard { cells: 8, gamma: 0.1 };
    out.push(c);
    let mut c = ExperimentConfig::new("cantor-checker", cantor);
    c.density = Density::Checkerboard { cells: 4, gamma: 0.3 };
    out.push(c);
    out
}

/// Criterion 10: `mu(F) >= 3 gamma / 16` on hypothesis-passing instances and tau stability.
pub fn theorem3_suite(cfg: &SuiteConfig) -> Result<Criterion> {
    let t0 = Instant::now();
    let mut scen = theorem3_scenarios();
    if cfg.scale == Scale::Quick {
        scen.truncate(2);
    }
    let rows = scen
        .par_iter()
        .map(|c| {
            let mut c = c.clone();
            c.seed = cfg.seed;
            c.params = cfg.params.clone();
            let mu = c.measure()?;
            theorem3_on(&c, &mu).map(|f| (c.scenario.clone(), f.report))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    let mut parts = Vec::new();
    let mut hyp_ok = 0;
    for (name, rep) in &rows {
        let frac = rep.check("f_fraction").cloned();
        let tau = rep.check("tau_stability").cloned();
        if rep.hypotheses_hold() {
            hyp_ok += 1;
        }
        for (label, c) in [("f_fraction", frac.clone()), ("tau_stability", tau.clone())] {
            if let Some(mut c) = c {
                c.name = format!("{label}_{name}");
                checks.push(c);
            }
        }
        if !rep.hard_asserts_pass() {
            let failed: Vec<String> = rep.checks.iter().filter(|c| c.pass == Some(false)).map(|c| c.name.clone()).collect();
            checks.push(CheckReport::verdict(&format!("hard_asserts_{name}"), 0.0, 0.0, false, 1, cfg.seed).with_note(failed.join(",")));
        }
        parts.push(format!(
            "{name}: mu(F)/|mu| {:.3} >= 3 gamma/16 = {:.4}, tau spread {:.1e}, hypotheses {}",
            frac.as_ref().and_then(|c| c.bound).unwrap_or(f64::NAN),
            frac.as_ref().map(|c| c.observed).unwrap_or(f64::NAN),
            tau.map(|c| c.observed).unwrap_or(f64::NAN),
            if rep.hypotheses_hold() { "hold" } else { "fail" }
        ));
    }
    let summary = parts.join("; ");
    Ok(Criterion::new(10, "explicit fraction", checks, hyp_ok > 0, summary, t0))
}

/// Discretisations with `n` in {64, 128, 256}; the Cantor construction only has 64 and 256.
pub fn stability_families() -> Vec<(&'static str, Vec<Generator>)> {
    let seg = [64, 128, 256].map(|n| Generator::Segment { a: pt(0.0, 0.0), b: pt(1.0, 0.0), n }).to_vec();
    let circ = [64, 128, 256]
        .map(|n| Generator::Arc { center: pt(0.0, 0.0), radius: 1.0, start: 0.0, span: std::f64::consts::TAU, n })
        .to_vec();
    let cantor = vec![Generator::CantorCorner { level: 3 }, Generator::CantorCorner { level: 4 }];
    vec![("segment", seg), ("circle", circ), ("cantor", cantor)]
}

fn spread_check(name: &str, values: &[f64], seed: u64) -> CheckReport {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    let ratio = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    CheckReport::verdict(name, ratio, 2.0, ratio < 2.0, values.len() as u64, seed).with_note(format!("{values:.4?}"))
}

/// Criterion 11: reported constants vary by less than 2x across discretisation levels.
pub fn stability_suite(cfg: &SuiteConfig) -> Result<Criterion> {
    let t0 = Instant::now();
    let mut checks = Vec::new();
    let mut parts = Vec::new();
    for (family, gens) in stability_families() {
        let mut l1 = Vec::new();
        let mut cot = Vec::new();
        let mut ratio = Vec::new();
        for g in &gens {
            let mu = normalized(g)?;
            let phi = vec![0.06; mu.len()];
            let one = vec![ONE; mu.len()];
            l1.push(lemma1_constant(&mu, &phi, &one).observed);
            cot.push(cotlar_check(&mu, &phi, cfg.params.m_ahlfors, 1.5, &one)?.observed);
            let mut c = ExperimentConfig::new(family, g.clone());
            c.seed = cfg.seed;
            c.params = cfg.params.clone();
            let rep = theorem1_on(&c, &mu)?;
            ratio.push(rep.quantity("ratio").unwrap_or(f64::NAN));
        }
        for (label, v) in [("lemma1", &l1), ("cotlar", &cot), ("norm_ratio", &ratio)] {
            let c = spread_check(&format!("{label}_{family}"), v, cfg.seed);
            parts.push(format!("{family} {label} max/min {:.3}", c.observed));
            checks.push(c);
        }
    }
    let summary = parts.join(", ");
    Ok(Criterion::new(11, "constant stability", checks, true, summary, t0))
}

/// Instances examined by the exceptional-set criterion.
pub fn exceptional_instances(seed: u64) -> Vec<Generator> {
    let mut v = vec![
        Generator::Segment { a: pt(0.0, 0.0), b: pt(1.0, 0.0), n: 256 },
        Generator::Arc { center: pt(0.0, 0.0), radius: 1.0, start: 0.0, span: std::f64::consts::TAU, n: 256 },
        Generator::CantorCorner { level: 3 },
        Generator::CantorCorner { level: 4 },
    ];
    v.extend((0..4).map(|i| Generator::RandomCloud { seed: seed + i, n: 200 }));
    v
}

/// Criterion 12: radius sum, disjointness and the trend of `mu(H_M)` in `M`.
pub fn exceptional_suite(cfg: &SuiteConfig) -> Result<Criterion> {
    let t0 = Instant::now();
    let ms = [10.0, 100.0, 1000.0];
    let mut checks = Vec::new();
    let mut worst_sum = 0.0f64;
    let mut overlaps = 0usize;
    let mut trend_fail = Vec::new();
    let mut sets = 0usize;
    for g in exceptional_instances(cfg.seed) {
        let mu = normalized(&g)?;
        for floor in [0.0, mu.max_nearest_distance()] {
            let mut masses = Vec::new();
            for &m in &ms {
                let e = exceptional_set_above(&mu, m, floor)?;
                sets += 1;
                worst_sum = worst_sum.max(e.radius_sum() * m / mu.total());
                let d = &e.selected;
                for i in 0..d.len() {
                    for j in i + 1..d.len() {
                        if (d[i].center - d[j].center).norm() < d[i].radius + d[j].radius {
                            overlaps += 1;
                        }
                    }
                }
                masses.push(e.h.mass(&mu));
            }
            if masses.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) {
                trend_fail.push(format!("{g:?} floor {floor:.2e}: {masses:?}"));
            }
        }
    }
    checks.push(CheckReport::verdict("radius_sum", worst_sum, 1.0, worst_sum < 1.0, sets as u64, cfg.seed).with_note("max of M sum(r) / |mu|"));
    checks.push(CheckReport::upper("disjoint", overlaps as f64, 0.0, sets as u64, cfg.seed));
    checks.push(CheckReport::verdict("mass_monotone", trend_fail.len() as f64, 0.0, trend_fail.is_empty(), sets as u64, cfg.seed).with_note(trend_fail.join("; ")));
    let summary = format!(
        "{sets} exceptional sets, max M sum(r)/|mu| = {worst_sum} (< 1), {overlaps} overlapping pairs, {} non-monotone families",
        trend_fail.len()
    );
    Ok(Criterion::new(12, "exceptional set", checks, true, summary, t0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> SuiteConfig {
        SuiteConfig {
            scale: Scale::Quick,
            ..SuiteConfig::default()
        }
    }

    #[test]
    fn quick_criteria_pass() {
        for id in [1, 7, 8] {
            let c = run_criterion(id, &quick()).unwrap();
            assert!(c.pass, "{}", c.line());
            assert!(c.line().starts_with(&format!("criterion {id:>2} PASS")));
        }
    }

    #[test]
    fn unknown_criterion_errors() {
        assert!(run_criterion(0, &quick()).is_err());
        assert!(run_criterion(13, &quick()).is_err());
    }

    #[test]
    fn random_instances_are_deterministic_and_centred() {
        let a = random_instance(3, 64, 0.1, 8).unwrap();
        let b = random_instance(3, 64, 0.1, 8).unwrap();
        assert_eq!(a.mu, b.mu);
        assert_eq!(a.g, b.g);
        let mean = crate::numeric::ksum_c(a.g.iter().zip(a.mu.atoms()).map(|(v, t)| v * t.w));
        assert!(mean.norm() < 1e-12);
        assert!((a.mu.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fold_reports_tallies_failures() {
        let ok = CheckReport::upper("x", 1.0, 2.0, 1, 0);
        let bad = CheckReport::upper("x", 3.0, 2.0, 1, 0);
        let na = CheckReport::not_applicable("x", "none", 1, 0);
        let f = fold_reports("x", &[ok.clone(), bad, na], 5);
        assert!(!f.passed());
        assert_eq!(f.observed, 1.5);
        assert_eq!(f.samples, 3);
        assert!(fold_reports("x", &[ok], 5).passed());
    }

    #[test]
    fn config_defaults_from_empty_json() {
        let c: SuiteConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, SuiteConfig::default());
        assert!(serde_json::from_str::<SuiteConfig>(r#"{"sead": 1}"#).is_err());
        let q: SuiteConfig = serde_json::from_str(r#"{"scale": "quick"}"#).unwrap();
        assert_eq!(q.pick(10, 2), 2);
    }
}
