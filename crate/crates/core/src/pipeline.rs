//! Experiment configurations and the end-to-end pipelines: exceptional set, suppressed
//! operator norms, the `G_L` enlargement and the top-scale accretivity construction of the
//! set `F`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::{sample_lattice, Contour, Point};
use crate::kernel::k_phi_values;
use crate::martingale::nonaccretive_squares;
use crate::measure::{exceptional_set_above, generate, Atom, DiskSet, Generator, GlobalParams, PlanarMeasure};
use crate::numeric::ksum;
use crate::report::CheckReport;
use crate::transform::{cotlar_check, epsilon0_and_gl, k_phi_maximal, lemma1_constant, operator_norm, OperatorMatrix};

/// Radius of the disk the support is rescaled into; it fits every shifted root square.
pub const NORMAL_RADIUS: f64 = 0.2;

/// Density `b` with `|b| <= 1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Density {
    #[default]
    One,
    /// `+1 / -1` on a `cells x cells` checkerboard over the bounding box, shifted towards
    /// `+1` so that `|integral b| = gamma` (orientation chosen so that this is reachable).
    Checkerboard { cells: u32, gamma: f64 },
    /// Explicit values `[re, im]` aligned with the atoms.
    Values { values: Vec<[f64; 2]> },
}

/// Truncation level for the trimmed envelope.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// `gamma^2 / 16`.
    #[default]
    Gamma,
    /// `sqrt(delta)`.
    SqrtDelta,
}

fn default_trials() -> u64 {
    12
}

fn default_n_max() -> u32 {
    12
}

fn default_taus() -> Vec<f64> {
    vec![1e-3, 1e-4]
}

/// A scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub measure: Generator,
    #[serde(default)]
    pub params: GlobalParams,
    #[serde(default)]
    pub seed: u64,
    /// Number of sampled lattices (the pair space has `trials^2` points).
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_n_max")]
    pub n_max: u32,
    #[serde(default)]
    pub density: Density,
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
    #[serde(default)]
    pub truncation: Truncation,
    /// Non-Ahlfors disks of radius at most this are ignored. Defaults to zero for the
    /// operator pipelines and to the largest nearest-neighbour distance for `F`.
    #[serde(default)]
    pub resolution: Option<f64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(scenario: &str, measure: Generator) -> Self {
        ExperimentConfig {
            scenario: scenario.to_string(),
            measure,
            params: GlobalParams::default(),
            seed: 0,
            trials: default_trials(),
            n_max: default_n_max(),
            density: Density::default(),
            taus: default_taus(),
            truncation: Truncation::default(),
            resolution: None,
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.trials < 1 {
            return domain("trials must be >= 1");
        }
        if self.taus.iter().any(|t| !(*t > 0.0)) {
            return domain("tau values must be positive");
        }
        if let Some(r) = self.resolution {
            if !(r >= 0.0) {
                return domain("resolution must be nonnegative");
            }
        }
        Ok(())
    }

    /// The generated measure rescaled to unit mass inside `B(0, NORMAL_RADIUS)`.
    pub fn measure(&self) -> Result<PlanarMeasure> {
        Ok(generate(&self.measure)?.normalized(NORMAL_RADIUS).0)
    }
}

/// Masses of the removal stages.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageMasses {
    pub total: f64,
    pub h: f64,
    /// `mu(G_L minus H)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    /// Mass removed only because of the non-accretive squares.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Mass of `H union G_L` that nevertheless lies in `F`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kept_in_hg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<f64>,
}

/// A hypothesis of a pipeline and whether it was verified on the instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub scenario: String,
    pub pipeline: String,
    pub atoms: usize,
    pub seed: u64,
    pub stages: StageMasses,
    pub quantities: BTreeMap<String, f64>,
    pub checks: Vec<CheckReport>,
    pub hypotheses: Vec<Hypothesis>,
    /// Per-atom removal reason (`kept`, `h`, `g`, `t`); only for the `F` construction.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reasons: Vec<String>,
    /// Wall-clock seconds per stage; not part of the serialized report.
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl PipelineReport {
    fn new(cfg: &ExperimentConfig, pipeline: &str, atoms: usize) -> Self {
        PipelineReport {
            scenario: cfg.scenario.clone(),
            pipeline: pipeline.to_string(),
            atoms,
            seed: cfg.seed,
            ..Default::default()
        }
    }

    /// False when some check with a bound failed.
    pub fn hard_asserts_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass != Some(false))
    }

    pub fn hypotheses_hold(&self) -> bool {
        self.hypotheses.iter().all(|h| h.holds)
    }

    pub fn quantity(&self, key: &str) -> Option<f64> {
        self.quantities.get(key).copied()
    }

    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn put(&mut self, key: &str, v: f64) {
        self.quantities.insert(key.to_string(), v);
    }
}

struct Clock(Instant);

impl Clock {
    fn start() -> Self {
        Clock(Instant::now())
    }

    fn lap(&mut self, report: &mut PipelineReport, stage: &str) {
        report.timings.push((stage.to_string(), self.0.elapsed().as_secs_f64()));
        self.0 = Instant::now();
    }
}

/// Density values at the atoms.
pub fn density_values(d: &Density, mu: &PlanarMeasure) -> Result<Vec<Complex64>> {
    match d {
        Density::One => Ok(vec![Complex64::new(1.0, 0.0); mu.len()]),
        Density::Values { values } => {
            if values.len() != mu.len() {
                return domain("density values misaligned with atoms");
            }
            Ok(values.iter().map(|v| Complex64::new(v[0], v[1])).collect())
        }
        Density::Checkerboard { cells, gamma } => {
            if *cells < 1 || !(*gamma > 0.0 && *gamma <= 1.0) {
                return domain("checkerboard needs cells >= 1 and gamma in (0,1]");
            }
            if mu.is_empty() {
                return Ok(vec![]);
            }
            let (x0, x1, y0, y1) = mu.atoms().iter().fold((f64::MAX, f64::MIN, f64::MAX, f64::MIN), |a, t| {
                (a.0.min(t.z.re), a.1.max(t.z.re), a.2.min(t.z.im), a.3.max(t.z.im))
            });
            let n = *cells as f64;
            let cell = |v: f64, lo: f64, hi: f64| {
                if hi > lo {
                    (((v - lo) / (hi - lo) * n).floor() as i64).min(*cells as i64 - 1)
                } else {
                    0
                }
            };
            let mut sign: Vec<f64> = mu
                .atoms()
                .iter()
                .map(|a| if (cell(a.z.re, x0, x1) + cell(a.z.im, y0, y1)) % 2 == 0 { 1.0 } else { -1.0 })
                .collect();
            let s = ksum(sign.iter().zip(mu.atoms()).map(|(v, a)| v * a.w)) / mu.total();
            let s = if s > 0.0 {
                sign.iter_mut().for_each(|v| *v = -*v);
                -s
            } else {
                s
            };
            let lambda = (gamma - s) / (1.0 - s);
            Ok(sign
                .into_iter()
                .map(|v| Complex64::new((1.0 - lambda) * v + lambda, 0.0))
                .collect())
        }
    }
}

/// `(rho, P)`: `mu{0 < |y-x| < psi} / psi` and `sum over |y-x| >= psi of |k_psi - k| w`.
fn step_one_terms(mu: &PlanarMeasure, env: &[f64], i: usize) -> (f64, f64) {
    let x = mu.z(i);
    let px = env[i];
    if px == 0.0 {
        return (0.0, 0.0);
    }
    let mut near = Vec::new();
    let mut poisson = Vec::new();
    for j in 0..mu.len() {
        let d = (mu.z(j) - x).norm();
        if d == 0.0 {
            continue;
        }
        if d < px {
            near.push(mu.w(j));
        } else {
            let kp = k_phi_values(x, mu.z(j), px, env[j]);
            let k = k_phi_values(x, mu.z(j), 0.0, 0.0);
            poisson.push((kp - k).norm() * mu.w(j));
        }
    }
    (ksum(near) / px, ksum(poisson))
}

fn disk_distances(set: &DiskSet, mu: &PlanarMeasure) -> Vec<f64> {
    (0..mu.len()).into_par_iter().map(|i| set.dist_to_complement(mu.z(i))).collect()
}

fn ones(n: usize) -> Vec<Complex64> {
    vec![Complex64::new(1.0, 0.0); n]
}

fn exceptional_checks(report: &mut PipelineReport, mu: &PlanarMeasure, m: f64, ex: &crate::measure::ExceptionalSet) {
    let sum = ex.radius_sum();
    report.checks.push(CheckReport::verdict("exceptional_radius_sum", sum, mu.total() / m, mu.is_empty() || sum < mu.total() / m, ex.selected.len() as u64, 0));
    let disjoint = ex.selected.iter().enumerate().all(|(i, a)| {
        ex.selected[i + 1..]
            .iter()
            .all(|b| (a.center - b.center).norm() > a.radius + b.radius)
    });
    report.checks.push(CheckReport::verdict("exceptional_disjoint", if disjoint { 0.0 } else { 1.0 }, 0.0, disjoint, ex.selected.len() as u64, 0));
}

/// Exceptional set, `phi = dist(., complement of H_M)`, `B = sup K*_phi 1` and the ratio
/// `|K_phi| / (B M)`.
pub fn run_theorem1_pipeline(cfg: &ExperimentConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let mu = cfg.measure()?;
    theorem1_on(cfg, &mu)
}

pub fn theorem1_on(cfg: &ExperimentConfig, mu: &PlanarMeasure) -> Result<PipelineReport> {
    let mut report = PipelineReport::new(cfg, "t1", mu.len());
    let mut clock = Clock::start();
    let m = cfg.params.m_ahlfors;
    let floor = cfg.resolution.unwrap_or(0.0);
    let ex = exceptional_set_above(mu, m, floor)?;
    exceptional_checks(&mut report, mu, m, &ex);
    report.stages = StageMasses {
        total: mu.total(),
        h: ex.h.mass(mu),
        ..Default::default()
    };
    clock.lap(&mut report, "exceptional_set");
    let phi = disk_distances(&ex.h, mu);
    let one = ones(mu.len());
    let b = (0..mu.len())
        .into_par_iter()
        .map(|i| k_phi_maximal(mu, &phi, &one, mu.z(i), phi[i]))
        .reduce(|| 0.0, f64::max);
    clock.lap(&mut report, "maximal_transform");
    let mat = OperatorMatrix::suppressed(mu, &phi)?;
    let est = operator_norm(&mat);
    clock.lap(&mut report, "operator_norm");
    report.put("M", m);
    report.put("resolution", floor);
    report.put("B", b);
    report.put("norm", est.norm);
    report.put("norm_iterations", est.iterations as f64);
    if b > 0.0 {
        report.put("ratio", est.norm / (b * m));
    }
    report.hypotheses.push(Hypothesis {
        name: "norm_converged".into(),
        holds: est.converged,
        detail: format!("{} iterations", est.iterations),
    });
    let l1 = lemma1_constant(mu, &phi, &one);
    report.put("lemma1_constant", l1.observed);
    report.checks.push(l1);
    let cot = cotlar_check(mu, &phi, m, 1.5, &one)?;
    if cot.is_applicable() {
        report.put("cotlar_aggregate", cot.observed);
    }
    report.checks.push(cot);
    clock.lap(&mut report, "constants");
    Ok(report)
}

/// Per-atom bound on `K*_psi 1` assembled from the four regimes of the truncation radius
/// (below `eps_0`, between `eps_0` and `psi`, above `psi`), with every term measured.
pub fn four_step_bound(mu: &PlanarMeasure, phi: &[f64], psi: &[f64], eps0: &[f64], l: f64, i: usize) -> f64 {
    let (rho_psi, p_psi) = step_one_terms(mu, psi, i);
    let (rho_phi, p_phi) = step_one_terms(mu, phi, i);
    let e_psi = rho_psi + p_psi;
    let e_phi = rho_phi + p_phi;
    let x = mu.z(i);
    let mut bound = e_psi + e_phi + l;
    if eps0[i] > 0.0 {
        bound = bound.max(rho_psi + e_psi + e_phi + l);
    }
    if eps0[i] < psi[i] {
        let d3 = ksum((0..mu.len()).filter_map(|j| {
            let d = (mu.z(j) - x).norm();
            (d > 0.0 && d >= psi[i]).then(|| {
                (k_phi_values(x, mu.z(j), phi[i], phi[j]) - k_phi_values(x, mu.z(j), psi[i], psi[j])).norm() * mu.w(j)
            })
        }));
        bound = bound.max(3.0 * l + rho_psi + d3);
    }
    bound
}

/// `G_L(1)`, `psi = max(dist(., complement of G_L), phi)`, the first claim checked against
/// [`four_step_bound`] at every atom, and `|K_psi|`.
pub fn run_theorem1a_pipeline(cfg: &ExperimentConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let mu = cfg.measure()?;
    theorem1a_on(cfg, &mu)
}

pub fn theorem1a_on(cfg: &ExperimentConfig, mu: &PlanarMeasure) -> Result<PipelineReport> {
    let mut report = theorem1_on(cfg, mu)?;
    report.pipeline = "t1a".into();
    let mut clock = Clock::start();
    let m = cfg.params.m_ahlfors;
    let l = cfg.params.l_trunc;
    let ex = exceptional_set_above(mu, m, cfg.resolution.unwrap_or(0.0))?;
    let phi = disk_distances(&ex.h, mu);
    let one = ones(mu.len());
    let gl = epsilon0_and_gl(mu, &phi, &one, l)?;
    let g_dist = disk_distances(&gl.set, mu);
    let psi: Vec<f64> = phi.iter().zip(&g_dist).map(|(a, b)| a.max(*b)).collect();
    report.stages.g = Some(mu.mass_where(|_, z| gl.set.contains(z) && !ex.h.contains(z)));
    clock.lap(&mut report, "g_l");
    let rows: Vec<(f64, f64)> = (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let kstar = k_phi_maximal(mu, &psi, &one, mu.z(i), psi[i]);
            (kstar, four_step_bound(mu, &phi, &psi, &gl.eps0, l, i))
        })
        .collect();
    let kstar_psi = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst = rows
        .iter()
        .map(|r| if r.1 > 0.0 { r.0 / r.1 } else if r.0 > 0.0 { f64::INFINITY } else { 0.0 })
        .fold(0.0, f64::max);
    report
        .checks
        .push(CheckReport::upper("four_step_bound", worst, 1.0 + 1e-12, mu.len() as u64, 0));
    report.put("L", l);
    report.put("kstar_psi", kstar_psi);
    report.put("claim1_constant", kstar_psi / (l + m));
    clock.lap(&mut report, "claim1");
    let mat = OperatorMatrix::suppressed(mu, &psi)?;
    let est = operator_norm(&mat);
    report.put("norm_psi", est.norm);
    report.put("claim2_constant", est.norm / ((l + m) * m));
    clock.lap(&mut report, "operator_norm_psi");
    Ok(report)
}

/// Outcome of the top-scale accretivity construction, kept for downstream reports.
#[derive(Clone, Debug)]
pub struct FConstruction {
    pub report: PipelineReport,
    pub mu: PlanarMeasure,
    pub in_f: Vec<bool>,
    pub gamma: f64,
    pub m_gamma: Option<f64>,
    pub l_gamma: Option<f64>,
}

const M_GRID: usize = 96;

/// Non-accretive squares for `eta = gamma / 2` on sampled lattices, the trimmed envelope
/// `phi_0` over the product space of lattice pairs, `F = {phi_0 = 0}`, and operator norms for
/// `phi_0 + tau` over the configured `tau` values.
pub fn run_theorem3_pipeline(cfg: &ExperimentConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let mu = cfg.measure()?;
    Ok(theorem3_on(cfg, &mu)?.report)
}

pub fn theorem3_on(cfg: &ExperimentConfig, mu: &PlanarMeasure) -> Result<FConstruction> {
    let mut report = PipelineReport::new(cfg, "t3", mu.len());
    let mut clock = Clock::start();
    if mu.is_empty() {
        return domain("empty measure");
    }
    if (mu.total() - 1.0).abs() > 1e-12 {
        return domain("the construction expects a unit-mass measure");
    }
    let b = density_values(&cfg.density, mu)?;
    let bsup = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let gamma = crate::numeric::ksum_c(b.iter().zip(mu.atoms()).map(|(v, a)| v * a.w)).norm();
    report.hypotheses.push(Hypothesis {
        name: "b_bounded".into(),
        holds: bsup <= 1.0 + 1e-12,
        detail: format!("sup |b| = {bsup}"),
    });
    report.hypotheses.push(Hypothesis {
        name: "accretive_top_scale".into(),
        holds: gamma > 0.0,
        detail: format!("gamma = {gamma}"),
    });
    report.put("gamma", gamma);
    let floor = cfg.resolution.unwrap_or_else(|| mu.max_nearest_distance());
    report.put("resolution", floor);

    let mut m_gamma = None;
    let mut ex = None;
    for k in 0..M_GRID {
        let m = 2.0 * 1.25f64.powi(k as i32);
        let e = exceptional_set_above(mu, m, floor)?;
        if e.h.mass(mu) < gamma / 32.0 {
            m_gamma = Some(m);
            ex = Some(e);
            break;
        }
    }
    report.hypotheses.push(Hypothesis {
        name: "m_gamma_found".into(),
        holds: m_gamma.is_some(),
        detail: format!("{m_gamma:?}"),
    });
    let (h, m) = match (ex, m_gamma) {
        (Some(e), Some(m)) => {
            exceptional_checks(&mut report, mu, m, &e);
            (e.h, m)
        }
        _ => (DiskSet::empty(), f64::NAN),
    };
    clock.lap(&mut report, "m_gamma");

    let phi_h = disk_distances(&h, mu);
    let kstar: Vec<f64> = (0..mu.len())
        .into_par_iter()
        .map(|i| k_phi_maximal(mu, &phi_h, &b, mu.z(i), phi_h[i]))
        .collect();
    let top = kstar.iter().copied().fold(0.0, f64::max);
    let mut l_gamma = None;
    let mut g = DiskSet::empty();
    let start = if m.is_finite() { m } else { 1.0 };
    let mut l = start;
    loop {
        let gl = epsilon0_and_gl(mu, &phi_h, &b, l)?;
        let gm = mu.mass_where(|_, z| gl.set.contains(z) && !h.contains(z));
        if gm < gamma / 32.0 {
            l_gamma = Some(l);
            g = gl.set;
            break;
        }
        if l > top * 2.0 {
            break;
        }
        l *= 1.25;
    }
    report.hypotheses.push(Hypothesis {
        name: "l_gamma_found".into(),
        holds: l_gamma.is_some(),
        detail: format!("{l_gamma:?}"),
    });
    clock.lap(&mut report, "l_gamma");

    let n = mu.len();
    let eta = gamma / 2.0;
    let lattices = cfg.trials as usize;
    let mut square_dist: Vec<Vec<f64>> = Vec::with_capacity(lattices);
    let mut min_outside = f64::INFINITY;
    for t in 0..lattices {
        let d = sample_lattice(cfg.seed.wrapping_add(t as u64));
        let na = nonaccretive_squares(&d, mu, &b, eta, cfg.n_max)?;
        min_outside = min_outside.min(mu.total() - na.mass);
        let mut dist = vec![0.0; n];
        for sq in &na.squares {
            let r = sq.rect();
            for (i, v) in dist.iter_mut().enumerate() {
                if sq.contains(mu.z(i)) {
                    *v = r.dist_boundary(mu.z(i));
                }
            }
        }
        square_dist.push(dist);
    }
    report.checks.push(CheckReport::upper("accretive_remainder", gamma / 2.0, min_outside * (1.0 + 1e-12), lattices as u64, cfg.seed));
    let p1: Vec<f64> = (0..n)
        .map(|i| square_dist.iter().filter(|d| d[i] == 0.0).count() as f64 / lattices as f64)
        .collect();
    let big_p = mu.mass_where(|i, _| p1[i] > gamma / 4.0);
    report.checks.push(CheckReport::upper("p1_split", gamma / 4.0, big_p * (1.0 + 1e-12), n as u64, cfg.seed));
    clock.lap(&mut report, "nonaccretive");

    let beta = match cfg.truncation {
        Truncation::Gamma => gamma * gamma / 16.0,
        Truncation::SqrtDelta => cfg.params.delta.sqrt(),
    };
    report.put("beta", beta);
    let hd = phi_h;
    let gd = disk_distances(&g, mu);
    let pairs = lattices * lattices;
    let rank = ((beta * pairs as f64) * (1.0 - 1e-12)).ceil().max(1.0) as usize - 1;
    let phi0: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let base = hd[i].max(gd[i]);
            let mut vals: Vec<f64> = Vec::with_capacity(pairs);
            for s in &square_dist {
                for t in &square_dist {
                    vals.push(base.max(s[i]).max(t[i]));
                }
            }
            vals.sort_by(f64::total_cmp);
            vals[rank.min(pairs - 1)]
        })
        .collect();
    let in_f: Vec<bool> = phi0.iter().map(|v| *v == 0.0).collect();
    let mass_f = mu.mass_where(|i, _| in_f[i]);
    let in_hg = |i: usize| h.contains(mu.z(i)) || g.contains(mu.z(i));
    let stage_h = h.mass(mu);
    let stage_g = mu.mass_where(|_, z| g.contains(z) && !h.contains(z));
    let stage_t = mu.mass_where(|i, _| !in_hg(i) && !in_f[i]);
    let kept = mu.mass_where(|i, _| in_hg(i) && in_f[i]);
    report.stages = StageMasses {
        total: mu.total(),
        h: stage_h,
        g: Some(stage_g),
        t: Some(stage_t),
        kept_in_hg: Some(kept),
        f: Some(mass_f),
    };
    let residual = (stage_h + stage_g + stage_t - kept - (mu.total() - mass_f)).abs();
    report.checks.push(CheckReport::upper("stage_accounting", residual, 1e-12, n as u64, 0));
    report.reasons = (0..n)
        .map(|i| {
            let z = mu.z(i);
            if in_f[i] {
                "kept"
            } else if h.contains(z) {
                "h"
            } else if g.contains(z) {
                "g"
            } else {
                "t"
            }
            .to_string()
        })
        .collect();
    if report.hypotheses_hold() {
        report.checks.push(CheckReport::upper("f_fraction", 3.0 * gamma / 16.0, mass_f / mu.total() * (1.0 + 1e-12), n as u64, cfg.seed));
    }
    clock.lap(&mut report, "f");

    if m.is_finite() {
        report.put("M_gamma", m);
    }
    if let Some(l) = l_gamma {
        report.put("L_gamma", l);
    }
    report.put("mu_F", mass_f);
    let idx: Vec<usize> = (0..n).filter(|&i| in_f[i]).collect();
    let mu_f = mu.restrict(&idx);
    let norm_f = if mu_f.len() > 1 {
        operator_norm(&OperatorMatrix::cauchy(&mu_f)).norm
    } else {
        0.0
    };
    report.put("cauchy_norm_F", norm_f);
    if let (Some(l), true) = (l_gamma, m.is_finite()) {
        report.put("cauchy_norm_F_over_shape", norm_f / (l * m * gamma.powi(-20)));
    }
    let mut norms = Vec::new();
    for &tau in &cfg.taus {
        let env: Vec<f64> = phi0.iter().map(|v| v + tau).collect();
        let est = operator_norm(&OperatorMatrix::suppressed(mu, &env)?);
        report.put(&format!("norm_tau_{tau:e}"), est.norm);
        norms.push(est.norm);
    }
    if norms.len() > 1 {
        let hi = norms.iter().copied().fold(f64::MIN, f64::max);
        let lo = norms.iter().copied().fold(f64::MAX, f64::min);
        let spread = if hi > 0.0 { (hi - lo) / hi } else { 0.0 };
        report.checks.push(CheckReport::upper("tau_stability", spread, 0.01, norms.len() as u64, 0));
    }
    clock.lap(&mut report, "norms");
    Ok(FConstruction {
        report,
        mu: mu.clone(),
        in_f,
        gamma,
        m_gamma: m.is_finite().then_some(m),
        l_gamma,
    })
}

/// Discretizes the length measure of a contour with atoms at the midpoints of pieces of
/// length at most `step`.
pub fn contour_measure(gamma: &Contour, step: f64) -> Result<PlanarMeasure> {
    if !(step > 0.0) {
        return domain("step must be positive");
    }
    let mut atoms = Vec::new();
    for &(a, b) in &gamma.segments {
        let len = (b - a).norm();
        let k = (len / step).ceil().max(1.0) as usize;
        for j in 0..k {
            atoms.push(Atom {
                z: a + (b - a) * ((j as f64 + 0.5) / k as f64),
                w: len / k as f64,
            });
        }
    }
    for arc in &gamma.arcs {
        let len = arc.length();
        let k = (len / step).ceil().max(1.0) as usize;
        for j in 0..k {
            atoms.push(Atom {
                z: arc.point_at((j as f64 + 0.5) / k as f64),
                w: len / k as f64,
            });
        }
    }
    PlanarMeasure::new(atoms)
}

/// Quantities of the curvature report on `F`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VitushkinReport {
    pub length: f64,
    pub diameter: f64,
    pub gamma: f64,
    pub length_f: f64,
    pub c2_f: f64,
    pub ratio: f64,
    /// `(diam / gamma) (length / gamma)^42`, with `gamma` in length units.
    pub shape: f64,
    pub pipeline: PipelineReport,
}

/// Runs the `F` construction on the length measure of `gamma_arcs` and reports
/// `c^2(H^1|F) / H^1(F)` in the original scale.
pub fn vitushkin_report(gamma_arcs: &Contour, step: f64, cfg: &ExperimentConfig) -> Result<VitushkinReport> {
    let raw = contour_measure(gamma_arcs, step)?;
    vitushkin_on(&raw, cfg)
}

pub fn vitushkin_on(raw: &PlanarMeasure, cfg: &ExperimentConfig) -> Result<VitushkinReport> {
    cfg.validate()?;
    let (mu, _) = raw.normalized(NORMAL_RADIUS);
    let fc = theorem3_on(cfg, &mu)?;
    let idx: Vec<usize> = (0..raw.len()).filter(|&i| fc.in_f[i]).collect();
    let f_raw = raw.restrict(&idx);
    let c2_f = crate::curvature::c2(&f_raw, None).c2;
    let length_f = f_raw.total();
    let length = raw.total();
    let diameter = diameter(&raw.points());
    let gamma_abs = fc.gamma * length;
    let shape = (diameter / gamma_abs) * (length / gamma_abs).powi(42);
    Ok(VitushkinReport {
        length,
        diameter,
        gamma: gamma_abs,
        length_f,
        c2_f,
        ratio: if length_f > 0.0 { c2_f / length_f } else { 0.0 },
        shape,
        pipeline: fc.report,
    })
}

fn diameter(p: &[Point]) -> f64 {
    let mut d = 0.0f64;
    for (i, a) in p.iter().enumerate() {
        for b in &p[i + 1..] {
            d = d.max((a - b).norm());
        }
    }
    d
}
