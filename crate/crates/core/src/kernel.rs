//! Lipschitz envelopes and the suppressed Cauchy kernel.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::{pt, Point, Rect};
use crate::measure::{Disk, DiskSet, PlanarMeasure};
use crate::probability::trim;
use crate::report::CheckReport;

/// One nonnegative 1-Lipschitz building block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Primitive {
    /// `lambda`.
    Constant { lambda: f64 },
    /// `dist(x, C \ U)` for a union of disks.
    DiskComplement { set: DiskSet },
    /// `dist(x, C \ Q)` for a closed square or rectangle.
    SquareComplement { rect: Rect },
    /// `max(|x - x0| - rho, 0)`.
    Cone { x0: Point, rho: f64 },
}

impl Primitive {
    pub fn eval(&self, x: Point) -> f64 {
        match self {
            Primitive::Constant { lambda } => *lambda,
            Primitive::DiskComplement { set } => set.dist_to_complement(x),
            Primitive::SquareComplement { rect } => {
                if rect.contains_closed(x) {
                    rect.dist_boundary(x)
                } else {
                    0.0
                }
            }
            Primitive::Cone { x0, rho } => ((x - x0).norm() - rho).max(0.0),
        }
    }
}

/// Pointwise maximum of primitives; zero when there are none.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    pub primitives: Vec<Primitive>,
}

impl Envelope {
    pub fn zero() -> Self {
        Envelope::default()
    }

    pub fn constant(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return domain("constant envelope must be finite and nonnegative");
        }
        Ok(Envelope {
            primitives: vec![Primitive::Constant { lambda }],
        })
    }

    pub fn new(primitives: Vec<Primitive>) -> Result<Self> {
        for p in &primitives {
            match p {
                Primitive::Constant { lambda } if !(*lambda >= 0.0) || !lambda.is_finite() => {
                    return domain("constant primitive must be finite and nonnegative")
                }
                Primitive::Cone { rho, .. } if !rho.is_finite() => {
                    return domain("cone offset must be finite")
                }
                Primitive::SquareComplement { rect } if !(rect.x1 >= rect.x0 && rect.y1 >= rect.y0) => {
                    return domain("square primitive has negative extent")
                }
                _ => {}
            }
        }
        Ok(Envelope { primitives })
    }

    pub fn with(mut self, p: Primitive) -> Self {
        self.primitives.push(p);
        self
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.primitives.iter().map(|p| p.eval(x)).fold(0.0, f64::max)
    }

    /// Values at every atom.
    pub fn values(&self, mu: &PlanarMeasure) -> Vec<f64> {
        mu.atoms().par_iter().map(|a| self.eval(a.z)).collect()
    }
}

/// `k(x,y) = conj(x-y) / (|x-y|^2 + px py)` with `k(x,x) = 0`.
#[inline]
pub fn k_phi_values(x: Point, y: Point, px: f64, py: f64) -> Complex64 {
    let d = x - y;
    let den = d.norm_sqr() + px * py;
    if d == Complex64::new(0.0, 0.0) || den == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    d.conj() / den
}

/// Suppressed kernel with envelope `phi`.
pub fn k_phi(phi: &Envelope, x: Point, y: Point) -> Complex64 {
    k_phi_values(x, y, phi.eval(x), phi.eval(y))
}

fn random_point(rng: &mut impl Rng, half: f64) -> Point {
    pt(
        (rng.random::<f64>() * 2.0 - 1.0) * half,
        (rng.random::<f64>() * 2.0 - 1.0) * half,
    )
}

/// A random envelope with up to `max_parts` primitives drawn from the whole catalog,
/// located in `[-1, 1]^2`.
pub fn random_envelope(rng: &mut impl Rng, max_parts: usize) -> Envelope {
    let n = rng.random_range(1..=max_parts.max(1));
    let mut prims = Vec::with_capacity(n);
    for _ in 0..n {
        let p = match rng.random_range(0..4) {
            0 => Primitive::Constant {
                lambda: rng.random::<f64>() * 0.5,
            },
            1 => {
                let k = rng.random_range(1..=4);
                let disks = (0..k)
                    .map(|_| Disk {
                        center: random_point(rng, 0.8),
                        radius: 0.05 + rng.random::<f64>() * 0.4,
                    })
                    .collect();
                Primitive::DiskComplement {
                    set: DiskSet::new(disks).expect("positive radii"),
                }
            }
            2 => {
                let c = random_point(rng, 0.8);
                let h = 0.05 + rng.random::<f64>() * 0.5;
                Primitive::SquareComplement {
                    rect: Rect::new(c.re - h, c.re + h, c.im - h, c.im + h),
                }
            }
            _ => Primitive::Cone {
                x0: random_point(rng, 0.8),
                rho: rng.random::<f64>() * 0.5,
            },
        };
        prims.push(p);
    }
    Envelope { primitives: prims }
}

/// Pair at a random scale: `y = x + s e^{i t}` with `s` log-uniform in `[1e-6, 2]`.
fn random_pair(rng: &mut impl Rng) -> (Point, Point) {
    let x = random_point(rng, 1.0);
    let s = 10f64.powf(-6.0 + rng.random::<f64>() * 6.3);
    let t = rng.random::<f64>() * std::f64::consts::TAU;
    (x, x + Complex64::from_polar(s, t))
}

const CHUNK: u64 = 4096;

fn sharded<F>(samples: u64, seed: u64, f: F) -> (f64, u64)
where
    F: Fn(&mut ChaCha8Rng) -> (f64, bool) + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
            let n = CHUNK.min(samples - c * CHUNK);
            let mut worst = 0.0f64;
            let mut bad = 0u64;
            for _ in 0..n {
                let (v, violated) = f(&mut rng);
                worst = worst.max(v);
                bad += violated as u64;
            }
            (worst, bad)
        })
        .reduce(|| (0.0, 0), |a, b| (a.0.max(b.0), a.1 + b.1))
}

/// Largest sampled ratio `|phi(x) - phi(y)| / |x - y|`.
pub fn env_lipschitz_check(phi: &Envelope, samples: u64, seed: u64) -> Result<CheckReport> {
    lipschitz_check_fn(|x| phi.eval(x), "env_lipschitz", samples, seed)
}

/// Sampled Lipschitz ratio of an arbitrary function of the plane.
pub fn lipschitz_check_fn(f: impl Fn(Point) -> f64 + Sync, name: &str, samples: u64, seed: u64) -> Result<CheckReport> {
    if samples < 1 {
        return domain("at least one sample is required");
    }
    let (worst, _) = sharded(samples, seed, |rng| {
        let (x, y) = random_pair(rng);
        let r = (f(x) - f(y)).abs() / (x - y).norm();
        (r, false)
    });
    Ok(CheckReport::upper(name, worst, 1.0 + 1e-12, samples, seed))
}

/// Sampled suppression bounds `|k| max(phi(x), phi(y)) <= 1` and `|k| |x - y| <= 1`.
/// Observed is the larger of the two products. A fresh random envelope is used for each
/// shard when `phi` is `None`.
pub fn suppression_bounds_check(phi: Option<&Envelope>, samples: u64, seed: u64) -> CheckReport {
    let (worst, bad) = sharded(samples, seed, |rng| {
        let local;
        let env = match phi {
            Some(e) => e,
            None => {
                local = random_envelope(rng, 4);
                &local
            }
        };
        let (x, y) = random_pair(rng);
        let (px, py) = (env.eval(x), env.eval(y));
        let k = k_phi_values(x, y, px, py).norm();
        let v = (k * px.max(py)).max(k * (x - y).norm());
        let anti = k_phi_values(x, y, px, py) + k_phi_values(y, x, py, px);
        (v, v > 1.0 + 1e-12 || anti != Complex64::new(0.0, 0.0))
    });
    CheckReport::verdict("suppression_bounds", worst, 1.0 + 1e-12, bad == 0, samples, seed)
        .with_note(format!("violations: {bad}"))
}

/// Sampled Calderon-Zygmund smoothness constant
/// `|k(x,y) - k(x',y)| |x-y|^2 / |x-x'|` over triples with `|x - x'| <= |x - y| / 2`.
pub fn cz_smoothness_check(phi: Option<&Envelope>, samples: u64, seed: u64) -> CheckReport {
    let (worst, _) = sharded(samples, seed, |rng| {
        let local;
        let env = match phi {
            Some(e) => e,
            None => {
                local = random_envelope(rng, 4);
                &local
            }
        };
        let (x, y) = random_pair(rng);
        let d = (x - y).norm();
        let s = d * 0.5 * rng.random::<f64>();
        if s == 0.0 {
            return (0.0, false);
        }
        let xp = x + Complex64::from_polar(s, rng.random::<f64>() * std::f64::consts::TAU);
        let dk = (k_phi(env, x, y) - k_phi(env, xp, y)).norm();
        (dk * d * d / s, false)
    });
    CheckReport::upper("cz_smoothness", worst, 16.0, samples, seed)
}

/// `max{ dist(x, C \ H), |x - x0| - rho' }`.
pub fn build_phi_tilde(h: &DiskSet, x0: Point, rho_prime: f64) -> Result<Envelope> {
    if !(rho_prime > 0.0) {
        return domain("rho' must be positive");
    }
    let mut prims = Vec::new();
    if !h.is_empty() {
        prims.push(Primitive::DiskComplement { set: h.clone() });
    }
    prims.push(Primitive::Cone { x0, rho: rho_prime });
    Ok(Envelope { primitives: prims })
}

/// Adds `dist(x, C \ Q)` for every given terminal square.
pub fn build_phi_d(phi_tilde: &Envelope, terminal: &[Rect]) -> Envelope {
    let mut e = phi_tilde.clone();
    e.primitives
        .extend(terminal.iter().map(|&rect| Primitive::SquareComplement { rect }));
    e
}

/// Pointwise truncated expectation `E_beta` of a finite family of envelopes.
#[derive(Clone, Debug, PartialEq)]
pub struct TrimmedEnvelope {
    envelopes: Vec<Envelope>,
    probs: Vec<f64>,
    beta: f64,
}

impl TrimmedEnvelope {
    pub fn new(envelopes: Vec<Envelope>, probs: Vec<f64>, beta: f64) -> Result<Self> {
        if envelopes.is_empty() || envelopes.len() != probs.len() {
            return domain("need a nonempty family with one probability per envelope");
        }
        if probs.iter().any(|p| !(*p > 0.0)) {
            return domain("probabilities must be positive");
        }
        let s: f64 = crate::numeric::ksum(probs.iter().copied());
        if (s - 1.0).abs() > 1e-12 {
            return domain(format!("probabilities sum to {s}"));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return domain("beta must lie in (0,1)");
        }
        Ok(TrimmedEnvelope {
            envelopes,
            probs,
            beta,
        })
    }

    /// Equal weights.
    pub fn uniform(envelopes: Vec<Envelope>, beta: f64) -> Result<Self> {
        let n = envelopes.len().max(1);
        TrimmedEnvelope::new(envelopes, vec![1.0 / n as f64; n], beta)
    }

    pub fn eval(&self, x: Point) -> f64 {
        let v: Vec<f64> = self.envelopes.iter().map(|e| e.eval(x)).collect();
        trim(&v, &self.probs, self.beta)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn len(&self) -> usize {
        self.envelopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envelopes.is_empty()
    }

    pub fn envelopes(&self) -> &[Envelope] {
        &self.envelopes
    }
}

/// Convenience: `E_beta` Lipschitz check.
pub fn trimmed_lipschitz_check(t: &TrimmedEnvelope, samples: u64, seed: u64) -> Result<CheckReport> {
    lipschitz_check_fn(|x| t.eval(x), "trimmed_envelope_lipschitz", samples, seed)
}
