//! Dense tableau simplex for `max c.x` subject to `A x <= b`, `x >= 0`, `b >= 0`.

use crate::error::{domain, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
}

const TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

/// Solves the program with Bland's rule, starting from the slack basis.
pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    let m = a.len();
    if b.len() != m {
        return domain("constraint matrix and right-hand side differ in length");
    }
    if a.iter().any(|row| row.len() != n) {
        return domain("ragged constraint matrix");
    }
    if b.iter().any(|v| !(*v >= 0.0)) {
        return domain("right-hand side must be nonnegative");
    }
    if c.iter().chain(a.iter().flatten()).any(|v| !v.is_finite()) {
        return domain("non-finite coefficient");
    }
    let width = n + m + 1;
    let mut t = vec![0.0f64; (m + 1) * width];
    for i in 0..m {
        let row = &mut t[i * width..(i + 1) * width];
        row[..n].copy_from_slice(&a[i]);
        row[n + i] = 1.0;
        row[width - 1] = b[i];
    }
    let obj = m * width;
    for j in 0..n {
        t[obj + j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut pivots = 0;
    loop {
        let Some(enter) = (0..n + m).find(|&j| t[obj + j] < -TOL) else {
            break;
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let aij = t[i * width + enter];
            if aij > TOL {
                let ratio = t[i * width + width - 1] / aij;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, r)) => {
                        if ratio < r - TOL * r.abs().max(1.0) || ((ratio - r).abs() <= TOL * r.abs().max(1.0) && basis[i] < basis[k]) {
                            Some((i, ratio))
                        } else {
                            Some((k, r))
                        }
                    }
                };
            }
        }
        let Some((pr, _)) = leave else {
            return Err(Error::Unbounded(
                "linear program is unbounded; use a denser constraint grid".into(),
            ));
        };
        pivot(&mut t, width, m, pr, enter);
        basis[pr] = enter;
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(Error::Unbounded(format!("simplex did not terminate in {MAX_PIVOTS} pivots")));
        }
    }
    let mut x = vec![0.0; n];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = t[i * width + width - 1].max(0.0);
        }
    }
    let value = crate::numeric::ksum(c.iter().zip(&x).map(|(a, b)| a * b));
    Ok(LpSolution { x, value, pivots })
}

fn pivot(t: &mut [f64], width: usize, m: usize, pr: usize, pc: usize) {
    let p = t[pr * width + pc];
    for v in &mut t[pr * width..(pr + 1) * width] {
        *v /= p;
    }
    let prow: Vec<f64> = t[pr * width..(pr + 1) * width].to_vec();
    for i in 0..=m {
        if i == pr {
            continue;
        }
        let f = t[i * width + pc];
        if f == 0.0 {
            continue;
        }
        for (v, q) in t[i * width..(i + 1) * width].iter_mut().zip(&prow) {
            *v -= f * q;
        }
        t[i * width + pc] = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_program() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let s = maximize(&[3.0, 5.0], &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]], &[4.0, 12.0, 18.0]).unwrap();
        assert!((s.value - 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_is_reported() {
        let e = maximize(&[1.0, 1.0], &[vec![1.0, -1.0]], &[1.0]).unwrap_err();
        assert!(matches!(e, Error::Unbounded(_)));
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // Klee-Minty style degeneracy with zero right-hand sides.
        let a = vec![vec![1.0, 1.0, 1.0], vec![1.0, -1.0, 0.0], vec![0.0, 1.0, -1.0]];
        let s = maximize(&[1.0, 1.0, 1.0], &a, &[3.0, 0.0, 0.0]).unwrap();
        assert!((s.value - 3.0).abs() < 1e-12);
    }
}
