//! Ulam-type discretization of a single fiber's transfer operator, used as an
//! independent oracle for the orbit-based eigendata.
//!
//! Convention: row `i` belongs to the node `x_i = i/n` and `(M g)_i` approximates
//! `(𝓛 g)(x_i)`; entry `(i, i')` accumulates `e^{φ(y)}` times the hat weight of
//! the preimage `y` of `x_i` on node `i'`. The right eigenvector approximates
//! `h`, the left eigenvector the reference weights `ν`.
//!
//! Preimages are located by a coarse scan for sign changes of `G(y) − x − m`
//! followed by plain bisection, independently of the Newton solver used by
//! [`crate::fiber::FiberMap::preimages`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fiber::{FiberMap, PotentialFiber};

/// Sparse `n × n` nonnegative matrix in compressed-row form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UlamMatrix {
    pub n: usize,
    /// Fiber label this matrix discretizes.
    pub symbol: String,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Leading eigendata from power iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UlamEigen {
    pub eigenvalue: f64,
    /// Right eigenvector normalized so that `Σ right_i left_i = 1`.
    pub right: Vec<f64>,
    /// Left eigenvector normalized to sum 1.
    pub left: Vec<f64>,
    pub iterations: usize,
}

const SCAN: usize = 64;

fn bisect_preimages(map: &FiberMap, x: f64) -> Vec<f64> {
    let d = map.degree();
    let g0 = map.lift(0.0);
    let mut out = Vec::with_capacity(d);
    // targets x + m lying in [G(0), G(0) + d)
    let first = (g0 - x).ceil();
    for m in 0..d {
        let target = x + first + m as f64;
        // scan [0, 1] for the bracket, then bisect
        let mut lo = 0.0;
        let mut hi = 1.0;
        for k in 1..=SCAN {
            let y = k as f64 / SCAN as f64;
            if map.lift(y) >= target {
                hi = y;
                lo = (k - 1) as f64 / SCAN as f64;
                break;
            }
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if map.lift(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let y = 0.5 * (lo + hi);
        out.push(if y >= 1.0 { y - 1.0 } else { y });
    }
    out
}

/// Builds the Ulam matrix of `(map, potential)` on `n` nodes.
pub fn ulam_matrix(map: &FiberMap, potential: &PotentialFiber, n: usize) -> Result<UlamMatrix> {
    if n < 2 || !n.is_power_of_two() || n > 1 << 14 {
        return Err(invalid("n", "must be a power of two in [2, 2^14]"));
    }
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row: Vec<(usize, f64)> = Vec::new();
            for y in bisect_preimages(map, i as f64 / n as f64) {
                let e = potential.value(y).exp();
                let t = y * n as f64;
                let c = (t.floor() as usize).min(n - 1);
                let frac = t - c as f64;
                row.push((c, e * (1.0 - frac)));
                row.push(((c + 1) % n, e * frac));
            }
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (c, v) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            merged
        })
        .collect();
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for row in rows {
        for (c, v) in row {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(UlamMatrix {
        n,
        symbol: map.label.clone(),
        row_ptr,
        cols,
        vals,
    })
}

impl UlamMatrix {
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.vals[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum())
            .collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n)
            .flat_map(move |i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |e| (i, self.cols[e], self.vals[e])))
    }

    pub fn mul(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|e| self.vals[e] * v[self.cols[e]])
                    .sum()
            })
            .collect()
    }

    pub fn mul_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, vi) in v.iter().enumerate().take(self.n) {
            for e in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.cols[e]] += self.vals[e] * vi;
            }
        }
        out
    }

    /// Power iteration on `M` and `Mᵀ` until the eigenvalue estimate and the
    /// normalized vectors change by less than `tol` (relative).
    pub fn leading_eigen(&self, tol: f64, max_iter: usize) -> Result<UlamEigen> {
        let (right, lam_r, it_r) = power(|v| self.mul(v), self.n, tol, max_iter)?;
        let (left, _, it_l) = power(|v| self.mul_transpose(v), self.n, tol, max_iter)?;
        let total: f64 = left.iter().sum();
        let left: Vec<f64> = left.iter().map(|v| v / total).collect();
        let pairing: f64 = right.iter().zip(&left).map(|(a, b)| a * b).sum();
        Ok(UlamEigen {
            eigenvalue: lam_r,
            right: right.iter().map(|v| v / pairing).collect(),
            left,
            iterations: it_r.max(it_l),
        })
    }
}

fn power(apply: impl Fn(&[f64]) -> Vec<f64>, n: usize, tol: f64, max_iter: usize) -> Result<(Vec<f64>, f64, usize)> {
    let mut v = vec![1.0; n];
    let mut lam = 0.0;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let w = apply(&v);
        let norm = w.iter().sum::<f64>() / n as f64;
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NonFinite("Ulam power iteration".into()));
        }
        let w: Vec<f64> = w.into_iter().map(|x| x / norm).collect();
        let change = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let lam_change = (norm - lam).abs() / norm;
        residual = change.max(lam_change);
        v = w;
        lam = norm;
        if residual < tol {
            return Ok((v, lam, it));
        }
    }
    Err(Error::Stagnation {
        iterations: max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_eigendata() {
        let m = ulam_matrix(&FiberMap::linear(2).unwrap(), &PotentialFiber::zero(), 256).unwrap();
        let e = m.leading_eigen(1e-12, 100_000).unwrap();
        assert!((e.eigenvalue - 2.0).abs() < 1e-12);
        assert!(e.right.iter().all(|v| (v - 1.0).abs() < 1e-10));
        assert!(m.entries().all(|(_, _, v)| v >= 0.0));
    }

    #[test]
    fn tripling_constant_potential() {
        let m = ulam_matrix(&FiberMap::linear(3).unwrap(), &PotentialFiber::constant(0.3), 128).unwrap();
        let e = m.leading_eigen(1e-12, 100_000).unwrap();
        assert!((e.eigenvalue - 3.0 * 0.3f64.exp()).abs() < 1e-11);
    }

    #[test]
    fn row_sums_are_transfer_of_one() {
        let map = FiberMap::sine(2, 0.5).unwrap();
        let pot = PotentialFiber::cosine(0.1);
        let m = ulam_matrix(&map, &pot, 64).unwrap();
        for (i, s) in m.row_sums().iter().enumerate() {
            let direct: f64 = map
                .preimages(i as f64 / 64.0, 1e-13)
                .unwrap()
                .iter()
                .map(|y| pot.value(*y).exp())
                .sum();
            assert!((s - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_large_grids() {
        assert!(ulam_matrix(&FiberMap::linear(2).unwrap(), &PotentialFiber::zero(), 1 << 15).is_err());
    }
}
