//! Grid functions on the circle, local Hölder seminorms, the cone
//! `𝒞^k_δ = {g > 0 : |g|_{α,δ} ≤ k inf g}` and its projective metric `Θ_k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fiber::wrap;
use crate::io::{fmt_f64, CsvTable};

/// Diameter of the circle under arc length.
pub const CIRCLE_DIAMETER: f64 = 0.5;

/// Values at the nodes `i/n` of a uniform circle grid, with circular
/// piecewise-linear interpolation in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(invalid("grid size", format!("{n} is not a power of two ≥ 2")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid value at node {i}")));
        }
        Ok(Self { values })
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..n).map(|i| f(i as f64 / n as f64)).collect())
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n() as f64
    }

    /// Circular piecewise-linear interpolation; exact at nodes.
    #[inline]
    pub fn interp(&self, x: f64) -> f64 {
        let n = self.values.len();
        let t = wrap(x) * n as f64;
        let i = (t.floor() as usize).min(n - 1);
        let frac = t - i as f64;
        if frac == 0.0 {
            return self.values[i];
        }
        self.values[i] * (1.0 - frac) + self.values[(i + 1) % n] * frac
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n() as f64
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| f(*v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.n() != other.n() {
            return Err(invalid("grid size", "mismatched grids"));
        }
        Self::new(self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect())
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `Σ_i w_i g(x_i)`.
    pub fn integrate(&self, weights: &[f64]) -> f64 {
        self.values.iter().zip(weights).map(|(g, w)| g * w).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut table = CsvTable::new(["node", "value"]);
        for (i, v) in self.values.iter().enumerate() {
            table.push(vec![i.to_string(), fmt_f64(*v)]);
        }
        table.render()
    }
}

/// Parameters of the cone `𝒞^k_δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeParams {
    pub alpha: f64,
    pub delta: f64,
    pub k: f64,
    /// Number of δ-balls covering the circle plus one.
    pub m: usize,
}

impl ConeParams {
    pub fn new(alpha: f64, delta: f64, k: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid("alpha", "must lie in (0, 1]"));
        }
        if !(delta > 0.0 && delta <= 0.5) {
            return Err(invalid("delta", "must lie in (0, 1/2]"));
        }
        if !(k > 0.0) {
            return Err(invalid("k", "must be positive"));
        }
        Ok(Self {
            alpha,
            delta,
            k,
            m: covering_constant(delta),
        })
    }

    pub fn with_k(&self, k: f64) -> Self {
        Self { k, ..*self }
    }

    /// `1 + m k (diam M)^α`, the bound `sup g ≤ R inf g` on the cone.
    pub fn r_bound(&self) -> f64 {
        1.0 + self.m as f64 * self.k * CIRCLE_DIAMETER.powf(self.alpha)
    }
}

/// `m = ⌈1/(2δ)⌉ + 1`.
pub fn covering_constant(delta: f64) -> usize {
    (1.0 / (2.0 * delta) - 1e-9).ceil() as usize + 1
}

/// Largest node offset `s` with `s/n < delta` (capped at `n/2`).
fn max_offset(n: usize, delta: f64) -> usize {
    let mut s = ((delta * n as f64).ceil() as usize).saturating_sub(1);
    while s > 0 && s as f64 / n as f64 >= delta {
        s -= 1;
    }
    while (s + 1) as f64 / (n as f64) < delta && s < n / 2 {
        s += 1;
    }
    s.min(n / 2)
}

/// `|g|_{α,δ}`: the max of `|g(x) − g(y)| / d(x,y)^α` over node pairs with `d(x,y) < δ`.
pub fn holder_seminorm(g: &GridFunction, alpha: f64, delta: f64) -> Result<f64> {
    let n = g.n();
    if delta < 2.0 / n as f64 {
        return Err(invalid("delta", "below grid resolution (needs δ ≥ 2/n)"));
    }
    let v = g.values();
    let adjacent = (0..n).map(|i| (v[(i + 1) % n] - v[i]).abs()).fold(0.0, f64::max);
    if alpha == 1.0 {
        // chaining adjacent differences bounds every pair
        return Ok(adjacent * n as f64);
    }
    let smax = max_offset(n, delta);
    let best = (1..=smax)
        .into_par_iter()
        .map(|s| {
            let d = (s as f64 / n as f64).powf(alpha);
            (0..n).map(|i| (v[(i + s) % n] - v[i]).abs()).fold(0.0, f64::max) / d
        })
        .collect::<Vec<_>>();
    Ok(best.into_iter().fold(0.0, f64::max))
}

/// Certified global Hölder constant from a local one.
pub fn globalize_seminorm(local: f64, params: &ConeParams) -> f64 {
    local * params.m as f64
}

/// `(member, k − |g|_{α,δ}/min g)`; the margin is `-∞` when `min g ≤ 0`.
pub fn cone_member(g: &GridFunction, params: &ConeParams) -> Result<(bool, f64)> {
    let lo = g.min();
    if !(lo > 0.0) {
        return Ok((false, f64::NEG_INFINITY));
    }
    let ratio = holder_seminorm(g, params.alpha, params.delta)? / lo;
    Ok((ratio <= params.k, params.k - ratio))
}

/// `Θ_k` together with its extremal coefficients and sampling density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectiveDistance {
    pub value: f64,
    /// `A_k`, the infimum of the sampled cone ratios (brackets `inf φ/ψ` from below).
    pub a: f64,
    /// `B_k`, the supremum (brackets `sup φ/ψ` from above).
    pub b: f64,
    /// Ordered node pairs `(x, y)` with `d(x, y) < δ` that were sampled.
    pub pairs: usize,
    /// Number of `z` nodes (every grid node).
    pub z_samples: usize,
    /// `z` nodes surviving the convex-hull reduction.
    pub hull_vertices: usize,
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull (monotone chain). Linear-fractional functions with a positive
/// denominator attain their extrema over a point set at hull vertices.
fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], *p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], *p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Projective metric `Θ_k(φ, ψ) = log(B_k/A_k)` where `A_k`, `B_k` are the
/// inf and sup over `d(x,y) < δ` and all nodes `z` of
/// `[k d^α φ(z) − (φ(x) − φ(y))] / [k d^α ψ(z) − (ψ(x) − ψ(y))]`.
pub fn theta_metric(phi: &GridFunction, psi: &GridFunction, params: &ConeParams) -> Result<ProjectiveDistance> {
    let n = phi.n();
    if psi.n() != n {
        return Err(invalid("grid size", "mismatched grids"));
    }
    for (name, g) in [("phi", phi), ("psi", psi)] {
        let (inside, margin) = cone_member(g, params)?;
        if !inside {
            return Err(Error::OutsideCone(format!("{name} (margin {margin:e})")));
        }
    }
    let hull = convex_hull(phi.values().iter().zip(psi.values()).map(|(a, b)| (*b, *a)).collect());
    let smax = max_offset(n, params.delta);
    let (pv, qv) = (phi.values(), psi.values());
    let per_offset: Vec<Option<(f64, f64)>> = (1..=smax)
        .into_par_iter()
        .map(|s| {
            let dd = params.k * (s as f64 / n as f64).powf(params.alpha);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..n {
                let j = (i + s) % n;
                let u = pv[i] - pv[j];
                let v = qv[i] - qv[j];
                for (uu, vv) in [(u, v), (-u, -v)] {
                    for &(qz, pz) in &hull {
                        let den = dd * qz - vv;
                        if !(den > 0.0) {
                            return None;
                        }
                        let r = (dd * pz - uu) / den;
                        lo = lo.min(r);
                        hi = hi.max(r);
                    }
                }
            }
            Some((lo, hi))
        })
        .collect();
    let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
    for entry in per_offset {
        let (lo, hi) =
            entry.ok_or_else(|| Error::OutsideCone("nonpositive denominator in projective metric".into()))?;
        a = a.min(lo);
        b = b.max(hi);
    }
    let value = if a > 0.0 { (b / a).ln().max(0.0) } else { f64::INFINITY };
    Ok(ProjectiveDistance {
        value,
        a,
        b,
        pairs: 2 * n * smax,
        z_samples: n,
        hull_vertices: hull.len(),
    })
}

/// Checks `A_k ≤ inf φ/ψ` and `B_k ≥ sup φ/ψ` on the grid.
pub fn sandwich_check(phi: &GridFunction, psi: &GridFunction, params: &ConeParams) -> Result<bool> {
    let dist = theta_metric(phi, psi, params)?;
    let ratios = phi.zip_with(psi, |a, b| a / b)?;
    let slack = 1e-12;
    Ok(dist.a <= ratios.min() * (1.0 + slack) && dist.b >= ratios.max() * (1.0 - slack))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn interp_exact_at_nodes() {
        let g = GridFunction::from_fn(64, |x| (TAU * x).sin()).unwrap();
        for i in 0..64 {
            assert_eq!(g.interp(i as f64 / 64.0), g.values()[i]);
        }
        assert!((g.interp(1.0 + 1.0 / 128.0) - 0.5 * (g.values()[0] + g.values()[1])).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(GridFunction::new(vec![1.0; 100]).is_err());
    }

    #[test]
    fn seminorm_constant_and_hat() {
        let c = GridFunction::constant(256, 3.0).unwrap();
        assert_eq!(holder_seminorm(&c, 0.5, 0.1).unwrap(), 0.0);
        // hat of slope 4 on [0, 1/2], −4 on [1/2, 1]
        let hat = GridFunction::from_fn(256, |x| 4.0 * x.min(1.0 - x)).unwrap();
        let s = holder_seminorm(&hat, 1.0, 0.1).unwrap();
        assert!((s - 4.0).abs() < 1e-12);
    }

    #[test]
    fn seminorm_cosine_within_one_percent_of_two_pi() {
        let g = GridFunction::from_fn(4096, |x| (TAU * x).cos()).unwrap();
        let s = holder_seminorm(&g, 1.0, 0.05).unwrap();
        // oracle: brute-force over all pairs within δ on a coarser grid
        let n = 1024;
        let mut oracle: f64 = 0.0;
        for i in 0..n {
            for s in 1..51 {
                let x = i as f64 / n as f64;
                let y = x + s as f64 / n as f64;
                oracle = oracle.max(((TAU * x).cos() - (TAU * y).cos()).abs() / (s as f64 / n as f64));
            }
        }
        assert!((s - TAU).abs() / TAU < 0.01);
        assert!((oracle - TAU).abs() / TAU < 0.01);
    }

    #[test]
    fn seminorm_general_alpha_matches_pairs() {
        let g = GridFunction::from_fn(128, |x| (TAU * x).cos() + 0.3 * (2.0 * TAU * x).sin()).unwrap();
        let s = holder_seminorm(&g, 0.5, 0.1).unwrap();
        let mut brute: f64 = 0.0;
        for i in 0..128 {
            for j in 0..128 {
                let d = crate::fiber::circle_dist(i as f64 / 128.0, j as f64 / 128.0);
                if i != j && d < 0.1 {
                    brute = brute.max((g.values()[i] - g.values()[j]).abs() / d.sqrt());
                }
            }
        }
        assert!((s - brute).abs() < 1e-12);
        assert!(holder_seminorm(&g, 0.5, 1.0 / 128.0).is_err());
    }

    #[test]
    fn covering_constants() {
        let p = ConeParams::new(1.0, 0.05, 100.0).unwrap();
        assert_eq!(p.m, 11);
        assert_eq!(globalize_seminorm(2.0, &p), 22.0);
        assert_eq!(ConeParams::new(1.0, 0.5, 1.0).unwrap().m, 2);
        assert_eq!(globalize_seminorm(0.0, &p), 0.0);
    }

    #[test]
    fn cone_membership() {
        let p = ConeParams::new(1.0, 0.05, 100.0).unwrap();
        assert_eq!(
            cone_member(&GridFunction::constant(64, 1.0).unwrap(), &p).unwrap(),
            (true, 100.0)
        );
        let g = GridFunction::from_fn(4096, |x| (TAU * x).cos() + 2.0).unwrap();
        let (inside, margin) = cone_member(&g, &p).unwrap();
        assert!(inside);
        assert!((margin - (100.0 - TAU)).abs() < 0.07);
        let z = GridFunction::from_fn(64, |x| x).unwrap();
        assert_eq!(cone_member(&z, &p).unwrap(), (false, f64::NEG_INFINITY));
    }

    #[test]
    fn theta_zero_on_rays() {
        let p = ConeParams::new(1.0, 0.05, 100.0).unwrap();
        let g = GridFunction::from_fn(256, |x| 1.0 + 0.2 * (TAU * x).cos()).unwrap();
        let d = theta_metric(&g, &g.scale(2.0), &p).unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn theta_dense_oracle() {
        // brute force over every (x, y, z) triple on a grid 4x denser in z
        let p = ConeParams::new(1.0, 0.05, 100.0).unwrap();
        let n = 256;
        let one = GridFunction::constant(n, 1.0).unwrap();
        let g = GridFunction::from_fn(n, |x| 1.0 + 0.1 * (TAU * x).cos()).unwrap();
        let fast = theta_metric(&one, &g, &p).unwrap();
        let nz = 4 * n;
        let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            for s in 1..n {
                let d = crate::fiber::circle_dist(i as f64 / n as f64, ((i + s) % n) as f64 / n as f64);
                if d >= 0.05 {
                    continue;
                }
                let j = (i + s) % n;
                let (u, v) = (0.0, g.values()[i] - g.values()[j]);
                for zi in 0..nz {
                    let z = zi as f64 / nz as f64;
                    let r = (100.0 * d - u) / (100.0 * d * g.interp(z) - v);
                    a = a.min(r);
                    b = b.max(r);
                }
            }
        }
        let brute = (b / a).ln();
        assert!((fast.value - brute).abs() <= 0.02 * brute);
    }

    #[test]
    fn theta_rejects_outside_cone() {
        let p = ConeParams::new(1.0, 0.05, 1.0).unwrap();
        let g = GridFunction::from_fn(256, |x| 1.0 + 0.5 * (TAU * x).cos()).unwrap();
        let one = GridFunction::constant(256, 1.0).unwrap();
        assert!(matches!(theta_metric(&one, &g, &p), Err(Error::OutsideCone(_))));
    }

    #[test]
    fn sandwich_cases() {
        let p = ConeParams::new(1.0, 0.05, 100.0).unwrap();
        let g = GridFunction::from_fn(256, |x| 1.0 + 0.3 * (TAU * x).sin()).unwrap();
        assert!(sandwich_check(&g, &g, &p).unwrap());
        let d = theta_metric(&g.scale(2.0), &g, &p).unwrap();
        assert!((d.a - 2.0).abs() < 1e-12 && (d.b - 2.0).abs() < 1e-12);
        assert!(sandwich_check(&g.scale(2.0), &g, &p).unwrap());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = GridFunction::constant(4, 1.0).unwrap();
        let csv = g.to_csv();
        assert!(csv.starts_with("node,value\n0,1.0000000000000000e0\n"));
        assert_eq!(csv.lines().count(), 5);
    }
}
