//! Correlation decay `C_n = ∫(φ∘f^n_w) ψ dμ_w − ∫φ dμ_{θ^n w} ∫ψ dμ_w`.
//!
//! `f^n` is applied pointwise to quadrature nodes rather than through operator
//! powers, so the estimate does not reuse the transfer discretization. The
//! nodes themselves must resolve `μ_w` far below the grid scale, because `ν_w`
//! is in general singular and `φ∘f^n` oscillates on scale `Λ^{−n}`. They are
//! built by pulling the grid nodes at position `j + D` back through `D` exact
//! inverse branches, each preimage `z` of `y` inheriting the conditional weight
//! `e^{φ(z)} h_j(z) / (λ_j h_{j+1}(y))` of `μ_j` given `f_j z = y`. Both factors
//! of the product term use the same nodes (`∫ φ dμ_{θ^n w} = ∫ φ∘f^n dμ_w` by
//! invariance), so `C_n` is a covariance under one quadrature.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fiber::FiberMap;
use crate::grid::GridFunction;
use crate::transfer::{mu_weights, EquilibriumData, TransferContext};

/// Values below this are treated as floating-point noise.
pub const NOISE_FLOOR: f64 = 1e-12;
/// Upper bound on the number of pulled-back quadrature nodes.
pub const MAX_NODES: usize = 1 << 21;
/// A correlation enters the rate fit only when it exceeds this multiple of its quadrature error.
const SIGNAL_TO_ERROR: f64 = 10.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayReport {
    pub observables: (String, String),
    /// `(n, C_n)` for `1 ≤ n ≤ n_max`, at pullback depth `depth`.
    pub rows: Vec<(usize, f64)>,
    /// `|C_n(depth) − C_n(depth − 1)|`, an upper estimate of the quadrature error.
    pub quadrature_error: Vec<f64>,
    pub depth: usize,
    pub nodes: usize,
    /// `e^{slope}` of a least-squares fit of `log |C_n|` over the leading rows whose
    /// value exceeds both the noise floor and ten times the quadrature error.
    pub fitted_rate: Option<f64>,
    /// `K` in `|C_n| ≈ K τ^n` from the same fit: the empirical prefactor.
    pub fitted_prefactor: Option<f64>,
    /// Rows used by the fit.
    pub fit_rows: usize,
    /// First `n` from which every `|C_n|` stays below the noise floor.
    pub noise_from: Option<usize>,
    pub tau_hat: Option<f64>,
    /// `fitted_rate ≤ τ̂ + 0.05`, when both are available.
    pub rate_below_tau: Option<bool>,
}

/// Nodes and weights of a quadrature for `μ_j` obtained from the grid nodes at
/// `j + depth` by `depth` exact pullbacks.
pub fn pulled_back_quadrature(
    ctx: &TransferContext,
    eq: &EquilibriumData,
    j: i64,
    depth: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let missing = |p: i64| invalid("eq", format!("equilibrium data missing at position {p}"));
    let top = j + depth as i64;
    let h_top = eq.h(top).ok_or_else(|| missing(top))?;
    let nu_top = eq.nu(top).ok_or_else(|| missing(top))?;
    let mut w = mu_weights(h_top, nu_top);
    let mut x: Vec<f64> = (0..h_top.n()).map(|i| h_top.node(i)).collect();
    for p in (j..top).rev() {
        let map = ctx.map_at(p)?;
        let pot = ctx.potential_at(p)?;
        let h = eq.h(p).ok_or_else(|| missing(p))?;
        let tol = ctx.preimage_tol;
        let children: Vec<Vec<(f64, f64)>> = x
            .par_iter()
            .zip(&w)
            .map(|(y, wy)| {
                let pre = map.preimages(*y, tol)?;
                let raw: Vec<f64> = pre.iter().map(|z| pot.value(*z).exp() * h.interp(*z)).collect();
                // the conditional weights sum to one up to the grid error in 𝓛h = λh; renormalize
                let total: f64 = raw.iter().sum();
                if !(total > 0.0 && total.is_finite()) {
                    return Err(Error::NonFinite(format!("conditional weights at position {p}")));
                }
                Ok(pre.into_iter().zip(raw).map(|(z, r)| (z, wy * r / total)).collect())
            })
            .collect::<Result<_>>()?;
        x = children.iter().flatten().map(|c| c.0).collect();
        w = children.iter().flatten().map(|c| c.1).collect();
    }
    Ok((x, w))
}

/// Largest depth whose node count stays within [`MAX_NODES`].
fn max_depth(ctx: &TransferContext, j: i64, cap: usize) -> Result<usize> {
    let mut nodes = ctx.grid_n;
    let mut depth = 0;
    while depth < cap {
        let d = ctx.map_at(j + depth as i64)?.degree();
        if nodes * d > MAX_NODES {
            break;
        }
        nodes *= d;
        depth += 1;
    }
    Ok(depth)
}

/// `C_n` for `n = 1..=maps.len()` on the given nodes.
fn covariances(
    x: &[f64],
    w: &[f64],
    psi: &(impl Fn(f64) -> f64 + Sync),
    phi_obs: &(impl Fn(f64) -> f64 + Sync),
    maps: &[&FiberMap],
) -> Vec<f64> {
    const CHUNK: usize = 4096;
    let n_max = maps.len();
    // per chunk: [Σ w ψ, Σ_n w ψ φ∘f^n, Σ_n w φ∘f^n]; reduced in chunk order
    let partials: Vec<Vec<f64>> = x
        .par_chunks(CHUNK)
        .zip(w.par_chunks(CHUNK))
        .map(|(xs, ws)| {
            let mut acc = vec![0.0; 1 + 2 * n_max];
            for (x0, wk) in xs.iter().zip(ws) {
                let wp = wk * psi(*x0);
                acc[0] += wp;
                let mut y = *x0;
                for (i, map) in maps.iter().enumerate() {
                    y = map.eval(y);
                    let v = phi_obs(y);
                    acc[1 + i] += wp * v;
                    acc[1 + n_max + i] += wk * v;
                }
            }
            acc
        })
        .collect();
    let mut tot = vec![0.0; 1 + 2 * n_max];
    for p in &partials {
        for (t, v) in tot.iter_mut().zip(p) {
            *t += v;
        }
    }
    (1..=n_max).map(|n| tot[n] - tot[n_max + n] * tot[0]).collect()
}

/// Correlations of `(phi_obs ∘ f^n, psi)` at position `eq.first` for `n ≤ n_max`.
/// Needs `h`, `ν` at `eq.first + depth` and `h` at every position in between.
pub fn decay_correlations(
    ctx: &TransferContext,
    eq: &EquilibriumData,
    psi: impl Fn(f64) -> f64 + Sync,
    phi_obs: impl Fn(f64) -> f64 + Sync,
    names: (&str, &str),
    n_max: usize,
    tau_hat: Option<f64>,
) -> Result<DecayReport> {
    if n_max == 0 {
        return Err(invalid("n_max", "must be positive"));
    }
    let j = eq.first;
    let maps = (0..n_max)
        .map(|k| ctx.map_at(j + k as i64))
        .collect::<Result<Vec<_>>>()?;
    let kept_run = (0..).take_while(|k| eq.h(j + *k as i64).is_some()).count();
    let depth = max_depth(ctx, j, kept_run.saturating_sub(1))?;
    if depth < 2 {
        return Err(invalid(
            "eq",
            "decay needs h and ν kept on at least three consecutive positions",
        ));
    }
    let (x, w) = pulled_back_quadrature(ctx, eq, j, depth)?;
    let fine = covariances(&x, &w, &psi, &phi_obs, &maps);
    let (xc, wc) = pulled_back_quadrature(ctx, eq, j, depth - 1)?;
    let coarse = covariances(&xc, &wc, &psi, &phi_obs, &maps);
    let quadrature_error: Vec<f64> = fine.iter().zip(&coarse).map(|(a, b)| (a - b).abs()).collect();
    let rows: Vec<(usize, f64)> = fine.iter().enumerate().map(|(i, c)| (i + 1, *c)).collect();
    let abs: Vec<f64> = fine.iter().map(|c| c.abs()).collect();
    let noise_from = (0..abs.len())
        .find(|&i| abs[i..].iter().all(|v| *v < NOISE_FLOOR))
        .map(|i| i + 1);
    let usable: Vec<f64> = abs
        .iter()
        .zip(&quadrature_error)
        .take_while(|(v, e)| **v >= NOISE_FLOOR && **v > SIGNAL_TO_ERROR * **e)
        .map(|(v, _)| *v)
        .collect();
    let fit = log_linear_fit(&usable);
    let fitted_rate = fit.map(|(slope, _)| slope.exp());
    Ok(DecayReport {
        observables: (names.0.to_string(), names.1.to_string()),
        rows,
        quadrature_error,
        depth,
        nodes: x.len(),
        fitted_rate,
        // index 0 holds n = 1, so the prefactor of τ^n is e^{intercept − slope}
        fitted_prefactor: fit.map(|(slope, icpt)| (icpt - slope).exp()),
        fit_rows: if fit.is_some() { usable.len() } else { 0 },
        noise_from,
        tau_hat,
        rate_below_tau: match (fitted_rate, tau_hat) {
            (Some(r), Some(t)) => Some(r <= t + 0.05),
            _ => None,
        },
    })
}

/// Least-squares `(slope, intercept)` of `log v_i` against `i`; needs two points.
fn log_linear_fit(values: &[f64]) -> Option<(f64, f64)> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = values.iter().map(|v| v.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in values.iter().enumerate() {
        sxy += (i as f64 - mx) * (v.ln() - my);
        sxx += (i as f64 - mx).powi(2);
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Convenience wrapper for grid observables.
pub fn decay_correlations_grid(
    ctx: &TransferContext,
    eq: &EquilibriumData,
    psi: &GridFunction,
    phi_obs: &GridFunction,
    n_max: usize,
) -> Result<DecayReport> {
    decay_correlations(
        ctx,
        eq,
        |x| psi.interp(x),
        |x| phi_obs.interp(x),
        ("psi", "phi"),
        n_max,
        None,
    )
}
