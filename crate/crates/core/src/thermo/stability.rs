//! Stability of the equilibrium data under perturbation of the fiber maps or
//! potentials: distances to a reference family and their rank correlation with
//! the perturbation size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::transfer::{solve_equilibrium, EquilibriumData, EquilibriumOptions, TransferContext};

/// One member of a one-parameter family of random systems.
pub struct StabilityInput {
    pub s: f64,
    pub ctx: TransferContext,
    /// Whether the member satisfies the standing hypotheses.
    pub hypotheses_pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityRow {
    pub s: f64,
    /// `sup_j |λ_j(s) − λ_j(s₀)|`.
    pub d_lambda: f64,
    /// `sup_j ‖h_j(s) − h_j(s₀)‖_∞` over kept positions.
    pub d_h: f64,
    pub d_pressure: f64,
    pub hypotheses_pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub reference_s: f64,
    /// Sorted by decreasing `|s − s₀|`.
    pub rows: Vec<StabilityRow>,
    /// Spearman correlation between `|s − s₀|` and `d_lambda`.
    pub spearman_lambda: f64,
    /// Spearman correlation between `|s − s₀|` and `d_pressure`.
    pub spearman_pressure: f64,
}

/// Average ranks (ties share the mean rank).
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut k = i;
        while k + 1 < idx.len() && v[idx[k + 1]] == v[idx[i]] {
            k += 1;
        }
        let mean = (i + k) as f64 / 2.0 + 1.0;
        for t in i..=k {
            r[idx[t]] = mean;
        }
        i = k + 1;
    }
    r
}

/// Spearman rank correlation; `NaN` when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs equal lengths");
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

fn distances(eq: &EquilibriumData, reference: &EquilibriumData) -> (f64, f64) {
    let d_lambda = eq
        .lambda_by_pos
        .iter()
        .zip(&reference.lambda_by_pos)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mut d_h: f64 = 0.0;
    for (j, h) in &eq.h_by_pos {
        if let Some(h0) = reference.h(*j) {
            d_h = d_h.max(h.sup_distance(h0));
        }
    }
    (d_lambda, d_h)
}

/// Solves every member on `[first, first + count)` with the same options and
/// compares it against the member with `s == reference_s`.
pub fn stability_sweep(
    inputs: &[StabilityInput],
    reference_s: f64,
    first: i64,
    count: usize,
    opts: &EquilibriumOptions,
) -> Result<StabilityReport> {
    let ref_idx = inputs
        .iter()
        .position(|i| i.s == reference_s)
        .ok_or_else(|| invalid("reference_s", "no input with this parameter"))?;
    let solved = inputs
        .par_iter()
        .map(|i| solve_equilibrium(&i.ctx, first, count, opts))
        .collect::<Result<Vec<_>>>()?;
    let reference = &solved[ref_idx];
    let mut rows = Vec::with_capacity(inputs.len() - 1);
    for (k, (input, eq)) in inputs.iter().zip(&solved).enumerate() {
        if k == ref_idx {
            continue;
        }
        let (d_lambda, d_h) = distances(eq, reference);
        rows.push(StabilityRow {
            s: input.s,
            d_lambda,
            d_h,
            d_pressure: (eq.pressure - reference.pressure).abs(),
            hypotheses_pass: input.hypotheses_pass,
        });
    }
    rows.sort_by(|a, b| (b.s - reference_s).abs().total_cmp(&(a.s - reference_s).abs()));
    let size: Vec<f64> = rows.iter().map(|r| (r.s - reference_s).abs()).collect();
    let dl: Vec<f64> = rows.iter().map(|r| r.d_lambda).collect();
    let dp: Vec<f64> = rows.iter().map(|r| r.d_pressure).collect();
    Ok(StabilityReport {
        reference_s,
        spearman_lambda: spearman(&size, &dl),
        spearman_pressure: spearman(&size, &dp),
        rows,
    })
}
