//! Fiber entropy of the equilibrium family through Rokhlin's formula
//! `h_μ(F|θ) = ∫ log J_μ dμ` with `J = λ_w e^{−φ_w} h_{θ(w)}∘f_w / h_w`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::stream_rng;
use crate::error::{invalid, Error, Result};
use crate::transfer::{mu_weights, EquilibriumData, TransferContext};

/// Monte-Carlo block size; block `b` draws from ChaCha stream `ENTROPY_STREAM + b`.
const BLOCK: usize = 1024;
const ENTROPY_STREAM: u64 = 1 << 20;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub entropy: f64,
    pub entropy_se: f64,
    /// `∫ φ dμ` from the same samples.
    pub integral_phi: f64,
    pub integral_phi_se: f64,
    /// Mean of `log λ` over the sampled positions.
    pub pressure: f64,
    /// `entropy + ∫φ dμ − pressure`.
    pub gap: f64,
    /// Standard error of the per-sample gap `log h_{θ(w)}(f x) − log h_w(x)`.
    pub gap_se: f64,
    pub samples: usize,
    pub positions: usize,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Samples `x ~ μ_j` (node drawn from the `μ` weights, then a triangular jitter
/// matching the hat basis), cycling through the positions `j` that keep both
/// `h_j, ν_j` and `h_{j+1}`.
pub fn rokhlin_entropy(
    ctx: &TransferContext,
    eq: &EquilibriumData,
    samples: usize,
    seed: u64,
) -> Result<EntropyEstimate> {
    if samples == 0 {
        return Err(invalid("samples", "must be positive"));
    }
    let positions: Vec<i64> = eq
        .h_by_pos
        .keys()
        .cloned()
        .filter(|j| eq.nu(*j).is_some() && eq.h(j + 1).is_some() && eq.lambda(*j).is_some())
        .collect();
    if positions.is_empty() {
        return Err(invalid("eq", "no position keeps h_j, ν_j and h_{j+1}"));
    }
    let cdfs: Vec<Vec<f64>> = positions
        .iter()
        .map(|j| {
            let mu = mu_weights(eq.h(*j).expect("kept"), eq.nu(*j).expect("kept"));
            let mut acc = 0.0;
            mu.iter()
                .map(|w| {
                    acc += w;
                    acc
                })
                .collect()
        })
        .collect();
    let n = ctx.grid_n;
    let blocks = samples.div_ceil(BLOCK);
    let per_block: Vec<Result<Vec<(f64, f64, f64)>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, ENTROPY_STREAM + b as u64);
            let count = BLOCK.min(samples - b * BLOCK);
            let mut out = Vec::with_capacity(count);
            for k in 0..count {
                let idx = (b * BLOCK + k) % positions.len();
                let j = positions[idx];
                let cdf = &cdfs[idx];
                let u: f64 = rng.random::<f64>() * cdf[n - 1];
                let node = cdf.partition_point(|c| *c < u).min(n - 1);
                let jitter = (rng.random::<f64>() + rng.random::<f64>() - 1.0) / n as f64;
                let x = crate::fiber::wrap(node as f64 / n as f64 + jitter);
                let h = eq.h(j).expect("kept").interp(x);
                let fx = ctx.map_at(j)?.eval(x);
                let h_next = eq.h(j + 1).expect("kept").interp(fx);
                if !(h > 0.0 && h_next > 0.0) {
                    return Err(Error::NonFinite(format!("density vanished at position {j}")));
                }
                let phi = ctx.potential_at(j)?.value(x);
                let log_lambda = eq.lambda(j).expect("kept").ln();
                let drift = h_next.ln() - h.ln();
                out.push((log_lambda - phi + drift, phi, drift));
            }
            Ok(out)
        })
        .collect();
    let mut logj = Vec::with_capacity(samples);
    let mut phis = Vec::with_capacity(samples);
    let mut drifts = Vec::with_capacity(samples);
    for block in per_block {
        for (a, b, c) in block? {
            logj.push(a);
            phis.push(b);
            drifts.push(c);
        }
    }
    let (entropy, entropy_se) = mean_se(&logj);
    let (integral_phi, integral_phi_se) = mean_se(&phis);
    let (_, gap_se) = mean_se(&drifts);
    // the sampled positions are visited round-robin, so weight log λ accordingly
    let pressure = (0..samples)
        .map(|k| eq.lambda(positions[k % positions.len()]).expect("kept").ln())
        .sum::<f64>()
        / samples as f64;
    Ok(EntropyEstimate {
        entropy,
        entropy_se,
        integral_phi,
        integral_phi_se,
        pressure,
        gap: entropy + integral_phi - pressure,
        gap_se,
        samples,
        positions: positions.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{FiberMap, PotentialFiber};
    use crate::grid::ConeParams;
    use crate::transfer::{solve_equilibrium, EquilibriumOptions};

    #[test]
    fn doubling_entropy_is_log2() {
        let ctx =
            TransferContext::deterministic(FiberMap::linear(2).unwrap(), PotentialFiber::zero(), 50, 80, 256).unwrap();
        let cone = ConeParams::new(1.0, 0.05, 10.0).unwrap();
        let eq = solve_equilibrium(&ctx, 0, 10, &EquilibriumOptions::new(cone)).unwrap();
        let e = rokhlin_entropy(&ctx, &eq, 3000, 7).unwrap();
        assert!((e.entropy - 2f64.ln()).abs() < 1e-12);
        assert!(e.gap.abs() < 1e-12);
    }

    #[test]
    fn deterministic_in_seed() {
        let ctx = TransferContext::deterministic(
            FiberMap::sine(2, 0.5).unwrap(),
            PotentialFiber::cosine(0.1),
            50,
            80,
            256,
        )
        .unwrap();
        let cone = ConeParams::new(1.0, 0.05, 100.0).unwrap();
        let eq = solve_equilibrium(&ctx, 0, 4, &EquilibriumOptions::new(cone)).unwrap();
        let a = rokhlin_entropy(&ctx, &eq, 5000, 3).unwrap();
        let b = rokhlin_entropy(&ctx, &eq, 5000, 3).unwrap();
        assert_eq!(a.entropy.to_bits(), b.entropy.to_bits());
        assert!(a.gap.abs() < 5e-3 + 2.0 * a.gap_se, "{a:?}");
    }
}
