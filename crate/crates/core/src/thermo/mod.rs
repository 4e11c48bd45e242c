//! Thermodynamic experiments on top of the equilibrium data: pressure by three
//! routes, the Gibbs property at hyperbolic times, Rokhlin entropy, decay of
//! correlations and stability sweeps.

pub mod decay;
pub mod entropy;
pub mod gibbs;
pub mod pressure;
pub mod stability;

pub use decay::{decay_correlations, DecayReport};
pub use entropy::{rokhlin_entropy, EntropyEstimate};
pub use gibbs::{gibbs_check, GibbsReport, GibbsRow};
pub use pressure::{
    dynamical_ball, pressure_balls, pressure_lambda, pressure_separated, BallsEstimate, DynamicalBall,
    PressureEstimate, SeparatedEstimate,
};
pub use stability::{spearman, stability_sweep, StabilityInput, StabilityReport, StabilityRow};

use crate::error::Result;
use crate::fiber::wrap;
use crate::transfer::TransferContext;

/// `x, f x, …, f^n x` along the orbit starting at position `j0` (points in `[0, 1)`).
pub fn forward_orbit(ctx: &TransferContext, j0: i64, x: f64, n: usize) -> Result<Vec<f64>> {
    let mut pts = Vec::with_capacity(n + 1);
    let mut y = wrap(x);
    pts.push(y);
    for j in 0..n {
        y = ctx.map_at(j0 + j as i64)?.eval(y);
        pts.push(y);
    }
    Ok(pts)
}

/// `S_n φ(x) = Σ_{j<n} φ_{θ^{j0+j} w}(f^j x)`.
pub fn birkhoff_sum(ctx: &TransferContext, j0: i64, x: f64, n: usize) -> Result<f64> {
    let mut y = wrap(x);
    let mut sum = 0.0;
    for j in 0..n {
        let pos = j0 + j as i64;
        sum += ctx.potential_at(pos)?.value(y);
        y = ctx.map_at(pos)?.eval(y);
    }
    Ok(sum)
}

/// Cumulative distribution of the piecewise-linear density `ρ(x_i) = n w_i`
/// represented by hat weights `w`; `cdf(x)` for real `x` counts whole turns.
pub struct HatMeasure {
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl HatMeasure {
    pub fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        let mut cumulative = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 0..n {
            acc += 0.5 * (weights[i] + weights[(i + 1) % n]);
            cumulative.push(acc);
        }
        Self {
            weights: weights.to_vec(),
            cumulative,
        }
    }

    pub fn total(&self) -> f64 {
        self.cumulative[self.weights.len()]
    }

    /// Density at `x`.
    pub fn density(&self, x: f64) -> f64 {
        let n = self.weights.len();
        let t = wrap(x) * n as f64;
        let i = (t.floor() as usize).min(n - 1);
        let f = t - i as f64;
        n as f64 * (self.weights[i] * (1.0 - f) + self.weights[(i + 1) % n] * f)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.weights.len();
        let turns = x.floor();
        let t = (x - turns) * n as f64;
        let i = (t.floor() as usize).min(n - 1);
        let f = t - i as f64;
        let (a, b) = (self.weights[i], self.weights[(i + 1) % n]);
        turns * self.total() + self.cumulative[i] + a * f + 0.5 * (b - a) * f * f
    }

    /// Mass of the lifted interval `[lo, hi]`.
    pub fn interval(&self, lo: f64, hi: f64) -> f64 {
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hat_measure_uniform_is_lebesgue() {
        let m = HatMeasure::new(&[1.0 / 64.0; 64]);
        assert!((m.total() - 1.0).abs() < 1e-15);
        assert!((m.interval(0.1234, 0.2) - 0.0766).abs() < 1e-14);
        assert!((m.interval(0.95, 1.05) - 0.1).abs() < 1e-14);
        assert!((m.density(0.3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hat_measure_linear_density() {
        // weights of a point mass at a node spread over the adjacent segments
        let mut w = vec![0.0; 8];
        w[2] = 1.0;
        let m = HatMeasure::new(&w);
        assert!((m.total() - 1.0).abs() < 1e-15);
        assert!((m.interval(0.0, 0.25) - 0.5).abs() < 1e-15);
    }
}
