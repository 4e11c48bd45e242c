//! The Gibbs property of `ν_w` at hyperbolic times:
//! `γ_ε K_ε^{−1} ≤ ν_w(B_w(x, n, ε)) / exp(S_n φ(x) − log λ^n_w) ≤ K_ε`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{holder_seminorm, GridFunction};
use crate::hypotheses::{exactness_time, hyperbolic_times, log_expansions};
use crate::transfer::{EquilibriumData, TransferContext};

use super::pressure::dynamical_ball;
use super::{birkhoff_sum, forward_orbit, HatMeasure};

/// One hyperbolic time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GibbsRow {
    pub n: usize,
    pub ball_lo: f64,
    pub ball_hi: f64,
    pub nu_mass: f64,
    pub s_n_phi: f64,
    pub log_lambda_n: f64,
    pub ratio: f64,
    /// `γ̂_ε(θ^n w) = exp(Σ_{i<ñ} inf φ − log λ^ñ_{θ^n w})`.
    pub gamma_hat: f64,
    pub exactness_time: usize,
    pub within_band: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GibbsReport {
    pub x: f64,
    pub eps: f64,
    pub c: f64,
    /// `K_ε = exp(ε Σ_k |φ_{θ^k w}|_α e^{−ck/2})`.
    pub k_eps: f64,
    /// Smallest `γ̂` over the rows.
    pub gamma_eps: f64,
    pub rows: Vec<GibbsRow>,
    /// Relative widening applied to the band.
    pub slack: f64,
    pub all_within_band: bool,
}

/// Global Hölder constant of a potential on a 4096-node grid.
fn potential_seminorm(ctx: &TransferContext, pos: i64) -> Result<f64> {
    let pot = ctx.potential_at(pos)?;
    let g = GridFunction::from_fn(4096, |x| pot.value(x))?;
    holder_seminorm(&g, pot.holder_exponent, 0.5)
}

/// Evaluates the Gibbs ratio at the first `max_times` `c`-hyperbolic times of `x`
/// (position `eq.first`), using `ν` and `λ` from `eq`.
pub fn gibbs_check(
    ctx: &TransferContext,
    x: f64,
    eps: f64,
    c: f64,
    eq: &EquilibriumData,
    max_times: usize,
    slack: f64,
) -> Result<GibbsReport> {
    if !(eps > 0.0 && eps <= 0.1) {
        return Err(invalid("eps", "must lie in (0, δ(c)] with δ(c) ≤ 0.1"));
    }
    let j0 = eq.first;
    let nu = eq
        .nu(j0)
        .ok_or_else(|| invalid("eq", "reference weights missing at the first position"))?;
    let measure = HatMeasure::new(nu);
    let horizon = eq.lambda_by_pos.len();
    // leave room for the exactness iterates after each hyperbolic time
    let usable = horizon.saturating_sub(crate::hypotheses::EXACTNESS_CAP.min(horizon / 2));
    let s = log_expansions(ctx, j0, x, usable)?;
    let record = hyperbolic_times(&s, c)?;
    if record.times.is_empty() {
        return Err(Error::NoHyperbolicTimes { horizon: usable });
    }

    let mut k_sum = 0.0;
    for k in 0..horizon {
        let weight = (-c * k as f64 / 2.0).exp();
        if weight < 1e-16 {
            break;
        }
        k_sum += potential_seminorm(ctx, j0 + k as i64)? * weight;
    }
    let k_eps = (eps * k_sum).exp();

    let log_lambda: Vec<f64> = eq.lambda_by_pos.iter().map(|l| l.ln()).collect();
    let orbit = forward_orbit(ctx, j0, x, usable)?;
    let mut rows = Vec::new();
    for &n in record.times.iter().take(max_times) {
        let ball = dynamical_ball(ctx, j0, x, n, eps)?;
        let nu_mass = measure.interval(ball.lo, ball.hi);
        let s_n_phi = birkhoff_sum(ctx, j0, x, n)?;
        let log_lambda_n: f64 = log_lambda[..n].iter().sum();
        let ratio = nu_mass / (s_n_phi - log_lambda_n).exp();
        let pos = j0 + n as i64;
        let n_tilde = exactness_time(ctx, pos, orbit[n], eps)?;
        if n + n_tilde > horizon {
            return Err(Error::OutOfWindow {
                index: pos + n_tilde as i64,
                lo: j0,
                hi: j0 + horizon as i64 - 1,
            });
        }
        let mut inf_sum = 0.0;
        for i in 0..n_tilde {
            inf_sum += ctx.potential_at(pos + i as i64)?.inf();
        }
        let gamma_hat = (inf_sum - log_lambda[n..n + n_tilde].iter().sum::<f64>()).exp();
        let within_band = ratio >= gamma_hat / k_eps * (1.0 - slack) && ratio <= k_eps * (1.0 + slack);
        rows.push(GibbsRow {
            n,
            ball_lo: ball.lo,
            ball_hi: ball.hi,
            nu_mass,
            s_n_phi,
            log_lambda_n,
            ratio,
            gamma_hat,
            exactness_time: n_tilde,
            within_band,
        });
    }
    let gamma_eps = rows.iter().map(|r| r.gamma_hat).fold(f64::INFINITY, f64::min);
    Ok(GibbsReport {
        x,
        eps,
        c,
        k_eps,
        gamma_eps,
        all_within_band: rows.iter().all(|r| r.within_band),
        rows,
        slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{FiberMap, PotentialFiber};
    use crate::grid::ConeParams;
    use crate::transfer::{solve_equilibrium, EquilibriumOptions, TransferContext};

    fn report(pot: PotentialFiber) -> GibbsReport {
        let ctx = TransferContext::deterministic(FiberMap::linear(2).unwrap(), pot, 50, 200, 1024).unwrap();
        let cone = ConeParams::new(1.0, 0.05, 10.0).unwrap();
        let eq = solve_equilibrium(&ctx, 0, 120, &EquilibriumOptions::new(cone)).unwrap();
        gibbs_check(&ctx, 0.3141, 0.05, 0.1, &eq, 10, 0.1).unwrap()
    }

    #[test]
    fn doubling_ratios_are_two_eps() {
        let r = report(PotentialFiber::zero());
        assert_eq!(r.rows.len(), 10);
        for row in &r.rows {
            assert!((row.ratio - 0.1).abs() < 1e-6, "{row:?}");
        }
        assert!(r.all_within_band);
        assert_eq!(r.k_eps, 1.0);
    }

    #[test]
    fn constant_potential_cancels() {
        let a = report(PotentialFiber::zero());
        let b = report(PotentialFiber::constant(0.4));
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert!((x.ratio - y.ratio).abs() < 1e-9);
        }
    }
}
