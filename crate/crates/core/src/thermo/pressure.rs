//! Random topological pressure through `log λ`, separated sets and dynamical-ball covers.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fiber::wrap;
use crate::transfer::{EquilibriumData, TransferContext};

use super::birkhoff_sum;

/// Largest candidate set scanned by [`pressure_separated`] and largest cover
/// built by [`pressure_balls`].
pub const MAX_POINTS: usize = 1 << 24;
/// Candidate spacing is `ε / (CANDIDATE_REFINEMENT · Π max f')`.
const CANDIDATE_REFINEMENT: f64 = 64.0;

/// The three pressure routes side by side; discrepancies are reported, never averaged.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PressureEstimate {
    pub lambda_route: f64,
    pub separated_route: f64,
    pub balls_route: f64,
    pub n_used: usize,
    pub eps_used: f64,
    pub separated: SeparatedEstimate,
    pub balls: BallsEstimate,
}

impl PressureEstimate {
    pub fn max_discrepancy(&self) -> f64 {
        (self.lambda_route - self.separated_route)
            .abs()
            .max((self.lambda_route - self.balls_route).abs())
    }
}

/// `(1/n) Σ_{j<n} log λ_{θ^j w}` over the first `n` reported positions.
pub fn pressure_lambda(eq: &EquilibriumData, n: usize) -> Result<f64> {
    if n == 0 || n > eq.lambda_by_pos.len() {
        return Err(invalid("n", format!("need 1 ≤ n ≤ {}", eq.lambda_by_pos.len())));
    }
    Ok(eq.lambda_by_pos[..n].iter().map(|l| l.ln()).sum::<f64>() / n as f64)
}

fn max_derivative(ctx: &TransferContext, pos: i64) -> Result<f64> {
    let map = ctx.map_at(pos)?;
    Ok((0..1024).map(|i| map.derivative(i as f64 / 1024.0)).fold(0.0, f64::max))
}

/// Greedy maximal `(w, n, ε)`-separated set and its partition sum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparatedSet {
    pub n: usize,
    pub eps: f64,
    pub candidates: usize,
    pub points: usize,
    /// `log Σ_{y ∈ F_n} e^{S_n φ(y)}`.
    pub log_sum: f64,
}

fn logsumexp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Scans `M` equally spaced candidates in order and keeps a candidate when it is
/// `ε`-apart at some time `j < n` from every kept point; only kept points within
/// `ε` at time 0 can fail that test, so they are the only ones compared.
pub fn separated_set(ctx: &TransferContext, j0: i64, n: usize, eps: f64) -> Result<SeparatedSet> {
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    if !(eps >= 2.0 / ctx.grid_n as f64) || eps >= 0.5 {
        return Err(invalid("eps", "must satisfy 2/grid_n ≤ ε < 1/2"));
    }
    let mut expansion = 1.0;
    for j in 0..n.saturating_sub(1) {
        expansion *= max_derivative(ctx, j0 + j as i64)?;
    }
    let wanted = (CANDIDATE_REFINEMENT * expansion / eps).ceil() + 1.0;
    if wanted > MAX_POINTS as f64 {
        return Err(Error::Cover(format!(
            "separated set at n = {n}, ε = {eps} needs {wanted:.0} candidates (limit {MAX_POINTS})"
        )));
    }
    let m = (wanted as usize).max(ctx.grid_n);
    let maps = (0..n).map(|j| ctx.map_at(j0 + j as i64)).collect::<Result<Vec<_>>>()?;
    let pots = (0..n)
        .map(|j| ctx.potential_at(j0 + j as i64))
        .collect::<Result<Vec<_>>>()?;

    let dist = |a: f64, b: f64| {
        let d = (a - b).abs();
        d.min(1.0 - d)
    };
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(p, q)| dist(*p, *q) <= eps);

    let mut kept_x: Vec<f64> = Vec::new();
    let mut kept_orbits: Vec<f64> = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    let mut window_lo = 0usize;
    let mut orbit = vec![0.0; n];
    for i in 0..m {
        let x = i as f64 / m as f64;
        let mut y = x;
        let mut s = 0.0;
        for j in 0..n {
            orbit[j] = y;
            s += pots[j].value(y);
            y = maps[j].eval(y);
        }
        while window_lo < kept_x.len() && x - kept_x[window_lo] > eps {
            window_lo += 1;
        }
        let mut separated = true;
        for k in (window_lo..kept_x.len()).rev() {
            if close(&orbit, &kept_orbits[k * n..(k + 1) * n]) {
                separated = false;
                break;
            }
        }
        if separated && x > 1.0 - eps {
            // wrap-around neighbours kept at the start of the scan
            for k in 0..kept_x.len() {
                if kept_x[k] + 1.0 - x > eps {
                    break;
                }
                if close(&orbit, &kept_orbits[k * n..(k + 1) * n]) {
                    separated = false;
                    break;
                }
            }
        }
        if separated {
            kept_x.push(x);
            kept_orbits.extend_from_slice(&orbit);
            sums.push(s);
        }
    }
    Ok(SeparatedSet {
        n,
        eps,
        candidates: m,
        points: kept_x.len(),
        log_sum: logsumexp(&sums),
    })
}

/// Separated-set route at a fixed `(n, ε)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparatedEstimate {
    pub n: usize,
    pub eps: f64,
    /// `(1/n) log Z_n`, which carries an `O(log(1/ε)/n)` bias.
    pub raw: f64,
    /// `(log Z_n − log Z_{n−k}) / k` with `k = max(1, n/2)`; the `ε`-dependent
    /// constant cancels. Equals `raw` when `n = 1`.
    pub estimate: f64,
    pub sets: Vec<SeparatedSet>,
}

pub fn pressure_separated(ctx: &TransferContext, j0: i64, n: usize, eps: f64) -> Result<SeparatedEstimate> {
    let top = separated_set(ctx, j0, n, eps)?;
    let raw = top.log_sum / n as f64;
    if n == 1 {
        return Ok(SeparatedEstimate {
            n,
            eps,
            raw,
            estimate: raw,
            sets: vec![top],
        });
    }
    let k = (n / 2).max(1);
    let lower = separated_set(ctx, j0, n - k, eps)?;
    Ok(SeparatedEstimate {
        n,
        eps,
        raw,
        estimate: (top.log_sum - lower.log_sum) / k as f64,
        sets: vec![top, lower],
    })
}

/// The component of `B_w(x, n, ε)` containing `x`, as a lifted interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicalBall {
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
    /// Set when an endpoint had to be pulled in to keep the ball inside one branch.
    pub shrunk: bool,
}

impl DynamicalBall {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, y: f64) -> bool {
        let t = self.lo + (y - self.lo).rem_euclid(1.0);
        t > self.lo && t < self.hi
    }
}

/// `B_w(x, n, ε) = {y : d(f^j x, f^j y) < ε, 0 ≤ j ≤ n}`: the `ε`-interval around
/// `f^n x` is pulled back through the lifts and intersected with the
/// `ε`-interval at every intermediate time.
pub fn dynamical_ball(ctx: &TransferContext, j0: i64, x: f64, n: usize, eps: f64) -> Result<DynamicalBall> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(invalid("eps", "must lie in (0, 1/2)"));
    }
    let tol = ctx.preimage_tol.min(1e-13);
    // lifted orbit re-centred into [0, 1) at each step, remembering the shifts
    let mut centers = Vec::with_capacity(n + 1);
    let mut shifts = Vec::with_capacity(n);
    let mut y = wrap(x);
    centers.push(y);
    for j in 0..n {
        let g = ctx.map_at(j0 + j as i64)?.lift(y);
        let k = g.floor();
        shifts.push(k);
        y = g - k;
        centers.push(y);
    }
    let (mut lo, mut hi) = (centers[n] - eps, centers[n] + eps);
    let mut shrunk = false;
    for j in (0..n).rev() {
        let map = ctx.map_at(j0 + j as i64)?;
        let a = map.inverse_lift(lo + shifts[j], tol)?;
        let b = map.inverse_lift(hi + shifts[j], tol)?;
        lo = a.max(centers[j] - eps);
        hi = b.min(centers[j] + eps);
        if !(lo < centers[j] && centers[j] < hi) {
            // rounding pushed an endpoint across the centre
            lo = lo.min(centers[j]);
            hi = hi.max(centers[j]);
            shrunk = true;
        }
    }
    let shift = x - wrap(x);
    Ok(DynamicalBall {
        center: x,
        lo: lo + shift,
        hi: hi + shift,
        shrunk,
    })
}

/// `sup_{y ∈ B} S_n φ(y)`, sampled at nine points of the ball.
fn ball_sup_sum(ctx: &TransferContext, j0: i64, ball: &DynamicalBall, n: usize) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for k in 0..9 {
        let y = ball.lo + (ball.hi - ball.lo) * (0.5 + k as f64) / 9.0;
        best = best.max(birkhoff_sum(ctx, j0, y, n)?);
    }
    Ok(best)
}

/// A greedy cover of the circle by `B_w(x, n, ε)` and `log Σ_B e^{S_n φ(B)}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallCover {
    pub n: usize,
    pub balls: usize,
    pub log_sum: f64,
}

pub fn ball_cover(ctx: &TransferContext, j0: i64, n: usize, eps: f64) -> Result<BallCover> {
    let mut a = 0.0f64;
    let mut sums = Vec::new();
    while a < 1.0 {
        let first = dynamical_ball(ctx, j0, a, n, eps)?;
        if !(first.width() > 0.0) {
            return Err(Error::Cover(format!("degenerate dynamical ball at x = {a}")));
        }
        // move the centre right so the left end sits just below `a`
        let shifted = dynamical_ball(ctx, j0, a + 0.999 * (a - first.lo), n, eps)?;
        let ball = if shifted.lo < a && shifted.hi > first.hi {
            shifted
        } else {
            first
        };
        sums.push(ball_sup_sum(ctx, j0, &ball, n)?);
        if sums.len() > MAX_POINTS {
            return Err(Error::Cover(format!("more than {MAX_POINTS} balls needed")));
        }
        if ball.hi <= a {
            return Err(Error::Cover(format!("cover stalled at x = {a}")));
        }
        a = ball.hi;
    }
    Ok(BallCover {
        n,
        balls: sums.len(),
        log_sum: logsumexp(&sums),
    })
}

/// Dynamical-ball route at a fixed `(N, ε)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallsEstimate {
    pub n: usize,
    pub eps: f64,
    /// `(β, log Σ e^{−βN + S_Nφ(B)})` over the requested grid.
    pub table: Vec<(f64, f64)>,
    /// The `β` at which the cover sum at `N` crosses 1, bracketed on the grid and
    /// refined by bisection; `None` when the grid does not bracket it.
    pub crossing: Option<f64>,
    /// The `β` at which the cover sums at `N` and `N + 4` coincide; the
    /// `ε`-dependent prefactor cancels.
    pub estimate: f64,
    pub covers: Vec<BallCover>,
}

const BALLS_STEP: usize = 4;

pub fn pressure_balls(ctx: &TransferContext, j0: i64, eps: f64, n: usize, beta_grid: &[f64]) -> Result<BallsEstimate> {
    if n == 0 {
        return Err(invalid("N", "must be positive"));
    }
    let base = ball_cover(ctx, j0, n, eps)?;
    let finer = ball_cover(ctx, j0, n + BALLS_STEP, eps)?;
    let log_m = |beta: f64| -beta * n as f64 + base.log_sum;
    let table: Vec<(f64, f64)> = beta_grid.iter().map(|b| (*b, log_m(*b))).collect();
    let crossing = table.windows(2).find(|w| w[0].1 >= 0.0 && w[1].1 < 0.0).map(|w| {
        let (mut lo, mut hi) = (w[0].0, w[1].0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if log_m(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    });
    Ok(BallsEstimate {
        n,
        eps,
        table,
        crossing,
        estimate: (finer.log_sum - base.log_sum) / BALLS_STEP as f64,
        covers: vec![base, finer],
    })
}
