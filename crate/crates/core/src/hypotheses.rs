//! Executable checks of the standing hypotheses (I)–(VI), topological
//! exactness times, hyperbolic times and the related contraction radius.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fiber::{circle_dist, ExpansionProfile, FiberFamily, FiberMap};
use crate::grid::{holder_seminorm, ConeParams, GridFunction, CIRCLE_DIAMETER};
use crate::transfer::TransferContext;

/// Default exponent in condition (VI).
pub const DEFAULT_RHO: f64 = 0.9;
/// Cap on the number of iterates tried by [`exactness_time`].
pub const EXACTNESS_CAP: usize = 64;
/// Grid used to estimate Hölder constants of `e^{φ}`.
const HOLDER_GRID: usize = 4096;

/// Default `(σ_w, L_w)` for a map: `σ = 1 / max L(x)` when the map is uniformly
/// expanding (otherwise 1.2), and `L = max(1, max L(x))`.
pub fn default_sigma_l(map: &FiberMap, grid_n: usize) -> Result<(f64, f64)> {
    let radius = 2.0 / grid_n as f64;
    let max_l = (0..grid_n)
        .map(|i| map.expansion_constant(i as f64 / grid_n as f64, radius))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let sigma = if max_l < 1.0 { 1.0 / max_l } else { 1.2 };
    Ok((sigma, max_l.max(1.0)))
}

/// Per-symbol outcome of [`check_conditions`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymbolCheck {
    pub label: String,
    pub degree: usize,
    pub sigma: f64,
    pub l_bound: f64,
    pub q: usize,
    pub p: usize,
    pub gamma: f64,
    pub eps_phi: f64,
    /// `(log deg − log q) − (sup φ − inf φ + ε_φ)`.
    pub iv_margin: f64,
    /// Global Hölder constant `|e^{φ}|_α` (grid estimate).
    pub exp_phi_holder: f64,
    /// `ε_φ e^{inf φ}`, the bound the constant above must stay below.
    pub exp_phi_holder_bound: f64,
    pub condition_i: bool,
    pub condition_ii: bool,
    pub condition_iv: bool,
    pub condition_v: bool,
}

/// Every constant and pass flag of the hypothesis check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub symbols: Vec<SymbolCheck>,
    pub gamma: f64,
    pub eps_phi: f64,
    pub eps_0: f64,
    pub c: f64,
    pub rho: f64,
    pub l_tilde: f64,
    pub sigma_tilde: f64,
    /// `L̃^ρ σ̃^{−(1−ρ)}`, to be compared with `e^{−2c}`.
    pub vi_lhs: f64,
    pub vi_rhs: f64,
    pub delta_c: f64,
    pub q_hat: usize,
    pub q_bar: usize,
    pub p_hat: usize,
    /// Sampled exactness times (III): `(position, x, ε, ñ)`.
    pub exactness_samples: Vec<(i64, f64, f64, usize)>,
    pub pass_i: bool,
    pub pass_ii: bool,
    pub pass_iii: bool,
    pub pass_iv: bool,
    pub pass_v: bool,
    pub pass_vi: bool,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.pass_i && self.pass_ii && self.pass_iii && self.pass_iv && self.pass_v && self.pass_vi
    }

    /// Names of the failing conditions.
    pub fn failures(&self) -> Vec<&'static str> {
        [
            ("I", self.pass_i),
            ("II", self.pass_ii),
            ("III", self.pass_iii),
            ("IV", self.pass_iv),
            ("V", self.pass_v),
            ("VI", self.pass_vi),
        ]
        .into_iter()
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| name)
        .collect()
    }
}

/// `γ_w = e^{ε_φ}[(p σ^{−α} + q L^α (1 + (L − 1)^α)) / deg] + ε_φ L^α [1 + m (diam M)^α]`.
#[allow(clippy::too_many_arguments)]
pub fn gamma_w(p: usize, q: usize, degree: usize, sigma: f64, l: f64, alpha: f64, eps_phi: f64, m: usize) -> f64 {
    let expand =
        (p as f64 * sigma.powf(-alpha) + q as f64 * l.powf(alpha) * (1.0 + (l - 1.0).powf(alpha))) / degree as f64;
    eps_phi.exp() * expand + eps_phi * l.powf(alpha) * (1.0 + m as f64 * CIRCLE_DIAMETER.powf(alpha))
}

/// The largest admissible `c` in (VI) is `½[(1 − ρ) log σ̃ − ρ log L̃]`; the default takes half of it.
pub fn default_c(rho: f64, l_tilde: f64, sigma_tilde: f64) -> f64 {
    0.25 * ((1.0 - rho) * sigma_tilde.ln() - rho * l_tilde.ln())
}

/// Options for [`check_conditions`] beyond the family and profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub rho: f64,
    /// `None` selects [`default_c`].
    pub c: Option<f64>,
    /// Radius used for the exactness samples of (III).
    pub exactness_eps: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            rho: DEFAULT_RHO,
            c: None,
            exactness_eps: 0.1,
        }
    }
}

/// Evaluates (I)–(VI). `profiles[s]` must belong to `family.maps[s]`. Exactness
/// (III) is sampled at a handful of points with every map iterated on its own.
pub fn check_conditions(
    family: &FiberFamily,
    profiles: &[ExpansionProfile],
    cone: &ConeParams,
    opts: &CheckOptions,
) -> Result<HypothesisReport> {
    if profiles.len() != family.len() {
        return Err(invalid("profiles", "need one expansion profile per symbol"));
    }
    if !(opts.rho > 0.0 && opts.rho < 1.0) {
        return Err(invalid("rho", "must lie in (0, 1)"));
    }
    let symbols: Vec<SymbolCheck> = family
        .maps
        .par_iter()
        .zip(&family.potentials)
        .zip(profiles)
        .map(|((map, pot), prof)| {
            let alpha = cone.alpha;
            let d = map.degree();
            let eps_phi = pot.eps_phi;
            let iv_margin = ((d as f64).ln() - (prof.q as f64).ln()) - (pot.sup() - pot.inf() + eps_phi);
            let e_phi = GridFunction::from_fn(HOLDER_GRID, |x| pot.value(x).exp())?;
            let holder = holder_seminorm(&e_phi, alpha, 0.5)?;
            if !holder.is_finite() {
                return Err(Error::NonFinite(format!("Hölder constant of e^φ for `{}`", map.label)));
            }
            let bound = eps_phi * pot.inf().exp();
            let gamma = gamma_w(prof.p, prof.q, d, prof.sigma, prof.l_bound, alpha, eps_phi, cone.m);
            Ok(SymbolCheck {
                label: map.label.clone(),
                degree: d,
                sigma: prof.sigma,
                l_bound: prof.l_bound,
                q: prof.q,
                p: prof.p,
                gamma,
                eps_phi,
                iv_margin,
                exp_phi_holder: holder,
                exp_phi_holder_bound: bound,
                condition_i: prof.satisfies_condition_i(),
                condition_ii: prof.satisfies_condition_ii(),
                condition_iv: iv_margin > 0.0 && holder < bound,
                condition_v: gamma < 1.0,
            })
        })
        .collect::<Result<_>>()?;

    let gamma = symbols.iter().map(|s| s.gamma).fold(f64::NEG_INFINITY, f64::max);
    let eps_phi = symbols.iter().map(|s| s.eps_phi).fold(f64::NEG_INFINITY, f64::max);
    let slack = family
        .maps
        .iter()
        .zip(&family.potentials)
        .zip(profiles)
        .map(|((m, p), prof)| (m.degree() as f64).ln() - (prof.q as f64).ln() - (p.sup() - p.inf()))
        .fold(f64::INFINITY, f64::min);
    let eps_0 = if slack > 0.0 { 0.5 * eps_phi.min(slack) } else { 0.0 };
    let l_tilde = profiles.iter().map(|p| p.l_bound).fold(f64::NEG_INFINITY, f64::max);
    let sigma_tilde = profiles.iter().map(|p| p.sigma).fold(f64::INFINITY, f64::min);
    let c = opts.c.unwrap_or_else(|| default_c(opts.rho, l_tilde, sigma_tilde));
    let vi_lhs = l_tilde.powf(opts.rho) * sigma_tilde.powf(-(1.0 - opts.rho));
    let vi_rhs = (-2.0 * c).exp();
    let delta_c = if c > 0.0 { delta_of_c(family, c)? } else { 0.0 };

    let mut exactness_samples = Vec::new();
    let mut pass_iii = true;
    for (s, map) in family.maps.iter().enumerate() {
        for x in [0.0, 0.25, 0.5, 0.75] {
            match exactness_time_for(|_| Ok(map), x, opts.exactness_eps, EXACTNESS_CAP) {
                Ok(n) => exactness_samples.push((s as i64, x, opts.exactness_eps, n)),
                Err(Error::NotExact { .. }) => pass_iii = false,
                Err(e) => return Err(e),
            }
        }
    }

    Ok(HypothesisReport {
        gamma,
        eps_phi,
        eps_0,
        c,
        rho: opts.rho,
        l_tilde,
        sigma_tilde,
        vi_lhs,
        vi_rhs,
        delta_c,
        q_hat: profiles.iter().map(|p| p.q).max().unwrap_or(0),
        q_bar: profiles.iter().map(|p| p.q).min().unwrap_or(0),
        p_hat: profiles.iter().map(|p| p.p).max().unwrap_or(0),
        exactness_samples,
        pass_i: symbols.iter().all(|s| s.condition_i),
        pass_ii: symbols.iter().all(|s| s.condition_ii),
        pass_iii,
        pass_iv: symbols.iter().all(|s| s.condition_iv),
        pass_v: gamma < 1.0,
        pass_vi: c > 0.0 && vi_lhs < vi_rhs,
        symbols,
    })
}

fn exactness_time_for<'a>(
    map_at: impl Fn(usize) -> Result<&'a FiberMap>,
    x: f64,
    eps: f64,
    cap: usize,
) -> Result<usize> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(invalid("eps", "must lie in (0, 1/2)"));
    }
    let (mut a, mut b) = (x - eps, x + eps);
    for n in 0..=cap {
        if b - a >= 1.0 {
            return Ok(n);
        }
        if n == cap {
            break;
        }
        let map = map_at(n)?;
        a = map.lift(a);
        b = map.lift(b);
        let shift = a.floor();
        a -= shift;
        b -= shift;
    }
    Err(Error::NotExact { cap })
}

/// Smallest `ñ` with `f^ñ_{θ^j w}(B(x, ε))` covering the circle, tracked through endpoint lifts.
pub fn exactness_time(ctx: &TransferContext, j: i64, x: f64, eps: f64) -> Result<usize> {
    exactness_time_for(|n| ctx.map_at(j + n as i64), x, eps, EXACTNESS_CAP)
}

/// `s_j = −log L(f^j x)` together with the detected `c`-hyperbolic times.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperbolicTimeRecord {
    pub c: f64,
    pub log_expansions: Vec<f64>,
    pub times: Vec<usize>,
}

/// Is `n` hyperbolic, checked suffix by suffix: `Σ_{j=n−k}^{n−1} s_j ≥ c k` for `1 ≤ k ≤ n`.
fn hyperbolic_by_suffixes(s: &[f64], c: f64, n: usize) -> bool {
    let mut sum = 0.0;
    for k in 1..=n {
        sum += s[n - k];
        if sum < c * k as f64 {
            return false;
        }
    }
    true
}

/// All `c`-hyperbolic times `n ∈ [1, len]`. With `T_n = Σ_{j<n}(s_j − c)`, `n`
/// is hyperbolic iff `T_n ≥ max_{i<n} T_i`; near-ties fall back to the
/// suffix-by-suffix check so rounding cannot change the verdict.
pub fn hyperbolic_times(s: &[f64], c: f64) -> Result<HyperbolicTimeRecord> {
    if !(c > 0.0) {
        return Err(invalid("c", "must be positive"));
    }
    let mut times = Vec::new();
    let mut t = 0.0f64;
    let mut running_max = 0.0f64;
    let mut scale = 0.0f64;
    for n in 1..=s.len() {
        t += s[n - 1] - c;
        scale += s[n - 1].abs() + c;
        let gap = t - running_max;
        let tie = 1e-12 * scale.max(1.0);
        let hyperbolic = if gap > tie {
            true
        } else if gap < -tie {
            false
        } else {
            hyperbolic_by_suffixes(s, c, n)
        };
        if hyperbolic {
            times.push(n);
        }
        running_max = running_max.max(t);
    }
    Ok(HyperbolicTimeRecord {
        c,
        log_expansions: s.to_vec(),
        times,
    })
}

/// `s_j = −log L_{θ^{j0+j} w}(f^j x)` for `j < n`, with probe radius `2/grid_n`.
pub fn log_expansions(ctx: &TransferContext, j0: i64, x: f64, n: usize) -> Result<Vec<f64>> {
    let radius = 2.0 / ctx.grid_n as f64;
    let mut y = x;
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let map = ctx.map_at(j0 + j as i64)?;
        out.push(-map.expansion_constant(y, radius)?.ln());
        y = map.eval(y);
    }
    Ok(out)
}

/// `δ = min(0.1, ½ min branch-image length)` over every map of the family.
pub fn delta_of_c(family: &FiberFamily, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(invalid("c", "must be positive"));
    }
    let mut shortest = f64::INFINITY;
    for map in &family.maps {
        let cuts = map.branch_cuts(0.0)?;
        let d = cuts.len();
        for i in 0..d {
            let a = cuts[i];
            let b = if i + 1 < d { cuts[i + 1] } else { cuts[0] + 1.0 };
            shortest = shortest.min(map.lift(b) - map.lift(a));
        }
    }
    if !(shortest > 1.0 / HOLDER_GRID as f64) {
        return Err(Error::Cover(format!("degenerate branch image of length {shortest}")));
    }
    Ok((0.5 * shortest).min(0.1))
}

/// Fraction of `j ∈ [0, n)` with `f^j x` in the bad region of the fiber at `j0 + j`.
pub fn visit_frequency(ctx: &TransferContext, profiles: &[ExpansionProfile], j0: i64, x: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    let mut y = x;
    let mut visits = 0usize;
    for j in 0..n {
        let s = ctx.orbit.symbol_at(j0 + j as i64)?;
        if profiles[s].in_bad_region(y) {
            visits += 1;
        }
        y = ctx.family.maps[s].eval(y);
    }
    Ok(visits as f64 / n as f64)
}

/// Worst ratio `d(f^{n−k} z, f^{n−k} x) / (e^{−ck/2} d(f^n z, f^n x))` over
/// `1 ≤ k ≤ n` and the supplied offsets `z = x + t`. Values `≤ 1` confirm the
/// backward contraction at the hyperbolic time `n`.
pub fn contraction_at_hyperbolic_time(
    ctx: &TransferContext,
    j0: i64,
    x: f64,
    n: usize,
    c: f64,
    offsets: &[f64],
) -> Result<f64> {
    let orbit = |start: f64| -> Result<Vec<f64>> {
        let mut pts = vec![start];
        let mut y = start;
        for j in 0..n {
            y = ctx.map_at(j0 + j as i64)?.eval(y);
            pts.push(y);
        }
        Ok(pts)
    };
    let xs = orbit(x)?;
    let mut worst = 0.0f64;
    for t in offsets {
        let zs = orbit(x + t)?;
        let end = circle_dist(zs[n], xs[n]);
        if end == 0.0 {
            continue;
        }
        for k in 1..=n {
            let d = circle_dist(zs[n - k], xs[n - k]);
            worst = worst.max(d / ((-c * k as f64 / 2.0).exp() * end));
        }
    }
    Ok(worst)
}
