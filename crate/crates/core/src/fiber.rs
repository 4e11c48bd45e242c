//! Fiber maps as strictly increasing lifts of degree-`d` circle covers, fiber
//! potentials, and the expansion profile `(L_w(x), σ_w, L_w, 𝒜_w, q_w, p_w)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Spacing of the probe sub-grid used by [`FiberMap::expansion_constant`].
/// Fixed so that larger probe windows always contain smaller ones.
pub const PROBE_STEP: f64 = 1.0 / 131_072.0;

/// Shifts a lifted value to the circle `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Arc-length distance on `ℝ/ℤ`.
#[inline]
pub fn circle_dist(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Closed-form lift families plus tabulated lifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LiftKind {
    /// `G(x) = d x`
    Linear { degree: usize },
    /// `G(x) = d x + a sin(2πx)/(2π)`
    Sine { degree: usize, amplitude: f64 },
    /// Degree-2 intermittent map: `x + 2^β x^{1+β}` on `[0, 1/2)`, `2x` on `[1/2, 1)`.
    Manneville { beta: f64 },
    /// Piecewise-linear `G` and `G'` through the rows of a table covering `[0, 1]`.
    Tabulated {
        degree: usize,
        xs: Vec<f64>,
        lift: Vec<f64>,
        derivative: Vec<f64>,
    },
}

/// A degree-`d` orientation-preserving circle cover given by its lift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberMap {
    pub label: String,
    kind: LiftKind,
    degree: usize,
    lift_at_zero: f64,
}

impl FiberMap {
    pub fn new(kind: LiftKind, label: impl Into<String>) -> Result<Self> {
        let degree = match &kind {
            LiftKind::Linear { degree } => *degree,
            LiftKind::Sine { degree, amplitude } => {
                if !amplitude.is_finite() || amplitude.abs() >= *degree as f64 {
                    return Err(invalid("amplitude", "sine lift needs |a| < degree"));
                }
                *degree
            }
            LiftKind::Manneville { beta } => {
                if !(*beta > 0.0 && *beta < 1.0) {
                    return Err(invalid("beta", "must lie in (0, 1)"));
                }
                2
            }
            LiftKind::Tabulated {
                degree,
                xs,
                lift,
                derivative,
            } => {
                if xs.len() < 2 || xs.len() != lift.len() || xs.len() != derivative.len() {
                    return Err(invalid("table", "need ≥ 2 rows of equal length"));
                }
                if xs[0] != 0.0 || xs[xs.len() - 1] != 1.0 {
                    return Err(invalid("table", "x column must start at 0 and end at 1"));
                }
                if xs.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("table", "x column must be strictly increasing"));
                }
                *degree
            }
        };
        if degree < 2 {
            return Err(invalid("degree", "must be at least 2"));
        }
        let mut map = Self {
            label: label.into(),
            kind,
            degree,
            lift_at_zero: 0.0,
        };
        map.lift_at_zero = map.lift_unit(0.0);
        map.validate()?;
        Ok(map)
    }

    pub fn linear(degree: usize) -> Result<Self> {
        Self::new(LiftKind::Linear { degree }, format!("linear {degree}"))
    }

    pub fn sine(degree: usize, amplitude: f64) -> Result<Self> {
        Self::new(
            LiftKind::Sine { degree, amplitude },
            format!("sine {degree} {amplitude}"),
        )
    }

    pub fn manneville(beta: f64) -> Result<Self> {
        Self::new(LiftKind::Manneville { beta }, format!("manneville {beta}"))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn kind(&self) -> &LiftKind {
        &self.kind
    }

    fn validate(&self) -> Result<()> {
        let d = self.degree as f64;
        let span = self.lift_unit_closed(1.0) - self.lift_at_zero;
        if (span - d).abs() > 1e-10 {
            return Err(invalid("lift", format!("G(1) - G(0) = {span}, expected degree {d}")));
        }
        let n = 1 << 14;
        let mut prev = self.lift_at_zero;
        for i in 1..=n {
            let x = i as f64 / n as f64;
            let g = self.lift_unit_closed(x);
            if g <= prev {
                return Err(Error::NonMonotoneLift {
                    label: self.label.clone(),
                    x,
                });
            }
            prev = g;
            let dg = self.derivative(x);
            if !(dg > 0.0) {
                return Err(Error::NonpositiveDerivative {
                    label: self.label.clone(),
                    x,
                    value: dg,
                });
            }
        }
        Ok(())
    }

    /// `G` on `[0, 1)`.
    fn lift_unit(&self, r: f64) -> f64 {
        match &self.kind {
            LiftKind::Linear { degree } => *degree as f64 * r,
            LiftKind::Sine { degree, amplitude } => *degree as f64 * r + amplitude * (TAU * r).sin() / TAU,
            LiftKind::Manneville { beta } => {
                if r < 0.5 {
                    r + 2f64.powf(*beta) * r.powf(1.0 + beta)
                } else {
                    2.0 * r
                }
            }
            LiftKind::Tabulated { xs, lift, .. } => piecewise_linear(xs, lift, r),
        }
    }

    /// `G` on `[0, 1]`, with `G(1)` taken from the table or formula rather than periodicity.
    fn lift_unit_closed(&self, r: f64) -> f64 {
        if r >= 1.0 {
            match &self.kind {
                LiftKind::Tabulated { lift, .. } => lift[lift.len() - 1],
                _ => self.lift_at_zero + self.degree as f64,
            }
        } else {
            self.lift_unit(r)
        }
    }

    /// The lift `G: ℝ → ℝ`, `G(x + 1) = G(x) + d`.
    pub fn lift(&self, x: f64) -> f64 {
        let k = x.floor();
        let r = x - k;
        if r >= 1.0 {
            return self.lift_at_zero + self.degree as f64 * (k + 1.0);
        }
        self.lift_unit(r) + self.degree as f64 * k
    }

    /// `G'(x)`, periodic.
    pub fn derivative(&self, x: f64) -> f64 {
        let r = wrap(x);
        match &self.kind {
            LiftKind::Linear { degree } => *degree as f64,
            LiftKind::Sine { degree, amplitude } => *degree as f64 + amplitude * (TAU * r).cos(),
            LiftKind::Manneville { beta } => {
                if r < 0.5 {
                    1.0 + (1.0 + beta) * 2f64.powf(*beta) * r.powf(*beta)
                } else {
                    2.0
                }
            }
            LiftKind::Tabulated { xs, derivative, .. } => piecewise_linear(xs, derivative, r),
        }
    }

    /// `f(x) = G(x) mod 1`.
    pub fn eval(&self, x: f64) -> f64 {
        wrap(self.lift(x))
    }

    /// Solves `G(y) = t` for real `t`; `G` is a homeomorphism of `ℝ`.
    pub fn inverse_lift(&self, t: f64, tol: f64) -> Result<f64> {
        let d = self.degree as f64;
        let k = ((t - self.lift_at_zero) / d).floor();
        let r = t - k * d;
        let y = self.inverse_unit(r, tol, 0)?;
        Ok(y + k)
    }

    /// Solves `G(y) = r` for `r ∈ [G(0), G(0) + d)` with `y ∈ [0, 1]`.
    fn inverse_unit(&self, r: f64, tol: f64, branch: usize) -> Result<f64> {
        let d = self.degree as f64;
        match &self.kind {
            LiftKind::Linear { .. } => return Ok(r / d),
            LiftKind::Manneville { .. } if r >= 1.0 => return Ok(r / 2.0),
            LiftKind::Tabulated { xs, lift, .. } => return Ok(piecewise_linear_inverse(xs, lift, r)),
            _ => {}
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        if let LiftKind::Manneville { .. } = self.kind {
            hi = 0.5;
        }
        let g_lo = self.lift_unit(lo) - r;
        let g_hi = self.lift_unit_closed(hi) - r;
        if g_lo > tol || g_hi < -tol {
            return Err(Error::NonMonotoneLift {
                label: self.label.clone(),
                x: r,
            });
        }
        let mut y = ((r - self.lift_at_zero) / d).clamp(lo, hi);
        for _ in 0..200 {
            let g = self.lift_unit_closed(y) - r;
            if g == 0.0 {
                return Ok(y);
            }
            if g < 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            if hi - lo <= 2.0 * f64::EPSILON {
                break;
            }
            let slope = self.derivative(y);
            let newton = y - g / slope;
            y = if newton > lo && newton < hi && slope > 0.0 {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (hi - lo) < 1e-17 {
                break;
            }
        }
        let residual = (self.lift_unit_closed(y) - r).abs();
        if residual > tol.max(8.0 * f64::EPSILON * r.abs().max(1.0)) {
            return Err(Error::PreimageNonConvergence {
                label: self.label.clone(),
                branch,
                target: r,
            });
        }
        Ok(y)
    }

    /// The `d` preimages of `x`, sorted in `[0, 1)`.
    pub fn preimages(&self, x: f64, tol: f64) -> Result<Vec<f64>> {
        if !(tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        let x = wrap(x);
        let first = (self.lift_at_zero - x).ceil();
        let mut out = Vec::with_capacity(self.degree);
        for k in 0..self.degree {
            let target = x + first + k as f64;
            let y = self.inverse_unit(target, tol, k)?;
            out.push(if y >= 1.0 { y - 1.0 } else { y });
        }
        out.sort_by(|a, b| a.total_cmp(b));
        for (k, y) in out.iter().enumerate() {
            if circle_dist(self.eval(*y), x) > tol {
                return Err(Error::PreimageNonConvergence {
                    label: self.label.clone(),
                    branch: k,
                    target: x,
                });
            }
        }
        Ok(out)
    }

    /// Probed local inverse-Lipschitz constant: the max of `1/G'` on the
    /// sub-grid `x + k·PROBE_STEP`, `|k·PROBE_STEP| ≤ probe_radius`.
    pub fn expansion_constant(&self, x: f64, probe_radius: f64) -> Result<f64> {
        if !(probe_radius >= 0.0) || probe_radius >= 0.5 {
            return Err(invalid("probe_radius", "must lie in [0, 1/2)"));
        }
        let steps = (probe_radius / PROBE_STEP + 1e-9).floor() as i64;
        let mut worst = 0.0f64;
        for k in -steps..=steps {
            let p = x + k as f64 * PROBE_STEP;
            let dg = self.derivative(p);
            if !(dg > 0.0) {
                return Err(Error::NonpositiveDerivative {
                    label: self.label.clone(),
                    x: wrap(p),
                    value: dg,
                });
            }
            worst = worst.max(1.0 / dg);
        }
        Ok(worst)
    }

    /// Branch cut points `G^{-1}(offset + m) mod 1`, `m = 0..d`, sorted.
    pub fn branch_cuts(&self, offset: f64) -> Result<Vec<f64>> {
        let mut cuts = (0..self.degree)
            .map(|m| self.inverse_lift(offset + m as f64, 1e-13).map(wrap))
            .collect::<Result<Vec<_>>>()?;
        cuts.sort_by(|a, b| a.total_cmp(b));
        Ok(cuts)
    }
}

fn piecewise_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = match xs.binary_search_by(|p| p.total_cmp(&x)) {
        Ok(i) => return ys[i],
        Err(i) => i.clamp(1, xs.len() - 1),
    };
    let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    ys[i - 1] + t * (ys[i] - ys[i - 1])
}

fn piecewise_linear_inverse(xs: &[f64], ys: &[f64], y: f64) -> f64 {
    let i = match ys.binary_search_by(|p| p.total_cmp(&y)) {
        Ok(i) => return xs[i],
        Err(i) => i.clamp(1, ys.len() - 1),
    };
    let t = (y - ys[i - 1]) / (ys[i] - ys[i - 1]);
    xs[i - 1] + t * (xs[i] - xs[i - 1])
}

/// Closed forms for fiber potentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    Constant {
        value: f64,
    },
    /// `offset + Σ_k cos[k]·cos(2π(k+1)x) + sin[k]·sin(2π(k+1)x)`
    Fourier {
        offset: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
}

impl PotentialKind {
    pub fn cosine(amplitude: f64, offset: f64) -> Self {
        PotentialKind::Fourier {
            offset,
            cos: vec![amplitude],
            sin: vec![],
        }
    }

    fn eval(&self, x: f64) -> f64 {
        match self {
            PotentialKind::Constant { value } => *value,
            PotentialKind::Fourier { offset, cos, sin } => {
                let mut v = *offset;
                for (k, c) in cos.iter().enumerate() {
                    v += c * (TAU * (k + 1) as f64 * x).cos();
                }
                for (k, s) in sin.iter().enumerate() {
                    v += s * (TAU * (k + 1) as f64 * x).sin();
                }
                v
            }
        }
    }

    fn derivative_bound(&self) -> f64 {
        match self {
            PotentialKind::Constant { .. } => 0.0,
            PotentialKind::Fourier { cos, sin, .. } => cos
                .iter()
                .chain(sin.iter())
                .enumerate()
                .map(|(i, c)| {
                    let k = if i < cos.len() { i + 1 } else { i - cos.len() + 1 };
                    TAU * k as f64 * c.abs()
                })
                .sum(),
        }
    }

    /// Returns `(inf, sup)` bounds that enclose the true range.
    fn range(&self) -> (f64, f64) {
        match self {
            PotentialKind::Constant { value } => (*value, *value),
            PotentialKind::Fourier { offset, cos, sin } if sin.is_empty() && cos.len() <= 1 => {
                let a = cos.first().copied().unwrap_or(0.0).abs();
                (offset - a, offset + a)
            }
            _ => {
                let n = 1 << 16;
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for i in 0..n {
                    let v = self.eval(i as f64 / n as f64);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                // the extremum lies within half a cell of a sample
                let slack = self.derivative_bound() * 0.5 / n as f64;
                (lo - slack, hi + slack)
            }
        }
    }
}

/// A fiber potential `φ_w` with its Hölder exponent and the `ε_φ` of the small-variation condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialFiber {
    kind: PotentialKind,
    pub holder_exponent: f64,
    pub eps_phi: f64,
    inf: f64,
    sup: f64,
}

impl PotentialFiber {
    pub fn new(kind: PotentialKind, holder_exponent: f64, eps_phi: f64) -> Result<Self> {
        if !(holder_exponent > 0.0 && holder_exponent <= 1.0) {
            return Err(invalid("holder_exponent", "must lie in (0, 1]"));
        }
        if !(eps_phi > 0.0) {
            return Err(invalid("eps_phi", "must be positive"));
        }
        let (inf, sup) = kind.range();
        if !inf.is_finite() || !sup.is_finite() {
            return Err(Error::NonFinite("potential range".into()));
        }
        Ok(Self {
            kind,
            holder_exponent,
            eps_phi,
            inf,
            sup,
        })
    }

    pub fn zero() -> Self {
        Self::new(PotentialKind::Constant { value: 0.0 }, 1.0, 0.01).expect("valid")
    }

    pub fn constant(value: f64) -> Self {
        Self::new(PotentialKind::Constant { value }, 1.0, 0.01).expect("valid")
    }

    pub fn cosine(amplitude: f64) -> Self {
        Self::new(PotentialKind::cosine(amplitude, 0.0), 1.0, 0.01).expect("valid")
    }

    pub fn with_eps_phi(mut self, eps_phi: f64) -> Self {
        self.eps_phi = eps_phi;
        self
    }

    pub fn with_holder_exponent(mut self, alpha: f64) -> Self {
        self.holder_exponent = alpha;
        self
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.kind.eval(x)
    }

    pub fn inf(&self) -> f64 {
        self.inf
    }

    pub fn sup(&self) -> f64 {
        self.sup
    }

    /// Values at the nodes `i/n`; identical to [`Self::value`] there.
    pub fn grid_cache(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.value(i as f64 / n as f64)).collect()
    }

    /// The same potential multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        let kind = match &self.kind {
            PotentialKind::Constant { value } => PotentialKind::Constant { value: t * value },
            PotentialKind::Fourier { offset, cos, sin } => PotentialKind::Fourier {
                offset: t * offset,
                cos: cos.iter().map(|c| t * c).collect(),
                sin: sin.iter().map(|s| t * s).collect(),
            },
        };
        Self::new(kind, self.holder_exponent, self.eps_phi)
    }
}

/// Per-symbol maps and potentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberFamily {
    pub maps: Vec<FiberMap>,
    pub potentials: Vec<PotentialFiber>,
}

impl FiberFamily {
    pub fn new(maps: Vec<FiberMap>, potentials: Vec<PotentialFiber>) -> Result<Self> {
        if maps.is_empty() || maps.len() != potentials.len() {
            return Err(invalid("family", "need one map and one potential per symbol"));
        }
        Ok(Self { maps, potentials })
    }

    /// One map with one potential: a deterministic fiber.
    pub fn single(map: FiberMap, potential: PotentialFiber) -> Self {
        Self {
            maps: vec![map],
            potentials: vec![potential],
        }
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// `deg(F) = max_w deg(f_w)`.
    pub fn degree(&self) -> usize {
        self.maps.iter().map(FiberMap::degree).max().unwrap_or(0)
    }
}

/// A closed circular arc `[start, start + length]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub start: f64,
    pub length: f64,
}

impl Arc {
    pub fn contains(&self, x: f64) -> bool {
        self.length >= 1.0 || (x - self.start).rem_euclid(1.0) <= self.length
    }

    /// True when the two arcs share a sub-arc of positive length.
    pub fn overlaps(&self, other: &Arc) -> bool {
        if self.length <= 0.0 || other.length <= 0.0 {
            return false;
        }
        if self.length >= 1.0 || other.length >= 1.0 {
            return true;
        }
        (other.start - self.start).rem_euclid(1.0) < self.length
            || (self.start - other.start).rem_euclid(1.0) < other.length
    }
}

/// Expansion data of one fiber map: conditions (I) and (II).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionProfile {
    pub grid_n: usize,
    pub probe_radius: f64,
    /// `L_w(x)` at the nodes `i / grid_n`.
    pub l_of_x: Vec<f64>,
    pub sigma: f64,
    pub l_bound: f64,
    pub bad_region: Vec<Arc>,
    pub q: usize,
    pub p: usize,
    pub degree: usize,
    /// Target offset `t` whose branches `G^{-1}([t+m, t+m+1))` realise `q`.
    pub cut_offset: f64,
    /// `L_bound − max_{𝒜} L_w(x)`; negative means (I) fails on the bad region.
    pub condition_i_margin: f64,
}

/// Relative slack absorbing rounding when `L_w(x) σ_w` sits exactly on 1.
const STRICT_SLACK: f64 = 1e-12;
const CUT_OFFSETS: usize = 64;

impl ExpansionProfile {
    /// Always returns a profile; a `q = d` outcome is visible through
    /// [`Self::satisfies_condition_ii`].
    pub fn build(f: &FiberMap, sigma: f64, l_bound: f64, grid_n: usize) -> Result<Self> {
        if !(sigma > 1.0) {
            return Err(invalid("sigma", "must exceed 1"));
        }
        if !(l_bound >= 1.0) {
            return Err(invalid("l_bound", "must be at least 1"));
        }
        if grid_n < 8 {
            return Err(invalid("grid_n", "must be at least 8"));
        }
        let probe_radius = 2.0 / grid_n as f64;
        let l_of_x = (0..grid_n)
            .map(|i| f.expansion_constant(i as f64 / grid_n as f64, probe_radius))
            .collect::<Result<Vec<_>>>()?;
        let raw: Vec<bool> = l_of_x.iter().map(|l| l * sigma >= 1.0 + STRICT_SLACK).collect();
        // closure padding by one cell on each side
        let bad: Vec<bool> = (0..grid_n)
            .map(|i| raw[i] || raw[(i + 1) % grid_n] || raw[(i + grid_n - 1) % grid_n])
            .collect();
        let bad_region = runs_to_arcs(&bad);
        let max_bad_l = (0..grid_n)
            .filter(|&i| bad[i])
            .map(|i| l_of_x[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let condition_i_margin = if bad_region.is_empty() {
            l_bound - l_of_x.iter().cloned().fold(0.0, f64::max).min(l_bound)
        } else {
            l_bound - max_bad_l
        };
        let d = f.degree();
        let (q, cut_offset) = if bad_region.is_empty() {
            (1, 0.0)
        } else {
            let mut best = (usize::MAX, 0.0);
            for k in 0..CUT_OFFSETS {
                let offset = k as f64 / CUT_OFFSETS as f64;
                let cuts = f.branch_cuts(offset)?;
                let count = branch_arcs(&cuts)
                    .iter()
                    .filter(|arc| bad_region.iter().any(|b| b.overlaps(arc)))
                    .count();
                if count < best.0 {
                    best = (count, offset);
                }
            }
            best
        };
        Ok(Self {
            grid_n,
            probe_radius,
            l_of_x,
            sigma,
            l_bound,
            bad_region,
            q,
            p: d.saturating_sub(q),
            degree: d,
            cut_offset,
            condition_i_margin,
        })
    }

    /// `q_w < deg(f_w)`.
    pub fn satisfies_condition_ii(&self) -> bool {
        self.q < self.degree
    }

    /// `L_w(x) ≤ L_w` on `𝒜_w` (the bound off `𝒜_w` holds by construction).
    pub fn satisfies_condition_i(&self) -> bool {
        self.condition_i_margin >= -1e-12
    }

    pub fn in_bad_region(&self, x: f64) -> bool {
        self.bad_region.iter().any(|a| a.contains(wrap(x)))
    }

    /// Largest sampled `L_w(x)`.
    pub fn max_l(&self) -> f64 {
        self.l_of_x.iter().cloned().fold(0.0, f64::max)
    }
}

/// Builds the profile and rejects `q_w = deg(f_w)`.
pub fn build_expansion_profile(f: &FiberMap, sigma: f64, l_bound: f64, grid_n: usize) -> Result<ExpansionProfile> {
    let profile = ExpansionProfile::build(f, sigma, l_bound, grid_n)?;
    if !profile.satisfies_condition_ii() {
        return Err(Error::Hypothesis(format!(
            "condition (II): bad region of `{}` meets all {} branches",
            f.label, profile.degree
        )));
    }
    Ok(profile)
}

fn branch_arcs(cuts: &[f64]) -> Vec<Arc> {
    let n = cuts.len();
    (0..n)
        .map(|i| {
            let start = cuts[i];
            let end = if i + 1 < n { cuts[i + 1] } else { cuts[0] + 1.0 };
            Arc {
                start,
                length: end - start,
            }
        })
        .collect()
}

/// Maximal runs of `true` nodes as arcs from the first to the last node of the run.
fn runs_to_arcs(flags: &[bool]) -> Vec<Arc> {
    let n = flags.len();
    if flags.iter().all(|&b| b) {
        return vec![Arc {
            start: 0.0,
            length: 1.0,
        }];
    }
    let Some(first_false) = flags.iter().position(|&b| !b) else {
        return Vec::new();
    };
    let mut arcs = Vec::new();
    let mut i = 0;
    while i < n {
        let idx = (first_false + i) % n;
        if flags[idx] {
            let start = idx;
            let mut len = 0;
            while i < n && flags[(first_false + i) % n] {
                len += 1;
                i += 1;
            }
            arcs.push(Arc {
                start: start as f64 / n as f64,
                length: (len - 1) as f64 / n as f64,
            });
        } else {
            i += 1;
        }
    }
    arcs
}
