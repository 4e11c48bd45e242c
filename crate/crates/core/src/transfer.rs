//! Fiberwise transfer operators `𝓛_w ψ(x) = Σ_{f_w(y) = x} e^{φ_w(y)} ψ(y)`,
//! reference measures `ν_w`, eigenvalues `λ_w`, densities `h_w` and the
//! invariant family `μ_w = h_w ν_w`.
//!
//! On the grid, `𝓛_w` is the sparse matrix whose row `i` holds, for each
//! preimage `y` of the node `x_i`, the weight `e^{φ_w(y)}` split between the
//! two nodes adjacent to `y` by linear-interpolation (hat) weights. Its
//! transpose is the discrete dual acting on weight vectors, so
//! `⟨𝓛 g, ρ⟩ = ⟨g, 𝓛*ρ⟩` holds to rounding.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::BaseOrbit;
use crate::error::{invalid, Error, Result};
use crate::fiber::{FiberFamily, FiberMap, PotentialFiber};
use crate::grid::{cone_member, theta_metric, ConeParams, GridFunction};

/// Default preimage tolerance.
pub const PREIMAGE_TOL: f64 = 1e-12;
/// Largest preimage tree expanded by [`reference_measure`]: `2^24` leaves.
pub const TREE_LEAF_BUDGET: f64 = 16_777_216.0;

/// Hat weights of `y ∈ [0, 1)` on an `n`-node circle grid: `(i, 1 − t), (i + 1, t)`.
#[inline]
pub fn hat_weights(y: f64, n: usize) -> (usize, usize, f64) {
    let t = crate::fiber::wrap(y) * n as f64;
    let i = (t.floor() as usize).min(n - 1);
    (i, (i + 1) % n, t - i as f64)
}

/// Weight vector of the point mass at `x`, spread by hat weights.
pub fn point_mass(x: f64, n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    let (i, k, t) = hat_weights(x, n);
    w[i] += 1.0 - t;
    w[k] += t;
    w
}

/// The grid matrix of one fiber's transfer operator.
#[derive(Debug, Clone)]
pub struct SymbolOperator {
    n: usize,
    degree: usize,
    /// `preimages[i * d + b]`: the `b`-th preimage of node `i`.
    preimages: Vec<f64>,
    /// `e^{φ(y)}` at those preimages.
    exp_phi: Vec<f64>,
    /// Row-major entries, `2d` per row.
    cols: Vec<u32>,
    vals: Vec<f64>,
    /// Transposed storage for the dual.
    t_ptr: Vec<usize>,
    t_rows: Vec<u32>,
    t_vals: Vec<f64>,
    /// `𝓛 1` at the nodes.
    ones: Vec<f64>,
}

impl SymbolOperator {
    pub fn build(map: &FiberMap, potential: &PotentialFiber, n: usize, tol: f64) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(invalid("grid_n", format!("{n} is not a power of two ≥ 2")));
        }
        let d = map.degree();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| map.preimages(i as f64 / n as f64, tol))
            .collect::<Result<_>>()?;
        let preimages: Vec<f64> = rows.into_iter().flatten().collect();
        let exp_phi: Vec<f64> = preimages.iter().map(|y| potential.value(*y).exp()).collect();
        let mut cols = Vec::with_capacity(2 * d * n);
        let mut vals = Vec::with_capacity(2 * d * n);
        for (y, e) in preimages.iter().zip(&exp_phi) {
            let (a, b, t) = hat_weights(*y, n);
            cols.push(a as u32);
            vals.push(e * (1.0 - t));
            cols.push(b as u32);
            vals.push(e * t);
        }
        let ones = exp_phi.chunks(d).map(|c| c.iter().sum()).collect();
        let per_row = 2 * d;
        let mut t_ptr = vec![0usize; n + 1];
        for c in &cols {
            t_ptr[*c as usize + 1] += 1;
        }
        for i in 0..n {
            t_ptr[i + 1] += t_ptr[i];
        }
        let mut fill = t_ptr.clone();
        let mut t_rows = vec![0u32; cols.len()];
        let mut t_vals = vec![0.0; cols.len()];
        for (e, (c, v)) in cols.iter().zip(&vals).enumerate() {
            let slot = &mut fill[*c as usize];
            t_rows[*slot] = (e / per_row) as u32;
            t_vals[*slot] = *v;
            *slot += 1;
        }
        Ok(Self {
            n,
            degree: d,
            preimages,
            exp_phi,
            cols,
            vals,
            t_ptr,
            t_rows,
            t_vals,
            ones,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Preimages of node `i`.
    pub fn preimages_of(&self, i: usize) -> &[f64] {
        &self.preimages[i * self.degree..(i + 1) * self.degree]
    }

    /// `e^{φ}` at the preimages of node `i`.
    pub fn weights_of(&self, i: usize) -> &[f64] {
        &self.exp_phi[i * self.degree..(i + 1) * self.degree]
    }

    /// `𝓛 1` at the nodes.
    pub fn ones(&self) -> &[f64] {
        &self.ones
    }

    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        let per_row = 2 * self.degree;
        self.cols
            .par_chunks(per_row)
            .zip(self.vals.par_chunks(per_row))
            .map(|(c, v)| c.iter().zip(v).map(|(c, v)| v * g[*c as usize]).sum())
            .collect()
    }

    /// The dual `𝓛*ρ` on weight vectors.
    pub fn adjoint(&self, rho: &[f64]) -> Vec<f64> {
        (0..self.n)
            .into_par_iter()
            .map(|c| {
                (self.t_ptr[c]..self.t_ptr[c + 1])
                    .map(|e| self.t_vals[e] * rho[self.t_rows[e] as usize])
                    .sum()
            })
            .collect()
    }
}

/// `𝓛_w` for every symbol of the family on one grid, bound to a base orbit.
#[derive(Debug, Clone)]
pub struct TransferContext {
    pub family: FiberFamily,
    pub orbit: BaseOrbit,
    pub grid_n: usize,
    pub preimage_tol: f64,
    ops: Vec<SymbolOperator>,
}

impl TransferContext {
    pub fn new(family: FiberFamily, orbit: BaseOrbit, grid_n: usize, preimage_tol: f64) -> Result<Self> {
        if let Some(s) = orbit.symbols().iter().find(|&&s| s >= family.len()) {
            return Err(invalid("orbit", format!("symbol {s} has no fiber map")));
        }
        if !(preimage_tol > 0.0) {
            return Err(invalid("preimage_tol", "must be positive"));
        }
        let ops = family
            .maps
            .iter()
            .zip(&family.potentials)
            .map(|(m, p)| SymbolOperator::build(m, p, grid_n, preimage_tol))
            .collect::<Result<_>>()?;
        Ok(Self {
            family,
            orbit,
            grid_n,
            preimage_tol,
            ops,
        })
    }

    /// A deterministic fiber: one map iterated over a constant orbit.
    pub fn deterministic(
        map: FiberMap,
        potential: PotentialFiber,
        past: usize,
        future: usize,
        grid_n: usize,
    ) -> Result<Self> {
        Self::new(
            FiberFamily::single(map, potential),
            BaseOrbit::constant(0, past, future),
            grid_n,
            PREIMAGE_TOL,
        )
    }

    /// Same family and orbit on another grid.
    pub fn regrid(&self, grid_n: usize) -> Result<Self> {
        Self::new(self.family.clone(), self.orbit.clone(), grid_n, self.preimage_tol)
    }

    pub fn symbol_op(&self, symbol: usize) -> &SymbolOperator {
        &self.ops[symbol]
    }

    pub fn op(&self, j: i64) -> Result<&SymbolOperator> {
        Ok(&self.ops[self.orbit.symbol_at(j)?])
    }

    pub fn map_at(&self, j: i64) -> Result<&FiberMap> {
        Ok(&self.family.maps[self.orbit.symbol_at(j)?])
    }

    pub fn potential_at(&self, j: i64) -> Result<&PotentialFiber> {
        Ok(&self.family.potentials[self.orbit.symbol_at(j)?])
    }

    /// `[deg e^{inf φ}, deg e^{sup φ}]` at position `j`.
    pub fn eigenvalue_bounds(&self, j: i64) -> Result<(f64, f64)> {
        let d = self.map_at(j)?.degree() as f64;
        let p = self.potential_at(j)?;
        Ok((d * p.inf().exp(), d * p.sup().exp()))
    }
}

/// `𝓛_{θ^j w} g` on the grid.
pub fn apply_transfer(ctx: &TransferContext, j: i64, g: &GridFunction) -> Result<GridFunction> {
    check_grid(ctx, g.n())?;
    GridFunction::new(ctx.op(j)?.apply(g.values()))
}

/// `𝓛*_{θ^j w} ρ` on weight vectors.
pub fn apply_adjoint(ctx: &TransferContext, j: i64, rho: &[f64]) -> Result<Vec<f64>> {
    check_grid(ctx, rho.len())?;
    Ok(ctx.op(j)?.adjoint(rho))
}

fn check_grid(ctx: &TransferContext, n: usize) -> Result<()> {
    if n != ctx.grid_n {
        return Err(invalid(
            "grid",
            format!("size {n} differs from context grid {}", ctx.grid_n),
        ));
    }
    Ok(())
}

/// `λ_j = Σ_i ν_{j+1}[i] (𝓛_j 1)(x_i)`.
pub fn lambda_at(ctx: &TransferContext, j: i64, nu_next: &[f64]) -> Result<f64> {
    check_grid(ctx, nu_next.len())?;
    Ok(ctx.op(j)?.ones().iter().zip(nu_next).map(|(a, b)| a * b).sum())
}

// ---------------------------------------------------------------------------
// Preimage trees

/// Leaves of `f^{depth}` over an anchor, visited subtree by subtree.
struct TreeSpec<'a> {
    ctx: &'a TransferContext,
    /// Position of the leaves.
    j: i64,
    depth: usize,
}

impl TreeSpec<'_> {
    fn check(&self) -> Result<()> {
        let top = self.j + self.depth as i64;
        if !self.ctx.orbit.contains(self.j) || !self.ctx.orbit.contains(top) {
            return Err(Error::OutOfWindow {
                index: if self.ctx.orbit.contains(self.j) { top } else { self.j },
                lo: self.ctx.orbit.lo(),
                hi: self.ctx.orbit.hi(),
            });
        }
        let mut leaves = 1.0f64;
        for l in 0..self.depth {
            leaves *= self.ctx.map_at(self.j + l as i64)?.degree() as f64;
        }
        if leaves > TREE_LEAF_BUDGET {
            return Err(Error::BudgetExceeded {
                leaves,
                budget: TREE_LEAF_BUDGET,
            });
        }
        Ok(())
    }

    /// Per-level shift `sup φ` removed from the weights to avoid overflow.
    fn level_shift(&self, pos: i64) -> Result<f64> {
        Ok(self.ctx.potential_at(pos)?.sup())
    }

    /// Calls `leaf(y, weight)` for every leaf; weights are `e^{S_depth φ(y) − shift}`.
    /// Returns per-subtree accumulators in a fixed order, plus the log shift.
    fn walk<A, F>(&self, anchor: f64, init: impl Fn() -> A + Sync, leaf: F) -> Result<(Vec<A>, f64)>
    where
        A: Send,
        F: Fn(&mut A, f64, f64) + Sync,
    {
        self.check()?;
        let tol = self.ctx.preimage_tol;
        let mut shift = 0.0;
        for l in 0..self.depth {
            shift += self.level_shift(self.j + l as i64)?;
        }
        // breadth-first until there is enough parallel work
        let mut frontier = vec![(crate::fiber::wrap(anchor), 1.0f64)];
        let mut pos = self.j + self.depth as i64;
        while pos > self.j && frontier.len() < 512 {
            pos -= 1;
            frontier = self.expand(&frontier, pos, tol)?;
        }
        let bottom = pos;
        let accs = frontier
            .par_iter()
            .map(|&(x, w)| {
                let mut acc = init();
                self.dfs(bottom, x, w, &mut acc, &leaf, tol)?;
                Ok(acc)
            })
            .collect::<Result<Vec<A>>>()?;
        Ok((accs, shift))
    }

    fn expand(&self, frontier: &[(f64, f64)], pos: i64, tol: f64) -> Result<Vec<(f64, f64)>> {
        let map = self.ctx.map_at(pos)?;
        let pot = self.ctx.potential_at(pos)?;
        let s = self.level_shift(pos)?;
        let mut out = Vec::with_capacity(frontier.len() * map.degree());
        for &(x, w) in frontier {
            for y in map.preimages(x, tol)? {
                out.push((y, w * (pot.value(y) - s).exp()));
            }
        }
        Ok(out)
    }

    fn dfs<A, F>(&self, pos: i64, x: f64, w: f64, acc: &mut A, leaf: &F, tol: f64) -> Result<()>
    where
        F: Fn(&mut A, f64, f64),
    {
        if pos == self.j {
            leaf(acc, x, w);
            return Ok(());
        }
        let p = pos - 1;
        let map = self.ctx.map_at(p)?;
        let pot = self.ctx.potential_at(p)?;
        let s = self.level_shift(p)?;
        for y in map.preimages(x, tol)? {
            self.dfs(p, y, w * (pot.value(y) - s).exp(), acc, leaf, tol)?;
        }
        Ok(())
    }
}

/// `ν_{θ^j w}` as the normalized functional `g ↦ 𝓛^depth g(anchor) / 𝓛^depth 1(anchor)`,
/// materialized by spreading each leaf mass over its two neighbouring nodes with
/// hat weights (the exact dual of linear interpolation).
pub fn reference_measure(ctx: &TransferContext, j: i64, depth: usize, anchor: f64) -> Result<Vec<f64>> {
    let n = ctx.grid_n;
    let tree = TreeSpec { ctx, j, depth };
    let (accs, _) = tree.walk(
        anchor,
        || vec![0.0; n],
        |acc: &mut Vec<f64>, y, w| {
            let (a, b, t) = hat_weights(y, n);
            acc[a] += w * (1.0 - t);
            acc[b] += w * t;
        },
    )?;
    let mut weights = vec![0.0; n];
    for acc in accs {
        for (w, a) in weights.iter_mut().zip(acc) {
            *w += a;
        }
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::MassCollapse { depth });
    }
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(weights)
}

/// `log 𝓛^depth_{θ^j w} 1(anchor)`, summed exactly over the preimage tree.
pub fn log_tree_mass(ctx: &TransferContext, j: i64, depth: usize, anchor: f64) -> Result<f64> {
    let tree = TreeSpec { ctx, j, depth };
    let (accs, shift) = tree.walk(anchor, || 0.0f64, |acc: &mut f64, _, w| *acc += w)?;
    let total: f64 = accs.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::MassCollapse { depth });
    }
    Ok(total.ln() + shift)
}

/// Grid-free eigenvalue: `λ_j ≈ 𝓛^{depth+1}_{θ^j w} 1(x) / 𝓛^{depth}_{θ^{j+1} w} 1(x)`
/// with both trees hanging from the same anchor at position `j + 1 + depth`.
pub fn lambda_tree(ctx: &TransferContext, j: i64, depth: usize, anchor: f64) -> Result<f64> {
    Ok((log_tree_mass(ctx, j, depth + 1, anchor)? - log_tree_mass(ctx, j + 1, depth, anchor)?).exp())
}

// ---------------------------------------------------------------------------
// Backward (dual) and forward sweeps

type NuByPos = BTreeMap<i64, Vec<f64>>;

/// `ν_j` for `j` from `top − 1` down to `bottom`, obtained by normalized dual
/// iteration from the point mass at `anchor` placed at position `top`.
/// Returns `(ν by position, λ by position)` for the positions in `keep`
/// (`λ_j` is recorded for every `j` in `bottom..top`).
fn dual_sweep(
    ctx: &TransferContext,
    bottom: i64,
    top: i64,
    anchor: f64,
    keep: &dyn Fn(i64) -> bool,
) -> Result<(NuByPos, BTreeMap<i64, f64>)> {
    let mut nu = point_mass(anchor, ctx.grid_n);
    let mut kept = BTreeMap::new();
    let mut lambdas = BTreeMap::new();
    if keep(top) {
        kept.insert(top, nu.clone());
    }
    let mut j = top;
    while j > bottom {
        j -= 1;
        let lam = lambda_at(ctx, j, &nu)?;
        let mut next = ctx.op(j)?.adjoint(&nu);
        let total: f64 = next.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::MassCollapse {
                depth: (top - j) as usize,
            });
        }
        next.iter_mut().for_each(|w| *w /= total);
        nu = next;
        lambdas.insert(j, lam);
        if keep(j) {
            kept.insert(j, nu.clone());
        }
    }
    Ok((kept, lambdas))
}

/// The reference weights at `j` from a dual sweep of length `lead` started at `j + lead`.
pub fn reference_by_dual_sweep(ctx: &TransferContext, j: i64, lead: usize, anchor: f64) -> Result<Vec<f64>> {
    let top = j + lead as i64;
    if !ctx.orbit.contains(top) {
        return Err(Error::OutOfWindow {
            index: top,
            lo: ctx.orbit.lo(),
            hi: ctx.orbit.hi(),
        });
    }
    let (mut kept, _) = dual_sweep(ctx, j, top, anchor, &|p| p == j)?;
    Ok(kept.remove(&j).expect("position kept"))
}

/// Result of [`density_pullback`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityPullback {
    pub position: i64,
    pub h: GridFunction,
    /// `log` of the per-step mean normalizers, oldest first.
    pub log_factors: Vec<f64>,
    /// `λ_j` from the reference weights at `j + 1`.
    pub lambda: f64,
    /// `‖𝓛_j h_j / λ_j − h_{j+1}‖_∞` against an independent pullback of equal depth at `j + 1`.
    pub residual: f64,
    /// Cone margin of every iterate (when a cone was supplied).
    pub cone_margins: Vec<f64>,
}

fn pull_forward(
    ctx: &TransferContext,
    j: i64,
    past_depth: usize,
    cone: Option<&ConeParams>,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let start = j - past_depth as i64;
    if !ctx.orbit.contains(start) {
        return Err(Error::OutOfWindow {
            index: start,
            lo: ctx.orbit.lo(),
            hi: ctx.orbit.hi(),
        });
    }
    let n = ctx.grid_n;
    let mut g = vec![1.0; n];
    let mut factors = Vec::with_capacity(past_depth);
    let mut margins = Vec::new();
    for p in start..j {
        let mut next = ctx.op(p)?.apply(&g);
        let mean = next.iter().sum::<f64>() / n as f64;
        if !(mean > 0.0) || !mean.is_finite() {
            return Err(Error::NonFinite(format!("pullback iterate at position {p}")));
        }
        next.iter_mut().for_each(|v| *v /= mean);
        factors.push(mean.ln());
        if let Some(params) = cone {
            let (inside, margin) = cone_member(&GridFunction::new(next.clone())?, params)?;
            margins.push(margin);
            if !inside {
                return Err(Error::OutsideCone(format!(
                    "pullback iterate after position {p} (step {} of {past_depth}, margin {margin:e})",
                    p - start + 1
                )));
            }
        }
        g = next;
    }
    Ok((g, factors, margins))
}

fn normalize_against(g: &mut [f64], nu: &[f64]) -> Result<()> {
    let mass: f64 = g.iter().zip(nu).map(|(a, b)| a * b).sum();
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::NonFinite("density normalization".into()));
    }
    g.iter_mut().for_each(|v| *v /= mass);
    Ok(())
}

/// `h_{θ^j w} = lim 𝓛̂^n 1` along the past, normalized so `∫ h dν = 1`.
/// The reference weights come from a dual sweep started at the window end.
pub fn density_pullback(
    ctx: &TransferContext,
    j: i64,
    past_depth: usize,
    cone: Option<&ConeParams>,
) -> Result<DensityPullback> {
    let top = ctx.orbit.hi();
    if j + 1 > top {
        return Err(Error::OutOfWindow {
            index: j + 1,
            lo: ctx.orbit.lo(),
            hi: top,
        });
    }
    let (nus, lambdas) = dual_sweep(ctx, j, top, 0.0, &|p| p == j || p == j + 1)?;
    let (mut h, log_factors, cone_margins) = pull_forward(ctx, j, past_depth, cone)?;
    normalize_against(&mut h, &nus[&j])?;
    let (mut h_next, _, _) = pull_forward(ctx, j + 1, past_depth, None)?;
    normalize_against(&mut h_next, &nus[&(j + 1)])?;
    let lambda = lambdas[&j];
    let image = ctx.op(j)?.apply(&h);
    let residual = image
        .iter()
        .zip(&h_next)
        .map(|(a, b)| (a / lambda - b).abs())
        .fold(0.0, f64::max);
    Ok(DensityPullback {
        position: j,
        h: GridFunction::new(h)?,
        log_factors,
        lambda,
        residual,
        cone_margins,
    })
}

// ---------------------------------------------------------------------------
// Full equilibrium pipeline

/// Which positions keep their `h` and `ν` vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Keep {
    All,
    /// Positions `first + s·k` and the next one, for `k ≥ 0`.
    Stride(usize),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumOptions {
    /// Forward iterations before the first reported position.
    pub burn_in: usize,
    /// Dual iterations after the last reported position.
    pub lead: usize,
    pub anchor: f64,
    pub cone: ConeParams,
    pub keep: Keep,
}

impl EquilibriumOptions {
    pub fn new(cone: ConeParams) -> Self {
        Self {
            burn_in: 40,
            lead: 40,
            anchor: 0.0,
            cone,
            keep: Keep::All,
        }
    }
}

/// `λ`, `h`, `ν` along a stretch of the base orbit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumData {
    pub first: i64,
    /// `λ_{θ^j w}` for `j = first, first + 1, …`.
    pub lambda_by_pos: Vec<f64>,
    pub h_by_pos: BTreeMap<i64, GridFunction>,
    pub nu_weights_by_pos: BTreeMap<i64, Vec<f64>>,
    /// Mean of `log λ` over the reported positions.
    pub pressure: f64,
    /// Max over kept consecutive positions of `‖𝓛̂_j h_j − h_{j+1}‖_∞`.
    pub residual_h: f64,
    /// Sup distance at `first` between the sweep density and a pullback of half the depth.
    pub pullback_gap: f64,
    #[serde(rename = "R_bound")]
    pub r_bound: f64,
    /// Every kept `h` satisfies `1/R ≤ min h` and `max h ≤ R`.
    pub h_within_bounds: bool,
    pub min_h: f64,
    pub max_h: f64,
}

impl EquilibriumData {
    pub fn positions(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.lambda_by_pos.len()).map(|k| self.first + k as i64)
    }

    pub fn lambda(&self, j: i64) -> Option<f64> {
        usize::try_from(j - self.first)
            .ok()
            .and_then(|k| self.lambda_by_pos.get(k).copied())
    }

    pub fn h(&self, j: i64) -> Option<&GridFunction> {
        self.h_by_pos.get(&j)
    }

    pub fn nu(&self, j: i64) -> Option<&[f64]> {
        self.nu_weights_by_pos.get(&j).map(Vec::as_slice)
    }

    /// JSON-friendly summary without the grid vectors.
    pub fn summary(&self) -> EquilibriumSummary {
        EquilibriumSummary {
            first: self.first,
            count: self.lambda_by_pos.len(),
            lambda_by_pos: self.lambda_by_pos.clone(),
            pressure: self.pressure,
            residual_h: self.residual_h,
            pullback_gap: self.pullback_gap,
            r_bound: self.r_bound,
            h_within_bounds: self.h_within_bounds,
            min_h: self.min_h,
            max_h: self.max_h,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumSummary {
    pub first: i64,
    pub count: usize,
    pub lambda_by_pos: Vec<f64>,
    pub pressure: f64,
    pub residual_h: f64,
    pub pullback_gap: f64,
    #[serde(rename = "R_bound")]
    pub r_bound: f64,
    pub h_within_bounds: bool,
    pub min_h: f64,
    pub max_h: f64,
}

/// Computes `λ_j`, and the kept `h_j`, `ν_j`, for `j ∈ [first, first + count)`.
pub fn solve_equilibrium(
    ctx: &TransferContext,
    first: i64,
    count: usize,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumData> {
    if count == 0 {
        return Err(invalid("count", "must be positive"));
    }
    let last = first + count as i64 - 1;
    let start = first - opts.burn_in as i64;
    let top = last + 1 + opts.lead as i64;
    for idx in [start, top] {
        if !ctx.orbit.contains(idx) {
            return Err(Error::OutOfWindow {
                index: idx,
                lo: ctx.orbit.lo(),
                hi: ctx.orbit.hi(),
            });
        }
    }
    let keep_fn = |p: i64| -> bool {
        if p < first || p > last + 1 {
            return false;
        }
        match opts.keep {
            Keep::All => true,
            Keep::None => false,
            Keep::Stride(s) => {
                let s = s.max(1) as i64;
                let off = p - first;
                off % s == 0 || (off - 1) % s == 0 && off >= 1
            }
        }
    };
    let keep_h = |p: i64| keep_fn(p) || p == first || p == first + 1;
    let (mut nus, lambdas) = dual_sweep(ctx, first, top, opts.anchor, &keep_h)?;
    let lambda_by_pos: Vec<f64> = (first..=last).map(|j| lambdas[&j]).collect();

    // forward sweep
    let n = ctx.grid_n;
    let mut g = vec![1.0; n];
    let mut hs: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    let mut p = start;
    loop {
        if p >= first && keep_h(p) {
            let mut h = g.clone();
            normalize_against(&mut h, &nus[&p])?;
            hs.insert(p, h);
        }
        if p > last {
            break;
        }
        let mut next = ctx.op(p)?.apply(&g);
        let mean = next.iter().sum::<f64>() / n as f64;
        if !(mean > 0.0) || !mean.is_finite() {
            return Err(Error::NonFinite(format!("forward sweep at position {p}")));
        }
        next.iter_mut().for_each(|v| *v /= mean);
        g = next;
        p += 1;
    }

    let mut residual_h: f64 = 0.0;
    for (j, h) in &hs {
        if let Some(h_next) = hs.get(&(j + 1)) {
            if *j > last {
                continue;
            }
            let lam = lambdas[j];
            let image = ctx.op(*j)?.apply(h);
            let r = image
                .iter()
                .zip(h_next)
                .map(|(a, b)| (a / lam - b).abs())
                .fold(0.0, f64::max);
            residual_h = residual_h.max(r);
        }
    }
    let half = (opts.burn_in / 2).max(1);
    let (mut short, _, _) = pull_forward(ctx, first, half, None)?;
    normalize_against(&mut short, &nus[&first])?;
    let pullback_gap = short
        .iter()
        .zip(&hs[&first])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let r_bound = opts.cone.r_bound();
    let (mut min_h, mut max_h) = (f64::INFINITY, f64::NEG_INFINITY);
    for h in hs.values() {
        for v in h {
            min_h = min_h.min(*v);
            max_h = max_h.max(*v);
        }
    }
    let h_within_bounds = min_h >= 1.0 / r_bound && max_h <= r_bound;
    hs.retain(|p, _| keep_fn(*p) && *p <= last);
    nus.retain(|p, _| keep_fn(*p) && *p <= last);
    let pressure = lambda_by_pos.iter().map(|l| l.ln()).sum::<f64>() / count as f64;
    Ok(EquilibriumData {
        first,
        lambda_by_pos,
        h_by_pos: hs
            .into_iter()
            .map(|(p, h)| GridFunction::new(h).map(|g| (p, g)))
            .collect::<Result<_>>()?,
        nu_weights_by_pos: nus,
        pressure,
        residual_h,
        pullback_gap,
        r_bound,
        h_within_bounds,
        min_h,
        max_h,
    })
}

// ---------------------------------------------------------------------------
// Invariant family

/// `μ_j = h_j ν_j` and its push-forward defects.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvariantMeasure {
    pub position: i64,
    pub weights: Vec<f64>,
    /// `|μ_j(g∘f_j) − μ_{j+1}(g)|` for each test observable.
    pub defects: Vec<f64>,
    pub max_defect: f64,
}

/// The default test observables: `cos 2πx, sin 2πx, cos 4πx, sin 4πx, cos 6πx`.
pub fn test_observables() -> Vec<fn(f64) -> f64> {
    vec![
        |x| (TAU * x).cos(),
        |x| (TAU * x).sin(),
        |x| (2.0 * TAU * x).cos(),
        |x| (2.0 * TAU * x).sin(),
        |x| (3.0 * TAU * x).cos(),
    ]
}

/// `μ_j` weights `h_j(x_i) ν_j[i]`, renormalized to sum 1.
pub fn mu_weights(h: &GridFunction, nu: &[f64]) -> Vec<f64> {
    let mut w: Vec<f64> = h.values().iter().zip(nu).map(|(a, b)| a * b).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

pub fn invariant_measure(ctx: &TransferContext, j: i64, eq: &EquilibriumData) -> Result<InvariantMeasure> {
    let missing = |p: i64| Error::OutOfWindow {
        index: p,
        lo: eq.first,
        hi: eq.first + eq.lambda_by_pos.len() as i64 - 1,
    };
    let (h, nu) = (eq.h(j).ok_or_else(|| missing(j))?, eq.nu(j).ok_or_else(|| missing(j))?);
    let (h1, nu1) = (
        eq.h(j + 1).ok_or_else(|| missing(j + 1))?,
        eq.nu(j + 1).ok_or_else(|| missing(j + 1))?,
    );
    let mu = mu_weights(h, nu);
    let mu1 = mu_weights(h1, nu1);
    let map = ctx.map_at(j)?;
    let n = ctx.grid_n;
    let defects: Vec<f64> = test_observables()
        .into_iter()
        .map(|g| {
            let pushed: f64 = (0..n).map(|i| mu[i] * g(map.eval(i as f64 / n as f64))).sum();
            let direct: f64 = (0..n).map(|i| mu1[i] * g(i as f64 / n as f64)).sum();
            (pushed - direct).abs()
        })
        .collect();
    let max_defect = defects.iter().cloned().fold(0.0, f64::max);
    Ok(InvariantMeasure {
        position: j,
        weights: mu,
        defects,
        max_defect,
    })
}

// ---------------------------------------------------------------------------
// Cone contraction

/// A random element of `𝒞^k_δ`: `1 + Σ_{m ≤ 3} (a_m cos 2πmx + b_m sin 2πmx)`
/// scaled so that `|g|_{α,δ} / inf g` is a uniform fraction of `k`, times a random positive constant.
pub fn sample_cone_member(params: &ConeParams, n: usize, rng: &mut impl rand::Rng) -> Result<GridFunction> {
    let coeffs: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let wave = GridFunction::from_fn(n, |x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(m, (a, b))| {
                let t = TAU * (m + 1) as f64 * x;
                a * t.cos() + b * t.sin()
            })
            .sum()
    })?;
    let target = params.k * rng.random_range(0.05..0.95);
    let semi = crate::grid::holder_seminorm(&wave, params.alpha, params.delta)?;
    let amp = wave.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // ratio s·semi / (1 − s·amp) = target
    let s = if semi > 0.0 {
        target / (semi + target * amp)
    } else {
        0.0
    };
    let scale = rng.random_range(0.5..2.0);
    wave.map(|v| scale * (1.0 + s * v))
}

/// Empirical diameter `Δ̂` of `𝓛̂(𝒞^k_δ)` and rate `τ̂ = 1 − e^{−Δ̂}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayBound {
    pub delta_hat: f64,
    pub tau_hat: f64,
    /// `Δ̂` per symbol of the family.
    pub per_symbol: Vec<f64>,
    /// `(Θ_k before, Θ_k after one normalized step)` per pair and symbol.
    pub pairs: Vec<(usize, f64, f64)>,
    /// Sampled diameters only bound the true diameter from below.
    pub empirical: bool,
}

/// Pushes every pair through each symbol's normalized operator and records `Θ_k`.
pub fn decay_bound_constants(
    ctx: &TransferContext,
    params: &ConeParams,
    pairs: &[(GridFunction, GridFunction)],
) -> Result<DecayBound> {
    if pairs.len() < 32 {
        return Err(invalid("pairs", "need at least 32 sampled cone pairs"));
    }
    let mut per_symbol = vec![0.0f64; ctx.family.len()];
    let mut records = Vec::new();
    for (s, delta) in per_symbol.iter_mut().enumerate() {
        let op = ctx.symbol_op(s);
        for (phi, psi) in pairs {
            let before = theta_metric(phi, psi, params)?.value;
            let a = GridFunction::new(op.apply(phi.values()))?;
            let b = GridFunction::new(op.apply(psi.values()))?;
            let after = theta_metric(&a, &b, params)?.value;
            *delta = delta.max(after);
            records.push((s, before, after));
        }
    }
    let delta_hat = per_symbol.iter().cloned().fold(0.0, f64::max);
    Ok(DecayBound {
        delta_hat,
        tau_hat: 1.0 - (-delta_hat).exp(),
        per_symbol,
        pairs: records,
        empirical: true,
    })
}

/// Least-squares slope of `log y` against the index, over entries above `floor`;
/// returns `e^{slope}` (a per-step rate) or `None` with fewer than two usable points.
pub fn geometric_rate(values: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > floor && v.is_finite())
        .map(|(i, v)| (i as f64, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some((sxy / sxx).exp())
}

/// `Θ_k` along `steps` normalized iterates of a pair starting at position `j`.
pub fn theta_trajectory(
    ctx: &TransferContext,
    j: i64,
    params: &ConeParams,
    phi: &GridFunction,
    psi: &GridFunction,
    steps: usize,
) -> Result<Vec<f64>> {
    let mut a = phi.clone();
    let mut b = psi.clone();
    let mut out = vec![theta_metric(&a, &b, params)?.value];
    for s in 0..steps {
        let op = ctx.op(j + s as i64)?;
        let na = op.apply(a.values());
        let nb = op.apply(b.values());
        let ma = na.iter().sum::<f64>() / na.len() as f64;
        let mb = nb.iter().sum::<f64>() / nb.len() as f64;
        a = GridFunction::new(na.into_iter().map(|v| v / ma).collect())?;
        b = GridFunction::new(nb.into_iter().map(|v| v / mb).collect())?;
        out.push(theta_metric(&a, &b, params)?.value);
    }
    Ok(out)
}
