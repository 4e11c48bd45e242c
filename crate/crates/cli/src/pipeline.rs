//! Experiment stages. Every command runs the hypothesis check first; the
//! equilibrium-based stages refuse to run on a failing report unless the
//! override is given, and the override is recorded in the manifest.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use randtherm::base::{sample_orbit, stream_rng};
use randtherm::fiber::{ExpansionProfile, FiberFamily, PotentialFiber};
use randtherm::hypotheses::{check_conditions, default_sigma_l, HypothesisReport};
use randtherm::io::{fmt_f64, CsvTable};
use randtherm::thermo::{
    decay_correlations, gibbs_check, pressure_balls, pressure_lambda, pressure_separated, rokhlin_entropy,
    stability_sweep, DecayReport, EntropyEstimate, GibbsReport, PressureEstimate, StabilityInput, StabilityReport,
};
use randtherm::transfer::{
    decay_bound_constants, invariant_measure, mu_weights, sample_cone_member, solve_equilibrium, DecayBound,
    EquilibriumData, EquilibriumSummary, TransferContext,
};
use serde::Serialize;

use crate::config::{ConfigError, ExperimentConfig};
use crate::output::RunDir;

/// ChaCha stream for the sampled cone pairs of the decay stage (the orbit uses stream 0).
const CONE_PAIR_STREAM: u64 = 7;

/// The hypothesis check failed and the override flag was not given (exit code 2).
#[derive(Debug)]
pub struct HypothesisFailure(pub Vec<String>);

impl fmt::Display for HypothesisFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "hypotheses fail: ({})", self.0.join(", "))
    }
}

impl std::error::Error for HypothesisFailure {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Check,
    Equilibrium,
    Pressure,
    Gibbs,
    Decay,
    Stability,
    All,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Equilibrium => "equilibrium",
            Command::Pressure => "pressure",
            Command::Gibbs => "gibbs",
            Command::Decay => "decay",
            Command::Stability => "stability",
            Command::All => "all",
        }
    }

    fn runs(self, stage: Command) -> bool {
        self == Command::All || self == stage
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    pub out: PathBuf,
    pub override_hypotheses: bool,
}

/// Maps an error to the documented exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<ConfigError>().is_some() {
        3
    } else if err.downcast_ref::<HypothesisFailure>().is_some() {
        2
    } else {
        1
    }
}

/// The family, orbit window and transfer context of a configuration.
pub struct Prepared {
    pub family: FiberFamily,
    pub ctx: TransferContext,
}

pub fn prepare(cfg: &ExperimentConfig, seed: u64) -> Result<Prepared> {
    let family = cfg.family()?;
    let n = &cfg.numerics;
    let orbit = sample_orbit(&cfg.base_system(), seed, n.past, n.future)?;
    let ctx = TransferContext::new(family.clone(), orbit, n.grid_n, n.preimage_tol)?;
    Ok(Prepared { family, ctx })
}

/// Runs (I)–(VI) with the per-symbol `(σ, L)` from the config or the map defaults.
pub fn hypothesis_report(cfg: &ExperimentConfig, family: &FiberFamily) -> Result<HypothesisReport> {
    let grid_n = cfg.numerics.grid_n;
    let profiles = family
        .maps
        .iter()
        .zip(&cfg.family)
        .map(|(map, sym)| {
            let (sigma0, l0) = default_sigma_l(map, grid_n)?;
            ExpansionProfile::build(map, sym.sigma.unwrap_or(sigma0), sym.l_bound.unwrap_or(l0), grid_n)
        })
        .collect::<randtherm::Result<Vec<_>>>()?;
    Ok(check_conditions(
        family,
        &profiles,
        &cfg.cone_params()?,
        &cfg.check_options(),
    )?)
}

#[derive(Serialize)]
struct EquilibriumReport {
    summary: EquilibriumSummary,
    eigenvalue_bounds_hold: bool,
    invariance_max_defect: f64,
}

#[derive(Serialize)]
pub struct RefinementRow {
    pub eps: f64,
    pub separated_raw: Option<f64>,
    pub separated_estimate: Option<f64>,
    pub balls_crossing: Option<f64>,
    pub balls_estimate: Option<f64>,
    pub note: Option<String>,
}

#[derive(Serialize)]
pub struct PressureReport {
    pub routes: PressureEstimate,
    pub entropy: EntropyEstimate,
    /// `entropy + ∫φ dμ − pressure_lambda` over the sampled positions.
    pub variational_gap: f64,
    pub refinement: Vec<RefinementRow>,
}

#[derive(Serialize)]
pub struct DecayOutput {
    pub correlations: DecayReport,
    pub bound: DecayBound,
}

/// Summary returned to the caller after a successful run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub exit_code: i32,
    pub hypotheses_pass: bool,
}

/// Executes `cmd`, writing every output into the run directory under `opts.out`.
/// The manifest is finalized on success and on failure.
pub fn run(cfg: &ExperimentConfig, cmd: Command, opts: &RunOptions) -> Result<RunOutcome> {
    let mut dir = RunDir::create(&opts.out, cfg, opts.seed, cmd.name(), opts.override_hypotheses)?;
    let result = run_stages(cfg, cmd, opts, &mut dir);
    let code = match &result {
        Ok(pass) => i32::from(cmd == Command::Check && !pass) * 2,
        Err(e) => exit_code(e),
    };
    dir.close(code)?;
    match result {
        Ok(pass) => Ok(RunOutcome {
            dir: dir.path,
            exit_code: code,
            hypotheses_pass: pass,
        }),
        // gating is a reported outcome, not an internal error: the run
        // directory still holds the hypothesis report and the manifest
        Err(e) if e.is::<HypothesisFailure>() => Ok(RunOutcome {
            dir: dir.path,
            exit_code: code,
            hypotheses_pass: false,
        }),
        Err(e) => Err(e),
    }
}

fn stage<T>(dir: &mut RunDir, name: &str, f: impl FnOnce(&mut RunDir) -> Result<T>) -> Result<T> {
    dir.begin(name)?;
    match f(dir) {
        Ok(v) => {
            dir.finish(name, "ok", None)?;
            Ok(v)
        }
        Err(e) => {
            dir.finish(name, "failed", Some(format!("{e:#}")))?;
            Err(e)
        }
    }
}

fn run_stages(cfg: &ExperimentConfig, cmd: Command, opts: &RunOptions, dir: &mut RunDir) -> Result<bool> {
    let prep = prepare(cfg, opts.seed)?;
    let report = stage(dir, "check", |dir| {
        let report = hypothesis_report(cfg, &prep.family)?;
        dir.write_json("hypotheses.json", &report)?;
        dir.write("hypotheses.csv", &hypotheses_csv(&report))?;
        Ok(report)
    })?;
    let pass = report.all_pass();
    dir.manifest.hypotheses_pass = Some(pass);
    dir.manifest.failed_conditions = report.failures().iter().map(|s| s.to_string()).collect();
    dir.flush_manifest()?;
    if cmd == Command::Check {
        return Ok(pass);
    }
    if !pass && !opts.override_hypotheses {
        return Err(HypothesisFailure(dir.manifest.failed_conditions.clone()).into());
    }

    let ctx = &prep.ctx;
    let n = &cfg.numerics;
    if cmd == Command::Stability {
        run_stability_stage(cfg, opts, dir)?;
        return Ok(pass);
    }

    let eq = stage(dir, "equilibrium", |dir| {
        let eq = solve_equilibrium(ctx, n.first, n.count, &cfg.equilibrium_options())?;
        if cmd.runs(Command::Equilibrium) {
            write_equilibrium(dir, ctx, &eq)?;
        }
        Ok(eq)
    })?;

    if cmd.runs(Command::Pressure) {
        stage(dir, "pressure", |dir| {
            let out = run_pressure(cfg, ctx, &eq, opts.seed)?;
            dir.write_json("pressure.json", &out)?;
            dir.write("pressure_refinement.csv", &refinement_csv(&out.refinement))?;
            let mut balls = CsvTable::new(["beta", "log_cover_sum"]);
            for (b, m) in &out.routes.balls.table {
                balls.push(vec![fmt_f64(*b), fmt_f64(*m)]);
            }
            dir.write("pressure_balls.csv", &balls.render())
        })?;
    }
    if cmd.runs(Command::Gibbs) {
        stage(dir, "gibbs", |dir| {
            let eps = if report.delta_c > 0.0 {
                n.gibbs_eps.min(report.delta_c)
            } else {
                n.gibbs_eps
            };
            let out = gibbs_check(ctx, n.gibbs_x, eps, report.c, &eq, n.gibbs_times, n.gibbs_slack)?;
            dir.write_json("gibbs.json", &out)?;
            dir.write("gibbs.csv", &gibbs_csv(&out))
        })?;
    }
    if cmd.runs(Command::Decay) {
        stage(dir, "decay", |dir| {
            let out = run_decay(cfg, ctx, &eq, opts.seed)?;
            dir.write_json("decay.json", &out)?;
            let mut t = CsvTable::new(["n", "C_n"]);
            for (k, c) in &out.correlations.rows {
                t.push(vec![k.to_string(), fmt_f64(*c)]);
            }
            dir.write("decay.csv", &t.render())
        })?;
    }
    if cmd == Command::All {
        run_stability_stage(cfg, opts, dir)?;
    }
    Ok(pass)
}

fn run_stability_stage(cfg: &ExperimentConfig, opts: &RunOptions, dir: &mut RunDir) -> Result<()> {
    let Some(sc) = &cfg.stability else {
        if dir.manifest.command == Command::All.name() {
            return dir.finish("stability", "skipped", Some("no [stability] section".into()));
        }
        return Err(ConfigError("`stability`: the section is required by this command".into()).into());
    };
    stage(dir, "stability", |dir| {
        let out = run_stability(cfg, opts.seed)?;
        dir.write_json("stability.json", &out)?;
        dir.write("stability.csv", &stability_csv(&out, sc.reference))
    })
}

fn write_equilibrium(dir: &mut RunDir, ctx: &TransferContext, eq: &EquilibriumData) -> Result<()> {
    let mut table = CsvTable::new(["position", "symbol", "lambda", "lower_bound", "upper_bound"]);
    let mut bounds_hold = true;
    for j in eq.positions() {
        let lambda = eq.lambda(j).expect("reported position");
        let (lo, hi) = ctx.eigenvalue_bounds(j)?;
        bounds_hold &= lo <= lambda && lambda <= hi;
        table.push(vec![
            j.to_string(),
            ctx.orbit.symbol_at(j)?.to_string(),
            fmt_f64(lambda),
            fmt_f64(lo),
            fmt_f64(hi),
        ]);
    }
    dir.write("lambda.csv", &table.render())?;
    let invariance_max_defect = if eq.h(eq.first + 1).is_some() && eq.nu(eq.first + 1).is_some() {
        invariant_measure(ctx, eq.first, eq)?.max_defect
    } else {
        f64::NAN
    };
    if let (Some(h), Some(nu)) = (eq.h(eq.first), eq.nu(eq.first)) {
        let mu = mu_weights(h, nu);
        let mut t = CsvTable::new(["x", "h", "nu", "mu"]);
        for i in 0..h.n() {
            t.push(vec![
                fmt_f64(h.node(i)),
                fmt_f64(h.values()[i]),
                fmt_f64(nu[i]),
                fmt_f64(mu[i]),
            ]);
        }
        dir.write("density.csv", &t.render())?;
    }
    dir.write_json(
        "equilibrium.json",
        &EquilibriumReport {
            summary: eq.summary(),
            eigenvalue_bounds_hold: bounds_hold,
            invariance_max_defect,
        },
    )
}

pub fn run_pressure(
    cfg: &ExperimentConfig,
    ctx: &TransferContext,
    eq: &EquilibriumData,
    seed: u64,
) -> Result<PressureReport> {
    let n = &cfg.numerics;
    let lambda_route = pressure_lambda(eq, eq.lambda_by_pos.len())?;
    let beta = cfg.beta_grid();
    let separated = pressure_separated(ctx, n.first, n.pressure_n, n.pressure_eps).context("separated-set route")?;
    let balls = pressure_balls(ctx, n.first, n.balls_eps, n.balls_n, &beta).context("dynamical-ball route")?;
    let mut refinement = vec![RefinementRow {
        eps: n.pressure_eps,
        separated_raw: Some(separated.raw),
        separated_estimate: Some(separated.estimate),
        balls_crossing: balls.crossing,
        balls_estimate: Some(balls.estimate),
        note: None,
    }];
    for r in 1..=n.refinements {
        let eps = n.pressure_eps / f64::powi(2.0, r as i32);
        let sep = pressure_separated(ctx, n.first, n.pressure_n, eps);
        let bal = pressure_balls(ctx, n.first, n.balls_eps / f64::powi(2.0, r as i32), n.balls_n, &beta);
        let note = [sep.as_ref().err(), bal.as_ref().err()]
            .into_iter()
            .flatten()
            .map(|e| e.to_string())
            .collect::<Vec<_>>();
        refinement.push(RefinementRow {
            eps,
            separated_raw: sep.as_ref().ok().map(|s| s.raw),
            separated_estimate: sep.as_ref().ok().map(|s| s.estimate),
            balls_crossing: bal.as_ref().ok().and_then(|b| b.crossing),
            balls_estimate: bal.as_ref().ok().map(|b| b.estimate),
            note: (!note.is_empty()).then(|| note.join("; ")),
        });
    }
    let entropy = rokhlin_entropy(ctx, eq, n.entropy_samples, seed)?;
    let routes = PressureEstimate {
        lambda_route,
        separated_route: separated.estimate,
        balls_route: balls.estimate,
        n_used: n.pressure_n,
        eps_used: n.pressure_eps,
        separated,
        balls,
    };
    Ok(PressureReport {
        variational_gap: entropy.gap,
        routes,
        entropy,
        refinement,
    })
}

pub fn run_decay(
    cfg: &ExperimentConfig,
    ctx: &TransferContext,
    eq: &EquilibriumData,
    seed: u64,
) -> Result<DecayOutput> {
    let n = &cfg.numerics;
    let params = cfg.cone_params()?;
    let mut rng = stream_rng(seed, CONE_PAIR_STREAM);
    let pairs = (0..n.decay_pairs)
        .map(|_| {
            Ok((
                sample_cone_member(&params, ctx.grid_n, &mut rng)?,
                sample_cone_member(&params, ctx.grid_n, &mut rng)?,
            ))
        })
        .collect::<randtherm::Result<Vec<_>>>()?;
    let bound = decay_bound_constants(ctx, &params, &pairs)?;
    let psi = PotentialFiber::new(n.decay_psi.clone(), 1.0, 1.0)?;
    let phi = PotentialFiber::new(n.decay_phi.clone(), 1.0, 1.0)?;
    let correlations = decay_correlations(
        ctx,
        eq,
        |x| psi.value(x),
        |x| phi.value(x),
        ("psi", "phi"),
        n.decay_n_max,
        Some(bound.tau_hat),
    )?;
    Ok(DecayOutput { correlations, bound })
}

pub fn run_stability(cfg: &ExperimentConfig, seed: u64) -> Result<StabilityReport> {
    let sc = cfg
        .stability
        .as_ref()
        .context("the config has no [stability] section")?;
    let inputs = sc
        .values
        .iter()
        .map(|&s| {
            let member = cfg.with_parameter(sc.parameter, s)?;
            let prep = prepare(&member, seed)?;
            let hypotheses_pass = hypothesis_report(&member, &prep.family)?.all_pass();
            Ok(StabilityInput {
                s,
                ctx: prep.ctx,
                hypotheses_pass,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let count = sc.count.unwrap_or(cfg.numerics.count);
    Ok(stability_sweep(
        &inputs,
        sc.reference,
        cfg.numerics.first,
        count,
        &cfg.equilibrium_options(),
    )?)
}

fn hypotheses_csv(r: &HypothesisReport) -> String {
    let mut t = CsvTable::new([
        "label",
        "degree",
        "sigma",
        "L",
        "q",
        "p",
        "gamma",
        "eps_phi",
        "iv_margin",
        "I",
        "II",
        "IV",
        "V",
    ]);
    for s in &r.symbols {
        t.push(vec![
            s.label.clone(),
            s.degree.to_string(),
            fmt_f64(s.sigma),
            fmt_f64(s.l_bound),
            s.q.to_string(),
            s.p.to_string(),
            fmt_f64(s.gamma),
            fmt_f64(s.eps_phi),
            fmt_f64(s.iv_margin),
            s.condition_i.to_string(),
            s.condition_ii.to_string(),
            s.condition_iv.to_string(),
            s.condition_v.to_string(),
        ]);
    }
    t.render()
}

fn refinement_csv(rows: &[RefinementRow]) -> String {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let mut t = CsvTable::new([
        "eps",
        "separated_raw",
        "separated_estimate",
        "balls_crossing",
        "balls_estimate",
    ]);
    for r in rows {
        t.push(vec![
            fmt_f64(r.eps),
            opt(r.separated_raw),
            opt(r.separated_estimate),
            opt(r.balls_crossing),
            opt(r.balls_estimate),
        ]);
    }
    t.render()
}

fn gibbs_csv(r: &GibbsReport) -> String {
    let mut t = CsvTable::new([
        "n",
        "ball_lo",
        "ball_hi",
        "nu_mass",
        "S_n_phi",
        "log_lambda_n",
        "ratio",
        "gamma_hat",
        "exactness_time",
        "within_band",
    ]);
    for row in &r.rows {
        t.push(vec![
            row.n.to_string(),
            fmt_f64(row.ball_lo),
            fmt_f64(row.ball_hi),
            fmt_f64(row.nu_mass),
            fmt_f64(row.s_n_phi),
            fmt_f64(row.log_lambda_n),
            fmt_f64(row.ratio),
            fmt_f64(row.gamma_hat),
            row.exactness_time.to_string(),
            row.within_band.to_string(),
        ]);
    }
    t.render()
}

fn stability_csv(r: &StabilityReport, reference: f64) -> String {
    let mut t = CsvTable::new([
        "s",
        "abs_s_minus_s0",
        "d_lambda",
        "d_h",
        "d_pressure",
        "hypotheses_pass",
    ]);
    for row in &r.rows {
        t.push(vec![
            fmt_f64(row.s),
            fmt_f64((row.s - reference).abs()),
            fmt_f64(row.d_lambda),
            fmt_f64(row.d_h),
            fmt_f64(row.d_pressure),
            row.hypotheses_pass.to_string(),
        ]);
    }
    t.render()
}

/// Output files of a finished run, relative to its directory, in sorted order.
pub fn list_outputs(dir: &Path) -> Result<Vec<String>> {
    let mut names: Vec<String> = std::fs::read_dir(dir)?
        .map(|e| Ok(e?.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_>>()?;
    names.sort();
    Ok(names)
}
