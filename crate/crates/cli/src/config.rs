//! Experiment configuration: a TOML file (JSON accepted) describing the base
//! law, one fiber map and potential per symbol, the cone and the numerics.

use std::fmt;
use std::path::Path;

use randtherm::base::BaseSystem;
use randtherm::fiber::{FiberFamily, FiberMap, LiftKind, PotentialFiber, PotentialKind};
use randtherm::grid::ConeParams;
use randtherm::hypotheses::CheckOptions;
use randtherm::transfer::{EquilibriumOptions, Keep, PREIMAGE_TOL};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A configuration that failed to parse or validate (exit code 3).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn cfg_err(field: &str, reason: impl fmt::Display) -> ConfigError {
    ConfigError(format!("`{field}`: {reason}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseConfig {
    /// Symbol law of the Bernoulli shift; its length is the alphabet size.
    pub probabilities: Vec<f64>,
}

/// One symbol of the alphabet: its fiber map and potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolConfig {
    pub label: String,
    pub map: LiftKind,
    pub potential: PotentialKind,
    #[serde(default = "default_holder")]
    pub holder_exponent: f64,
    #[serde(default = "default_eps_phi")]
    pub eps_phi: f64,
    /// Expansion rate outside the bad region; defaults from the map.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Bound on the contraction inside the bad region; defaults from the map.
    #[serde(default)]
    pub l_bound: Option<f64>,
}

fn default_holder() -> f64 {
    1.0
}

fn default_eps_phi() -> f64 {
    0.01
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeConfig {
    pub alpha: f64,
    pub delta: f64,
    pub k: f64,
}

impl Default for ConeConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            delta: 0.05,
            k: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub grid_n: usize,
    /// Orbit window `-past..=future`.
    pub past: usize,
    pub future: usize,
    /// Equilibrium data is reported on `first..first + count`.
    pub first: i64,
    pub count: usize,
    pub burn_in: usize,
    pub lead: usize,
    /// Keep `h`, `ν` every `keep_stride` positions (1 keeps all, 0 keeps none).
    pub keep_stride: usize,
    pub preimage_tol: f64,
    pub rho: f64,
    /// `None` uses the default `c` of the hypothesis checker.
    pub c: Option<f64>,
    pub exactness_eps: f64,
    pub pressure_n: usize,
    pub pressure_eps: f64,
    pub balls_n: usize,
    pub balls_eps: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_steps: usize,
    /// Number of `ε`-halvings in the pressure refinement table.
    pub refinements: usize,
    pub entropy_samples: usize,
    pub gibbs_x: f64,
    pub gibbs_eps: f64,
    pub gibbs_times: usize,
    pub gibbs_slack: f64,
    pub decay_n_max: usize,
    pub decay_pairs: usize,
    pub decay_psi: PotentialKind,
    pub decay_phi: PotentialKind,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            grid_n: 1024,
            past: 60,
            future: 300,
            first: 0,
            count: 200,
            burn_in: 40,
            lead: 40,
            keep_stride: 1,
            preimage_tol: PREIMAGE_TOL,
            rho: randtherm::hypotheses::DEFAULT_RHO,
            c: None,
            exactness_eps: 0.1,
            pressure_n: 10,
            pressure_eps: 0.01,
            balls_n: 8,
            balls_eps: 0.01,
            beta_min: 0.0,
            beta_max: 3.0,
            beta_steps: 61,
            refinements: 1,
            entropy_samples: 10_000,
            gibbs_x: 0.3141,
            gibbs_eps: 0.05,
            gibbs_times: 10,
            gibbs_slack: 0.1,
            decay_n_max: 20,
            decay_pairs: 32,
            decay_psi: PotentialKind::cosine(1.0, 0.0),
            decay_phi: PotentialKind::cosine(1.0, 0.0),
        }
    }
}

/// What the stability sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// The amplitude of every sine-perturbed map.
    Amplitude,
    /// A common factor multiplying every potential.
    PotentialScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub reference: f64,
    /// Positions compared per member; defaults to `numerics.count`.
    #[serde(default)]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<String>,
    pub base: BaseConfig,
    /// One entry per symbol, in alphabet order.
    pub family: Vec<SymbolConfig>,
    #[serde(default)]
    pub cone: ConeConfig,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub stability: Option<StabilityConfig>,
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the extension is `.json`.
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        BaseSystem::new(self.base.probabilities.clone()).map_err(|e| cfg_err("base.probabilities", e))?;
        if self.family.len() != self.base.probabilities.len() {
            return Err(cfg_err(
                "family",
                format!(
                    "{} entries for an alphabet of {} symbols; every symbol needs a map and a potential",
                    self.family.len(),
                    self.base.probabilities.len()
                ),
            ));
        }
        self.family()?;
        self.cone_params()?;
        let n = &self.numerics;
        if !(n.grid_n >= 16 && n.grid_n.is_power_of_two()) {
            return Err(cfg_err("numerics.grid_n", "must be a power of two ≥ 16"));
        }
        let positive = [
            ("numerics.preimage_tol", n.preimage_tol),
            ("numerics.exactness_eps", n.exactness_eps),
            ("numerics.pressure_eps", n.pressure_eps),
            ("numerics.balls_eps", n.balls_eps),
            ("numerics.gibbs_eps", n.gibbs_eps),
            ("numerics.gibbs_slack", n.gibbs_slack),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(cfg_err(name, "must be positive"));
            }
        }
        if !(n.rho > 0.0 && n.rho < 1.0) {
            return Err(cfg_err("numerics.rho", "must lie in (0, 1)"));
        }
        if let Some(c) = n.c {
            if !(c > 0.0) {
                return Err(cfg_err("numerics.c", "must be positive"));
            }
        }
        if n.count == 0 {
            return Err(cfg_err("numerics.count", "must be positive"));
        }
        if n.first - (n.burn_in as i64) < -(n.past as i64) {
            return Err(cfg_err(
                "numerics.burn_in",
                "first − burn_in falls before the orbit window (raise past)",
            ));
        }
        if n.first + (n.count + n.lead) as i64 > n.future as i64 {
            return Err(cfg_err(
                "numerics.future",
                "first + count + lead exceeds the orbit window",
            ));
        }
        if n.decay_n_max == 0 || n.decay_n_max > n.count {
            return Err(cfg_err("numerics.decay_n_max", "must lie in 1..=count"));
        }
        if n.pressure_n == 0 || n.balls_n == 0 || n.beta_steps < 2 || !(n.beta_max > n.beta_min) {
            return Err(cfg_err(
                "numerics",
                "pressure_n, balls_n ≥ 1, beta_steps ≥ 2 and beta_max > beta_min",
            ));
        }
        if n.entropy_samples == 0 || n.gibbs_times == 0 || n.decay_pairs < 32 {
            return Err(cfg_err(
                "numerics",
                "entropy_samples, gibbs_times ≥ 1 and decay_pairs ≥ 32",
            ));
        }
        if let Some(s) = &self.stability {
            if !s.values.contains(&s.reference) {
                return Err(cfg_err("stability.reference", "must be one of stability.values"));
            }
            if s.values.len() < 2 {
                return Err(cfg_err(
                    "stability.values",
                    "need the reference and at least one other value",
                ));
            }
            for v in &s.values {
                self.with_parameter(s.parameter, *v)?;
            }
        }
        Ok(())
    }

    pub fn base_system(&self) -> BaseSystem {
        BaseSystem::new(self.base.probabilities.clone()).expect("validated")
    }

    pub fn family(&self) -> Result<FiberFamily, ConfigError> {
        let mut maps = Vec::with_capacity(self.family.len());
        let mut pots = Vec::with_capacity(self.family.len());
        for (i, s) in self.family.iter().enumerate() {
            maps.push(
                FiberMap::new(s.map.clone(), s.label.clone()).map_err(|e| cfg_err(&format!("family[{i}].map"), e))?,
            );
            pots.push(
                PotentialFiber::new(s.potential.clone(), s.holder_exponent, s.eps_phi)
                    .map_err(|e| cfg_err(&format!("family[{i}].potential"), e))?,
            );
        }
        FiberFamily::new(maps, pots).map_err(|e| cfg_err("family", e))
    }

    pub fn cone_params(&self) -> Result<ConeParams, ConfigError> {
        ConeParams::new(self.cone.alpha, self.cone.delta, self.cone.k).map_err(|e| cfg_err("cone", e))
    }

    pub fn check_options(&self) -> CheckOptions {
        CheckOptions {
            rho: self.numerics.rho,
            c: self.numerics.c,
            exactness_eps: self.numerics.exactness_eps,
        }
    }

    pub fn equilibrium_options(&self) -> EquilibriumOptions {
        let mut opts = EquilibriumOptions::new(self.cone_params().expect("validated"));
        opts.burn_in = self.numerics.burn_in;
        opts.lead = self.numerics.lead;
        opts.keep = match self.numerics.keep_stride {
            0 => Keep::None,
            1 => Keep::All,
            s => Keep::Stride(s),
        };
        opts
    }

    pub fn beta_grid(&self) -> Vec<f64> {
        let n = &self.numerics;
        (0..n.beta_steps)
            .map(|i| n.beta_min + (n.beta_max - n.beta_min) * i as f64 / (n.beta_steps - 1) as f64)
            .collect()
    }

    /// This configuration with the stability parameter set to `value`.
    pub fn with_parameter(&self, parameter: SweepParameter, value: f64) -> Result<Self, ConfigError> {
        let mut cfg = self.clone();
        match parameter {
            SweepParameter::Amplitude => {
                let mut any = false;
                for s in &mut cfg.family {
                    if let LiftKind::Sine { amplitude, .. } = &mut s.map {
                        *amplitude = value;
                        any = true;
                    }
                }
                if !any {
                    return Err(cfg_err(
                        "stability.parameter",
                        "`amplitude` needs at least one sine map",
                    ));
                }
            }
            SweepParameter::PotentialScale => {
                for (i, s) in cfg.family.iter_mut().enumerate() {
                    let pot = PotentialFiber::new(s.potential.clone(), s.holder_exponent, s.eps_phi)
                        .and_then(|p| p.scaled(value))
                        .map_err(|e| cfg_err(&format!("family[{i}].potential"), e))?;
                    s.potential = pot.kind().clone();
                }
            }
        }
        cfg.stability = None;
        cfg.family().map(|_| cfg)
    }

    /// First 12 hex digits of the SHA-256 of the canonical JSON form, with the
    /// seed and output directory left out.
    pub fn hash12(&self) -> String {
        let mut canon = self.clone();
        canon.seed = None;
        canon.output_dir = None;
        let bytes = serde_json::to_vec(&canon).expect("config serializes");
        hex::encode(Sha256::digest(bytes))[..12].to_string()
    }
}
