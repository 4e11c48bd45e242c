use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use randtherm_cli::{exit_code, run, Command, ConfigError, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(
    name = "randtherm",
    version,
    about = "Equilibrium states and thermodynamic experiments for random circle maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// Experiment configuration (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config value (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root; the run directory is `<out>/<config hash>-s<seed>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run equilibrium stages even when the hypothesis check fails.
    #[arg(long, global = true)]
    override_hypotheses: bool,
    /// Grid size override (power of two).
    #[arg(long, global = true)]
    grid: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Evaluate the standing hypotheses (exit 2 when they fail).
    Check,
    /// Eigenvalues, densities and reference measures.
    Equilibrium,
    /// Pressure by three routes plus Rokhlin entropy.
    Pressure,
    /// Gibbs ratios at hyperbolic times.
    Gibbs,
    /// Decay of correlations.
    Decay,
    /// Stability sweep over the `[stability]` parameter values.
    Stability,
    /// Every stage, in order.
    All,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Check => Command::Check,
            Sub::Equilibrium => Command::Equilibrium,
            Sub::Pressure => Command::Pressure,
            Sub::Gibbs => Command::Gibbs,
            Sub::Decay => Command::Decay,
            Sub::Stability => Command::Stability,
            Sub::All => Command::All,
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<i32> {
    let path = cli.config.ok_or_else(|| ConfigError("--config is required".into()))?;
    let mut cfg = ExperimentConfig::from_path(&path)?;
    if let Some(n) = cli.grid {
        cfg.numerics.grid_n = n;
        cfg.validate()?;
    }
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let opts = RunOptions {
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        out: cli
            .out
            .or_else(|| cfg.output_dir.clone().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs")),
        override_hypotheses: cli.override_hypotheses,
    };
    let outcome = run(&cfg, cli.command.into(), &opts)?;
    println!("{}", outcome.dir.display());
    if !outcome.hypotheses_pass {
        eprintln!(
            "hypotheses fail{}",
            if opts.override_hypotheses { " (overridden)" } else { "" }
        );
    }
    Ok(outcome.exit_code)
}

/// Parses `args`, runs the command and returns the process exit code.
fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version requests succeed; malformed arguments are
            // configuration errors, never confused with a hypothesis failure
            return if e.use_stderr() {
                exit_code(&ConfigError(e.kind().to_string()).into())
            } else {
                0
            };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run_cli(std::env::args_os()) as u8)
}

// End-to-end runs through argument parsing, the pipeline and exit-code mapping.
#[cfg(test)]
mod tests {
    use std::path::{Path, PathBuf};

    use sha2::{Digest, Sha256};

    use super::run_cli;

    const DOUBLING: &str = r#"
    [base]
    probabilities = [1.0]

    [[family]]
    label = "doubling"
    map = { kind = "linear", degree = 2 }
    potential = { kind = "fourier", offset = 0.0, cos = [0.001], sin = [] }
    eps_phi = 0.01

    [numerics]
    grid_n = 128
    past = 20
    future = 80
    count = 20
    burn_in = 20
    lead = 20
    "#;

    fn broken() -> String {
        DOUBLING.replace("eps_phi = 0.01", "eps_phi = 0.75")
    }

    fn randtherm(args: &[&str]) -> i32 {
        run_cli(std::iter::once("randtherm").chain(args.iter().copied()))
    }

    /// The single run directory created under `out`.
    fn run_dir(out: &Path) -> PathBuf {
        let mut dirs: Vec<PathBuf> = std::fs::read_dir(out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.is_dir())
            .collect();
        assert_eq!(dirs.len(), 1, "expected one run directory in {}", out.display());
        dirs.pop().unwrap()
    }

    fn write(dir: &Path, name: &str, text: &str) -> String {
        let path = dir.join(name);
        std::fs::write(&path, text).unwrap();
        path.to_string_lossy().into_owned()
    }

    fn manifest(run: &Path) -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap()
    }

    fn run_equilibrium(config: &str, out: &Path, extra: &[&str]) -> (i32, PathBuf) {
        let out_s = out.to_string_lossy().into_owned();
        let mut args = vec!["--config", config, "--out", &out_s, "--seed", "5"];
        args.extend_from_slice(extra);
        args.push("equilibrium");
        let code = randtherm(&args);
        (code, run_dir(out))
    }

    #[test]
    fn failing_hypotheses_gate_the_computation() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "broken.toml", &broken());
        let (code, run) = run_equilibrium(&cfg, &dir.path().join("runs"), &[]);
        assert_eq!(code, 2);
        assert!(run.join("hypotheses.json").is_file());
        assert!(!run.join("lambda.csv").exists());
        let m = manifest(&run);
        assert_eq!(m["hypotheses_pass"], false);
        assert_eq!(m["exit_code"], 2);
        assert!(m["failed_conditions"]
            .as_array()
            .unwrap()
            .iter()
            .any(|c| c.as_str().unwrap().contains("IV")));
    }

    #[test]
    fn override_runs_anyway_and_is_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "broken.toml", &broken());
        let (code, run) = run_equilibrium(&cfg, &dir.path().join("runs"), &["--override-hypotheses"]);
        assert_eq!(code, 0);
        assert!(run.join("lambda.csv").is_file());
        let m = manifest(&run);
        assert_eq!(m["override_hypotheses"], true);
        assert_eq!(m["hypotheses_pass"], false);
        assert_eq!(m["exit_code"], 0);
    }

    #[test]
    fn configuration_errors_exit_with_three() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_string_lossy().into_owned();
        let unknown = write(dir.path(), "unknown.toml", &format!("{DOUBLING}\nbogus = 1\n"));
        let bad_grid = write(
            dir.path(),
            "grid.toml",
            &DOUBLING.replace("grid_n = 128", "grid_n = 100"),
        );
        let missing = dir.path().join("missing.toml").to_string_lossy().into_owned();
        for cfg in [&unknown, &bad_grid, &missing] {
            assert_eq!(randtherm(&["--config", cfg, "--out", &out, "check"]), 3, "{cfg}");
        }
        // malformed arguments are configuration errors too, not hypothesis failures
        assert_eq!(randtherm(&["--config", &unknown, "--grid", "many", "check"]), 3);
        assert_eq!(randtherm(&["--config", &unknown]), 3);
        assert_eq!(randtherm(&["--help"]), 0);
    }

    #[test]
    fn manifest_inventories_exactly_the_emitted_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "doubling.toml", DOUBLING);
        let out = dir.path().join("runs");
        let (code, run) = run_equilibrium(&cfg, &out, &[]);
        assert_eq!(code, 0);
        let m = manifest(&run);
        let listed = m["files"].as_object().unwrap();
        let mut on_disk: Vec<String> = std::fs::read_dir(&run)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .filter(|n| n != "manifest.json")
            .collect();
        on_disk.sort();
        let names: Vec<String> = listed.keys().cloned().collect();
        assert_eq!(names, on_disk);
        for (name, entry) in listed {
            let bytes = std::fs::read(run.join(name)).unwrap();
            assert_eq!(entry["bytes"], bytes.len() as u64);
            assert_eq!(entry["sha256"], hex::encode(Sha256::digest(&bytes)));
        }
        for stage in ["check", "equilibrium"] {
            assert_eq!(m["stages"][stage]["status"], "ok", "{stage}");
        }
        assert!(m["finished_unix_ms"].as_u64().unwrap() >= m["started_unix_ms"].as_u64().unwrap());
    }

    #[test]
    fn json_configuration_is_equivalent_to_toml() {
        let dir = tempfile::tempdir().unwrap();
        let toml_cfg = write(dir.path(), "doubling.toml", DOUBLING);
        let value: toml::Value = toml::from_str(DOUBLING).unwrap();
        let json_cfg = write(
            dir.path(),
            "doubling.json",
            &serde_json::to_string_pretty(&value).unwrap(),
        );
        let (a, run_a) = run_equilibrium(&toml_cfg, &dir.path().join("a"), &[]);
        let (b, run_b) = run_equilibrium(&json_cfg, &dir.path().join("b"), &[]);
        assert_eq!((a, b), (0, 0));
        assert_eq!(run_a.file_name(), run_b.file_name());
        for name in ["lambda.csv", "density.csv", "equilibrium.json"] {
            assert_eq!(
                std::fs::read(run_a.join(name)).unwrap(),
                std::fs::read(run_b.join(name)).unwrap(),
                "{name}"
            );
        }
    }
}
