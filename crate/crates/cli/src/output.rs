//! Report emission: JSON with 17 significant digits, CSV series, and the run
//! manifest that inventories every emitted file.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// Pretty JSON whose floats are printed as `d.dddddddddddddddde±x`.
struct SigFormatter<'a>(PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl Formatter for SigFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(randtherm::io::fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        begin_object_value(),
        end_object_value(),
    );
}

/// Serializes `value` as pretty JSON with full-precision floats. Non-finite
/// floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, SigFormatter(PrettyFormatter::with_indent(b"  ")));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf)?)
}

/// One file in the manifest inventory.
#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageStatus {
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub started_unix_ms: u128,
    pub finished_unix_ms: Option<u128>,
    pub override_hypotheses: bool,
    pub hypotheses_pass: Option<bool>,
    pub failed_conditions: Vec<String>,
    pub stages: BTreeMap<String, StageStatus>,
    pub files: BTreeMap<String, FileEntry>,
    pub exit_code: Option<i32>,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// A run directory `<out>/<config hash>-s<seed>` and its manifest.
pub struct RunDir {
    pub path: PathBuf,
    pub manifest: RunManifest,
}

impl RunDir {
    pub fn create(
        out: &Path,
        config: &ExperimentConfig,
        seed: u64,
        command: &str,
        override_hypotheses: bool,
    ) -> Result<Self> {
        let hash = config.hash12();
        let path = out.join(format!("{hash}-s{seed}"));
        std::fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        // a rerun replaces earlier outputs rather than mixing with them
        for entry in std::fs::read_dir(&path)? {
            let p = entry?.path();
            if p.is_file() {
                std::fs::remove_file(&p)?;
            }
        }
        let mut config = config.clone();
        config.seed = Some(seed);
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config_hash: hash,
            config,
            started_unix_ms: now_ms(),
            finished_unix_ms: None,
            override_hypotheses,
            hypotheses_pass: None,
            failed_conditions: Vec::new(),
            stages: BTreeMap::new(),
            files: BTreeMap::new(),
            exit_code: None,
        };
        let run = Self { path, manifest };
        run.flush_manifest()?;
        Ok(run)
    }

    pub fn flush_manifest(&self) -> Result<()> {
        let text = to_json(&self.manifest)?;
        std::fs::write(self.path.join("manifest.json"), text).context("writing manifest.json")
    }

    /// Marks `stage` as running and writes the manifest before the work starts.
    pub fn begin(&mut self, stage: &str) -> Result<()> {
        self.manifest.stages.insert(
            stage.to_string(),
            StageStatus {
                status: "running".into(),
                detail: None,
            },
        );
        self.flush_manifest()
    }

    pub fn finish(&mut self, stage: &str, status: &str, detail: Option<String>) -> Result<()> {
        self.manifest.stages.insert(
            stage.to_string(),
            StageStatus {
                status: status.into(),
                detail,
            },
        );
        self.flush_manifest()
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.path.join(name), contents).with_context(|| format!("writing {name}"))?;
        self.manifest.files.insert(
            name.to_string(),
            FileEntry {
                bytes: contents.len() as u64,
                sha256: hex::encode(Sha256::digest(contents.as_bytes())),
            },
        );
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = to_json(value)?;
        self.write(name, &text)
    }

    pub fn close(&mut self, exit_code: i32) -> Result<()> {
        self.manifest.exit_code = Some(exit_code);
        self.manifest.finished_unix_ms = Some(now_ms());
        self.flush_manifest()
    }
}
