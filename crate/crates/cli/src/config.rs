//! Input loading, seed resolution and provenance for the subcommands.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use cpk::estimate::FitOptions;
use cpk::{FamilyKind, Hypothesis, IntensitySpec};

pub const SEED_ENV: &str = "CPK_SEED";

/// A bad config, flag combination or input file. Maps to exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

pub fn open_input(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| config_error(format!("cannot open {}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = open_input(path)?;
    serde_json::from_reader(io::BufReader::new(file))
        .map_err(|e| config_error(format!("{}: {e}", path.display())))
}

pub fn read_counts(path: &Path) -> Result<Vec<u64>> {
    cpk::io::read_counts_csv(open_input(path)?)
        .map_err(|e| config_error(format!("{}: {e}", path.display())))
}

pub fn read_paths(path: &Path) -> Result<(Vec<u64>, Vec<f64>)> {
    cpk::io::read_trajectory_csv(open_input(path)?)
        .map_err(|e| config_error(format!("{}: {e}", path.display())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedSource {
    Flag,
    Env,
    Config,
    Default,
}

/// Precedence: flag, then `CPK_SEED`, then the config file, then 0.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<(u64, SeedSource)> {
    if let Some(s) = flag {
        return Ok((s, SeedSource::Flag));
    }
    if let Ok(raw) = std::env::var(SEED_ENV) {
        let s = raw
            .trim()
            .parse()
            .map_err(|_| config_error(format!("{SEED_ENV}={raw:?} is not an unsigned integer")))?;
        return Ok((s, SeedSource::Env));
    }
    Ok(match config {
        Some(s) => (s, SeedSource::Config),
        None => (0, SeedSource::Default),
    })
}

/// A model document: either a bare intensity spec or an object with a `model` key.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: IntensitySpec,
    pub n: Option<usize>,
    pub burn_in: Option<usize>,
    pub seed: Option<u64>,
    pub lambda_start: Option<f64>,
}

pub fn read_simulate_config(path: &Path) -> Result<SimulateConfig> {
    let doc: Value = read_json(path)?;
    let parsed = if doc.get("family").is_some() {
        serde_json::from_value(doc).map(|model| SimulateConfig {
            model,
            n: None,
            burn_in: None,
            seed: None,
            lambda_start: None,
        })
    } else {
        serde_json::from_value(doc)
    };
    parsed.map_err(|e| config_error(format!("{}: {e}", path.display())))
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub family: Option<FamilyKind>,
    pub theta_init: Option<Vec<f64>>,
    #[serde(default)]
    pub fit: FitOptions,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    pub hypothesis: Option<Hypothesis>,
    pub alpha: Option<f64>,
    pub lambda_start: Option<f64>,
    #[serde(default)]
    pub fit: FitOptions,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingFileConfig {
    pub model: IntensitySpec,
    pub n_values: Option<Vec<usize>>,
    pub tail: Option<usize>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub pool_size: Option<usize>,
}

pub fn read_mixing_config(path: &Path) -> Result<MixingFileConfig> {
    let doc: Value = read_json(path)?;
    let parsed = if doc.get("family").is_some() {
        serde_json::from_value(doc).map(|model| MixingFileConfig {
            model,
            n_values: None,
            tail: None,
            replicates: None,
            seed: None,
            pool_size: None,
        })
    } else {
        serde_json::from_value(doc)
    };
    parsed.map_err(|e| config_error(format!("{}: {e}", path.display())))
}

/// Attached to every emitted JSON document.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub seed_source: Option<SeedSource>,
    /// The fully resolved run configuration.
    pub config: Value,
}

impl Provenance {
    pub fn new(command: &'static str, config: impl Serialize) -> Result<Self> {
        Ok(Provenance {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: None,
            seed_source: None,
            config: serde_json::to_value(config)?,
        })
    }

    pub fn seeded(mut self, (seed, source): (u64, SeedSource)) -> Self {
        self.seed = Some(seed);
        self.seed_source = Some(source);
        self
    }
}

#[derive(Serialize)]
pub struct Document<'a, T: Serialize> {
    #[serde(flatten)]
    pub body: &'a T,
    pub provenance: &'a Provenance,
}

/// Writes to `path`, or to stdout when no path is given.
pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// `<out>.json` next to a CSV output.
pub fn sidecar_path(csv: &Path) -> std::path::PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".json");
    name.into()
}

pub fn parse_list(raw: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let (a, b) = (parse_usize(a)?, parse_usize(b)?);
            if a > b {
                return Err(config_error(format!("empty range {part:?}")));
            }
            out.extend(a..=b);
        } else {
            out.push(parse_usize(part)?);
        }
    }
    if out.is_empty() {
        return Err(config_error("empty list"));
    }
    Ok(out)
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| config_error(format!("{s:?} is not a non-negative integer")))
}
