//! Flat TOML run configs with typed validation, flag overrides, and the
//! resolved-config echo.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pvqc_core::ensembles::Initializer;
use pvqc_core::harness::{SweepConfig, DEFAULT_D_CAP};
use pvqc_core::loss::DEFAULT_FLOOR;
use pvqc_core::postselect::Regime;

use crate::CliError;

pub const WORKERS_ENV: &str = "PVQC_WORKERS";

/// Sweep config file; every key is optional so flags can fill the gaps.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub regimes: Option<Vec<String>>,
    pub inits: Option<Vec<String>>,
    pub n_values: Option<Vec<usize>>,
    pub m_values: Option<Vec<usize>>,
    pub samples: Option<usize>,
    pub master_seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub d_cap: Option<u64>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PurityFile {
    pub regimes: Option<Vec<String>>,
    pub m_values: Option<Vec<usize>>,
    pub output_dir: Option<PathBuf>,
}

/// Fully resolved sweep run: the harness grid plus the output directory.
#[derive(Debug)]
pub struct ResolvedSweep {
    pub config: SweepConfig,
    pub output_dir: PathBuf,
}

#[derive(Debug)]
pub struct ResolvedPurity {
    pub regimes: Vec<Regime>,
    pub m_values: Vec<usize>,
    pub output_dir: PathBuf,
}

pub fn load_toml<T: for<'de> Deserialize<'de> + Default>(
    path: Option<&Path>,
) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str(&text)
                .map_err(|e| CliError::usage(format!("config {}: {e}", p.display())))
        }
    }
}

fn parse_regimes(names: &[String]) -> Result<Vec<Regime>, CliError> {
    names
        .iter()
        .map(|n| Regime::parse(n).map_err(CliError::from))
        .collect()
}

fn parse_inits(names: &[String]) -> Result<Vec<Initializer>, CliError> {
    names
        .iter()
        .map(|n| Initializer::parse(n).map_err(CliError::from))
        .collect()
}

fn workers_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::usage(format!("{WORKERS_ENV} must be an integer, got \"{v}\""))),
        Err(_) => Ok(None),
    }
}

/// Flag values that can override sweep config keys.
#[derive(Debug, Default)]
pub struct SweepOverrides {
    pub regimes: Option<Vec<String>>,
    pub inits: Option<Vec<String>>,
    pub n_values: Option<Vec<usize>>,
    pub m_values: Option<Vec<usize>>,
    pub samples: Option<usize>,
    pub master_seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub d_cap: Option<u64>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

pub fn resolve_sweep(file: SweepFile, flags: SweepOverrides) -> Result<ResolvedSweep, CliError> {
    let regime_names = flags
        .regimes
        .or(file.regimes)
        .ok_or_else(|| CliError::usage("missing regimes (config key `regimes` or --regimes)"))?;
    let init_names = flags
        .inits
        .or(file.inits)
        .ok_or_else(|| CliError::usage("missing inits (config key `inits` or --inits)"))?;
    let n_values = flags
        .n_values
        .or(file.n_values)
        .ok_or_else(|| CliError::usage("missing n_values (config key `n_values` or --n-values)"))?;
    let output_dir = flags
        .output_dir
        .or(file.output_dir)
        .ok_or_else(|| CliError::usage("missing output path (config key `output_dir` or --output-dir)"))?;
    // Precedence for workers: flag > environment > file > default.
    let workers = match flags.workers {
        Some(w) => w,
        None => workers_from_env()?.or(file.workers).unwrap_or(0),
    };
    let config = SweepConfig {
        regimes: parse_regimes(&regime_names)?,
        inits: parse_inits(&init_names)?,
        n_values,
        m_values: flags.m_values.or(file.m_values),
        samples: flags.samples.or(file.samples).unwrap_or(200),
        master_seed: flags
            .master_seed
            .or(file.master_seed)
            .ok_or_else(|| CliError::usage("missing master_seed (config key `master_seed` or --seed)"))?,
        epsilon: flags.epsilon.or(file.epsilon).unwrap_or(DEFAULT_FLOOR),
        d_cap: flags.d_cap.or(file.d_cap).unwrap_or(DEFAULT_D_CAP),
        workers,
    };
    Ok(ResolvedSweep { config, output_dir })
}

pub fn resolve_purity(
    file: PurityFile,
    regimes: Option<Vec<String>>,
    m_values: Option<Vec<usize>>,
    output_dir: Option<PathBuf>,
) -> Result<ResolvedPurity, CliError> {
    let regime_names = regimes
        .or(file.regimes)
        .ok_or_else(|| CliError::usage("missing regimes (config key `regimes` or --regimes)"))?;
    let m_values = m_values
        .or(file.m_values)
        .ok_or_else(|| CliError::usage("missing m_values (config key `m_values` or --m-values)"))?;
    let output_dir = output_dir
        .or(file.output_dir)
        .ok_or_else(|| CliError::usage("missing output path (config key `output_dir` or --output-dir)"))?;
    Ok(ResolvedPurity {
        regimes: parse_regimes(&regime_names)?,
        m_values,
        output_dir,
    })
}

/// Serializable mirror of the fully resolved sweep, echoed next to outputs.
#[derive(Debug, Serialize)]
pub struct SweepEcho<'a> {
    pub regimes: Vec<String>,
    pub inits: Vec<String>,
    pub n_values: &'a [usize],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_values: Option<&'a [usize]>,
    pub samples: usize,
    pub master_seed: u64,
    pub epsilon: f64,
    pub d_cap: u64,
    pub workers: usize,
    pub output_dir: String,
}

impl<'a> SweepEcho<'a> {
    pub fn new(resolved: &'a ResolvedSweep) -> Self {
        SweepEcho {
            regimes: resolved.config.regimes.iter().map(|r| r.name()).collect(),
            inits: resolved
                .config
                .inits
                .iter()
                .map(|i| i.name().to_string())
                .collect(),
            n_values: &resolved.config.n_values,
            m_values: resolved.config.m_values.as_deref(),
            samples: resolved.config.samples,
            master_seed: resolved.config.master_seed,
            epsilon: resolved.config.epsilon,
            d_cap: resolved.config.d_cap,
            workers: resolved.config.workers,
            output_dir: resolved.output_dir.display().to_string(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PurityEcho<'a> {
    pub regimes: Vec<String>,
    pub m_values: &'a [usize],
    pub output_dir: String,
}

impl<'a> PurityEcho<'a> {
    pub fn new(resolved: &'a ResolvedPurity) -> Self {
        PurityEcho {
            regimes: resolved.regimes.iter().map(|r| r.name()).collect(),
            m_values: &resolved.m_values,
            output_dir: resolved.output_dir.display().to_string(),
        }
    }
}

pub fn write_echo<T: Serialize>(echo: &T, output_dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(output_dir)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", output_dir.display())))?;
    let text = toml::to_string_pretty(echo)
        .map_err(|e| CliError::usage(format!("cannot serialize resolved config: {e}")))?;
    let path = output_dir.join("resolved_config.toml");
    std::fs::write(&path, text)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}
