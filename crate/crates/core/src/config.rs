//! Run configuration files.
//!
//! A configuration is a TOML document with the model sections `[model]`,
//! `[firing]`, `[jump]` and `[kernel]`, plus optional `[grid]`, `[initial]`
//! and `[run]` sections. Unknown keys are rejected with their path.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, InitialDatum, Spacing};
use crate::model::{FiringRate, InteractionKernel, JumpMap, ModelSpec, DEFAULT_TAIL_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub lambda: f64,
    pub epsilon: f64,
    /// Memory truncation; derived from the tail tolerance when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_a: usize,
    pub n_m: usize,
    /// Age window; defaults to the model's minimal window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_max: Option<f64>,
    /// Lowest geometric face; for geometric spacing it defaults to the value
    /// that aligns the cells with one memory-decay step of length `da`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_min: Option<f64>,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            n_a: 400,
            n_m: 100,
            a_max: None,
            m_min: None,
            spacing: Spacing::Uniform,
        }
    }
}

/// Defaults for the time-stepping subcommands; command-line flags override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Time step; defaults to the age cell width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub raster_neurons: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshot_times: Vec<f64>,
}

fn default_t_end() -> f64 {
    20.0
}

fn default_particles() -> usize {
    10_000
}

fn default_stride() -> usize {
    1
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            t_end: default_t_end(),
            dt: None,
            particles: default_particles(),
            seed: 0,
            stride: default_stride(),
            raster_neurons: 0,
            snapshot_times: Vec::new(),
        }
    }
}

/// The document as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: ModelSection,
    pub firing: FiringRate,
    pub jump: JumpMap,
    pub kernel: InteractionKernel,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default = "default_initial")]
    pub initial: InitialDatum,
    #[serde(default)]
    pub run: RunSection,
}

fn default_initial() -> InitialDatum {
    InitialDatum::Product {
        age_mean: 1.0,
        age_sd: 0.5,
        log_m_mean: 0.0,
        log_m_sd: 0.3,
    }
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub file: ConfigFile,
    pub spec: ModelSpec,
    pub grid: GridSpec,
    /// Outcome of the standing assumptions, one line each.
    pub notes: Vec<String>,
}

impl Config {
    /// Builds a configuration around an existing model.
    pub fn from_spec(spec: &ModelSpec) -> Result<Config> {
        let file = ConfigFile {
            model: ModelSection {
                lambda: spec.lambda,
                epsilon: spec.epsilon,
                m_max: Some(spec.m_max),
                tail_tolerance: (spec.tail_tolerance != DEFAULT_TAIL_TOLERANCE)
                    .then_some(spec.tail_tolerance),
            },
            firing: spec.firing.clone(),
            jump: spec.jump.clone(),
            kernel: spec.kernel.clone(),
            grid: GridSection::default(),
            initial: default_initial(),
            run: RunSection::default(),
        };
        Config::from_file(file)
    }

    pub fn from_file(file: ConfigFile) -> Result<Config> {
        let m = &file.model;
        let mut spec = ModelSpec::new(
            m.lambda,
            m.epsilon,
            file.firing.clone(),
            file.jump.clone(),
            file.kernel.clone(),
            m.m_max,
        )?;
        if let Some(tol) = m.tail_tolerance {
            spec.tail_tolerance = tol;
            if m.m_max.is_none() {
                spec.m_max = spec.default_m_max();
            }
            spec.validate()?;
        }
        let g = &file.grid;
        let a_max = g.a_max.unwrap_or_else(|| GridSpec::min_age_window(&spec));
        let m_min = g.m_min.unwrap_or(match g.spacing {
            Spacing::Uniform => 0.0,
            Spacing::Geometric => GridSpec::aligned_m_min(&spec, a_max, g.n_a, g.n_m),
        });
        let grid = GridSpec {
            a_max,
            n_a: g.n_a,
            m_min,
            m_max: spec.m_max,
            n_m: g.n_m,
            spacing: g.spacing,
        };
        grid.validate_for(&spec)
            .map_err(|e| Error::config("grid", e.to_string()))?;
        let r = &file.run;
        if !(r.t_end >= 0.0 && r.t_end.is_finite()) {
            return Err(Error::config(
                "run.t_end",
                "must be finite and non-negative",
            ));
        }
        if r.dt.is_some_and(|dt| !(dt > 0.0 && dt.is_finite())) {
            return Err(Error::config("run.dt", "must be positive"));
        }
        if r.stride == 0 {
            return Err(Error::config("run.stride", "must be positive"));
        }
        let notes = spec.assumption_report();
        Ok(Config {
            file,
            spec,
            grid,
            notes,
        })
    }

    /// Time step: the configured one or the age cell width.
    pub fn dt(&self) -> f64 {
        self.file.run.dt.unwrap_or_else(|| self.grid.da())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&self.file).map_err(|e| Error::config("", e.to_string()))
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<Config> {
    let de = toml::Deserializer::new(text);
    let file: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.into_inner().message().trim().to_string();
        Error::config(if path == "." { String::new() } else { path }, message)
    })?;
    Config::from_file(file)
}

/// Reads and parses a configuration file.
pub fn load_config(path: &std::path::Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// SHA-256 of the canonical JSON form of the document (keys sorted), so
/// the hash ignores formatting and key order.
pub fn config_hash(text: &str) -> Result<String> {
    let value: toml::Value =
        toml::from_str(text).map_err(|e| Error::config("", e.message().to_string()))?;
    let canonical = serde_json::to_value(&value)
        .and_then(|v| serde_json::to_string(&v))
        .map_err(|e| Error::config("", e.to_string()))?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
