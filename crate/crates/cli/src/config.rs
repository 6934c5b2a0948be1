//! Run configuration: a JSON file, command-line overrides and per-command defaults,
//! merged with precedence flag > file > default.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use trilinear_core::constant_pump::CoherentSeed;
use trilinear_core::dynamics::Method;
use trilinear_core::fock::DEFAULT_LEAK_TOL;
use trilinear_core::perturbation::SeedTriple;

use crate::error::{CliError, CliResult};

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Cumulative phases, comma separated; accepts forms like `0`, `pi/2`, `0.75pi`.
    #[arg(long, global = true, value_name = "LIST", allow_hyphen_values = true)]
    pub phi: Option<String>,
    /// Seed intensity |alpha|^2 of both signal and idler.
    #[arg(long, global = true, value_name = "R")]
    pub alpha2: Option<f64>,
    /// Initial pump intensity |gamma|^2.
    #[arg(long, global = true, value_name = "R")]
    pub gamma2: Option<f64>,
    /// Squeeze parameter of the constant-pump model.
    #[arg(long, global = true, value_name = "R")]
    pub r: Option<f64>,
    /// Fock cutoffs as `P,S,I`.
    #[arg(long, global = true, value_name = "P,S,I")]
    pub cutoffs: Option<String>,
    #[arg(long, global = true, value_name = "R")]
    pub dt: Option<f64>,
    #[arg(long = "t-end", global = true, value_name = "R")]
    pub t_end: Option<f64>,
    /// Integrator: `dense` or `block`.
    #[arg(long, global = true, value_name = "METHOD")]
    pub method: Option<String>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for phase sweeps and block evolution.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
}

/// Explicit coherent amplitudes: magnitudes and phases of both seeds and the pump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSeeds {
    pub alpha_s: f64,
    pub theta_s: f64,
    pub alpha_i: f64,
    pub theta_i: f64,
    pub gamma: f64,
    pub two_phi: f64,
}

/// The configuration file, every field optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub alpha2: Option<f64>,
    pub gamma2: Option<f64>,
    pub phi: Option<Vec<f64>>,
    pub seeds: Option<ExplicitSeeds>,
    pub r: Option<f64>,
    pub cutoffs: Option<[usize; 3]>,
    pub leak_tol: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub record_stride: Option<usize>,
    pub method: Option<Method>,
    pub snapshot_stride: Option<usize>,
    pub entanglement_stride: Option<usize>,
    pub density_snapshots: Option<bool>,
    pub phi_points: Option<usize>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub random_seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies command-line values on top of the file values.
    pub fn with_overrides(mut self, flags: &Overrides) -> CliResult<Self> {
        if let Some(list) = &flags.phi {
            self.phi = Some(parse_phi_list(list)?);
        }
        if let Some(c) = &flags.cutoffs {
            self.cutoffs = Some(parse_cutoffs(c)?);
        }
        if let Some(m) = &flags.method {
            self.method = Some(
                m.parse()
                    .map_err(|e: trilinear_core::Error| CliError::Config(e.to_string()))?,
            );
        }
        self.alpha2 = flags.alpha2.or(self.alpha2);
        self.gamma2 = flags.gamma2.or(self.gamma2);
        self.r = flags.r.or(self.r);
        self.dt = flags.dt.or(self.dt);
        self.t_end = flags.t_end.or(self.t_end);
        self.out = flags.out.clone().or(self.out);
        self.workers = flags.workers.or(self.workers);
        Ok(self)
    }
}

/// Parses `0, pi/2, 0.75pi, 3.14159` style phase lists.
pub fn parse_phi_list(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(parse_phase)
        .collect()
}

fn parse_phase(token: &str) -> CliResult<f64> {
    let bad = || CliError::Config(format!("cannot parse phase {token:?}"));
    let lowered = token.to_ascii_lowercase();
    let Some(pos) = lowered.find("pi") else {
        return lowered.parse().map_err(|_| bad());
    };
    let (head, tail) = (&lowered[..pos], &lowered[pos + 2..]);
    let factor = match head.trim_end_matches('*') {
        "" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| bad())?,
    };
    let divisor = match tail {
        "" => 1.0,
        t => t.strip_prefix('/').ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(factor * std::f64::consts::PI / divisor)
}

pub fn parse_cutoffs(text: &str) -> CliResult<[usize; 3]> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Config(format!("cutoffs must be three integers P,S,I, got {text:?}")))?;
    <[usize; 3]>::try_from(parts)
        .map_err(|_| CliError::Config(format!("cutoffs need exactly three values, got {text:?}")))
}

/// Initial seeds: equal signal/idler intensities with a list of cumulative phases,
/// or one fully explicit set of amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seeds {
    Shorthand { alpha2: f64, gamma2: f64, phi: Vec<f64> },
    Explicit(ExplicitSeeds),
}

/// One point of a phase sweep.
#[derive(Debug, Clone, Copy)]
pub struct SeedPoint {
    pub phi: f64,
    pub seeds: SeedTriple,
}

/// Per-command defaults for fields the user may leave out.
#[derive(Debug, Clone)]
pub struct Defaults {
    pub alpha2: f64,
    pub gamma2: f64,
    pub phi: Vec<f64>,
    pub r: f64,
    pub cutoffs: Option<[usize; 3]>,
    pub dt: Option<f64>,
    pub t_end: f64,
    pub record_stride: usize,
    pub snapshot_stride: Option<usize>,
    pub entanglement_stride: usize,
}

/// A fully resolved run; serialized into every output header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub seeds: Seeds,
    pub r: f64,
    /// `None` means sized automatically from the seeds.
    pub cutoffs: Option<[usize; 3]>,
    pub leak_tol: f64,
    /// `None` means the largest stable step not above `1e-3`.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub record_stride: usize,
    pub method: Method,
    pub snapshot_stride: Option<usize>,
    /// Logarithmic negativities are computed on every this-many-th snapshot.
    pub entanglement_stride: usize,
    /// Write reduced single-mode densities at every snapshot as JSON.
    pub density_snapshots: bool,
    pub out: PathBuf,
    pub workers: usize,
    pub random_seed: u64,
}

fn check_nonnegative(name: &str, x: f64) -> CliResult<f64> {
    if x.is_finite() && x >= 0.0 {
        Ok(x)
    } else {
        Err(CliError::Config(format!("{name} must be finite and >= 0, got {x}")))
    }
}

impl RunConfig {
    pub fn resolve(command: &str, file: FileConfig, defaults: Defaults) -> CliResult<Self> {
        let seeds = match file.seeds {
            Some(explicit) => {
                if file.alpha2.is_some() || file.gamma2.is_some() || file.phi.is_some() {
                    return Err(CliError::Config(
                        "explicit seeds exclude the alpha2/gamma2/phi shorthand".into(),
                    ));
                }
                for (name, x) in [
                    ("alpha_s", explicit.alpha_s),
                    ("alpha_i", explicit.alpha_i),
                    ("gamma", explicit.gamma),
                ] {
                    check_nonnegative(name, x)?;
                }
                Seeds::Explicit(explicit)
            }
            None => Seeds::Shorthand {
                alpha2: check_nonnegative("alpha2", file.alpha2.unwrap_or(defaults.alpha2))?,
                gamma2: check_nonnegative("gamma2", file.gamma2.unwrap_or(defaults.gamma2))?,
                phi: file.phi.unwrap_or(defaults.phi),
            },
        };
        let workers = file.workers.unwrap_or(1);
        if workers == 0 {
            return Err(CliError::Config("workers must be >= 1".into()));
        }
        let record_stride = file.record_stride.unwrap_or(defaults.record_stride);
        let entanglement_stride = file.entanglement_stride.unwrap_or(defaults.entanglement_stride);
        if record_stride == 0 || entanglement_stride == 0 || file.snapshot_stride == Some(0) {
            return Err(CliError::Config("strides must be >= 1".into()));
        }
        Ok(RunConfig {
            command: command.to_string(),
            seeds,
            r: check_nonnegative("r", file.r.unwrap_or(defaults.r))?,
            cutoffs: file.cutoffs.or(defaults.cutoffs),
            leak_tol: file.leak_tol.unwrap_or(DEFAULT_LEAK_TOL),
            dt: file.dt.or(defaults.dt),
            t_end: check_nonnegative("t_end", file.t_end.unwrap_or(defaults.t_end))?,
            record_stride,
            method: file.method.unwrap_or(Method::Block),
            snapshot_stride: file.snapshot_stride.or(defaults.snapshot_stride),
            entanglement_stride,
            density_snapshots: file.density_snapshots.unwrap_or(false),
            out: file.out.unwrap_or_else(|| PathBuf::from("out")),
            workers,
            random_seed: file.random_seed.unwrap_or(0),
        })
    }

    /// The sweep points in configuration order.
    pub fn seed_points(&self) -> CliResult<Vec<SeedPoint>> {
        match &self.seeds {
            Seeds::Shorthand { alpha2, gamma2, phi } => {
                if phi.is_empty() {
                    return Err(CliError::Config("the phase list is empty".into()));
                }
                phi.iter()
                    .map(|&p| {
                        Ok(SeedPoint {
                            phi: p,
                            seeds: SeedTriple::from_intensities(*alpha2, *alpha2, *gamma2, p)?,
                        })
                    })
                    .collect()
            }
            Seeds::Explicit(e) => {
                let seeds = SeedTriple::new(
                    CoherentSeed::new(e.alpha_s, e.theta_s)?,
                    CoherentSeed::new(e.alpha_i, e.theta_i)?,
                    e.gamma,
                    e.two_phi,
                )?;
                Ok(vec![SeedPoint {
                    phi: seeds.phi().value(),
                    seeds,
                }])
            }
        }
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialize")
    }
}

pub fn load_merged(flags: &Overrides) -> CliResult<FileConfig> {
    let file = match &flags.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    file.with_overrides(flags)
}
