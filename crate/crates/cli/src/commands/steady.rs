//! Long-time statistics: window-averaged densities, chain fits and thermal gaps.

use serde::Serialize;
use trilinear_core::fock::partial_trace;
use trilinear_core::linalg::trace_distance;
use trilinear_core::steady_state::{
    fit_chain_constants, thermal_gap_series, time_averaged_density, window_mean, window_stability, ChainFit, Window,
    WindowStability,
};
use trilinear_core::{DensityMatrix, ModeLabel, PerMode};

use super::evolve::run_points;
use super::{evolution_config, evolution_defaults, resolve_evolution, Written};
use crate::config::{load_merged, Overrides, RunConfig};
use crate::error::CliResult;
use crate::output::{ensure_dir, num, write_json, CsvTable};

pub const DEFAULT_SNAPSHOT_STRIDE: usize = 2;
const FIT_CHAINS: std::ops::RangeInclusive<i64> = -2..=2;

#[derive(Serialize)]
struct FitEntry {
    delta_n: i64,
    fit: Option<ChainFit>,
    error: Option<String>,
}

#[derive(Serialize)]
struct ThermalGap {
    late_mean: Option<f64>,
    early_max: Option<f64>,
}

#[derive(Serialize)]
struct PointReport {
    phi: f64,
    window: Window,
    snapshots_used: usize,
    mean_photons: PerMode<f64>,
    /// Signal-idler chains, `delta_n = n_i - n_s`.
    chain_fits: Vec<FitEntry>,
    thermal_gap: PerMode<ThermalGap>,
    window_stability: WindowStability,
    /// Trace distance between the final snapshot's signal density and the window average.
    instantaneous_vs_averaged_signal: f64,
}

#[derive(Serialize)]
struct Summary {
    reports: Vec<String>,
    /// Trace distance between the averaged signal densities at phi = 0 and phi = pi.
    signal_distance_phi0_phipi: Option<f64>,
}

fn heat_map(rho: &DensityMatrix, note: &str) -> CsvTable {
    let mut table = CsvTable::new(["n", "m", "re", "im", "abs"]);
    table.note(note.to_string());
    let e = rho.elements();
    for ((n, m), z) in e.indexed_iter() {
        table.push(vec![n.to_string(), m.to_string(), num(z.re), num(z.im), num(z.norm())]);
    }
    table
}

fn gap(series: &[(f64, f64)], window: &Window) -> ThermalGap {
    let early: Vec<f64> = series
        .iter()
        .filter(|(t, _)| *t < window.start)
        .map(|(_, v)| *v)
        .collect();
    ThermalGap {
        late_mean: window_mean(series, window),
        early_max: (!early.is_empty()).then(|| early.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
    }
}

fn is_phase(phi: f64, target: f64) -> bool {
    (phi - target).abs() < 1e-12
}

pub fn run(flags: &Overrides) -> CliResult<Written> {
    let file = load_merged(flags)?;
    let mut defaults = evolution_defaults();
    defaults.snapshot_stride = Some(DEFAULT_SNAPSHOT_STRIDE);
    let mut cfg = RunConfig::resolve("steady", file, defaults)?;
    let points = cfg.seed_points()?;
    let trunc = resolve_evolution(&mut cfg, &points)?;
    evolution_config(&cfg).validate(&trunc)?;
    let window = Window::late(cfg.t_end)?;
    let trajectories = run_points(&cfg, &points, trunc);
    ensure_dir(&cfg.out)?;

    let mut written = Vec::new();
    let mut summary = Summary {
        reports: Vec::new(),
        signal_distance_phi0_phipi: None,
    };
    let (mut at_zero, mut at_pi) = (None, None);
    for (k, (point, traj)) in points.iter().zip(trajectories).enumerate() {
        let traj = traj?;
        let avg = time_averaged_density(&traj, window)?;
        for (mode, name) in [(ModeLabel::Signal, "signal"), (ModeLabel::Pump, "pump")] {
            let note = format!(
                "trilinear steady: {name} density averaged over tau in [{}, {}], phi = {}",
                num(window.start),
                num(window.end),
                num(point.phi)
            );
            let path = cfg.out.join(format!("steady_{k:02}_{name}_density.csv"));
            written.push(heat_map(&avg.modes[mode], &note).write(&path, &cfg)?);
        }
        let rho_si = avg
            .pair(ModeLabel::Signal, ModeLabel::Idler)
            .expect("signal-idler pair is always averaged");
        let chain_fits = FIT_CHAINS
            .map(|dn| match fit_chain_constants(rho_si, dn) {
                Ok(fit) => FitEntry {
                    delta_n: dn,
                    fit: Some(fit),
                    error: None,
                },
                Err(e) => FitEntry {
                    delta_n: dn,
                    fit: None,
                    error: Some(e.to_string()),
                },
            })
            .collect();
        let mut thermal_gap = PerMode::from_fn(|_| ThermalGap {
            late_mean: None,
            early_max: None,
        });
        for mode in ModeLabel::ALL {
            thermal_gap[mode] = gap(&thermal_gap_series(&traj, mode)?, &window);
        }
        let last = traj.snapshots.last().expect("window average found snapshots");
        let instantaneous = partial_trace(&last.state, &[ModeLabel::Signal])?;
        let report = PointReport {
            phi: point.phi,
            window,
            snapshots_used: avg.snapshots_used,
            mean_photons: PerMode::from_fn(|m| avg.modes[m].mean_number().unwrap_or(f64::NAN)),
            chain_fits,
            thermal_gap,
            window_stability: window_stability(&traj, window)?,
            instantaneous_vs_averaged_signal: trace_distance(instantaneous.elements(), avg.modes.signal.elements())?,
        };
        let path = cfg.out.join(format!("steady_{k:02}_report.json"));
        written.push(write_json(&path, &report)?);
        summary
            .reports
            .push(path.file_name().expect("joined name").to_string_lossy().into_owned());
        if is_phase(point.phi, 0.0) && at_zero.is_none() {
            at_zero = Some(avg.modes.signal.clone());
        } else if is_phase(point.phi, std::f64::consts::PI) && at_pi.is_none() {
            at_pi = Some(avg.modes.signal.clone());
        }
    }
    if let (Some(a), Some(b)) = (&at_zero, &at_pi) {
        summary.signal_distance_phi0_phipi = Some(trace_distance(a.elements(), b.elements())?);
    }
    written.push(write_json(&cfg.out.join("steady_summary.json"), &summary)?);
    Ok(written)
}
