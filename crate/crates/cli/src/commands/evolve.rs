//! Full trilinear evolution with per-sample observables.

use serde::Serialize;
use trilinear_core::dynamics::{evolve, manley_rowe_residuals, norm_drift, Sample, Trajectory};
use trilinear_core::fock::partial_trace;
use trilinear_core::measures::{complement_entropy, log_negativity, mode_entropy};
use trilinear_core::{DensityMatrix, ModeLabel, ThreeModeState, TruncationSpec};

use super::{evolution_config, evolution_defaults, initial_state, resolve_evolution, split_workers, Written};
use crate::config::{load_merged, Overrides, RunConfig, SeedPoint};
use crate::error::CliResult;
use crate::output::{ensure_dir, maybe, num, parallel_map, write_json, CsvTable};

pub const DEFAULT_SNAPSHOT_STRIDE: usize = 10;

const COLUMNS: [&str; 22] = [
    "tau",
    "n_p",
    "n_s",
    "n_i",
    "var_p",
    "var_s",
    "var_i",
    "q_p",
    "q_s",
    "q_i",
    "S_p",
    "S_s",
    "S_si",
    "logneg_si",
    "logneg_sp",
    "I_p_si",
    "I_s_i",
    "norm",
    "leakage",
    "mr_si",
    "mr_sp",
    "mr_ip",
];

/// Entropic columns of one stored state.
struct Entanglement {
    s_p: f64,
    s_s: f64,
    s_si: f64,
    i_p_si: f64,
    i_s_i: f64,
    logneg: Option<(f64, f64)>,
}

fn entanglement(state: &ThreeModeState, with_logneg: bool) -> CliResult<Entanglement> {
    let s_p = mode_entropy(state, ModeLabel::Pump)?;
    let s_s = mode_entropy(state, ModeLabel::Signal)?;
    let s_i = mode_entropy(state, ModeLabel::Idler)?;
    let s_si = complement_entropy(state, ModeLabel::Pump)?;
    let logneg = if with_logneg {
        let si = partial_trace(state, &[ModeLabel::Signal, ModeLabel::Idler])?;
        let sp = partial_trace(state, &[ModeLabel::Pump, ModeLabel::Signal])?;
        Some((log_negativity(&si)?, log_negativity(&sp)?))
    } else {
        None
    };
    Ok(Entanglement {
        s_p,
        s_s,
        s_si,
        i_p_si: s_p + s_si,
        i_s_i: s_s + s_i - s_si,
        logneg,
    })
}

fn q(sample: &Sample, mode: ModeLabel) -> Option<f64> {
    (sample.mean[mode] > 0.0).then(|| sample.mandel_q(mode))
}

pub(crate) fn trajectory_table(traj: &Trajectory, cfg: &RunConfig, point: &SeedPoint) -> CliResult<CsvTable> {
    let stride = cfg.snapshot_stride;
    let first = traj.samples[0];
    let mut table = CsvTable::new(COLUMNS);
    table
        .note("trilinear evolve: RK4 on the truncated Fock tensor")
        .note(format!("phi = {}", num(point.phi)))
        .note("entropies in nats, logneg in bits; S_* and I_* only on snapshot rows, logneg_* on every entanglement_stride-th snapshot")
        .note("mr_* are drifts of n_s - n_i, n_s + n_p and n_i + n_p from tau = 0");
    for (j, s) in traj.samples.iter().enumerate() {
        let snap = stride
            .filter(|k| j % k == 0)
            .and_then(|k| traj.snapshots.get(j / k).map(|snap| (j / k, snap)));
        let ent = snap
            .map(|(idx, snap)| entanglement(&snap.state, idx % cfg.entanglement_stride == 0))
            .transpose()?;
        let leak = s.leakage.iter().map(|(_, v)| *v).fold(0.0, f64::max);
        let mut row = vec![num(s.tau)];
        row.extend(ModeLabel::ALL.iter().map(|&m| num(s.mean[m])));
        row.extend(ModeLabel::ALL.iter().map(|&m| num(s.variance(m))));
        row.extend(ModeLabel::ALL.iter().map(|&m| maybe(q(s, m))));
        row.push(maybe(ent.as_ref().map(|e| e.s_p)));
        row.push(maybe(ent.as_ref().map(|e| e.s_s)));
        row.push(maybe(ent.as_ref().map(|e| e.s_si)));
        row.push(maybe(ent.as_ref().and_then(|e| e.logneg).map(|l| l.0)));
        row.push(maybe(ent.as_ref().and_then(|e| e.logneg).map(|l| l.1)));
        row.push(maybe(ent.as_ref().map(|e| e.i_p_si)));
        row.push(maybe(ent.as_ref().map(|e| e.i_s_i)));
        row.push(num(s.norm_sqr.sqrt()));
        row.push(num(leak));
        row.push(num(
            (s.mean.signal - s.mean.idler) - (first.mean.signal - first.mean.idler)
        ));
        row.push(num(
            (s.mean.signal + s.mean.pump) - (first.mean.signal + first.mean.pump)
        ));
        row.push(num((s.mean.idler + s.mean.pump) - (first.mean.idler + first.mean.pump)));
        table.push(row);
    }
    let mr = manley_rowe_residuals(traj);
    table.note(format!(
        "max |mr_si|, |mr_sp|, |mr_ip| = {}, {}, {}; max norm^2 drift = {}",
        num(mr[0]),
        num(mr[1]),
        num(mr[2]),
        num(norm_drift(traj))
    ));
    Ok(table)
}

#[derive(Serialize)]
struct ComplexMatrix {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl From<&DensityMatrix> for ComplexMatrix {
    fn from(rho: &DensityMatrix) -> Self {
        let rows = rho.elements().rows();
        ComplexMatrix {
            re: rows
                .clone()
                .into_iter()
                .map(|r| r.iter().map(|z| z.re).collect())
                .collect(),
            im: rows.into_iter().map(|r| r.iter().map(|z| z.im).collect()).collect(),
        }
    }
}

#[derive(Serialize)]
struct DensitySnapshot {
    tau: f64,
    pump: ComplexMatrix,
    signal: ComplexMatrix,
    idler: ComplexMatrix,
}

fn density_snapshots(traj: &Trajectory) -> CliResult<Vec<DensitySnapshot>> {
    traj.snapshots
        .iter()
        .map(|snap| {
            let single = |m| partial_trace(&snap.state, &[m]).map(|rho| ComplexMatrix::from(&rho));
            Ok(DensitySnapshot {
                tau: snap.tau,
                pump: single(ModeLabel::Pump)?,
                signal: single(ModeLabel::Signal)?,
                idler: single(ModeLabel::Idler)?,
            })
        })
        .collect()
}

/// Runs every sweep point, splitting `workers` between points and blocks.
pub(crate) fn run_points(cfg: &RunConfig, points: &[SeedPoint], trunc: TruncationSpec) -> Vec<CliResult<Trajectory>> {
    let (outer, inner) = split_workers(cfg.workers, points.len());
    let mut evo = evolution_config(cfg);
    evo.workers = inner;
    parallel_map(points, outer, |p| Ok(evolve(&initial_state(p, trunc)?, &evo)?))
}

pub fn run(flags: &Overrides) -> CliResult<Written> {
    let file = load_merged(flags)?;
    let mut defaults = evolution_defaults();
    defaults.snapshot_stride = Some(DEFAULT_SNAPSHOT_STRIDE);
    let mut cfg = RunConfig::resolve("evolve", file, defaults)?;
    let points = cfg.seed_points()?;
    let trunc = resolve_evolution(&mut cfg, &points)?;
    evolution_config(&cfg).validate(&trunc)?;
    let trajectories = run_points(&cfg, &points, trunc);
    ensure_dir(&cfg.out)?;
    let mut written = Vec::new();
    for (k, (point, traj)) in points.iter().zip(trajectories).enumerate() {
        let traj = traj?;
        let table = trajectory_table(&traj, &cfg, point)?;
        written.push(table.write(&cfg.out.join(format!("evolve_{k:02}.csv")), &cfg)?);
        if cfg.density_snapshots {
            let path = cfg.out.join(format!("evolve_{k:02}_densities.json"));
            written.push(write_json(&path, &density_snapshots(&traj)?)?);
        }
    }
    Ok(written)
}
