pub mod evolve;
pub mod perturb;
pub mod steady;
pub mod tmscs;
pub mod validate;

use std::path::PathBuf;

use trilinear_core::dynamics::{auto_truncation, suggested_dt, EvolutionConfig, DEFAULT_DT};
use trilinear_core::fock::product_coherent_state;
use trilinear_core::{ThreeModeState, TruncationSpec};

use crate::config::{Defaults, RunConfig, SeedPoint};
use crate::error::{CliError, CliResult};

/// Files written by a command, in the order they were produced.
pub type Written = Vec<PathBuf>;

pub(crate) fn truncation(cfg: &RunConfig) -> CliResult<TruncationSpec> {
    let [p, s, i] = cfg
        .cutoffs
        .ok_or_else(|| CliError::Config("cutoffs were not resolved".into()))?;
    Ok(TruncationSpec::with_leak_tol(p, s, i, cfg.leak_tol)?)
}

/// Fills in automatic cutoffs and time step so the recorded configuration is concrete.
pub(crate) fn resolve_evolution(cfg: &mut RunConfig, points: &[SeedPoint]) -> CliResult<TruncationSpec> {
    if cfg.cutoffs.is_none() {
        let mut box_ = [0usize; 3];
        for point in points {
            let s = &point.seeds;
            let t = auto_truncation(
                s.alpha_s().norm_sqr(),
                s.alpha_i().norm_sqr(),
                s.gamma().norm_sqr(),
                cfg.leak_tol,
            )?;
            box_ = [box_[0].max(t.n_p_max), box_[1].max(t.n_s_max), box_[2].max(t.n_i_max)];
        }
        cfg.cutoffs = Some(box_);
    }
    let trunc = truncation(cfg)?;
    if cfg.dt.is_none() {
        cfg.dt = Some(suggested_dt(&trunc, cfg.t_end, DEFAULT_DT));
    }
    Ok(trunc)
}

pub(crate) fn evolution_config(cfg: &RunConfig) -> EvolutionConfig {
    EvolutionConfig {
        dt: cfg.dt.unwrap_or(DEFAULT_DT),
        t_end: cfg.t_end,
        record_stride: cfg.record_stride,
        method: cfg.method,
        snapshot_stride: cfg.snapshot_stride,
        workers: cfg.workers,
        ..Default::default()
    }
}

pub(crate) fn initial_state(point: &SeedPoint, trunc: TruncationSpec) -> CliResult<ThreeModeState> {
    let s = &point.seeds;
    Ok(product_coherent_state(s.alpha_s(), s.alpha_i(), s.gamma(), trunc)?)
}

/// Defaults shared by the evolution-based commands.
pub(crate) fn evolution_defaults() -> Defaults {
    Defaults {
        alpha2: 3.0,
        gamma2: 10.0,
        phi: vec![0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI],
        r: 1.2,
        cutoffs: None,
        dt: None,
        t_end: 10.0,
        record_stride: 100,
        snapshot_stride: None,
        entanglement_stride: 5,
    }
}

/// Phase-sweep workers split between the sweep and the block integrator.
pub(crate) fn split_workers(total: usize, points: usize) -> (usize, usize) {
    let outer = total.min(points).max(1);
    (outer, (total / outer).max(1))
}
