//! Short-time series curves for each requested phase.

use trilinear_core::measures::log_negativity;
use trilinear_core::perturbation::{first_order_reduced_density, mandel_q_second_order, number_series};
use trilinear_core::ModeLabel;

use super::Written;
use crate::config::{load_merged, Defaults, Overrides, RunConfig, SeedPoint};
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, maybe, num, parallel_map, CsvTable};

const COLUMNS: [&str; 8] = ["tau", "n_p", "n_s", "n_i", "q_p", "q_s", "q_i", "logneg_first_order"];

/// Signal/idler cutoff large enough for a coherent seed of intensity `a2`.
fn seed_cutoff(a2: f64) -> usize {
    (a2 + 7.0 * a2.sqrt() + 4.0).ceil() as usize
}

fn times(cfg: &RunConfig) -> CliResult<Vec<f64>> {
    let dt = cfg.dt.expect("perturb always has a step");
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CliError::Config(format!("dt must be positive, got {dt}")));
    }
    let steps = (cfg.t_end / dt).round() as usize;
    Ok((0..=steps).step_by(cfg.record_stride).map(|k| k as f64 * dt).collect())
}

fn table_for(point: &SeedPoint, times: &[f64], cutoffs: (usize, usize)) -> CliResult<CsvTable> {
    let s = &point.seeds;
    let mut table = CsvTable::new(COLUMNS);
    table
        .note("trilinear perturb: series in tau about the coherent product input")
        .note(format!("phi = {}", num(point.phi)))
        .note("n_* columns: exact through tau^2 (orders 0, 1, 2)")
        .note("q_* columns: variance and mean both through tau^2; q_p vanishes at this order")
        .note(format!(
            "logneg_first_order: log2 negativity of the signal-idler density through tau^1, cutoffs {cutoffs:?}"
        ));
    for &tau in times {
        let mut row = vec![num(tau)];
        for mode in ModeLabel::ALL {
            row.push(num(number_series(s, mode).evaluate(tau)));
        }
        for mode in ModeLabel::ALL {
            row.push(maybe(mandel_q_second_order(s, mode, tau).ok()));
        }
        let rho = first_order_reduced_density(s, tau, cutoffs)?;
        row.push(num(log_negativity(&rho)?));
        table.push(row);
    }
    Ok(table)
}

pub fn run(flags: &Overrides) -> CliResult<Written> {
    let file = load_merged(flags)?;
    let defaults = Defaults {
        alpha2: 3.0,
        gamma2: 10.0,
        phi: vec![0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI],
        r: 0.0,
        cutoffs: None,
        dt: Some(1e-3),
        t_end: 0.05,
        record_stride: 1,
        snapshot_stride: None,
        entanglement_stride: 1,
    };
    let mut cfg = RunConfig::resolve("perturb", file, defaults)?;
    let points = cfg.seed_points()?;
    if cfg.cutoffs.is_none() {
        let (a, b) = points.iter().fold((0.0_f64, 0.0_f64), |(a, b), p| {
            (a.max(p.seeds.alpha_s().norm_sqr()), b.max(p.seeds.alpha_i().norm_sqr()))
        });
        cfg.cutoffs = Some([0, seed_cutoff(a), seed_cutoff(b)]);
    }
    let [_, cs, ci] = cfg.cutoffs.expect("set above");
    let grid = times(&cfg)?;
    let tables = parallel_map(&points, cfg.workers, |p| table_for(p, &grid, (cs, ci)));
    ensure_dir(&cfg.out)?;
    tables
        .into_iter()
        .enumerate()
        .map(|(k, t)| t?.write(&cfg.out.join(format!("perturb_{k:02}.csv")), &cfg))
        .collect()
}
