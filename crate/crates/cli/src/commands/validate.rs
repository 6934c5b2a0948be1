//! Cross-validation battery with small, fast configurations.

use std::f64::consts::{FRAC_PI_2, PI};

use trilinear_core::constant_pump::{
    logneg_tmsvs, mandel_q_tmscs, ordering_transform, reversed_operator_path, tmscs_closed_form, tmscs_operator_path,
    tmsvs_amplitudes, CoherentSeed, SqueezeParams,
};
use trilinear_core::dynamics::{
    auto_truncation, evolve, manley_rowe_residuals, norm_drift, EvolutionConfig, Method, Stencil,
};
use trilinear_core::fock::{fidelity, product_coherent_state, DEFAULT_LEAK_TOL};
use trilinear_core::measures::{log_negativity, log_negativity_pure, mandel_q, negativity};
use trilinear_core::perturbation::{number_series, SeedTriple};
use trilinear_core::{Error, ModeLabel, Result, ThreeModeState, TruncationSpec};

use super::Written;
use crate::error::{CliError, CliResult};

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check {
            name,
            pass: false,
            detail: format!("error: {e}"),
        },
    }
}

fn seeded(a2: f64, g2: f64, phi: f64, trunc: TruncationSpec) -> Result<ThreeModeState> {
    let s = SeedTriple::from_intensities(a2, a2, g2, phi)?;
    product_coherent_state(s.alpha_s(), s.alpha_i(), s.gamma(), trunc)
}

fn small_box() -> Result<TruncationSpec> {
    TruncationSpec::new(14, 12, 12)
}

fn closed_form_vs_operator() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for phi in [0.0, FRAC_PI_2, PI] {
        let seed = CoherentSeed::new(1.0, phi / 2.0)?;
        let sq = SqueezeParams::new(0.5, 0.0)?;
        let closed = tmscs_closed_form(&seed, &seed, &sq, 60)?;
        let path = tmscs_operator_path(&seed, &seed, &sq, 60)?;
        worst = worst.max(1.0 - fidelity(&closed, &path)?);
    }
    Ok((worst < 1e-10, format!("max infidelity {worst:.3e} (tol 1e-10)")))
}

fn ordering() -> Result<(bool, String)> {
    let s = CoherentSeed::new(1.0, 0.3)?;
    let i = CoherentSeed::new(1.0, -0.3)?;
    let sq = SqueezeParams::new(0.5, 0.2)?;
    let a = tmscs_operator_path(&s, &i, &sq, 60)?;
    let (bs, bi) = ordering_transform(&s, &i, &sq);
    let b = reversed_operator_path(bs, bi, &sq, 60)?;
    let gap = 1.0 - fidelity(&a, &b)?;
    Ok((gap < 1e-8, format!("infidelity {gap:.3e} (tol 1e-8)")))
}

fn mandel_q_closed() -> Result<(bool, String)> {
    let sq = SqueezeParams::new(1.2, 0.0)?;
    let mut worst: f64 = 0.0;
    for phi in [0.0, PI] {
        let seed = CoherentSeed::new(2.0, phi / 2.0)?;
        let q = mandel_q(&tmscs_closed_form(&seed, &seed, &sq, 160)?.marginal(0))?;
        worst = worst.max((q - mandel_q_tmscs(2.0, 1.2, phi)?).abs());
    }
    Ok((
        worst < 1e-3,
        format!("max |Q_numeric - Q_closed| {worst:.3e} (tol 1e-3)"),
    ))
}

/// The dense pump number must leave the second-order series with an error of order three or higher.
fn perturbation_vs_dense() -> Result<(bool, String)> {
    let phi = 0.0;
    let seeds = SeedTriple::from_intensities(1.0, 1.0, 2.0, phi)?;
    let trunc = TruncationSpec::new(20, 16, 16)?;
    let state = product_coherent_state(seeds.alpha_s(), seeds.alpha_i(), seeds.gamma(), trunc)?;
    let cfg = EvolutionConfig {
        dt: 1e-4,
        t_end: 0.02,
        record_stride: 50,
        method: Method::Dense,
        check_leakage: false,
        ..Default::default()
    };
    let traj = evolve(&state, &cfg)?;
    let series = number_series(&seeds, ModeLabel::Pump);
    let err_at = |tau: f64| -> f64 {
        let s = traj
            .samples
            .iter()
            .min_by(|a, b| (a.tau - tau).abs().total_cmp(&(b.tau - tau).abs()))
            .expect("samples recorded");
        (s.mean.pump - series.evaluate(s.tau)).abs()
    };
    let ratio = err_at(0.02) / err_at(0.01);
    Ok((
        (6.0..18.0).contains(&ratio),
        format!("error ratio over a tau doubling {ratio:.3} (order 3 or 4: accepted [6, 18))"),
    ))
}

fn dense_vs_block() -> Result<(bool, String)> {
    let trunc = small_box()?;
    let state = seeded(1.0, 2.0, 0.7, trunc)?;
    let mut cfg = EvolutionConfig {
        dt: 1e-3,
        t_end: 0.5,
        record_stride: 50,
        method: Method::Dense,
        check_leakage: false,
        ..Default::default()
    };
    let dense = evolve(&state, &cfg)?;
    cfg.method = Method::Block;
    let block = evolve(&state, &cfg)?;
    let overlap = dense.final_state.fidelity(&block.final_state)?;
    let norms = dense.final_state.norm_sqr() * block.final_state.norm_sqr();
    let gap = (1.0 - overlap / norms).abs();
    Ok((gap < 1e-10, format!("normalized infidelity {gap:.3e} (tol 1e-10)")))
}

fn ppt() -> Result<(bool, String)> {
    let product = tmscs_closed_form(
        &CoherentSeed::new(1.0, 0.4)?,
        &CoherentSeed::new(0.8, -0.2)?,
        &SqueezeParams::new(0.0, 0.0)?,
        20,
    )?;
    let product_neg = negativity(&product.density())? + 0.0;
    let r = 0.5;
    let vacuum = tmsvs_amplitudes(&SqueezeParams::new(r, 0.0)?, 30)?;
    let mixed = log_negativity(&vacuum.density())?;
    let pure = log_negativity_pure(&vacuum)?;
    let target = logneg_tmsvs(r);
    let gap = (mixed - target).abs().max((pure - target).abs());
    Ok((
        product_neg < 1e-10 && gap < 1e-6,
        format!("product negativity {product_neg:.3e}; squeezed vacuum logneg gap {gap:.3e} (tol 1e-6)"),
    ))
}

fn conservation() -> Result<(bool, String)> {
    let trunc = auto_truncation(2.0, 2.0, 3.0, DEFAULT_LEAK_TOL)?;
    let state = seeded(2.0, 3.0, PI, trunc)?;
    let cfg = EvolutionConfig {
        dt: 5e-4,
        t_end: 1.0,
        record_stride: 20,
        method: Method::Block,
        ..Default::default()
    };
    let traj = evolve(&state, &cfg)?;
    let mr = manley_rowe_residuals(&traj).into_iter().fold(0.0, f64::max);
    let drift = norm_drift(&traj);
    Ok((
        mr < 1e-7 && drift < 1e-8,
        format!("max Manley-Rowe residual {mr:.3e} (tol 1e-7), norm drift {drift:.3e} (tol 1e-8)"),
    ))
}

/// A sign flip in the lowering term must be caught by the conservation checks.
fn mutation_detected() -> Result<(bool, String)> {
    let trunc = small_box()?;
    let state = seeded(1.0, 2.0, 0.0, trunc)?;
    let cfg = EvolutionConfig {
        dt: 1e-3,
        t_end: 0.5,
        record_stride: 10,
        method: Method::Dense,
        stencil: Stencil::FlippedLowering,
        check_leakage: false,
        ..Default::default()
    };
    match evolve(&state, &cfg) {
        Err(Error::NormDrift { drift, .. }) => {
            Ok((true, format!("flipped stencil aborted with norm drift {drift:.3e}")))
        }
        Err(e) => Err(e),
        Ok(traj) => {
            let mr = manley_rowe_residuals(&traj).into_iter().fold(0.0, f64::max);
            Ok((mr > 1e-6, format!("flipped stencil Manley-Rowe residual {mr:.3e}")))
        }
    }
}

pub fn battery() -> Vec<Check> {
    vec![
        check("closed form vs operator path", closed_form_vs_operator()),
        check("ordering equivalence", ordering()),
        check("Mandel Q closed form", mandel_q_closed()),
        check("perturbation vs dense", perturbation_vs_dense()),
        check("dense vs block", dense_vs_block()),
        check("PPT properties", ppt()),
        check("conservation", conservation()),
        check("stencil mutation detected", mutation_detected()),
    ]
}

pub fn run() -> CliResult<Written> {
    let checks = battery();
    for c in &checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("validate: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        return Err(CliError::Validation { failed });
    }
    Ok(Vec::new())
}
