//! Schrödinger evolution under `H = i(a b c^dag - a^dag b^dag c)` in scaled time.
//!
//! Two integrators share one contract: a fixed-step RK4 over the full tensor,
//! and the same RK4 run independently on each chain of states connected by the
//! Hamiltonian. A chain is labelled by the doubled invariant
//! `2k = 2 n_p + n_s + n_i` and the difference `delta = n_s - n_i`, both of which
//! the truncated Hamiltonian conserves exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{ModeLabel, PerMode, ThreeModeState, TruncationSpec};

/// Largest allowed `|norm^2(t) - norm^2(0)|`.
pub const NORM_DRIFT_TOL: f64 = 1e-8;
/// Stability heuristic bound on `dt * max coupling`.
pub const STABILITY_BOUND: f64 = 0.1;
pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dense,
    Block,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" | "dense_rk4" => Ok(Method::Dense),
            "block" | "block_rk4" => Ok(Method::Block),
            other => Err(Error::InvalidConfig(format!(
                "unknown method {other:?} (expected dense or block)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Dense => "dense",
            Method::Block => "block",
        })
    }
}

/// Variant of the two-term stencil. `FlippedLowering` changes the sign of the
/// `C[n_p + 1, n_s - 1, n_i - 1]` term and exists only to check that the
/// conservation diagnostics catch a broken Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    #[default]
    Exact,
    FlippedLowering,
}

impl Stencil {
    fn lower_sign(self) -> f64 {
        match self {
            Stencil::Exact => -1.0,
            Stencil::FlippedLowering => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_end: f64,
    pub record_stride: usize,
    pub method: Method,
    /// Store a full state every this many recorded samples.
    pub snapshot_stride: Option<usize>,
    /// Evolve with the sign-flipped generator (backwards in time).
    pub reversed: bool,
    pub stencil: Stencil,
    /// Abort when any mode's top-two-shell probability exceeds the truncation's `leak_tol`.
    pub check_leakage: bool,
    /// Threads for the block integrator.
    pub workers: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            dt: DEFAULT_DT,
            t_end: 1.0,
            record_stride: 10,
            method: Method::Block,
            snapshot_stride: None,
            reversed: false,
            stencil: Stencil::Exact,
            check_leakage: true,
            workers: 1,
        }
    }
}

/// Largest coupling `sqrt(n_p (n_s + 1)(n_i + 1))` whose neighbour lies inside the box.
pub fn max_coupling(trunc: &TruncationSpec) -> f64 {
    ((trunc.n_p_max * trunc.n_s_max * trunc.n_i_max) as f64).sqrt()
}

/// Largest step of the form `t_end / n` satisfying the stability heuristic, capped at `cap`.
pub fn suggested_dt(trunc: &TruncationSpec, t_end: f64, cap: f64) -> f64 {
    let limit = (STABILITY_BOUND / max_coupling(trunc)).min(cap) * (1.0 - 1e-9);
    if t_end <= 0.0 {
        return limit;
    }
    let n = (t_end / limit).ceil().max(1.0);
    t_end / n
}

/// Heuristic cutoffs for a coherent product seed with intensities `(|alpha_s|^2, |alpha_i|^2, |gamma|^2)`.
///
/// Each mode gets `M + 7 sqrt(M) + 4`, where `M` bounds the mode's mean over the
/// whole evolution (`|gamma|^2 + min(...)` for the pump, own seed plus `|gamma|^2`
/// for the signal and idler). The leakage check during evolution is the real guard.
pub fn auto_truncation(alpha_s2: f64, alpha_i2: f64, gamma2: f64, leak_tol: f64) -> Result<TruncationSpec> {
    if [alpha_s2, alpha_i2, gamma2]
        .iter()
        .any(|x| !(x.is_finite() && *x >= 0.0))
    {
        return Err(Error::InvalidArgument(
            "seed intensities must be finite and nonnegative".into(),
        ));
    }
    let size = |m: f64| (m + 7.0 * m.sqrt() + 4.0).ceil() as usize;
    TruncationSpec::with_leak_tol(
        size(gamma2 + alpha_s2.min(alpha_i2)),
        size(alpha_s2 + gamma2),
        size(alpha_i2 + gamma2),
        leak_tol,
    )
}

impl EvolutionConfig {
    pub fn validate(&self, trunc: &TruncationSpec) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidConfig(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if self.record_stride < 1 || self.snapshot_stride == Some(0) || self.workers < 1 {
            return Err(Error::InvalidConfig(
                "record_stride, snapshot_stride and workers must be >= 1".into(),
            ));
        }
        let g = max_coupling(trunc);
        if self.dt * g >= STABILITY_BOUND {
            return Err(Error::InvalidConfig(format!(
                "dt = {} times max coupling {g:.3} is {:.3} >= {STABILITY_BOUND}; use dt <= {:.3e}",
                self.dt,
                self.dt * g,
                suggested_dt(trunc, self.t_end, self.dt)
            )));
        }
        let steps = (self.t_end / self.dt).round();
        if (steps * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "t_end = {} is not a whole number of steps of dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(steps as usize)
    }

    fn direction(&self) -> f64 {
        if self.reversed {
            -1.0
        } else {
            1.0
        }
    }
}

/// Observables at one recorded time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub tau: f64,
    pub mean: PerMode<f64>,
    pub second_moment: PerMode<f64>,
    pub norm_sqr: f64,
    pub leakage: PerMode<f64>,
}

impl Sample {
    pub fn variance(&self, mode: ModeLabel) -> f64 {
        self.second_moment[mode] - self.mean[mode].powi(2)
    }

    pub fn mandel_q(&self, mode: ModeLabel) -> f64 {
        (self.variance(mode) - self.mean[mode]) / self.mean[mode]
    }

    /// `<n_p + (n_s + n_i)/2>`.
    pub fn invariant(&self) -> f64 {
        self.mean.pump + 0.5 * (self.mean.signal + self.mean.idler)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub tau: f64,
    pub state: ThreeModeState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: ThreeModeState,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.tau).collect()
    }
}

/// Per-sample partial sums, accumulated in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    mean: [f64; 3],
    second: [f64; 3],
    norm: f64,
    leak: [f64; 3],
}

impl Moments {
    fn add_point(&mut self, n: [usize; 3], prob: f64, top: [usize; 3]) {
        for x in 0..3 {
            let nf = n[x] as f64;
            self.mean[x] += nf * prob;
            self.second[x] += nf * nf * prob;
            if n[x] + 1 >= top[x] {
                self.leak[x] += prob;
            }
        }
        self.norm += prob;
    }

    fn merge(&mut self, other: &Moments) {
        for x in 0..3 {
            self.mean[x] += other.mean[x];
            self.second[x] += other.second[x];
            self.leak[x] += other.leak[x];
        }
        self.norm += other.norm;
    }

    fn into_sample(self, tau: f64) -> Sample {
        let pm = |a: [f64; 3]| PerMode {
            pump: a[0],
            signal: a[1],
            idler: a[2],
        };
        Sample {
            tau,
            mean: pm(self.mean),
            second_moment: pm(self.second),
            norm_sqr: self.norm,
            leakage: pm(self.leak),
        }
    }
}

fn tops(trunc: &TruncationSpec) -> [usize; 3] {
    [trunc.n_p_max, trunc.n_s_max, trunc.n_i_max]
}

fn dense_moments(amps: &Array3<Complex64>, trunc: &TruncationSpec) -> Moments {
    let top = tops(trunc);
    let mut m = Moments::default();
    for ((p, s, i), c) in amps.indexed_iter() {
        m.add_point([p, s, i], c.norm_sqr(), top);
    }
    m
}

/// Diagnostic cutoffs: the leaking modes' cutoffs grown by half.
pub fn suggest_truncation(trunc: &TruncationSpec, leakage: &PerMode<f64>) -> [usize; 3] {
    let grow = |mode: ModeLabel| {
        let c = trunc.cutoff(mode);
        if leakage[mode] > trunc.leak_tol {
            c + (c / 2).max(4)
        } else {
            c
        }
    };
    [grow(ModeLabel::Pump), grow(ModeLabel::Signal), grow(ModeLabel::Idler)]
}

fn check_sample(sample: &Sample, initial_norm: f64, trunc: &TruncationSpec, config: &EvolutionConfig) -> Result<()> {
    let drift = (sample.norm_sqr - initial_norm).abs();
    if !(drift <= NORM_DRIFT_TOL) {
        return Err(Error::NormDrift {
            drift,
            tol: NORM_DRIFT_TOL,
            time: sample.tau,
        });
    }
    if config.check_leakage {
        for (mode, &leak) in sample.leakage.iter() {
            if leak > trunc.leak_tol {
                return Err(Error::LeakageExceeded {
                    mode,
                    leakage: leak,
                    tol: trunc.leak_tol,
                    time: sample.tau,
                    suggested: suggest_truncation(trunc, &sample.leakage),
                });
            }
        }
    }
    Ok(())
}

fn sqrt_table(n: usize) -> Vec<f64> {
    (0..=n + 1).map(|k| (k as f64).sqrt()).collect()
}

/// Writes `scale * dC/dtau` for the flat amplitude slice of a `(P+1, S+1, I+1)` box.
fn dense_derivative(
    c: &[Complex64],
    out: &mut [Complex64],
    trunc: &TruncationSpec,
    sq: &[f64],
    lower_sign: f64,
    scale: f64,
) {
    let (dp, ds, di) = trunc.shape();
    let sp = ds * di;
    for p in 0..dp {
        for s in 0..ds {
            let base = p * sp + s * di;
            for i in 0..di {
                let mut acc = Complex64::new(0.0, 0.0);
                if p > 0 && s + 1 < ds && i + 1 < di {
                    let g = sq[p] * sq[s + 1] * sq[i + 1];
                    acc += c[base + i - sp + di + 1] * g;
                }
                if p + 1 < dp && s > 0 && i > 0 {
                    let g = sq[p + 1] * sq[s] * sq[i];
                    acc += c[base + i + sp - di - 1] * (lower_sign * g);
                }
                out[base + i] = acc * scale;
            }
        }
    }
}

pub fn apply_hamiltonian_derivative(state: &ThreeModeState) -> ThreeModeState {
    apply_hamiltonian_derivative_with(state, Stencil::Exact)
}

pub fn apply_hamiltonian_derivative_with(state: &ThreeModeState, stencil: Stencil) -> ThreeModeState {
    let trunc = *state.truncation();
    let amps = state.amplitudes();
    let c = amps.as_slice().expect("state tensors are contiguous");
    let mut out = vec![Complex64::new(0.0, 0.0); c.len()];
    let sq = sqrt_table(trunc.n_p_max.max(trunc.n_s_max).max(trunc.n_i_max));
    dense_derivative(c, &mut out, &trunc, &sq, stencil.lower_sign(), 1.0);
    let arr = Array3::from_shape_vec(trunc.shape(), out).expect("shape preserved");
    ThreeModeState::from_amplitudes(arr, trunc).expect("shape preserved")
}

/// Classic RK4 step on a flat vector; `f(x, out)` writes the derivative.
struct Rk4Buffers {
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
}

impl Rk4Buffers {
    fn new(n: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n];
        Rk4Buffers {
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z,
        }
    }

    fn step<F: FnMut(&[Complex64], &mut [Complex64])>(&mut self, y: &mut [Complex64], dt: f64, mut f: F) {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        f(y, k1);
        for ((t, a), b) in tmp.iter_mut().zip(y.iter()).zip(k1.iter()) {
            *t = a + b * (0.5 * dt);
        }
        f(tmp, k2);
        for ((t, a), b) in tmp.iter_mut().zip(y.iter()).zip(k2.iter()) {
            *t = a + b * (0.5 * dt);
        }
        f(tmp, k3);
        for ((t, a), b) in tmp.iter_mut().zip(y.iter()).zip(k3.iter()) {
            *t = a + b * dt;
        }
        f(tmp, k4);
        let w = dt / 6.0;
        for (idx, yv) in y.iter_mut().enumerate() {
            *yv += (k1[idx] + (k2[idx] + k3[idx]) * 2.0 + k4[idx]) * w;
        }
    }
}

fn is_recorded(step: usize, steps: usize, stride: usize) -> bool {
    step.is_multiple_of(stride) || step == steps
}

/// Dense fixed-step RK4 over the full amplitude tensor.
pub fn evolve_dense(state: &ThreeModeState, config: &EvolutionConfig) -> Result<Trajectory> {
    let trunc = *state.truncation();
    let steps = config.validate(&trunc)?;
    let sq = sqrt_table(trunc.n_p_max.max(trunc.n_s_max).max(trunc.n_i_max));
    let lower = config.stencil.lower_sign();
    let scale = config.direction();
    let mut y: Vec<Complex64> = state.amplitudes().iter().copied().collect();
    let mut buf = Rk4Buffers::new(y.len());
    let to_state = |y: &[Complex64]| {
        ThreeModeState::from_amplitudes(Array3::from_shape_vec(trunc.shape(), y.to_vec()).expect("shape"), trunc)
            .expect("shape")
    };
    let initial = dense_moments(state.amplitudes(), &trunc).into_sample(0.0);
    let initial_norm = initial.norm_sqr;
    check_sample(&initial, initial_norm, &trunc, config)?;
    let mut samples = vec![initial];
    let mut snapshots = Vec::new();
    let snapshot_due = |count: usize| config.snapshot_stride.is_some_and(|k| count.is_multiple_of(k));
    if snapshot_due(0) {
        snapshots.push(Snapshot {
            tau: 0.0,
            state: state.clone(),
        });
    }
    for step in 1..=steps {
        buf.step(&mut y, config.dt, |x, out| {
            dense_derivative(x, out, &trunc, &sq, lower, scale)
        });
        if is_recorded(step, steps, config.record_stride) {
            let tau = step as f64 * config.dt;
            let view = ndarray::ArrayView3::from_shape(trunc.shape(), &y).expect("shape");
            let sample = dense_moments(&view.to_owned(), &trunc).into_sample(tau);
            check_sample(&sample, initial_norm, &trunc, config)?;
            if snapshot_due(samples.len()) {
                snapshots.push(Snapshot {
                    tau,
                    state: to_state(&y),
                });
            }
            samples.push(sample);
        }
    }
    Ok(Trajectory {
        samples,
        snapshots,
        final_state: to_state(&y),
    })
}

/// Amplitudes along one connected chain, indexed by `q = min(n_s, n_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainBlock {
    /// `2 n_p + n_s + n_i`.
    pub two_k: usize,
    /// `n_s - n_i`.
    pub delta_n: i64,
    /// Chain coordinate of `amps[0]`.
    pub q_start: usize,
    pub amps: Vec<Complex64>,
}

impl ChainBlock {
    /// `(n_p, n_s, n_i)` at chain coordinate `q`.
    pub fn triple(&self, q: usize) -> (usize, usize, usize) {
        chain_triple(self.two_k, self.delta_n, q)
    }

    /// `(n_p, n_s, n_i)` of each stored amplitude.
    pub fn index_map(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.amps.len()).map(move |j| self.triple(self.q_start + j))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `g_j` couples positions `j` and `j + 1`.
    fn couplings(&self) -> Vec<f64> {
        (0..self.amps.len().saturating_sub(1))
            .map(|j| {
                let (p, s, i) = self.triple(self.q_start + j);
                ((p * (s + 1) * (i + 1)) as f64).sqrt()
            })
            .collect()
    }
}

fn chain_triple(two_k: usize, delta: i64, q: usize) -> (usize, usize, usize) {
    let d = delta.unsigned_abs() as usize;
    let s = q + if delta > 0 { d } else { 0 };
    let i = q + if delta < 0 { d } else { 0 };
    (((two_k - d) / 2) - q, s, i)
}

/// A state split into chains, with the truncation needed to rebuild it.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDecomposition {
    pub truncation: TruncationSpec,
    pub blocks: Vec<ChainBlock>,
}

impl BlockDecomposition {
    pub fn norm_sqr(&self) -> f64 {
        self.blocks.iter().map(ChainBlock::norm_sqr).sum()
    }
}

/// Splits a state into its nonzero chains, ordered by `(2k, delta_n)`.
pub fn decompose_blocks(state: &ThreeModeState) -> BlockDecomposition {
    let trunc = *state.truncation();
    let amps = state.amplitudes();
    let mut present: BTreeMap<(usize, i64), ()> = BTreeMap::new();
    for ((p, s, i), c) in amps.indexed_iter() {
        if c.norm_sqr() > 0.0 {
            present.insert((2 * p + s + i, s as i64 - i as i64), ());
        }
    }
    let blocks = present
        .into_keys()
        .map(|(two_k, delta)| {
            let (lo, hi) = chain_range(&trunc, two_k, delta);
            let amps = (lo..=hi)
                .map(|q| {
                    let (p, s, i) = chain_triple(two_k, delta, q);
                    amps[[p, s, i]]
                })
                .collect();
            ChainBlock {
                two_k,
                delta_n: delta,
                q_start: lo,
                amps,
            }
        })
        .collect();
    BlockDecomposition {
        truncation: trunc,
        blocks,
    }
}

/// Inclusive range of `q` for which the chain stays inside the box.
fn chain_range(trunc: &TruncationSpec, two_k: usize, delta: i64) -> (usize, usize) {
    let d = delta.unsigned_abs() as usize;
    let (ds, di) = if delta > 0 { (d, 0) } else { (0, d) };
    let half = (two_k - d) / 2;
    let lo = half.saturating_sub(trunc.n_p_max);
    let hi = half.min(trunc.n_s_max - ds).min(trunc.n_i_max - di);
    (lo, hi)
}

pub fn recompose(decomp: &BlockDecomposition) -> ThreeModeState {
    let trunc = decomp.truncation;
    let mut amps = Array3::zeros(trunc.shape());
    for block in &decomp.blocks {
        for (c, (p, s, i)) in block.amps.iter().zip(block.index_map()) {
            amps[[p, s, i]] = *c;
        }
    }
    ThreeModeState::from_amplitudes(amps, trunc).expect("decomposition carries its truncation")
}

struct BlockRun {
    moments: Vec<Moments>,
    snapshots: Vec<Vec<Complex64>>,
    final_amps: Vec<Complex64>,
}

fn evolve_one_block(
    block: &ChainBlock,
    trunc: &TruncationSpec,
    config: &EvolutionConfig,
    steps: usize,
    snap_steps: &[usize],
) -> BlockRun {
    let g = block.couplings();
    let lower = config.stencil.lower_sign();
    let scale = config.direction();
    let top = tops(trunc);
    let triples: Vec<[usize; 3]> = block.index_map().map(|(p, s, i)| [p, s, i]).collect();
    let gather = |y: &[Complex64]| {
        let mut m = Moments::default();
        for (c, n) in y.iter().zip(triples.iter()) {
            m.add_point(*n, c.norm_sqr(), top);
        }
        m
    };
    let mut y = block.amps.clone();
    let len = y.len();
    let mut moments = vec![gather(&y)];
    let mut snapshots = Vec::with_capacity(snap_steps.len());
    let mut next_snap = snap_steps.iter().peekable();
    if next_snap.peek() == Some(&&0) {
        snapshots.push(y.clone());
        next_snap.next();
    }
    let deriv = |x: &[Complex64], out: &mut [Complex64]| {
        for j in 0..len {
            let mut acc = Complex64::new(0.0, 0.0);
            if j + 1 < len {
                acc += x[j + 1] * g[j];
            }
            if j > 0 {
                acc += x[j - 1] * (lower * g[j - 1]);
            }
            out[j] = acc * scale;
        }
    };
    let mut buf = Rk4Buffers::new(len);
    for step in 1..=steps {
        buf.step(&mut y, config.dt, deriv);
        if is_recorded(step, steps, config.record_stride) {
            moments.push(gather(&y));
        }
        if next_snap.peek() == Some(&&step) {
            snapshots.push(y.clone());
            next_snap.next();
        }
    }
    BlockRun {
        moments,
        snapshots,
        final_amps: y,
    }
}

/// Step indices at which samples are recorded.
fn recorded_steps(steps: usize, stride: usize) -> Vec<usize> {
    (0..=steps).filter(|&s| is_recorded(s, steps, stride)).collect()
}

/// RK4 on each chain independently; observables summed over blocks in block order.
pub fn evolve_blocks(decomp: &BlockDecomposition, config: &EvolutionConfig) -> Result<Trajectory> {
    let trunc = decomp.truncation;
    let steps = config.validate(&trunc)?;
    let rec = recorded_steps(steps, config.record_stride);
    let snap_steps: Vec<usize> = match config.snapshot_stride {
        Some(k) => rec
            .iter()
            .enumerate()
            .filter(|(n, _)| n % k == 0)
            .map(|(_, &s)| s)
            .collect(),
        None => Vec::new(),
    };
    let blocks = &decomp.blocks;
    let mut runs: Vec<Option<BlockRun>> = (0..blocks.len()).map(|_| None).collect();
    let workers = config.workers.min(blocks.len()).max(1);
    if workers == 1 {
        for (slot, block) in runs.iter_mut().zip(blocks.iter()) {
            *slot = Some(evolve_one_block(block, &trunc, config, steps, &snap_steps));
        }
    } else {
        let chunk = blocks.len().div_ceil(workers);
        std::thread::scope(|scope| {
            for (slots, chunk_blocks) in runs.chunks_mut(chunk).zip(blocks.chunks(chunk)) {
                let snap_steps = &snap_steps;
                let trunc = &trunc;
                scope.spawn(move || {
                    for (slot, block) in slots.iter_mut().zip(chunk_blocks.iter()) {
                        *slot = Some(evolve_one_block(block, trunc, config, steps, snap_steps));
                    }
                });
            }
        });
    }
    let runs: Vec<BlockRun> = runs.into_iter().map(|r| r.expect("every block evolved")).collect();

    let mut samples = Vec::with_capacity(rec.len());
    let mut initial_norm = 0.0;
    for (n, &step) in rec.iter().enumerate() {
        let mut total = Moments::default();
        for run in &runs {
            total.merge(&run.moments[n]);
        }
        let sample = total.into_sample(step as f64 * config.dt);
        if n == 0 {
            initial_norm = sample.norm_sqr;
        }
        check_sample(&sample, initial_norm, &trunc, config)?;
        samples.push(sample);
    }
    let rebuild = |pick: &dyn Fn(&BlockRun) -> &Vec<Complex64>| {
        let decomposed = BlockDecomposition {
            truncation: trunc,
            blocks: blocks
                .iter()
                .zip(runs.iter())
                .map(|(b, r)| ChainBlock {
                    amps: pick(r).clone(),
                    ..b.clone()
                })
                .collect(),
        };
        recompose(&decomposed)
    };
    let snapshots = snap_steps
        .iter()
        .enumerate()
        .map(|(n, &step)| Snapshot {
            tau: step as f64 * config.dt,
            state: rebuild(&|r: &BlockRun| &r.snapshots[n]),
        })
        .collect();
    Ok(Trajectory {
        samples,
        snapshots,
        final_state: rebuild(&|r: &BlockRun| &r.final_amps),
    })
}

/// Runs the integrator chosen by `config.method`.
pub fn evolve(state: &ThreeModeState, config: &EvolutionConfig) -> Result<Trajectory> {
    match config.method {
        Method::Dense => evolve_dense(state, config),
        Method::Block => evolve_blocks(&decompose_blocks(state), config),
    }
}

/// Max over samples of `|delta(n_s - n_i)|`, `|delta(n_s + n_p)|`, `|delta(n_i + n_p)|` from the first sample.
pub fn manley_rowe_residuals(trajectory: &Trajectory) -> [f64; 3] {
    let Some(first) = trajectory.samples.first() else {
        return [0.0; 3];
    };
    let combos = |s: &Sample| {
        [
            s.mean.signal - s.mean.idler,
            s.mean.signal + s.mean.pump,
            s.mean.idler + s.mean.pump,
        ]
    };
    let base = combos(first);
    trajectory.samples.iter().fold([0.0; 3], |mut acc, s| {
        let c = combos(s);
        for x in 0..3 {
            acc[x] = f64::max(acc[x], (c[x] - base[x]).abs());
        }
        acc
    })
}

/// Max drift of `<n_p + (n_s + n_i)/2>` from the first sample.
pub fn invariant_drift(trajectory: &Trajectory) -> f64 {
    let Some(first) = trajectory.samples.first() else {
        return 0.0;
    };
    let base = first.invariant();
    trajectory
        .samples
        .iter()
        .map(|s| (s.invariant() - base).abs())
        .fold(0.0, f64::max)
}

/// Max `|norm^2(t) - norm^2(0)|`.
pub fn norm_drift(trajectory: &Trajectory) -> f64 {
    let Some(first) = trajectory.samples.first() else {
        return 0.0;
    };
    trajectory
        .samples
        .iter()
        .map(|s| (s.norm_sqr - first.norm_sqr).abs())
        .fold(0.0, f64::max)
}
