//! Initial-condition ensembles, the single-mass sweep, in-degree statistics,
//! SCC tracking, the amplitude-based localization oracle and onset detection.
//!
//! Every sweep cell draws from its own ChaCha stream derived from
//! `(seed, value index, ic index)`, so results do not depend on the order
//! in which cells are evaluated or on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{in_degrees, strongly_connected_components, SccPartition};
use crate::integrator::{integrate, sample_count, IntegratorConfig, Trajectory};
use crate::model::{perturb_params, ModelParams, StateVector};
use crate::netinfer::{infer_network_with, FunctionalNetwork};
use crate::recurrence::RecurrenceConfig;

/// Reference initial condition used for the SCC traces of the `[0, 0.1]` study.
pub const X0A: [f64; 20] = [
    0.0678, 0.0392, 0.0330, 0.03074, 0.0738, 0.0672, 0.0413, 0.0780, 0.06037291, 0.0747, 0.0062, 0.0381, 0.0933,
    0.0543, 0.0505, 0.0356, 0.0193, 0.0180, 0.0577, 0.0390,
];

/// Reference initial condition for the `[0, 0.01]` study.
pub const X0B: [f64; 20] = [
    0.0092, 0.0089, 0.0045, 0.0023, 0.0013, 0.0018, 0.008, 0.0065, 0.0002, 0.0048, 0.0026, 0.005, 0.0087, 0.0033,
    0.0006, 0.0019, 0.0041, 0.002, 0.005, 0.0007,
];

/// Reference initial condition for the 25 s study.
pub const X0C: [f64; 20] = [
    0.0466, 0.0039, 0.0121, 0.0876, 0.0077, 0.0366, 0.0205, 0.0105, 0.0442, 0.0656, 0.0261, 0.0725, 0.0919, 0.0103,
    0.0613, 0.0310, 0.0878, 0.0022, 0.0736, 0.0126,
];

/// Resolves `x0a`, `x0b` or `x0c` (case-insensitive).
pub fn fixture_ic(name: &str) -> Option<StateVector> {
    match name.to_ascii_lowercase().as_str() {
        "x0a" => Some(StateVector(X0A.to_vec())),
        "x0b" => Some(StateVector(X0B.to_vec())),
        "x0c" => Some(StateVector(X0C.to_vec())),
        _ => None,
    }
}

/// `count` evenly spaced values from `start` to `end`, both included.
pub fn linear_grid(start: f64, end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|k| start + (end - start) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Amplitude-ratio rule that labels a trajectory as localized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// A node is localized when its amplitude exceeds this multiple of the
    /// median amplitude of the others.
    pub ratio: f64,
    /// Trailing fraction of the samples over which amplitudes are taken.
    pub window: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { ratio: 4.0, window: 0.2 }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 1.0 && self.ratio.is_finite()) {
            return Err(Error::invalid("oracle.ratio", format!("must be > 1, got {}", self.ratio)));
        }
        if !(self.window > 0.0 && self.window <= 1.0) {
            return Err(Error::invalid("oracle.window", format!("must lie in (0, 1], got {}", self.window)));
        }
        Ok(())
    }

    fn window_len(&self, samples: usize) -> usize {
        ((self.window * samples as f64).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Values taken by the varied mass, in traversal order.
    pub sweep_values: Vec<f64>,
    /// 1-based index of the oscillator whose mass is varied.
    pub target_index: usize,
    pub ensemble_size: usize,
    pub ic_low: f64,
    pub ic_high: f64,
    pub seed: u64,
    pub t_end: f64,
    pub dt_out: f64,
    /// Additive noise σ as a fraction of each displacement series' std.
    pub noise_level: f64,
    /// Relative spread of the per-case parameter perturbation.
    pub param_jitter: f64,
    /// Fixture name of the initial condition whose SCCs are traced.
    pub reference_ic: Option<String>,
    pub oracle: OracleConfig,
    pub model: ModelParams,
    pub recurrence: RecurrenceConfig,
    pub integrator: IntegratorConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sweep_values: linear_grid(1.0, 0.8, 100),
            target_index: 4,
            ensemble_size: 100,
            ic_low: 0.0,
            ic_high: 0.1,
            seed: 1,
            t_end: 10.0,
            dt_out: 0.05,
            noise_level: 0.0,
            param_jitter: 0.0,
            reference_ic: Some("x0a".into()),
            oracle: OracleConfig::default(),
            model: ModelParams::default(),
            recurrence: RecurrenceConfig::default(),
            integrator: IntegratorConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.recurrence.validate()?;
        self.integrator.validate()?;
        self.oracle.validate()?;
        if self.ensemble_size == 0 {
            return Err(Error::invalid("ensemble_size", "must be at least 1"));
        }
        if !(self.ic_low < self.ic_high) || !self.ic_low.is_finite() || !self.ic_high.is_finite() {
            return Err(Error::invalid(
                "ic_range",
                format!("need finite ic_low < ic_high, got [{}, {}]", self.ic_low, self.ic_high),
            ));
        }
        if self.sweep_values.is_empty() {
            return Err(Error::invalid("sweep_values", "must not be empty"));
        }
        if let Some(v) = self.sweep_values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("sweep_values", format!("values must be positive, got {v}")));
        }
        if !(1..=self.model.n_osc).contains(&self.target_index) {
            return Err(Error::invalid(
                "target_index",
                format!("must lie in 1..={}, got {}", self.model.n_osc, self.target_index),
            ));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) || !(self.dt_out > 0.0 && self.dt_out <= self.t_end) {
            return Err(Error::invalid("t_end", "need 0 < dt_out <= t_end"));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(Error::invalid("noise_level", "must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.param_jitter) {
            return Err(Error::invalid("param_jitter", "must lie in [0, 1)"));
        }
        self.reference_state()?;
        Ok(())
    }

    /// 0-based index of the varied oscillator.
    pub fn target(&self) -> usize {
        self.target_index - 1
    }

    pub fn reference_state(&self) -> Result<Option<StateVector>> {
        match &self.reference_ic {
            None => Ok(None),
            Some(name) => {
                let x0 = fixture_ic(name)
                    .ok_or_else(|| Error::invalid("reference_ic", format!("unknown fixture `{name}`")))?;
                x0.check(self.model.n_osc)?;
                Ok(Some(x0))
            }
        }
    }
}

const IC_STREAM: u64 = 0;
const REFERENCE_IC: usize = u32::MAX as usize;

/// Random stream owned by one sweep cell.
pub fn cell_rng(seed: u64, value_index: usize, ic_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((value_index as u64 + 1) << 32) | (ic_index as u64 & 0xffff_ffff));
    rng
}

/// `m` state vectors with every entry uniform in `[low, high)`.
pub fn sample_initial_conditions(m: usize, low: f64, high: f64, n_state: usize, seed: u64) -> Result<Vec<StateVector>> {
    if !(low < high) {
        return Err(Error::invalid("ic_range", format!("need low < high, got [{low}, {high}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(IC_STREAM);
    Ok((0..m)
        .map(|_| StateVector((0..n_state).map(|_| rng.random_range(low..high)).collect()))
        .collect())
}

/// FNV-1a over the bit patterns of every entry.
pub fn ic_hash(ics: &[StateVector]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in ics.iter().flat_map(|s| s.0.iter()) {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

fn population_std(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Adds white Gaussian noise with `σ = level · std(series)` to every
/// displacement series; velocities are left untouched.
pub fn add_noise<R: Rng + ?Sized>(traj: &Trajectory, level: f64, rng: &mut R) -> Result<Trajectory> {
    if !(level >= 0.0 && level.is_finite()) {
        return Err(Error::invalid("noise_level", format!("must be non-negative, got {level}")));
    }
    let mut out = traj.clone();
    if level == 0.0 {
        return Ok(out);
    }
    for row in &mut out.displacements {
        let sigma = level * population_std(row);
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid("noise_level", e.to_string()))?;
        for v in row.iter_mut() {
            *v += normal.sample(rng);
        }
    }
    Ok(out)
}

/// Peak `|xᵢ|` of every oscillator over the trailing oracle window.
pub fn window_amplitudes(traj: &Trajectory, oracle: &OracleConfig) -> Result<Vec<f64>> {
    let t = traj.len();
    let w = oracle.window_len(t);
    if t <= w {
        return Err(Error::SeriesTooShort { len: t, span: w });
    }
    Ok(traj
        .displacements
        .iter()
        .map(|row| row[t - w..].iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Node whose window amplitude exceeds `ratio` times the median of the
/// others; the largest ratio wins if several do.
pub fn localization_oracle(traj: &Trajectory, oracle: &OracleConfig) -> Result<Option<usize>> {
    oracle.validate()?;
    let a = window_amplitudes(traj, oracle)?;
    let mut best: Option<(usize, f64)> = None;
    for i in 0..a.len() {
        let others = median(a.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect());
        let r = if others > 0.0 {
            a[i] / others
        } else if a[i] > 0.0 {
            f64::INFINITY
        } else {
            continue;
        };
        if r > oracle.ratio && best.is_none_or(|(_, b)| r > b) {
            best = Some((i, r));
        }
    }
    Ok(best.map(|(i, _)| i))
}

/// Serial or data-parallel evaluation of independent work items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Uses the current rayon pool; identical to `Sequential` when the
    /// `parallel` feature is off.
    #[default]
    Parallel,
}

/// Everything derived from one simulated case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub trajectory: Trajectory,
    pub network: FunctionalNetwork,
    pub in_degrees: Vec<usize>,
    pub scc: SccPartition,
    pub localized: Option<usize>,
}

impl CaseResult {
    pub fn summary(&self) -> CaseSummary {
        CaseSummary {
            in_degrees: self.in_degrees.clone(),
            edge_count: self.network.edge_count(),
            scc: self.scc.clone(),
            localized: self.localized,
        }
    }
}

/// Integrate, optionally add noise, infer the network, then read off
/// in-degrees, SCCs and the oracle label (taken on the noise-free dynamics).
pub fn run_case<R: Rng + ?Sized>(
    params: &ModelParams,
    x0: &StateVector,
    cfg: &ExperimentConfig,
    rng: &mut R,
) -> Result<CaseResult> {
    run_case_with(params, x0, cfg, rng, Execution::Parallel)
}

fn run_case_with<R: Rng + ?Sized>(
    params: &ModelParams,
    x0: &StateVector,
    cfg: &ExperimentConfig,
    rng: &mut R,
    exec: Execution,
) -> Result<CaseResult> {
    let trajectory = integrate(params, x0, cfg.t_end, cfg.dt_out, &cfg.integrator)?;
    let localized = localization_oracle(&trajectory, &cfg.oracle)?;
    let observed = add_noise(&trajectory, cfg.noise_level, rng)?;
    let network = infer_network_with(&observed.displacements, &cfg.recurrence, exec)?.network;
    let in_degrees = in_degrees(&network);
    let scc = strongly_connected_components(&network);
    Ok(CaseResult {
        trajectory,
        network,
        in_degrees,
        scc,
        localized,
    })
}

/// Compact per-cell record kept in a [`SweepResult`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub in_degrees: Vec<usize>,
    pub edge_count: usize,
    pub scc: SccPartition,
    pub localized: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellOutcome {
    Ok(CaseSummary),
    Failed { error: String, numerical: bool },
}

impl CellOutcome {
    pub fn ok(&self) -> Option<&CaseSummary> {
        match self {
            CellOutcome::Ok(s) => Some(s),
            CellOutcome::Failed { .. } => None,
        }
    }
}

/// Population mean and `1/M` standard deviation of every node's in-degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDegreeStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub m: usize,
}

pub fn degree_stats(vectors: &[Vec<usize>]) -> Result<EnsembleDegreeStats> {
    let m = vectors.len();
    if m == 0 {
        return Err(Error::invalid("degree_vectors", "need at least one vector"));
    }
    let n = vectors[0].len();
    if let Some(v) = vectors.iter().find(|v| v.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: v.len(),
        });
    }
    let mut mean = vec![0.0; n];
    for v in vectors {
        for (acc, z) in mean.iter_mut().zip(v) {
            *acc += *z as f64;
        }
    }
    mean.iter_mut().for_each(|s| *s /= m as f64);
    let mut std = vec![0.0; n];
    for v in vectors {
        for ((acc, z), mu) in std.iter_mut().zip(v).zip(&mean) {
            *acc += (*z as f64 - mu).powi(2);
        }
    }
    std.iter_mut().for_each(|s| *s = (*s / m as f64).sqrt());
    Ok(EnsembleDegreeStats { mean, std, m })
}

/// All cells at one sweep value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    /// Over the successful cells; `None` if every cell failed.
    pub stats: Option<EnsembleDegreeStats>,
    pub cells: Vec<CellOutcome>,
    pub reference: Option<CellOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// 0-based index of the varied oscillator.
    pub target: usize,
    pub n_osc: usize,
    pub ensemble_size: usize,
    pub ic_hash: String,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn failed_cells(&self) -> usize {
        self.points
            .iter()
            .flat_map(|p| p.cells.iter().chain(&p.reference))
            .filter(|c| c.ok().is_none())
            .count()
    }

    pub fn total_cells(&self) -> usize {
        self.points.iter().map(|p| p.cells.len() + p.reference.iter().count()).sum()
    }
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    sweep_with(cfg, Execution::Parallel)
}

/// Runs every `(value, ic)` cell of the sweep. Failed cells are recorded
/// and left out of the statistics.
pub fn sweep_with(cfg: &ExperimentConfig, exec: Execution) -> Result<SweepResult> {
    cfg.validate()?;
    let n = cfg.model.n_osc;
    let ics = sample_initial_conditions(cfg.ensemble_size, cfg.ic_low, cfg.ic_high, 2 * n, cfg.seed)?;
    let hash = ic_hash(&ics);
    let reference = cfg.reference_state()?;
    let target = cfg.target();

    let mut jobs: Vec<(usize, usize)> = Vec::new();
    for vi in 0..cfg.sweep_values.len() {
        jobs.extend((0..ics.len()).map(|k| (vi, k)));
        if reference.is_some() {
            jobs.push((vi, REFERENCE_IC));
        }
    }
    let run = |&(vi, k): &(usize, usize)| -> CellOutcome {
        let x0 = if k == REFERENCE_IC {
            reference.as_ref().expect("reference job without reference state")
        } else {
            &ics[k]
        };
        let mut rng = cell_rng(cfg.seed, vi, k);
        let outcome = perturb_params(&cfg.model.with_mass(target, cfg.sweep_values[vi]), cfg.param_jitter, &mut rng)
            .and_then(|p| run_case_with(&p, x0, cfg, &mut rng, Execution::Sequential));
        match outcome {
            Ok(case) => CellOutcome::Ok(case.summary()),
            Err(e) => CellOutcome::Failed {
                numerical: e.is_numerical(),
                error: e.to_string(),
            },
        }
    };
    let outcomes = run_jobs(&jobs, run, exec);

    let per_value = ics.len() + usize::from(reference.is_some());
    let mut points = Vec::with_capacity(cfg.sweep_values.len());
    for (vi, chunk) in outcomes.chunks(per_value).enumerate() {
        let cells = chunk[..ics.len()].to_vec();
        let degrees: Vec<Vec<usize>> = cells.iter().filter_map(|c| c.ok().map(|s| s.in_degrees.clone())).collect();
        let stats = if degrees.is_empty() { None } else { Some(degree_stats(&degrees)?) };
        points.push(SweepPoint {
            value: cfg.sweep_values[vi],
            stats,
            cells,
            reference: reference.as_ref().map(|_| chunk[ics.len()].clone()),
        });
    }
    Ok(SweepResult {
        target,
        n_osc: n,
        ensemble_size: ics.len(),
        ic_hash: hash,
        points,
    })
}

fn run_jobs<J: Sync, T: Send>(jobs: &[J], f: impl Fn(&J) -> T + Sync + Send, exec: Execution) -> Vec<T> {
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            jobs.par_iter().map(f).collect()
        }
        _ => jobs.iter().map(f).collect(),
    }
}

/// Onset values of one node along the downward scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeOnset {
    pub node: usize,
    /// Largest value at which any single case gives in-degree 0.
    pub first_zero: Option<f64>,
    /// Largest value at which the ensemble mean in-degree is 0.
    pub mean_zero: Option<f64>,
    /// Largest value at which the node is a singleton SCC for the reference IC.
    pub scc_split: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    /// 0-based node whose mean in-degree reaches zero first on the downward scan.
    pub node: Option<usize>,
    pub m4_mean_zero: Option<f64>,
    pub m4_first_zero: Option<f64>,
    pub m4_scc_split: Option<f64>,
    /// Largest value with any localized case.
    pub m4_first_localized: Option<f64>,
    /// Largest value at and below which every case is localized.
    pub m4_always_localized: Option<f64>,
    pub failed_cells: usize,
    pub nodes: Vec<NodeOnset>,
}

fn order_desc(sweep: &SweepResult) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sweep.points.len()).collect();
    order.sort_by(|a, b| sweep.points[*b].value.total_cmp(&sweep.points[*a].value));
    order
}

pub fn detect_onset(sweep: &SweepResult) -> DetectionReport {
    let order = order_desc(sweep);
    let nodes: Vec<NodeOnset> = (0..sweep.n_osc)
        .map(|node| {
            let first = |pred: &dyn Fn(&SweepPoint) -> bool| {
                order.iter().map(|i| &sweep.points[*i]).find(|p| pred(p)).map(|p| p.value)
            };
            NodeOnset {
                node,
                first_zero: first(&|p| p.cells.iter().filter_map(CellOutcome::ok).any(|c| c.in_degrees[node] == 0)),
                mean_zero: first(&|p| p.stats.as_ref().is_some_and(|s| s.mean[node] == 0.0)),
                scc_split: first(&|p| {
                    p.reference
                        .as_ref()
                        .and_then(CellOutcome::ok)
                        .is_some_and(|c| c.scc.is_singleton(node))
                }),
            }
        })
        .collect();

    let flagged = nodes
        .iter()
        .filter_map(|o| o.mean_zero.map(|v| (o.node, v)))
        .fold(None::<(usize, f64)>, |best, (n, v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((n, v)),
        })
        .map(|(n, _)| n);

    let labels = |p: &SweepPoint| p.cells.iter().filter_map(CellOutcome::ok).map(|c| c.localized.is_some()).collect::<Vec<_>>();
    let first_localized = order
        .iter()
        .map(|i| &sweep.points[*i])
        .find(|p| labels(p).iter().any(|l| *l))
        .map(|p| p.value);
    let mut always_localized = None;
    for i in order.iter().rev() {
        let l = labels(&sweep.points[*i]);
        if l.is_empty() || !l.iter().all(|x| *x) {
            break;
        }
        always_localized = Some(sweep.points[*i].value);
    }

    let pick = |f: fn(&NodeOnset) -> Option<f64>| flagged.and_then(|n| f(&nodes[n]));
    DetectionReport {
        node: flagged,
        m4_mean_zero: pick(|o| o.mean_zero),
        m4_first_zero: pick(|o| o.first_zero),
        m4_scc_split: pick(|o| o.scc_split),
        m4_first_localized: first_localized,
        m4_always_localized: always_localized,
        failed_cells: sweep.failed_cells(),
        nodes,
    }
}

/// Which initial condition an SCC trace follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceSource {
    Ensemble(usize),
    Reference,
}

/// Component index of every node at every sweep value; `None` for failed cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SccTrace {
    pub values: Vec<f64>,
    pub membership: Vec<Option<Vec<usize>>>,
}

pub fn scc_trace(sweep: &SweepResult, source: TraceSource) -> Result<SccTrace> {
    let mut membership = Vec::with_capacity(sweep.points.len());
    for p in &sweep.points {
        let cell = match source {
            TraceSource::Ensemble(k) => p.cells.get(k).ok_or_else(|| {
                Error::invalid("ic_index", format!("{k} out of range for {} cases", p.cells.len()))
            })?,
            TraceSource::Reference => p
                .reference
                .as_ref()
                .ok_or_else(|| Error::invalid("reference_ic", "sweep has no reference initial condition"))?,
        };
        membership.push(cell.ok().map(|c| c.scc.component_of.clone()));
    }
    Ok(SccTrace {
        values: sweep.points.iter().map(|p| p.value).collect(),
        membership,
    })
}

/// Number of output samples a case of this configuration produces.
pub fn samples_per_case(cfg: &ExperimentConfig) -> usize {
    sample_count(cfg.t_end, cfg.dt_out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            sweep_values: vec![1.0],
            ensemble_size: 1,
            ..Default::default()
        }
    }

    #[test]
    fn grid_and_fixtures() {
        let g = linear_grid(1.0, 0.8, 100);
        assert_eq!(g.len(), 100);
        assert_eq!((g[0], g[99]), (1.0, 0.8));
        assert!(g.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(fixture_ic("X0A").unwrap().0[8], 0.06037291);
        assert_eq!(fixture_ic("x0c").unwrap().0.len(), 20);
        assert!(fixture_ic("x0d").is_none());
    }

    #[test]
    fn initial_conditions() {
        let a = sample_initial_conditions(5, 0.0, 0.1, 20, 3).unwrap();
        assert_eq!(a, sample_initial_conditions(5, 0.0, 0.1, 20, 3).unwrap());
        assert!(a.iter().flat_map(|s| &s.0).all(|v| (0.0..0.1).contains(v)));
        assert_ne!(a, sample_initial_conditions(5, 0.0, 0.1, 20, 4).unwrap());
        assert!(sample_initial_conditions(5, 0.1, 0.1, 20, 3).is_err());
        assert_eq!(ic_hash(&a), ic_hash(&a.clone()));
        assert_ne!(ic_hash(&a), ic_hash(&a[1..]));
    }

    #[test]
    fn large_sample_mean() {
        let a = sample_initial_conditions(10_000, 0.0, 1.0, 1, 9).unwrap();
        let mean = a.iter().map(|s| s.0[0]).sum::<f64>() / 10_000.0;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    fn flat_trajectory(rows: Vec<Vec<f64>>) -> Trajectory {
        let t = rows[0].len();
        Trajectory {
            dt: 0.05,
            times: (0..t).map(|k| k as f64 * 0.05).collect(),
            velocities: rows.iter().map(|r| vec![0.0; r.len()]).collect(),
            displacements: rows,
        }
    }

    #[test]
    fn noise_levels() {
        let unit: Vec<f64> = (0..201).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let tr = flat_trajectory(vec![unit.clone(), unit.clone()]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(add_noise(&tr, 0.0, &mut rng).unwrap(), tr);
        let noisy = add_noise(&tr, 0.05, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(noisy, add_noise(&tr, 0.05, &mut ChaCha8Rng::seed_from_u64(5)).unwrap());
        let added: Vec<f64> = noisy.displacements[0].iter().zip(&unit).map(|(a, b)| a - b).collect();
        let sigma = population_std(&added);
        assert!((sigma - 0.05).abs() < 0.005, "{sigma}");
        assert_eq!(noisy.velocities, tr.velocities);
        assert!(add_noise(&tr, -0.1, &mut rng).is_err());
    }

    #[test]
    fn oracle_picks_scaled_row() {
        let base: Vec<f64> = (0..100).map(|k| (k as f64 * 0.3).sin()).collect();
        let mut rows = vec![base.clone(); 6];
        rows[2] = base.iter().map(|v| 5.0 * v).collect();
        let oracle = OracleConfig::default();
        assert_eq!(localization_oracle(&flat_trajectory(rows), &oracle).unwrap(), Some(2));
        assert_eq!(localization_oracle(&flat_trajectory(vec![base; 6]), &oracle).unwrap(), None);
        let short = flat_trajectory(vec![vec![1.0]; 3]);
        assert!(localization_oracle(&short, &oracle).is_err());
    }

    #[test]
    fn stats_by_hand() {
        let s = degree_stats(&[vec![3, 1]]).unwrap();
        assert_eq!((s.mean.clone(), s.std.clone(), s.m), (vec![3.0, 1.0], vec![0.0, 0.0], 1));
        let s = degree_stats(&[vec![0, 4], vec![2, 4]]).unwrap();
        assert_eq!(s.mean, vec![1.0, 4.0]);
        assert_eq!(s.std, vec![1.0, 0.0]);
        assert!(degree_stats(&[]).is_err());
        assert!(degree_stats(&[vec![1], vec![1, 2]]).is_err());
    }

    #[test]
    fn decoupled_identical_pair() {
        let mut model = ModelParams::uniform(2);
        model.k_coupling = 0.0;
        let cfg = ExperimentConfig {
            model: model.clone(),
            target_index: 1,
            reference_ic: None,
            ..small_cfg()
        };
        let x0 = StateVector(vec![0.03, 0.03, 0.0, 0.0]);
        let case = run_case(&model, &x0, &cfg, &mut cell_rng(1, 0, 0)).unwrap();
        assert_eq!(case.in_degrees, vec![1, 1]);
        assert_eq!(case.network.edge_count(), 2);
        assert_eq!(case.scc.len(), 1);
    }

    #[test]
    fn single_cell_sweep() {
        let cfg = small_cfg();
        let r = sweep(&cfg).unwrap();
        assert_eq!(r.points.len(), 1);
        let p = &r.points[0];
        let cell = p.cells[0].ok().unwrap();
        let stats = p.stats.as_ref().unwrap();
        assert_eq!(stats.mean, cell.in_degrees.iter().map(|z| *z as f64).collect::<Vec<_>>());
        assert!(stats.std.iter().all(|s| *s == 0.0));
        assert_eq!(cell.in_degrees.iter().sum::<usize>(), cell.edge_count);
        assert!(p.reference.as_ref().unwrap().ok().is_some());
        assert_eq!(scc_trace(&r, TraceSource::Reference).unwrap().membership.len(), 1);
        assert!(scc_trace(&r, TraceSource::Ensemble(1)).is_err());
        let seq = sweep_with(&cfg, Execution::Sequential).unwrap();
        assert_eq!(seq, r);
    }

    fn synthetic(values: &[f64], deg4: impl Fn(f64, usize) -> usize) -> SweepResult {
        let n = 5;
        let points = values
            .iter()
            .map(|&v| {
                let cells: Vec<CellOutcome> = (0..3)
                    .map(|k| {
                        let mut z = vec![4; n];
                        z[3] = deg4(v, k);
                        CellOutcome::Ok(CaseSummary {
                            edge_count: z.iter().sum(),
                            in_degrees: z,
                            scc: SccPartition {
                                components: vec![(0..n).collect()],
                                component_of: vec![0; n],
                            },
                            localized: (v < 0.85).then_some(3),
                        })
                    })
                    .collect();
                let degrees: Vec<Vec<usize>> = cells.iter().map(|c| c.ok().unwrap().in_degrees.clone()).collect();
                SweepPoint {
                    value: v,
                    stats: Some(degree_stats(&degrees).unwrap()),
                    cells,
                    reference: None,
                }
            })
            .collect();
        SweepResult {
            target: 3,
            n_osc: n,
            ensemble_size: 3,
            ic_hash: String::new(),
            points,
        }
    }

    #[test]
    fn onset_on_constructed_sweep() {
        let grid = linear_grid(1.0, 0.8, 11);
        let r = detect_onset(&synthetic(&grid, |v, k| if v < 0.9 || (k == 0 && v < 0.95) { 0 } else { 4 }));
        assert_eq!(r.node, Some(3));
        assert_relative_eq!(r.m4_mean_zero.unwrap(), 0.88);
        assert_relative_eq!(r.m4_first_zero.unwrap(), 0.94);
        assert_eq!(r.m4_scc_split, None);
        assert_relative_eq!(r.m4_always_localized.unwrap(), 0.84);
        assert_relative_eq!(r.m4_first_localized.unwrap(), 0.84);

        let none = detect_onset(&synthetic(&grid, |_, _| 4));
        assert_eq!((none.node, none.m4_mean_zero, none.m4_first_zero), (None, None, None));
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let bad = [
            ExperimentConfig { ensemble_size: 0, ..Default::default() },
            ExperimentConfig { ic_low: 0.2, ..Default::default() },
            ExperimentConfig { target_index: 0, ..Default::default() },
            ExperimentConfig { target_index: 11, ..Default::default() },
            ExperimentConfig { sweep_values: vec![], ..Default::default() },
            ExperimentConfig { sweep_values: vec![1.0, -0.5], ..Default::default() },
            ExperimentConfig { reference_ic: Some("x9".into()), ..Default::default() },
            ExperimentConfig { param_jitter: 1.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
