mod charts;
mod config;
mod outputs;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use locnet::calibration::{fixture_scc_counts, integrator_fixture, master_slave_fixture};
use locnet::experiment::{
    add_noise, cell_rng, detect_onset, fixture_ic, sweep_with, DetectionReport, Execution,
};
use locnet::graph::{in_degrees, strongly_connected_components};
use locnet::integrator::integrate;
use locnet::model::StateVector;
use locnet::netinfer::{infer_network_with, DRIVER_SIGN};
use locnet::output;

use crate::charts::Marker;
use crate::config::{parse_grid, parse_range, ConfigError, RunConfig};
use crate::outputs::{read_manifest, OutputSet};

#[derive(Parser)]
#[command(name = "locnet", version, about = "Early warning of vibration localization from functional networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the oscillator ring and write the trajectory CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Initial condition: a fixture name (x0a, x0b, x0c) or 2N comma-separated values.
        #[arg(long, default_value = "x0a")]
        ic: String,
        /// Mass of the target oscillator (defaults to the configured mass).
        #[arg(long)]
        m4: Option<f64>,
    },
    /// Infer the functional network from a trajectory CSV.
    Network {
        #[command(flatten)]
        common: Common,
        /// Trajectory CSV; columns named x* are used, or all but a leading t.
        #[arg(long)]
        input: PathBuf,
        /// Dead band on the transitivity difference.
        #[arg(long)]
        tau: Option<f64>,
        /// Target recurrence rate.
        #[arg(long)]
        rate: Option<f64>,
    },
    /// Run the mass sweep and write degrees, statistics, SCCs, report and charts.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Re-render the charts of an existing sweep directory.
    Report {
        /// Directory holding stats.csv and scc.json.
        #[arg(long, default_value = "out")]
        dir: PathBuf,
    },
    /// Run the calibration fixtures and print the pinned sign convention.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Dead band override for the fixtures.
        #[arg(long)]
        tau: Option<f64>,
        /// TOML file of named initial conditions (`x0a = [...]`) to use instead of the built-in ones.
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Measurement noise as a fraction of each series' std.
    #[arg(long)]
    noise: Option<f64>,
    /// Relative parameter jitter per case.
    #[arg(long)]
    jitter: Option<f64>,
    /// Duration of each simulated series.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Initial-condition range `low,high`.
    #[arg(long = "ic-range")]
    ic_range: Option<String>,
    /// Sweep grid `start:end:count` or `v1,v2,...`.
    #[arg(long)]
    grid: Option<String>,
    /// Worker threads (1 runs sequentially, 0 uses every core).
    #[arg(long)]
    parallel: Option<usize>,
}

enum Failure {
    Usage(String),
    Numerical(String),
    Validation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Validation(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) | Failure::Validation(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<locnet::Error> for Failure {
    fn from(e: locnet::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

type Outcome = Result<(), Failure>;

impl Common {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let e = &mut cfg.experiment;
        if let Some(s) = self.seed {
            e.seed = s;
        }
        if let Some(v) = self.noise {
            e.noise_level = v;
        }
        if let Some(v) = self.jitter {
            e.param_jitter = v;
        }
        if let Some(v) = self.t_end {
            e.t_end = v;
        }
        if let Some(r) = &self.ic_range {
            (e.ic_low, e.ic_high) = parse_range(r)?;
        }
        if let Some(g) = &self.grid {
            e.sweep_values = parse_grid(g)?;
        }
        if let Some(p) = self.parallel {
            cfg.threads = p;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs `f` with the requested degree of parallelism.
fn with_threads<T: Send>(threads: usize, f: impl FnOnce(Execution) -> T + Send) -> Result<T, Failure> {
    match threads {
        1 => Ok(f(Execution::Sequential)),
        0 => Ok(f(Execution::Parallel)),
        n => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(|| f(Execution::Parallel)))
            .map_err(|e| Failure::Usage(format!("--parallel {n}: {e}"))),
    }
}

fn parse_ic(spec: &str, n_osc: usize) -> Result<StateVector, Failure> {
    let x0 = match fixture_ic(spec) {
        Some(x) => x,
        None => {
            let values: Result<Vec<f64>, _> = spec.split(',').map(|v| v.trim().parse::<f64>()).collect();
            StateVector(values.map_err(|_| {
                Failure::Usage(format!("--ic: `{spec}` is neither a fixture name (x0a, x0b, x0c) nor a list of numbers"))
            })?)
        }
    };
    x0.check(n_osc)
        .map_err(|e| Failure::Usage(format!("--ic: {e}")))?;
    Ok(x0)
}

fn simulate(common: &Common, ic: &str, m4: Option<f64>) -> Outcome {
    let cfg = common.resolve()?;
    let e = &cfg.experiment;
    let mut params = e.model.clone();
    if let Some(m) = m4 {
        params = params.with_mass(e.target(), m);
        params.validate()?;
    }
    let x0 = parse_ic(ic, params.n_osc)?;
    let mut tr = integrate(&params, &x0, e.t_end, e.dt_out, &e.integrator)?;
    if e.noise_level > 0.0 {
        tr = add_noise(&tr, e.noise_level, &mut cell_rng(e.seed, 0, 0))?;
    }
    let mut set = OutputSet::create(&common.out, "simulate", e.seed, cfg.to_toml()).map_err(|x| io_failure(&common.out, x))?;
    let path = set
        .write("trajectory.csv", &output::trajectory_csv_with(&tr, cfg.write_velocities))
        .map_err(|x| io_failure(&common.out, x))?;
    set.finish().map_err(|x| io_failure(&common.out, x))?;
    println!("wrote {} ({} samples)", path.display(), tr.len());
    Ok(())
}

fn network(common: &Common, input: &Path, tau: Option<f64>, rate: Option<f64>) -> Outcome {
    let mut cfg = common.resolve()?;
    let rec = &mut cfg.experiment.recurrence;
    if let Some(t) = tau {
        rec.direction_tol = t;
    }
    if let Some(r) = rate {
        rec.recurrence_rate = r;
    }
    rec.validate()?;
    let text = std::fs::read_to_string(input).map_err(|e| io_failure(input, e))?;
    let table = output::parse_trajectory_csv(&text).map_err(|e| Failure::Usage(format!("{}: {e}", input.display())))?;
    let rec = cfg.experiment.recurrence;
    let inf = with_threads(cfg.threads, |exec| infer_network_with(&table.series, &rec, exec))?.map_err(|e| match e {
        locnet::Error::DegenerateSeries { node } => Failure::Numerical(format!(
            "column `{}` of {} is constant; no recurrence structure to compare",
            table.names[node],
            input.display()
        )),
        locnet::Error::TooFewSeries { got, .. } => {
            Failure::Usage(format!("{}: need at least 2 series, found {got}", input.display()))
        }
        other => other.into(),
    })?;
    let scc = strongly_connected_components(&inf.network);
    let mut json = inf.network.to_json();
    json["columns"] = serde_json::json!(table.names);
    json["in_degrees"] = serde_json::json!(in_degrees(&inf.network));
    json["scc"] = serde_json::json!(scc
        .components
        .iter()
        .map(|c| c.iter().map(|v| v + 1).collect::<Vec<_>>())
        .collect::<Vec<_>>());
    let mut json_text = serde_json::to_string_pretty(&json).expect("json values serialise");
    json_text.push('\n');

    let out = &common.out;
    let mut set = OutputSet::create(out, "network", cfg.experiment.seed, cfg.to_toml()).map_err(|e| io_failure(out, e))?;
    set.write("network.json", &json_text).map_err(|e| io_failure(out, e))?;
    set.write("edges.txt", &inf.network.to_edge_list()).map_err(|e| io_failure(out, e))?;
    set.write("pairs.csv", &output::pair_table_csv(&inf)).map_err(|e| io_failure(out, e))?;
    set.finish().map_err(|e| io_failure(out, e))?;
    println!(
        "{} nodes, {} edges, {} strongly connected component(s); outputs in {}",
        inf.network.n_nodes(),
        inf.network.edge_count(),
        scc.len(),
        out.display()
    );
    Ok(())
}

fn markers(report: &DetectionReport) -> Vec<Marker> {
    [
        ("first zero", report.m4_first_zero),
        ("mean zero", report.m4_mean_zero),
        ("always localized", report.m4_always_localized),
    ]
    .into_iter()
    .filter_map(|(label, v)| v.map(|value| Marker { label: label.into(), value }))
    .collect()
}

fn render_charts(set: &mut OutputSet, stats: &str, scc: &str, marks: &[Marker]) -> Outcome {
    let dir = set.dir().to_path_buf();
    let rows = output::parse_stats_csv(stats).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    set.write("indegree.svg", &charts::in_degree_chart(&rows, marks))
        .map_err(|e| io_failure(&dir, e))?;
    // A sweep without a reference IC has no trace to draw.
    if let Ok(trace) = output::parse_reference_trace(scc) {
        if trace.membership.iter().any(Option::is_some) {
            set.write("scc.svg", &charts::scc_chart(&trace)).map_err(|e| io_failure(&dir, e))?;
        }
    }
    Ok(())
}

fn sweep(common: &Common) -> Outcome {
    let cfg = common.resolve()?;
    let e = &cfg.experiment;
    let result = with_threads(cfg.threads, |exec| sweep_with(e, exec))??;
    let report = detect_onset(&result);
    let out = &common.out;
    let io = |x| io_failure(out, x);
    let mut set = OutputSet::create(out, "sweep", e.seed, cfg.to_toml()).map_err(io)?;
    let stats = output::stats_csv(&result);
    let scc = output::scc_json(&result);
    set.write("degrees.csv", &output::degrees_csv(&result)).map_err(io)?;
    set.write("stats.csv", &stats).map_err(io)?;
    set.write("scc.json", &scc).map_err(io)?;
    set.write("report.json", &output::report_json(&report)).map_err(io)?;
    render_charts(&mut set, &stats, &scc, &markers(&report))?;
    set.finish().map_err(io)?;

    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    match report.node {
        Some(n) => println!(
            "flagged node {}: first zero at m4 = {}, mean zero at m4 = {}, singleton SCC at m4 = {}",
            n + 1,
            fmt(report.m4_first_zero),
            fmt(report.m4_mean_zero),
            fmt(report.m4_scc_split)
        ),
        None => println!("no node reached a zero mean in-degree"),
    }
    println!(
        "oracle: first localized at m4 = {}, always localized below m4 = {}",
        fmt(report.m4_first_localized),
        fmt(report.m4_always_localized)
    );
    println!("outputs in {}", out.display());
    let failed = result.failed_cells();
    if failed > 0 {
        eprintln!("warning: {failed} of {} cells failed and were excluded:", result.total_cells());
        let mut shown = 0;
        for p in &result.points {
            for (k, c) in p.cells.iter().enumerate() {
                if let locnet::experiment::CellOutcome::Failed { error, .. } = c {
                    if shown < 10 {
                        eprintln!("  m4 = {}, ic {k}: {error}", p.value);
                    }
                    shown += 1;
                }
            }
        }
        if failed == result.total_cells() {
            return Err(Failure::Numerical("every sweep cell failed".into()));
        }
    }
    Ok(())
}

fn report(dir: &Path) -> Outcome {
    let read = |name: &str| {
        let p = dir.join(name);
        std::fs::read_to_string(&p).map_err(|e| io_failure(&p, e))
    };
    let stats = read("stats.csv")?;
    let scc = read("scc.json")?;
    let marks = match read("report.json") {
        Ok(text) => report_markers(&text),
        Err(_) => Vec::new(),
    };
    let previous = read_manifest(dir);
    let (seed, config, files) = match previous {
        Some(m) => (m.seed, m.config, m.files),
        None => (0, String::new(), Vec::new()),
    };
    let mut set = OutputSet::create(dir, "report", seed, config).map_err(|e| io_failure(dir, e))?;
    set.carry(files);
    render_charts(&mut set, &stats, &scc, &marks)?;
    set.finish().map_err(|e| io_failure(dir, e))?;
    println!("charts written to {}", dir.display());
    Ok(())
}

fn report_markers(text: &str) -> Vec<Marker> {
    let Ok(v) = serde_json::from_str::<serde_json::Value>(text) else {
        return Vec::new();
    };
    [
        ("first zero", "m4_first_zero"),
        ("mean zero", "m4_mean_zero"),
        ("always localized", "m4_always_localized"),
    ]
    .into_iter()
    .filter_map(|(label, key)| v[key].as_f64().map(|value| Marker { label: label.into(), value }))
    .collect()
}

fn load_fixture_file(path: &Path, n_osc: usize) -> Result<Vec<(String, StateVector)>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Failure::Usage(format!("{}: {}", path.display(), e.message())))?;
    let mut out = Vec::new();
    for (name, v) in &table {
        let values: Option<Vec<f64>> = v
            .as_array()
            .map(|a| a.iter().map(|x| x.as_float().or_else(|| x.as_integer().map(|i| i as f64))).collect())
            .and_then(|x| x);
        let x0 = StateVector(values.ok_or_else(|| {
            Failure::Usage(format!("{}: fixture `{name}` must be an array of numbers", path.display()))
        })?);
        x0.check(n_osc)
            .map_err(|e| Failure::Usage(format!("{}: fixture `{name}`: {e}", path.display())))?;
        out.push((name.clone(), x0));
    }
    if out.is_empty() {
        return Err(Failure::Usage(format!("{}: no fixtures defined", path.display())));
    }
    Ok(out)
}

fn validate(common: &Common, tau: Option<f64>, fixtures: Option<&Path>) -> Outcome {
    let mut cfg = common.resolve()?;
    if let Some(t) = tau {
        cfg.experiment.recurrence.direction_tol = t;
        cfg.experiment.recurrence.validate()?;
    }
    let e = &cfg.experiment;
    let custom = fixtures.map(|p| load_fixture_file(p, e.model.n_osc)).transpose()?;
    let mut failures = Vec::new();

    let ic = integrator_fixture(&e.integrator, 10.0)?;
    let ok = ic.max_rel_error < 1e-6 && ic.endpoint_shift < 1e-6;
    println!(
        "[{}] integrator vs analytic damped oscillator: max rel error {:.3e}, tolerance-halving shift {:.3e}",
        if ok { "pass" } else { "FAIL" },
        ic.max_rel_error,
        ic.endpoint_shift
    );
    if !ok {
        failures.push("integrator");
    }

    let ms = master_slave_fixture(&e.model, &e.recurrence, &e.integrator, 20, e.ic_high, e.t_end, e.seed)?;
    let ok = ms.passed();
    let (lo, hi) = ms.deltas.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), d| (a.min(*d), b.max(*d)));
    println!(
        "[{}] master/slave direction over {} ICs: delta in [{lo:.4}, {hi:.4}], observed sign {}, all classified master -> slave: {}",
        if ok { "pass" } else { "FAIL" },
        ms.deltas.len(),
        ms.observed_sign().map_or("mixed".into(), |s| format!("{s:+}")),
        ms.all_forward()
    );
    if !ok {
        failures.push("master/slave");
    }

    let sym = e.model.with_mass(e.target(), e.model.masses[0]);
    let counts: Vec<(String, usize)> = match &custom {
        None => fixture_scc_counts(&sym, &e.recurrence, &e.integrator, e.t_end, &["x0a", "x0b", "x0c"])?,
        Some(list) => list
            .iter()
            .map(|(name, x0)| {
                let tr = integrate(&sym, x0, e.t_end, e.dt_out, &e.integrator)?;
                let net = locnet::netinfer::infer_network(&tr.displacements, &e.recurrence)?.network;
                Ok((name.clone(), strongly_connected_components(&net).len()))
            })
            .collect::<locnet::Result<_>>()?,
    };
    let ok = counts.iter().all(|(_, c)| *c == 1);
    let shown: Vec<String> = counts.iter().map(|(n, c)| format!("{n}: {c}")).collect();
    println!(
        "[{}] symmetric ring forms a single SCC: {}",
        if ok { "pass" } else { "FAIL" },
        shown.join(", ")
    );
    if !ok {
        failures.push("symmetric single SCC");
    }

    println!(
        "sign convention: node i drives node j when {}(T^ij - T^ji) > tau (tau = {})",
        if DRIVER_SIGN > 0.0 { "+" } else { "-" },
        e.recurrence.direction_tol
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("failed fixtures: {}", failures.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Simulate { common, ic, m4 } => simulate(common, ic, *m4),
        Command::Network { common, input, tau, rate } => network(common, input, *tau, *rate),
        Command::Sweep { common } => sweep(common),
        Command::Report { dir } => report(dir),
        Command::Validate { common, tau, fixtures } => validate(common, *tau, fixtures.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
