//! Flat TOML configuration. Sections mirror the library configs:
//! `[model]`, `[experiment]`, `[recurrence]`, `[integrator]`, `[oracle]`,
//! `[run]`. Every key is optional and falls back to the library default.

use std::path::Path;

use locnet::experiment::{linear_grid, ExperimentConfig};
use locnet::model::StiffnessLayout;
use locnet::recurrence::{Metric, ThresholdMode, ThresholdScope};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// `section.key`, or the file path for I/O and syntax errors.
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config key `{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(key: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.into(),
        message: message.into(),
    }
}

/// Everything a run needs besides the command-line flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    /// Worker threads; 0 lets rayon decide, 1 runs sequentially.
    pub threads: usize,
    /// Persist velocity columns in trajectory CSVs.
    pub write_velocities: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentConfig::default(),
            threads: 0,
            write_velocities: true,
        }
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    (
        "model",
        &[
            "n_osc",
            "masses",
            "alpha",
            "k_lin",
            "k_coupling",
            "k_cubic",
            "force_amp",
            "force_freq",
            "stiffness_layout",
        ],
    ),
    (
        "experiment",
        &[
            "sweep_values",
            "sweep_start",
            "sweep_end",
            "sweep_count",
            "target_index",
            "ensemble_size",
            "ic_low",
            "ic_high",
            "seed",
            "t_end",
            "dt_out",
            "noise_level",
            "param_jitter",
            "reference_ic",
        ],
    ),
    (
        "recurrence",
        &[
            "embed_dim",
            "embed_delay",
            "threshold_mode",
            "epsilon",
            "recurrence_rate",
            "threshold_scope",
            "metric",
            "direction_tol",
        ],
    ),
    ("integrator", &["rel_tol", "abs_tol", "max_steps"]),
    ("oracle", &["ratio", "window"]),
    ("run", &["threads", "write_velocities"]),
];

struct Section<'a> {
    name: &'a str,
    table: Option<&'a Table>,
}

impl Section<'_> {
    fn key(&self, k: &str) -> String {
        format!("{}.{k}", self.name)
    }

    fn get(&self, k: &str) -> Option<&Value> {
        self.table.and_then(|t| t.get(k))
    }

    fn f64(&self, k: &str, slot: &mut f64) -> Result<(), ConfigError> {
        if let Some(v) = self.get(k) {
            *slot = as_f64(v).ok_or_else(|| err(self.key(k), format!("expected a number, got {v}")))?;
        }
        Ok(())
    }

    fn usize(&self, k: &str, slot: &mut usize) -> Result<(), ConfigError> {
        if let Some(v) = self.get(k) {
            *slot = v
                .as_integer()
                .and_then(|i| usize::try_from(i).ok())
                .ok_or_else(|| err(self.key(k), format!("expected a non-negative integer, got {v}")))?;
        }
        Ok(())
    }

    fn bool(&self, k: &str, slot: &mut bool) -> Result<(), ConfigError> {
        if let Some(v) = self.get(k) {
            *slot = v
                .as_bool()
                .ok_or_else(|| err(self.key(k), format!("expected true or false, got {v}")))?;
        }
        Ok(())
    }

    fn choice<T: Copy>(&self, k: &str, options: &[(&str, T)], slot: &mut T) -> Result<(), ConfigError> {
        if let Some(v) = self.get(k) {
            let names: Vec<&str> = options.iter().map(|o| o.0).collect();
            let s = v
                .as_str()
                .ok_or_else(|| err(self.key(k), format!("expected one of {names:?}, got {v}")))?;
            *slot = options
                .iter()
                .find(|o| o.0 == s)
                .map(|o| o.1)
                .ok_or_else(|| err(self.key(k), format!("expected one of {names:?}, got \"{s}\"")))?;
        }
        Ok(())
    }

    fn f64_list(&self, k: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(v) = self.get(k) else { return Ok(None) };
        let arr = v
            .as_array()
            .ok_or_else(|| err(self.key(k), format!("expected an array of numbers, got {v}")))?;
        arr.iter()
            .map(|x| as_f64(x).ok_or_else(|| err(self.key(k), format!("expected a number, got {x}"))))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    /// A number applies to every oscillator; an array gives one value each.
    fn per_node(&self, k: &str, n: usize, slot: &mut Vec<f64>) -> Result<(), ConfigError> {
        match self.get(k) {
            None => *slot = vec![slot.first().copied().unwrap_or(0.0); n],
            Some(v) if as_f64(v).is_some() => *slot = vec![as_f64(v).unwrap(); n],
            Some(_) => {
                let list = self.f64_list(k)?.unwrap_or_default();
                if list.len() != n {
                    return Err(err(self.key(k), format!("expected {n} values (n_osc), got {}", list.len())));
                }
                *slot = list;
            }
        }
        Ok(())
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| err(path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| {
            let what = e.message().to_string();
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            let key = text.lines().nth(line.saturating_sub(1)).and_then(|l| l.split('=').next());
            err(
                key.map(str::trim).filter(|k| !k.is_empty()).unwrap_or("<syntax>"),
                format!("line {line}: {what}"),
            )
        })?;
        for (name, value) in &root {
            let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| s == name) else {
                return Err(err(name.as_str(), "unknown section or top-level key"));
            };
            let table = value
                .as_table()
                .ok_or_else(|| err(name.as_str(), "expected a [section]"))?;
            if let Some(k) = table.keys().find(|k| !keys.contains(&k.as_str())) {
                return Err(err(format!("{name}.{k}"), format!("unknown key; known keys: {}", keys.join(", "))));
            }
        }
        let sec = |name| Section {
            name,
            table: root.get(name).and_then(Value::as_table),
        };

        let mut out = RunConfig::default();
        let e = &mut out.experiment;

        let s = sec("model");
        let m = &mut e.model;
        s.usize("n_osc", &mut m.n_osc)?;
        let n = m.n_osc;
        s.per_node("masses", n, &mut m.masses)?;
        s.f64("alpha", &mut m.alpha)?;
        s.per_node("k_lin", n, &mut m.k_lin)?;
        s.f64("k_coupling", &mut m.k_coupling)?;
        s.per_node("k_cubic", n, &mut m.k_cubic)?;
        s.f64("force_amp", &mut m.force_amp)?;
        s.f64("force_freq", &mut m.force_freq)?;
        s.choice(
            "stiffness_layout",
            &[("grounded", StiffnessLayout::Grounded), ("doubled", StiffnessLayout::Doubled)],
            &mut m.stiffness_layout,
        )?;

        let s = sec("experiment");
        if let Some(values) = s.f64_list("sweep_values")? {
            if ["sweep_start", "sweep_end", "sweep_count"].iter().any(|k| s.get(k).is_some()) {
                return Err(err(s.key("sweep_values"), "give either sweep_values or sweep_start/end/count"));
            }
            e.sweep_values = values;
        } else {
            let (mut a, mut b, mut c) = (1.0, 0.8, 100);
            s.f64("sweep_start", &mut a)?;
            s.f64("sweep_end", &mut b)?;
            s.usize("sweep_count", &mut c)?;
            if c == 0 {
                return Err(err(s.key("sweep_count"), "must be at least 1"));
            }
            e.sweep_values = linear_grid(a, b, c);
        }
        s.usize("target_index", &mut e.target_index)?;
        s.usize("ensemble_size", &mut e.ensemble_size)?;
        s.f64("ic_low", &mut e.ic_low)?;
        s.f64("ic_high", &mut e.ic_high)?;
        let mut seed = e.seed as usize;
        s.usize("seed", &mut seed)?;
        e.seed = seed as u64;
        s.f64("t_end", &mut e.t_end)?;
        s.f64("dt_out", &mut e.dt_out)?;
        s.f64("noise_level", &mut e.noise_level)?;
        s.f64("param_jitter", &mut e.param_jitter)?;
        if let Some(v) = s.get("reference_ic") {
            let name = v
                .as_str()
                .ok_or_else(|| err(s.key("reference_ic"), format!("expected a fixture name or \"none\", got {v}")))?;
            e.reference_ic = (name != "none").then(|| name.to_string());
        }

        let s = sec("recurrence");
        let r = &mut e.recurrence;
        s.usize("embed_dim", &mut r.embed_dim)?;
        s.usize("embed_delay", &mut r.embed_delay)?;
        s.choice(
            "threshold_mode",
            &[
                ("fixed-recurrence-rate", ThresholdMode::FixedRecurrenceRate),
                ("fixed-epsilon", ThresholdMode::FixedEpsilon),
            ],
            &mut r.threshold_mode,
        )?;
        s.f64("epsilon", &mut r.epsilon)?;
        s.f64("recurrence_rate", &mut r.recurrence_rate)?;
        s.choice(
            "threshold_scope",
            &[("per-matrix", ThresholdScope::PerMatrix), ("shared", ThresholdScope::Shared)],
            &mut r.threshold_scope,
        )?;
        s.choice(
            "metric",
            &[
                ("euclidean", Metric::Euclidean),
                ("supremum", Metric::Supremum),
            ],
            &mut r.metric,
        )?;
        s.f64("direction_tol", &mut r.direction_tol)?;

        let s = sec("integrator");
        s.f64("rel_tol", &mut e.integrator.rel_tol)?;
        s.f64("abs_tol", &mut e.integrator.abs_tol)?;
        s.usize("max_steps", &mut e.integrator.max_steps)?;

        let s = sec("oracle");
        s.f64("ratio", &mut e.oracle.ratio)?;
        s.f64("window", &mut e.oracle.window)?;

        let s = sec("run");
        s.usize("threads", &mut out.threads)?;
        s.bool("write_velocities", &mut out.write_velocities)?;

        out.validate()?;
        Ok(out)
    }

    /// Library validation, with the offending field mapped to its config key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.experiment.validate().map_err(|e| match e {
            locnet::Error::InvalidParameter { name, reason } => err(config_key(name), reason),
            other => err("config", other.to_string()),
        })
    }

    /// Canonical TOML for the manifest; parses back to the same config.
    pub fn to_toml(&self) -> String {
        let e = &self.experiment;
        let m = &e.model;
        let r = &e.recurrence;
        let list = |v: &[f64]| format!("[{}]", v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", "));
        let layout = match m.stiffness_layout {
            StiffnessLayout::Grounded => "grounded",
            StiffnessLayout::Doubled => "doubled",
        };
        let mode = match r.threshold_mode {
            ThresholdMode::FixedRecurrenceRate => "fixed-recurrence-rate",
            ThresholdMode::FixedEpsilon => "fixed-epsilon",
        };
        let scope = match r.threshold_scope {
            ThresholdScope::PerMatrix => "per-matrix",
            ThresholdScope::Shared => "shared",
        };
        let metric = match r.metric {
            Metric::Euclidean => "euclidean",
            Metric::Supremum => "supremum",
        };
        format!(
            "[model]\nn_osc = {}\nmasses = {}\nalpha = {:?}\nk_lin = {}\nk_coupling = {:?}\nk_cubic = {}\n\
             force_amp = {:?}\nforce_freq = {:?}\nstiffness_layout = \"{layout}\"\n\n\
             [experiment]\nsweep_values = {}\ntarget_index = {}\nensemble_size = {}\nic_low = {:?}\nic_high = {:?}\n\
             seed = {}\nt_end = {:?}\ndt_out = {:?}\nnoise_level = {:?}\nparam_jitter = {:?}\nreference_ic = \"{}\"\n\n\
             [recurrence]\nembed_dim = {}\nembed_delay = {}\nthreshold_mode = \"{mode}\"\nepsilon = {:?}\n\
             recurrence_rate = {:?}\nthreshold_scope = \"{scope}\"\nmetric = \"{metric}\"\ndirection_tol = {:?}\n\n\
             [integrator]\nrel_tol = {:?}\nabs_tol = {:?}\nmax_steps = {}\n\n\
             [oracle]\nratio = {:?}\nwindow = {:?}\n\n\
             [run]\nthreads = {}\nwrite_velocities = {}\n",
            m.n_osc,
            list(&m.masses),
            m.alpha,
            list(&m.k_lin),
            m.k_coupling,
            list(&m.k_cubic),
            m.force_amp,
            m.force_freq,
            list(&e.sweep_values),
            e.target_index,
            e.ensemble_size,
            e.ic_low,
            e.ic_high,
            e.seed,
            e.t_end,
            e.dt_out,
            e.noise_level,
            e.param_jitter,
            e.reference_ic.as_deref().unwrap_or("none"),
            r.embed_dim,
            r.embed_delay,
            r.epsilon,
            r.recurrence_rate,
            r.direction_tol,
            e.integrator.rel_tol,
            e.integrator.abs_tol,
            e.integrator.max_steps,
            e.oracle.ratio,
            e.oracle.window,
            self.threads,
            self.write_velocities,
        )
    }
}

/// Maps a library parameter name onto the config key that sets it.
fn config_key(name: &str) -> String {
    let section = match name {
        "n_osc" | "masses" | "alpha" | "k_lin" | "k_cubic" | "stiffness" | "forcing" => "model",
        "embed_dim" | "embed_delay" | "epsilon" | "recurrence_rate" | "direction_tol" => "recurrence",
        "rel_tol" | "abs_tol" | "max_steps" => "integrator",
        "ratio" | "window" => "oracle",
        _ => "experiment",
    };
    format!("{section}.{name}")
}

/// `"a,b"` as an initial-condition range.
pub fn parse_range(s: &str) -> Result<(f64, f64), ConfigError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || err("--ic-range", format!("expected `low,high`, got {s:?}"));
    match parts.as_slice() {
        [a, b] => Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?)),
        _ => Err(bad()),
    }
}

/// `start:end:count` for an evenly spaced grid, or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, ConfigError> {
    let bad = || err("--grid", format!("expected `start:end:count` or `v1,v2,...`, got {s:?}"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [a, b, c] = parts.as_slice() else { return Err(bad()) };
        let count: usize = c.parse().map_err(|_| bad())?;
        if count == 0 {
            return Err(bad());
        }
        Ok(linear_grid(a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?, count))
    } else {
        s.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect()
    }
}
