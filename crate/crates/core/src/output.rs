//! Text serialisation of trajectories, networks and sweep results.
//!
//! Floats use Rust's shortest round-trip formatting, so every value parses
//! back to the identical `f64`. Nodes are labelled from 1 in every file;
//! initial conditions keep their 0-based ensemble index.

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::experiment::{CellOutcome, DetectionReport, SccTrace, SweepResult};
use crate::graph::SccPartition;
use crate::integrator::Trajectory;
use crate::netinfer::{CouplingDirection, NetworkInference};

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> serde_json::Value {
    v.map_or(serde_json::Value::Null, |x| json!(x))
}

/// `t,x1..xN,v1..vN`, one row per sample.
pub fn trajectory_csv(tr: &Trajectory) -> String {
    trajectory_csv_with(tr, true)
}

/// As [`trajectory_csv`], optionally without the velocity columns.
pub fn trajectory_csv_with(tr: &Trajectory, velocities: bool) -> String {
    let n = tr.n_osc();
    let mut out = String::from("t");
    for i in 1..=n {
        write!(out, ",x{i}").unwrap();
    }
    if velocities {
        for i in 1..=n {
            write!(out, ",v{i}").unwrap();
        }
    }
    out.push('\n');
    let vel: &[Vec<f64>] = if velocities { &tr.velocities } else { &[] };
    for k in 0..tr.len() {
        out.push_str(&fmt_f64(tr.times[k]));
        for row in tr.displacements.iter().chain(vel) {
            out.push(',');
            out.push_str(&fmt_f64(row[k]));
        }
        out.push('\n');
    }
    out
}

/// Displacement columns read back from a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementTable {
    pub times: Vec<f64>,
    /// Header names of the displacement columns, in file order.
    pub names: Vec<String>,
    pub series: Vec<Vec<f64>>,
}

/// Parses a trajectory CSV. Columns named `x…` are displacements; if there
/// are none, every column except a leading `t` is taken as one.
pub fn parse_trajectory_csv(text: &str) -> Result<DisplacementTable> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::invalid("csv", "empty file"))?
        .split(',')
        .map(|h| h.trim().to_string())
        .collect();
    let has_time = header.first().is_some_and(|h| h == "t");
    let mut cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with('x'))
        .map(|(c, _)| c)
        .collect();
    if cols.is_empty() {
        cols = (usize::from(has_time)..header.len()).collect();
    }
    let mut times = Vec::new();
    let mut series = vec![Vec::new(); cols.len()];
    for (ln, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != header.len() {
            return Err(Error::invalid(
                "csv",
                format!("row {} has {} fields, header has {}", ln + 2, fields.len(), header.len()),
            ));
        }
        let parse = |c: usize| {
            fields[c].parse::<f64>().map_err(|_| {
                Error::invalid("csv", format!("row {} column `{}`: not a number: {:?}", ln + 2, header[c], fields[c]))
            })
        };
        if has_time {
            times.push(parse(0)?);
        }
        for (s, &c) in series.iter_mut().zip(&cols) {
            s.push(parse(c)?);
        }
    }
    Ok(DisplacementTable {
        times,
        names: cols.iter().map(|c| header[*c].clone()).collect(),
        series,
    })
}

/// `i,j,t_ij,t_ji,delta,c_ij,c_ji,decision` for every pair.
pub fn pair_table_csv(inf: &NetworkInference) -> String {
    let mut out = String::from("i,j,t_ij,t_ji,delta,c_ij,c_ji,decision\n");
    for p in &inf.pairs {
        let decision = match p.direction {
            CouplingDirection::Forward => "forward",
            CouplingDirection::Backward => "backward",
            CouplingDirection::Bidirectional => "bidirectional",
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{decision}",
            p.i + 1,
            p.j + 1,
            fmt_f64(p.t_ij),
            fmt_f64(p.t_ji),
            fmt_f64(p.delta),
            fmt_f64(p.c_ij),
            fmt_f64(p.c_ji),
        )
        .unwrap();
    }
    out
}

/// `m4,ic_index,node,in_degree` for every successful ensemble cell.
pub fn degrees_csv(sweep: &SweepResult) -> String {
    let mut out = String::from("m4,ic_index,node,in_degree\n");
    for p in &sweep.points {
        let v = fmt_f64(p.value);
        for (k, cell) in p.cells.iter().enumerate() {
            if let Some(c) = cell.ok() {
                for (node, z) in c.in_degrees.iter().enumerate() {
                    writeln!(out, "{v},{k},{},{z}", node + 1).unwrap();
                }
            }
        }
    }
    out
}

/// `m4,node,mean,std` for every sweep value with at least one successful cell.
pub fn stats_csv(sweep: &SweepResult) -> String {
    let mut out = String::from("m4,node,mean,std\n");
    for p in &sweep.points {
        if let Some(s) = &p.stats {
            for node in 0..s.mean.len() {
                writeln!(out, "{},{},{},{}", fmt_f64(p.value), node + 1, fmt_f64(s.mean[node]), fmt_f64(s.std[node]))
                    .unwrap();
            }
        }
    }
    out
}

fn partition_json(scc: &SccPartition) -> serde_json::Value {
    json!(scc
        .components
        .iter()
        .map(|c| c.iter().map(|v| v + 1).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn cell_partition(cell: &CellOutcome) -> serde_json::Value {
    cell.ok().map_or(serde_json::Value::Null, |c| partition_json(&c.scc))
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values always serialise");
    s.push('\n');
    s
}

/// Per sweep value, the SCC partition of every case (null for failed cells)
/// and of the reference initial condition.
pub fn scc_json(sweep: &SweepResult) -> String {
    let values: Vec<_> = sweep
        .points
        .iter()
        .map(|p| {
            json!({
                "m4": p.value,
                "reference": p.reference.as_ref().map_or(serde_json::Value::Null, cell_partition),
                "ensemble": p.cells.iter().map(cell_partition).collect::<Vec<_>>(),
            })
        })
        .collect();
    pretty(&json!({
        "n_nodes": sweep.n_osc,
        "target_node": sweep.target + 1,
        "ic_hash": sweep.ic_hash,
        "values": values,
    }))
}

pub fn report_json(report: &DetectionReport) -> String {
    let nodes: Vec<_> = report
        .nodes
        .iter()
        .map(|o| {
            json!({
                "node": o.node + 1,
                "first_zero": fmt_opt(o.first_zero),
                "mean_zero": fmt_opt(o.mean_zero),
                "scc_split": fmt_opt(o.scc_split),
            })
        })
        .collect();
    pretty(&json!({
        "node": report.node.map(|n| n + 1),
        "m4_mean_zero": fmt_opt(report.m4_mean_zero),
        "m4_first_zero": fmt_opt(report.m4_first_zero),
        "m4_scc_split": fmt_opt(report.m4_scc_split),
        "m4_first_localized": fmt_opt(report.m4_first_localized),
        "m4_always_localized": fmt_opt(report.m4_always_localized),
        "failed_cells": report.failed_cells,
        "nodes": nodes,
    }))
}

/// One row of `stats.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub m4: f64,
    /// 1-based.
    pub node: usize,
    pub mean: f64,
    pub std: f64,
}

pub fn parse_stats_csv(text: &str) -> Result<Vec<StatsRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == "m4,node,mean,std" => {}
        other => {
            return Err(Error::invalid(
                "stats.csv",
                format!("expected header `m4,node,mean,std`, got {:?}", other.unwrap_or("")),
            ))
        }
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::invalid("stats.csv", format!("malformed row {}: {line:?}", k + 2));
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(StatsRow {
                m4: f[0].parse().map_err(|_| bad())?,
                node: f[1].parse().map_err(|_| bad())?,
                mean: f[2].parse().map_err(|_| bad())?,
                std: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Reference-IC SCC trace read back from `scc.json`, with 0-based component
/// indices per node.
pub fn parse_reference_trace(text: &str) -> Result<SccTrace> {
    let v: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::invalid("scc.json", e.to_string()))?;
    let n = v["n_nodes"]
        .as_u64()
        .ok_or_else(|| Error::invalid("scc.json", "missing `n_nodes`"))? as usize;
    let entries = v["values"]
        .as_array()
        .ok_or_else(|| Error::invalid("scc.json", "missing `values`"))?;
    let mut values = Vec::with_capacity(entries.len());
    let mut membership = Vec::with_capacity(entries.len());
    for e in entries {
        values.push(e["m4"].as_f64().ok_or_else(|| Error::invalid("scc.json", "entry without `m4`"))?);
        membership.push(match e["reference"].as_array() {
            None => None,
            Some(comps) => {
                let mut of = vec![usize::MAX; n];
                for (ci, comp) in comps.iter().enumerate() {
                    for node in comp.as_array().into_iter().flatten() {
                        let node = node.as_u64().filter(|x| (1..=n as u64).contains(x)).ok_or_else(|| {
                            Error::invalid("scc.json", format!("bad node label {node}"))
                        })?;
                        of[node as usize - 1] = ci;
                    }
                }
                if of.contains(&usize::MAX) {
                    return Err(Error::invalid("scc.json", "partition does not cover every node"));
                }
                Some(of)
            }
        });
    }
    Ok(SccTrace { values, membership })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 0.9292929292929293, -2.5e17, 0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(1.0), "1");
    }

    #[test]
    fn trajectory_round_trip() {
        let tr = Trajectory {
            dt: 0.05,
            times: vec![0.0, 0.05],
            displacements: vec![vec![0.1, 0.2], vec![1.0 / 3.0, -0.5]],
            velocities: vec![vec![0.0, 1.0], vec![2.0, 3.0]],
        };
        let csv = trajectory_csv(&tr);
        assert!(csv.starts_with("t,x1,x2,v1,v2\n"));
        let back = parse_trajectory_csv(&csv).unwrap();
        assert_eq!(back.series, tr.displacements);
        assert_eq!(back.times, tr.times);
        assert_eq!(back.names, vec!["x1", "x2"]);
    }

    #[test]
    fn csv_errors_name_the_column() {
        let err = parse_trajectory_csv("t,x1,x2\n0,1,oops\n").unwrap_err().to_string();
        assert!(err.contains("x2"), "{err}");
        assert!(parse_trajectory_csv("").is_err());
        assert!(parse_trajectory_csv("t,x1\n0,1,2\n").is_err());
    }

    #[test]
    fn stats_parse_rejects_garbage() {
        assert!(parse_stats_csv("a,b\n").is_err());
        let rows = parse_stats_csv("m4,node,mean,std\n1,4,0.5,0.25\n").unwrap();
        assert_eq!(rows[0], StatsRow { m4: 1.0, node: 4, mean: 0.5, std: 0.25 });
    }
}
