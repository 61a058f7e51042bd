//! Pairwise coupling-direction inference and functional-network assembly.
//!
//! For every node pair the two displacement series are embedded, recurrence
//! thresholds are fixed, and the two cross-transitivities `T^{ij}`
//! (neighbours of i's states among j's states, closed in j's own recurrence
//! network) and `T^{ji}` are compared.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::Execution;
use crate::recurrence::{
    cross_clustering, cross_recurrence_matrix, cross_transitivity, embed, recurrence_matrix,
    threshold_for_rate, threshold_for_recurrence_rate, BinaryMatrix, PointCloud, RecurrenceConfig, ThresholdMode,
    ThresholdScope,
};

/// Link direction between nodes `i` and `j` (with `i` the first argument).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingDirection {
    /// `i → j`
    Forward,
    /// `i ← j`
    Backward,
    /// `i ↔ j`
    Bidirectional,
}

impl CouplingDirection {
    pub fn symbol(self) -> &'static str {
        match self {
            CouplingDirection::Forward => "->",
            CouplingDirection::Backward => "<-",
            CouplingDirection::Bidirectional => "<->",
        }
    }
}

/// Sign of `Δ = T^{ij} - T^{ji}` that marks `i` as the driving node.
///
/// Pinned by the unidirectionally driven master/slave fixture in
/// [`crate::calibration`]: with per-matrix thresholds the driver's
/// cross-neighbourhoods close less often than the slave's.
pub const DRIVER_SIGN: f64 = -1.0;

/// Everything computed for one pair, in the `(i, j)` orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairInference {
    pub i: usize,
    pub j: usize,
    pub t_ij: f64,
    pub t_ji: f64,
    pub delta: f64,
    pub c_ij: f64,
    pub c_ji: f64,
    /// Thresholds used for `CR`, `Rⁱ` and `Rʲ`.
    pub epsilon: [f64; 3],
    pub direction: CouplingDirection,
}

impl PairInference {
    /// Cross-clustering and cross-transitivity differences point opposite ways.
    pub fn measures_disagree(&self) -> bool {
        let dc = self.c_ij - self.c_ji;
        self.delta * dc < 0.0
    }
}

/// Maps a transitivity difference onto a direction using the dead band `tol`.
pub fn classify_delta(delta: f64, tol: f64) -> CouplingDirection {
    let drive = DRIVER_SIGN * delta;
    if drive > tol {
        CouplingDirection::Forward
    } else if drive < -tol {
        CouplingDirection::Backward
    } else {
        CouplingDirection::Bidirectional
    }
}

fn is_constant(series: &[f64]) -> bool {
    series.windows(2).all(|w| w[0] == w[1])
}

/// Embedded series plus, when it does not depend on the partner series,
/// its own recurrence matrix and threshold.
struct NodeData {
    cloud: PointCloud,
    own: Option<(f64, BinaryMatrix)>,
}

fn prepare(series: &[f64], cfg: &RecurrenceConfig) -> Result<NodeData> {
    let cloud = embed(series, cfg.embed_dim, cfg.embed_delay)?;
    let eps = match (cfg.threshold_mode, cfg.threshold_scope) {
        (ThresholdMode::FixedEpsilon, _) => Some(cfg.epsilon),
        (ThresholdMode::FixedRecurrenceRate, ThresholdScope::PerMatrix) => {
            Some(threshold_for_recurrence_rate(&cloud, cfg.recurrence_rate, cfg.metric)?)
        }
        (ThresholdMode::FixedRecurrenceRate, ThresholdScope::Shared) => None,
    };
    let own = eps.map(|e| (e, recurrence_matrix(&cloud, e, cfg.metric)));
    Ok(NodeData { cloud, own })
}

fn infer_prepared(i: usize, j: usize, a: &NodeData, b: &NodeData, cfg: &RecurrenceConfig) -> Result<PairInference> {
    let eps_cr = match cfg.threshold_mode {
        ThresholdMode::FixedEpsilon => cfg.epsilon,
        ThresholdMode::FixedRecurrenceRate => threshold_for_rate(&a.cloud, &b.cloud, cfg.recurrence_rate, cfg.metric)?,
    };
    let cr_ij = cross_recurrence_matrix(&a.cloud, &b.cloud, eps_cr, cfg.metric)?.entries;
    let cr_ji = cr_ij.transpose();
    let shared_i;
    let shared_j;
    let ((eps_i, rec_i), (eps_j, rec_j)) = match (&a.own, &b.own) {
        (Some((ea, ra)), Some((eb, rb))) => ((*ea, ra), (*eb, rb)),
        _ => {
            shared_i = recurrence_matrix(&a.cloud, eps_cr, cfg.metric);
            shared_j = recurrence_matrix(&b.cloud, eps_cr, cfg.metric);
            ((eps_cr, &shared_i), (eps_cr, &shared_j))
        }
    };

    let t_ij = cross_transitivity(&cr_ij, rec_j)?.value;
    let t_ji = cross_transitivity(&cr_ji, rec_i)?.value;
    let c_ij = cross_clustering(&cr_ij, rec_j)?.mean;
    let c_ji = cross_clustering(&cr_ji, rec_i)?.mean;
    let delta = t_ij - t_ji;
    Ok(PairInference {
        i,
        j,
        t_ij,
        t_ji,
        delta,
        c_ij,
        c_ji,
        epsilon: [eps_cr, eps_i, eps_j],
        direction: classify_delta(delta, cfg.direction_tol),
    })
}

/// Direction inference for one pair of equally long series.
pub fn infer_pair(x_i: &[f64], x_j: &[f64], cfg: &RecurrenceConfig) -> Result<PairInference> {
    cfg.validate()?;
    if x_i.len() != x_j.len() {
        return Err(Error::DimensionMismatch {
            expected: x_i.len(),
            actual: x_j.len(),
        });
    }
    if is_constant(x_i) {
        return Err(Error::DegenerateSeries { node: 0 });
    }
    if is_constant(x_j) {
        return Err(Error::DegenerateSeries { node: 1 });
    }
    infer_prepared(0, 1, &prepare(x_i, cfg)?, &prepare(x_j, cfg)?, cfg)
}

pub fn infer_pair_direction(x_i: &[f64], x_j: &[f64], cfg: &RecurrenceConfig) -> Result<CouplingDirection> {
    infer_pair(x_i, x_j, cfg).map(|p| p.direction)
}

/// Directed network over the oscillators; `adjacency[i][j]` is the link `i → j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FunctionalNetwork {
    adjacency: Vec<Vec<bool>>,
}

impl FunctionalNetwork {
    /// Builds a network from an adjacency matrix, checking the no-self-loop
    /// and pairwise-connected invariants.
    pub fn from_adjacency(adjacency: Vec<Vec<bool>>) -> Result<Self> {
        let net = Self::from_adjacency_unchecked(adjacency)?;
        let n = net.n_nodes();
        for i in 0..n {
            if net.adjacency[i][i] {
                return Err(Error::invalid("adjacency", format!("self-loop at node {i}")));
            }
            for j in (i + 1)..n {
                if !net.adjacency[i][j] && !net.adjacency[j][i] {
                    return Err(Error::invalid("adjacency", format!("nodes {i} and {j} are not linked")));
                }
            }
        }
        Ok(net)
    }

    /// Accepts any square adjacency without self-loop/pairwise checks, for
    /// general digraph work in [`crate::graph`].
    pub fn from_adjacency_unchecked(adjacency: Vec<Vec<bool>>) -> Result<Self> {
        let n = adjacency.len();
        if let Some(row) = adjacency.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: row.len(),
            });
        }
        Ok(Self { adjacency })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![vec![false; n]; n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::invalid("edges", format!("edge ({a}, {b}) out of range for {n} nodes")));
            }
            adjacency[a][b] = true;
        }
        Self::from_adjacency_unchecked(adjacency)
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }

    #[inline]
    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.adjacency[from][to]
    }

    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adjacency
    }

    pub fn successors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[node].iter().enumerate().filter(|(_, e)| **e).map(|(j, _)| j)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_nodes()).flat_map(move |i| self.successors(i).map(move |j| (i, j)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().flatten().filter(|e| **e).count()
    }

    /// Edge list text, one `i j` per line, nodes labelled from 1.
    pub fn to_edge_list(&self) -> String {
        self.edges().map(|(i, j)| format!("{} {}\n", i + 1, j + 1)).collect()
    }

    /// `{"nodes": [...], "edges": [[i, j], ...]}` with nodes labelled from 1.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "nodes": (1..=self.n_nodes()).collect::<Vec<_>>(),
            "edges": self.edges().map(|(i, j)| [i + 1, j + 1]).collect::<Vec<_>>(),
        })
    }
}

/// Network plus the per-pair diagnostics it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkInference {
    pub network: FunctionalNetwork,
    pub pairs: Vec<PairInference>,
}

impl NetworkInference {
    /// Pairs where cross-clustering and cross-transitivity disagree in sign.
    pub fn disagreements(&self) -> usize {
        self.pairs.iter().filter(|p| p.measures_disagree()).count()
    }
}

/// Infers the functional network from one displacement row per node.
pub fn infer_network(displacements: &[Vec<f64>], cfg: &RecurrenceConfig) -> Result<NetworkInference> {
    infer_network_with(displacements, cfg, Execution::Parallel)
}

/// [`infer_network`] with an explicit choice of pair-level parallelism.
pub fn infer_network_with(displacements: &[Vec<f64>], cfg: &RecurrenceConfig, exec: Execution) -> Result<NetworkInference> {
    cfg.validate()?;
    let n = displacements.len();
    if n < 2 {
        return Err(Error::TooFewSeries { needed: 2, got: n });
    }
    let len = displacements[0].len();
    for (node, row) in displacements.iter().enumerate() {
        if row.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: row.len(),
            });
        }
        if is_constant(row) {
            return Err(Error::DegenerateSeries { node });
        }
    }
    let nodes: Vec<NodeData> = displacements.iter().map(|x| prepare(x, cfg)).collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let infer = |&(i, j): &(usize, usize)| infer_prepared(i, j, &nodes[i], &nodes[j], cfg);
    let pairs: Vec<PairInference> = match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            pairs.par_iter().map(infer).collect::<Result<_>>()?
        }
        _ => pairs.iter().map(infer).collect::<Result<_>>()?,
    };

    let mut adjacency = vec![vec![false; n]; n];
    for p in &pairs {
        match p.direction {
            CouplingDirection::Forward => adjacency[p.i][p.j] = true,
            CouplingDirection::Backward => adjacency[p.j][p.i] = true,
            CouplingDirection::Bidirectional => {
                adjacency[p.i][p.j] = true;
                adjacency[p.j][p.i] = true;
            }
        }
    }
    let network = FunctionalNetwork::from_adjacency(adjacency)?;
    Ok(NetworkInference { network, pairs })
}

pub fn build_functional_network(displacements: &[Vec<f64>], cfg: &RecurrenceConfig) -> Result<FunctionalNetwork> {
    infer_network(displacements, cfg).map(|r| r.network)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(len: usize, phase: f64, amp: f64) -> Vec<f64> {
        (0..len).map(|k| amp * (0.3 * k as f64 + phase).sin() + 0.01 * (k as f64 * 0.77).cos()).collect()
    }

    #[test]
    fn identical_series_are_bidirectional() {
        let x = wave(201, 0.2, 1.0);
        let p = infer_pair(&x, &x, &RecurrenceConfig::default()).unwrap();
        assert_eq!(p.delta, 0.0);
        assert_eq!(p.direction, CouplingDirection::Bidirectional);
    }

    #[test]
    fn saturated_tolerance_is_bidirectional() {
        let cfg = RecurrenceConfig {
            direction_tol: 1.0,
            ..Default::default()
        };
        let a = wave(150, 0.0, 1.0);
        let b: Vec<f64> = wave(150, 1.3, 0.2).iter().map(|v| v * v * v).collect();
        assert_eq!(infer_pair_direction(&a, &b, &cfg).unwrap(), CouplingDirection::Bidirectional);
    }

    #[test]
    fn classify_uses_dead_band() {
        assert_eq!(classify_delta(0.0, 0.0), CouplingDirection::Bidirectional);
        assert_eq!(classify_delta(0.04, 0.05), CouplingDirection::Bidirectional);
        let strong = classify_delta(DRIVER_SIGN * 0.2, 0.05);
        assert_eq!(strong, CouplingDirection::Forward);
        assert_eq!(classify_delta(-DRIVER_SIGN * 0.2, 0.05), CouplingDirection::Backward);
    }

    #[test]
    fn identical_rows_give_complete_network() {
        let x = wave(201, 0.5, 0.7);
        let rows = vec![x; 10];
        let net = build_functional_network(&rows, &RecurrenceConfig::default()).unwrap();
        assert_eq!(net.edge_count(), 90);
    }

    #[test]
    fn two_nodes() {
        let rows = vec![wave(120, 0.0, 1.0), wave(120, 0.9, 0.4)];
        let inf = infer_network(&rows, &RecurrenceConfig::default()).unwrap();
        assert_eq!(inf.pairs.len(), 1);
        let e = inf.network.edge_count();
        assert!(e == 1 || e == 2);
    }

    #[test]
    fn degenerate_node_is_named() {
        let rows = vec![wave(50, 0.0, 1.0), wave(50, 0.3, 1.0), vec![0.2; 50]];
        assert_eq!(
            build_functional_network(&rows, &RecurrenceConfig::default()).unwrap_err(),
            Error::DegenerateSeries { node: 2 }
        );
        assert!(matches!(
            build_functional_network(&rows[..1], &RecurrenceConfig::default()),
            Err(Error::TooFewSeries { .. })
        ));
    }

    #[test]
    fn network_invariants_checked() {
        assert!(FunctionalNetwork::from_adjacency(vec![vec![true, true], vec![false, false]]).is_err());
        assert!(FunctionalNetwork::from_adjacency(vec![vec![false, false], vec![false, false]]).is_err());
        let net = FunctionalNetwork::from_adjacency(vec![vec![false, true], vec![false, false]]).unwrap();
        assert_eq!(net.to_edge_list(), "1 2\n");
        assert_eq!(net.to_json()["edges"], serde_json::json!([[1, 2]]));
    }
}
