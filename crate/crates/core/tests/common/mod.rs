//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use locnet::netinfer::FunctionalNetwork;
use locnet::recurrence::BinaryMatrix;
use rand::Rng;

/// `(closed, open)` cross-triple counts by direct enumeration of `(v, p, q)`.
pub fn triple_counts(cr: &BinaryMatrix, rec: &BinaryMatrix) -> (u64, u64) {
    let mut closed = 0;
    let mut open = 0;
    for v in 0..cr.rows() {
        for p in 0..cr.cols() {
            for q in 0..cr.cols() {
                if p == q || !cr.get(v, p) || !cr.get(v, q) {
                    continue;
                }
                open += 1;
                if rec.get(p, q) {
                    closed += 1;
                }
            }
        }
    }
    (closed, open)
}

/// Local cross-clustering of row `v` by enumeration.
pub fn local_clustering(cr: &BinaryMatrix, rec: &BinaryMatrix, v: usize) -> f64 {
    let k = (0..cr.cols()).filter(|&q| cr.get(v, q)).count();
    if k < 2 {
        return 0.0;
    }
    let mut closed = 0;
    for p in 0..cr.cols() {
        for q in 0..cr.cols() {
            if p != q && cr.get(v, p) && cr.get(v, q) && rec.get(p, q) {
                closed += 1;
            }
        }
    }
    closed as f64 / (k * (k - 1)) as f64
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, density: f64) -> BinaryMatrix {
    BinaryMatrix::from_fn(rows, cols, |_, _| rng.random_bool(density))
}

/// Symmetric, hollow, like a recurrence matrix.
pub fn random_recurrence<R: Rng>(rng: &mut R, n: usize, density: f64) -> BinaryMatrix {
    let mut m = BinaryMatrix::zeros(n, n);
    for p in 0..n {
        for q in (p + 1)..n {
            if rng.random_bool(density) {
                m.set(p, q, true);
                m.set(q, p, true);
            }
        }
    }
    m
}

/// Transitive closure by repeated relaxation; `reach[a][b]` iff a path a → b
/// exists (every node reaches itself).
pub fn reachability(net: &FunctionalNetwork) -> Vec<Vec<bool>> {
    let n = net.n_nodes();
    let mut reach: Vec<Vec<bool>> = (0..n).map(|a| (0..n).map(|b| a == b || net.has_edge(a, b)).collect()).collect();
    for k in 0..n {
        for a in 0..n {
            for b in 0..n {
                if reach[a][k] && reach[k][b] {
                    reach[a][b] = true;
                }
            }
        }
    }
    reach
}

/// Mutual-reachability classes, each sorted, ordered by smallest member.
pub fn reachability_classes(net: &FunctionalNetwork) -> Vec<Vec<usize>> {
    let n = net.n_nodes();
    let reach = reachability(net);
    let mut seen = vec![false; n];
    let mut classes = Vec::new();
    for a in 0..n {
        if seen[a] {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&b| reach[a][b] && reach[b][a]).collect();
        for &b in &class {
            seen[b] = true;
        }
        classes.push(class);
    }
    classes
}

pub fn random_digraph<R: Rng>(rng: &mut R, n: usize, density: f64) -> FunctionalNetwork {
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .filter(|(a, b)| a != b)
        .filter(|_| rng.random_bool(density))
        .collect();
    FunctionalNetwork::from_edges(n, &edges).unwrap()
}

/// Two-pass population mean and standard deviation.
pub fn two_pass_stats(vectors: &[Vec<usize>]) -> (Vec<f64>, Vec<f64>) {
    let m = vectors.len() as f64;
    let n = vectors[0].len();
    let mean: Vec<f64> = (0..n).map(|i| vectors.iter().map(|v| v[i] as f64).sum::<f64>() / m).collect();
    let std = (0..n)
        .map(|i| (vectors.iter().map(|v| (v[i] as f64 - mean[i]).powi(2)).sum::<f64>() / m).sqrt())
        .collect();
    (mean, std)
}
