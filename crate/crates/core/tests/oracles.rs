mod common;

use locnet::experiment::degree_stats;
use locnet::graph::{condense, in_degrees, strongly_connected_components};
use locnet::recurrence::{cross_clustering, cross_transitivity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn transitivity_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..400 {
        let p = rng.random_range(1..=8);
        let q = rng.random_range(1..=8);
        let d = rng.random_range(0.0..=1.0);
        let cr = common::random_matrix(&mut rng, p, q, d);
        let rd = rng.random_range(0.0..=1.0);
        let rec = common::random_recurrence(&mut rng, q, rd);
        let t = cross_transitivity(&cr, &rec).unwrap();
        let (closed, open) = common::triple_counts(&cr, &rec);
        assert_eq!((t.triangles, t.triples), (closed, open), "case {case}");
        let expected = if open == 0 { 0.0 } else { closed as f64 / open as f64 };
        assert_eq!(t.value, expected);

        let c = cross_clustering(&cr, &rec).unwrap();
        for v in 0..p {
            assert_eq!(c.per_node[v], common::local_clustering(&cr, &rec, v), "case {case}, row {v}");
        }
    }
}

#[test]
fn scc_matches_reachability() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..400 {
        let n = rng.random_range(1..=8);
        let nd = rng.random_range(0.0..=0.6);
        let net = common::random_digraph(&mut rng, n, nd);
        let p = strongly_connected_components(&net);
        assert_eq!(p.components, common::reachability_classes(&net), "case {case}");
        let c = condense(&net, &p).unwrap();
        assert!(c.topological_order().is_some());
        // condensation edges are exactly the inter-component reachable steps
        for &(a, b) in &c.edges {
            assert!(p.components[a].iter().any(|&u| p.components[b].iter().any(|&v| net.has_edge(u, v))));
        }
    }
}

#[test]
fn degrees_match_column_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.random_range(2..=10);
        let net = common::random_digraph(&mut rng, n, 0.5);
        let z = in_degrees(&net);
        for (j, zj) in z.iter().enumerate() {
            assert_eq!(*zj, (0..n).filter(|&i| net.has_edge(i, j)).count());
        }
    }
}

#[test]
fn degree_stats_match_two_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let batch: Vec<Vec<usize>> = (0..100).map(|_| (0..10).map(|_| rng.random_range(0..10)).collect()).collect();
    let s = degree_stats(&batch).unwrap();
    let (mean, std) = common::two_pass_stats(&batch);
    for i in 0..10 {
        assert!((s.mean[i] - mean[i]).abs() <= 1e-12);
        assert!((s.std[i] - std[i]).abs() <= 1e-12);
    }
    assert_eq!(s.m, 100);

    let hand = degree_stats(&[vec![0, 3], vec![2, 3]]).unwrap();
    assert_eq!((hand.mean, hand.std), (vec![1.0, 3.0], vec![1.0, 0.0]));
}
