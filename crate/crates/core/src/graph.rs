//! In-degrees, strongly connected components and condensation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netinfer::FunctionalNetwork;

/// `z_in[i] = Σ_j A[j][i]`.
pub fn in_degrees(net: &FunctionalNetwork) -> Vec<usize> {
    let n = net.n_nodes();
    let mut z = vec![0; n];
    for (_, to) in net.edges() {
        z[to] += 1;
    }
    z
}

/// Strongly connected components, sorted by smallest member; members sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SccPartition {
    pub components: Vec<Vec<usize>>,
    pub component_of: Vec<usize>,
}

impl SccPartition {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn is_singleton(&self, node: usize) -> bool {
        self.components[self.component_of[node]].len() == 1
    }

    fn from_components(n: usize, mut components: Vec<Vec<usize>>) -> Self {
        for c in &mut components {
            c.sort_unstable();
        }
        components.sort_unstable_by_key(|c| c[0]);
        let mut component_of = vec![0; n];
        for (ci, c) in components.iter().enumerate() {
            for &v in c {
                component_of[v] = ci;
            }
        }
        Self {
            components,
            component_of,
        }
    }
}

/// Tarjan's algorithm with an explicit DFS stack.
pub fn strongly_connected_components(net: &FunctionalNetwork) -> SccPartition {
    const UNVISITED: usize = usize::MAX;
    let n = net.n_nodes();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::with_capacity(n);
    let mut components = Vec::new();
    let mut counter = 0;
    // (node, next successor to inspect)
    let mut call: Vec<(usize, usize)> = Vec::with_capacity(n);

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&(v, start)) = call.last() {
            let mut descended = false;
            let mut next = start;
            while next < n {
                let w = next;
                next += 1;
                if !net.has_edge(v, w) {
                    continue;
                }
                if index[w] == UNVISITED {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    descended = true;
                    break;
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            }
            if let Some(top) = call.last_mut() {
                top.1 = next;
            }
            if descended {
                call.push((next - 1, 0));
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                components.push(comp);
            }
        }
    }
    SccPartition::from_components(n, components)
}

/// Graph with one node per component; `edges` sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condensation {
    pub n_nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Condensation {
    /// Kahn's algorithm; `None` if a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indeg = vec![0usize; self.n_nodes];
        for &(_, b) in &self.edges {
            indeg[b] += 1;
        }
        let mut ready: Vec<usize> = (0..self.n_nodes).filter(|v| indeg[*v] == 0).collect();
        let mut order = Vec::with_capacity(self.n_nodes);
        while let Some(v) = ready.pop() {
            order.push(v);
            for &(a, b) in &self.edges {
                if a == v {
                    indeg[b] -= 1;
                    if indeg[b] == 0 {
                        ready.push(b);
                    }
                }
            }
        }
        (order.len() == self.n_nodes).then_some(order)
    }
}

pub fn condense(net: &FunctionalNetwork, partition: &SccPartition) -> Result<Condensation> {
    let n = net.n_nodes();
    if partition.component_of.len() != n {
        return Err(Error::PartitionMismatch(format!(
            "partition covers {} nodes, network has {n}",
            partition.component_of.len()
        )));
    }
    let covered: usize = partition.components.iter().map(Vec::len).sum();
    if covered != n {
        return Err(Error::PartitionMismatch(format!("components cover {covered} of {n} nodes")));
    }
    let mut edges: Vec<(usize, usize)> = net
        .edges()
        .map(|(a, b)| (partition.component_of[a], partition.component_of[b]))
        .filter(|(a, b)| a != b)
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let c = Condensation {
        n_nodes: partition.len(),
        edges,
    };
    if c.topological_order().is_none() {
        return Err(Error::PartitionMismatch("contracted graph has a cycle".into()));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(n: usize, edges: &[(usize, usize)]) -> FunctionalNetwork {
        FunctionalNetwork::from_edges(n, edges).unwrap()
    }

    #[test]
    fn in_degree_cases() {
        let complete: Vec<_> = (0..10).flat_map(|i| (0..10).filter(move |j| *j != i).map(move |j| (i, j))).collect();
        assert_eq!(in_degrees(&net(10, &complete)), vec![9; 10]);

        // node 3 only sends
        let mut edges: Vec<_> = complete.iter().copied().filter(|(_, b)| *b != 3).collect();
        edges.sort();
        let z = in_degrees(&net(10, &edges));
        assert_eq!(z[3], 0);
        assert_eq!(z.iter().sum::<usize>(), edges.len());
    }

    #[test]
    fn textbook_scc() {
        let g = net(3, &[(0, 1), (1, 0), (1, 2)]);
        let p = strongly_connected_components(&g);
        assert_eq!(p.components, vec![vec![0, 1], vec![2]]);
        assert_eq!(p.component_of, vec![0, 0, 1]);
        assert!(p.is_singleton(2));
        let c = condense(&g, &p).unwrap();
        assert_eq!(c, Condensation { n_nodes: 2, edges: vec![(0, 1)] });
    }

    #[test]
    fn ring_is_one_component() {
        let n = 12;
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let g = net(n, &edges);
        let p = strongly_connected_components(&g);
        assert_eq!(p.len(), 1);
        let c = condense(&g, &p).unwrap();
        assert_eq!((c.n_nodes, c.edges.len()), (1, 0));
    }

    #[test]
    fn deep_chain_does_not_recurse() {
        let n = 3000;
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        assert_eq!(strongly_connected_components(&net(n, &edges)).len(), n);
    }

    #[test]
    fn mismatched_partition() {
        let g = net(3, &[(0, 1)]);
        let p = strongly_connected_components(&net(2, &[]));
        assert!(condense(&g, &p).is_err());
    }
}
