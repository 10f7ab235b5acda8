//! Antisymmetric edge flows reproducing zero-sum vertex data on a connected graph.
//!
//! Used to split the Neumann values gathered at a cross-point into per-pair
//! contributions, which yields fixed-point traces for the auxiliary variable
//! method.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{invalid, Result};

/// Undirected graph with vertex values `phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    pub phi: Vec<f64>,
}

impl FlowGraph {
    /// Edges are deduplicated and normalized to `(lo, hi)`; self-loops are rejected.
    pub fn new(n: usize, edges: &[(usize, usize)], phi: Vec<f64>) -> Result<Self> {
        if phi.len() != n {
            return Err(invalid(format!("{} vertex values for {n} vertices", phi.len())));
        }
        let mut norm: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(invalid(format!("edge ({a}, {b}) outside {n} vertices")));
            }
            if a == b {
                return Err(invalid(format!("self-loop at vertex {a}")));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        norm.dedup();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &norm {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        Ok(Self { n, edges: norm, adjacency, phi })
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn is_connected(&self) -> bool {
        self.n == 0 || self.bfs_parents().iter().all(|p| p.is_some())
    }

    /// Parent of each vertex in the breadth-first tree rooted at 0; the root maps to itself.
    fn bfs_parents(&self) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.n];
        if self.n == 0 {
            return parent;
        }
        parent[0] = Some(0);
        let mut queue = VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                if parent[w].is_none() {
                    parent[w] = Some(v);
                    queue.push_back(w);
                }
            }
        }
        parent
    }
}

/// Flow on ordered vertex pairs, stored for both orientations of each edge.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeFlow {
    values: BTreeMap<(usize, usize), f64>,
}

impl EdgeFlow {
    pub fn get(&self, from: usize, to: usize) -> Option<f64> {
        self.values.get(&(from, to)).copied()
    }

    /// Sets `psi(from, to) = value` and `psi(to, from) = -value`.
    pub fn set(&mut self, from: usize, to: usize, value: f64) {
        self.values.insert((from, to), value);
        self.values.insert((to, from), -value);
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, v))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes a raw value for one orientation only (test hook for broken flows).
    pub fn set_one_way(&mut self, from: usize, to: usize, value: f64) {
        self.values.insert((from, to), value);
    }
}

const SUM_TOL: f64 = 1e-12;

/// Constructs `psi` with `psi(a, b) = -psi(b, a)` and `sum_b psi(a, b) = phi(a)`.
///
/// Vertices are peeled off as leaves of the breadth-first spanning tree rooted
/// at vertex 0 (smallest index first); each leaf sends its whole value to its
/// tree parent and zero along every other edge.
pub fn split_flow(g: &FlowGraph) -> Result<EdgeFlow> {
    let n = g.num_vertices();
    if n == 0 {
        return Ok(EdgeFlow::default());
    }
    let parent = g.bfs_parents();
    if parent.iter().any(|p| p.is_none()) {
        return Err(invalid("graph is not connected"));
    }
    let scale = g.phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let total: f64 = g.phi.iter().sum();
    if total.abs() > SUM_TOL * scale {
        return Err(invalid(format!("vertex values sum to {total:e}, expected 0")));
    }

    let parent: Vec<usize> = parent.into_iter().map(|p| p.unwrap()).collect();
    let mut children = vec![0usize; n];
    for v in 1..n {
        children[parent[v]] += 1;
    }
    let mut alive = vec![true; n];
    let mut phi = g.phi.clone();
    let mut flow = EdgeFlow::default();
    for _ in 1..n {
        let v = (1..n)
            .find(|&v| alive[v] && children[v] == 0)
            .expect("a tree with more than one vertex has a non-root leaf");
        let w0 = parent[v];
        for &w in g.neighbors(v) {
            if alive[w] {
                flow.set(v, w, if w == w0 { phi[v] } else { 0.0 });
            }
        }
        phi[w0] += phi[v];
        alive[v] = false;
        children[w0] -= 1;
    }
    Ok(flow)
}

/// Checks antisymmetry (exact) and conservation within `1e-12` of the data scale.
pub fn verify_flow(g: &FlowGraph, psi: &EdgeFlow) -> bool {
    let mut sums = vec![0.0; g.num_vertices()];
    for &(a, b) in g.edges() {
        let (Some(ab), Some(ba)) = (psi.get(a, b), psi.get(b, a)) else {
            return false;
        };
        if ab != -ba {
            return false;
        }
        sums[a] += ab;
        sums[b] += ba;
    }
    let scale = g.phi.iter().fold(psi.max_abs(), |m, v| m.max(v.abs()));
    sums.iter().zip(&g.phi).all(|(s, p)| (s - p).abs() <= SUM_TOL * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_edge_is_forced() {
        let g = FlowGraph::new(2, &[(0, 1)], vec![2.5, -2.5]).unwrap();
        let psi = split_flow(&g).unwrap();
        assert_eq!(psi.get(1, 0), Some(-2.5));
        assert_eq!(psi.get(0, 1), Some(2.5));
        assert!(verify_flow(&g, &psi));
    }

    #[test]
    fn single_vertex_is_empty() {
        let g = FlowGraph::new(1, &[], vec![0.0]).unwrap();
        let psi = split_flow(&g).unwrap();
        assert!(psi.is_empty());
        assert!(verify_flow(&g, &psi));
    }

    #[test]
    fn triangle() {
        let g = FlowGraph::new(3, &[(0, 1), (1, 2), (2, 0)], vec![1.0, -1.0, 0.0]).unwrap();
        let psi = split_flow(&g).unwrap();
        assert!(verify_flow(&g, &psi));
    }

    #[test]
    fn rejects_disconnected_and_nonzero_sum() {
        let g = FlowGraph::new(3, &[(0, 1)], vec![0.0, 0.0, 0.0]).unwrap();
        assert!(split_flow(&g).is_err());
        let g = FlowGraph::new(2, &[(0, 1)], vec![1.0, 0.0]).unwrap();
        assert!(split_flow(&g).is_err());
        assert!(FlowGraph::new(2, &[(0, 0)], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn verify_detects_broken_flows() {
        let g = FlowGraph::new(3, &[(0, 1), (1, 2)], vec![1.0, 0.0, -1.0]).unwrap();
        let psi = split_flow(&g).unwrap();
        assert!(verify_flow(&g, &psi));

        let mut flipped = psi.clone();
        let v = flipped.get(0, 1).unwrap();
        flipped.set_one_way(0, 1, -v);
        assert!(!verify_flow(&g, &flipped));

        let mut zero = EdgeFlow::default();
        zero.set(0, 1, 0.0);
        zero.set(1, 2, 0.0);
        assert!(!verify_flow(&g, &zero));
    }

    #[test]
    fn cycle_circulation_keeps_validity() {
        let g = FlowGraph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], vec![1.0, 2.0, -4.0, 1.0]).unwrap();
        let mut psi = split_flow(&g).unwrap();
        for (a, b) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            let v = psi.get(a, b).unwrap();
            psi.set(a, b, v + 0.75);
        }
        assert!(verify_flow(&g, &psi));
    }

    #[test]
    fn deterministic() {
        let g = FlowGraph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)], vec![1.0, 2.0, -4.0, 1.0]).unwrap();
        assert_eq!(split_flow(&g).unwrap(), split_flow(&g).unwrap());
    }

    fn connected_graph() -> impl Strategy<Value = FlowGraph> {
        (1usize..=12)
            .prop_flat_map(|n| {
                let tree = proptest::collection::vec(any::<prop::sample::Index>(), n.saturating_sub(1));
                let extra = proptest::collection::vec((0..n, 0..n), 0..2 * n);
                let phi = proptest::collection::vec(-10.0f64..10.0, n);
                (Just(n), tree, extra, phi)
            })
            .prop_map(|(n, tree, extra, mut phi)| {
                let mut edges: Vec<(usize, usize)> =
                    tree.iter().enumerate().map(|(k, ix)| (k + 1, ix.index(k + 1))).collect();
                edges.extend(extra.into_iter().filter(|(a, b)| a != b));
                let mean = phi.iter().sum::<f64>() / n as f64;
                phi.iter_mut().for_each(|v| *v -= mean);
                FlowGraph::new(n, &edges, phi).unwrap()
            })
    }

    proptest! {
        #[test]
        fn split_flow_always_valid(g in connected_graph()) {
            let psi = split_flow(&g).unwrap();
            prop_assert!(verify_flow(&g, &psi));
        }
    }
}
