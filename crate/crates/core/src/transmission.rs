//! Robin trace exchange between subdomains.
//!
//! Two policies are implemented for cross-points:
//!
//! * **auxiliary variables**: every directed pair `(i, i')` sharing an
//!   interface edge keeps its own trace `g_{i,i';j}`, so subdomains only talk
//!   to edge neighbours;
//! * **complete communication**: each subdomain keeps one trace per node and,
//!   at a cross-point, rebuilds it from the Dirichlet values and discrete
//!   Neumann values of *all* incident subdomains through `A_D` and `A_N`.
//!
//! The Dirichlet part of every update is the per-pair interface mass matrix
//! `B_{i,i'}` (the edges shared by `i` and `i'`) applied to the sender's
//! solution. For the lumped matrix this is `(p/2) * sum |edge| * u_j`; for the
//! consistent and overlumped matrices the off-diagonal couplings along the
//! shared edges are kept so that the mono-domain solution stays a fixed point.

use std::collections::HashMap;

use rand::Rng;

use crate::assembly::{edge_entries, InterfaceMatrix, SubdomainLayout, SubdomainSystem};
use crate::error::{invalid, Error, Result};
use crate::graph::{split_flow, FlowGraph};
use crate::linalg::DenseMatrix;
use crate::mesh::{CrossPointTopology, Decomposition, InterfaceEdge};

/// Lumped Robin update across a two-subdomain interface node:
/// `g_i = -g_{i'} + p * u_{i'} * shared_length`.
pub fn robin_update_edge(u_neighbor: f64, g_neighbor: f64, p: f64, shared_length: f64) -> f64 {
    -g_neighbor + p * u_neighbor * shared_length
}

/// First row of the pseudo-inverse of the cyclic difference operator `L`
/// (`L a = (a_i - a_{i+1})_i`): `mu_i = (I - 1 - 2i) / (2I)`.
pub fn neumann_split_mu(count: usize) -> Result<Vec<f64>> {
    if count < 3 {
        return Err(invalid(format!("a cross-point has at least 3 subdomains, got {count}")));
    }
    let n = count as f64;
    Ok((0..count).map(|i| (n - 1.0 - 2.0 * i as f64) / (2.0 * n)).collect())
}

/// Cyclic difference operator with rows `e_i - e_{i+1}`.
pub fn cyclic_difference(count: usize) -> DenseMatrix {
    DenseMatrix::from_fn(count, count, |i, j| {
        if i == j {
            1.0
        } else if j == (i + 1) % count {
            -1.0
        } else {
            0.0
        }
    })
}

/// Circulant matrix with entry `(i, j) = first_row[(j - i) mod n]`.
pub fn circulant(first_row: &[f64]) -> DenseMatrix {
    let n = first_row.len();
    DenseMatrix::from_fn(n, n, |i, j| first_row[(j + n - i) % n])
}

/// `(A_N N)_i = N_i - (2/I) sum N`.
pub fn apply_a_n(neumann: &[f64]) -> Vec<f64> {
    let s: f64 = neumann.iter().sum();
    let c = 2.0 / neumann.len() as f64;
    neumann.iter().map(|v| v - c * s).collect()
}

pub fn a_n_matrix(count: usize) -> DenseMatrix {
    let c = 2.0 / count as f64;
    DenseMatrix::from_fn(count, count, |i, j| if i == j { 1.0 - c } else { -c })
}

/// Least-squares splitting `N_i = N_i^+ + N_i^-` minimising the jumps
/// `N_i^+ + N_{i+1}^-` around the cross-point, with the minimiser orthogonal
/// to the constants: `N^- = L^+ N`. Returns `(plus, minus)`.
pub fn split_neumann(neumann: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = neumann.len();
    let mu = neumann_split_mu(n)?;
    let minus: Vec<f64> = (0..n).map(|i| (0..n).map(|k| mu[(k + n - i) % n] * neumann[k]).sum()).collect();
    let plus = neumann.iter().zip(&minus).map(|(a, b)| a - b).collect();
    Ok((plus, minus))
}

/// `A_N` evaluated by exchanging split Neumann values with both cyclic neighbours:
/// `-N_{i+1}^- - N_{i-1}^+`.
pub fn apply_a_n_by_splitting(neumann: &[f64]) -> Result<Vec<f64>> {
    let n = neumann.len();
    let (plus, minus) = split_neumann(neumann)?;
    Ok((0..n).map(|i| -minus[(i + 1) % n] - plus[(i + n - 1) % n]).collect())
}

/// Dirichlet weights at a cross-point: `(A_D)_{ik} = (p/2) * shared length of i and k`.
pub fn build_a_d(topo: &CrossPointTopology, p: f64) -> DenseMatrix {
    build_a_d_weighted(topo, p, InterfaceMatrix::Lumped)
}

/// Diagonal part of `B_{i,k}` at the cross-point for an arbitrary interface
/// matrix. Equals [`build_a_d`] for the lumped matrix.
pub fn build_a_d_weighted(topo: &CrossPointTopology, p: f64, variant: InterfaceMatrix) -> DenseMatrix {
    let n = topo.len();
    let w = variant.diag_weight();
    DenseMatrix::from_fn(n, n, |a, b| {
        if a == b {
            0.0
        } else {
            p * w * topo.shared_length(topo.subdomains[a], topo.subdomains[b])
        }
    })
}

/// Linear update operators at one cross-point, in the cyclic order of its topology.
#[derive(Debug, Clone)]
pub struct CrossPointOperators {
    pub order: Vec<usize>,
    pub a_d: DenseMatrix,
}

impl CrossPointOperators {
    pub fn new(topo: &CrossPointTopology, p: f64, variant: InterfaceMatrix) -> Self {
        Self { order: topo.subdomains.clone(), a_d: build_a_d_weighted(topo, p, variant) }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn a_n(&self) -> DenseMatrix {
        a_n_matrix(self.len())
    }

    /// `g = A_D u + A_N N`.
    pub fn update(&self, u: &[f64], neumann: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if u.len() != n || neumann.len() != n {
            return Err(Error::Contract(format!(
                "cross-point of {n} subdomains got {} Dirichlet and {} Neumann values",
                u.len(),
                neumann.len()
            )));
        }
        let mut g = apply_a_n(neumann);
        for (a, ga) in g.iter_mut().enumerate() {
            *ga += (0..n).map(|b| self.a_d[(a, b)] * u[b]).sum::<f64>();
        }
        Ok(g)
    }
}

pub fn cc_crosspoint_update(ops: &CrossPointOperators, u: &[f64], neumann: &[f64]) -> Result<Vec<f64>> {
    ops.update(u, neumann)
}

/// Row `j` of a pair interface matrix, in the local numbering of one side.
pub type Stencil = Vec<(usize, f64)>;

/// One shared boundary node of a subdomain pair.
#[derive(Debug, Clone)]
pub struct PairNode {
    pub node: usize,
    /// Local index of the node in `lo` and `hi`.
    pub local: [usize; 2],
    /// Sum of the shared edge lengths leaving the node.
    pub shared_length: f64,
    /// Row of `B_{lo,hi}` at the node, in `lo` and `hi` numbering.
    pub stencil: [Stencil; 2],
    pub cross: bool,
}

impl PairNode {
    /// `(B_pair u)_j` with `u` taken from `side` (0 = lo, 1 = hi).
    #[inline]
    pub fn apply(&self, side: usize, u: &[f64]) -> f64 {
        self.stencil[side].iter().map(|&(l, c)| c * u[l]).sum()
    }
}

/// All boundary nodes shared by subdomains `lo < hi` through at least one interface edge.
#[derive(Debug, Clone)]
pub struct PairInterface {
    pub lo: usize,
    pub hi: usize,
    pub nodes: Vec<PairNode>,
}

impl PairInterface {
    pub fn side_of(&self, i: usize) -> Option<usize> {
        if i == self.lo {
            Some(0)
        } else if i == self.hi {
            Some(1)
        } else {
            None
        }
    }
}

/// Per-cross-point data used by the exchange.
#[derive(Debug, Clone)]
pub struct CrossPoint {
    pub topo: CrossPointTopology,
    pub ops: CrossPointOperators,
    /// Local index of the cross-point node in each incident subdomain (cyclic order).
    pub local: Vec<usize>,
    /// Off-diagonal interface couplings along the spokes: for each position,
    /// `(position of sender, local index in sender, coefficient)`.
    pub spoke_coupling: Vec<Vec<(usize, usize, f64)>>,
    /// `(pair index, node index in pair)` for each spoke-sharing pair.
    pub pair_slots: Vec<(usize, usize)>,
}

impl CrossPoint {
    /// Edges of the spoke-sharing graph, as positions in the cyclic order.
    pub fn graph_edges(&self) -> Vec<(usize, usize)> {
        self.topo
            .spokes
            .iter()
            .map(|s| (self.topo.position(s.pair.0).unwrap(), self.topo.position(s.pair.1).unwrap()))
            .collect()
    }
}

/// Interface geometry and pair matrices of a decomposition.
#[derive(Debug, Clone)]
pub struct Interfaces {
    pub p: f64,
    pub variant: InterfaceMatrix,
    pub pairs: Vec<PairInterface>,
    pub crosspoints: Vec<CrossPoint>,
    pair_index: HashMap<(usize, usize), usize>,
    /// For each subdomain, the pairs it belongs to.
    by_subdomain: Vec<Vec<usize>>,
}

impl Interfaces {
    pub fn new(
        d: &Decomposition,
        edges: &[InterfaceEdge],
        layouts: &[&SubdomainLayout],
        p: f64,
        variant: InterfaceMatrix,
    ) -> Result<Self> {
        let mut grouped: Vec<((usize, usize), Vec<&InterfaceEdge>)> = Vec::new();
        let mut slot: HashMap<(usize, usize), usize> = HashMap::new();
        for e in edges {
            let k = *slot.entry(e.subdomains).or_insert_with(|| {
                grouped.push((e.subdomains, Vec::new()));
                grouped.len() - 1
            });
            grouped[k].1.push(e);
        }
        grouped.sort_by_key(|g| g.0);

        let cross_nodes = d.cross_points();
        let mut pairs = Vec::with_capacity(grouped.len());
        for ((lo, hi), pair_edges) in grouped {
            let sides = [layouts[lo], layouts[hi]];
            // node -> (shared length, row entries by global column)
            let mut rows: HashMap<usize, (f64, Vec<(usize, f64)>)> = HashMap::new();
            for e in &pair_edges {
                for (r, c, v) in edge_entries(e, p, variant) {
                    if d.mesh.on_boundary(r) {
                        continue;
                    }
                    let row = rows.entry(r).or_insert((0.0, Vec::new()));
                    if r == c {
                        row.0 += e.length;
                    }
                    if !d.mesh.on_boundary(c) {
                        row.1.push((c, v));
                    }
                }
            }
            let mut node_ids: Vec<usize> = rows.keys().copied().collect();
            node_ids.sort_unstable();
            let mut nodes = Vec::with_capacity(node_ids.len());
            for j in node_ids {
                let (shared_length, entries) = &rows[&j];
                let mut stencil: [Stencil; 2] = [Vec::new(), Vec::new()];
                for (s, layout) in sides.iter().enumerate() {
                    let mut acc: Vec<(usize, f64)> = Vec::new();
                    for &(c, v) in entries {
                        let l = layout
                            .local(c)
                            .ok_or_else(|| Error::Contract(format!("node {c} missing from subdomain {}", layout.id)))?;
                        match acc.iter_mut().find(|x| x.0 == l) {
                            Some(x) => x.1 += v,
                            None => acc.push((l, v)),
                        }
                    }
                    acc.retain(|x| x.1 != 0.0);
                    stencil[s] = acc;
                }
                let local =
                    [sides[0].local(j).expect("shared node in lo"), sides[1].local(j).expect("shared node in hi")];
                nodes.push(PairNode {
                    node: j,
                    local,
                    shared_length: *shared_length,
                    stencil,
                    cross: cross_nodes.binary_search(&j).is_ok(),
                });
            }
            pairs.push(PairInterface { lo, hi, nodes });
        }

        let pair_index: HashMap<(usize, usize), usize> =
            pairs.iter().enumerate().map(|(k, pr)| ((pr.lo, pr.hi), k)).collect();
        let mut by_subdomain = vec![Vec::new(); d.num_subdomains()];
        for (k, pr) in pairs.iter().enumerate() {
            by_subdomain[pr.lo].push(k);
            by_subdomain[pr.hi].push(k);
        }

        let mut crosspoints = Vec::with_capacity(cross_nodes.len());
        for &j in &cross_nodes {
            let topo = d.crosspoint_topology(j)?;
            let ops = CrossPointOperators::new(&topo, p, variant);
            let local: Vec<usize> =
                topo.subdomains.iter().map(|&s| layouts[s].local(j).expect("cross-point in closure")).collect();
            let mut spoke_coupling = vec![Vec::new(); topo.len()];
            let off = variant.offdiag_weight();
            for sp in &topo.spokes {
                if off == 0.0 || d.mesh.on_boundary(sp.to_node) {
                    continue;
                }
                let (pa, pb) = (topo.position(sp.pair.0).unwrap(), topo.position(sp.pair.1).unwrap());
                let c = p * sp.length * off;
                spoke_coupling[pa].push((pb, layouts[sp.pair.1].local(sp.to_node).unwrap(), c));
                spoke_coupling[pb].push((pa, layouts[sp.pair.0].local(sp.to_node).unwrap(), c));
            }
            let mut pair_slots = Vec::new();
            for sp in &topo.spokes {
                let k = pair_index[&sp.pair];
                let n = pairs[k].nodes.iter().position(|pn| pn.node == j).expect("cross-point in pair");
                if !pair_slots.contains(&(k, n)) {
                    pair_slots.push((k, n));
                }
            }
            crosspoints.push(CrossPoint { topo, ops, local, spoke_coupling, pair_slots });
        }

        Ok(Self { p, variant, pairs, crosspoints, pair_index, by_subdomain })
    }

    pub fn pair(&self, a: usize, b: usize) -> Option<&PairInterface> {
        self.pair_index.get(&(a.min(b), a.max(b))).map(|&k| &self.pairs[k])
    }

    pub fn pair_id(&self, a: usize, b: usize) -> Option<usize> {
        self.pair_index.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn pairs_of(&self, i: usize) -> &[usize] {
        &self.by_subdomain[i]
    }

    pub fn num_directed_values(&self) -> usize {
        self.pairs.iter().map(|p| 2 * p.nodes.len()).sum()
    }
}

/// Directed traces of the auxiliary variable method.
///
/// `values[pair][0][k]` is `g_{lo,hi;j_k}` (used by `lo`, produced by `hi`),
/// `values[pair][1][k]` is `g_{hi,lo;j_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxTraces {
    pub values: Vec<[Vec<f64>; 2]>,
}

impl AuxTraces {
    pub fn zeros(ifc: &Interfaces) -> Self {
        Self { values: ifc.pairs.iter().map(|p| [vec![0.0; p.nodes.len()], vec![0.0; p.nodes.len()]]).collect() }
    }

    /// Uniform values in `[-1, 1]`, drawn pair by pair, `lo` side first.
    pub fn random<R: Rng>(ifc: &Interfaces, rng: &mut R) -> Self {
        let mut t = Self::zeros(ifc);
        for pv in &mut t.values {
            for side in pv.iter_mut() {
                for v in side.iter_mut() {
                    *v = rng.random_range(-1.0..=1.0);
                }
            }
        }
        t
    }

    /// `g_{target,source;node}`.
    pub fn directed(&self, ifc: &Interfaces, target: usize, source: usize, node: usize) -> Option<f64> {
        let k = ifc.pair_id(target, source)?;
        let pr = &ifc.pairs[k];
        let side = pr.side_of(target)?;
        let n = pr.nodes.iter().position(|pn| pn.node == node)?;
        self.values[k][side].get(n).copied()
    }

    pub fn set_directed(&mut self, ifc: &Interfaces, target: usize, source: usize, node: usize, v: f64) -> Result<()> {
        let missing = || Error::Contract(format!("no trace g({target},{source}) at node {node}"));
        let k = ifc.pair_id(target, source).ok_or_else(missing)?;
        let pr = &ifc.pairs[k];
        let side = pr.side_of(target).ok_or_else(missing)?;
        let n = pr.nodes.iter().position(|pn| pn.node == node).ok_or_else(missing)?;
        self.values[k][side][n] = v;
        Ok(())
    }

    fn check(&self, ifc: &Interfaces) -> Result<()> {
        if self.values.len() != ifc.pairs.len() {
            return Err(Error::Protocol(format!(
                "{} trace blocks for {} interface pairs",
                self.values.len(),
                ifc.pairs.len()
            )));
        }
        for (pv, pr) in self.values.iter().zip(&ifc.pairs) {
            if pv[0].len() != pr.nodes.len() || pv[1].len() != pr.nodes.len() {
                return Err(Error::Protocol(format!("missing directed values on interface ({}, {})", pr.lo, pr.hi)));
            }
        }
        Ok(())
    }

    /// Robin data of subdomain `i`: `g_{i;j} = sum_{i'} g_{i,i';j}`, zero at interior nodes.
    pub fn gather(&self, ifc: &Interfaces, i: usize, len: usize) -> Result<Vec<f64>> {
        self.check(ifc)?;
        let mut g = vec![0.0; len];
        for &k in ifc.pairs_of(i) {
            let pr = &ifc.pairs[k];
            let side = pr.side_of(i).unwrap();
            for (pn, v) in pr.nodes.iter().zip(&self.values[k][side]) {
                g[pn.local[side]] += v;
            }
        }
        Ok(g)
    }

    /// Next snapshot: `g_{i',i;j} = -g_{i,i';j} + 2 (B_{i,i'} u_i)_j` for every directed pair.
    pub fn update(&self, ifc: &Interfaces, solutions: &[Vec<f64>]) -> Result<Self> {
        self.check(ifc)?;
        let mut next = self.clone();
        for (k, pr) in ifc.pairs.iter().enumerate() {
            let (u_lo, u_hi) = (&solutions[pr.lo], &solutions[pr.hi]);
            for (n, pn) in pr.nodes.iter().enumerate() {
                // value for hi comes from lo's solution, and vice versa
                next.values[k][1][n] = -self.values[k][0][n] + 2.0 * pn.apply(0, u_lo);
                next.values[k][0][n] = -self.values[k][1][n] + 2.0 * pn.apply(1, u_hi);
            }
        }
        Ok(next)
    }

    /// Split Neumann values `N_{i,i';j} = g_{i,i';j} - (p/2) L_{i,i';j} u_{i;j}`
    /// where `u_i` was computed from these traces. Same layout as `values`.
    pub fn neumann_split(&self, ifc: &Interfaces, solutions: &[Vec<f64>]) -> Vec<[Vec<f64>; 2]> {
        ifc.pairs
            .iter()
            .zip(&self.values)
            .map(|(pr, pv)| {
                let mut out = [Vec::new(), Vec::new()];
                for side in 0..2 {
                    let u = &solutions[if side == 0 { pr.lo } else { pr.hi }];
                    out[side] = pr.nodes.iter().zip(&pv[side]).map(|(pn, g)| g - pn.apply(side, u)).collect();
                }
                out
            })
            .collect()
    }

    /// `sum |g_{i,i';j}|^2 / (2 p L_{i,i';j})` over all directed values.
    pub fn energy(&self, ifc: &Interfaces) -> f64 {
        ifc.pairs
            .iter()
            .zip(&self.values)
            .map(|(pr, pv)| {
                pr.nodes
                    .iter()
                    .enumerate()
                    .map(|(n, pn)| (pv[0][n].powi(2) + pv[1][n].powi(2)) / (2.0 * ifc.p * pn.shared_length))
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flat_map(|pv| pv.iter().flatten()).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Fixed-point traces built from per-subdomain restrictions of the
    /// mono-domain solution. At cross-points the Neumann values are split
    /// along the spoke-sharing graph.
    pub fn from_monodomain(ifc: &Interfaces, systems: &[SubdomainSystem], restricted: &[Vec<f64>]) -> Result<Self> {
        let mut t = Self::zeros(ifc);
        let bu: Vec<Vec<f64>> = systems.iter().zip(restricted).map(|(s, u)| s.b.mul_vec(u)).collect();
        for (k, pr) in ifc.pairs.iter().enumerate() {
            for (n, pn) in pr.nodes.iter().enumerate() {
                if pn.cross {
                    continue;
                }
                for (side, sub) in [(0, pr.lo), (1, pr.hi)] {
                    let l = pn.local[side];
                    t.values[k][side][n] = systems[sub].neumann_at(l, &restricted[sub]) + bu[sub][l];
                }
            }
        }
        for cp in &ifc.crosspoints {
            let mut phi: Vec<f64> = cp
                .topo
                .subdomains
                .iter()
                .zip(&cp.local)
                .map(|(&s, &l)| systems[s].neumann_at(l, &restricted[s]))
                .collect();
            let mean = phi.iter().sum::<f64>() / phi.len() as f64;
            phi.iter_mut().for_each(|v| *v -= mean);
            let graph = FlowGraph::new(phi.len(), &cp.graph_edges(), phi)?;
            let psi = split_flow(&graph)?;
            for &(k, n) in &cp.pair_slots {
                let pr = &ifc.pairs[k];
                let (a, b) = (cp.topo.position(pr.lo).unwrap(), cp.topo.position(pr.hi).unwrap());
                let pn = &pr.nodes[n];
                t.values[k][0][n] = psi.get(a, b).unwrap() + pn.apply(0, &restricted[pr.lo]);
                t.values[k][1][n] = psi.get(b, a).unwrap() + pn.apply(1, &restricted[pr.hi]);
            }
        }
        Ok(t)
    }
}

/// Per-subdomain traces of the complete communication method (zero at interior nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct CompleteTraces {
    pub g: Vec<Vec<f64>>,
}

impl CompleteTraces {
    pub fn zeros(systems: &[SubdomainSystem]) -> Self {
        Self { g: systems.iter().map(|s| vec![0.0; s.len()]).collect() }
    }

    /// Uniform values in `[-1, 1]` on every subdomain boundary node.
    pub fn random<R: Rng>(systems: &[SubdomainSystem], rng: &mut R) -> Self {
        let mut t = Self::zeros(systems);
        for (s, g) in systems.iter().zip(&mut t.g) {
            for &l in &s.layout.boundary {
                g[l] = rng.random_range(-1.0..=1.0);
            }
        }
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.g.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Next snapshot from the traces that produced `solutions`.
    ///
    /// Two-subdomain nodes use `g_i = -g_{i'} + 2 (B_{i,i'} u_{i'})_j`;
    /// cross-points use `A_D u + A_N N` plus the spoke couplings of a
    /// non-lumped interface matrix.
    pub fn update(&self, ifc: &Interfaces, systems: &[SubdomainSystem], solutions: &[Vec<f64>]) -> Result<Self> {
        let mut next = self.clone();
        for pr in &ifc.pairs {
            for pn in pr.nodes.iter().filter(|pn| !pn.cross) {
                let (l_lo, l_hi) = (pn.local[0], pn.local[1]);
                next.g[pr.lo][l_lo] = -self.g[pr.hi][l_hi] + 2.0 * pn.apply(1, &solutions[pr.hi]);
                next.g[pr.hi][l_hi] = -self.g[pr.lo][l_lo] + 2.0 * pn.apply(0, &solutions[pr.lo]);
            }
        }
        for cp in &ifc.crosspoints {
            let n = cp.topo.len();
            let mut u = Vec::with_capacity(n);
            let mut neumann = Vec::with_capacity(n);
            for (&s, &l) in cp.topo.subdomains.iter().zip(&cp.local) {
                u.push(solutions[s][l]);
                neumann.push(systems[s].neumann_at(l, &solutions[s]));
            }
            let mut g = cp.ops.update(&u, &neumann)?;
            for (a, terms) in cp.spoke_coupling.iter().enumerate() {
                for &(b, l, c) in terms {
                    g[a] += c * solutions[cp.topo.subdomains[b]][l];
                }
            }
            for ((&s, &l), v) in cp.topo.subdomains.iter().zip(&cp.local).zip(g) {
                next.g[s][l] = v;
            }
        }
        Ok(next)
    }

    /// `g_i = (A_i + B_i) u_i - f_i` on boundary nodes.
    pub fn from_monodomain(systems: &[SubdomainSystem], restricted: &[Vec<f64>]) -> Self {
        let g = systems
            .iter()
            .zip(restricted)
            .map(|(s, u)| {
                let bu = s.b.mul_vec(u);
                let mut g = vec![0.0; s.len()];
                for &l in &s.layout.boundary {
                    g[l] = s.neumann_at(l, u) + bu[l];
                }
                g
            })
            .collect();
        Self { g }
    }
}
