//! Q1 finite-element assembly on the subdomains of a cartesian decomposition.
//!
//! Each subdomain carries its interior matrix `A_i` (reaction mass plus
//! stiffness), an interface mass matrix `B_i` weighted by the Robin parameter,
//! and its share `f_i` of the load. Outer-boundary nodes are eliminated.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::linalg::{factorize, Factorization, SparseSym};
use crate::mesh::{Decomposition, InterfaceEdge};

/// Which interface mass matrix enters the Robin term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterfaceMatrix {
    Consistent,
    Lumped,
    /// `(1 - omega) B_cons + omega B_lump`; `omega` may exceed 1.
    Overlumped(f64),
}

impl InterfaceMatrix {
    pub fn omega(&self) -> f64 {
        match *self {
            InterfaceMatrix::Consistent => 0.0,
            InterfaceMatrix::Lumped => 1.0,
            InterfaceMatrix::Overlumped(w) => w,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.omega();
        if !(w >= 0.0) || !w.is_finite() {
            return Err(invalid(format!("overlump factor must be >= 0, got {w}")));
        }
        Ok(())
    }

    /// Diagonal weight per unit `p * |edge|`.
    pub fn diag_weight(&self) -> f64 {
        let w = self.omega();
        (1.0 - w) / 3.0 + w / 2.0
    }

    /// Off-diagonal weight per unit `p * |edge|`.
    pub fn offdiag_weight(&self) -> f64 {
        (1.0 - self.omega()) / 6.0
    }
}

impl fmt::Display for InterfaceMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InterfaceMatrix::Consistent => write!(f, "consistent"),
            InterfaceMatrix::Lumped => write!(f, "lumped"),
            InterfaceMatrix::Overlumped(w) => write!(f, "overlumped({w})"),
        }
    }
}

/// Right-hand side description.
#[derive(Clone)]
pub enum Load {
    Zero,
    /// Closed-form source, integrated with 2x2 Gauss per cell.
    Function(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
    /// Globally assembled nodal vector, split among the subdomains sharing each node.
    Nodal(Vec<f64>),
}

impl fmt::Debug for Load {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Load::Zero => write!(f, "Zero"),
            Load::Function(_) => write!(f, "Function(..)"),
            Load::Nodal(v) => write!(f, "Nodal({} values)", v.len()),
        }
    }
}

impl Load {
    pub fn function(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Load::Function(Arc::new(f))
    }
}

/// Source term of the Poisson benchmark on `(0, 4)^2`; the exact solution is
/// `x (4 - x) y (4 - y)`.
pub fn poisson_benchmark_rhs(x: f64, y: f64) -> f64 {
    2.0 * (y * (4.0 - y) + x * (4.0 - x))
}

/// Local numbering of the non-eliminated nodes in the closure of one subdomain.
#[derive(Debug, Clone)]
pub struct SubdomainLayout {
    pub id: usize,
    /// Local to global node index, row-major.
    pub nodes: Vec<usize>,
    index: HashMap<usize, usize>,
    /// Local indices of nodes on the subdomain boundary (not on the outer boundary).
    pub boundary: Vec<usize>,
}

impl SubdomainLayout {
    pub fn new(d: &Decomposition, i: usize) -> Self {
        let m = &d.mesh;
        let (xs, ys) = d.cell_range(i);
        let mut nodes = Vec::new();
        let mut boundary = Vec::new();
        for iy in ys.start..=ys.end {
            for ix in xs.start..=xs.end {
                let j = m.node(ix, iy);
                if m.on_boundary(j) {
                    continue;
                }
                if ix == xs.start || ix == xs.end || iy == ys.start || iy == ys.end {
                    boundary.push(nodes.len());
                }
                nodes.push(j);
            }
        }
        let index = nodes.iter().enumerate().map(|(k, &j)| (j, k)).collect();
        Self { id: i, nodes, index, boundary }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn local(&self, j: usize) -> Option<usize> {
        self.index.get(&j).copied()
    }
}

const MASS_PATTERN: [[f64; 4]; 4] =
    [[4.0, 2.0, 1.0, 2.0], [2.0, 4.0, 2.0, 1.0], [1.0, 2.0, 4.0, 2.0], [2.0, 1.0, 2.0, 4.0]];
const STIFF_X: [[f64; 4]; 4] =
    [[2.0, -2.0, -1.0, 1.0], [-2.0, 2.0, 1.0, -1.0], [-1.0, 1.0, 2.0, -2.0], [1.0, -1.0, -2.0, 2.0]];
const STIFF_Y: [[f64; 4]; 4] =
    [[2.0, 1.0, -1.0, -2.0], [1.0, 2.0, -2.0, -1.0], [-1.0, -2.0, 2.0, 1.0], [-2.0, -1.0, 1.0, 2.0]];

/// Exact `eta * mass + stiffness` element matrix of an `hx x hy` rectangle,
/// corners counter-clockwise from the lower-left.
pub fn element_matrix(hx: f64, hy: f64, eta: f64) -> [[f64; 4]; 4] {
    let (m, kx, ky) = (eta * hx * hy / 36.0, hy / (6.0 * hx), hx / (6.0 * hy));
    let mut out = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            out[a][b] = m * MASS_PATTERN[a][b] + kx * STIFF_X[a][b] + ky * STIFF_Y[a][b];
        }
    }
    out
}

pub fn assemble_interior(d: &Decomposition, layout: &SubdomainLayout, eta: f64) -> Result<SparseSym> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(invalid(format!("reaction coefficient must be >= 0, got {eta}")));
    }
    let m = &d.mesh;
    let ke = element_matrix(m.hx(), m.hy(), eta);
    let (xs, ys) = d.cell_range(layout.id);
    let mut t = Vec::with_capacity(16 * xs.len() * ys.len());
    for cy in ys.clone() {
        for cx in xs.clone() {
            let loc = m.cell_nodes(cx, cy).map(|j| layout.local(j));
            for a in 0..4 {
                let Some(ra) = loc[a] else { continue };
                for b in a..4 {
                    let Some(rb) = loc[b] else { continue };
                    t.push((ra, rb, ke[a][b]));
                }
            }
        }
    }
    Ok(SparseSym::from_triplets(layout.len(), t))
}

/// Interface edges on the boundary of subdomain `i`.
pub fn subdomain_edges(edges: &[InterfaceEdge], i: usize) -> impl Iterator<Item = &InterfaceEdge> {
    edges.iter().filter(move |e| e.subdomains.0 == i || e.subdomains.1 == i)
}

/// Entries `(global row, global col, value)` of one edge's interface mass
/// contribution, both orientations of the off-diagonal included.
pub fn edge_entries(e: &InterfaceEdge, p: f64, variant: InterfaceMatrix) -> [(usize, usize, f64); 4] {
    let (d, o) = (p * e.length * variant.diag_weight(), p * e.length * variant.offdiag_weight());
    let [a, b] = e.nodes;
    [(a, a, d), (b, b, d), (a, b, o), (b, a, o)]
}

pub fn assemble_interface(
    d: &Decomposition,
    layout: &SubdomainLayout,
    edges: &[InterfaceEdge],
    p: f64,
    variant: InterfaceMatrix,
) -> Result<SparseSym> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(invalid(format!("Robin parameter must be > 0, got {p}")));
    }
    variant.validate()?;
    debug_assert!(layout.nodes.iter().all(|&j| !d.mesh.on_boundary(j)));
    let mut t = Vec::new();
    for e in subdomain_edges(edges, layout.id) {
        for (r, c, v) in edge_entries(e, p, variant) {
            if r > c {
                continue;
            }
            if let (Some(lr), Some(lc)) = (layout.local(r), layout.local(c)) {
                t.push((lr, lc, v));
            }
        }
    }
    Ok(SparseSym::from_triplets(layout.len(), t))
}

const GAUSS: [f64; 2] = [0.5 - 0.288_675_134_594_812_9, 0.5 + 0.288_675_134_594_812_9];

pub fn assemble_load(d: &Decomposition, layout: &SubdomainLayout, load: &Load) -> Result<Vec<f64>> {
    let m = &d.mesh;
    let mut f = vec![0.0; layout.len()];
    match load {
        Load::Zero => {}
        Load::Function(src) => {
            let (hx, hy) = (m.hx(), m.hy());
            let w = 0.25 * hx * hy;
            let (xs, ys) = d.cell_range(layout.id);
            for cy in ys {
                for cx in xs.clone() {
                    let loc = m.cell_nodes(cx, cy).map(|j| layout.local(j));
                    for &gy in &GAUSS {
                        for &gx in &GAUSS {
                            let v = src((cx as f64 + gx) * hx, (cy as f64 + gy) * hy) * w;
                            let shape = [(1.0 - gx) * (1.0 - gy), gx * (1.0 - gy), gx * gy, (1.0 - gx) * gy];
                            for k in 0..4 {
                                if let Some(l) = loc[k] {
                                    f[l] += v * shape[k];
                                }
                            }
                        }
                    }
                }
            }
        }
        Load::Nodal(global) => {
            if global.len() != m.num_nodes() {
                return Err(invalid(format!(
                    "nodal load has {} values, mesh has {} nodes",
                    global.len(),
                    m.num_nodes()
                )));
            }
            for (l, &j) in layout.nodes.iter().enumerate() {
                // interior nodes touch four cells; split by the share owned here
                let (ix, iy) = m.node_ij(j);
                let owned = [(ix - 1, iy - 1), (ix, iy - 1), (ix, iy), (ix - 1, iy)]
                    .iter()
                    .filter(|&&(cx, cy)| d.owner_of(cx, cy) == layout.id)
                    .count();
                f[l] = global[j] * owned as f64 / 4.0;
            }
        }
    }
    Ok(f)
}

/// Parameters shared by every subdomain system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub p: f64,
    pub eta: f64,
    pub variant: InterfaceMatrix,
}

/// Discrete Neumann values on the boundary nodes of one subdomain.
#[derive(Debug, Clone, PartialEq)]
pub struct NeumannValues {
    /// Global node indices.
    pub nodes: Vec<usize>,
    pub values: Vec<f64>,
}

impl NeumannValues {
    pub fn get(&self, j: usize) -> Option<f64> {
        self.nodes.iter().position(|&n| n == j).map(|k| self.values[k])
    }
}

/// Assembled and factorized Robin subproblem of one subdomain.
#[derive(Debug, Clone)]
pub struct SubdomainSystem {
    pub layout: SubdomainLayout,
    pub a: SparseSym,
    pub b: SparseSym,
    pub f: Vec<f64>,
    pub params: SystemParams,
    factor: Factorization,
}

impl SubdomainSystem {
    pub fn assemble(
        d: &Decomposition,
        edges: &[InterfaceEdge],
        i: usize,
        params: SystemParams,
        load: &Load,
    ) -> Result<Self> {
        let layout = SubdomainLayout::new(d, i);
        let a = assemble_interior(d, &layout, params.eta)?;
        let b = assemble_interface(d, &layout, edges, params.p, params.variant)?;
        let f = assemble_load(d, &layout, load)?;
        let factor = factorize(&a.add(&b))?;
        Ok(Self { layout, a, b, f, params, factor })
    }

    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    /// Solves `(A_i + B_i) u = f_i + g`.
    pub fn solve(&self, g: &[f64]) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = self.f.iter().zip(g).map(|(a, b)| a + b).collect();
        self.factor.solve(&rhs)
    }

    /// `(A_i u)_l - f_{i;l}` at local node `l`.
    #[inline]
    pub fn neumann_at(&self, l: usize, u: &[f64]) -> f64 {
        self.a.row_dot(l, u) - self.f[l]
    }

    pub fn discrete_neumann(&self, u: &[f64]) -> NeumannValues {
        let nodes = self.layout.boundary.iter().map(|&l| self.layout.nodes[l]).collect();
        let values = self.layout.boundary.iter().map(|&l| self.neumann_at(l, u)).collect();
        NeumannValues { nodes, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use approx::assert_abs_diff_eq;

    fn decomp(nx: usize, ny: usize, lx: f64, ly: f64, px: usize, py: usize) -> Decomposition {
        Decomposition::new(Mesh::new(nx, ny, lx, ly).unwrap(), px, py).unwrap()
    }

    #[test]
    fn single_element_corner_entry() {
        for (h, eta) in [(1.0, 0.0), (0.5, 1.0), (0.1, 3.0)] {
            let ke = element_matrix(h, h, eta);
            assert_abs_diff_eq!(ke[0][0], eta * h * h / 9.0 + 2.0 / 3.0, epsilon = 1e-15);
        }
        // degenerate 2x2 geometry: the cross-point row of each subdomain
        let d = decomp(2, 2, 2.0, 2.0, 2, 2);
        for i in 0..4 {
            let layout = SubdomainLayout::new(&d, i);
            assert_eq!(layout.nodes, vec![4]);
            let a = assemble_interior(&d, &layout, 0.0).unwrap();
            assert_abs_diff_eq!(a.get(0, 0), 2.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn interior_stencil_is_eight_over_three() {
        let d = decomp(4, 4, 4.0, 4.0, 1, 1);
        let layout = SubdomainLayout::new(&d, 0);
        let a = assemble_interior(&d, &layout, 0.0).unwrap();
        let c = layout.local(d.mesh.node(2, 2)).unwrap();
        assert_abs_diff_eq!(a.get(c, c), 8.0 / 3.0, epsilon = 1e-14);
        for (dx, dy) in [(-1i64, -1i64), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)] {
            let j = d.mesh.node((2 + dx) as usize, (2 + dy) as usize);
            assert_abs_diff_eq!(a.get(c, layout.local(j).unwrap()), -1.0 / 3.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn stiffness_annihilates_constants_away_from_boundary() {
        // subdomain 4 of a 3x3 grid does not touch the outer boundary
        let d = decomp(9, 9, 3.0, 3.0, 3, 3);
        let layout = SubdomainLayout::new(&d, 4);
        assert_eq!(layout.len(), 16);
        let a = assemble_interior(&d, &layout, 0.0).unwrap();
        for v in a.mul_vec(&vec![1.0; layout.len()]) {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn lumped_crosspoint_row_is_ph() {
        let d = decomp(2, 2, 2.0, 2.0, 2, 2);
        let edges = d.interface_edges();
        for p in [0.5, 2.0] {
            for i in 0..4 {
                let layout = SubdomainLayout::new(&d, i);
                let b = assemble_interface(&d, &layout, &edges, p, InterfaceMatrix::Lumped).unwrap();
                assert_abs_diff_eq!(b.get(0, 0), p * 1.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn overlump_endpoints() {
        let d = decomp(6, 6, 3.0, 3.0, 2, 2);
        let edges = d.interface_edges();
        let layout = SubdomainLayout::new(&d, 3);
        let get = |v| assemble_interface(&d, &layout, &edges, 1.7, v).unwrap();
        assert_eq!(get(InterfaceMatrix::Overlumped(0.0)), get(InterfaceMatrix::Consistent));
        assert_eq!(get(InterfaceMatrix::Overlumped(1.0)), get(InterfaceMatrix::Lumped));
    }

    #[test]
    fn interface_rejects_bad_parameters() {
        let d = decomp(4, 4, 1.0, 1.0, 2, 2);
        let edges = d.interface_edges();
        let layout = SubdomainLayout::new(&d, 0);
        assert!(assemble_interface(&d, &layout, &edges, 0.0, InterfaceMatrix::Lumped).is_err());
        assert!(assemble_interface(&d, &layout, &edges, 1.0, InterfaceMatrix::Overlumped(-1.0)).is_err());
        assert!(assemble_interior(&d, &layout, -1.0).is_err());
    }

    #[test]
    fn row_sums_and_stencil() {
        let d = decomp(8, 8, 2.0, 2.0, 2, 2);
        let h = 0.25;
        let p = 3.0;
        let edges = d.interface_edges();
        let layout = SubdomainLayout::new(&d, 0);
        let bc = assemble_interface(&d, &layout, &edges, p, InterfaceMatrix::Consistent).unwrap();
        let bl = assemble_interface(&d, &layout, &edges, p, InterfaceMatrix::Lumped).unwrap();
        for r in 0..layout.len() {
            assert!(bl.row(r).all(|(c, v)| c == r || v == 0.0));
            // rows next to the eliminated outer boundary lose a column
            let (ix, iy) = d.mesh.node_ij(layout.nodes[r]);
            if ix == 1 || iy == 1 {
                continue;
            }
            assert!((bc.row_sum(r) - bl.get(r, r)).abs() <= 1e-14 * bl.get(r, r).abs().max(1.0));
        }
        // node (4, 2) sits on the vertical interface between subdomains 0 and 1
        let j = layout.local(d.mesh.node(4, 2)).unwrap();
        let below = layout.local(d.mesh.node(4, 1)).unwrap();
        let above = layout.local(d.mesh.node(4, 3)).unwrap();
        let s = p * h / 6.0;
        assert_abs_diff_eq!(bl.get(j, j) - bc.get(j, j), 2.0 * s, epsilon = 1e-14);
        assert_abs_diff_eq!(bl.get(j, below) - bc.get(j, below), -s, epsilon = 1e-14);
        assert_abs_diff_eq!(bl.get(j, above) - bc.get(j, above), -s, epsilon = 1e-14);
    }

    #[test]
    fn constant_load_integrates_to_h_squared() {
        let d = decomp(8, 8, 2.0, 2.0, 2, 2);
        let layout = SubdomainLayout::new(&d, 0);
        let f = assemble_load(&d, &layout, &Load::function(|_, _| 1.0)).unwrap();
        let l = layout.local(d.mesh.node(2, 2)).unwrap();
        assert_abs_diff_eq!(f[l], 0.25 * 0.25, epsilon = 1e-15);
        let z = assemble_load(&d, &layout, &Load::Zero).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nodal_load_split_sums_back() {
        let d = decomp(6, 6, 3.0, 3.0, 3, 3);
        let global: Vec<f64> = (0..d.mesh.num_nodes()).map(|j| 1.0 + j as f64).collect();
        let mut sum = vec![0.0; d.mesh.num_nodes()];
        for i in 0..9 {
            let layout = SubdomainLayout::new(&d, i);
            let f = assemble_load(&d, &layout, &Load::Nodal(global.clone())).unwrap();
            for (l, &j) in layout.nodes.iter().enumerate() {
                sum[j] += f[l];
            }
        }
        for j in 0..d.mesh.num_nodes() {
            if !d.mesh.on_boundary(j) {
                assert_eq!(sum[j], global[j]);
            }
        }
    }

    #[test]
    fn neumann_of_single_element_hat() {
        let d = decomp(2, 2, 2.0, 2.0, 2, 2);
        let edges = d.interface_edges();
        let params = SystemParams { p: 2.0, eta: 0.0, variant: InterfaceMatrix::Lumped };
        let sys = SubdomainSystem::assemble(&d, &edges, 0, params, &Load::Zero).unwrap();
        let n = sys.discrete_neumann(&[1.0]);
        assert_eq!(n.nodes, vec![4]);
        assert_abs_diff_eq!(n.values[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(sys.discrete_neumann(&[0.0]).values, vec![0.0]);
    }

    #[test]
    fn green_residual_identity() {
        let d = decomp(6, 6, 3.0, 3.0, 3, 3);
        let edges = d.interface_edges();
        let params = SystemParams { p: 1.3, eta: 0.4, variant: InterfaceMatrix::Overlumped(2.5) };
        let load = Load::function(poisson_benchmark_rhs);
        let sys = SubdomainSystem::assemble(&d, &edges, 4, params, &load).unwrap();
        let g: Vec<f64> = (0..sys.len()).map(|k| ((k * 7) % 5) as f64 - 2.0).collect();
        let u = sys.solve(&g).unwrap();
        let bu = sys.b.mul_vec(&u);
        for &l in &sys.layout.boundary {
            let lhs = sys.neumann_at(l, &u) + bu[l];
            assert!((lhs - g[l]).abs() <= 1e-12 * g[l].abs().max(1.0));
        }
        let sym = sys.a.to_dense();
        assert_eq!(sym.clone(), sym.transpose());
    }
}
