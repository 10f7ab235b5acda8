//! Structured Q1 meshes of a rectangle and their cartesian decompositions.
//!
//! Nodes are numbered row-major, `j = ix + (nx + 1) * iy`, cells likewise
//! with `c = cx + nx * cy`. Subdomains are numbered `col + px * row`
//! (0-based), so subdomain 0 sits in the lower-left corner.

use std::f64::consts::TAU;

use crate::error::{invalid, Error, Result};

/// Uniform cartesian mesh of `(0, lx) x (0, ly)` with `nx x ny` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Mesh {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid(format!("cell counts must be positive, got {nx}x{ny}")));
        }
        if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
            return Err(invalid(format!("extents must be positive, got {lx}x{ly}")));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn num_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn node(&self, ix: usize, iy: usize) -> usize {
        ix + (self.nx + 1) * iy
    }

    #[inline]
    pub fn node_ij(&self, j: usize) -> (usize, usize) {
        (j % (self.nx + 1), j / (self.nx + 1))
    }

    pub fn coords(&self, j: usize) -> [f64; 2] {
        let (ix, iy) = self.node_ij(j);
        [ix as f64 * self.hx(), iy as f64 * self.hy()]
    }

    pub fn on_boundary(&self, j: usize) -> bool {
        let (ix, iy) = self.node_ij(j);
        ix == 0 || iy == 0 || ix == self.nx || iy == self.ny
    }

    #[inline]
    pub fn cell(&self, cx: usize, cy: usize) -> usize {
        cx + self.nx * cy
    }

    /// Corner nodes of cell `(cx, cy)`, counter-clockwise from the lower-left.
    pub fn cell_nodes(&self, cx: usize, cy: usize) -> [usize; 4] {
        [self.node(cx, cy), self.node(cx + 1, cy), self.node(cx + 1, cy + 1), self.node(cx, cy + 1)]
    }
}

/// Grid of `px x py` rectangular subdomains aligned with mesh lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub mesh: Mesh,
    pub px: usize,
    pub py: usize,
}

/// Role of a mesh node in the decomposition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeClass {
    Interior(usize),
    /// Shared by exactly two subdomain closures, `(lo, hi)` with `lo < hi`.
    Interface(usize, usize),
    /// Three or more subdomains meet; incident subdomains in ascending order.
    CrossPoint(Vec<usize>),
    /// On the outer boundary, eliminated by the homogeneous Dirichlet condition.
    PhysicalBoundary,
}

/// A mesh edge not on the outer boundary whose two adjacent cells belong to
/// different subdomains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceEdge {
    pub nodes: [usize; 2],
    pub length: f64,
    /// `(lo, hi)` with `lo < hi`.
    pub subdomains: (usize, usize),
}

impl InterfaceEdge {
    pub fn touches(&self, j: usize) -> bool {
        self.nodes[0] == j || self.nodes[1] == j
    }

    pub fn other(&self, j: usize) -> usize {
        if self.nodes[0] == j {
            self.nodes[1]
        } else {
            self.nodes[0]
        }
    }
}

/// An interface edge leaving a cross-point, shared by two incident subdomains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharedSpoke {
    pub pair: (usize, usize),
    pub to_node: usize,
    pub length: f64,
}

/// Local geometry around a cross-point.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossPointTopology {
    pub node: usize,
    /// Incident subdomains, counter-clockwise by centroid angle.
    pub subdomains: Vec<usize>,
    pub spokes: Vec<SharedSpoke>,
}

impl CrossPointTopology {
    /// Orders `members` (subdomain, centroid) counter-clockwise around `center`,
    /// starting from the smallest angle in `[0, 2pi)`.
    pub fn new(node: usize, center: [f64; 2], members: &[(usize, [f64; 2])], spokes: Vec<SharedSpoke>) -> Result<Self> {
        if members.len() < 3 {
            return Err(Error::Contract(format!("a cross-point needs at least 3 subdomains, got {}", members.len())));
        }
        let mut keyed: Vec<(f64, usize)> = members
            .iter()
            .map(|&(s, c)| {
                let a = (c[1] - center[1]).atan2(c[0] - center[0]);
                (if a < 0.0 { a + TAU } else { a }, s)
            })
            .collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let subdomains: Vec<usize> = keyed.into_iter().map(|(_, s)| s).collect();
        for sp in &spokes {
            let (a, b) = sp.pair;
            if a == b || !subdomains.contains(&a) || !subdomains.contains(&b) {
                return Err(Error::Contract(format!("spoke pair ({a}, {b}) is not a pair of incident subdomains")));
            }
        }
        let spokes = spokes
            .into_iter()
            .map(|s| SharedSpoke { pair: (s.pair.0.min(s.pair.1), s.pair.0.max(s.pair.1)), ..s })
            .collect();
        Ok(Self { node, subdomains, spokes })
    }

    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    pub fn position(&self, sub: usize) -> Option<usize> {
        self.subdomains.iter().position(|&s| s == sub)
    }

    pub fn shared_spokes(&self, a: usize, b: usize) -> impl Iterator<Item = &SharedSpoke> + '_ {
        let key = (a.min(b), a.max(b));
        self.spokes.iter().filter(move |s| s.pair == key)
    }

    /// Total length of the spokes shared by `a` and `b` (symmetric).
    pub fn shared_length(&self, a: usize, b: usize) -> f64 {
        self.shared_spokes(a, b).map(|s| s.length).sum()
    }

    /// Total length of the spokes on the boundary of subdomain `a`.
    pub fn spoke_length(&self, a: usize) -> f64 {
        self.spokes.iter().filter(|s| s.pair.0 == a || s.pair.1 == a).map(|s| s.length).sum()
    }

    /// Whether the spoke-sharing graph over incident subdomains is connected.
    pub fn is_connected(&self) -> bool {
        let n = self.subdomains.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(k) = stack.pop() {
            let s = self.subdomains[k];
            for sp in &self.spokes {
                let other = if sp.pair.0 == s {
                    sp.pair.1
                } else if sp.pair.1 == s {
                    sp.pair.0
                } else {
                    continue;
                };
                if let Some(q) = self.position(other) {
                    if !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        seen.into_iter().all(|v| v)
    }
}

impl Decomposition {
    pub fn new(mesh: Mesh, px: usize, py: usize) -> Result<Self> {
        if px == 0 || py == 0 {
            return Err(invalid(format!("subdomain counts must be positive, got {px}x{py}")));
        }
        if !mesh.nx.is_multiple_of(px) || !mesh.ny.is_multiple_of(py) {
            return Err(invalid(format!("subdomain grid {px}x{py} does not divide the {}x{} mesh", mesh.nx, mesh.ny)));
        }
        Ok(Self { mesh, px, py })
    }

    pub fn num_subdomains(&self) -> usize {
        self.px * self.py
    }

    /// Cells per subdomain along each axis.
    pub fn block(&self) -> (usize, usize) {
        (self.mesh.nx / self.px, self.mesh.ny / self.py)
    }

    pub fn owner(&self, cell: usize) -> usize {
        let (bx, by) = self.block();
        let cx = cell % self.mesh.nx;
        let cy = cell / self.mesh.nx;
        cx / bx + self.px * (cy / by)
    }

    pub fn owner_of(&self, cx: usize, cy: usize) -> usize {
        let (bx, by) = self.block();
        cx / bx + self.px * (cy / by)
    }

    /// Half-open cell ranges `(cx0..cx1, cy0..cy1)` of subdomain `i`.
    pub fn cell_range(&self, i: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let (bx, by) = self.block();
        let (col, row) = (i % self.px, i / self.px);
        (col * bx..(col + 1) * bx, row * by..(row + 1) * by)
    }

    pub fn centroid(&self, i: usize) -> [f64; 2] {
        let (xs, ys) = self.cell_range(i);
        let m = &self.mesh;
        [0.5 * (xs.start + xs.end) as f64 * m.hx(), 0.5 * (ys.start + ys.end) as f64 * m.hy()]
    }

    /// Subdomains whose closure contains node `j`, ascending.
    pub fn subdomains_at(&self, j: usize) -> Vec<usize> {
        let (ix, iy) = self.mesh.node_ij(j);
        let (bx, by) = self.block();
        let cols = span(ix, bx, self.px);
        let rows = span(iy, by, self.py);
        let mut out = Vec::with_capacity(4);
        for &r in &rows {
            for &c in &cols {
                out.push(c + self.px * r);
            }
        }
        out.sort_unstable();
        out
    }

    pub fn classify_node(&self, j: usize) -> NodeClass {
        if self.mesh.on_boundary(j) {
            return NodeClass::PhysicalBoundary;
        }
        let subs = self.subdomains_at(j);
        match subs.len() {
            1 => NodeClass::Interior(subs[0]),
            2 => NodeClass::Interface(subs[0], subs[1]),
            _ => NodeClass::CrossPoint(subs),
        }
    }

    pub fn classify_nodes(&self) -> Vec<NodeClass> {
        (0..self.mesh.num_nodes()).map(|j| self.classify_node(j)).collect()
    }

    pub fn cross_points(&self) -> Vec<usize> {
        (0..self.mesh.num_nodes()).filter(|&j| matches!(self.classify_node(j), NodeClass::CrossPoint(_))).collect()
    }

    /// All interface edges, in mesh order (horizontal edges first).
    pub fn interface_edges(&self) -> Vec<InterfaceEdge> {
        let m = &self.mesh;
        let mut out = Vec::new();
        for iy in 1..m.ny {
            for ix in 0..m.nx {
                let (a, b) = (self.owner_of(ix, iy - 1), self.owner_of(ix, iy));
                if a != b {
                    out.push(InterfaceEdge {
                        nodes: [m.node(ix, iy), m.node(ix + 1, iy)],
                        length: m.hx(),
                        subdomains: (a.min(b), a.max(b)),
                    });
                }
            }
        }
        for iy in 0..m.ny {
            for ix in 1..m.nx {
                let (a, b) = (self.owner_of(ix - 1, iy), self.owner_of(ix, iy));
                if a != b {
                    out.push(InterfaceEdge {
                        nodes: [m.node(ix, iy), m.node(ix, iy + 1)],
                        length: m.hy(),
                        subdomains: (a.min(b), a.max(b)),
                    });
                }
            }
        }
        out
    }

    /// Interface edges leaving node `j`.
    pub fn spokes(&self, j: usize) -> Vec<InterfaceEdge> {
        let m = &self.mesh;
        let (ix, iy) = m.node_ij(j);
        let mut out = Vec::with_capacity(4);
        // horizontal edges [j, j+1] and [j-1, j] lie between cell rows iy-1 and iy
        if iy >= 1 && iy < m.ny {
            if ix < m.nx {
                let (a, b) = (self.owner_of(ix, iy - 1), self.owner_of(ix, iy));
                if a != b {
                    out.push(InterfaceEdge {
                        nodes: [j, m.node(ix + 1, iy)],
                        length: m.hx(),
                        subdomains: (a.min(b), a.max(b)),
                    });
                }
            }
            if ix >= 1 {
                let (a, b) = (self.owner_of(ix - 1, iy - 1), self.owner_of(ix - 1, iy));
                if a != b {
                    out.push(InterfaceEdge {
                        nodes: [j, m.node(ix - 1, iy)],
                        length: m.hx(),
                        subdomains: (a.min(b), a.max(b)),
                    });
                }
            }
        }
        if ix >= 1 && ix < m.nx {
            if iy < m.ny {
                let (a, b) = (self.owner_of(ix - 1, iy), self.owner_of(ix, iy));
                if a != b {
                    out.push(InterfaceEdge {
                        nodes: [j, m.node(ix, iy + 1)],
                        length: m.hy(),
                        subdomains: (a.min(b), a.max(b)),
                    });
                }
            }
            if iy >= 1 {
                let (a, b) = (self.owner_of(ix - 1, iy - 1), self.owner_of(ix, iy - 1));
                if a != b {
                    out.push(InterfaceEdge {
                        nodes: [j, m.node(ix, iy - 1)],
                        length: m.hy(),
                        subdomains: (a.min(b), a.max(b)),
                    });
                }
            }
        }
        out
    }

    pub fn crosspoint_topology(&self, j: usize) -> Result<CrossPointTopology> {
        let subs = match self.classify_node(j) {
            NodeClass::CrossPoint(s) => s,
            other => return Err(Error::Contract(format!("node {j} is {other:?}, not a cross-point"))),
        };
        let members: Vec<(usize, [f64; 2])> = subs.iter().map(|&s| (s, self.centroid(s))).collect();
        let spokes = self
            .spokes(j)
            .into_iter()
            .map(|e| SharedSpoke { pair: e.subdomains, to_node: e.other(j), length: e.length })
            .collect();
        CrossPointTopology::new(j, self.mesh.coords(j), &members, spokes)
    }
}

/// Block indices along one axis whose closure contains grid line `i`.
fn span(i: usize, block: usize, count: usize) -> Vec<usize> {
    let q = i / block;
    if i.is_multiple_of(block) {
        let mut v = Vec::with_capacity(2);
        if q >= 1 {
            v.push(q - 1);
        }
        if q < count {
            v.push(q);
        }
        v
    } else {
        vec![q]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decomp(nx: usize, ny: usize, lx: f64, ly: f64, px: usize, py: usize) -> Decomposition {
        Decomposition::new(Mesh::new(nx, ny, lx, ly).unwrap(), px, py).unwrap()
    }

    #[test]
    fn mesh_counts() {
        let m = Mesh::new(1, 1, 1.0, 1.0).unwrap();
        assert_eq!((m.num_nodes(), m.num_cells()), (4, 1));
        let m = Mesh::new(2, 2, 2.0, 2.0).unwrap();
        assert_eq!(m.num_nodes(), 9);
        assert_eq!(m.coords(4), [1.0, 1.0]);
        let m = Mesh::new(40, 40, 4.0, 4.0).unwrap();
        assert!((m.hx() - 0.1).abs() < 1e-15 && (m.hy() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn mesh_rejects_bad_input() {
        assert!(Mesh::new(0, 1, 1.0, 1.0).is_err());
        assert!(Mesh::new(1, 1, 0.0, 1.0).is_err());
        assert!(Mesh::new(1, 1, 1.0, -2.0).is_err());
        let m = Mesh::new(5, 4, 1.0, 1.0).unwrap();
        assert!(matches!(Decomposition::new(m, 2, 2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn degenerate_geometry_has_one_crosspoint() {
        let d = decomp(2, 2, 2.0, 2.0, 2, 2);
        assert_eq!(d.num_subdomains(), 4);
        let classes = d.classify_nodes();
        assert_eq!(classes[4], NodeClass::CrossPoint(vec![0, 1, 2, 3]));
        assert!(classes.iter().enumerate().all(|(j, c)| j == 4 || *c == NodeClass::PhysicalBoundary));
    }

    #[test]
    fn strips_have_no_crosspoints() {
        let d = decomp(40, 40, 4.0, 4.0, 4, 1);
        assert!(d.cross_points().is_empty());
        let n_iface = d.classify_nodes().iter().filter(|c| matches!(c, NodeClass::Interface(..))).count();
        assert_eq!(n_iface, 3 * 39);
    }

    #[test]
    fn monodomain_is_all_interior() {
        let d = decomp(4, 4, 1.0, 1.0, 1, 1);
        for (j, c) in d.classify_nodes().into_iter().enumerate() {
            if d.mesh.on_boundary(j) {
                assert_eq!(c, NodeClass::PhysicalBoundary);
            } else {
                assert_eq!(c, NodeClass::Interior(0));
            }
        }
        let d = decomp(4, 2, 1.0, 1.0, 1, 1);
        assert!(d.interface_edges().is_empty());
    }

    #[test]
    fn partition_and_crosspoint_count() {
        for (px, py) in [(2, 2), (3, 3), (4, 2), (2, 5)] {
            let d = decomp(12 * px, 6 * py, 1.0, 1.0, px, py);
            let mut counts = vec![0usize; d.num_subdomains()];
            for c in 0..d.mesh.num_cells() {
                counts[d.owner(c)] += 1;
            }
            assert_eq!(counts.iter().sum::<usize>(), d.mesh.num_cells());
            assert!(counts.iter().all(|&k| k == 72));
            assert_eq!(d.cross_points().len(), (px - 1) * (py - 1));
        }
    }

    #[test]
    fn uniform_crosspoint_topology() {
        let d = decomp(4, 4, 1.0, 1.0, 2, 2);
        let topo = d.crosspoint_topology(d.mesh.node(2, 2)).unwrap();
        // centroid angles: 3 at pi/4, 2 at 3pi/4, 0 at 5pi/4, 1 at 7pi/4
        assert_eq!(topo.subdomains, vec![3, 2, 0, 1]);
        assert_eq!(topo.spokes.len(), 4);
        let h = 0.25;
        for k in 0..4 {
            let a = topo.subdomains[k];
            let next = topo.subdomains[(k + 1) % 4];
            let opposite = topo.subdomains[(k + 2) % 4];
            assert_eq!(topo.shared_spokes(a, next).count(), 1);
            assert!((topo.shared_length(a, next) - h).abs() < 1e-15);
            assert_eq!(topo.shared_length(a, next), topo.shared_length(next, a));
            assert_eq!(topo.shared_length(a, opposite), 0.0);
            assert!((topo.spoke_length(a) - 2.0 * h).abs() < 1e-15);
        }
        assert!(topo.is_connected());
    }

    #[test]
    fn pentagon_fixture_topology() {
        // five sectors around the origin, one spoke between consecutive sectors
        let members: Vec<(usize, [f64; 2])> = (0..5)
            .map(|k| {
                let a = 0.3 + k as f64 * TAU / 5.0;
                (k, [a.cos(), a.sin()])
            })
            .collect();
        let spokes =
            (0..5).map(|k| SharedSpoke { pair: (k, (k + 1) % 5), to_node: 100 + k, length: 1.0 + k as f64 }).collect();
        let topo = CrossPointTopology::new(0, [0.0, 0.0], &members, spokes).unwrap();
        assert_eq!(topo.subdomains, vec![0, 1, 2, 3, 4]);
        for k in 0..5 {
            assert_eq!(topo.shared_spokes(k, (k + 1) % 5).count(), 1);
            assert_eq!(topo.shared_spokes(k, (k + 2) % 5).count(), 0);
        }
        assert!(topo.is_connected());
    }

    #[test]
    fn boundary_t_junction_has_no_topology() {
        let d = decomp(4, 4, 1.0, 1.0, 2, 2);
        let t = d.mesh.node(2, 0);
        assert_eq!(d.classify_node(t), NodeClass::PhysicalBoundary);
        assert!(matches!(d.crosspoint_topology(t), Err(Error::Contract(_))));
        assert!(matches!(d.crosspoint_topology(d.mesh.node(1, 1)), Err(Error::Contract(_))));
    }

    #[test]
    fn spokes_partition_across_pairs() {
        let d = decomp(9, 9, 3.0, 3.0, 3, 3);
        for j in d.cross_points() {
            let topo = d.crosspoint_topology(j).unwrap();
            let mut total = 0;
            for (a, &s) in topo.subdomains.iter().enumerate() {
                for &t in &topo.subdomains[a + 1..] {
                    total += topo.shared_spokes(s, t).count();
                }
            }
            assert_eq!(total, topo.spokes.len());
            assert_eq!(total, 4);
        }
    }

    #[test]
    fn classification_commutes_with_transpose() {
        let d = decomp(6, 9, 2.0, 3.0, 2, 3);
        let t = decomp(9, 6, 3.0, 2.0, 3, 2);
        let relabel = |s: usize| (s / 2) + 3 * (s % 2);
        for iy in 0..=9 {
            for ix in 0..=6 {
                let a = d.classify_node(d.mesh.node(ix, iy));
                let b = t.classify_node(t.mesh.node(iy, ix));
                let mapped = match a {
                    NodeClass::Interior(s) => NodeClass::Interior(relabel(s)),
                    NodeClass::Interface(s, r) => {
                        let (x, y) = (relabel(s), relabel(r));
                        NodeClass::Interface(x.min(y), x.max(y))
                    }
                    NodeClass::CrossPoint(v) => {
                        let mut w: Vec<usize> = v.into_iter().map(relabel).collect();
                        w.sort_unstable();
                        NodeClass::CrossPoint(w)
                    }
                    NodeClass::PhysicalBoundary => NodeClass::PhysicalBoundary,
                };
                assert_eq!(mapped, b);
            }
        }
    }
}
