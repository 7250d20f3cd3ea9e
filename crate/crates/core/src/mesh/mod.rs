//! Triangular meshes of the unit disk with boundary electrodes.
//!
//! A [`TriMesh`] is immutable once built. All constructors go through
//! [`TriMesh::from_parts`], which derives boundary edges and element
//! adjacency and checks the mesh invariants, so a generated mesh and a mesh
//! read from disk are validated the same way.

mod difference;
mod generate;
mod io;
mod transfer;

use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use difference::DifferenceOperator;
pub use generate::generate_disk_mesh;
pub use io::{read_mesh, write_mesh, parse_mesh, format_mesh};
pub use transfer::{build_transfer, MeshTransfer};

/// Boundary nodes must lie this close to the unit circle.
pub const BOUNDARY_RADIUS_TOL: f64 = 1e-9;

const MIN_AREA: f64 = 1e-14;

/// Fingerprint of a mesh, used to catch fields evaluated on the wrong mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeshId(pub u64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeLayout {
    pub count: usize,
    pub contact_impedances: Vec<f64>,
    pub coverage_fraction: f64,
}

impl ElectrodeLayout {
    /// `count` equal electrodes with contact impedance `z` covering
    /// `coverage_fraction` of the boundary.
    pub fn uniform(count: usize, z: f64, coverage_fraction: f64) -> Result<Self> {
        let layout = Self { count, contact_impedances: vec![z; count], coverage_fraction };
        layout.validate()?;
        Ok(layout)
    }

    /// 16 electrodes, z = 0.05, half the boundary covered.
    pub fn standard16() -> Self {
        Self::uniform(16, 0.05, 0.5).expect("valid default layout")
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::InvalidLayout(format!("need at least 2 electrodes, got {}", self.count)));
        }
        if self.contact_impedances.len() != self.count {
            return Err(Error::InvalidLayout(format!(
                "{} contact impedances for {} electrodes",
                self.contact_impedances.len(),
                self.count
            )));
        }
        if let Some((l, z)) = self.contact_impedances.iter().enumerate().find(|(_, z)| !(**z > 0.0)) {
            return Err(Error::InvalidLayout(format!("contact impedance of electrode {l} is {z}, must be > 0")));
        }
        if !(self.coverage_fraction > 0.0 && self.coverage_fraction < 1.0) {
            return Err(Error::InvalidLayout(format!(
                "coverage fraction {} outside (0, 1)",
                self.coverage_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
    electrode_edges: Vec<Vec<usize>>,
    element_adjacency: Vec<[usize; 2]>,
    areas: Vec<f64>,
    id: MeshId,
}

impl TriMesh {
    /// Builds a mesh from raw geometry. Clockwise elements are reoriented;
    /// electrodes are given as lists of boundary node pairs in any order.
    pub fn from_parts(
        nodes: Vec<[f64; 2]>,
        mut elements: Vec<[usize; 3]>,
        electrodes: Vec<Vec<[usize; 2]>>,
    ) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidMesh("no elements".into()));
        }
        let mut areas = Vec::with_capacity(elements.len());
        for (e, tri) in elements.iter_mut().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&n| n >= nodes.len()) {
                return Err(Error::InvalidMesh(format!("element {e} references missing node {bad}")));
            }
            let a = signed_area(&nodes, *tri);
            if a.abs() < MIN_AREA {
                return Err(Error::DegenerateElement { element: e, area: a });
            }
            if a < 0.0 {
                tri.swap(1, 2);
            }
            areas.push(a.abs());
        }

        // edge -> (first element, optional second element), in discovery order
        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::with_capacity(elements.len() * 2);
        let mut edges: Vec<([usize; 2], usize, Option<usize>)> = Vec::with_capacity(elements.len() * 2);
        for (e, tri) in elements.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                match edge_index.get(&key) {
                    Some(&idx) => {
                        let entry = &mut edges[idx];
                        if entry.2.is_some() {
                            return Err(Error::InvalidMesh(format!("edge {key:?} shared by more than two elements")));
                        }
                        entry.2 = Some(e);
                    }
                    None => {
                        edge_index.insert(key, edges.len());
                        edges.push(([a, b], e, None));
                    }
                }
            }
        }

        let mut boundary_edges = Vec::new();
        let mut element_adjacency = Vec::new();
        for (oriented, first, second) in &edges {
            match second {
                Some(s) => element_adjacency.push([*first, *s]),
                None => boundary_edges.push(*oriented),
            }
        }

        for edge in &boundary_edges {
            for &n in edge {
                let [x, y] = nodes[n];
                let r = x.hypot(y);
                if (r - 1.0).abs() > BOUNDARY_RADIUS_TOL {
                    return Err(Error::InvalidMesh(format!(
                        "boundary node {n} at radius {r}, expected the unit circle"
                    )));
                }
            }
        }

        let boundary_lookup: HashMap<[usize; 2], usize> = boundary_edges
            .iter()
            .enumerate()
            .map(|(i, &[a, b])| ([a.min(b), a.max(b)], i))
            .collect();
        let mut owner = vec![None; boundary_edges.len()];
        let mut electrode_edges = Vec::with_capacity(electrodes.len());
        for (l, pairs) in electrodes.iter().enumerate() {
            if pairs.is_empty() {
                return Err(Error::InvalidMesh(format!("electrode {l} has no edges")));
            }
            let mut idx = Vec::with_capacity(pairs.len());
            for &[a, b] in pairs {
                let Some(&i) = boundary_lookup.get(&[a.min(b), a.max(b)]) else {
                    return Err(Error::InvalidMesh(format!("electrode {l} edge ({a}, {b}) is not a boundary edge")));
                };
                if let Some(other) = owner[i] {
                    return Err(Error::InvalidMesh(format!("boundary edge {i} claimed by electrodes {other} and {l}")));
                }
                owner[i] = Some(l);
                idx.push(i);
            }
            let ordered = order_arc(&boundary_edges, &idx)
                .ok_or_else(|| Error::InvalidMesh(format!("electrode {l} is not a contiguous arc")))?;
            electrode_edges.push(ordered);
        }

        let id = fingerprint(&nodes, &elements, &electrode_edges);
        Ok(Self { nodes, elements, boundary_edges, electrode_edges, element_adjacency, areas, id })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    /// Boundary edge indices of each electrode, ordered counter-clockwise.
    pub fn electrode_edges(&self) -> &[Vec<usize>] {
        &self.electrode_edges
    }

    /// Pairs of elements sharing an interior edge, one pair per edge.
    pub fn element_adjacency(&self) -> &[[usize; 2]] {
        &self.element_adjacency
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn electrode_count(&self) -> usize {
        self.electrode_edges.len()
    }

    pub fn id(&self) -> MeshId {
        self.id
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn barycenter(&self, e: usize) -> [f64; 2] {
        let [a, b, c] = self.elements[e];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// Node pairs of every electrode edge, in arc order.
    pub fn electrode_node_pairs(&self) -> Vec<Vec<[usize; 2]>> {
        self.electrode_edges
            .iter()
            .map(|edges| edges.iter().map(|&i| self.boundary_edges[i]).collect())
            .collect()
    }

    /// Length of each electrode (sum of its straight edges).
    pub fn electrode_lengths(&self) -> Vec<f64> {
        self.electrode_edges
            .iter()
            .map(|edges| edges.iter().map(|&i| self.edge_length(self.boundary_edges[i])).sum())
            .collect()
    }

    pub fn edge_length(&self, [a, b]: [usize; 2]) -> f64 {
        let (pa, pb) = (self.nodes[a], self.nodes[b]);
        (pa[0] - pb[0]).hypot(pa[1] - pb[1])
    }

    /// Gradients of the three P1 basis functions on element `e`.
    pub fn basis_gradients(&self, e: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.elements[e];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        let two_area = 2.0 * self.areas[e];
        [
            [(pb[1] - pc[1]) / two_area, (pc[0] - pb[0]) / two_area],
            [(pc[1] - pa[1]) / two_area, (pa[0] - pc[0]) / two_area],
            [(pa[1] - pb[1]) / two_area, (pb[0] - pa[0]) / two_area],
        ]
    }

    /// Barycentric coordinates of `p` with respect to element `e`.
    pub fn barycentric(&self, e: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.elements[e];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        let det = 2.0 * self.areas[e];
        let l0 = ((pb[0] - p[0]) * (pc[1] - p[1]) - (pc[0] - p[0]) * (pb[1] - p[1])) / det;
        let l1 = ((pc[0] - p[0]) * (pa[1] - p[1]) - (pa[0] - p[0]) * (pc[1] - p[1])) / det;
        [l0, l1, 1.0 - l0 - l1]
    }

    /// Checks every invariant again; used by tests after round trips.
    pub fn validate(&self) -> Result<()> {
        Self::from_parts(self.nodes.clone(), self.elements.clone(), self.electrode_node_pairs()).map(|_| ())
    }
}

pub(crate) fn signed_area(nodes: &[[f64; 2]], [a, b, c]: [usize; 3]) -> f64 {
    let (pa, pb, pc) = (nodes[a], nodes[b], nodes[c]);
    0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
}

/// Orders a set of boundary edges into a single path, or `None` if they do
/// not form one.
fn order_arc(boundary_edges: &[[usize; 2]], idx: &[usize]) -> Option<Vec<usize>> {
    let by_start: HashMap<usize, usize> = idx.iter().map(|&i| (boundary_edges[i][0], i)).collect();
    let ends: std::collections::HashSet<usize> = idx.iter().map(|&i| boundary_edges[i][1]).collect();
    if by_start.len() != idx.len() {
        return None;
    }
    let starts: Vec<usize> = idx.iter().copied().filter(|&i| !ends.contains(&boundary_edges[i][0])).collect();
    // A closed loop has no start; an electrode may not cover the whole boundary.
    let &[first] = starts.as_slice() else { return None };
    let mut ordered = vec![first];
    let mut cur = boundary_edges[first][1];
    while let Some(&next) = by_start.get(&cur) {
        ordered.push(next);
        cur = boundary_edges[next][1];
        if ordered.len() > idx.len() {
            return None;
        }
    }
    (ordered.len() == idx.len()).then_some(ordered)
}

fn fingerprint(nodes: &[[f64; 2]], elements: &[[usize; 3]], electrodes: &[Vec<usize>]) -> MeshId {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    nodes.len().hash(&mut h);
    for [x, y] in nodes {
        x.to_bits().hash(&mut h);
        y.to_bits().hash(&mut h);
    }
    elements.hash(&mut h);
    electrodes.hash(&mut h);
    MeshId(h.finish())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Two triangles forming the square inscribed in the unit circle.
    pub(crate) fn two_triangle_mesh() -> TriMesh {
        let nodes = vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        let elements = vec![[0, 1, 2], [0, 2, 3]];
        TriMesh::from_parts(nodes, elements, vec![vec![[0, 1]], vec![[2, 3]]]).unwrap()
    }

    #[test]
    fn two_triangles_share_one_edge() {
        let m = two_triangle_mesh();
        assert_eq!(m.element_adjacency(), &[[0, 1]]);
        assert_eq!(m.boundary_edges().len(), 4);
        assert!((m.total_area() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn clockwise_elements_are_reoriented() {
        let nodes = vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        let m = TriMesh::from_parts(nodes.clone(), vec![[0, 2, 1], [0, 3, 2]], vec![vec![[0, 1]], vec![[2, 3]]])
            .unwrap();
        for &tri in m.elements() {
            assert!(signed_area(&nodes, tri) > 0.0);
        }
    }

    #[test]
    fn rejects_degenerate_and_off_circle_meshes() {
        let nodes = vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.5, 0.5]];
        let err = TriMesh::from_parts(nodes, vec![[0, 1, 3]], vec![]).unwrap_err();
        assert!(matches!(err, Error::DegenerateElement { .. }), "{err}");

        let nodes = vec![[1.0, 0.0], [0.0, 1.0], [-0.9, 0.0]];
        let err = TriMesh::from_parts(nodes, vec![[0, 1, 2]], vec![]).unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)), "{err}");
    }

    #[test]
    fn rejects_overlapping_and_broken_electrodes() {
        let nodes = vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        let elements = vec![[0, 1, 2], [0, 2, 3]];
        let overlap = TriMesh::from_parts(nodes.clone(), elements.clone(), vec![vec![[0, 1]], vec![[1, 0]]]);
        assert!(overlap.is_err());
        let gap = TriMesh::from_parts(nodes.clone(), elements.clone(), vec![vec![[0, 1], [2, 3]]]);
        assert!(gap.is_err());
        let interior = TriMesh::from_parts(nodes, elements, vec![vec![[0, 2]]]);
        assert!(interior.is_err());
    }

    #[test]
    fn electrode_arcs_are_ordered() {
        let nodes = vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        let m = TriMesh::from_parts(nodes, vec![[0, 1, 2], [0, 2, 3]], vec![vec![[2, 3], [1, 2]]]).unwrap();
        let pairs = m.electrode_node_pairs();
        assert_eq!(pairs[0], vec![[1, 2], [2, 3]]);
    }

    #[test]
    fn layout_validation() {
        assert!(ElectrodeLayout::uniform(1, 0.05, 0.5).is_err());
        assert!(ElectrodeLayout::uniform(16, 0.0, 0.5).is_err());
        assert!(ElectrodeLayout::uniform(16, 0.05, 1.0).is_err());
        assert!(ElectrodeLayout::uniform(2, 0.05, 0.5).is_ok());
    }
}
