use super::TriMesh;
use crate::error::{Error, Result};

/// Barycentric slack used when a fine barycenter sits on a coarse edge.
pub const LOCATION_TOL: f64 = 1e-12;

/// Area-weighted map from fine-mesh element values to coarse-mesh elements.
#[derive(Debug, Clone)]
pub struct MeshTransfer {
    fine_to_coarse: Vec<usize>,
    /// Per coarse element: (fine element, weight). Weights of one coarse
    /// element sum to its area.
    contributions: Vec<Vec<(usize, f64)>>,
    coarse_areas: Vec<f64>,
}

impl MeshTransfer {
    pub fn fine_to_coarse(&self) -> &[usize] {
        &self.fine_to_coarse
    }

    pub fn contributions(&self) -> &[Vec<(usize, f64)>] {
        &self.contributions
    }

    pub fn total_weight(&self) -> f64 {
        self.contributions.iter().flatten().map(|&(_, w)| w).sum()
    }

    /// Area-weighted average of `fine` values over each coarse element.
    pub fn map_values(&self, fine: &[f64]) -> Result<Vec<f64>> {
        if fine.len() != self.fine_to_coarse.len() {
            return Err(Error::Dimension {
                what: "fine element values",
                expected: self.fine_to_coarse.len(),
                got: fine.len(),
            });
        }
        Ok(self
            .contributions
            .iter()
            .zip(&self.coarse_areas)
            .map(|(parts, area)| parts.iter().map(|&(f, w)| w * fine[f]).sum::<f64>() / area)
            .collect())
    }
}

/// Locates every fine barycenter in the coarse mesh.
///
/// A coarse element that receives no fine barycenter (possible for badly
/// mismatched meshes) borrows the fine element containing its own
/// barycenter, so every coarse element has a value.
pub fn build_transfer(fine: &TriMesh, coarse: &TriMesh) -> Result<MeshTransfer> {
    let mut fine_to_coarse = Vec::with_capacity(fine.element_count());
    let mut contributions: Vec<Vec<(usize, f64)>> = vec![Vec::new(); coarse.element_count()];
    for f in 0..fine.element_count() {
        let p = fine.barycenter(f);
        let c = locate(coarse, p).ok_or(Error::PointLocation { element: f, x: p[0], y: p[1] })?;
        fine_to_coarse.push(c);
        contributions[c].push((f, fine.areas()[f]));
    }
    for c in 0..coarse.element_count() {
        if contributions[c].is_empty() {
            let p = coarse.barycenter(c);
            let f = locate(fine, p).ok_or(Error::PointLocation { element: c, x: p[0], y: p[1] })?;
            contributions[c].push((f, 1.0));
        }
        let area = coarse.areas()[c];
        let sum: f64 = contributions[c].iter().map(|&(_, w)| w).sum();
        for (_, w) in &mut contributions[c] {
            *w *= area / sum;
        }
    }
    Ok(MeshTransfer { fine_to_coarse, contributions, coarse_areas: coarse.areas().to_vec() })
}

fn locate(mesh: &TriMesh, p: [f64; 2]) -> Option<usize> {
    (0..mesh.element_count()).find(|&e| mesh.barycentric(e, p).iter().all(|&l| l >= -LOCATION_TOL))
}
