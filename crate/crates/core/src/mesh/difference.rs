use nalgebra::DMatrix;

use super::TriMesh;

/// First-order difference across interior edges: one row per adjacent
/// element pair `(i, j)` with `+1` at `i` and `-1` at `j`.
#[derive(Debug, Clone)]
pub struct DifferenceOperator {
    pairs: Vec<[usize; 2]>,
    cols: usize,
}

impl DifferenceOperator {
    pub fn from_mesh(mesh: &TriMesh) -> Self {
        Self::from_pairs(mesh.element_adjacency().to_vec(), mesh.element_count())
    }

    pub fn from_pairs(pairs: Vec<[usize; 2]>, cols: usize) -> Self {
        assert!(pairs.iter().all(|&[i, j]| i < cols && j < cols && i != j));
        Self { pairs, cols }
    }

    pub fn rows(&self) -> usize {
        self.pairs.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pairs(&self) -> &[[usize; 2]] {
        &self.pairs
    }

    /// `R x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.pairs.iter().map(|&[i, j]| x[i] - x[j]).collect()
    }

    /// `Rᵀ y`
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.pairs.len());
        let mut out = vec![0.0; self.cols];
        for (&[i, j], &v) in self.pairs.iter().zip(y) {
            out[i] += v;
            out[j] -= v;
        }
        out
    }

    /// `Rᵀ diag(w) R x`, accumulated into `out` scaled by `scale`.
    pub fn weighted_normal_add(&self, weights: Option<&[f64]>, x: &[f64], scale: f64, out: &mut [f64]) {
        for (row, &[i, j]) in self.pairs.iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[row]);
            let v = scale * w * (x[i] - x[j]);
            out[i] += v;
            out[j] -= v;
        }
    }

    /// `RᵀR x`
    pub fn normal(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.weighted_normal_add(None, x, 1.0, &mut out);
        out
    }

    /// Diagonal of `Rᵀ diag(w) R`.
    pub fn weighted_normal_diagonal(&self, weights: Option<&[f64]>) -> Vec<f64> {
        let mut diag = vec![0.0; self.cols];
        for (row, &[i, j]) in self.pairs.iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[row]);
            diag[i] += w;
            diag[j] += w;
        }
        diag
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.pairs.len(), self.cols);
        for (row, &[i, j]) in self.pairs.iter().enumerate() {
            m[(row, i)] = 1.0;
            m[(row, j)] = -1.0;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::tests::two_triangle_mesh;

    #[test]
    fn two_element_mesh_gives_single_row() {
        let r = DifferenceOperator::from_mesh(&two_triangle_mesh());
        assert_eq!(r.to_dense(), DMatrix::from_row_slice(1, 2, &[1.0, -1.0]));
    }

    #[test]
    fn constants_are_in_the_null_space() {
        let r = DifferenceOperator::from_pairs(vec![[0, 1], [1, 2], [0, 2], [2, 3]], 4);
        assert!(r.apply(&[2.5; 4]).iter().all(|&v| v == 0.0));
        assert!(r.normal(&[2.5; 4]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn transpose_and_normal_match_dense() {
        let r = DifferenceOperator::from_pairs(vec![[0, 1], [1, 2], [0, 2], [2, 3]], 4);
        let d = r.to_dense();
        let x = [0.3, -1.2, 2.0, 0.7];
        let y = [1.0, -0.5, 0.25, 2.0];
        let rt = r.apply_transpose(&y);
        let dense_rt = d.transpose() * nalgebra::DVector::from_column_slice(&y);
        let rn = r.normal(&x);
        let dense_rn = d.transpose() * &d * nalgebra::DVector::from_column_slice(&x);
        for k in 0..4 {
            assert!((rt[k] - dense_rt[k]).abs() < 1e-15);
            assert!((rn[k] - dense_rn[k]).abs() < 1e-15);
        }
        let diag = r.weighted_normal_diagonal(None);
        let dense = d.transpose() * &d;
        for k in 0..4 {
            assert_eq!(diag[k], dense[(k, k)]);
        }
    }
}
