use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use super::{check_admissible, ForwardSolution};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::mesh::{ElectrodeLayout, TriMesh};

/// Assembled and factorized CEM system for one conductivity.
///
/// Unknowns of the reduced system are the nodal potentials followed by
/// `L - 1` coefficients `β` with `U = C β`, where column `j` of `C` is
/// `e_0 - e_{j+1}`.
pub struct CemSystem {
    nodes: usize,
    electrodes: usize,
    full: CscMatrix<f64>,
    reduced: CscMatrix<f64>,
    factor: CscCholesky<f64>,
}

impl std::fmt::Debug for CemSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CemSystem")
            .field("nodes", &self.nodes)
            .field("electrodes", &self.electrodes)
            .field("nnz_reduced", &self.reduced.nnz())
            .finish()
    }
}

/// The conductivity-weighted stiffness `Σ_e σ_e K_e` (nodes × nodes).
pub fn stiffness_block(mesh: &TriMesh, sigma: &[f64]) -> CscMatrix<f64> {
    let n = mesh.node_count();
    let mut coo = CooMatrix::new(n, n);
    push_stiffness(&mut coo, mesh, sigma);
    CscMatrix::from(&coo)
}

fn push_stiffness(coo: &mut CooMatrix<f64>, mesh: &TriMesh, sigma: &[f64]) {
    for (e, tri) in mesh.elements().iter().enumerate() {
        let g = mesh.basis_gradients(e);
        let w = sigma[e] * mesh.areas()[e];
        for a in 0..3 {
            for b in 0..3 {
                coo.push(tri[a], tri[b], w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]));
            }
        }
    }
}

/// Boundary terms of electrode `l`: node-node mass, node-electrode coupling,
/// electrode diagonal `|e_l| / z_l`.
struct ElectrodeTerms {
    node_node: Vec<(usize, usize, f64)>,
    node_electrode: Vec<(usize, f64)>,
    diagonal: f64,
}

fn electrode_terms(mesh: &TriMesh, layout: &ElectrodeLayout) -> Vec<ElectrodeTerms> {
    mesh.electrode_node_pairs()
        .iter()
        .zip(&layout.contact_impedances)
        .map(|(pairs, &z)| {
            let mut terms = ElectrodeTerms { node_node: Vec::new(), node_electrode: Vec::new(), diagonal: 0.0 };
            for &[a, b] in pairs {
                let h = mesh.edge_length([a, b]);
                terms.node_node.extend([
                    (a, a, h / (3.0 * z)),
                    (b, b, h / (3.0 * z)),
                    (a, b, h / (6.0 * z)),
                    (b, a, h / (6.0 * z)),
                ]);
                terms.node_electrode.extend([(a, -h / (2.0 * z)), (b, -h / (2.0 * z))]);
                terms.diagonal += h / z;
            }
            terms
        })
        .collect()
}

/// Assembles the CEM system for `sigma` and factorizes its reduced form.
pub fn assemble_cem_system(mesh: &TriMesh, sigma: &[f64], layout: &ElectrodeLayout, lambda: f64) -> Result<CemSystem> {
    layout.validate()?;
    if sigma.len() != mesh.element_count() {
        return Err(Error::Dimension { what: "conductivity values", expected: mesh.element_count(), got: sigma.len() });
    }
    if mesh.electrode_count() != layout.count {
        return Err(Error::Dimension { what: "mesh electrodes", expected: layout.count, got: mesh.electrode_count() });
    }
    check_admissible(sigma, lambda)?;

    let n = mesh.node_count();
    let l = layout.count;
    let terms = electrode_terms(mesh, layout);

    let mut full = CooMatrix::new(n + l, n + l);
    let mut reduced = CooMatrix::new(n + l - 1, n + l - 1);
    push_stiffness(&mut full, mesh, sigma);
    push_stiffness(&mut reduced, mesh, sigma);

    for (el, t) in terms.iter().enumerate() {
        for &(i, j, v) in &t.node_node {
            full.push(i, j, v);
            reduced.push(i, j, v);
        }
        for &(i, v) in &t.node_electrode {
            full.push(i, n + el, v);
            full.push(n + el, i, v);
        }
        full.push(n + el, n + el, t.diagonal);
    }

    // A_Z C: electrode 0 contributes to every β_j, electrode j+1 to β_j with a minus sign.
    for j in 0..l - 1 {
        for &(i, v) in &terms[0].node_electrode {
            reduced.push(i, n + j, v);
            reduced.push(n + j, i, v);
        }
        for &(i, v) in &terms[j + 1].node_electrode {
            reduced.push(i, n + j, -v);
            reduced.push(n + j, i, -v);
        }
    }
    // Cᵀ A_D C = D_0 11ᵀ + diag(D_1, .., D_{L-1})
    for j in 0..l - 1 {
        for k in 0..l - 1 {
            reduced.push(n + j, n + k, terms[0].diagonal);
        }
        reduced.push(n + j, n + j, terms[j + 1].diagonal);
    }

    let full = CscMatrix::from(&full);
    let reduced = CscMatrix::from(&reduced);
    let factor = CscCholesky::factor(&reduced)
        .map_err(|e| Error::Factorization(format!("Cholesky of the reduced CEM system ({} unknowns): {e}", n + l - 1)))?;
    Ok(CemSystem { nodes: n, electrodes: l, full, reduced, factor })
}

impl CemSystem {
    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn electrode_count(&self) -> usize {
        self.electrodes
    }

    /// The un-reduced `(N + L)` system, singular along `(1, 1)`.
    pub fn full_matrix(&self) -> &CscMatrix<f64> {
        &self.full
    }

    pub fn reduced_matrix(&self) -> &CscMatrix<f64> {
        &self.reduced
    }

    fn reduced_rhs(&self, current: &[f64]) -> DVector<f64> {
        let mut rhs = DVector::zeros(self.nodes + self.electrodes - 1);
        for j in 0..self.electrodes - 1 {
            rhs[self.nodes + j] = current[0] - current[j + 1];
        }
        rhs
    }

    /// Solves for one current pattern; returns nodal and electrode potentials.
    pub fn solve_pattern(&self, current: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
        if current.len() != self.electrodes {
            return Err(Error::Dimension { what: "current pattern length", expected: self.electrodes, got: current.len() });
        }
        let rhs = self.reduced_rhs(current);
        let x = self.factor.solve(&rhs);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization("non-finite potentials from the Cholesky solve".into()));
        }
        let u = DVector::from_iterator(self.nodes, x.iter().take(self.nodes).copied());
        let beta = &x.as_slice()[self.nodes..];
        // U_0 = -(U_1 + .. + U_{L-1}) keeps the zero sum to rounding.
        let mut big_u = DVector::zeros(self.electrodes);
        for (j, &b) in beta.iter().enumerate() {
            big_u[j + 1] = -b;
        }
        big_u[0] = -big_u.iter().skip(1).sum::<f64>();
        Ok((u, big_u))
    }

    /// Solves the reduced system with nodal load `load` and zero electrode
    /// currents, returning electrode potentials.
    pub fn solve_nodal_load(&self, load: &DVector<f64>) -> Result<DVector<f64>> {
        if load.len() != self.nodes {
            return Err(Error::Dimension { what: "nodal load", expected: self.nodes, got: load.len() });
        }
        let mut rhs = DVector::zeros(self.nodes + self.electrodes - 1);
        rhs.rows_mut(0, self.nodes).copy_from(load);
        let x = self.factor.solve(&rhs);
        let mut big_u = DVector::zeros(self.electrodes);
        for j in 0..self.electrodes - 1 {
            big_u[j + 1] = -x[self.nodes + j];
        }
        big_u[0] = -big_u.iter().skip(1).sum::<f64>();
        Ok(big_u)
    }

    pub fn solve_patterns(&self, patterns: &[Vec<f64>], exec: Exec) -> Result<ForwardSolution> {
        let sols = exec.try_map(patterns.len(), |p| self.solve_pattern(&patterns[p]))?;
        let (interior_potentials, electrode_potentials) = sols.into_iter().unzip();
        Ok(ForwardSolution { interior_potentials, electrode_potentials })
    }

    /// `‖A [u; U] - [0; I]‖ / ‖[0; I]‖` for the un-reduced system.
    pub fn relative_residual(&self, u: &DVector<f64>, big_u: &DVector<f64>, current: &[f64]) -> f64 {
        let x = DVector::from_iterator(self.nodes + self.electrodes, u.iter().chain(big_u.iter()).copied());
        let mut r: DVector<f64> = &self.full * &x;
        for (l, &i) in current.iter().enumerate() {
            r[self.nodes + l] -= i;
        }
        let rhs_norm = current.iter().map(|v| v * v).sum::<f64>().sqrt();
        r.norm() / rhs_norm
    }

    pub fn reduced_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.reduced.nrows(), self.reduced.ncols());
        for (i, j, v) in self.reduced.triplet_iter() {
            d[(i, j)] += *v;
        }
        d
    }
}
