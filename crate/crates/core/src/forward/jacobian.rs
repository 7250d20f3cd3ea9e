use nalgebra::{DMatrix, DVector};

use super::{ForwardSolution, JacobianMatrix, MeasurementLayout};
use crate::exec::Exec;
use crate::mesh::TriMesh;

/// Constant gradient of a P1 field on every element.
pub fn element_gradients(mesh: &TriMesh, u: &DVector<f64>) -> Vec<[f64; 2]> {
    (0..mesh.element_count())
        .map(|e| {
            let g = mesh.basis_gradients(e);
            let tri = mesh.elements()[e];
            let mut out = [0.0; 2];
            for k in 0..3 {
                out[0] += u[tri[k]] * g[k][0];
                out[1] += u[tri[k]] * g[k][1];
            }
            out
        })
        .collect()
}

/// Adjoint sensitivity `J[(d, m), e] = -∫_e ∇u_d · ∇w_m`.
///
/// `drives` holds the solutions for the drive patterns and `adjoint` the
/// solutions for the measurement patterns, indexed by measurement pair.
pub fn jacobian_from_solutions(
    mesh: &TriMesh,
    drives: &ForwardSolution,
    adjoint: &ForwardSolution,
    layout: &MeasurementLayout,
    exec: Exec,
) -> JacobianMatrix {
    let drive_grads: Vec<Vec<[f64; 2]>> =
        exec.map(drives.interior_potentials.len(), |d| element_gradients(mesh, &drives.interior_potentials[d]));
    let pair_grads: Vec<Vec<[f64; 2]>> =
        exec.map(adjoint.interior_potentials.len(), |m| element_gradients(mesh, &adjoint.interior_potentials[m]));

    let rows = layout.len();
    let columns: Vec<Vec<f64>> = exec.map(mesh.element_count(), |e| {
        let area = mesh.areas()[e];
        layout
            .rows
            .iter()
            .map(|r| {
                let gu = drive_grads[r.drive][e];
                let gw = pair_grads[r.pair][e];
                -area * (gu[0] * gw[0] + gu[1] * gw[1])
            })
            .collect()
    });
    let entries = DMatrix::from_iterator(rows, mesh.element_count(), columns.into_iter().flatten());
    JacobianMatrix { entries }
}
