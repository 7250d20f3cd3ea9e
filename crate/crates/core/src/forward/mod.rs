//! Complete electrode model forward problem.
//!
//! Linear (P1) nodal potentials, piecewise-constant conductivity, and the
//! usual CEM boundary coupling on electrode edges. Electrode potentials are
//! expressed in a zero-sum basis so the reduced system is positive definite
//! and every solution satisfies `Σ U_l = 0` by construction.

mod assemble;
mod jacobian;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::mesh::{ElectrodeLayout, MeshId, TriMesh};

pub use assemble::{assemble_cem_system, stiffness_block, CemSystem};
pub use jacobian::{element_gradients, jacobian_from_solutions};

/// Default lower bound of the admissible conductivity box `[λ, 1/λ]`.
pub const DEFAULT_LAMBDA: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityField {
    values: Vec<f64>,
    mesh_id: MeshId,
}

impl ConductivityField {
    pub fn new(mesh: &TriMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.element_count() {
            return Err(Error::Dimension { what: "conductivity values", expected: mesh.element_count(), got: values.len() });
        }
        Ok(Self { values, mesh_id: mesh.id() })
    }

    pub fn homogeneous(mesh: &TriMesh, value: f64) -> Self {
        Self { values: vec![value; mesh.element_count()], mesh_id: mesh.id() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mesh_id(&self) -> MeshId {
        self.mesh_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_admissible(&self, lambda: f64) -> Result<()> {
        check_admissible(&self.values, lambda)
    }
}

pub fn check_admissible(values: &[f64], lambda: f64) -> Result<()> {
    let (lo, hi) = (lambda, 1.0 / lambda);
    match values.iter().position(|&v| !(v >= lo && v <= hi)) {
        Some(e) => Err(Error::NotAdmissible { element: e, value: values[e], lo, hi }),
        None => Ok(()),
    }
}

/// Clamps every value into `[λ, 1/λ]`.
pub fn clamp_admissible(values: &mut [f64], lambda: f64) {
    let (lo, hi) = (lambda, 1.0 / lambda);
    for v in values {
        *v = v.clamp(lo, hi);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentPatternSet {
    patterns: Vec<Vec<f64>>,
}

impl CurrentPatternSet {
    pub fn new(patterns: Vec<Vec<f64>>) -> Result<Self> {
        let l = patterns.first().map_or(0, Vec::len);
        for (p, row) in patterns.iter().enumerate() {
            if row.len() != l {
                return Err(Error::Dimension { what: "current pattern length", expected: l, got: row.len() });
            }
            let sum: f64 = row.iter().sum();
            let scale = row.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
            if sum.abs() > 1e-12 * scale {
                return Err(Error::UnbalancedCurrent { pattern: p, sum });
            }
        }
        Ok(Self { patterns })
    }

    /// Unit current into electrode `d`, out of electrode `d + 1 (mod L)`.
    pub fn adjacent(electrodes: usize) -> Self {
        let patterns = (0..electrodes)
            .map(|d| {
                let mut row = vec![0.0; electrodes];
                row[d] = 1.0;
                row[(d + 1) % electrodes] = -1.0;
                row
            })
            .collect();
        Self { patterns }
    }

    /// Every current multiplied by `amplitude`.
    pub fn scaled(&self, amplitude: f64) -> Self {
        Self { patterns: self.patterns.iter().map(|row| row.iter().map(|v| v * amplitude).collect()).collect() }
    }

    pub fn patterns(&self) -> &[Vec<f64>] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn electrodes(&self) -> usize {
        self.patterns.first().map_or(0, Vec::len)
    }
}

/// One measured value: `U_pair - U_{pair+1}` under drive `drive`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRow {
    pub drive: usize,
    pub pair: usize,
}

/// Adjacent-pair voltage protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementProtocol {
    /// Drop pairs that touch an electrode carrying current in that drive.
    pub skip_driven: bool,
}

impl Default for MeasurementProtocol {
    fn default() -> Self {
        Self { skip_driven: true }
    }
}

impl MeasurementProtocol {
    pub fn layout(&self, patterns: &CurrentPatternSet) -> MeasurementLayout {
        let l = patterns.electrodes();
        let mut rows = Vec::new();
        for (d, current) in patterns.patterns().iter().enumerate() {
            for m in 0..l {
                let next = (m + 1) % l;
                if self.skip_driven && (current[m] != 0.0 || current[next] != 0.0) {
                    continue;
                }
                rows.push(MeasurementRow { drive: d, pair: m });
            }
        }
        MeasurementLayout { electrodes: l, rows }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementLayout {
    pub electrodes: usize,
    pub rows: Vec<MeasurementRow>,
}

impl MeasurementLayout {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Measurement pattern of `pair` as an electrode weight vector.
    pub fn pattern(&self, pair: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.electrodes];
        p[pair] = 1.0;
        p[(pair + 1) % self.electrodes] = -1.0;
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub voltages: DVector<f64>,
    pub layout: MeasurementLayout,
}

#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub interior_potentials: Vec<DVector<f64>>,
    pub electrode_potentials: Vec<DVector<f64>>,
}

/// Differences `U_m - U_{m+1}` for each row of the layout.
pub fn measure(sol: &ForwardSolution, layout: &MeasurementLayout) -> MeasurementSet {
    let l = layout.electrodes;
    let voltages = DVector::from_iterator(
        layout.len(),
        layout.rows.iter().map(|r| {
            let u = &sol.electrode_potentials[r.drive];
            u[r.pair] - u[(r.pair + 1) % l]
        }),
    );
    MeasurementSet { voltages, layout: layout.clone() }
}

/// Sensitivity of every measurement to every element conductivity.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix {
    pub entries: DMatrix<f64>,
}

impl JacobianMatrix {
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }
}

/// The services an inversion needs from a forward model.
pub trait ForwardModel: Sync {
    fn parameter_count(&self) -> usize;
    fn data_count(&self) -> usize;
    fn predict(&self, sigma: &[f64]) -> Result<DVector<f64>>;
    /// Prediction and Jacobian at `sigma`.
    fn linearize(&self, sigma: &[f64]) -> Result<(DVector<f64>, JacobianMatrix)>;
}

/// CEM forward model on a fixed mesh with a fixed protocol.
#[derive(Debug, Clone)]
pub struct CemForwardModel {
    mesh: TriMesh,
    layout: ElectrodeLayout,
    patterns: CurrentPatternSet,
    measurements: MeasurementLayout,
    lambda: f64,
    exec: Exec,
}

impl CemForwardModel {
    pub fn new(
        mesh: TriMesh,
        layout: ElectrodeLayout,
        patterns: CurrentPatternSet,
        protocol: MeasurementProtocol,
    ) -> Result<Self> {
        layout.validate()?;
        if mesh.electrode_count() != layout.count {
            return Err(Error::Dimension { what: "mesh electrodes", expected: layout.count, got: mesh.electrode_count() });
        }
        if patterns.electrodes() != layout.count {
            return Err(Error::Dimension { what: "current pattern length", expected: layout.count, got: patterns.electrodes() });
        }
        let measurements = protocol.layout(&patterns);
        Ok(Self { mesh, layout, patterns, measurements, lambda: DEFAULT_LAMBDA, exec: Exec::default() })
    }

    /// Adjacent drive, adjacent measurement, driven pairs skipped.
    pub fn adjacent(mesh: TriMesh, layout: ElectrodeLayout) -> Result<Self> {
        let patterns = CurrentPatternSet::adjacent(layout.count);
        Self::new(mesh, layout, patterns, MeasurementProtocol::default())
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn layout(&self) -> &ElectrodeLayout {
        &self.layout
    }

    pub fn patterns(&self) -> &CurrentPatternSet {
        &self.patterns
    }

    pub fn measurement_layout(&self) -> &MeasurementLayout {
        &self.measurements
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    pub fn assemble(&self, sigma: &[f64]) -> Result<CemSystem> {
        assemble_cem_system(&self.mesh, sigma, &self.layout, self.lambda)
    }

    pub fn solve_forward(&self, sigma: &[f64]) -> Result<ForwardSolution> {
        let system = self.assemble(sigma)?;
        system.solve_patterns(self.patterns.patterns(), self.exec)
    }

    pub fn measure(&self, sol: &ForwardSolution) -> MeasurementSet {
        measure(sol, &self.measurements)
    }

    /// `F(a) - F(b)` without subtractive cancellation.
    ///
    /// Uses `x_a - x_b = A(a)⁻¹ K(b - a) u_b`, where `K` is the stiffness of
    /// the conductivity difference; useful when `a` and `b` are so close that
    /// subtracting two forward solutions loses most digits.
    pub fn predict_difference(&self, a: &[f64], b: &[f64]) -> Result<DVector<f64>> {
        let sys_a = self.assemble(a)?;
        let sol_b = self.solve_forward(b)?;
        let diff: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
        let k = stiffness_block(&self.mesh, &diff);
        let electrode_potentials = self
            .exec
            .try_map(sol_b.interior_potentials.len(), |d| sys_a.solve_nodal_load(&(&k * &sol_b.interior_potentials[d])))?;
        let sol = ForwardSolution { interior_potentials: Vec::new(), electrode_potentials };
        Ok(self.measure(&sol).voltages)
    }

    /// Adjoint Jacobian at `sigma`, together with the forward solution.
    pub fn jacobian(&self, sigma: &[f64]) -> Result<(ForwardSolution, JacobianMatrix)> {
        let system = self.assemble(sigma)?;
        let drives = system.solve_patterns(self.patterns.patterns(), self.exec)?;
        let pairs: Vec<Vec<f64>> = (0..self.layout.count).map(|m| self.measurements.pattern(m)).collect();
        let adjoint = system.solve_patterns(&pairs, self.exec)?;
        let jac = jacobian_from_solutions(&self.mesh, &drives, &adjoint, &self.measurements, self.exec);
        Ok((drives, jac))
    }
}

impl ForwardModel for CemForwardModel {
    fn parameter_count(&self) -> usize {
        self.mesh.element_count()
    }

    fn data_count(&self) -> usize {
        self.measurements.len()
    }

    fn predict(&self, sigma: &[f64]) -> Result<DVector<f64>> {
        Ok(self.measure(&self.solve_forward(sigma)?).voltages)
    }

    fn linearize(&self, sigma: &[f64]) -> Result<(DVector<f64>, JacobianMatrix)> {
        let (sol, jac) = self.jacobian(sigma)?;
        Ok((self.measure(&sol).voltages, jac))
    }
}
