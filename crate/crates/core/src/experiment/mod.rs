//! Phantom studies: synthetic data on a fine mesh, reconstruction on a
//! coarse mesh, RE against the area-averaged truth.

mod data;
mod phantom;
pub mod presets;
mod run;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::forward::{CemForwardModel, ConductivityField, CurrentPatternSet, MeasurementProtocol};
use crate::mesh::{build_transfer, generate_disk_mesh, read_mesh, DifferenceOperator, ElectrodeLayout, MeshTransfer, TriMesh};
use crate::sparsity::HaarTransform;

pub use data::{add_noise, default_seed, relative_error, synthesize_data, NoiseScale, NoiseSpec, SyntheticData};
pub use phantom::{build_phantom, Inclusion, Phantom, PhantomId, BACKGROUND_RESISTIVITY};
pub use run::{
    compare, read_history, replay, run_experiment, run_on, sweep, write_history, write_image, write_sweep, Comparison,
    ExperimentOutcome, ExperimentReport, ExperimentSpec, Method, NoiseFreeStop, RunStatus, SweepAxis,
};

pub const DEFAULT_FINE_ELEMENTS: usize = 1968;
pub const DEFAULT_COARSE_ELEMENTS: usize = 492;
/// Drive current of the phantom studies.
pub const DEFAULT_CURRENT_AMPLITUDE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshSource {
    Generate { elements: usize },
    File(PathBuf),
}

impl MeshSource {
    pub fn load(&self, layout: &ElectrodeLayout) -> Result<TriMesh> {
        match self {
            Self::Generate { elements } => generate_disk_mesh(*elements, layout),
            Self::File(path) => read_mesh(path),
        }
    }
}

/// Simulation and inversion geometry plus the drive current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSpec {
    pub fine: MeshSource,
    pub coarse: MeshSource,
    pub layout: ElectrodeLayout,
    pub current_amplitude: f64,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            fine: MeshSource::Generate { elements: DEFAULT_FINE_ELEMENTS },
            coarse: MeshSource::Generate { elements: DEFAULT_COARSE_ELEMENTS },
            layout: ElectrodeLayout::standard16(),
            current_amplitude: DEFAULT_CURRENT_AMPLITUDE,
        }
    }
}

/// Fine simulation model, coarse inversion model and the maps between them.
#[derive(Debug, Clone)]
pub struct Workbench {
    pub spec: MeshSpec,
    pub fine: CemForwardModel,
    pub coarse: CemForwardModel,
    pub transfer: MeshTransfer,
    pub difference: DifferenceOperator,
    pub phi: HaarTransform,
}

impl Workbench {
    pub fn new(spec: &MeshSpec, exec: Exec) -> Result<Self> {
        spec.layout.validate()?;
        if !(spec.current_amplitude > 0.0 && spec.current_amplitude.is_finite()) {
            return Err(Error::Config(format!("current amplitude must be positive, got {}", spec.current_amplitude)));
        }
        let fine = spec.fine.load(&spec.layout)?;
        let coarse = spec.coarse.load(&spec.layout)?;
        if fine.id() == coarse.id() {
            return Err(Error::Experiment(
                "simulation and inversion meshes are identical; data would be generated with the inversion model".into(),
            ));
        }
        let transfer = build_transfer(&fine, &coarse)?;
        let difference = DifferenceOperator::from_mesh(&coarse);
        let phi = HaarTransform::new(coarse.element_count());
        let model = |mesh| {
            let patterns = CurrentPatternSet::adjacent(spec.layout.count).scaled(spec.current_amplitude);
            CemForwardModel::new(mesh, spec.layout.clone(), patterns, MeasurementProtocol::default()).map(|m| m.with_exec(exec))
        };
        let fine = model(fine)?;
        let coarse = model(coarse)?;
        Ok(Self { spec: spec.clone(), fine, coarse, transfer, difference, phi })
    }

    /// Truth on both meshes: sampled on the fine mesh, area-averaged onto
    /// the coarse one.
    pub fn truth(&self, phantom: &Phantom) -> Result<(ConductivityField, ConductivityField)> {
        let fine = build_phantom(phantom, self.fine.mesh())?;
        let coarse = ConductivityField::new(self.coarse.mesh(), self.transfer.map_values(fine.values())?)?;
        Ok((fine, coarse))
    }
}
