use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::phantom::PhantomId;
use crate::error::{Error, Result};
use crate::forward::{CemForwardModel, ConductivityField, MeasurementSet};
use crate::inversion::squared_relative_error;

/// Reference amplitude the noise level is relative to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScale {
    /// `max |U_clean|`
    MaxAbs,
    /// `|U_clean[i]|` per measurement.
    PerChannel,
    /// A fixed amplitude.
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub epsilon: f64,
    pub seed: u64,
    #[serde(default = "default_scale")]
    pub scale: NoiseScale,
}

fn default_scale() -> NoiseScale {
    NoiseScale::MaxAbs
}

impl NoiseSpec {
    pub fn new(epsilon: f64, seed: u64) -> Self {
        Self { epsilon, seed, scale: NoiseScale::MaxAbs }
    }

    /// Fixed seed per (phantom, ε).
    pub fn for_phantom(phantom: PhantomId, epsilon: f64) -> Self {
        Self::new(epsilon, default_seed(phantom, epsilon))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("noise level must be nonnegative, got {}", self.epsilon)));
        }
        if let NoiseScale::Absolute(a) = self.scale {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("absolute noise amplitude must be nonnegative, got {a}")));
            }
        }
        Ok(())
    }
}

pub fn default_seed(phantom: PhantomId, epsilon: f64) -> u64 {
    20_170_000 + 1000 * phantom.index() + (epsilon * 1e5).round() as u64
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub clean: MeasurementSet,
    pub noisy: MeasurementSet,
    /// `‖U_noisy - U_clean‖`
    pub noise_norm: f64,
}

/// Seeded standard normal draws, scaled per `noise` and added to `clean`.
pub fn add_noise(clean: &DVector<f64>, noise: &NoiseSpec) -> Result<DVector<f64>> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let max_abs = clean.amax();
    Ok(DVector::from_iterator(
        clean.len(),
        clean.iter().map(|&u| {
            let n: f64 = StandardNormal.sample(&mut rng);
            let s = match noise.scale {
                NoiseScale::MaxAbs => max_abs,
                NoiseScale::PerChannel => u.abs(),
                NoiseScale::Absolute(a) => a,
            };
            u + noise.epsilon * s * n
        }),
    ))
}

/// Simulates data for `truth` with the (fine) forward model `model`.
pub fn synthesize_data(model: &CemForwardModel, truth: &ConductivityField, noise: &NoiseSpec) -> Result<SyntheticData> {
    if truth.mesh_id() != model.mesh().id() {
        return Err(Error::MeshMismatch("truth does not live on the simulation mesh"));
    }
    let clean = model.measure(&model.solve_forward(truth.values())?);
    let voltages = if noise.epsilon == 0.0 { clean.voltages.clone() } else { add_noise(&clean.voltages, noise)? };
    let noise_norm = (&voltages - &clean.voltages).norm();
    let noisy = MeasurementSet { voltages, layout: clean.layout.clone() };
    Ok(SyntheticData { clean, noisy, noise_norm })
}

/// `RE = ‖σ - σ*‖² / ‖σ*‖²`
pub fn relative_error(sigma: &ConductivityField, truth: &ConductivityField) -> Result<f64> {
    if sigma.mesh_id() != truth.mesh_id() {
        return Err(Error::MeshMismatch("reconstruction and truth live on different meshes"));
    }
    if truth.values().iter().all(|&v| v == 0.0) {
        return Err(Error::Experiment("relative error against a zero truth vector".into()));
    }
    Ok(squared_relative_error(sigma.values(), truth.values()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_disk_mesh, ElectrodeLayout};

    fn field(values: Vec<f64>) -> (crate::mesh::TriMesh, ConductivityField) {
        let layout = ElectrodeLayout::uniform(4, 0.05, 0.5).unwrap();
        let mesh = generate_disk_mesh(64, &layout).unwrap();
        let mut v = values;
        v.resize(mesh.element_count(), 0.25);
        let f = ConductivityField::new(&mesh, v).unwrap();
        (mesh, f)
    }

    #[test]
    fn relative_error_cases() {
        let (mesh, truth) = field(vec![1.0, 0.125]);
        assert_eq!(relative_error(&truth, &truth).unwrap(), 0.0);
        let doubled: Vec<f64> = truth.values().iter().map(|v| 2.0 * v).collect();
        let doubled = ConductivityField::new(&mesh, doubled).unwrap();
        assert!((relative_error(&doubled, &truth).unwrap() - 1.0).abs() < 1e-15);
        let zero = ConductivityField::new(&mesh, vec![0.0; mesh.element_count()]).unwrap();
        assert!((relative_error(&zero, &truth).unwrap() - 1.0).abs() < 1e-15);
        assert!(relative_error(&truth, &zero).is_err());
    }

    #[test]
    fn noise_is_seeded_and_scaled() {
        let clean = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0]);
        let spec = NoiseSpec::new(1e-3, 7);
        let a = add_noise(&clean, &spec).unwrap();
        let b = add_noise(&clean, &spec).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, add_noise(&clean, &NoiseSpec::new(1e-3, 8)).unwrap());
        let per = add_noise(&clean, &NoiseSpec { scale: NoiseScale::PerChannel, ..spec }).unwrap();
        assert_eq!(per[3], 0.0);
        let zero = add_noise(&clean, &NoiseSpec::new(0.0, 7)).unwrap();
        assert_eq!(zero, clean);
        assert!(add_noise(&clean, &NoiseSpec::new(-1.0, 7)).is_err());
    }

    #[test]
    fn default_seeds_differ_per_case() {
        let seeds: std::collections::HashSet<u64> = PhantomId::ALL
            .iter()
            .flat_map(|&p| [0.0, 0.001, 0.003].map(|e| default_seed(p, e)))
            .collect();
        assert_eq!(seeds.len(), 9);
    }
}
