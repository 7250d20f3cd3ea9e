//! Sparsifying maps: the orthonormal Haar transform over element order and
//! the inhomogeneity `σ - σ0`.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::forward::ConductivityField;

/// Full-depth orthonormal 1-D Haar transform of an element vector,
/// zero-padded to the next power of two.
///
/// Coefficients are stored coarse to fine: the approximation coefficient,
/// then the detail coefficients of each level from the coarsest (1 value)
/// to the finest (`length / 2` values).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HaarTransform {
    input_len: usize,
    length: usize,
    levels: u32,
}

impl HaarTransform {
    pub fn new(input_len: usize) -> Self {
        let length = input_len.max(1).next_power_of_two();
        Self { input_len, length, levels: length.trailing_zeros() }
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    /// Padded coefficient count.
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_len {
            return Err(Error::Dimension { what: "Haar input", expected: self.input_len, got: x.len() });
        }
        let mut data = x.to_vec();
        data.resize(self.length, 0.0);
        let mut tmp = vec![0.0; self.length];
        let mut n = self.length;
        while n > 1 {
            let half = n / 2;
            for i in 0..half {
                let (a, b) = (data[2 * i], data[2 * i + 1]);
                tmp[i] = (a + b) * FRAC_1_SQRT_2;
                tmp[half + i] = (a - b) * FRAC_1_SQRT_2;
            }
            data[..n].copy_from_slice(&tmp[..n]);
            n = half;
        }
        Ok(data)
    }

    /// Inverse transform keeping the padded tail.
    pub fn inverse_padded(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.length {
            return Err(Error::Dimension { what: "Haar coefficients", expected: self.length, got: coeffs.len() });
        }
        let mut data = coeffs.to_vec();
        let mut tmp = vec![0.0; self.length];
        let mut n = 2;
        while n <= self.length {
            let half = n / 2;
            for i in 0..half {
                let (s, d) = (data[i], data[half + i]);
                tmp[2 * i] = (s + d) * FRAC_1_SQRT_2;
                tmp[2 * i + 1] = (s - d) * FRAC_1_SQRT_2;
            }
            data[..n].copy_from_slice(&tmp[..n]);
            n *= 2;
        }
        Ok(data)
    }

    /// `Φᵀ c`: inverse transform restricted to the element range.
    pub fn inverse(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.inverse_padded(coeffs)?;
        x.truncate(self.input_len);
        Ok(x)
    }
}

/// Haar coefficients of `x` (padded to a power of two).
pub fn forward_haar(x: &[f64]) -> Vec<f64> {
    HaarTransform::new(x.len()).forward(x).expect("length matches by construction")
}

/// Elementwise `σ - σ0`.
pub fn inhomogeneity(sigma: &ConductivityField, sigma0: &ConductivityField) -> Result<Vec<f64>> {
    if sigma.mesh_id() != sigma0.mesh_id() {
        return Err(Error::MeshMismatch("σ and σ0 live on different meshes"));
    }
    Ok(sigma.values().iter().zip(sigma0.values()).map(|(a, b)| a - b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn constant_has_single_approximation_coefficient() {
        for k in 0..10u32 {
            let n = 1usize << k;
            let c = 0.25;
            let coeffs = forward_haar(&vec![c; n]);
            let expected = c * 2f64.powf(k as f64 / 2.0);
            assert!((coeffs[0] - expected).abs() < 1e-12 * expected);
            assert!(coeffs[1..].iter().all(|&v| v.abs() < 1e-15), "k = {k}");
        }
    }

    #[test]
    fn unit_coefficient_gives_unit_basis_vector() {
        let t = HaarTransform::new(16);
        for k in 0..16 {
            let mut c = vec![0.0; 16];
            c[k] = 1.0;
            let v = t.inverse(&c).unwrap();
            assert!((norm(&v) - 1.0).abs() < 1e-14);
        }
        // finest detail of the first pair: (e0 - e1)/√2
        let mut c = vec![0.0; 16];
        c[8] = 1.0;
        let v = t.inverse(&c).unwrap();
        assert!((v[0] - FRAC_1_SQRT_2).abs() < 1e-15 && (v[1] + FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(v[2..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let t = HaarTransform::new(5);
        assert_eq!(t.length(), 8);
        assert_eq!(t.levels(), 3);
        assert!(t.forward(&[1.0; 4]).is_err());
        assert!(t.inverse(&[1.0; 5]).is_err());
    }

    #[test]
    fn inhomogeneity_requires_same_mesh() {
        use crate::mesh::{generate_disk_mesh, ElectrodeLayout};
        let layout = ElectrodeLayout::uniform(4, 0.05, 0.5).unwrap();
        let a = generate_disk_mesh(64, &layout).unwrap();
        let b = generate_disk_mesh(128, &layout).unwrap();
        let s = ConductivityField::homogeneous(&a, 0.25);
        assert!(inhomogeneity(&s, &s).unwrap().iter().all(|&v| v == 0.0));
        assert!(inhomogeneity(&s, &ConductivityField::homogeneous(&b, 0.25)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn orthonormal_and_invertible(x in prop::collection::vec(-10.0f64..10.0, 1..300)) {
            let t = HaarTransform::new(x.len());
            let c = t.forward(&x).unwrap();
            let nx = norm(&x);
            prop_assert!((norm(&c) - nx).abs() <= 1e-12 * nx.max(1e-300));
            let padded = t.inverse_padded(&c).unwrap();
            for (i, v) in padded.iter().enumerate() {
                let want = if i < x.len() { x[i] } else { 0.0 };
                prop_assert!((v - want).abs() <= 1e-12 * nx.max(1.0));
            }
        }

        #[test]
        fn inverse_is_the_adjoint(
            pair in (1usize..200).prop_flat_map(|n| {
                let len = n.next_power_of_two();
                (prop::collection::vec(-5.0f64..5.0, n), prop::collection::vec(-5.0f64..5.0, len))
            })
        ) {
            let (x, y) = pair;
            let t = HaarTransform::new(x.len());
            let lhs = dot(&t.forward(&x).unwrap(), &y);
            let rhs = dot(&x, &t.inverse(&y).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (norm(&x) * norm(&y)).max(1.0));
        }
    }
}
