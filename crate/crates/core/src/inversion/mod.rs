//! Elastic-net regularized Gauss-Newton with split Bregman inner iterations,
//! in a transform domain (Haar coefficients) or the space domain
//! (inhomogeneity `σ - σ0`).

mod cg;
mod gn;
mod split_bregman;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::DEFAULT_LAMBDA;

pub use cg::{jacobi, pcg, CgStats};
pub use gn::{gn_update_space, gn_update_transform, GnInputs, GnOperator, Preconditioner, PreconditionerKind};
#[cfg(test)]
pub(crate) use split_bregman::tests as split_bregman_fixtures;
pub use split_bregman::{
    run_algorithm1, run_algorithm2, run_split_bregman, squared_relative_error, InversionProblem, SparsityDomain,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionConfig {
    pub alpha0: f64,
    pub q_alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub tau: f64,
    pub inner_max: usize,
    pub outer_max: usize,
    pub cg_tol: f64,
    pub cg_max: usize,
    /// `‖U - U^δ‖`; zero selects the relative residual floor.
    pub noise_norm: f64,
    /// Stop threshold relative to `‖U^δ‖` when `noise_norm` is zero.
    pub residual_floor: f64,
    /// Admissible box `[λ, 1/λ]`.
    pub lambda: f64,
    /// Keep `d` and `b_d` across outer iterations; `false` resets them to zero.
    pub carry_bregman: bool,
    pub preconditioner: PreconditionerKind,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            alpha0: 1e-6,
            q_alpha: 0.6,
            beta: 0.1,
            mu: 1e-10,
            tau: 1e-2,
            inner_max: 10,
            outer_max: 30,
            cg_tol: 1e-8,
            cg_max: 500,
            noise_norm: 0.0,
            residual_floor: 1e-8,
            lambda: DEFAULT_LAMBDA,
            carry_bregman: true,
            preconditioner: PreconditionerKind::LowRank,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.alpha0 > 0.0 && self.alpha0.is_finite(), "alpha0 must be positive"),
            (self.q_alpha > 0.0 && self.q_alpha < 1.0, "q_alpha must lie in (0, 1)"),
            ((0.0..=1.0).contains(&self.beta), "beta must lie in [0, 1]"),
            (self.mu > 0.0 && self.mu.is_finite(), "mu must be positive"),
            (self.tau > 0.0, "tau must be positive"),
            (self.inner_max >= 1, "inner_max must be at least 1"),
            (self.cg_tol > 0.0, "cg_tol must be positive"),
            (self.cg_max >= 1, "cg_max must be at least 1"),
            (self.noise_norm >= 0.0, "noise_norm must be nonnegative"),
            (self.residual_floor >= 0.0, "residual_floor must be nonnegative"),
            (self.lambda > 0.0 && self.lambda < 1.0, "lambda must lie in (0, 1)"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Config(format!("{msg}: {self:?}"))),
            None => Ok(()),
        }
    }

    /// `α_k = α0 q^k`
    pub fn alpha(&self, k: usize) -> f64 {
        self.alpha0 * self.q_alpha.powi(k as i32)
    }

    /// Absolute discrepancy threshold for data of norm `data_norm`.
    pub fn stop_threshold(&self, data_norm: f64) -> f64 {
        if self.noise_norm > 0.0 {
            self.noise_norm
        } else {
            self.residual_floor * data_norm
        }
    }
}

/// Shrinkage threshold of one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyWeights {
    pub eta: f64,
}

impl PenaltyWeights {
    /// `η = α_k (1 - β) / (2 μ)`
    pub fn new(alpha_k: f64, beta: f64, mu: f64) -> Self {
        Self { eta: alpha_k * (1.0 - beta) / (2.0 * mu) }
    }
}

/// One row of the outer-iteration history.
///
/// Row `k` describes the iterate `σ^k`: its data residual and RE, the
/// weight `α_k`, and the inner iterations spent on the step leaving it
/// (zero on the row where the loop stopped).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub alpha_k: f64,
    pub inner_iters: usize,
    pub residual: f64,
    #[serde(rename = "RE")]
    pub re: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Discrepancy,
    OuterMax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitBregmanState {
    pub sigma: Vec<f64>,
    pub d: Vec<f64>,
    pub b_d: Vec<f64>,
    pub alpha_k: f64,
    pub k: usize,
    pub history: Vec<IterationRecord>,
    pub stop: StopReason,
}

impl SplitBregmanState {
    pub fn final_residual(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.residual)
    }

    pub fn initial_residual(&self) -> f64 {
        self.history.first().map_or(f64::NAN, |r| r.residual)
    }
}

/// `sign(x) max(|x| - t, 0)` elementwise.
pub fn shrinkage(x: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(Error::Config(format!("shrinkage threshold must be nonnegative, got {t}")));
    }
    Ok(x.iter().map(|&v| shrink(v, t)).collect())
}

fn shrink(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Discrepancy test `residual < noise_norm`, or `residual < floor` when the
/// data are noise-free.
pub fn morozov_stop(residual_norm: f64, noise_norm: f64, floor: f64) -> bool {
    let threshold = if noise_norm > 0.0 { noise_norm } else { floor };
    residual_norm < threshold
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shrinkage_cases() {
        assert_eq!(shrinkage(&[3.0], 1.0).unwrap(), vec![2.0]);
        assert_eq!(shrinkage(&[-0.5], 1.0).unwrap(), vec![0.0]);
        assert_eq!(shrinkage(&[-3.0, 1.0], 1.0).unwrap(), vec![-2.0, 0.0]);
        let x = [0.3, -7.0, 0.0, 1e-300];
        assert_eq!(shrinkage(&x, 0.0).unwrap(), x.to_vec());
        assert!(shrinkage(&x, -1.0).is_err());
        assert!(shrinkage(&x, f64::NAN).is_err());
    }

    #[test]
    fn morozov_cases() {
        assert!(morozov_stop(0.5, 1.0, 0.0));
        assert!(!morozov_stop(1.0, 1.0, 0.0));
        assert!(morozov_stop(1e-9, 0.0, 1e-8));
        assert!(!morozov_stop(1e-7, 0.0, 1e-8));
    }

    #[test]
    fn alpha_schedule_is_geometric() {
        let c = InversionConfig { alpha0: 1e-6, q_alpha: 0.6, ..Default::default() };
        let mut prev = f64::INFINITY;
        for k in 0..40 {
            let a = c.alpha(k);
            assert_eq!(a, 1e-6 * 0.6f64.powi(k as i32));
            assert!(a < prev);
            prev = a;
        }
    }

    #[test]
    fn eta_vanishes_at_beta_one() {
        assert_eq!(PenaltyWeights::new(1e-3, 1.0, 1e-6).eta, 0.0);
        assert_eq!(PenaltyWeights::new(2.0, 0.0, 0.5).eta, 2.0);
    }

    #[test]
    fn config_validation_and_toml() {
        assert!(InversionConfig::default().validate().is_ok());
        for bad in [
            InversionConfig { alpha0: 0.0, ..Default::default() },
            InversionConfig { q_alpha: 1.0, ..Default::default() },
            InversionConfig { beta: 1.5, ..Default::default() },
            InversionConfig { mu: 0.0, ..Default::default() },
            InversionConfig { tau: 0.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
        let c: InversionConfig = toml::from_str("alpha0 = 1e-4\nbeta = 0.3\n").unwrap();
        assert_eq!(c.alpha0, 1e-4);
        assert_eq!(c.beta, 0.3);
        assert_eq!(c.mu, 1e-10);
        assert!(toml::from_str::<InversionConfig>("alpah0 = 1").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn shrinkage_is_a_proximal_map(
            xy in (1usize..40).prop_flat_map(|n| (
                prop::collection::vec(-10.0f64..10.0, n),
                prop::collection::vec(-10.0f64..10.0, n),
            )),
            t in 0.0f64..5.0,
        ) {
            let (x, y) = xy;
            let sx = shrinkage(&x, t).unwrap();
            let sy = shrinkage(&y, t).unwrap();
            let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            prop_assert!(dist(&sx, &sy) <= dist(&x, &y) * (1.0 + 1e-15));
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let sneg = shrinkage(&neg, t).unwrap();
            for i in 0..x.len() {
                prop_assert_eq!(sneg[i], -sx[i]);
                prop_assert_eq!(sx[i] == 0.0, x[i].abs() <= t);
            }
        }
    }
}
