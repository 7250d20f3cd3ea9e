//! Comparison regularizers: pure l2 (β = 1), pure l1 (β = 0) and total
//! variation by lagged diffusivity.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{clamp_admissible, ForwardModel, DEFAULT_LAMBDA};
use crate::inversion::{
    run_split_bregman, GnOperator, InversionConfig, InversionProblem, IterationRecord, SparsityDomain,
    SplitBregmanState, StopReason,
};
use crate::mesh::DifferenceOperator;
use crate::sparsity::HaarTransform;

/// Transform-domain run with `β = 1` (the shrinkage threshold is zero).
pub fn run_l2<M: ForwardModel>(
    problem: &InversionProblem<'_, M>,
    config: &InversionConfig,
    phi: &HaarTransform,
) -> Result<SplitBregmanState> {
    let config = InversionConfig { beta: 1.0, ..config.clone() };
    run_split_bregman(problem, &config, &SparsityDomain::Transform(*phi))
}

/// Run with `β = 0` in either domain.
pub fn run_l1<M: ForwardModel>(
    problem: &InversionProblem<'_, M>,
    config: &InversionConfig,
    domain: &SparsityDomain,
) -> Result<SplitBregmanState> {
    let config = InversionConfig { beta: 0.0, ..config.clone() };
    run_split_bregman(problem, &config, domain)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TvConfig {
    pub alpha0: f64,
    pub q_alpha: f64,
    /// Smoothing of `√(x² + γ²)`; `None` picks it from `σ_ref`.
    pub gamma: Option<f64>,
    /// Optional ridge added to the GN operator.
    pub mu: f64,
    pub outer_max: usize,
    pub cg_tol: f64,
    pub cg_max: usize,
    pub noise_norm: f64,
    pub residual_floor: f64,
    pub lambda: f64,
}

impl Default for TvConfig {
    fn default() -> Self {
        Self {
            alpha0: 1e-4,
            q_alpha: 0.6,
            gamma: None,
            mu: 0.0,
            outer_max: 30,
            cg_tol: 1e-8,
            cg_max: 500,
            noise_norm: 0.0,
            residual_floor: 1e-8,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

impl TvConfig {
    /// Same schedule and stopping rules as an elastic-net configuration.
    pub fn matching(config: &InversionConfig) -> Self {
        Self {
            alpha0: config.alpha0,
            q_alpha: config.q_alpha,
            gamma: None,
            mu: 0.0,
            outer_max: config.outer_max,
            cg_tol: config.cg_tol,
            cg_max: config.cg_max,
            noise_norm: config.noise_norm,
            residual_floor: config.residual_floor,
            lambda: config.lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha0 > 0.0
            && self.q_alpha > 0.0
            && self.q_alpha < 1.0
            && self.gamma.is_none_or(|g| g > 0.0)
            && self.mu >= 0.0
            && self.cg_tol > 0.0
            && self.cg_max >= 1
            && self.noise_norm >= 0.0
            && self.residual_floor >= 0.0
            && self.lambda > 0.0
            && self.lambda < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid TV configuration: {self:?}")))
        }
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.alpha0 * self.q_alpha.powi(k as i32)
    }
}

/// `10⁻³ ×` the dynamic range of `σ_ref`, or of its magnitude when it is
/// homogeneous.
pub fn default_gamma(sigma_ref: &[f64]) -> f64 {
    let (lo, hi) = sigma_ref.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let scale = if range > 0.0 { range } else { sigma_ref.iter().fold(0.0f64, |m, v| m.max(v.abs())) };
    1e-3 * scale
}

/// `Σ_i √([Rσ]_i² + γ²) - γ`
pub fn tv_penalty(r: &DifferenceOperator, sigma: &[f64], gamma: f64) -> f64 {
    r.apply(sigma).iter().map(|x| (x * x + gamma * gamma).sqrt() - gamma).sum()
}

/// Edge weights `1 / √([Rσ]_i² + γ²)`.
pub fn lagged_diffusivity_weights(r: &DifferenceOperator, sigma: &[f64], gamma: f64) -> Vec<f64> {
    r.apply(sigma).iter().map(|x| 1.0 / (x * x + gamma * gamma).sqrt()).collect()
}

/// Gradient of the TV penalty, `Rᵀ W(σ) R σ`.
pub fn tv_gradient(r: &DifferenceOperator, sigma: &[f64], gamma: f64) -> Vec<f64> {
    let w = lagged_diffusivity_weights(r, sigma, gamma);
    let mut out = vec![0.0; sigma.len()];
    r.weighted_normal_add(Some(&w), sigma, 1.0, &mut out);
    out
}

/// Dense `L(σ) = Rᵀ W(σ) R`.
pub fn lagged_diffusivity_matrix(r: &DifferenceOperator, sigma: &[f64], gamma: f64) -> DMatrix<f64> {
    let w = lagged_diffusivity_weights(r, sigma, gamma);
    let mut l = DMatrix::zeros(r.cols(), r.cols());
    for (row, &[i, j]) in r.pairs().iter().enumerate() {
        l[(i, i)] += w[row];
        l[(j, j)] += w[row];
        l[(i, j)] -= w[row];
        l[(j, i)] -= w[row];
    }
    l
}

/// Gauss-Newton with the TV penalty linearized by lagged diffusivity:
/// `[JᵀJ + (α_k/2) L(σ^k)] δσ = Jᵀr - (α_k/2) L(σ^k) σ^k`.
pub fn run_tv<M: ForwardModel>(problem: &InversionProblem<'_, M>, config: &TvConfig) -> Result<SplitBregmanState> {
    config.validate()?;
    problem.check(config.lambda)?;
    let gamma = config.gamma.unwrap_or_else(|| default_gamma(problem.sigma_ref));
    if !(gamma > 0.0) {
        return Err(Error::Config("TV smoothing γ must be positive".into()));
    }
    let n = problem.model.parameter_count();
    let threshold =
        if config.noise_norm > 0.0 { config.noise_norm } else { config.residual_floor * problem.data.norm() };
    let mut sigma = problem.sigma_ref.to_vec();
    let mut history = Vec::new();
    let mut delta = vec![0.0; n];
    let mut k = 0;

    loop {
        let alpha_k = config.alpha(k);
        let residual_vec = problem.data - problem.model.predict(&sigma)?;
        let residual = residual_vec.norm();
        let re = problem.re(&sigma);
        if !residual.is_finite() {
            return Err(Error::NonFinite { k, history });
        }
        let stop = if residual < threshold {
            Some(StopReason::Discrepancy)
        } else if k >= config.outer_max {
            Some(StopReason::OuterMax)
        } else {
            None
        };
        if let Some(stop) = stop {
            history.push(IterationRecord { k, alpha_k, inner_iters: 0, residual, re });
            return Ok(SplitBregmanState { sigma, d: Vec::new(), b_d: Vec::new(), alpha_k, k, history, stop });
        }

        let (_, jac) = problem.model.linearize(&sigma)?;
        let w = lagged_diffusivity_weights(problem.difference, &sigma, gamma);
        let op = GnOperator {
            jacobian: &jac.entries,
            difference: problem.difference,
            weights: Some(&w),
            penalty_scale: alpha_k / 2.0,
            mu: config.mu,
        };
        let mut rhs: Vec<f64> = jac.entries.tr_mul(&residual_vec).iter().copied().collect();
        problem.difference.weighted_normal_add(Some(&w), &sigma, -alpha_k / 2.0, &mut rhs);
        if config.mu > 0.0 {
            for (r, s) in rhs.iter_mut().zip(&sigma) {
                *r -= config.mu * s;
            }
        }
        delta.iter_mut().for_each(|v| *v = 0.0);
        op.solve(&rhs, &mut delta, config.cg_tol, config.cg_max)?;
        history.push(IterationRecord { k, alpha_k, inner_iters: 1, residual, re });

        if delta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { k, history });
        }
        for (s, v) in sigma.iter_mut().zip(&delta) {
            *s += v;
        }
        clamp_admissible(&mut sigma, config.lambda);
        k += 1;
    }
}
