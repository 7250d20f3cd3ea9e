use nalgebra::DVector;

use super::gn::{gn_update_space, gn_update_transform, GnInputs};
use super::{shrinkage, CgStats, InversionConfig, IterationRecord, PenaltyWeights, SplitBregmanState, StopReason};
use crate::error::{Error, Result};
use crate::forward::{check_admissible, clamp_admissible, ForwardModel};
use crate::mesh::DifferenceOperator;
use crate::sparsity::HaarTransform;

/// Where the l1 term acts.
#[derive(Debug, Clone, PartialEq)]
pub enum SparsityDomain {
    /// Haar coefficients `Φσ`.
    Transform(HaarTransform),
    /// Inhomogeneity `σ - σ0`.
    Space(Vec<f64>),
}

impl SparsityDomain {
    pub fn len(&self) -> usize {
        match self {
            Self::Transform(phi) => phi.length(),
            Self::Space(sigma0) => sigma0.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The constrained quantity `d` tracks: `Φσ` or `σ - σ0`.
    pub fn constraint(&self, sigma: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Transform(phi) => phi.forward(sigma),
            Self::Space(sigma0) => Ok(sigma.iter().zip(sigma0).map(|(s, s0)| s - s0).collect()),
        }
    }

    fn gn_step(&self, inputs: &GnInputs<'_>, d: &[f64], b: &[f64], delta: &mut [f64]) -> Result<CgStats> {
        match self {
            Self::Transform(phi) => gn_update_transform(inputs, phi, d, b, delta),
            Self::Space(sigma0) => gn_update_space(inputs, sigma0, d, b, delta),
        }
    }

    fn input_len(&self) -> usize {
        match self {
            Self::Transform(phi) => phi.input_len(),
            Self::Space(sigma0) => sigma0.len(),
        }
    }
}

/// Everything an inversion run needs besides its configuration.
pub struct InversionProblem<'a, M: ForwardModel> {
    pub model: &'a M,
    /// Measured data `U^δ`.
    pub data: &'a DVector<f64>,
    pub difference: &'a DifferenceOperator,
    pub sigma_ref: &'a [f64],
    /// True conductivity on the inversion mesh, for RE in the history.
    pub truth: Option<&'a [f64]>,
}

impl<M: ForwardModel> InversionProblem<'_, M> {
    pub(crate) fn check(&self, lambda: f64) -> Result<()> {
        let n = self.model.parameter_count();
        let dims = [
            ("data", self.data.len(), self.model.data_count()),
            ("sigma_ref", self.sigma_ref.len(), n),
            ("difference operator columns", self.difference.cols(), n),
            ("truth", self.truth.map_or(n, <[f64]>::len), n),
        ];
        for (what, got, expected) in dims {
            if got != expected {
                return Err(Error::Dimension { what, expected, got });
            }
        }
        check_admissible(self.sigma_ref, lambda)
    }

    pub(crate) fn re(&self, sigma: &[f64]) -> Option<f64> {
        self.truth.map(|t| squared_relative_error(sigma, t))
    }
}

/// `‖σ - σ*‖² / ‖σ*‖²`
pub fn squared_relative_error(sigma: &[f64], truth: &[f64]) -> f64 {
    let num: f64 = sigma.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = truth.iter().map(|b| b * b).sum();
    num / den
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Transform-domain split Bregman Gauss-Newton.
pub fn run_algorithm1<M: ForwardModel>(
    problem: &InversionProblem<'_, M>,
    config: &InversionConfig,
    phi: &HaarTransform,
) -> Result<SplitBregmanState> {
    run_split_bregman(problem, config, &SparsityDomain::Transform(*phi))
}

/// Space-domain split Bregman Gauss-Newton.
pub fn run_algorithm2<M: ForwardModel>(
    problem: &InversionProblem<'_, M>,
    config: &InversionConfig,
    sigma0: &[f64],
) -> Result<SplitBregmanState> {
    run_split_bregman(problem, config, &SparsityDomain::Space(sigma0.to_vec()))
}

pub fn run_split_bregman<M: ForwardModel>(
    problem: &InversionProblem<'_, M>,
    config: &InversionConfig,
    domain: &SparsityDomain,
) -> Result<SplitBregmanState> {
    config.validate()?;
    problem.check(config.lambda)?;
    let n = problem.model.parameter_count();
    if domain.input_len() != n {
        return Err(Error::Dimension { what: "sparsity domain", expected: n, got: domain.input_len() });
    }

    let threshold = config.stop_threshold(problem.data.norm());
    let mut sigma = problem.sigma_ref.to_vec();
    let mut d = vec![0.0; domain.len()];
    let mut b = vec![0.0; domain.len()];
    let mut history = Vec::new();
    let mut k = 0;

    loop {
        let alpha_k = config.alpha(k);
        let pred = problem.model.predict(&sigma)?;
        let residual_vec = problem.data - pred;
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
            return Ok(SplitBregmanState { sigma, d, b_d: b, alpha_k, k, history, stop });
        }

        let (_, jac) = problem.model.linearize(&sigma)?;
        let eta = PenaltyWeights::new(alpha_k, config.beta, config.mu).eta;
        if !config.carry_bregman {
            d.iter_mut().for_each(|v| *v = 0.0);
            b.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut inputs = GnInputs {
            jacobian: &jac.entries,
            residual: &residual_vec,
            difference: problem.difference,
            sigma: &sigma,
            sigma_ref: problem.sigma_ref,
            alpha: alpha_k,
            beta: config.beta,
            mu: config.mu,
            cg_tol: config.cg_tol,
            cg_max: config.cg_max,
            preconditioner: None,
        };
        let pre = inputs.operator().preconditioner(config.preconditioner)?;
        inputs.preconditioner = Some(&pre);
        let mut delta = vec![0.0; n];
        let mut inner = 0;
        loop {
            domain.gn_step(&inputs, &d, &b, &mut delta)?;
            inner += 1;
            let trial: Vec<f64> = sigma.iter().zip(&delta).map(|(s, v)| s + v).collect();
            let c = domain.constraint(&trial)?;
            let cb: Vec<f64> = c.iter().zip(&b).map(|(c, b)| c + b).collect();
            d = shrinkage(&cb, eta)?;
            for i in 0..b.len() {
                b[i] += c[i] - d[i];
            }
            if norm(&delta) < config.tau || inner >= config.inner_max {
                break;
            }
        }
        history.push(IterationRecord { k, alpha_k, inner_iters: inner, residual, re });

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

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::forward::JacobianMatrix;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `F(σ) = Aσ`, 12 data from 16 parameters.
    pub(crate) struct Linear(pub DMatrix<f64>);

    impl ForwardModel for Linear {
        fn parameter_count(&self) -> usize {
            self.0.ncols()
        }
        fn data_count(&self) -> usize {
            self.0.nrows()
        }
        fn predict(&self, sigma: &[f64]) -> Result<DVector<f64>> {
            Ok(&self.0 * DVector::from_column_slice(sigma))
        }
        fn linearize(&self, sigma: &[f64]) -> Result<(DVector<f64>, JacobianMatrix)> {
            Ok((self.predict(sigma)?, JacobianMatrix { entries: self.0.clone() }))
        }
    }

    pub(crate) fn linear(seed: u64) -> Linear {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Linear(DMatrix::from_fn(12, 16, |_, _| rng.random_range(-1.0..1.0)))
    }

    pub(crate) fn chain(n: usize) -> DifferenceOperator {
        DifferenceOperator::from_pairs((0..n - 1).map(|i| [i, i + 1]).collect(), n)
    }

    pub(crate) fn truth() -> Vec<f64> {
        (0..16).map(|i| if (5..9).contains(&i) { 1.0 } else { 0.25 }).collect()
    }

    fn config() -> InversionConfig {
        InversionConfig { alpha0: 1e-2, q_alpha: 0.6, beta: 0.3, mu: 1e-4, outer_max: 12, ..Default::default() }
    }

    #[test]
    fn converged_start_stops_at_zero() {
        let model = linear(1);
        let sigma_ref = vec![0.25; 16];
        let data = model.predict(&sigma_ref).unwrap();
        let r = chain(16);
        let problem = InversionProblem { model: &model, data: &data, difference: &r, sigma_ref: &sigma_ref, truth: Some(&sigma_ref) };
        let phi = HaarTransform::new(16);
        for state in [
            run_algorithm1(&problem, &config(), &phi).unwrap(),
            run_algorithm2(&problem, &config(), &sigma_ref).unwrap(),
        ] {
            assert_eq!(state.k, 0);
            assert_eq!(state.stop, StopReason::Discrepancy);
            assert_eq!(state.history.len(), 1);
            assert_eq!(state.history[0].re, Some(0.0));
            assert_eq!(state.sigma, sigma_ref);
            assert!(state.d.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn history_schedule_and_inner_loop() {
        let model = linear(2);
        let t = truth();
        let data = model.predict(&t).unwrap();
        let sigma_ref = vec![0.25; 16];
        let r = chain(16);
        let problem = InversionProblem { model: &model, data: &data, difference: &r, sigma_ref: &sigma_ref, truth: Some(&t) };
        let c = config();
        let state = run_algorithm1(&problem, &c, &HaarTransform::new(16)).unwrap();
        assert_eq!(state.stop, StopReason::OuterMax);
        assert_eq!(state.k, c.outer_max);
        assert_eq!(state.history.len(), c.outer_max + 1);
        for (k, row) in state.history.iter().enumerate() {
            assert_eq!(row.k, k);
            assert!((row.alpha_k - c.alpha0 * 0.6f64.powi(k as i32)).abs() <= 1e-14 * row.alpha_k);
            if k < c.outer_max {
                assert!((1..=c.inner_max).contains(&row.inner_iters));
            }
        }
        assert!((state.alpha_k - c.alpha(state.k)).abs() <= 1e-14 * state.alpha_k);
        assert_eq!(state.d.len(), 16);
        let h = &state.history;
        assert!(h.last().unwrap().residual < h[0].residual);
    }

    #[test]
    fn runs_are_bitwise_deterministic() {
        let model = linear(3);
        let t = truth();
        let data = model.predict(&t).unwrap();
        let sigma_ref = vec![0.25; 16];
        let r = chain(16);
        let problem = InversionProblem { model: &model, data: &data, difference: &r, sigma_ref: &sigma_ref, truth: Some(&t) };
        let a = run_algorithm2(&problem, &config(), &sigma_ref).unwrap();
        let b = run_algorithm2(&problem, &config(), &sigma_ref).unwrap();
        assert_eq!(a, b);
        let bits = |s: &SplitBregmanState| s.history.iter().map(|h| h.residual.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn beta_one_follows_plain_tikhonov() {
        let model = linear(4);
        let t = truth();
        let data = model.predict(&t).unwrap();
        let sigma_ref = vec![0.25; 16];
        let r = chain(16);
        let problem = InversionProblem { model: &model, data: &data, difference: &r, sigma_ref: &sigma_ref, truth: None };
        let c = InversionConfig { beta: 1.0, mu: 1e-10, cg_tol: 1e-13, outer_max: 8, ..config() };
        let state = run_algorithm1(&problem, &c, &HaarTransform::new(16)).unwrap();

        // dense Tikhonov GN with the same schedule
        let a = &model.0;
        let mut rtr = DMatrix::<f64>::zeros(16, 16);
        for &[i, j] in r.pairs() {
            rtr[(i, i)] += 1.0;
            rtr[(j, j)] += 1.0;
            rtr[(i, j)] -= 1.0;
            rtr[(j, i)] -= 1.0;
        }
        let mut sigma = DVector::from_element(16, 0.25);
        let sref = sigma.clone();
        for k in 0..c.outer_max {
            let res = &data - a * &sigma;
            assert!((res.norm() - state.history[k].residual).abs() <= 1e-8 * res.norm(), "k = {k}");
            let alpha = c.alpha(k);
            let lhs = a.transpose() * a + &rtr * alpha;
            let rhs = a.transpose() * res - &rtr * (&sigma - &sref) * alpha;
            sigma += lhs.lu().solve(&rhs).unwrap();
            sigma.iter_mut().for_each(|v| *v = v.clamp(c.lambda, 1.0 / c.lambda));
        }
        let diff = (&sigma - DVector::from_column_slice(&state.sigma)).norm();
        assert!(diff <= 1e-8 * sigma.norm(), "{diff}");
    }

    #[test]
    fn homogeneous_truth_is_a_fixed_point_of_algorithm2() {
        let model = linear(5);
        let sigma0 = vec![0.25; 16];
        let data = model.predict(&sigma0).unwrap();
        let r = chain(16);
        let problem = InversionProblem { model: &model, data: &data, difference: &r, sigma_ref: &sigma0, truth: Some(&sigma0) };
        let c = InversionConfig { residual_floor: 0.0, outer_max: 5, ..config() };
        let state = run_algorithm2(&problem, &c, &sigma0).unwrap();
        assert_eq!(state.sigma, sigma0);
        assert!(state.d.iter().all(|&v| v == 0.0));
        assert_eq!(state.history.last().unwrap().re, Some(0.0));
    }

    #[test]
    fn dimension_errors() {
        let model = linear(6);
        let sigma_ref = vec![0.25; 16];
        let data = DVector::zeros(11);
        let r = chain(16);
        let problem = InversionProblem { model: &model, data: &data, difference: &r, sigma_ref: &sigma_ref, truth: None };
        assert!(matches!(run_algorithm2(&problem, &config(), &sigma_ref), Err(Error::Dimension { what: "data", .. })));
        let data = DVector::zeros(12);
        let problem = InversionProblem { data: &data, ..problem };
        assert!(run_algorithm1(&problem, &config(), &HaarTransform::new(15)).is_err());
        assert!(run_algorithm1(&problem, &InversionConfig { mu: 0.0, ..config() }, &HaarTransform::new(16)).is_err());
    }

    #[test]
    fn relative_error_is_squared() {
        let t = [1.0, 2.0];
        assert_eq!(squared_relative_error(&t, &t), 0.0);
        assert_eq!(squared_relative_error(&[2.0, 4.0], &t), 1.0);
        assert_eq!(squared_relative_error(&[0.0, 0.0], &t), 1.0);
    }
}
