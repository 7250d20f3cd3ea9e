use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use serde::{Deserialize, Serialize};

use super::cg::{pcg, CgStats};
use crate::error::{Error, Result};
use crate::mesh::DifferenceOperator;
use crate::sparsity::HaarTransform;

/// Gauss-Newton normal operator `JᵀJ + s Rᵀ diag(w) R + μ I`, applied
/// matrix-free.
#[derive(Debug, Clone, Copy)]
pub struct GnOperator<'a> {
    pub jacobian: &'a DMatrix<f64>,
    pub difference: &'a DifferenceOperator,
    /// Edge weights of the penalty; `None` means all ones.
    pub weights: Option<&'a [f64]>,
    pub penalty_scale: f64,
    pub mu: f64,
}

impl GnOperator<'_> {
    pub fn dim(&self) -> usize {
        self.jacobian.ncols()
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let jv = self.jacobian * DVector::from_column_slice(v);
        let jtjv = self.jacobian.tr_mul(&jv);
        for i in 0..v.len() {
            out[i] = jtjv[i] + self.mu * v[i];
        }
        if self.penalty_scale != 0.0 {
            self.difference.weighted_normal_add(self.weights, v, self.penalty_scale, out);
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let pen = self.difference.weighted_normal_diagonal(self.weights);
        self.jacobian
            .column_iter()
            .zip(pen)
            .map(|(c, p)| c.norm_squared() + self.penalty_scale * p + self.mu)
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = self.jacobian.tr_mul(self.jacobian);
        for (row, &[i, j]) in self.difference.pairs().iter().enumerate() {
            let w = self.penalty_scale * self.weights.map_or(1.0, |w| w[row]);
            a[(i, i)] += w;
            a[(j, j)] += w;
            a[(i, j)] -= w;
            a[(j, i)] -= w;
        }
        for i in 0..a.nrows() {
            a[(i, i)] += self.mu;
        }
        a
    }

    /// Sparse penalty part `s Rᵀ diag(w) R + shift I`.
    fn penalty_matrix(&self, shift: f64) -> CscMatrix<f64> {
        let n = self.dim();
        let mut coo = CooMatrix::new(n, n);
        for (row, &[i, j]) in self.difference.pairs().iter().enumerate() {
            let w = self.penalty_scale * self.weights.map_or(1.0, |w| w[row]);
            coo.push(i, i, w);
            coo.push(j, j, w);
            coo.push(i, j, -w);
            coo.push(j, i, -w);
        }
        for i in 0..n {
            coo.push(i, i, shift);
        }
        CscMatrix::from(&coo)
    }

    pub fn preconditioner(&self, kind: PreconditionerKind) -> Result<Preconditioner> {
        match kind {
            PreconditionerKind::Jacobi => {
                Ok(Preconditioner::Jacobi(self.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect()))
            }
            PreconditionerKind::LowRank => self.low_rank(),
        }
    }

    /// `(P + JᵀJ)⁻¹ = P⁻¹ - P⁻¹Jᵀ (I + J P⁻¹ Jᵀ)⁻¹ J P⁻¹` with `P` the sparse
    /// penalty part. A singular `P` (no ridge) gets a tiny shift.
    fn low_rank(&self) -> Result<Preconditioner> {
        let pen_diag = self.difference.weighted_normal_diagonal(self.weights);
        let scale = pen_diag.iter().fold(0.0f64, |m, &d| m.max(self.penalty_scale * d));
        let shift = if self.mu > 0.0 { self.mu } else { (1e-12 * scale).max(f64::MIN_POSITIVE) };
        let p = CscCholesky::factor(&self.penalty_matrix(shift))
            .map_err(|e| Error::Factorization(format!("GN penalty preconditioner: {e}")))?;
        let z = p.solve(&self.jacobian.transpose());
        let mut c = self.jacobian * &z;
        for i in 0..c.nrows() {
            c[(i, i)] += 1.0;
        }
        let c = (&c + c.transpose()) * 0.5;
        let c = Cholesky::new(c).ok_or_else(|| Error::Factorization("GN low-rank preconditioner capacitance".into()))?;
        Ok(Preconditioner::LowRank(Box::new(LowRank { p, z, c, jacobian: self.jacobian.clone() })))
    }

    /// Solves `A x = rhs` by PCG, warm-started from `x`.
    pub fn solve(&self, rhs: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<CgStats> {
        let pre = self.preconditioner(PreconditionerKind::default())?;
        self.solve_with(&pre, rhs, x, tol, max_iter)
    }

    pub fn solve_with(&self, pre: &Preconditioner, rhs: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<CgStats> {
        pcg(|v, out| self.apply(v, out), |r, z| pre.apply(r, z), rhs, x, tol, max_iter)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionerKind {
    Jacobi,
    /// Exact inverse of the operator through the Woodbury identity, using
    /// that `J` has far fewer rows than columns.
    #[default]
    LowRank,
}

pub struct LowRank {
    p: CscCholesky<f64>,
    z: DMatrix<f64>,
    c: Cholesky<f64, Dyn>,
    jacobian: DMatrix<f64>,
}

pub enum Preconditioner {
    /// Inverse diagonal.
    Jacobi(Vec<f64>),
    LowRank(Box<LowRank>),
}

impl std::fmt::Debug for Preconditioner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Jacobi(d) => write!(f, "Jacobi({})", d.len()),
            Self::LowRank(l) => write!(f, "LowRank({}x{})", l.z.nrows(), l.z.ncols()),
        }
    }
}

impl Preconditioner {
    pub fn apply(&self, r: &[f64], out: &mut [f64]) {
        match self {
            Self::Jacobi(inv) => {
                for i in 0..r.len() {
                    out[i] = r[i] * inv[i];
                }
            }
            Self::LowRank(l) => {
                let y = l.p.solve(&DVector::from_column_slice(r));
                let t = &l.jacobian * &y;
                let s = l.c.solve(&t);
                let corr = &l.z * s;
                for i in 0..r.len() {
                    out[i] = y[(i, 0)] - corr[(i, 0)];
                }
            }
        }
    }
}

/// Inputs shared by both elastic-net GN updates.
#[derive(Debug, Clone, Copy)]
pub struct GnInputs<'a> {
    pub jacobian: &'a DMatrix<f64>,
    /// `U^δ - F(σ^k)`
    pub residual: &'a DVector<f64>,
    pub difference: &'a DifferenceOperator,
    pub sigma: &'a [f64],
    pub sigma_ref: &'a [f64],
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub cg_tol: f64,
    pub cg_max: usize,
    /// Built once per outer iteration; `None` builds the default per solve.
    pub preconditioner: Option<&'a Preconditioner>,
}

impl GnInputs<'_> {
    pub fn operator(&self) -> GnOperator<'_> {
        GnOperator {
            jacobian: self.jacobian,
            difference: self.difference,
            weights: None,
            penalty_scale: self.alpha * self.beta,
            mu: self.mu,
        }
    }

    /// `Jᵀr - αβRᵀR(σ - σ_ref) - μ g`
    pub fn rhs(&self, g: &[f64]) -> Vec<f64> {
        let mut rhs: Vec<f64> = self.jacobian.tr_mul(self.residual).iter().copied().collect();
        let s = self.alpha * self.beta;
        if s != 0.0 {
            let diff: Vec<f64> = self.sigma.iter().zip(self.sigma_ref).map(|(a, b)| a - b).collect();
            self.difference.weighted_normal_add(None, &diff, -s, &mut rhs);
        }
        for (r, gi) in rhs.iter_mut().zip(g) {
            *r -= self.mu * gi;
        }
        rhs
    }

    fn check(&self, what: &'static str, len: usize, expected: usize) -> Result<()> {
        if len != expected {
            return Err(Error::Dimension { what, expected, got: len });
        }
        Ok(())
    }

    fn solve(&self, g: &[f64], warm: &mut [f64]) -> Result<CgStats> {
        let n = self.jacobian.ncols();
        self.check("jacobian rows", self.residual.len(), self.jacobian.nrows())?;
        self.check("sigma", self.sigma.len(), n)?;
        self.check("sigma_ref", self.sigma_ref.len(), n)?;
        self.check("difference operator columns", self.difference.cols(), n)?;
        self.check("warm start", warm.len(), n)?;
        let op = self.operator();
        let rhs = self.rhs(g);
        match self.preconditioner {
            Some(pre) => op.solve_with(pre, &rhs, warm, self.cg_tol, self.cg_max),
            None => op.solve(&rhs, warm, self.cg_tol, self.cg_max),
        }
    }
}

/// Transform-domain GN step: right-hand side term `μ(σ + Φᵀ(b - d))`.
/// `delta` carries the warm start in and the step out.
pub fn gn_update_transform(
    inputs: &GnInputs<'_>,
    phi: &HaarTransform,
    d: &[f64],
    b: &[f64],
    delta: &mut [f64],
) -> Result<CgStats> {
    let bd: Vec<f64> = b.iter().zip(d).map(|(b, d)| b - d).collect();
    let back = phi.inverse(&bd)?;
    let g: Vec<f64> = inputs.sigma.iter().zip(&back).map(|(s, v)| s + v).collect();
    inputs.solve(&g, delta)
}

/// Space-domain GN step: right-hand side term `μ(σ - σ0 + b - d)`.
pub fn gn_update_space(
    inputs: &GnInputs<'_>,
    sigma0: &[f64],
    d: &[f64],
    b: &[f64],
    delta: &mut [f64],
) -> Result<CgStats> {
    let n = inputs.sigma.len();
    for (what, len) in [("sigma0", sigma0.len()), ("d", d.len()), ("b_d", b.len())] {
        inputs.check(what, len, n)?;
    }
    let g: Vec<f64> = (0..n).map(|i| inputs.sigma[i] - sigma0[i] + b[i] - d[i]).collect();
    inputs.solve(&g, delta)
}
