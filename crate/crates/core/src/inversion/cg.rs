use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Diagonal (Jacobi) preconditioner as a closure.
pub fn jacobi(diagonal: &[f64]) -> impl Fn(&[f64], &mut [f64]) {
    let inv: Vec<f64> = diagonal.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    move |r, z| {
        for i in 0..r.len() {
            z[i] = r[i] * inv[i];
        }
    }
}

/// Preconditioned conjugate gradients for an SPD operator.
///
/// Starts from `x` (warm start) and overwrites it with the solution. Stops
/// when `‖b - A x‖ ≤ tol ‖b‖`; running out of iterations is an error.
pub fn pcg<A, P>(apply: A, precond: P, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<CgStats>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats { iterations: 0, relative_residual: 0.0 });
    }

    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut rel = dot(&r, &r).sqrt() / b_norm;
    if rel <= tol {
        return Ok(CgStats { iterations: 0, relative_residual: rel });
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::CgNotConverged { iterations: it, relative_residual: rel, tolerance: tol });
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        if rel <= tol {
            return Ok(CgStats { iterations: it, relative_residual: rel });
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let ratio = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + ratio * p[i];
        }
    }
    Err(Error::CgNotConverged { iterations: max_iter, relative_residual: rel, tolerance: tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn solves_small_spd_system() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let b = [1.0, 2.0, 3.0];
        let mut x = vec![0.0; 3];
        let diag: Vec<f64> = (0..3).map(|i| a[(i, i)]).collect();
        let stats = pcg(
            |v, out| out.copy_from_slice((&a * DVector::from_column_slice(v)).as_slice()),
            jacobi(&diag),
            &b,
            &mut x,
            1e-12,
            50,
        )
        .unwrap();
        assert!(stats.iterations <= 3);
        let exact = a.cholesky().unwrap().solve(&DVector::from_column_slice(&b));
        for i in 0..3 {
            assert!((x[i] - exact[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn reports_non_convergence() {
        let n = 50;
        let apply = |v: &[f64], out: &mut [f64]| {
            for i in 0..v.len() {
                out[i] = (1.0 + i as f64 * i as f64) * v[i] + if i > 0 { v[i - 1] } else { 0.0 } + v.get(i + 1).copied().unwrap_or(0.0);
            }
        };
        let mut x = vec![0.0; n];
        let err = pcg(apply, jacobi(&vec![1.0; n]), &vec![1.0; n], &mut x, 1e-14, 2).unwrap_err();
        assert!(matches!(err, Error::CgNotConverged { iterations: 2, .. }));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mut x = vec![5.0; 4];
        let stats = pcg(|v, o| o.copy_from_slice(v), jacobi(&[1.0; 4]), &[0.0; 4], &mut x, 1e-8, 10).unwrap();
        assert_eq!(stats.iterations, 0);
        assert_eq!(x, vec![0.0; 4]);
    }
}
