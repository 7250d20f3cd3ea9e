//! Algorithm parameters of the phantom studies.

use super::phantom::PhantomId;
use super::run::Method;
use crate::inversion::InversionConfig;

/// Noise-free schedule per phantom: `α0`, `q_α` with `β = 0.1`, `μ = 1e-10`.
pub fn noise_free(phantom: PhantomId) -> InversionConfig {
    let (alpha0, q_alpha) = match phantom {
        PhantomId::A => (1e-6, 0.6),
        PhantomId::B => (1e-6, 0.8),
        PhantomId::C => (1e-7, 0.5),
    };
    InversionConfig { alpha0, q_alpha, beta: 0.1, mu: 1e-10, ..Default::default() }
}

/// Noisy schedule per algorithm and noise level (0.1 % or 0.3 %; other
/// levels use the nearer one). Methods other than Algorithm 2 share the
/// Algorithm 1 row.
pub fn noisy(method: Method, epsilon: f64) -> InversionConfig {
    let low = epsilon < 0.002;
    let (alpha0, q_alpha, mu) = match (method, low) {
        (Method::Alg2, true) => (1e-5, 0.6, 1e-6),
        (Method::Alg2, false) => (1e-3, 0.6, 1e-4),
        (_, true) => (1e-4, 0.6, 1e-6),
        (_, false) => (1e-3, 0.6, 1e-5),
    };
    InversionConfig { alpha0, q_alpha, beta: 0.1, mu, ..Default::default() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_are_valid_configs() {
        for p in PhantomId::ALL {
            noise_free(p).validate().unwrap();
            for m in Method::ALL {
                for eps in [0.001, 0.003] {
                    noisy(m, eps).validate().unwrap();
                }
            }
        }
        assert_eq!(noise_free(PhantomId::C).alpha0, 1e-7);
        assert_eq!(noisy(Method::Alg2, 0.003).mu, 1e-4);
        assert_eq!(noisy(Method::Tv, 0.001), noisy(Method::Alg1, 0.001));
    }
}
