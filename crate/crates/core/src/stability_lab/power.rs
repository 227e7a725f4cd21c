use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerOptions {
    /// Relative change between successive estimates that counts as converged.
    pub tol: f64,
    pub max_iter: usize,
    /// Seed of the starting vector.
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub value: f64,
    pub iterations: usize,
}

/// Norm of an operator `T` that is self-adjoint for the inner product `inner`
/// (or of `T` given `T*T`). Iterates `x ← T x / ‖T x‖` and estimates
/// `‖T‖ ≈ ‖T x‖ / ‖x‖`, the square root of the Rayleigh quotient of `T*T`,
/// which is insensitive to eigenvalues of equal magnitude and opposite sign.
pub fn operator_norm(
    dim: usize,
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    inner: impl Fn(&[f64], &[f64]) -> f64,
    opts: &PowerOptions,
) -> Result<PowerEstimate> {
    if dim == 0 {
        return Ok(PowerEstimate {
            value: 0.0,
            iterations: 0,
        });
    }
    let mut rng = SeededRng::new(opts.seed);
    let mut x = rng.uniform_vec(dim, -1.0, 1.0);
    normalize(&mut x, &inner);
    let mut last = f64::NAN;
    for it in 1..=opts.max_iter {
        let mut y = apply(&x);
        let est = inner(&y, &y).sqrt();
        if est == 0.0 {
            return Ok(PowerEstimate {
                value: 0.0,
                iterations: it,
            });
        }
        if (est - last).abs() <= opts.tol * est {
            return Ok(PowerEstimate {
                value: est,
                iterations: it,
            });
        }
        last = est;
        y.iter_mut().for_each(|v| *v /= est);
        x = y;
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        last,
    })
}

fn normalize(x: &mut [f64], inner: &impl Fn(&[f64], &[f64]) -> f64) {
    let n = inner(x, x).sqrt();
    x.iter_mut().for_each(|v| *v /= n);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability_lab::sparse::dot;

    #[test]
    fn diagonal_operator() {
        let d = [1.0, -3.0, 2.0, 0.5];
        let est = operator_norm(4, |x| x.iter().zip(&d).map(|(a, b)| a * b).collect(), dot, &PowerOptions::default())
            .unwrap();
        assert!((est.value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn opposite_sign_pair() {
        let d = [2.0, -2.0, 1.0];
        let est = operator_norm(3, |x| x.iter().zip(&d).map(|(a, b)| a * b).collect(), dot, &PowerOptions::default())
            .unwrap();
        assert!((est.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn zero_operator() {
        let est = operator_norm(3, |x| vec![0.0; x.len()], dot, &PowerOptions::default()).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn cap_is_reported() {
        let d = [1.0, 0.999_999];
        let opts = PowerOptions {
            tol: 1e-16,
            max_iter: 3,
            ..Default::default()
        };
        let err = operator_norm(2, |x| x.iter().zip(&d).map(|(a, b)| a * b).collect(), dot, &opts);
        assert!(matches!(err, Err(Error::NoConvergence { iterations: 3, .. })));
    }
}
