use serde::{Deserialize, Serialize};

use super::recurrence::{hermite_derivative_table, hermite_values, ScaledHermite};
use crate::error::{Error, Result};

/// Decay constant `vartheta` of the Gaussian cut-off and the scale constant
/// `epsilon` used in `e_{epsilon 4^j}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub vartheta: f64,
    pub epsilon: f64,
}

impl Default for Constants {
    /// `vartheta = 1/4`; `epsilon = 4 (1 + 4/40)^2` for the default tiling constant.
    fn default() -> Self {
        Constants {
            vartheta: 0.25,
            epsilon: 4.0 * (1.0f64 + 0.1).powi(2),
        }
    }
}

impl Constants {
    pub fn new(vartheta: f64, epsilon: f64) -> Result<Self> {
        if !(vartheta > 0.0) || !vartheta.is_finite() {
            return Err(Error::invalid("vartheta", "must be positive"));
        }
        if !(epsilon > 4.0) || !epsilon.is_finite() {
            return Err(Error::invalid("epsilon", "must exceed 4"));
        }
        Ok(Constants { vartheta, epsilon })
    }

    /// `epsilon = 4 (1 + 4 delta_star)^2`.
    pub fn for_delta_star(delta_star: f64) -> Self {
        Constants {
            vartheta: 0.25,
            epsilon: 4.0 * (1.0 + 4.0 * delta_star).powi(2),
        }
    }
}

fn same_dim<T, U>(x: &[T], y: &[U]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(())
}

/// `P_k(x, y)` for every `k <= k_max`.
///
/// Each axis contributes the sequence `h_m(x_i) h_m(y_i)`; the kernel of
/// total degree `k` is the coefficient of degree `k` in the product of these
/// generating sequences.
pub fn projector_kernels(k_max: usize, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    projector_kernels_dx(k_max, &vec![0; x.len()], x, y)
}

/// `d^alpha_x P_k(x, y)` for every `k <= k_max`, from the ladder derivative tables.
pub fn projector_kernels_dx(k_max: usize, alpha: &[usize], x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    same_dim(x, y)?;
    same_dim(x, alpha)?;
    if x.iter().chain(y).any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("kernel argument"));
    }
    let axes: Vec<Vec<f64>> = x
        .iter()
        .zip(y)
        .zip(alpha)
        .map(|((&xi, &yi), &a)| {
            let hx = if a == 0 {
                hermite_values(k_max, xi)
            } else {
                hermite_derivative_table(k_max, a, xi).swap_remove(a)
            };
            let hy = hermite_values(k_max, yi);
            hx.iter().zip(&hy).map(|(a, b)| a * b).collect()
        })
        .collect();
    Ok(degree_convolution(&axes, k_max))
}

/// Coefficients of total degree `0..=k_max` in the product of per-axis
/// sequences indexed by degree.
pub fn degree_convolution(axes: &[Vec<f64>], k_max: usize) -> Vec<f64> {
    let mut acc = vec![0.0; k_max + 1];
    acc[0] = 1.0;
    for (i, axis) in axes.iter().enumerate() {
        if i == 0 {
            acc.iter_mut().zip(axis).for_each(|(a, &v)| *a = v);
            continue;
        }
        let mut next = vec![0.0; k_max + 1];
        for (k, slot) in next.iter_mut().enumerate() {
            *slot = (0..=k).map(|m| acc[k - m] * axis[m]).sum();
        }
        acc = next;
    }
    acc
}

/// `P_k(x, y) = sum_{|xi| = k} h_xi(x) h_xi(y)`.
pub fn projector_kernel(k: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(projector_kernels(k, x, y)?[k])
}

/// `Q_N(x, y) = sum_{k <= N} P_k(x, y)`.
pub fn qq_kernel(n_max: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(projector_kernels(n_max, x, y)?.iter().sum())
}

/// `ln tau(N, t) = -ln sum_{k <= N} h_k(t)^2`, finite far into the tail.
pub fn log_christoffel(n_max: usize, t: f64) -> f64 {
    -ScaledHermite::new(n_max, t).log_sum_squares(n_max)
}

/// One-dimensional Christoffel function `tau(N, t) = 1 / sum_{k <= N} h_k(t)^2`.
pub fn christoffel(n_max: usize, t: f64) -> f64 {
    log_christoffel(n_max, t).exp()
}

/// `e_N(x)`: 1 inside the ball of radius `sqrt(N)`, `exp(-vartheta |x|^2)` outside.
pub fn e_function(scale: f64, x: &[f64], constants: &Constants) -> f64 {
    let r2: f64 = x.iter().map(|t| t * t).sum();
    if r2 < scale {
        1.0
    } else {
        (-constants.vartheta * r2).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{eval_hermite_1d, eval_hermite_nd, MultiIndex};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn projector_examples() {
        assert_relative_eq!(projector_kernel(0, &[0.0], &[0.0]).unwrap(), 1.0 / PI.sqrt(), epsilon = 1e-15);
        let a = eval_hermite_1d(3, 0.5).unwrap()[3];
        let b = eval_hermite_1d(3, -0.2).unwrap()[3];
        assert_relative_eq!(projector_kernel(3, &[0.5], &[-0.2]).unwrap(), a * b, epsilon = 1e-16);
        assert_eq!(projector_kernel(1, &[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn kernel_derivatives_match_differences() {
        let x = [0.4, -0.9];
        let y = [1.1, 0.3];
        let h = 1e-5;
        for alpha in [[1, 0], [0, 1], [1, 1]] {
            let d = projector_kernels_dx(6, &alpha, &x, &y).unwrap();
            let shifted = |s: f64, t: f64| {
                projector_kernels(6, &[x[0] + s * alpha[0] as f64, x[1] + t * alpha[1] as f64], &y).unwrap()
            };
            for k in 0..=6 {
                let fd = if alpha == [1, 1] {
                    (shifted(h, h)[k] - shifted(h, -h)[k] - shifted(-h, h)[k] + shifted(-h, -h)[k]) / (4.0 * h * h)
                } else {
                    (shifted(h, h)[k] - shifted(-h, -h)[k]) / (2.0 * h)
                };
                assert!((d[k] - fd).abs() < 1e-5, "{alpha:?} {k}: {} vs {fd}", d[k]);
            }
        }
    }

    #[test]
    fn projector_matches_multi_index_sum() {
        let x = [0.3, -1.1, 0.8];
        let y = [1.4, 0.2, -0.5];
        for k in 0..6 {
            let direct: f64 = MultiIndex::of_degree(3, k)
                .iter()
                .map(|xi| eval_hermite_nd(xi, &x).unwrap() * eval_hermite_nd(xi, &y).unwrap())
                .sum();
            assert_relative_eq!(projector_kernel(k, &x, &y).unwrap(), direct, epsilon = 1e-14);
        }
    }

    #[test]
    fn christoffel_at_origin() {
        assert_relative_eq!(christoffel(0, 0.0), PI.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(christoffel(0, 0.0), 1.772454, epsilon = 1e-6);
    }

    #[test]
    fn e_function_examples() {
        let c = Constants::new(1.0, 4.84).unwrap();
        assert_eq!(e_function(4.0, &[0.0], &c), 1.0);
        assert_relative_eq!(e_function(4.0, &[3.0], &c), (-9.0f64).exp(), epsilon = 1e-18);
        assert!(Constants::new(0.0, 5.0).is_err());
        assert!(Constants::new(1.0, 4.0).is_err());
    }

    #[test]
    fn dimension_checks() {
        assert!(projector_kernel(1, &[0.0], &[0.0, 1.0]).is_err());
        assert!(projector_kernel(1, &[f64::NAN], &[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn projector_is_symmetric(x in -6.0..6.0f64, y in -6.0..6.0f64, z in -6.0..6.0f64, w in -6.0..6.0f64, k in 0usize..30) {
            let a = projector_kernel(k, &[x, z], &[y, w]).unwrap();
            let b = projector_kernel(k, &[y, w], &[x, z]).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn qq_diagonal_is_monotone(x in -10.0..10.0f64, n in 0usize..60) {
            let a = qq_kernel(n, &[x], &[x]).unwrap();
            let b = qq_kernel(n + 1, &[x], &[x]).unwrap();
            prop_assert!(b >= a);
            prop_assert!(a > 0.0);
        }
    }
}
