//! Gauss rules from the symmetric tridiagonal Jacobi matrix.
//!
//! The eigenproblem is solved by implicit QL with Wilkinson shifts, carrying
//! only the first row of the eigenvector matrix since the weights need
//! nothing else. That keeps the cost quadratic in the node count.

use std::f64::consts::PI;

use super::recurrence::ScaledHermite;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;

/// Eigenvalues and squared first eigenvector components of the symmetric
/// tridiagonal matrix with diagonal `diag` and off-diagonal `off`, sorted
/// by eigenvalue.
fn tridiagonal_first_row(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&off[..n - 1]);
    let mut z = vec![0.0; n];
    z[0] = 1.0;

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(Error::NonConvergence { size: n });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    Ok((
        order.iter().map(|&i| d[i]).collect(),
        order.iter().map(|&i| z[i] * z[i]).collect(),
    ))
}

/// A quadrature rule on an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// The rule moved affinely from `[-1, 1]` to `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> GaussRule {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        GaussRule {
            nodes: self.nodes.iter().map(|t| mid + half * t).collect(),
            weights: self.weights.iter().map(|w| half * w).collect(),
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Gauss-Hermite rule for the weight `exp(-x^2)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    /// Golub-Welsch weights, `sqrt(pi)` times squared first eigenvector components.
    pub weights: Vec<f64>,
    /// Weights for integrands of the form `f g` with `f, g` Hermite
    /// expansions: `1 / sum_{k < Q} h_k(x_i)^2`, which equals
    /// `weights[i] * exp(x_i^2)` but keeps full relative accuracy at the
    /// outermost nodes.
    pub function_weights: Vec<f64>,
}

impl GaussHermite {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `int f` for `f = p exp(-x^2)` sampled at the nodes, e.g. products of
    /// two Hermite functions; exact when `deg p <= 2Q - 1`.
    pub fn integrate_function(&self, samples: &[f64]) -> f64 {
        samples
            .iter()
            .zip(&self.function_weights)
            .map(|(s, w)| s * w)
            .sum()
    }

    /// `int f` for `f = p exp(-x^2/2)`, e.g. a single Hermite expansion times
    /// a polynomial, through the substitution `x = sqrt(2) u`.
    pub fn integrate_half_gaussian(&self, f: impl Fn(f64) -> f64) -> f64 {
        let r2 = std::f64::consts::SQRT_2;
        r2 * self
            .nodes
            .iter()
            .zip(&self.function_weights)
            .map(|(&u, w)| w * f(r2 * u))
            .sum::<f64>()
    }
}

fn check_count(q: usize) -> Result<()> {
    if q == 0 {
        return Err(Error::invalid("node count", "must be at least 1"));
    }
    Ok(())
}

/// Gauss-Hermite nodes and weights with `q` points.
pub fn gauss_hermite(q: usize) -> Result<GaussHermite> {
    check_count(q)?;
    let diag = vec![0.0; q];
    let off: Vec<f64> = (1..q).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let (mut nodes, gw) = tridiagonal_first_row(&diag, &off)?;
    let weights: Vec<f64> = gw.iter().map(|w| w * PI.sqrt()).collect();

    // Newton on h_q using h_q' = sqrt(2q) h_{q-1} - x h_q.
    let root = (2.0 * q as f64).sqrt();
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let s = ScaledHermite::new(q, *x);
            let ratio = s.ratio(q, q - 1);
            let step = ratio / (root - *x * ratio);
            if !step.is_finite() {
                break;
            }
            *x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }
    for i in 0..q / 2 {
        let a = 0.5 * (nodes[q - 1 - i] - nodes[i]);
        nodes[i] = -a;
        nodes[q - 1 - i] = a;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }

    let function_weights = nodes
        .iter()
        .map(|&x| (-ScaledHermite::new(q - 1, x).log_sum_squares(q - 1)).exp())
        .collect();
    Ok(GaussHermite {
        nodes,
        weights,
        function_weights,
    })
}

/// Zeros of the Hermite polynomial `H_m`, increasing.
pub fn hermite_zeros(m: usize) -> Result<Vec<f64>> {
    Ok(gauss_hermite(m)?.nodes)
}

/// Legendre polynomial `P_q(x)` and its derivative.
fn legendre_with_derivative(q: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if q == 0 {
        return (1.0, 0.0);
    }
    for k in 1..q {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let dp = q as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre rule on `[-1, 1]` with `q` points.
pub fn gauss_legendre(q: usize) -> Result<GaussRule> {
    check_count(q)?;
    let diag = vec![0.0; q];
    let off: Vec<f64> = (1..q)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let (mut nodes, gw) = tridiagonal_first_row(&diag, &off)?;
    let mut weights: Vec<f64> = gw.iter().map(|w| 2.0 * w).collect();
    if q > 1 {
        for (x, w) in nodes.iter_mut().zip(weights.iter_mut()) {
            for _ in 0..3 {
                let (p, dp) = legendre_with_derivative(q, *x);
                *x -= p / dp;
            }
            let (_, dp) = legendre_with_derivative(q, *x);
            *w = 2.0 / ((1.0 - *x * *x) * dp * dp);
        }
        for i in 0..q / 2 {
            let a = 0.5 * (nodes[q - 1 - i] - nodes[i]);
            let w = 0.5 * (weights[i] + weights[q - 1 - i]);
            nodes[i] = -a;
            nodes[q - 1 - i] = a;
            weights[i] = w;
            weights[q - 1 - i] = w;
        }
        if q % 2 == 1 {
            nodes[q / 2] = 0.0;
        }
    }
    Ok(GaussRule { nodes, weights })
}
