//! Pseudo-multipliers `T_sigma f(x) = sum_k sigma(x, lambda_k) P_k f(x)`,
//! symbol class and cancellation checkers, example symbols and the
//! linearization of nonlinearities.

pub mod expr;
mod linearize;
mod symbols;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{
    binomial, eigenvalue, gauss_hermite, gauss_legendre, hermite_values, GridFunction, MultiIndex,
    SpectralFunction, TensorGrid,
};

pub use linearize::{linearize_nonlinearity, LinearizedSymbol, Nonlinearity};
pub use symbols::{
    build_symbol, hermite_multiplier, DyadicSymbol, ExpressionSymbol, Multiplier, OscillatingSymbol,
    SeparableSymbol, SymbolDescriptor,
};

/// A symbol `sigma: R^n x N_0 -> C`. The second argument is a real number
/// so that both `sigma(x, k)` and `sigma(x, lambda_k)` can be sampled.
pub trait Symbol: Send + Sync {
    fn eval(&self, x: &[f64], xi: f64) -> Complex64;

    /// `sigma(x, xi)` for several `xi` at one `x`.
    fn eval_many(&self, x: &[f64], xis: &[f64]) -> Vec<Complex64> {
        xis.iter().map(|&xi| self.eval(x, xi)).collect()
    }

    /// Analytic `d^nu_x sigma(x, xi)`, if known.
    fn x_derivative(&self, _nu: &[usize], _x: &[f64], _xi: f64) -> Option<Complex64> {
        None
    }

    /// False for multipliers, which then act diagonally.
    fn depends_on_x(&self) -> bool {
        true
    }

    fn descriptor(&self) -> Option<SymbolDescriptor> {
        None
    }
}

/// `rho(x) = 1 / (1 + |x|)`.
pub fn rho(x: &[f64]) -> f64 {
    1.0 / (1.0 + x.iter().map(|t| t * t).sum::<f64>().sqrt())
}

/// Base step of the `x`-difference quotients of order `order` at `x`:
/// `(eps 4^order)^{1/(order+6)} (1 + |x|)`.
pub fn x_step(order: usize, x: &[f64]) -> f64 {
    // Balances the h^6 error left after two Richardson steps against roundoff at h/4.
    let d = order as f64;
    let base = (f64::EPSILON * 4f64.powf(d)).powf(1.0 / (d + 6.0));
    base * (1.0 + x.iter().map(|t| t * t).sum::<f64>().sqrt())
}

/// Tensor central-difference stencil for `d^nu` with step `h`: pairs of
/// offsets (in units of `h`, per axis) and weights.
fn stencil(nu: &[usize]) -> Vec<(Vec<f64>, f64)> {
    let mut out = vec![(Vec::new(), 1.0)];
    for &order in nu {
        let half = order as f64 / 2.0;
        let mut next = Vec::with_capacity(out.len() * (order + 1));
        for (offs, w) in &out {
            for i in 0..=order {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                let mut o = offs.clone();
                o.push(half - i as f64);
                next.push((o, w * sign * binomial(order, i)));
            }
        }
        out = next;
    }
    out
}

/// `d^nu_x sigma(x, xi)` for every `xi` in `xis`: analytic when the symbol
/// provides it, otherwise central differences with two Richardson steps.
pub fn x_partials(sym: &dyn Symbol, nu: &[usize], x: &[f64], xis: &[f64]) -> Vec<Complex64> {
    let order: usize = nu.iter().sum();
    if order == 0 {
        return sym.eval_many(x, xis);
    }
    if let Some(first) = sym.x_derivative(nu, x, xis.first().copied().unwrap_or(0.0)) {
        let mut out = vec![first];
        out.extend(xis.iter().skip(1).map(|&xi| sym.x_derivative(nu, x, xi).expect("analytic derivative")));
        return out;
    }
    let st = stencil(nu);
    let h0 = x_step(order, x);
    let level = |h: f64| -> Vec<Complex64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); xis.len()];
        for (offs, w) in &st {
            let y: Vec<f64> = x.iter().zip(offs).map(|(t, o)| t + o * h).collect();
            for (a, v) in acc.iter_mut().zip(sym.eval_many(&y, xis)) {
                *a += v * *w;
            }
        }
        let scale = h.powi(order as i32);
        acc.into_iter().map(|a| a / scale).collect()
    };
    let d: Vec<Vec<Complex64>> = (0..3).map(|i| level(h0 / f64::from(1 << i))).collect();
    (0..xis.len())
        .map(|i| {
            let t0 = (d[1][i] * 4.0 - d[0][i]) / 3.0;
            let t1 = (d[2][i] * 4.0 - d[1][i]) / 3.0;
            (t1 * 16.0 - t0) / 15.0
        })
        .collect()
}

fn check_dim(f: &SpectralFunction, grid: &TensorGrid) -> Result<()> {
    if grid.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: grid.dim(),
        });
    }
    Ok(())
}

/// `T_sigma f` for a symbol independent of `x`, exactly on the coefficients.
pub fn apply_multiplier(sym: &dyn Symbol, f: &SpectralFunction) -> Result<SpectralFunction> {
    if sym.depends_on_x() {
        return Err(Error::Precondition("symbol depends on x; use apply_pseudomultiplier".into()));
    }
    let n = f.dim();
    let origin = vec![0.0; n];
    let lambdas: Vec<f64> = (0..=f.max_degree()).map(|k| eigenvalue(k, n)).collect();
    let values = sym.eval_many(&origin, &lambdas);
    Ok(f.map_by_degree_complex(|k| values[k]))
}

/// `T_sigma f(x) = sum_k sigma(x, lambda_k) (P_k f)(x)` on every grid point.
pub fn apply_pseudomultiplier(sym: &dyn Symbol, f: &SpectralFunction, grid: &TensorGrid) -> Result<GridFunction> {
    check_dim(f, grid)?;
    if !sym.depends_on_x() {
        return apply_multiplier(sym, f)?.eval_grid(grid);
    }
    let n = f.dim();
    let k_max = f.max_degree();
    let lambdas: Vec<f64> = (0..=k_max).map(|k| eigenvalue(k, n)).collect();
    let coeffs: Vec<(&[usize], usize, Complex64)> = f.coeffs().map(|(xi, c)| (xi.0.as_slice(), xi.degree(), *c)).collect();
    let samples = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let x = grid.point(flat);
            let tables: Vec<Vec<f64>> = x.iter().map(|&t| hermite_values(k_max, t)).collect();
            let mut by_degree = vec![Complex64::new(0.0, 0.0); k_max + 1];
            for (xi, k, c) in &coeffs {
                let w: f64 = xi.iter().enumerate().map(|(i, &d)| tables[i][d]).product();
                by_degree[*k] += c * w;
            }
            let sigma = sym.eval_many(&x, &lambdas);
            by_degree.iter().zip(&sigma).map(|(p, s)| p * s).sum()
        })
        .collect();
    GridFunction::new(grid.clone(), samples)
}

/// Tensor grid of Gauss-Hermite nodes with `q` points per axis.
pub fn gauss_hermite_grid(dim: usize, q: usize) -> Result<TensorGrid> {
    let g = gauss_hermite(q)?;
    TensorGrid::new(vec![g.nodes; dim])
}

/// Points per axis for reprojecting `T_sigma f`, `f` of degree `k`, onto
/// degree `k_prime`: `4 (k + k')`, at least 8.
pub fn reprojection_points(k: usize, k_prime: usize) -> usize {
    (4 * (k + k_prime)).max(8)
}

/// Coefficients `<g, h_xi>` for `|xi| <= k_prime` with the residual
/// `||g - Pi g||_2 / ||g||_2`.
#[derive(Debug, Clone)]
pub struct Reprojection {
    pub function: SpectralFunction,
    pub residual: f64,
    /// Residual above the requested threshold.
    pub flagged: bool,
}

/// Projects samples on a Gauss-Hermite grid onto `V_{k_prime}`.
pub fn reproject(g: &GridFunction, k_prime: usize, threshold: f64) -> Result<Reprojection> {
    let dim = g.grid.dim();
    let q = g.grid.axis(0).len();
    let rule = gauss_hermite(q)?;
    for axis in g.grid.axes() {
        let matches = axis.len() == q && axis.iter().zip(&rule.nodes).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        if !matches {
            return Err(Error::Precondition("reprojection needs samples on a Gauss-Hermite tensor grid".into()));
        }
    }
    let tables: Vec<Vec<f64>> = rule.nodes.iter().map(|&t| hermite_values(k_prime, t)).collect();
    let weights: Vec<f64> = (0..g.grid.len())
        .map(|flat| g.grid.unflatten(flat).iter().map(|&i| rule.function_weights[i]).product())
        .collect();
    let xis = MultiIndex::up_to_degree(dim, k_prime);
    let coeffs: Vec<(MultiIndex, Complex64)> = xis
        .into_par_iter()
        .map(|xi| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (flat, v) in g.samples.iter().enumerate() {
                let idx = g.grid.unflatten(flat);
                let h: f64 = xi.0.iter().zip(&idx).map(|(&d, &i)| tables[i][d]).product();
                acc += v * (weights[flat] * h);
            }
            (xi, acc)
        })
        .collect();
    let function = SpectralFunction::from_coeffs(dim, k_prime, coeffs)?;
    let total: f64 = g.samples.iter().zip(&weights).map(|(v, w)| w * v.norm_sqr()).sum();
    let captured = function.l2_norm().powi(2);
    let residual = if total == 0.0 {
        0.0
    } else {
        ((total - captured).max(0.0) / total).sqrt()
    };
    Ok(Reprojection {
        function,
        residual,
        flagged: residual > threshold,
    })
}

/// Growth function `g(x, xi)` in the symbol class bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Growth {
    /// `g = 1`, the class without growth.
    None,
    /// `g = (1 + |x| / (1 + sqrt(xi)))^beta`.
    Power { beta: f64 },
}

impl Growth {
    pub fn eval(&self, x: &[f64], xi: f64) -> f64 {
        match *self {
            Growth::None => 1.0,
            Growth::Power { beta } => {
                let r = x.iter().map(|t| t * t).sum::<f64>().sqrt();
                (1.0 + r / (1.0 + xi.max(0.0).sqrt())).powf(beta)
            }
        }
    }

    /// `sup g(x, xi) e_{epsilon xi}(x)^{kappa}` over the samples, i.e. the
    /// constant in `g <~ e_{epsilon xi}^{-kappa}`.
    pub fn admissibility_constant(&self, kappa: f64, epsilon: f64, points: &[Vec<f64>], xis: &[f64]) -> f64 {
        let c = crate::hermite::Constants {
            vartheta: 0.25,
            epsilon,
        };
        points
            .iter()
            .flat_map(|x| xis.iter().map(move |&xi| (x, xi)))
            .map(|(x, xi)| self.eval(x, xi) * crate::hermite::e_function(epsilon * xi, x, &c).powf(kappa))
            .fold(0.0, f64::max)
    }
}

/// How the spectral differences are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DifferenceConvention {
    /// `Delta_xi sigma(x, xi) = sigma(x, xi + 1) - sigma(x, xi)`, `xi in N_0`.
    Integer,
    /// `Delta_k sigma(x, lambda_k) = sigma(x, lambda_{k+1}) - sigma(x, lambda_k)`.
    Eigenvalue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    pub m: f64,
    pub rho: f64,
    pub delta: f64,
    /// Highest spectral difference order.
    pub max_kappa: usize,
    /// Highest total `x`-derivative order.
    pub max_order: usize,
    pub growth: Growth,
    pub convention: DifferenceConvention,
}

/// Points and spectral arguments at which a class bound is sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolSample {
    pub points: Vec<Vec<f64>>,
    /// Largest base argument (`xi` for the integer convention, `k` with
    /// `xi = lambda_k` otherwise).
    pub xi_max: usize,
}

impl SymbolSample {
    /// `count` points along the diagonal direction up to radius `radius`,
    /// plus the origin.
    pub fn radial(dim: usize, count: usize, radius: f64, xi_max: usize) -> Self {
        let dir = 1.0 / (dim as f64).sqrt();
        let mut points = vec![vec![0.0; dim]];
        for i in 1..=count {
            let r = radius * i as f64 / count as f64;
            // Alternate signs per axis so off-diagonal directions appear too.
            points.push((0..dim).map(|a| if (i + a) % 3 == 0 { -r * dir } else { r * dir }).collect());
        }
        SymbolSample { points, xi_max }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub nu: Vec<usize>,
    pub kappa: usize,
    pub constant: f64,
    pub at_x: Vec<f64>,
    pub at_xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub entries: Vec<ClassEntry>,
}

impl ClassReport {
    pub fn max_constant(&self) -> f64 {
        self.entries.iter().map(|e| e.constant).fold(0.0, f64::max)
    }

    pub fn constant(&self, nu: &[usize], kappa: usize) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.nu == nu && e.kappa == kappa)
            .map(|e| e.constant)
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|e| e.constant.is_finite())
    }
}

/// `sup |d^nu_x Delta^kappa sigma(x, xi)| / (g(x, xi) (1 + sqrt xi)^{m - 2 rho kappa + delta |nu|})`
/// per `(nu, kappa)`; never fails, non-finite values are reported as such.
pub fn check_symbol_class(sym: &dyn Symbol, params: &ClassParams, sample: &SymbolSample) -> ClassReport {
    let dim = sample.points.first().map_or(1, Vec::len);
    let (step, base): (f64, Vec<f64>) = match params.convention {
        DifferenceConvention::Integer => (1.0, (0..=sample.xi_max).map(|k| k as f64).collect()),
        DifferenceConvention::Eigenvalue => (2.0, (0..=sample.xi_max).map(|k| eigenvalue(k, dim)).collect()),
    };
    let extended: Vec<f64> = (0..base.len() + params.max_kappa)
        .map(|i| base[0] + step * i as f64)
        .collect();
    let nus: Vec<MultiIndex> = MultiIndex::up_to_degree(dim, params.max_order);
    let mut entries = Vec::new();
    for nu in &nus {
        let per_point: Vec<Vec<Complex64>> = sample
            .points
            .par_iter()
            .map(|x| x_partials(sym, &nu.0, x, &extended))
            .collect();
        for kappa in 0..=params.max_kappa {
            let mut best = ClassEntry {
                nu: nu.0.clone(),
                kappa,
                constant: 0.0,
                at_x: sample.points[0].clone(),
                at_xi: base[0],
            };
            for (x, d) in sample.points.iter().zip(&per_point) {
                for (b, &xi) in base.iter().enumerate() {
                    let diff: Complex64 = (0..=kappa)
                        .map(|i| {
                            let sign = if (kappa - i) % 2 == 0 { 1.0 } else { -1.0 };
                            d[b + i] * (sign * binomial(kappa, i))
                        })
                        .sum();
                    let bound = params.growth.eval(x, xi)
                        * (1.0 + xi.sqrt()).powf(params.m - 2.0 * params.rho * kappa as f64 + params.delta * nu.degree() as f64);
                    let ratio = diff.norm() / bound;
                    if !(ratio <= best.constant) {
                        best.constant = ratio;
                        best.at_x = x.clone();
                        best.at_xi = xi;
                    }
                }
            }
            entries.push(best);
        }
    }
    ClassReport { entries }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancellationEntry {
    pub gamma: Vec<usize>,
    pub constant: f64,
    pub at_x: Vec<f64>,
    pub at_xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancellationReport {
    pub m: f64,
    pub max_order: usize,
    pub entries: Vec<CancellationEntry>,
}

impl CancellationReport {
    pub fn max_constant(&self) -> f64 {
        self.entries.iter().map(|e| e.constant).fold(0.0, f64::max)
    }

    pub fn constant(&self, gamma: &[usize]) -> Option<f64> {
        self.entries.iter().find(|e| e.gamma == gamma).map(|e| e.constant)
    }
}

/// Highest derivative order in the cancellation condition: `2 floor((n + M)/2) + 2`.
pub fn cancellation_order(dim: usize, big_m: usize) -> usize {
    2 * ((dim + big_m) / 2) + 2
}

/// `sup (avg_{B(x, rho(x))} |rho(y)^{|gamma|} d^gamma sigma(y, xi)|^2)^{1/2} / (1 + sqrt xi)^m`
/// per `gamma`, the ball average by a 12-point Gauss-Legendre product rule
/// on the enclosing cube restricted to the ball.
pub fn check_cancellation_class(
    sym: &dyn Symbol,
    m: f64,
    big_m: usize,
    points: &[Vec<f64>],
    xis: &[f64],
) -> Result<CancellationReport> {
    let dim = points.first().map_or(1, Vec::len);
    let order = cancellation_order(dim, big_m);
    let gl = gauss_legendre(12)?;
    let mut entries = Vec::new();
    for gamma in MultiIndex::up_to_degree(dim, order) {
        let g = gamma.degree() as i32;
        let per_point: Vec<(f64, usize)> = points
            .par_iter()
            .map(|x| {
                let r = rho(x);
                let mut acc = vec![0.0; xis.len()];
                let mut wsum = 0.0;
                for flat in 0..12usize.pow(dim as u32) {
                    let mut rest = flat;
                    let mut y = x.clone();
                    let mut w = 1.0;
                    let mut d2 = 0.0;
                    for a in (0..dim).rev() {
                        let i = rest % 12;
                        rest /= 12;
                        y[a] += r * gl.nodes[i];
                        w *= gl.weights[i];
                        d2 += (r * gl.nodes[i]).powi(2);
                    }
                    if d2 > r * r {
                        continue;
                    }
                    let ry = rho(&y).powi(g);
                    for (a, v) in acc.iter_mut().zip(x_partials(sym, &gamma.0, &y, xis)) {
                        *a += w * (ry * v.norm()).powi(2);
                    }
                    wsum += w;
                }
                let (best, at) = acc
                    .iter()
                    .enumerate()
                    .map(|(i, a)| ((a / wsum).sqrt() / (1.0 + xis[i].sqrt()).powf(m), i))
                    .fold((0.0, 0), |acc, v| if v.0 > acc.0 { v } else { acc });
                (best, at)
            })
            .collect();
        let (pi, &(constant, xi_i)) = per_point
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .expect("at least one point");
        entries.push(CancellationEntry {
            gamma: gamma.0.clone(),
            constant,
            at_x: points[pi].clone(),
            at_xi: xis[xi_i],
        });
    }
    Ok(CancellationReport {
        m,
        max_order: order,
        entries,
    })
}
