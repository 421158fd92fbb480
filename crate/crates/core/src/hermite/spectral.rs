//! Finite Hermite expansions `f = sum_xi c_xi h_xi`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::difference::binomial;
use super::grid::{GridFunction, TensorGrid};
use super::multi::MultiIndex;
use super::recurrence::{hermite_moments, hermite_values};
use crate::error::{Error, Result};

/// `lambda_k = 2k + n`.
pub fn eigenvalue(k: usize, dim: usize) -> f64 {
    (2 * k + dim) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFunction {
    dim: usize,
    max_degree: usize,
    coeffs: BTreeMap<MultiIndex, Complex64>,
}

#[derive(Serialize, Deserialize)]
struct CoeffRecord {
    xi: Vec<usize>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct SpectralRecord {
    dim: usize,
    max_degree: usize,
    coeffs: Vec<CoeffRecord>,
}

impl SpectralFunction {
    pub fn zero(dim: usize, max_degree: usize) -> Self {
        SpectralFunction {
            dim,
            max_degree,
            coeffs: BTreeMap::new(),
        }
    }

    /// The single basis function `h_xi`.
    pub fn basis(xi: MultiIndex) -> Self {
        let mut f = Self::zero(xi.dim(), xi.degree());
        f.coeffs.insert(xi, Complex64::new(1.0, 0.0));
        f
    }

    pub fn from_coeffs(
        dim: usize,
        max_degree: usize,
        coeffs: impl IntoIterator<Item = (MultiIndex, Complex64)>,
    ) -> Result<Self> {
        let mut f = Self::zero(dim, max_degree);
        for (xi, c) in coeffs {
            f.insert(xi, c)?;
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Largest `|xi|` carrying a nonzero coefficient.
    pub fn occupied_degree(&self) -> Option<usize> {
        self.coeffs
            .iter()
            .filter(|(_, c)| **c != Complex64::new(0.0, 0.0))
            .map(|(xi, _)| xi.degree())
            .max()
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, xi: &MultiIndex) -> Complex64 {
        self.coeffs.get(xi).copied().unwrap_or_default()
    }

    fn check_index(&self, xi: &MultiIndex) -> Result<()> {
        if xi.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: xi.dim(),
            });
        }
        if xi.degree() > self.max_degree {
            return Err(Error::DegreeOutOfRange {
                xi: xi.0.clone(),
                degree: xi.degree(),
                max_degree: self.max_degree,
            });
        }
        Ok(())
    }

    pub fn insert(&mut self, xi: MultiIndex, c: Complex64) -> Result<()> {
        self.check_index(&xi)?;
        if !c.re.is_finite() || !c.im.is_finite() {
            return Err(Error::NonFinite("coefficient"));
        }
        self.coeffs.insert(xi, c);
        Ok(())
    }

    /// Coefficient `l^2` norm, equal to the `L^2` norm by Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, a: Complex64) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c *= a;
        }
        out
    }

    /// `a self + b other`.
    pub fn combine(&self, a: Complex64, other: &SpectralFunction, b: Complex64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut out = Self::zero(self.dim, self.max_degree.max(other.max_degree));
        for (xi, c) in &self.coeffs {
            *out.coeffs.entry(xi.clone()).or_default() += a * c;
        }
        for (xi, c) in &other.coeffs {
            *out.coeffs.entry(xi.clone()).or_default() += b * c;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &SpectralFunction) -> Result<Self> {
        self.combine(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    /// Multiplies every coefficient of degree `k` by `factor(k)`.
    pub fn map_by_degree(&self, factor: impl Fn(usize) -> f64) -> Self {
        let mut out = Self::zero(self.dim, self.max_degree);
        for (xi, c) in &self.coeffs {
            let w = factor(xi.degree());
            if w != 0.0 {
                out.coeffs.insert(xi.clone(), c * w);
            }
        }
        out
    }

    /// Multiplies every coefficient of degree `k` by the complex `factor(k)`.
    pub fn map_by_degree_complex(&self, factor: impl Fn(usize) -> Complex64) -> Self {
        let mut out = Self::zero(self.dim, self.max_degree);
        for (xi, c) in &self.coeffs {
            let w = factor(xi.degree());
            if w != Complex64::new(0.0, 0.0) {
                out.coeffs.insert(xi.clone(), c * w);
            }
        }
        out
    }

    /// `P_k f`.
    pub fn projector_part(&self, k: usize) -> Self {
        let mut out = Self::zero(self.dim, self.max_degree);
        out.coeffs = self
            .coeffs
            .iter()
            .filter(|(xi, _)| xi.degree() == k)
            .map(|(xi, c)| (xi.clone(), *c))
            .collect();
        out
    }

    /// `L f = sum (2|xi| + n) c_xi h_xi`.
    pub fn hermite_operator(&self) -> Self {
        let n = self.dim;
        self.map_by_degree(|k| eigenvalue(k, n))
    }

    /// `A^alpha f` with the creation operators `A_i = -d/dx_i + x_i`, using
    /// `A_i h_xi = sqrt(2 xi_i + 2) h_{xi + e_i}`.
    pub fn apply_creation(&self, alpha: &MultiIndex) -> Result<Self> {
        if alpha.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: alpha.dim(),
            });
        }
        let mut out = Self::zero(self.dim, self.max_degree + alpha.degree());
        for (xi, c) in &self.coeffs {
            let factor: f64 = xi
                .0
                .iter()
                .zip(&alpha.0)
                .map(|(&x, &a)| (0..a).map(|r| (2.0 * (x + r) as f64 + 2.0).sqrt()).product::<f64>())
                .product();
            out.coeffs.insert(xi.add(alpha), c * factor);
        }
        Ok(out)
    }

    fn ladder(&self, axis: usize, sign: f64) -> Result<Self> {
        if axis >= self.dim {
            return Err(Error::invalid("axis", format!("{axis} out of range for dimension {}", self.dim)));
        }
        let mut out = Self::zero(self.dim, self.max_degree + 1);
        for (xi, c) in &self.coeffs {
            let k = xi.0[axis] as f64;
            if xi.0[axis] > 0 {
                let mut down = xi.clone();
                down.0[axis] -= 1;
                *out.coeffs.entry(down).or_default() += c * (k / 2.0).sqrt();
            }
            let mut up = xi.clone();
            up.0[axis] += 1;
            *out.coeffs.entry(up).or_default() += c * (sign * ((k + 1.0) / 2.0).sqrt());
        }
        Ok(out)
    }

    /// `d f / d x_axis` through `h_k' = sqrt(k/2) h_{k-1} - sqrt((k+1)/2) h_{k+1}`.
    pub fn derivative(&self, axis: usize) -> Result<Self> {
        self.ladder(axis, -1.0)
    }

    /// `x_axis f` through `t h_k = sqrt(k/2) h_{k-1} + sqrt((k+1)/2) h_{k+1}`.
    pub fn mul_coordinate(&self, axis: usize) -> Result<Self> {
        self.ladder(axis, 1.0)
    }

    /// `partial^gamma f`.
    pub fn partial(&self, gamma: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        for (axis, &g) in gamma.iter().enumerate() {
            for _ in 0..g {
                out = out.derivative(axis)?;
            }
        }
        Ok(out)
    }

    /// `(-Delta + |x|^2) f` assembled from the ladder identities, with no
    /// use of the eigenvalues.
    pub fn hermite_operator_by_ladders(&self) -> Result<Self> {
        let mut out = Self::zero(self.dim, self.max_degree + 2);
        for axis in 0..self.dim {
            let second = self.derivative(axis)?.derivative(axis)?;
            let square = self.mul_coordinate(axis)?.mul_coordinate(axis)?;
            out = out
                .combine(Complex64::new(1.0, 0.0), &second, Complex64::new(-1.0, 0.0))?
                .combine(Complex64::new(1.0, 0.0), &square, Complex64::new(1.0, 0.0))?;
        }
        Ok(out)
    }

    /// `int (x - center)^gamma f(x) dx`, exact through Hermite moments.
    pub fn moment(&self, gamma: &[usize], center: &[f64]) -> Result<Complex64> {
        if gamma.len() != self.dim || center.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: gamma.len().min(center.len()),
            });
        }
        let b_max = gamma.iter().copied().max().unwrap_or(0);
        let m = hermite_moments(self.max_degree, b_max);
        // shifted[i][k] = int (y - c_i)^{gamma_i} h_k(y) dy
        let shifted: Vec<Vec<f64>> = (0..self.dim)
            .map(|i| {
                let g = gamma[i];
                (0..=self.max_degree)
                    .map(|k| {
                        (0..=g)
                            .map(|b| binomial(g, b) * (-center[i]).powi((g - b) as i32) * m[b][k])
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Ok(self
            .coeffs
            .iter()
            .map(|(xi, c)| {
                let w: f64 = xi.0.iter().enumerate().map(|(i, &k)| shifted[i][k]).product();
                c * w
            })
            .sum())
    }

    /// `int f`.
    pub fn integral(&self) -> Complex64 {
        let zeros = vec![0; self.dim];
        let center = vec![0.0; self.dim];
        self.moment(&zeros, &center).expect("dimensions agree")
    }

    /// Drops coefficients with modulus at most `threshold`; returns how many.
    pub fn prune(&mut self, threshold: f64) -> usize {
        let before = self.coeffs.len();
        self.coeffs.retain(|_, c| c.norm() > threshold);
        before - self.coeffs.len()
    }

    fn terms(&self) -> Vec<(&[usize], Complex64)> {
        self.coeffs.iter().map(|(xi, c)| (xi.0.as_slice(), *c)).collect()
    }

    /// `f(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<Complex64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("evaluation point"));
        }
        let tables: Vec<Vec<f64>> = x.iter().map(|&t| hermite_values(self.max_degree, t)).collect();
        Ok(sum_terms(&self.terms(), |axis, k| tables[axis][k]))
    }

    /// `(P_k f)(x)` for every `k <= max_degree`.
    pub fn eval_by_degree(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let tables: Vec<Vec<f64>> = x.iter().map(|&t| hermite_values(self.max_degree, t)).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); self.max_degree + 1];
        for (xi, c) in &self.coeffs {
            let w: f64 = xi.0.iter().enumerate().map(|(i, &k)| tables[i][k]).product();
            out[xi.degree()] += c * w;
        }
        Ok(out)
    }

    /// Values on every point of a tensor grid.
    pub fn eval_grid(&self, grid: &TensorGrid) -> Result<GridFunction> {
        let samples = self.eval_tensor(grid.axes())?;
        GridFunction::new(grid.clone(), samples)
    }

    /// Values on the tensor product of `axes` in row-major order.
    pub fn eval_tensor(&self, axes: &[Vec<f64>]) -> Result<Vec<Complex64>> {
        if axes.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: axes.len(),
            });
        }
        let tables: Vec<Vec<Vec<f64>>> = axes
            .iter()
            .map(|axis| axis.iter().map(|&t| hermite_values(self.max_degree, t)).collect())
            .collect();
        let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
        let total: usize = shape.iter().product();
        let terms = self.terms();
        Ok((0..total)
            .into_par_iter()
            .map(|flat| {
                let idx = unflatten(flat, &shape);
                sum_terms(&terms, |axis, k| tables[axis][idx[axis]][k])
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let record = SpectralRecord {
            dim: self.dim,
            max_degree: self.max_degree,
            coeffs: self
                .coeffs
                .iter()
                .map(|(xi, c)| CoeffRecord {
                    xi: xi.0.clone(),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&record).map_err(|source| Error::Json {
            context: "spectral function".into(),
            source,
        })
    }

    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        let record: SpectralRecord = serde_json::from_str(text).map_err(|source| Error::Json {
            context: context.to_string(),
            source,
        })?;
        if record.dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        let mut f = Self::zero(record.dim, record.max_degree);
        for c in record.coeffs {
            f.insert(MultiIndex(c.xi), Complex64::new(c.re, c.im))?;
        }
        Ok(f)
    }
}

pub(crate) fn unflatten(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for i in (0..shape.len()).rev() {
        idx[i] = flat % shape[i];
        flat /= shape[i];
    }
    idx
}

fn sum_terms(terms: &[(&[usize], Complex64)], table: impl Fn(usize, usize) -> f64) -> Complex64 {
    terms
        .iter()
        .map(|(xi, c)| {
            let w: f64 = xi.iter().enumerate().map(|(i, &k)| table(i, k)).product();
            c * w
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{eval_hermite_1d, gauss_hermite};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    fn random_function(dim: usize, k: usize, seed: u64) -> SpectralFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SpectralFunction::from_coeffs(
            dim,
            k,
            MultiIndex::up_to_degree(dim, k)
                .into_iter()
                .map(|xi| (xi, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))),
        )
        .unwrap()
    }

    #[test]
    fn creation_on_ground_state() {
        let f = SpectralFunction::basis(MultiIndex::zero(1));
        let g = f.apply_creation(&MultiIndex::new(vec![1])).unwrap();
        assert_relative_eq!(g.coeff(&MultiIndex::new(vec![1])).re, 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(g.max_degree(), 1);
        let id = f.apply_creation(&MultiIndex::zero(1)).unwrap();
        assert_eq!(id, f);
    }

    #[test]
    fn creation_matches_minus_derivative_plus_x() {
        let f = random_function(2, 6, 3);
        for axis in 0..2 {
            let a = f.apply_creation(&MultiIndex::axis(2, axis, 1)).unwrap();
            let b = f
                .mul_coordinate(axis)
                .unwrap()
                .combine(one(), &f.derivative(axis).unwrap(), -one())
                .unwrap();
            assert!(a.sub(&b).unwrap().l2_norm() < 1e-13);
        }
    }

    #[test]
    fn creation_power_factor() {
        // A^3 h_2 = sqrt(6 * 8 * 10) h_5
        let f = SpectralFunction::basis(MultiIndex::new(vec![2]));
        let g = f.apply_creation(&MultiIndex::new(vec![3])).unwrap();
        assert_relative_eq!(g.coeff(&MultiIndex::new(vec![5])).re, 480f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn eigenfunction_identity_pointwise() {
        for xi in MultiIndex::up_to_degree(2, 5) {
            let f = SpectralFunction::basis(xi.clone());
            let lf = f.hermite_operator_by_ladders().unwrap();
            let lambda = eigenvalue(xi.degree(), 2);
            for x in [[0.1, -0.3], [1.7, 2.2], [-3.0, 0.5]] {
                let lhs = lf.eval(&x).unwrap();
                let rhs = f.eval(&x).unwrap() * lambda;
                assert!((lhs - rhs).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn derivative_against_pointwise_ladder() {
        let f = SpectralFunction::basis(MultiIndex::new(vec![1]));
        let d = f.derivative(0).unwrap();
        let h = eval_hermite_1d(2, 0.7).unwrap();
        assert_relative_eq!(d.eval(&[0.7]).unwrap().re, (2f64.sqrt() * h[0] - 2.0 * h[2]) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn integral_and_moments_against_quadrature() {
        let f = random_function(1, 15, 7);
        let g = gauss_hermite(40).unwrap();
        let center = 0.4;
        for gamma in 0..4 {
            let moment = |x: f64| f.eval(&[x]).unwrap() * (x - center).powi(gamma);
            let q = Complex64::new(
                g.integrate_half_gaussian(|x| moment(x).re),
                g.integrate_half_gaussian(|x| moment(x).im),
            );
            let exact = f.moment(&[gamma as usize], &[center]).unwrap();
            assert!((q - exact).norm() < 1e-10, "gamma {gamma}: {q} vs {exact}");
        }
        let h0 = SpectralFunction::basis(MultiIndex::zero(1));
        assert_relative_eq!(h0.integral().re, 2f64.sqrt() * PI.powf(0.25), epsilon = 1e-14);
    }

    #[test]
    fn tensor_evaluation_agrees_with_pointwise() {
        let f = random_function(2, 8, 11);
        let grid = TensorGrid::new(vec![vec![-1.0, 0.2, 2.5], vec![-0.5, 0.0, 0.5, 3.0]]).unwrap();
        let g = f.eval_grid(&grid).unwrap();
        for (flat, z) in g.samples.iter().enumerate() {
            let p = f.eval(&grid.point(flat)).unwrap();
            assert!((z - p).norm() < 1e-13);
        }
        let parts = f.eval_by_degree(&[0.3, -1.2]).unwrap();
        let total: Complex64 = parts.iter().sum();
        assert!((total - f.eval(&[0.3, -1.2]).unwrap()).norm() < 1e-13);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let f = random_function(2, 3, 5);
        let back = SpectralFunction::from_json(&f.to_json().unwrap(), "memory").unwrap();
        assert_eq!(back, f);
        let bad = r#"{"dim":1,"max_degree":2,"coeffs":[{"xi":[3],"re":1.0,"im":0.0}]}"#;
        assert!(matches!(SpectralFunction::from_json(bad, "x"), Err(Error::DegreeOutOfRange { .. })));
        let bad = r#"{"dim":2,"max_degree":2,"coeffs":[{"xi":[1],"re":1.0,"im":0.0}]}"#;
        assert!(matches!(SpectralFunction::from_json(bad, "x"), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn prune_small_coefficients() {
        let mut f = SpectralFunction::zero(1, 3);
        f.insert(MultiIndex::new(vec![0]), Complex64::new(1e-17, 0.0)).unwrap();
        f.insert(MultiIndex::new(vec![1]), one()).unwrap();
        assert_eq!(f.prune(1e-15), 1);
        assert_eq!(f.len(), 1);
    }
}
