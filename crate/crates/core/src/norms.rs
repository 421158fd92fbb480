//! `L^p` quasi-norms, Hermite Besov and Triebel-Lizorkin norms, their
//! sequence counterparts, and a discrete maximal operator.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{CoefficientSequence, Frame};
use crate::hermite::{eigenvalue, GridFunction, SpectralFunction, TensorGrid};
use crate::lp::{apply_lp, AdmissibleSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// Besov.
    B,
    /// Triebel-Lizorkin.
    F,
}

/// `(family, alpha, p, q)`; `f64::INFINITY` stands for an infinite exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceParams {
    pub family: Family,
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
}

impl SpaceParams {
    pub fn new(family: Family, alpha: f64, p: f64, q: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::NonFinite("alpha"));
        }
        if !(p > 0.0) || !(q > 0.0) {
            return Err(Error::invalid("exponents", format!("need p, q > 0, got p = {p}, q = {q}")));
        }
        if family == Family::F && p.is_infinite() {
            return Err(Error::invalid("p", "Triebel-Lizorkin norms need p < infinity"));
        }
        Ok(SpaceParams { family, alpha, p, q })
    }

    pub fn besov(alpha: f64, p: f64, q: f64) -> Result<Self> {
        Self::new(Family::B, alpha, p, q)
    }

    pub fn triebel(alpha: f64, p: f64, q: f64) -> Result<Self> {
        Self::new(Family::F, alpha, p, q)
    }

    /// `n / min(1, p, q)` for F, `n / min(1, p)` for B.
    pub fn n_pq(&self, dim: usize) -> f64 {
        let m = match self.family {
            Family::F => 1f64.min(self.p).min(self.q),
            Family::B => 1f64.min(self.p),
        };
        dim as f64 / m
    }
}

/// `(sum |a_i|^q)^{1/q}`, or the maximum for `q = infinity`.
pub fn lq_sum(values: impl IntoIterator<Item = f64>, q: f64) -> f64 {
    if q.is_infinite() {
        values.into_iter().map(f64::abs).fold(0.0, f64::max)
    } else {
        values.into_iter().map(|v| v.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// Truncation box `[-X, X]^n` sampled with `points` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureBox {
    pub half_width: f64,
    pub points: usize,
}

impl QuadratureBox {
    /// Default rule for degree `k`: `X = 1.2 sqrt(2 lambda_k) + 2`, about
    /// `sqrt(lambda_k)` points per unit length (at least 65 in total).
    pub fn for_degree(k: usize, dim: usize) -> Self {
        Self::with_half_width(k, dim, Self::rule_half_width(k, dim))
    }

    /// The default rule, widened so that the Gaussian tail of `|f|^p`
    /// (decaying like `exp(-p (x - sqrt(lambda_k))^2 / 2)`) stays below 1e-12.
    pub fn for_exponent(k: usize, dim: usize, p: f64) -> Self {
        let tail = if p.is_finite() {
            eigenvalue(k, dim).sqrt() + (2.0 * 28.0 / p).sqrt()
        } else {
            0.0
        };
        Self::with_half_width(k, dim, Self::rule_half_width(k, dim).max(tail))
    }

    fn with_half_width(k: usize, dim: usize, half_width: f64) -> Self {
        let lambda = eigenvalue(k, dim);
        let points = ((2.0 * half_width * lambda.sqrt()).ceil() as usize + 1).max(65) | 1;
        QuadratureBox { half_width, points }
    }

    pub fn rule_half_width(k: usize, dim: usize) -> f64 {
        1.2 * (2.0 * eigenvalue(k, dim)).sqrt() + 2.0
    }

    pub fn grid(&self, dim: usize) -> Result<TensorGrid> {
        TensorGrid::uniform(dim, self.half_width, self.points)
    }

    fn warnings(&self, k: usize, dim: usize) -> Vec<String> {
        let rule = Self::rule_half_width(k, dim);
        if self.half_width >= rule {
            return Vec::new();
        }
        let turning = eigenvalue(k, dim).sqrt();
        let excess = (self.half_width - turning).max(0.0);
        vec![format!(
            "box half-width {} below the rule {rule:.3} for degree {k}; Gaussian tail bound exp(-(X - sqrt(lambda))^2) = {:.3e}",
            self.half_width,
            (-excess * excess).exp()
        )]
    }
}

/// `||g||_p` by the composite trapezoid rule, the grid maximum for `p = infinity`.
pub fn lp_norm_grid(g: &GridFunction, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::invalid("p", "must be positive"));
    }
    if p.is_infinite() {
        return Ok(g.max_abs());
    }
    let w = g.grid.trapezoid_weights();
    let s: f64 = g.samples.iter().zip(&w).map(|(z, w)| w * z.norm().powf(p)).sum();
    Ok(s.powf(1.0 / p))
}

/// A norm value with the truncation used and any warnings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub value: f64,
    #[serde(rename = "J_used")]
    pub levels_used: Option<usize>,
    #[serde(rename = "box")]
    pub quadrature_box: Option<QuadratureBox>,
    pub warnings: Vec<String>,
}

/// `||f||_p`: exact coefficient `l^2` norm for `p = 2`, otherwise the
/// trapezoid rule on `bx` (default [`QuadratureBox::for_exponent`]).
pub fn lp_norm(f: &SpectralFunction, p: f64, bx: Option<QuadratureBox>) -> Result<NormReport> {
    if !(p > 0.0) {
        return Err(Error::invalid("p", "must be positive"));
    }
    if p == 2.0 {
        return Ok(NormReport {
            value: f.l2_norm(),
            levels_used: None,
            quadrature_box: None,
            warnings: Vec::new(),
        });
    }
    let k = f.occupied_degree().unwrap_or(0);
    let bx = bx.unwrap_or_else(|| QuadratureBox::for_exponent(k, f.dim(), p));
    let g = f.eval_grid(&bx.grid(f.dim())?)?;
    Ok(NormReport {
        value: lp_norm_grid(&g, p)?,
        levels_used: None,
        quadrature_box: Some(bx),
        warnings: bx.warnings(k, f.dim()),
    })
}

fn spectral_setup(
    sys: &AdmissibleSystem,
    f: &SpectralFunction,
    levels: Option<usize>,
) -> (usize, usize, Vec<String>) {
    let k = f.occupied_degree().unwrap_or(0);
    let needed = sys.levels_for_degree(k, f.dim());
    let mut warnings = Vec::new();
    let j = match (levels, needed) {
        (Some(j), Some(n)) if j < n => {
            warnings.push(format!("levels 0..={j} do not cover degree {k}; need {n}"));
            j
        }
        (Some(j), _) => j,
        (None, Some(n)) => n,
        (None, None) => {
            warnings.push(format!("degree {k} is not covered by this system; using 12 levels"));
            12
        }
    };
    (k, j, warnings)
}

/// `(sum_j (2^{j alpha} ||phi_j(sqrt L) f||_p)^q)^{1/q}` over `j <= J`; `J`
/// defaults to the smallest level count covering `f`.
pub fn besov_norm(
    sys: &AdmissibleSystem,
    f: &SpectralFunction,
    params: &SpaceParams,
    levels: Option<usize>,
    bx: Option<QuadratureBox>,
) -> Result<NormReport> {
    let (k, j_max, mut warnings) = spectral_setup(sys, f, levels);
    let bx = bx.unwrap_or_else(|| QuadratureBox::for_exponent(k, f.dim(), params.p));
    let grid = bx.grid(f.dim())?;
    let terms = (0..=j_max)
        .map(|j| {
            let piece = apply_lp(sys, j, f);
            if piece.is_empty() {
                return Ok(0.0);
            }
            let norm = if params.p == 2.0 {
                piece.l2_norm()
            } else {
                lp_norm_grid(&piece.eval_grid(&grid)?, params.p)?
            };
            Ok(2f64.powf(j as f64 * params.alpha) * norm)
        })
        .collect::<Result<Vec<f64>>>()?;
    if params.p != 2.0 {
        warnings.extend(bx.warnings(k, f.dim()));
    }
    Ok(NormReport {
        value: lq_sum(terms, params.q),
        levels_used: Some(j_max),
        quadrature_box: (params.p != 2.0).then_some(bx),
        warnings,
    })
}

/// `|| (sum_j (2^{j alpha} |phi_j(sqrt L) f|)^q)^{1/q} ||_p` on the box grid.
pub fn tl_norm(
    sys: &AdmissibleSystem,
    f: &SpectralFunction,
    params: &SpaceParams,
    levels: Option<usize>,
    bx: Option<QuadratureBox>,
) -> Result<NormReport> {
    let (k, j_max, mut warnings) = spectral_setup(sys, f, levels);
    let bx = bx.unwrap_or_else(|| QuadratureBox::for_exponent(k, f.dim(), params.p));
    let grid = bx.grid(f.dim())?;
    let mut acc = vec![0.0; grid.len()];
    for j in 0..=j_max {
        let piece = apply_lp(sys, j, f);
        if piece.is_empty() {
            continue;
        }
        let scale = 2f64.powf(j as f64 * params.alpha);
        let values = piece.eval_tensor(grid.axes())?;
        for (a, v) in acc.iter_mut().zip(&values) {
            let t = scale * v.norm();
            if params.q.is_infinite() {
                *a = f64::max(*a, t);
            } else {
                *a += t.powf(params.q);
            }
        }
    }
    let samples: Vec<Complex64> = acc
        .into_iter()
        .map(|a| if params.q.is_infinite() { a } else { a.powf(1.0 / params.q) }.into())
        .collect();
    warnings.extend(bx.warnings(k, f.dim()));
    Ok(NormReport {
        value: lp_norm_grid(&GridFunction::new(grid, samples)?, params.p)?,
        levels_used: Some(j_max),
        quadrature_box: Some(bx),
        warnings,
    })
}

/// Dispatches on `params.family`.
pub fn distribution_norm(
    sys: &AdmissibleSystem,
    f: &SpectralFunction,
    params: &SpaceParams,
    levels: Option<usize>,
    bx: Option<QuadratureBox>,
) -> Result<NormReport> {
    match params.family {
        Family::B => besov_norm(sys, f, params, levels, bx),
        Family::F => tl_norm(sys, f, params, levels, bx),
    }
}

fn check_levels(frame: &Frame, s: &CoefficientSequence) -> Result<()> {
    if s.dim != frame.dim() {
        return Err(Error::DimensionMismatch {
            expected: frame.dim(),
            got: s.dim,
        });
    }
    for (j, idx, _) in s.iter() {
        let set = frame.level(j)?;
        if set.flatten(idx).is_err() {
            return Err(Error::InvalidNode {
                level: j,
                index: idx.clone(),
            });
        }
    }
    Ok(())
}

/// `b^{p,q}_alpha`: `(sum_j (2^{j alpha} (sum_R (|R|^{1/p - 1/2} |s_R|)^p)^{1/p})^q)^{1/q}`.
pub fn seq_besov_norm(frame: &Frame, s: &CoefficientSequence, params: &SpaceParams) -> Result<f64> {
    check_levels(frame, s)?;
    let p = params.p;
    let terms = s.levels.iter().map(|level| {
        let set = frame.levels().get(level.j).expect("checked above");
        let inner = lq_sum(
            level.entries.iter().map(|(idx, c)| {
                let m = set.measure(idx);
                let e = if p.is_infinite() { -0.5 } else { 1.0 / p - 0.5 };
                m.powf(e) * c.norm()
            }),
            p,
        );
        2f64.powf(level.j as f64 * params.alpha) * inner
    });
    Ok(lq_sum(terms.collect::<Vec<_>>(), params.q))
}

/// `f^{p,q}_alpha`: `|| (sum_j sum_R (2^{j alpha} |R|^{-1/2} |s_R| 1_R)^q)^{1/q} ||_p`,
/// exact because the integrand is constant on the cells of the common
/// refinement of all tile edges.
pub fn seq_tl_norm(frame: &Frame, s: &CoefficientSequence, params: &SpaceParams) -> Result<f64> {
    check_levels(frame, s)?;
    if params.p.is_infinite() {
        return Err(Error::invalid("p", "sequence Triebel-Lizorkin norms need p < infinity"));
    }
    let dim = frame.dim();
    let active: Vec<_> = s.levels.iter().filter(|l| !l.entries.is_empty()).collect();
    if active.is_empty() {
        return Ok(0.0);
    }
    // Merge the edges of the active levels (same on every axis).
    let mut cuts: Vec<f64> = active
        .iter()
        .flat_map(|l| frame.levels()[l.j].axis().edges.iter().copied())
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let cells = cuts.len() - 1;
    let mids: Vec<f64> = cuts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let widths: Vec<f64> = cuts.windows(2).map(|w| w[1] - w[0]).collect();
    // Per level: axis cell -> tile index along that axis.
    let owners: Vec<Vec<Option<usize>>> = active
        .iter()
        .map(|l| mids.iter().map(|&t| frame.levels()[l.j].axis().locate(t)).collect())
        .collect();
    let total = cells.pow(dim as u32);
    let p = params.p;
    let q = params.q;
    let sum: f64 = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut rest = flat;
            let mut cell = vec![0; dim];
            for slot in cell.iter_mut().rev() {
                *slot = rest % cells;
                rest /= cells;
            }
            let mut acc = 0.0f64;
            for (l, owner) in active.iter().zip(&owners) {
                let Some(idx) = cell.iter().map(|&c| owner[c]).collect::<Option<Vec<usize>>>() else {
                    continue;
                };
                let Some(c) = l.entries.get(&idx) else {
                    continue;
                };
                let set = &frame.levels()[l.j];
                let v = 2f64.powf(l.j as f64 * params.alpha) * set.measure(&idx).powf(-0.5) * c.norm();
                if q.is_infinite() {
                    acc = acc.max(v);
                } else {
                    acc += v.powf(q);
                }
            }
            if acc == 0.0 {
                return 0.0;
            }
            let g = if q.is_infinite() { acc } else { acc.powf(1.0 / q) };
            let vol: f64 = cell.iter().map(|&c| widths[c]).product();
            vol * g.powf(p)
        })
        .sum();
    Ok(sum.powf(1.0 / p))
}

/// Dispatches on `params.family`.
pub fn sequence_norm(frame: &Frame, s: &CoefficientSequence, params: &SpaceParams) -> Result<f64> {
    match params.family {
        Family::B => seq_besov_norm(frame, s, params),
        Family::F => seq_tl_norm(frame, s, params),
    }
}

/// Cell volumes along one axis: the span between neighbouring midpoints,
/// one-sided at the ends.
fn cell_widths(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| {
            let left = if i > 0 { axis[i] - axis[i - 1] } else { axis[1] - axis[0] };
            let right = if i + 1 < n { axis[i + 1] - axis[i] } else { axis[n - 1] - axis[n - 2] };
            0.5 * (left + right)
        })
        .collect()
}

/// Applies `op` to every 1-d line of `data` along `axis`.
fn along_axis(data: &[f64], shape: &[usize], axis: usize, op: impl Fn(&[f64]) -> Vec<f64>) -> (Vec<f64>, Vec<usize>) {
    let len = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out_shape = shape.to_vec();
    let mut out: Vec<f64> = Vec::new();
    let mut line = vec![0.0; len];
    for o in 0..outer {
        for s in 0..stride {
            for (i, v) in line.iter_mut().enumerate() {
                *v = data[(o * len + i) * stride + s];
            }
            let res = op(&line);
            if out.is_empty() {
                out_shape[axis] = res.len();
                out = vec![0.0; outer * res.len() * stride];
            }
            for (i, v) in res.iter().enumerate() {
                out[(o * res.len() + i) * stride + s] = *v;
            }
        }
    }
    (out, out_shape)
}

/// Sums over windows of `w` consecutive entries.
fn window_sums(line: &[f64], w: usize) -> Vec<f64> {
    let mut prefix = vec![0.0; line.len() + 1];
    for (i, v) in line.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    (0..=line.len() - w).map(|p| prefix[p + w] - prefix[p]).collect()
}

/// `out[i] = max(line[p])` over window starts `p` with `p <= i < p + w`.
fn covering_max(line: &[f64], w: usize, len: usize) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; len];
    // Monotone deque over the valid starts i-w+1 ..= i.
    let mut deque: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let mut next = 0;
    for (i, slot) in out.iter_mut().enumerate() {
        while next < line.len() && next <= i {
            while deque.back().is_some_and(|&b| line[b] <= line[next]) {
                deque.pop_back();
            }
            deque.push_back(next);
            next += 1;
        }
        while deque.front().is_some_and(|&f| f + w <= i) {
            deque.pop_front();
        }
        if let Some(&f) = deque.front() {
            *slot = line[f];
        }
    }
    out
}

/// `M_s g(x)`: supremum over cubes of `2^m` grid cells per side (all
/// positions containing `x`, `m = 0, 1, ...`) of `(avg_Q |g|^s)^{1/s}`,
/// averages weighted by cell volumes.
pub fn maximal(g: &GridFunction, s: f64) -> Result<GridFunction> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::invalid("s", "maximal exponent must be positive and finite"));
    }
    let shape = g.grid.shape();
    let widths: Vec<Vec<f64>> = g.grid.axes().iter().map(|a| cell_widths(a)).collect();
    let vol: Vec<f64> = (0..g.grid.len())
        .map(|flat| {
            g.grid
                .unflatten(flat)
                .iter()
                .enumerate()
                .map(|(a, &i)| widths[a][i])
                .product()
        })
        .collect();
    let mass: Vec<f64> = g.samples.iter().zip(&vol).map(|(z, v)| v * z.norm().powf(s)).collect();
    let min_len = *shape.iter().min().expect("grid has an axis");
    let mut best = vec![0.0f64; g.grid.len()];
    let mut w = 1;
    while w <= min_len {
        let (mut num, mut sh) = (mass.clone(), shape.clone());
        let (mut den, mut shd) = (vol.clone(), shape.clone());
        for axis in 0..shape.len() {
            (num, sh) = along_axis(&num, &sh, axis, |l| window_sums(l, w));
            (den, shd) = along_axis(&den, &shd, axis, |l| window_sums(l, w));
        }
        let mut avg: Vec<f64> = num.iter().zip(&den).map(|(a, b)| a / b).collect();
        let mut ash = sh;
        for (axis, &len) in shape.iter().enumerate() {
            (avg, ash) = along_axis(&avg, &ash, axis, |l| covering_max(l, w, len));
        }
        debug_assert_eq!(ash, shape);
        for (b, a) in best.iter_mut().zip(&avg) {
            *b = b.max(*a);
        }
        w *= 2;
    }
    let samples = best.into_iter().map(|b| Complex64::from(b.powf(1.0 / s))).collect();
    GridFunction::new(g.grid.clone(), samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{gauss_hermite, MultiIndex};
    use crate::tiles::TileConfig;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_function(dim: usize, k_max: usize, seed: u64) -> SpectralFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SpectralFunction::from_coeffs(
            dim,
            k_max,
            MultiIndex::up_to_degree(dim, k_max)
                .into_iter()
                .map(|xi| (xi, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))),
        )
        .unwrap()
    }

    #[test]
    fn gaussian_norms() {
        let h0 = SpectralFunction::basis(MultiIndex::zero(1));
        assert_eq!(lp_norm(&h0, 2.0, None).unwrap().value, 1.0);
        let l1 = lp_norm(&h0, 1.0, None).unwrap().value;
        assert_relative_eq!(l1, std::f64::consts::PI.powf(0.25) * 2f64.sqrt(), epsilon = 1e-10);
        assert_eq!(lp_norm(&SpectralFunction::zero(1, 3), 1.5, None).unwrap().value, 0.0);
    }

    #[test]
    fn parseval_against_quadrature() {
        let f = random_function(1, 25, 3);
        let g = gauss_hermite(60).unwrap();
        let sq: Vec<f64> = g.nodes.iter().map(|&x| f.eval(&[x]).unwrap().norm_sqr()).collect();
        assert_relative_eq!(f.l2_norm(), g.integrate_function(&sq).sqrt(), epsilon = 1e-9);
        let bx = QuadratureBox::for_degree(25, 1);
        let trap = lp_norm_grid(&f.eval_grid(&bx.grid(1).unwrap()).unwrap(), 2.0).unwrap();
        assert_relative_eq!(f.l2_norm(), trap, epsilon = 1e-9);
    }

    #[test]
    fn small_box_warns() {
        let f = random_function(1, 10, 1);
        let r = lp_norm(&f, 1.0, Some(QuadratureBox { half_width: 2.0, points: 101 })).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn besov_of_h0() {
        let sys = AdmissibleSystem::default_system();
        let h0 = SpectralFunction::basis(MultiIndex::zero(1));
        let params = SpaceParams::besov(0.5, 1.0, 2.0).unwrap();
        let r = besov_norm(&sys, &h0, &params, None, None).unwrap();
        let l1 = std::f64::consts::PI.powf(0.25) * 2f64.sqrt();
        let expect = lq_sum((0..=r.levels_used.unwrap()).map(|j| 2f64.powf(0.5 * j as f64) * sys.phi_j(j, 1.0).abs()), 2.0) * l1;
        assert_relative_eq!(r.value, expect, epsilon = 1e-8);
    }

    #[test]
    fn littlewood_paley_ratio_and_homogeneity() {
        let sys = AdmissibleSystem::default_system();
        let params = SpaceParams::triebel(0.0, 2.0, 2.0).unwrap();
        for seed in 0..4 {
            let f = random_function(1, 12, seed);
            let t = tl_norm(&sys, &f, &params, None, None).unwrap().value;
            let ratio = t / f.l2_norm();
            assert!((0.7..=1.0 + 1e-9).contains(&ratio), "{ratio}");
            let t2 = tl_norm(&sys, &f.scale(2.0.into()), &params, None, None).unwrap().value;
            assert_relative_eq!(t2, 2.0 * t, max_relative = 1e-12);
        }
    }

    #[test]
    fn sequence_norms_of_one_coefficient() {
        let frame = Frame::new(AdmissibleSystem::default_system(), TileConfig::new(1, 2).unwrap()).unwrap();
        let mut s = CoefficientSequence::zero(1, 2);
        s.insert(2, vec![9], Complex64::new(0.0, 1.0)).unwrap();
        let m = frame.level(2).unwrap().measure(&[9]);
        for (alpha, p, q) in [(0.0, 2.0, 2.0), (0.5, 1.0, 3.0), (-1.0, 1.5, 0.7)] {
            let b = seq_besov_norm(&frame, &s, &SpaceParams::besov(alpha, p, q).unwrap()).unwrap();
            assert_relative_eq!(b, 2f64.powf(2.0 * alpha) * m.powf(1.0 / p - 0.5), max_relative = 1e-14);
            let f = seq_tl_norm(&frame, &s, &SpaceParams::triebel(alpha, p, q).unwrap()).unwrap();
            assert_relative_eq!(f, 2f64.powf(2.0 * alpha) * m.powf(-0.5) * m.powf(1.0 / p), max_relative = 1e-12);
        }
        let zero = CoefficientSequence::zero(1, 2);
        assert_eq!(seq_tl_norm(&frame, &zero, &SpaceParams::triebel(0.0, 2.0, 2.0).unwrap()).unwrap(), 0.0);
        assert_eq!(seq_besov_norm(&frame, &zero, &SpaceParams::besov(0.0, 2.0, 2.0).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn sequence_norms_agree_for_p_equal_q() {
        let frame = Frame::new(AdmissibleSystem::default_system(), TileConfig::new(2, 2).unwrap()).unwrap();
        let s = frame.analyze(&random_function(2, 6, 9)).unwrap();
        let b = seq_besov_norm(&frame, &s, &SpaceParams::besov(0.3, 2.0, 2.0).unwrap()).unwrap();
        let f = seq_tl_norm(&frame, &s, &SpaceParams::triebel(0.3, 2.0, 2.0).unwrap()).unwrap();
        assert_relative_eq!(b, f, max_relative = 1e-12);
    }

    #[test]
    fn maximal_basics() {
        let grid = TensorGrid::uniform(2, 1.0, 17).unwrap();
        let c = GridFunction::from_fn(grid.clone(), |_| Complex64::new(2.5, 0.0));
        let m = maximal(&c, 0.7).unwrap();
        assert!(m.samples.iter().all(|z| (z.re - 2.5).abs() < 1e-12));
        let g = GridFunction::from_fn(grid, |x| Complex64::new((3.0 * x[0]).sin() * x[1], 0.2));
        let m = maximal(&g, 1.3).unwrap();
        for (a, b) in m.samples.iter().zip(&g.samples) {
            assert!(a.re >= b.norm() - 1e-12);
        }
    }

    #[test]
    fn covering_max_brute_force() {
        let line = vec![0.3, 1.0, -2.0, 4.0, 0.0, 0.5];
        for w in 1..=4 {
            let sums = window_sums(&line, w);
            let cm = covering_max(&sums, w, line.len());
            for i in 0..line.len() {
                let expect = (0..sums.len())
                    .filter(|&p| p <= i && i < p + w)
                    .map(|p| sums[p])
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(cm[i], expect);
            }
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(SpaceParams::triebel(0.0, f64::INFINITY, 2.0).is_err());
        assert!(SpaceParams::besov(0.0, 0.0, 2.0).is_err());
        let p = SpaceParams::triebel(0.0, 0.5, 2.0).unwrap();
        assert_eq!(p.n_pq(2), 4.0);
        assert_eq!(SpaceParams::besov(0.0, 2.0, 0.25).unwrap().n_pq(3), 3.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn triangle_inequality(seed_a in 0u64..1000, seed_b in 0u64..1000, p in 1.0..3.0f64, q in 1.0..3.0f64) {
            let sys = AdmissibleSystem::default_system();
            let a = random_function(1, 8, seed_a);
            let b = random_function(1, 8, seed_b);
            let sum = a.combine(1.0.into(), &b, 1.0.into()).unwrap();
            let bx = Some(QuadratureBox::for_degree(8, 1));
            for params in [SpaceParams::besov(0.4, p, q).unwrap(), SpaceParams::triebel(0.4, p, q).unwrap()] {
                let na = distribution_norm(&sys, &a, &params, Some(5), bx).unwrap().value;
                let nb = distribution_norm(&sys, &b, &params, Some(5), bx).unwrap().value;
                let ns = distribution_norm(&sys, &sum, &params, Some(5), bx).unwrap().value;
                prop_assert!(ns <= na + nb + 1e-12);
            }
        }
    }
}
