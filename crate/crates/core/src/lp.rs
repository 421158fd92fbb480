//! Admissible systems of spectral windows and the Littlewood-Paley pieces
//! `phi_j(sqrt L)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{
    binomial, eigenvalue, eval_hermite_nd, finite_difference, projector_kernels, MultiIndex,
    SpectralFunction,
};

/// Exp-bump smoothstep: 0 for `u <= 0`, 1 for `u >= 1`, `C^infinity`.
pub fn smoothstep(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        a / (a + b)
    }
}

/// Step used for central differences of order `order`: `1e-3`, enlarged
/// for high orders so that roundoff `eps / h^order` stays small.
pub fn difference_step(order: usize) -> f64 {
    1e-3f64.max(f64::EPSILON.powf(1.0 / (order as f64 + 2.0)))
}

/// A smooth one-dimensional profile with its stated support.
#[derive(Clone)]
pub struct SmoothProfile {
    name: String,
    support: (f64, f64),
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for SmoothProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothProfile")
            .field("name", &self.name)
            .field("support", &self.support)
            .finish()
    }
}

impl SmoothProfile {
    pub fn new(
        name: impl Into<String>,
        support: (f64, f64),
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SmoothProfile {
            name: name.into(),
            support,
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    fn central_difference(&self, order: usize, t: f64, h: f64) -> f64 {
        let half = order as f64 / 2.0;
        let sum: f64 = (0..=order)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * binomial(order, i) * self.eval(t + (half - i as f64) * h)
            })
            .sum();
        sum / h.powi(order as i32)
    }

    /// `order`-th derivative by central differences with two Richardson
    /// extrapolation steps (steps `h`, `h/2`, `h/4`).
    pub fn derivative(&self, order: usize, t: f64) -> f64 {
        if order == 0 {
            return self.eval(t);
        }
        let h = difference_step(order);
        let d: Vec<f64> = (0..3)
            .map(|i| self.central_difference(order, t, h / f64::from(1 << i)))
            .collect();
        let t0 = (4.0 * d[1] - d[0]) / 3.0;
        let t1 = (4.0 * d[2] - d[1]) / 3.0;
        (16.0 * t1 - t0) / 15.0
    }

    /// `sup |profile^{(order)}|` sampled on `samples` points of the support.
    pub fn sup_derivative(&self, order: usize, samples: usize) -> f64 {
        let (a, b) = self.support;
        (0..=samples)
            .map(|i| a + (b - a) * i as f64 / samples as f64)
            .map(|t| self.derivative(order, t).abs())
            .fold(0.0, f64::max)
    }
}

/// Reproducible description of a built-in system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum SystemDescriptor {
    /// `chi = 1 - S((t - plateau) / (cutoff - plateau))`, `phi_0 = chi`,
    /// `phi(t) = chi(t) - chi(2t)`.
    SmoothPartition { plateau: f64, cutoff: f64 },
    /// A system assembled from arbitrary profiles.
    Custom,
}

impl Default for SystemDescriptor {
    fn default() -> Self {
        SystemDescriptor::SmoothPartition {
            plateau: 0.5,
            cutoff: 0.75,
        }
    }
}

/// `(phi_0, phi)` with duals `(psi_0, psi)`.
#[derive(Debug, Clone)]
pub struct AdmissibleSystem {
    pub phi0: SmoothProfile,
    pub phi: SmoothProfile,
    pub psi0: SmoothProfile,
    pub psi: SmoothProfile,
    pub descriptor: SystemDescriptor,
    /// Whether `sum_j psi_j phi_j = 1` holds by construction.
    pub reproducing: bool,
}

fn cutoff_fn(plateau: f64, cutoff: f64) -> impl Fn(f64) -> f64 + Copy {
    move |t: f64| 1.0 - smoothstep((t - plateau) / (cutoff - plateau))
}

/// `D(t) = sum_{j >= 0} phi_j(t)^2` for the smooth partition.
fn partition_energy(plateau: f64, cutoff: f64, t: f64) -> f64 {
    let chi = cutoff_fn(plateau, cutoff);
    let phi = |s: f64| chi(s) - chi(2.0 * s);
    let mut total = chi(t).powi(2);
    let mut scaled = t / 2.0;
    while scaled >= plateau / 2.0 {
        total += phi(scaled).powi(2);
        scaled /= 2.0;
    }
    total
}

impl AdmissibleSystem {
    /// The built-in system with plateau 1/2 and cutoff 3/4.
    pub fn default_system() -> Self {
        Self::smooth_partition(0.5, 0.75).expect("default parameters are valid")
    }

    /// Smooth partition of unity with `phi_0 = 1` on `[0, plateau]`, zero
    /// beyond `cutoff`. Needs `1/2 <= plateau < cutoff <= 1` so that
    /// `phi` lives in `[1/4, 1]` and the dual identity holds.
    pub fn smooth_partition(plateau: f64, cutoff: f64) -> Result<Self> {
        if !(0.5..1.0).contains(&plateau) || !(cutoff > plateau && cutoff <= 1.0) {
            return Err(Error::invalid(
                "smooth partition",
                format!("need 1/2 <= plateau < cutoff <= 1, got ({plateau}, {cutoff})"),
            ));
        }
        let chi = cutoff_fn(plateau, cutoff);
        let phi0 = SmoothProfile::new("chi", (0.0, cutoff), chi);
        let phi = SmoothProfile::new("chi(t)-chi(2t)", (plateau / 2.0, cutoff), move |t| chi(t) - chi(2.0 * t));
        let psi0 = SmoothProfile::new("chi/D", (0.0, cutoff), move |t| {
            let v = chi(t);
            if v == 0.0 {
                0.0
            } else {
                v / partition_energy(plateau, cutoff, t)
            }
        });
        let psi = SmoothProfile::new("phi/D(2t)", (plateau / 2.0, cutoff), move |t| {
            let v = chi(t) - chi(2.0 * t);
            if v == 0.0 {
                0.0
            } else {
                v / partition_energy(plateau, cutoff, 2.0 * t)
            }
        });
        Ok(AdmissibleSystem {
            phi0,
            phi,
            psi0,
            psi,
            descriptor: SystemDescriptor::SmoothPartition { plateau, cutoff },
            reproducing: true,
        })
    }

    /// A system from arbitrary profiles, with `psi = phi` and no
    /// reproducing identity assumed.
    pub fn custom(phi0: SmoothProfile, phi: SmoothProfile) -> Self {
        AdmissibleSystem {
            psi0: phi0.clone(),
            psi: phi.clone(),
            phi0,
            phi,
            descriptor: SystemDescriptor::Custom,
            reproducing: false,
        }
    }

    pub fn from_descriptor(d: &SystemDescriptor) -> Result<Self> {
        match *d {
            SystemDescriptor::SmoothPartition { plateau, cutoff } => Self::smooth_partition(plateau, cutoff),
            SystemDescriptor::Custom => Err(Error::invalid("system", "custom systems cannot be rebuilt from a descriptor")),
        }
    }

    /// `phi_j(t)`.
    pub fn phi_j(&self, j: usize, t: f64) -> f64 {
        if j == 0 {
            self.phi0.eval(t)
        } else {
            self.phi.eval(t / 2f64.powi(j as i32))
        }
    }

    /// `psi_j(t)`.
    pub fn psi_j(&self, j: usize, t: f64) -> f64 {
        if j == 0 {
            self.psi0.eval(t)
        } else {
            self.psi.eval(t / 2f64.powi(j as i32))
        }
    }

    /// `t` up to which `sum_{j <= J} phi_j(t) = 1` and `sum_{j <= J} psi_j phi_j = 1`.
    pub fn covered_up_to(&self, levels: usize) -> f64 {
        match self.descriptor {
            SystemDescriptor::SmoothPartition { plateau, .. } => plateau * 2f64.powi(levels as i32),
            SystemDescriptor::Custom => 0.0,
        }
    }

    /// Whether levels `0..=J` reproduce every degree `k <= k_max` in dimension `n`.
    pub fn covers(&self, levels: usize, k_max: usize, dim: usize) -> bool {
        self.reproducing && eigenvalue(k_max, dim).sqrt() <= self.covered_up_to(levels)
    }

    /// Smallest `J` with `covers(J, k_max, dim)`.
    pub fn levels_for_degree(&self, k_max: usize, dim: usize) -> Option<usize> {
        (0..40).find(|&j| self.covers(j, k_max, dim))
    }

    /// `phi_j(sqrt(lambda_k))`.
    pub fn window(&self, j: usize, k: usize, dim: usize) -> f64 {
        self.phi_j(j, eigenvalue(k, dim).sqrt())
    }

    /// `psi_j(sqrt(lambda_k))`.
    pub fn dual_window(&self, j: usize, k: usize, dim: usize) -> f64 {
        self.psi_j(j, eigenvalue(k, dim).sqrt())
    }

    /// Degrees `k` where `phi_j(sqrt(lambda_k))` can be nonzero, from the
    /// stated profile supports; `None` if there are none.
    pub fn degree_range(&self, j: usize, dim: usize) -> Option<(usize, usize)> {
        let (lo, hi) = if j == 0 {
            self.phi0.support()
        } else {
            let s = 2f64.powi(j as i32);
            let (a, b) = self.phi.support();
            (a * s, b * s)
        };
        let n = dim as f64;
        let k_hi = (hi * hi - n) / 2.0;
        if k_hi < 0.0 {
            return None;
        }
        let k_lo = ((lo * lo - n) / 2.0).max(0.0).ceil() as usize;
        let k_hi = k_hi.floor() as usize;
        (k_lo <= k_hi).then_some((k_lo, k_hi))
    }

    /// Highest degree touched by levels `0..=J`.
    pub fn max_degree(&self, levels: usize, dim: usize) -> usize {
        (0..=levels)
            .filter_map(|j| self.degree_range(j, dim))
            .map(|(_, hi)| hi)
            .max()
            .unwrap_or(0)
    }
}

/// The index set `I_j` as an inclusive range of degrees, `None` if empty:
/// `[4^{j-2}/2 - floor(n/2), 4^j/2 - ceil(n/2)]` for `j >= 1`, `{0}` for
/// `j = 0, n = 1` and empty for `j = 0, n >= 2`.
pub fn support_set(j: usize, dim: usize) -> Option<(usize, usize)> {
    if j == 0 {
        return (dim == 1).then_some((0, 0));
    }
    let lo = 0.5 * 4f64.powi(j as i32 - 2) - (dim / 2) as f64;
    let hi = 0.5 * 4f64.powi(j as i32) - dim.div_ceil(2) as f64;
    if hi < 0.0 {
        return None;
    }
    let lo = lo.max(0.0).ceil() as usize;
    let hi = hi.floor() as usize;
    (lo <= hi).then_some((lo, hi))
}

/// `phi_j(sqrt L)(x, y) = sum_k phi_j(sqrt(lambda_k)) P_k(x, y)`.
pub fn lp_kernel(sys: &AdmissibleSystem, j: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    let Some((lo, hi)) = sys.degree_range(j, x.len()) else {
        return Ok(0.0);
    };
    let p = projector_kernels(hi, x, y)?;
    Ok((lo..=hi).map(|k| sys.window(j, k, x.len()) * p[k]).sum())
}

/// `y -> phi_j(sqrt L)(x, y)` as a Hermite expansion, scaled by `scale`.
pub fn kernel_section(sys: &AdmissibleSystem, j: usize, x: &[f64], scale: f64) -> Result<SpectralFunction> {
    section(sys, j, x, scale, |k| sys.window(j, k, x.len()))
}

/// `y -> psi_j(sqrt L)(x, y)`, scaled by `scale`.
pub fn dual_kernel_section(sys: &AdmissibleSystem, j: usize, x: &[f64], scale: f64) -> Result<SpectralFunction> {
    section(sys, j, x, scale, |k| sys.dual_window(j, k, x.len()))
}

fn section(
    sys: &AdmissibleSystem,
    j: usize,
    x: &[f64],
    scale: f64,
    window: impl Fn(usize) -> f64,
) -> Result<SpectralFunction> {
    let dim = x.len();
    let Some((lo, hi)) = sys.degree_range(j, dim) else {
        return Ok(SpectralFunction::zero(dim, 0));
    };
    let mut out = SpectralFunction::zero(dim, hi);
    let tables: Vec<Vec<f64>> = x
        .iter()
        .map(|&t| crate::hermite::eval_hermite_1d(hi, t))
        .collect::<Result<_>>()?;
    for k in lo..=hi {
        let w = window(k) * scale;
        if w == 0.0 {
            continue;
        }
        for xi in MultiIndex::of_degree(dim, k) {
            let v: f64 = xi.0.iter().enumerate().map(|(i, &d)| tables[i][d]).product();
            if v != 0.0 {
                out.insert(xi, (w * v).into())?;
            }
        }
    }
    Ok(out)
}

/// `phi_j(sqrt L) f`, exact on the coefficients.
pub fn apply_lp(sys: &AdmissibleSystem, j: usize, f: &SpectralFunction) -> SpectralFunction {
    let n = f.dim();
    f.map_by_degree(|k| sys.window(j, k, n))
}

/// `int (x - y)^gamma phi_j(sqrt L)(x, y) dy`, from exact Hermite moments.
pub fn lp_moment(sys: &AdmissibleSystem, j: usize, x: &[f64], gamma: &[usize]) -> Result<f64> {
    if gamma.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: gamma.len(),
        });
    }
    let section = kernel_section(sys, j, x, 1.0)?;
    let sign = if gamma.iter().sum::<usize>() % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * section.moment(gamma, x)?.re)
}

/// One clause of the admissibility check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub clauses: Vec<Clause>,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    /// `max |sum_{j <= J} psi_j phi_j - 1|` on `[0, 2^{J-1}]`, if the system is reproducing.
    pub reproducing_error: Option<f64>,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn clause(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.name == name)
    }
}

const SUPPORT_TOL: f64 = 1e-14;
const FLAT_TOL: f64 = 1e-8;

/// Checks the admissibility clauses by dense sampling; violations are
/// reported, never raised.
pub fn check_admissible(sys: &AdmissibleSystem) -> AdmissibilityReport {
    let samples = 20_000;
    let grid: Vec<f64> = (0..=samples).map(|i| 4.0 * i as f64 / samples as f64).collect();
    let mut clauses = Vec::new();

    let leak = |p: &SmoothProfile, lo: f64, hi: f64| {
        grid.iter()
            .filter(|&&t| t < lo || t > hi)
            .map(|&t| p.eval(t).abs())
            .fold(0.0, f64::max)
    };
    let l0 = leak(&sys.phi0, 0.0, 1.0);
    clauses.push(Clause {
        name: "phi0-support".into(),
        passed: l0 <= SUPPORT_TOL,
        detail: format!("max |phi0| outside [0,1] = {l0:e}"),
    });
    let l1 = leak(&sys.phi, 0.25, 1.0);
    clauses.push(Clause {
        name: "phi-support".into(),
        passed: l1 <= SUPPORT_TOL,
        detail: format!("max |phi| outside [1/4,1] = {l1:e}"),
    });

    // b0: half the smaller of |phi0(0)| and max |phi|.
    let peak_phi = grid.iter().map(|&t| sys.phi.eval(t).abs()).fold(0.0, f64::max);
    let b0 = 0.5 * sys.phi0.eval(0.0).abs().min(peak_phi);
    let b1 = grid
        .iter()
        .take_while(|&&t| sys.phi0.eval(t).abs() > b0)
        .last()
        .copied()
        .unwrap_or(0.0);
    clauses.push(Clause {
        name: "phi0-lower-bound".into(),
        passed: b0 > 0.0 && b1 > 0.0 && b1 < 1.0,
        detail: format!("|phi0| > {b0} on [0, {b1}]"),
    });
    let peak_at = grid
        .iter()
        .copied()
        .max_by(|a, b| sys.phi.eval(*a).abs().total_cmp(&sys.phi.eval(*b).abs()))
        .unwrap_or(0.0);
    let above = |t: &f64| sys.phi.eval(*t).abs() > b0;
    let b2 = grid.iter().rev().filter(|&&t| t <= peak_at).take_while(|t| above(t)).last().copied().unwrap_or(peak_at);
    let b3 = grid.iter().filter(|&&t| t >= peak_at).take_while(|t| above(t)).last().copied().unwrap_or(peak_at);
    clauses.push(Clause {
        name: "phi-lower-bound".into(),
        passed: b0 > 0.0 && 0.25 < b2 && b2 < b3 && b3 < 1.0,
        detail: format!("|phi| > {b0} on [{b2}, {b3}]"),
    });

    let worst = (1..=8)
        .map(|m| sys.phi0.derivative(m, 0.0).abs())
        .fold(0.0, f64::max);
    clauses.push(Clause {
        name: "phi0-flat-at-zero".into(),
        passed: worst <= FLAT_TOL,
        detail: format!("max_(1<=m<=8) |phi0^(m)(0)| = {worst:e}"),
    });

    let reproducing_error = sys.reproducing.then(|| {
        let levels = 6;
        let top = 2f64.powi(levels as i32 - 1);
        let err = (0..=10_000)
            .map(|i| top * i as f64 / 10_000.0)
            .map(|t| {
                let s: f64 = (0..=levels).map(|j| sys.psi_j(j, t) * sys.phi_j(j, t)).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max);
        clauses.push(Clause {
            name: "reproducing".into(),
            passed: err < 1e-12,
            detail: format!("max |sum psi_j phi_j - 1| on [0, {top}] = {err:e}"),
        });
        err
    });

    AdmissibilityReport {
        clauses,
        b0,
        b1,
        b2,
        b3,
        reproducing_error,
    }
}

/// Which bound of the finite-difference estimate is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HoppeBound {
    /// Profiles flat at the origin:
    /// `|Delta^l phi_j(sqrt lambda_k)| <~ ||phi^(N)|| 2^{-jN} lambda_k^{N/2 - l}`.
    Flat,
    /// General profiles: `<~ max_(s <= N) ||phi^(s)|| lambda_k^{-l/2}`.
    General,
}

/// `|Delta^l_k profile(2^{-j} sqrt(lambda_k))|` divided by the chosen bound.
pub fn hoppe_ratio(
    profile: &SmoothProfile,
    bound: HoppeBound,
    l: usize,
    big_n: usize,
    j: usize,
    k: usize,
    dim: usize,
) -> Result<f64> {
    if !(big_n > l && l >= 1) {
        return Err(Error::invalid("hoppe orders", "need N > l >= 1"));
    }
    let scale = 2f64.powi(-(j as i32));
    let seq: Vec<f64> = (k..=k + l)
        .map(|kk| profile.eval(scale * eigenvalue(kk, dim).sqrt()))
        .collect();
    let diff = finite_difference(&seq, l)?[0].abs();
    let lambda = eigenvalue(k, dim);
    let rhs = match bound {
        HoppeBound::Flat => {
            profile.sup_derivative(big_n, 2000) * scale.powi(big_n as i32) * lambda.powf(big_n as f64 / 2.0 - l as f64)
        }
        HoppeBound::General => {
            let m = (1..=big_n).map(|s| profile.sup_derivative(s, 2000)).fold(0.0, f64::max);
            m * lambda.powf(-(l as f64) / 2.0)
        }
    };
    Ok(if rhs == 0.0 { if diff == 0.0 { 0.0 } else { f64::INFINITY } } else { diff / rhs })
}

/// Per-level maxima of [`hoppe_ratio`] over the degrees touched by each level.
pub fn hoppe_scan(
    sys: &AdmissibleSystem,
    bound: HoppeBound,
    l: usize,
    big_n: usize,
    max_level: usize,
    dim: usize,
) -> Result<Vec<f64>> {
    let profile = match bound {
        HoppeBound::Flat => &sys.phi,
        HoppeBound::General => &sys.phi0,
    };
    // Cache the derivative sup norms once; hoppe_ratio recomputes them otherwise.
    let scan_profile = profile.clone();
    (1..=max_level)
        .map(|j| {
            let range = match bound {
                HoppeBound::Flat => sys.degree_range(j, dim),
                HoppeBound::General => {
                    let s = 2f64.powi(j as i32);
                    let hi = ((scan_profile.support().1 * s).powi(2) - dim as f64) / 2.0;
                    (hi >= 0.0).then(|| (0, hi.ceil() as usize))
                }
            };
            let Some((lo, hi)) = range else {
                return Ok(0.0);
            };
            let lo = lo.saturating_sub(l);
            let mut worst: f64 = 0.0;
            for k in lo..=hi {
                worst = worst.max(hoppe_ratio(&scan_profile, bound, l, big_n, j, k, dim)?);
            }
            Ok(worst)
        })
        .collect()
}

/// `h_xi(x)` weighted by the level-`j` window; the single term of the
/// level-`j` kernel at one multi-index.
pub fn kernel_term(sys: &AdmissibleSystem, j: usize, xi: &MultiIndex, x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(sys.window(j, xi.degree(), x.len()) * eval_hermite_nd(xi, x)? * eval_hermite_nd(xi, y)?)
}
