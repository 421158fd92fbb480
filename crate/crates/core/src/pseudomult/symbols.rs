//! Example symbols and their JSON descriptors.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::expr::{Bindings, Expr, Var};
use super::linearize::{linearize_nonlinearity, Nonlinearity};
use super::Symbol;
use crate::error::{Error, Result};
use crate::hermite::SpectralFunction;
use crate::lp::{AdmissibleSystem, SystemDescriptor};

/// Reproducible description of a symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SymbolDescriptor {
    /// `sigma(x, xi) = expr(xi)`.
    Multiplier { expr: String },
    /// `Phi(x) Psi(xi)`: a bump of radius `radius` times `exp(-(xi/scale)^2)`.
    Separable { radius: f64, scale: f64 },
    /// `sum_{j >= 1} sigma_j(x) phi_j(sqrt(lambda_xi))` with
    /// `sigma_j(x) = cos(frequency 2^{j delta} x.v) (1 + <x>/2^j)^beta`.
    Dyadic {
        delta: f64,
        beta: f64,
        frequency: f64,
        #[serde(default)]
        system: SystemDescriptor,
    },
    /// As `Dyadic` with `delta = 1` and `sigma_j` supported in `2^j < |x| < 2^{j+1}`.
    Annulus {
        frequency: f64,
        #[serde(default)]
        system: SystemDescriptor,
    },
    /// `exp(i x.v)`.
    Oscillating { v: Vec<f64> },
    /// The symbol `sigma_f` with `T_{sigma_f} f = H(f)`, built from the input function.
    Linearized {
        h: String,
        #[serde(default)]
        levels: Option<usize>,
        #[serde(default = "default_t_points")]
        t_points: usize,
        #[serde(default)]
        system: SystemDescriptor,
    },
    /// An expression in `x1..xn`, `r`, `xi`.
    CustomExpression { expr: String },
}

fn default_t_points() -> usize {
    16
}

/// Builds a symbol; `f` is needed for the linearized kind only.
pub fn build_symbol(desc: &SymbolDescriptor, dim: usize, f: Option<&SpectralFunction>) -> Result<Box<dyn Symbol>> {
    Ok(match desc {
        SymbolDescriptor::Multiplier { expr } => Box::new(Multiplier::from_expr(expr)?),
        SymbolDescriptor::Separable { radius, scale } => Box::new(SeparableSymbol::new(*radius, *scale)?),
        SymbolDescriptor::Dyadic {
            delta,
            beta,
            frequency,
            system,
        } => Box::new(DyadicSymbol::graded(
            AdmissibleSystem::from_descriptor(system)?,
            *delta,
            *beta,
            *frequency,
        )?),
        SymbolDescriptor::Annulus { frequency, system } => {
            Box::new(DyadicSymbol::annulus(AdmissibleSystem::from_descriptor(system)?, *frequency))
        }
        SymbolDescriptor::Oscillating { v } => {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            Box::new(OscillatingSymbol::new(v.clone()))
        }
        SymbolDescriptor::Linearized {
            h,
            levels,
            t_points,
            system,
        } => {
            let f = f.ok_or_else(|| Error::Precondition("the linearized symbol needs the input function".into()))?;
            let sys = AdmissibleSystem::from_descriptor(system)?;
            Box::new(linearize_nonlinearity(&Nonlinearity::parse(h)?, f, &sys, *levels, *t_points)?)
        }
        SymbolDescriptor::CustomExpression { expr } => {
            let s = ExpressionSymbol::parse(expr)?;
            if s.expr.max_coordinate() > dim {
                return Err(Error::invalid(
                    "expression",
                    format!("uses x{} in dimension {dim}", s.expr.max_coordinate()),
                ));
            }
            Box::new(s)
        }
    })
}

/// An `x`-independent symbol `sigma(xi)`.
#[derive(Clone)]
pub struct Multiplier {
    seq: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>,
    expr: Option<String>,
}

impl std::fmt::Debug for Multiplier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Multiplier").field("expr", &self.expr).finish()
    }
}

impl Multiplier {
    pub fn from_expr(text: &str) -> Result<Self> {
        let e = Expr::parse(text)?;
        if e.max_coordinate() > 0 || e.mentions(Var::R) || e.mentions(Var::U) {
            return Err(Error::invalid("multiplier", "expression may only use xi"));
        }
        Ok(Multiplier {
            seq: Arc::new(move |xi| e.eval(&Bindings { x: &[], xi, u: 0.0 })),
            expr: Some(text.to_string()),
        })
    }
}

/// Wraps `seq` as the symbol `sigma(x, xi) = seq(xi)`.
pub fn hermite_multiplier(seq: impl Fn(f64) -> Complex64 + Send + Sync + 'static) -> Multiplier {
    Multiplier {
        seq: Arc::new(seq),
        expr: None,
    }
}

impl Symbol for Multiplier {
    fn eval(&self, _x: &[f64], xi: f64) -> Complex64 {
        (self.seq)(xi)
    }

    fn x_derivative(&self, nu: &[usize], _x: &[f64], _xi: f64) -> Option<Complex64> {
        (nu.iter().sum::<usize>() > 0).then(|| Complex64::new(0.0, 0.0))
    }

    fn depends_on_x(&self) -> bool {
        false
    }

    fn descriptor(&self) -> Option<SymbolDescriptor> {
        self.expr.clone().map(|expr| SymbolDescriptor::Multiplier { expr })
    }
}

/// `exp(1 - 1/(1 - t^2))` on `|t| < 1`, zero outside; equals 1 at 0.
fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|t| t * t).sum::<f64>().sqrt()
}

/// `Phi(x) Psi(xi)`, `Phi` a smooth bump of radius `radius`, `Psi(xi) = exp(-(xi/scale)^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparableSymbol {
    pub radius: f64,
    pub scale: f64,
}

impl SeparableSymbol {
    pub fn new(radius: f64, scale: f64) -> Result<Self> {
        if !(radius > 0.0) || !(scale > 0.0) {
            return Err(Error::invalid("separable symbol", "radius and scale must be positive"));
        }
        Ok(SeparableSymbol { radius, scale })
    }
}

impl Symbol for SeparableSymbol {
    fn eval(&self, x: &[f64], xi: f64) -> Complex64 {
        Complex64::new(bump(norm(x) / self.radius) * (-(xi / self.scale).powi(2)).exp(), 0.0)
    }

    fn descriptor(&self) -> Option<SymbolDescriptor> {
        Some(SymbolDescriptor::Separable {
            radius: self.radius,
            scale: self.scale,
        })
    }
}

/// `sum_{j >= 1} sigma_j(x) phi_j(sqrt(lambda_xi))`, `lambda_xi = 2 xi + n`.
#[derive(Debug, Clone)]
pub struct DyadicSymbol {
    system: AdmissibleSystem,
    delta: f64,
    beta: f64,
    frequency: f64,
    annulus: bool,
}

impl DyadicSymbol {
    /// `sigma_j(x) = cos(frequency 2^{j delta} x.v) (1 + <x>/2^j)^beta`,
    /// `v` the unit diagonal and `<x> = sqrt(1 + |x|^2)`.
    pub fn graded(system: AdmissibleSystem, delta: f64, beta: f64, frequency: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) || !(beta >= 0.0) {
            return Err(Error::invalid("dyadic symbol", "need 0 <= delta <= 1 and beta >= 0"));
        }
        Ok(DyadicSymbol {
            system,
            delta,
            beta,
            frequency,
            annulus: false,
        })
    }

    /// `sigma_j(x) = b(|x|/2^j) cos(frequency 2^j x.v)`, `b` a bump on `(1, 2)`.
    pub fn annulus(system: AdmissibleSystem, frequency: f64) -> Self {
        DyadicSymbol {
            system,
            delta: 1.0,
            beta: 0.0,
            frequency,
            annulus: true,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn piece(&self, j: usize, x: &[f64]) -> f64 {
        let scale = 2f64.powi(j as i32);
        let proj = x.iter().sum::<f64>() / (x.len() as f64).sqrt();
        let r = norm(x);
        if self.annulus {
            bump(2.0 * r / scale - 3.0) * (self.frequency * scale * proj).cos()
        } else {
            let bracket = (1.0 + r * r).sqrt();
            (self.frequency * scale.powf(self.delta) * proj).cos() * (1.0 + bracket / scale).powf(self.beta)
        }
    }
}

impl Symbol for DyadicSymbol {
    fn eval(&self, x: &[f64], xi: f64) -> Complex64 {
        self.eval_many(x, &[xi])[0]
    }

    fn eval_many(&self, x: &[f64], xis: &[f64]) -> Vec<Complex64> {
        let n = x.len() as f64;
        let (lo, hi) = self.system.phi.support();
        let mut cache: Vec<Option<f64>> = Vec::new();
        xis.iter()
            .map(|&xi| {
                let s = (2.0 * xi + n).sqrt();
                let mut total = 0.0;
                let mut j = 1usize;
                while lo * 2f64.powi(j as i32) <= s {
                    if s <= hi * 2f64.powi(j as i32) {
                        let w = self.system.phi_j(j, s);
                        if w != 0.0 {
                            if cache.len() <= j {
                                cache.resize(j + 1, None);
                            }
                            let p = *cache[j].get_or_insert_with(|| self.piece(j, x));
                            total += p * w;
                        }
                    }
                    j += 1;
                }
                Complex64::new(total, 0.0)
            })
            .collect()
    }

    fn descriptor(&self) -> Option<SymbolDescriptor> {
        let system = self.system.descriptor;
        Some(if self.annulus {
            SymbolDescriptor::Annulus {
                frequency: self.frequency,
                system,
            }
        } else {
            SymbolDescriptor::Dyadic {
                delta: self.delta,
                beta: self.beta,
                frequency: self.frequency,
                system,
            }
        })
    }
}

/// `exp(i x.v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatingSymbol {
    pub v: Vec<f64>,
}

impl OscillatingSymbol {
    pub fn new(v: Vec<f64>) -> Self {
        OscillatingSymbol { v }
    }
}

impl Symbol for OscillatingSymbol {
    fn eval(&self, x: &[f64], _xi: f64) -> Complex64 {
        let phase: f64 = x.iter().zip(&self.v).map(|(a, b)| a * b).sum();
        Complex64::new(0.0, phase).exp()
    }

    fn x_derivative(&self, nu: &[usize], x: &[f64], xi: f64) -> Option<Complex64> {
        let factor: Complex64 = nu
            .iter()
            .zip(&self.v)
            .map(|(&k, &v)| Complex64::new(0.0, v).powu(k as u32))
            .product();
        Some(factor * self.eval(x, xi))
    }

    fn descriptor(&self) -> Option<SymbolDescriptor> {
        Some(SymbolDescriptor::Oscillating { v: self.v.clone() })
    }
}

/// A symbol given by an expression in `x1..xn`, `r` and `xi`.
#[derive(Debug, Clone)]
pub struct ExpressionSymbol {
    pub expr: Expr,
    text: String,
}

impl ExpressionSymbol {
    pub fn parse(text: &str) -> Result<Self> {
        let expr = Expr::parse(text)?;
        if expr.mentions(Var::U) {
            return Err(Error::invalid("expression", "`u` is reserved for nonlinearities"));
        }
        Ok(ExpressionSymbol {
            expr,
            text: text.to_string(),
        })
    }
}

impl Symbol for ExpressionSymbol {
    fn eval(&self, x: &[f64], xi: f64) -> Complex64 {
        self.expr.eval(&Bindings { x, xi, u: 0.0 })
    }

    fn depends_on_x(&self) -> bool {
        self.expr.max_coordinate() > 0 || self.expr.mentions(Var::R)
    }

    fn descriptor(&self) -> Option<SymbolDescriptor> {
        Some(SymbolDescriptor::CustomExpression { expr: self.text.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::eigenvalue;
    use crate::pseudomult::{
        apply_multiplier, check_cancellation_class, check_symbol_class, ClassParams, DifferenceConvention, Growth,
        SymbolSample,
    };
    use approx::assert_relative_eq;

    #[test]
    fn descriptors_round_trip() {
        let descs = [
            r#"{"kind":"multiplier","expr":"xi/(1+xi)"}"#,
            r#"{"kind":"separable","radius":2.0,"scale":10.0}"#,
            r#"{"kind":"dyadic","delta":0.5,"beta":1.0,"frequency":1.0}"#,
            r#"{"kind":"annulus","frequency":1.0}"#,
            r#"{"kind":"oscillating","v":[3.0]}"#,
            r#"{"kind":"custom-expression","expr":"cos(x1)*exp(-xi)"}"#,
        ];
        for text in descs {
            let d: SymbolDescriptor = serde_json::from_str(text).unwrap();
            let s = build_symbol(&d, 1, None).unwrap();
            assert_eq!(s.descriptor().unwrap(), d);
        }
        let d: SymbolDescriptor = serde_json::from_str(r#"{"kind":"linearized","h":"u^2"}"#).unwrap();
        assert!(matches!(build_symbol(&d, 1, None), Err(Error::Precondition(_))));
        let bad: SymbolDescriptor = serde_json::from_str(r#"{"kind":"custom-expression","expr":"x3"}"#).unwrap();
        assert!(build_symbol(&bad, 2, None).is_err());
        assert!(Multiplier::from_expr("x1*xi").is_err());
    }

    #[test]
    fn multiplier_parseval() {
        let sym = Multiplier::from_expr("xi/(1+xi)").unwrap();
        let f = SpectralFunction::from_coeffs(
            1,
            8,
            (0..=8).map(|k| (crate::hermite::MultiIndex::new(vec![k]), Complex64::new(1.0, -0.5))),
        )
        .unwrap();
        let g = apply_multiplier(&sym, &f).unwrap();
        let bound = (0..=8).map(|k| sym.eval(&[0.0], eigenvalue(k, 1)).norm()).fold(0.0, f64::max);
        assert!(g.l2_norm() <= bound * f.l2_norm() + 1e-12);
        assert!(g.l2_norm() < f.l2_norm());
    }

    #[test]
    fn separable_class_constants_are_finite() {
        let sym = SeparableSymbol::new(2.0, 10.0).unwrap();
        let sample = SymbolSample::radial(1, 8, 3.0, 60);
        for (m, rho, delta) in [(0.0, 1.0, 0.0), (-2.0, 1.0, 1.0), (0.0, 0.5, 0.5)] {
            let params = ClassParams {
                m,
                rho,
                delta,
                max_kappa: 2,
                max_order: 2,
                growth: Growth::None,
                convention: DifferenceConvention::Integer,
            };
            let r = check_symbol_class(&sym, &params, &sample);
            assert!(r.all_finite() && r.max_constant() < 1e6, "{}", r.max_constant());
        }
    }

    #[test]
    fn polynomial_multiplier_class() {
        let sym = hermite_multiplier(|xi| Complex64::new((1.0 + xi.sqrt()).powf(1.5), 0.0));
        let params = ClassParams {
            m: 1.5,
            rho: 1.0,
            delta: 0.0,
            max_kappa: 3,
            max_order: 0,
            growth: Growth::None,
            convention: DifferenceConvention::Integer,
        };
        let small = check_symbol_class(&sym, &params, &SymbolSample::radial(1, 1, 1.0, 100));
        let large = check_symbol_class(&sym, &params, &SymbolSample::radial(1, 1, 1.0, 1000));
        assert!(large.max_constant() < 1.1 * small.max_constant());
    }

    #[test]
    fn annulus_pieces_are_disjoint() {
        let sym = DyadicSymbol::annulus(AdmissibleSystem::default_system(), 1.0);
        assert_eq!(sym.eval(&[1.5], 30.0), Complex64::new(0.0, 0.0));
        for j in 1..5 {
            let x = [1.5 * 2f64.powi(j)];
            let hits = (1..8).filter(|&l| sym.piece(l, &x) != 0.0).count();
            assert_eq!(hits, 1);
        }
        let points = SymbolSample::radial(1, 6, 12.0, 0).points;
        let xis: Vec<f64> = (0..40).map(|k| eigenvalue(k, 1)).collect();
        let r = check_cancellation_class(&sym, 0.0, 1, &points, &xis).unwrap();
        assert!(r.max_constant().is_finite() && r.max_constant() < 1e4);
    }

    #[test]
    fn dyadic_symbol_sums_windows() {
        let sys = AdmissibleSystem::default_system();
        let sym = DyadicSymbol::graded(sys.clone(), 0.0, 0.0, 0.0).unwrap();
        // sigma_j = 1: the sum of the windows j >= 1 equals 1 - phi_0.
        for xi in [0.0, 3.0, 17.0, 200.0] {
            let s = (2.0 * xi + 1.0f64).sqrt();
            assert_relative_eq!(sym.eval(&[0.4], xi).re, 1.0 - sys.phi0.eval(s), epsilon = 1e-14);
        }
    }

    #[test]
    fn expression_symbol() {
        let s = ExpressionSymbol::parse("xi*r").unwrap();
        assert!(s.depends_on_x());
        assert_eq!(s.eval(&[3.0, 4.0], 2.0).re, 10.0);
        assert!(!ExpressionSymbol::parse("xi^2").unwrap().depends_on_x());
        assert!(ExpressionSymbol::parse("u").is_err());
    }
}
