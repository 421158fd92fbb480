//! `H(f) = T_{sigma_f} f` for real `f` and smooth `H` with `H(0) = 0`.

use num_complex::Complex64;

use super::expr::{Bindings, Expr, Var};
use super::symbols::SymbolDescriptor;
use super::Symbol;
use crate::error::{Error, Result};
use crate::hermite::{gauss_legendre, GaussRule, SpectralFunction};
use crate::lp::{apply_lp, AdmissibleSystem};

/// A scalar nonlinearity `H(u)` given as an expression in `u`, with its
/// symbolic derivative.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    text: String,
    h: Expr,
    dh: Expr,
}

impl Nonlinearity {
    pub fn parse(text: &str) -> Result<Self> {
        let h = Expr::parse(text)?;
        if h.max_coordinate() > 0 || h.mentions(Var::Xi) || h.mentions(Var::R) {
            return Err(Error::invalid("nonlinearity", "expression may only use u"));
        }
        let dh = h.derivative_u()?;
        Ok(Nonlinearity {
            text: text.to_string(),
            h,
            dh,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn value(&self, u: f64) -> f64 {
        self.h.eval(&Bindings { x: &[], xi: 0.0, u }).re
    }

    pub fn derivative(&self, u: f64) -> f64 {
        self.dh.eval(&Bindings { x: &[], xi: 0.0, u }).re
    }
}

/// `sigma_f(x, xi) = sum_j m_j(x) phi_j(sqrt xi)` with
/// `m_j = int_0^1 H'(f_{j-1} + t phi_j(sqrt L) f) dt`. The second argument
/// is the eigenvalue, so `T_{sigma_f}` samples `phi_j(sqrt(lambda_k))`.
#[derive(Debug, Clone)]
pub struct LinearizedSymbol {
    system: AdmissibleSystem,
    h: Nonlinearity,
    pieces: Vec<SpectralFunction>,
    rule: GaussRule,
}

/// Builds `sigma_f`; `levels` defaults to the smallest count covering `f`.
pub fn linearize_nonlinearity(
    h: &Nonlinearity,
    f: &SpectralFunction,
    sys: &AdmissibleSystem,
    levels: Option<usize>,
    t_points: usize,
) -> Result<LinearizedSymbol> {
    let h0 = h.value(0.0);
    if h0.abs() > 1e-14 {
        return Err(Error::Precondition(format!("nonlinearity must vanish at 0, H(0) = {h0}")));
    }
    if f.coeffs().any(|(_, c)| c.im != 0.0) {
        return Err(Error::Precondition("the function must be real".into()));
    }
    let k = f.occupied_degree().unwrap_or(0);
    let needed = sys
        .levels_for_degree(k, f.dim())
        .ok_or_else(|| Error::Precondition(format!("degree {k} is not covered by the system")))?;
    let levels = levels.unwrap_or(needed);
    if levels < needed {
        return Err(Error::Precondition(format!(
            "levels 0..={levels} do not cover degree {k}; need {needed}"
        )));
    }
    let rule = gauss_legendre(t_points)?.on_interval(0.0, 1.0);
    let pieces = (0..=levels).map(|j| apply_lp(sys, j, f)).collect();
    Ok(LinearizedSymbol {
        system: sys.clone(),
        h: h.clone(),
        pieces,
        rule,
    })
}

impl LinearizedSymbol {
    pub fn levels(&self) -> usize {
        self.pieces.len() - 1
    }

    /// `m_j(x)` for `j = 0..=J`.
    pub fn multipliers(&self, x: &[f64]) -> Vec<f64> {
        let mut below = 0.0;
        self.pieces
            .iter()
            .map(|p| {
                let v = if p.is_empty() { 0.0 } else { p.eval(x).map(|z| z.re).unwrap_or(f64::NAN) };
                let m: f64 = self
                    .rule
                    .nodes
                    .iter()
                    .zip(&self.rule.weights)
                    .map(|(&t, &w)| w * self.h.derivative(below + t * v))
                    .sum();
                below += v;
                m
            })
            .collect()
    }
}

impl Symbol for LinearizedSymbol {
    fn eval(&self, x: &[f64], xi: f64) -> Complex64 {
        self.eval_many(x, &[xi])[0]
    }

    fn eval_many(&self, x: &[f64], xis: &[f64]) -> Vec<Complex64> {
        let m = self.multipliers(x);
        xis.iter()
            .map(|&xi| {
                let s = xi.max(0.0).sqrt();
                Complex64::new(m.iter().enumerate().map(|(j, mj)| mj * self.system.phi_j(j, s)).sum(), 0.0)
            })
            .collect()
    }

    fn descriptor(&self) -> Option<SymbolDescriptor> {
        Some(SymbolDescriptor::Linearized {
            h: self.h.text().to_string(),
            levels: Some(self.levels()),
            t_points: self.rule.nodes.len(),
            system: self.system.descriptor,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{MultiIndex, TensorGrid};
    use crate::pseudomult::apply_pseudomultiplier;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_real(k_max: usize, seed: u64) -> SpectralFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SpectralFunction::from_coeffs(
            1,
            k_max,
            (0..=k_max).map(|k| (MultiIndex::new(vec![k]), Complex64::new(rng.gen_range(-1.0..1.0), 0.0))),
        )
        .unwrap()
    }

    fn error(h: &str, f: &SpectralFunction, t_points: usize) -> f64 {
        let sys = AdmissibleSystem::default_system();
        let nl = Nonlinearity::parse(h).unwrap();
        let sym = linearize_nonlinearity(&nl, f, &sys, None, t_points).unwrap();
        let grid = TensorGrid::uniform(1, 6.0, 121).unwrap();
        let g = apply_pseudomultiplier(&sym, f, &grid).unwrap();
        let fv = f.eval_grid(&grid).unwrap();
        g.samples
            .iter()
            .zip(&fv.samples)
            .map(|(a, b)| (a - Complex64::new(nl.value(b.re), 0.0)).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn identity_nonlinearity() {
        let sys = AdmissibleSystem::default_system();
        let f = random_real(10, 1);
        let sym = linearize_nonlinearity(&Nonlinearity::parse("u").unwrap(), &f, &sys, None, 16).unwrap();
        for k in 0..=10 {
            let v = sym.eval(&[0.3], crate::hermite::eigenvalue(k, 1));
            assert!((v.re - 1.0).abs() < 1e-14);
        }
        assert!(error("u", &f, 16) < 1e-12);
    }

    #[test]
    fn square_of_h0() {
        let h0 = SpectralFunction::basis(MultiIndex::zero(1));
        assert!(error("u^2", &h0, 16) < 1e-6);
    }

    #[test]
    fn polynomial_and_smooth_nonlinearities() {
        for seed in 0..3 {
            let f = random_real(10, seed);
            assert!(error("u^3", &f, 16) < 1e-6);
            let coarse = error("sin(u)", &f, 4);
            let fine = error("sin(u)", &f, 8);
            assert!(fine <= 0.5 * coarse || fine < 1e-12, "{coarse} -> {fine}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let sys = AdmissibleSystem::default_system();
        let f = random_real(4, 0);
        let shifted = Nonlinearity::parse("u^3 - u + 1").unwrap();
        assert!(matches!(
            linearize_nonlinearity(&shifted, &f, &sys, None, 16),
            Err(Error::Precondition(_))
        ));
        let complex = f.scale(Complex64::new(0.0, 1.0));
        let sq = Nonlinearity::parse("u^2").unwrap();
        assert!(linearize_nonlinearity(&sq, &complex, &sys, None, 16).is_err());
        assert!(linearize_nonlinearity(&sq, &f, &sys, Some(0), 16).is_err());
        assert!(Nonlinearity::parse("u*x1").is_err());
    }
}
