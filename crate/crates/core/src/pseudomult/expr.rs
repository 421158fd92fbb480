//! A small complex arithmetic expression language for symbols and
//! nonlinearities.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = ("-" | "+") unary | power ;
//! power   = primary [ "^" unary ] ;
//! primary = number | name | name "(" expr ")" | "(" expr ")" ;
//! name    = "x1" | "x2" | ... | "xi" | "r" | "u" | "i" | "pi" ;
//! ```
//!
//! `xi` is the spectral argument, `r = |x|`, `u` the argument of a
//! nonlinearity and `i` the imaginary unit. Functions: `sin cos tan exp log
//! sqrt abs tanh sinh cosh`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
    Sinh,
    Cosh,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "tanh" => Func::Tanh,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Tanh => "tanh",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
        }
    }

    fn apply(self, z: Complex64) -> Complex64 {
        match self {
            Func::Sin => z.sin(),
            Func::Cos => z.cos(),
            Func::Tan => z.tan(),
            Func::Exp => z.exp(),
            Func::Log => z.ln(),
            Func::Sqrt => z.sqrt(),
            Func::Abs => Complex64::new(z.norm(), 0.0),
            Func::Tanh => z.tanh(),
            Func::Sinh => z.sinh(),
            Func::Cosh => z.cosh(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// `x_{i+1}`.
    X(usize),
    Xi,
    R,
    U,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(Complex64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Values bound to the variables during evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bindings<'a> {
    pub x: &'a [f64],
    pub xi: f64,
    pub u: f64,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(z) if z.im == 0.0 => write!(f, "{}", z.re),
            Expr::Num(z) if z.re == 0.0 => write!(f, "({}*i)", z.im),
            Expr::Num(z) => write!(f, "({}+{}*i)", z.re, z.im),
            Expr::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            Expr::Var(Var::Xi) => write!(f, "xi"),
            Expr::Var(Var::R) => write!(f, "r"),
            Expr::Var(Var::U) => write!(f, "u"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a}+{b})"),
            Expr::Sub(a, b) => write!(f, "({a}-{b})"),
            Expr::Mul(a, b) => write!(f, "({a}*{b})"),
            Expr::Div(a, b) => write!(f, "({a}/{b})"),
            Expr::Pow(a, b) => write!(f, "({a}^{b})"),
            Expr::Call(g, a) => write!(f, "{}({a})", g.name()),
        }
    }
}

fn num(v: f64) -> Expr {
    Expr::Num(Complex64::new(v, 0.0))
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(z) if *z == Complex64::new(v, 0.0))
}

fn add(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        b
    } else if is_num(&b, 0.0) {
        a
    } else {
        Expr::Add(Box::new(a), Box::new(b))
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if is_num(&b, 0.0) {
        a
    } else if is_num(&a, 0.0) {
        Expr::Neg(Box::new(b))
    } else {
        Expr::Sub(Box::new(a), Box::new(b))
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) || is_num(&b, 0.0) {
        num(0.0)
    } else if is_num(&a, 1.0) {
        b
    } else if is_num(&b, 1.0) {
        a
    } else {
        Expr::Mul(Box::new(a), Box::new(b))
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        num(0.0)
    } else {
        Expr::Div(Box::new(a), Box::new(b))
    }
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr> {
        let mut p = Parser { text, pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != text.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, b: &Bindings<'_>) -> Complex64 {
        match self {
            Expr::Num(z) => *z,
            Expr::Var(Var::X(i)) => Complex64::new(b.x.get(*i).copied().unwrap_or(f64::NAN), 0.0),
            Expr::Var(Var::Xi) => Complex64::new(b.xi, 0.0),
            Expr::Var(Var::R) => Complex64::new(b.x.iter().map(|t| t * t).sum::<f64>().sqrt(), 0.0),
            Expr::Var(Var::U) => Complex64::new(b.u, 0.0),
            Expr::Neg(a) => -a.eval(b),
            Expr::Add(l, r) => l.eval(b) + r.eval(b),
            Expr::Sub(l, r) => l.eval(b) - r.eval(b),
            Expr::Mul(l, r) => l.eval(b) * r.eval(b),
            Expr::Div(l, r) => l.eval(b) / r.eval(b),
            Expr::Pow(l, r) => {
                let base = l.eval(b);
                let e = r.eval(b);
                if e.im == 0.0 && e.re.fract() == 0.0 && e.re.abs() < 64.0 {
                    base.powi(e.re as i32)
                } else if base.im == 0.0 && base.re >= 0.0 && e.im == 0.0 {
                    Complex64::new(base.re.powf(e.re), 0.0)
                } else {
                    base.powc(e)
                }
            }
            Expr::Call(g, a) => g.apply(a.eval(b)),
        }
    }

    /// Largest `i` such that `x_i` occurs (0 if none).
    pub fn max_coordinate(&self) -> usize {
        match self {
            Expr::Var(Var::X(i)) => i + 1,
            Expr::Num(_) | Expr::Var(_) => 0,
            Expr::Neg(a) | Expr::Call(_, a) => a.max_coordinate(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.max_coordinate().max(b.max_coordinate())
            }
        }
    }

    pub fn mentions(&self, v: Var) -> bool {
        match self {
            Expr::Var(w) => *w == v || (v != Var::R && matches!((w, v), (Var::R, Var::X(_)))),
            Expr::Num(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.mentions(v),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.mentions(v) || b.mentions(v)
            }
        }
    }

    /// Symbolic derivative in `u`. `abs` is differentiated as `sign(u)`,
    /// which is only meaningful away from zero.
    pub fn derivative_u(&self) -> Result<Expr> {
        Ok(match self {
            Expr::Num(_) => num(0.0),
            Expr::Var(Var::U) => num(1.0),
            Expr::Var(_) => num(0.0),
            Expr::Neg(a) => {
                let d = a.derivative_u()?;
                if is_num(&d, 0.0) {
                    d
                } else {
                    Expr::Neg(Box::new(d))
                }
            }
            Expr::Add(a, b) => add(a.derivative_u()?, b.derivative_u()?),
            Expr::Sub(a, b) => sub(a.derivative_u()?, b.derivative_u()?),
            Expr::Mul(a, b) => add(
                mul(a.derivative_u()?, (**b).clone()),
                mul((**a).clone(), b.derivative_u()?),
            ),
            Expr::Div(a, b) => div(
                sub(
                    mul(a.derivative_u()?, (**b).clone()),
                    mul((**a).clone(), b.derivative_u()?),
                ),
                Expr::Pow(b.clone(), Box::new(num(2.0))),
            ),
            Expr::Pow(a, b) => {
                if b.mentions(Var::U) {
                    // d(a^b) = a^b (b' log a + b a'/a)
                    let la = Expr::Call(Func::Log, a.clone());
                    mul(
                        self.clone(),
                        add(
                            mul(b.derivative_u()?, la),
                            div(mul((**b).clone(), a.derivative_u()?), (**a).clone()),
                        ),
                    )
                } else {
                    let lowered = Expr::Pow(a.clone(), Box::new(sub((**b).clone(), num(1.0))));
                    mul(mul((**b).clone(), lowered), a.derivative_u()?)
                }
            }
            Expr::Call(g, a) => {
                let inner = a.derivative_u()?;
                if is_num(&inner, 0.0) {
                    return Ok(num(0.0));
                }
                let outer = match g {
                    Func::Sin => Expr::Call(Func::Cos, a.clone()),
                    Func::Cos => Expr::Neg(Box::new(Expr::Call(Func::Sin, a.clone()))),
                    Func::Tan => div(num(1.0), Expr::Pow(Box::new(Expr::Call(Func::Cos, a.clone())), Box::new(num(2.0)))),
                    Func::Exp => Expr::Call(Func::Exp, a.clone()),
                    Func::Log => div(num(1.0), (**a).clone()),
                    Func::Sqrt => div(num(0.5), Expr::Call(Func::Sqrt, a.clone())),
                    Func::Abs => div((**a).clone(), Expr::Call(Func::Abs, a.clone())),
                    Func::Tanh => sub(num(1.0), Expr::Pow(Box::new(Expr::Call(Func::Tanh, a.clone())), Box::new(num(2.0)))),
                    Func::Sinh => Expr::Call(Func::Cosh, a.clone()),
                    Func::Cosh => Expr::Call(Func::Sinh, a.clone()),
                };
                mul(outer, inner)
            }
        })
    }
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Expression {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.eat('^') {
            return Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let rest = &self.text[start..];
                let mut end = rest
                    .find(|ch: char| !(ch.is_ascii_digit() || ch == '.'))
                    .unwrap_or(rest.len());
                // Exponent part.
                if rest[end..].starts_with(['e', 'E']) {
                    let tail = &rest[end + 1..];
                    let sign = usize::from(tail.starts_with(['+', '-']));
                    let digits = tail[sign..].find(|ch: char| !ch.is_ascii_digit()).unwrap_or(tail.len() - sign);
                    if digits > 0 {
                        end += 1 + sign + digits;
                    }
                }
                let v: f64 = rest[..end].parse().map_err(|_| self.error("malformed number"))?;
                self.pos += end;
                Ok(num(v))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let rest = &self.text[start..];
                let end = rest
                    .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                    .unwrap_or(rest.len());
                let name = &rest[..end];
                self.pos += end;
                if let Some(g) = Func::from_name(name) {
                    if !self.eat('(') {
                        return Err(self.error("expected `(` after function name"));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(self.error("expected `)`"));
                    }
                    return Ok(Expr::Call(g, Box::new(arg)));
                }
                match name {
                    "xi" => Ok(Expr::Var(Var::Xi)),
                    "r" => Ok(Expr::Var(Var::R)),
                    "u" => Ok(Expr::Var(Var::U)),
                    "i" => Ok(Expr::Num(Complex64::new(0.0, 1.0))),
                    "pi" => Ok(num(std::f64::consts::PI)),
                    _ => {
                        if let Some(d) = name.strip_prefix('x') {
                            if let Ok(i) = d.parse::<usize>() {
                                if i >= 1 {
                                    return Ok(Expr::Var(Var::X(i - 1)));
                                }
                            }
                        }
                        self.pos = start;
                        Err(self.error(&format!("unknown name `{name}`")))
                    }
                }
            }
            Some(c) => Err(self.error(&format!("unexpected character `{c}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn eval_u(text: &str, u: f64) -> Complex64 {
        Expr::parse(text).unwrap().eval(&Bindings { u, ..Default::default() })
    }

    #[test]
    fn precedence_and_functions() {
        assert_eq!(eval_u("1+2*3^2", 0.0).re, 19.0);
        assert_eq!(eval_u("-2^2", 0.0).re, -4.0);
        assert_eq!(eval_u("2^-1", 0.0).re, 0.5);
        assert_relative_eq!(eval_u("exp(log(3))", 0.0).re, 3.0, epsilon = 1e-15);
        assert_relative_eq!(eval_u("1.5e-1*u", 2.0).re, 0.3, epsilon = 1e-15);
        let z = Expr::parse("exp(i*pi)").unwrap().eval(&Bindings::default());
        assert_relative_eq!(z.re, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn variables() {
        let e = Expr::parse("x1*xi + r").unwrap();
        let v = e.eval(&Bindings { x: &[3.0, 4.0], xi: 2.0, u: 0.0 });
        assert_eq!(v.re, 11.0);
        assert_eq!(e.max_coordinate(), 1);
        assert!(e.mentions(Var::Xi));
        assert!(!Expr::parse("xi/(1+xi)").unwrap().mentions(Var::X(0)));
        assert!(Expr::parse("r").unwrap().mentions(Var::X(1)));
    }

    #[test]
    fn errors_carry_offsets() {
        let err = Expr::parse("1 + foo").unwrap_err();
        assert!(matches!(err, Error::Expression { offset: 4, .. }), "{err:?}");
        assert!(matches!(Expr::parse("(1+2"), Err(Error::Expression { .. })));
        assert!(matches!(Expr::parse("1 2"), Err(Error::Expression { offset: 2, .. })));
        assert!(matches!(Expr::parse("x0"), Err(Error::Expression { .. })));
        assert!(matches!(Expr::parse(""), Err(Error::Expression { .. })));
    }

    #[test]
    fn display_reparses() {
        let e = Expr::parse("sin(u)^2 - 3*u/(1+u^2)").unwrap();
        let back = Expr::parse(&e.to_string()).unwrap();
        for u in [-1.3, 0.0, 0.7] {
            assert_eq!(eval_u(&e.to_string(), u), back.eval(&Bindings { u, ..Default::default() }));
        }
    }

    proptest! {
        #[test]
        fn derivative_matches_difference(u in -1.5..1.5f64, which in 0usize..6) {
            let texts = ["u^2", "u^3 - u", "sin(u)*exp(u)", "u/(2+u^2)", "tanh(u)^3", "sqrt(4+u)*cos(2*u)"];
            let e = Expr::parse(texts[which]).unwrap();
            let d = e.derivative_u().unwrap();
            let h = 1e-5;
            let at = |t: f64| e.eval(&Bindings { u: t, ..Default::default() }).re;
            let fd = (at(u + h) - at(u - h)) / (2.0 * h);
            let exact = d.eval(&Bindings { u, ..Default::default() }).re;
            prop_assert!((fd - exact).abs() < 1e-6 * (1.0 + exact.abs()));
        }
    }
}
