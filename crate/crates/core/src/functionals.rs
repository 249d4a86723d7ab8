//! Test functions `f` with symbolic derivatives, their Hermite coefficients,
//! and the `--function` mini-grammar:
//!
//! ```text
//! mono:<q>              x^q, q >= 2
//! poly:<c1>,<c2>,...    c1 x + c2 x^2 + ...
//! sin                   sin(x)
//! sinpoly:<a>,<b>       a sin(x) + b x^3
//! ```

use std::fmt;

use crate::error::{LabError, Result};
use crate::gaussian_theory::quadrature::QuadratureRule;
use crate::gaussian_theory::TheoryEngine;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    None,
}

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    /// `derivs[k]` holds the coefficients of the k-th derivative, lowest power first.
    Polynomial { derivs: [Vec<f64>; 4] },
    /// `a sin(x) + b x^3`
    SinPoly { a: f64, b: f64 },
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn differentiate(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, c)| j as f64 * c)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    name: String,
    shape: Shape,
    growth_exponent: f64,
    parity: Parity,
    max_derivative: u8,
}

impl TestFunction {
    /// `Σ_j coeffs[j] x^j`; `coeffs[0]` must be 0.
    pub fn polynomial(name: impl Into<String>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.first().copied().unwrap_or(0.0) != 0.0 {
            return Err(LabError::InvalidArgument("f(0) must vanish".into()));
        }
        let degree = coeffs.iter().rposition(|c| *c != 0.0).unwrap_or(0);
        let has_even = coeffs.iter().enumerate().any(|(j, c)| j % 2 == 0 && *c != 0.0);
        let has_odd = coeffs.iter().enumerate().any(|(j, c)| j % 2 == 1 && *c != 0.0);
        let parity = match (has_even, has_odd) {
            (_, false) => Parity::Even,
            (false, true) => Parity::Odd,
            (true, true) => Parity::None,
        };
        let d1 = differentiate(&coeffs);
        let d2 = differentiate(&d1);
        let d3 = differentiate(&d2);
        Ok(Self {
            name: name.into(),
            shape: Shape::Polynomial {
                derivs: [coeffs, d1, d2, d3],
            },
            growth_exponent: degree as f64,
            parity,
            max_derivative: 3,
        })
    }

    pub fn sin_poly(a: f64, b: f64) -> Self {
        Self {
            name: format!("sinpoly:{a},{b}"),
            shape: Shape::SinPoly { a, b },
            growth_exponent: if b != 0.0 { 3.0 } else { 0.0 },
            parity: Parity::Odd,
            max_derivative: 3,
        }
    }

    pub fn sin() -> Self {
        Self {
            name: "sin".into(),
            ..Self::sin_poly(1.0, 0.0)
        }
    }

    /// Drop derivatives above `order`, e.g. to model a C¹-only function.
    pub fn with_max_derivative(mut self, order: u8) -> Self {
        self.max_derivative = order.min(self.max_derivative);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn growth_exponent(&self) -> f64 {
        self.growth_exponent
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn max_derivative(&self) -> u8 {
        self.max_derivative
    }

    /// Polynomial degree, if `f` is a polynomial.
    pub fn degree(&self) -> Option<usize> {
        match &self.shape {
            Shape::Polynomial { derivs } => Some(derivs[0].iter().rposition(|c| *c != 0.0).unwrap_or(0)),
            Shape::SinPoly { .. } => None,
        }
    }

    /// Exponent `q` if `f(x) = x^q`.
    pub fn monomial_power(&self) -> Option<usize> {
        match &self.shape {
            Shape::Polynomial { derivs } => {
                let nz: Vec<usize> = derivs[0]
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c != 0.0)
                    .map(|(j, _)| j)
                    .collect();
                (nz.len() == 1 && derivs[0][nz[0]] == 1.0).then_some(nz[0])
            }
            Shape::SinPoly { .. } => None,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_unchecked(0, x)
    }

    /// `f^{(order)}(x)`; `order = 0` is `f` itself.
    pub fn derivative(&self, order: u8, x: f64) -> Result<f64> {
        self.require(order)?;
        Ok(self.eval_unchecked(order, x))
    }

    pub fn d1(&self, x: f64) -> Result<f64> {
        self.derivative(1, x)
    }

    pub fn d2(&self, x: f64) -> Result<f64> {
        self.derivative(2, x)
    }

    pub fn d3(&self, x: f64) -> Result<f64> {
        self.derivative(3, x)
    }

    pub fn require(&self, order: u8) -> Result<()> {
        if order > self.max_derivative {
            Err(LabError::MissingDerivative {
                function: self.name.clone(),
                order,
            })
        } else {
            Ok(())
        }
    }

    /// Evaluator for `f^{(order)}` after the capability check.
    pub fn derivative_fn(&self, order: u8) -> Result<impl Fn(f64) -> f64 + '_> {
        self.require(order)?;
        Ok(move |x| self.eval_unchecked(order, x))
    }

    pub(crate) fn eval_unchecked(&self, order: u8, x: f64) -> f64 {
        match &self.shape {
            Shape::Polynomial { derivs } => horner(&derivs[order as usize], x),
            Shape::SinPoly { a, b } => match order {
                0 => a * x.sin() + b * x * x * x,
                1 => a * x.cos() + 3.0 * b * x * x,
                2 => -a * x.sin() + 6.0 * b * x,
                _ => -a * x.cos() + 6.0 * b,
            },
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

pub fn make_monomial(q: usize) -> Result<TestFunction> {
    if q < 2 {
        return Err(LabError::InvalidArgument(format!("monomial power must be >= 2, got {q}")));
    }
    let mut coeffs = vec![0.0; q + 1];
    coeffs[q] = 1.0;
    TestFunction::polynomial(format!("mono:{q}"), coeffs)
}

fn parse_err(position: usize, message: impl Into<String>) -> LabError {
    LabError::Parse {
        position,
        message: message.into(),
    }
}

/// Comma-separated reals starting at byte offset `start` of the full text.
fn parse_list(body: &str, start: usize) -> Result<Vec<f64>> {
    if body.trim().is_empty() {
        return Err(parse_err(start, "expected a comma-separated list of numbers"));
    }
    let mut out = Vec::new();
    let mut offset = start;
    for item in body.split(',') {
        let lead = item.len() - item.trim_start().len();
        let value: f64 = item
            .trim()
            .parse()
            .map_err(|_| parse_err(offset + lead, format!("`{}` is not a number", item.trim())))?;
        if !value.is_finite() {
            return Err(parse_err(offset + lead, "coefficients must be finite"));
        }
        out.push(value);
        offset += item.len() + 1;
    }
    Ok(out)
}

pub fn parse_function_spec(text: &str) -> Result<TestFunction> {
    let trimmed = text.trim();
    let base = text.len() - text.trim_start().len();
    let (head, body) = match trimmed.split_once(':') {
        Some((h, b)) => (h, Some(b)),
        None => (trimmed, None),
    };
    let body_pos = base + head.len() + 1;
    match (head, body) {
        ("mono", Some(b)) => {
            let q: usize = b
                .trim()
                .parse()
                .map_err(|_| parse_err(body_pos, format!("`{b}` is not a nonnegative integer")))?;
            if q < 2 {
                return Err(parse_err(body_pos, "monomial power must be >= 2"));
            }
            make_monomial(q)
        }
        ("poly", Some(b)) => {
            let cs = parse_list(b, body_pos)?;
            let mut coeffs = Vec::with_capacity(cs.len() + 1);
            coeffs.push(0.0);
            coeffs.extend(cs);
            TestFunction::polynomial(format!("poly:{}", b.trim()), coeffs)
        }
        ("sin", None) => Ok(TestFunction::sin()),
        ("sinpoly", Some(b)) => {
            let cs = parse_list(b, body_pos)?;
            if cs.len() != 2 {
                return Err(parse_err(body_pos, "sinpoly takes exactly two coefficients a,b"));
            }
            Ok(TestFunction::sin_poly(cs[0], cs[1]))
        }
        ("sin", Some(_)) => Err(parse_err(base + 3, "`sin` takes no arguments")),
        ("mono" | "poly" | "sinpoly", None) => {
            Err(parse_err(base + head.len(), "expected `:` followed by arguments"))
        }
        _ => Err(parse_err(
            base,
            format!("unknown function `{head}` (expected mono, poly, sin or sinpoly)"),
        )),
    }
}

/// Projections `b_k = E[f(uN) He_k(N)]` for `k = 1..=K`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermiteCoefficients {
    pub scale: f64,
    pub coefficients: Vec<f64>,
    pub truncation: usize,
    /// `b_K^2 / (K! (K+1))`, the size of the last retained series term.
    pub tail_estimate: f64,
}

impl HermiteCoefficients {
    /// `b_k` for `k >= 1`.
    pub fn get(&self, k: usize) -> f64 {
        self.coefficients[k - 1]
    }
}

/// Highest polynomial degree a rule integrates exactly.
fn exact_degree(rule: &QuadratureRule) -> f64 {
    (2 * rule.order() - 1) as f64
}

pub fn hermite_coeffs(f: &TestFunction, u: f64, k_max: usize) -> Result<HermiteCoefficients> {
    hermite_coeffs_with(TheoryEngine::shared(), f, u, k_max)
}

pub fn hermite_coeffs_with(
    engine: &TheoryEngine,
    f: &TestFunction,
    u: f64,
    k_max: usize,
) -> Result<HermiteCoefficients> {
    if k_max == 0 {
        return Err(LabError::InvalidArgument("truncation K must be >= 1".into()));
    }
    if !(u >= 0.0) {
        return Err(LabError::InvalidArgument(format!("scale must be nonnegative, got {u}")));
    }
    if f.growth_exponent() + k_max as f64 > exact_degree(engine.rule()) {
        return Err(LabError::Configuration(format!(
            "Gauss-Hermite order {} cannot resolve growth {} with K = {k_max}",
            engine.rule().order(),
            f.growth_exponent()
        )));
    }
    // He_k is orthogonal to every polynomial of lower degree.
    let computed = f.degree().map_or(k_max, |d| d.min(k_max));
    let mut normalized = engine.normalized_hermite(|x| f.eval(x), u, computed);
    normalized.resize(k_max + 1, 0.0);
    let mut log_fact = 0.0;
    let mut coefficients = Vec::with_capacity(k_max);
    for (k, c) in normalized.iter().enumerate().skip(1) {
        log_fact += (k as f64).ln();
        coefficients.push(c * (0.5 * log_fact).exp());
    }
    let c_last = normalized[k_max];
    Ok(HermiteCoefficients {
        scale: u,
        coefficients,
        truncation: k_max,
        tail_estimate: c_last * c_last / (k_max as f64 + 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn monomials() {
        let f = make_monomial(2).unwrap();
        assert_eq!(f.eval(3.0), 9.0);
        assert_eq!(f.d1(3.0).unwrap(), 6.0);
        assert_eq!(f.parity(), Parity::Even);
        assert_eq!(make_monomial(3).unwrap().parity(), Parity::Odd);
        let f4 = make_monomial(4).unwrap();
        assert_eq!(f4.d3(1.5).unwrap(), 24.0 * 1.5);
        assert_eq!(f4.growth_exponent(), 4.0);
        assert_eq!(f4.monomial_power(), Some(4));
        assert!(make_monomial(1).is_err());
    }

    #[test]
    fn parse_catalog() {
        let f = parse_function_spec("mono:2").unwrap();
        assert_eq!(f.eval(-3.0), 9.0);
        let f = parse_function_spec("poly:0,1,1").unwrap();
        assert_eq!(f.eval(2.0), 12.0);
        assert_eq!(f.d1(1.0).unwrap(), 5.0);
        assert_eq!(f.parity(), Parity::None);
        assert_eq!(f.monomial_power(), None);
        let f = parse_function_spec("sinpoly:1,1").unwrap();
        assert_abs_diff_eq!(f.eval(1.0), 1f64.sin() + 1.0, epsilon = 1e-15);
        assert_eq!(parse_function_spec("sin").unwrap().parity(), Parity::Odd);
    }

    #[test]
    fn parse_errors_carry_position() {
        assert!(matches!(
            parse_function_spec("poly:"),
            Err(LabError::Parse { position: 5, .. })
        ));
        assert!(matches!(
            parse_function_spec("poly:1,x"),
            Err(LabError::Parse { position: 7, .. })
        ));
        assert!(matches!(
            parse_function_spec("mono:1"),
            Err(LabError::Parse { position: 5, .. })
        ));
        assert!(matches!(
            parse_function_spec("cos"),
            Err(LabError::Parse { position: 0, .. })
        ));
        assert!(parse_function_spec("sinpoly:1").is_err());
        assert!(parse_function_spec("mono").is_err());
    }

    #[test]
    fn f_vanishes_at_origin() {
        for spec in ["mono:2", "mono:5", "poly:0,1,1", "poly:-2,0.5", "sin", "sinpoly:2,-1"] {
            assert_eq!(parse_function_spec(spec).unwrap().eval(0.0), 0.0, "{spec}");
        }
        assert!(TestFunction::polynomial("bad", vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn capability_limits() {
        let f = make_monomial(3).unwrap().with_max_derivative(1);
        assert!(f.d1(1.0).is_ok());
        assert!(matches!(f.d2(1.0), Err(LabError::MissingDerivative { order: 2, .. })));
    }

    #[test]
    fn hermite_coefficients_of_monomials() {
        let c = hermite_coeffs(&make_monomial(2).unwrap(), 1.0, 40).unwrap();
        assert_abs_diff_eq!(c.get(2), 2.0, epsilon = 1e-12);
        for k in (1..=40).filter(|k| *k != 2) {
            assert!(c.get(k).abs() <= 1e-12, "b_{k} = {}", c.get(k));
        }
        let c = hermite_coeffs(&make_monomial(3).unwrap(), 1.0, 40).unwrap();
        assert_abs_diff_eq!(c.get(1), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.get(3), 6.0, epsilon = 1e-12);
        assert!(c.tail_estimate.abs() < 1e-20);
    }

    #[test]
    fn even_function_has_no_odd_coefficients() {
        let f = parse_function_spec("poly:0,2,0,-1").unwrap();
        assert_eq!(f.parity(), Parity::Even);
        let c = hermite_coeffs(&f, 1.3, 30).unwrap();
        for k in (1..=30).step_by(2) {
            assert!(c.get(k).abs() <= 1e-12);
        }
        let c = hermite_coeffs(&TestFunction::sin(), 0.7, 30).unwrap();
        for k in (2..=30).step_by(2) {
            assert!(c.get(k).abs() <= 1e-12);
        }
    }

    #[test]
    fn insufficient_quadrature_order() {
        let f = make_monomial(250).unwrap();
        assert!(matches!(
            hermite_coeffs(&f, 1.0, 40),
            Err(LabError::Configuration(_))
        ));
    }
}
