//! Deterministic limit quantities of the local-time increment statistic.
//!
//! Everything here is a Gaussian expectation evaluated by quadrature:
//!
//! * `rho_u(f) = E[f(u N)]`
//! * `v_x^2 = 2 ∫_0^1 cov(f(x B_1), f(x (B_{s+1} - B_s))) ds`, by a Hermite
//!   series (default) or by direct two-dimensional quadrature (oracle route)
//! * `w_u = u rho_u(f')` and the conditional variance density `v_u^2 - w_u^2`
//! * `G(u) = ∫_0^u rho_{2 sqrt(x)}(f') dx`
//! * the monomial constants `a_{q,k}` and `c_q`
//!
//! The series route uses `cov(f(xX), f(xY)) = Σ_k c^k b_k^2 / k!` for a
//! standard Gaussian pair with correlation `c`, together with
//! `cov(B_1, B_{s+1} - B_s) = 1 - s`, so that the `s` integral of `c^k` is
//! `1 / (k + 1)`.

pub mod quadrature;

use std::io::Write;
use std::sync::OnceLock;

use crate::error::{LabError, Result};
use crate::functionals::TestFunction;
use quadrature::{adaptive_simpson, gauss_hermite, gauss_legendre, QuadratureRule};

pub const DEFAULT_HERMITE_ORDER: usize = 128;
pub const DEFAULT_TRUNCATION: usize = 40;
pub const BIG_G_TOLERANCE: f64 = 1e-10;
const DIRECT_ORDER: usize = 64;
const DIRECT_TIME_ORDER: usize = 64;
/// Relative size of the last series term above which `v^2` is flagged.
const SERIES_TAIL_TOLERANCE: f64 = 1e-12;

/// `cov(B_1, B_{s+1} - B_s)` for a standard Brownian motion and `s ∈ [0, 1]`.
pub fn increment_correlation(s: f64) -> f64 {
    1.0 - s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VMethod {
    Series,
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VSquared {
    pub value: f64,
    /// Last retained series term (zero for the direct route).
    pub tail_estimate: f64,
    pub accurate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitQuantities {
    pub u: f64,
    pub rho: f64,
    pub rho_prime: f64,
    pub w: f64,
    pub v2: f64,
    pub cond_var: f64,
}

/// Quadrature rules plus truncation settings. Immutable once built; share a
/// reference freely across threads.
#[derive(Clone, Debug)]
pub struct TheoryEngine {
    rule: QuadratureRule,
    direct_rule: QuadratureRule,
    time_rule: (Vec<f64>, Vec<f64>),
    truncation: usize,
}

impl Default for TheoryEngine {
    fn default() -> Self {
        Self::new(DEFAULT_HERMITE_ORDER, DEFAULT_TRUNCATION)
    }
}

impl TheoryEngine {
    pub fn new(order: usize, truncation: usize) -> Self {
        Self {
            rule: gauss_hermite(order),
            direct_rule: gauss_hermite(DIRECT_ORDER),
            time_rule: gauss_legendre(DIRECT_TIME_ORDER, 0.0, 1.0),
            truncation,
        }
    }

    /// Process-wide engine with the default settings.
    pub fn shared() -> &'static TheoryEngine {
        static SHARED: OnceLock<TheoryEngine> = OnceLock::new();
        SHARED.get_or_init(TheoryEngine::default)
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// `E[g(u N)]`.
    pub fn gaussian_expectation<G: Fn(f64) -> f64>(&self, g: G, u: f64) -> f64 {
        if u == 0.0 {
            return g(0.0);
        }
        self.rule.expect(|x| g(u * x))
    }

    /// `c_k = E[g(uN) He_k(N)] / sqrt(k!)` for `k = 0..=k_max`.
    ///
    /// Uses `h_k(-x) = (-1)^k h_k(x)`, so parity-forced zeros are exact.
    pub fn normalized_hermite<G: Fn(f64) -> f64>(&self, g: G, u: f64, k_max: usize) -> Vec<f64> {
        let mut c = vec![0.0; k_max + 1];
        for (x, w) in self.rule.positive_half() {
            let gp = g(u * x);
            let gm = g(-u * x);
            let even = w * (gp + gm);
            let odd = w * (gp - gm);
            if even == 0.0 && odd == 0.0 {
                continue;
            }
            // Normalized recurrence: h_{k+1} = (x h_k - sqrt(k) h_{k-1}) / sqrt(k+1).
            let mut prev = 0.0;
            let mut cur = 1.0;
            c[0] += even;
            for (k, ck) in c.iter_mut().enumerate().skip(1) {
                let km1 = (k - 1) as f64;
                let next = (x * cur - km1.sqrt() * prev) / (k as f64).sqrt();
                prev = cur;
                cur = next;
                *ck += if k % 2 == 0 { even } else { odd } * cur;
            }
        }
        if let Some(w0) = self.rule.center_weight() {
            // h_k(0) vanishes for odd k; h_{2m}(0) = (-1)^m sqrt((2m-1)!! / (2m)!!).
            let g0 = w0 * g(0.0);
            let mut h = 1.0;
            c[0] += g0;
            for k in (2..=k_max).step_by(2) {
                h *= -(((k - 1) as f64) / k as f64).sqrt();
                c[k] += g0 * h;
            }
        }
        c
    }

    fn series_terms(&self, f: &TestFunction) -> usize {
        match f.degree() {
            Some(d) => d.min(self.truncation).max(1),
            None => self.truncation,
        }
    }

    pub fn rho(&self, f: &TestFunction, u: f64) -> f64 {
        self.gaussian_expectation(|x| f.eval(x), u)
    }

    /// `rho_u(f^{(order)})`.
    pub fn rho_derivative(&self, f: &TestFunction, order: u8, u: f64) -> Result<f64> {
        let g = f.derivative_fn(order)?;
        Ok(self.gaussian_expectation(g, u))
    }

    pub fn v_squared(&self, f: &TestFunction, x: f64, method: VMethod) -> Result<VSquared> {
        if !(x >= 0.0) {
            return Err(LabError::InvalidArgument(format!("scale must be nonnegative, got {x}")));
        }
        if x == 0.0 {
            return Ok(VSquared {
                value: 0.0,
                tail_estimate: 0.0,
                accurate: true,
            });
        }
        match method {
            VMethod::Series => Ok(self.v_squared_series(f, x)),
            VMethod::Direct => Ok(self.v_squared_direct(f, x)),
        }
    }

    fn v_squared_series(&self, f: &TestFunction, x: f64) -> VSquared {
        let k_max = self.series_terms(f);
        let c = self.normalized_hermite(|y| f.eval(y), x, k_max);
        let value = 2.0
            * c.iter()
                .enumerate()
                .skip(1)
                .map(|(k, ck)| ck * ck / (k as f64 + 1.0))
                .sum::<f64>();
        let tail = if f.degree().is_some_and(|d| d <= self.truncation) {
            0.0
        } else {
            2.0 * c[k_max] * c[k_max] / (k_max as f64 + 1.0)
        };
        VSquared {
            value,
            tail_estimate: tail,
            accurate: tail <= SERIES_TAIL_TOLERANCE * (1.0 + value.abs()),
        }
    }

    fn v_squared_direct(&self, f: &TestFunction, x: f64) -> VSquared {
        let nodes = self.direct_rule.nodes();
        let weights = self.direct_rule.weights();
        let mean = self.direct_rule.expect(|y| f.eval(x * y));
        let fx: Vec<f64> = nodes.iter().map(|n| f.eval(x * n)).collect();
        let (s_nodes, s_weights) = &self.time_rule;
        let mut total = 0.0;
        for (s, ws) in s_nodes.iter().zip(s_weights) {
            let c = increment_correlation(*s);
            let r = (1.0 - c * c).max(0.0).sqrt();
            let mut joint = 0.0;
            for (i, ni) in nodes.iter().enumerate() {
                let inner: f64 = nodes
                    .iter()
                    .zip(weights)
                    .map(|(nj, wj)| wj * f.eval(x * (c * ni + r * nj)))
                    .sum();
                joint += weights[i] * fx[i] * inner;
            }
            total += ws * (joint - mean * mean);
        }
        VSquared {
            value: 2.0 * total,
            tail_estimate: 0.0,
            accurate: true,
        }
    }

    pub fn w_coeff(&self, f: &TestFunction, u: f64) -> Result<f64> {
        Ok(u * self.rho_derivative(f, 1, u)?)
    }

    /// `v_sigma^2 - w_sigma^2` (series route).
    pub fn cond_variance(&self, f: &TestFunction, sigma: f64) -> Result<f64> {
        f.require(1)?;
        if sigma == 0.0 {
            return Ok(0.0);
        }
        let v2 = self.v_squared_series(f, sigma).value;
        let w = self.w_coeff(f, sigma)?;
        Ok(v2 - w * w)
    }

    pub fn limit_quantities(&self, f: &TestFunction, u: f64) -> Result<LimitQuantities> {
        let rho = self.rho(f, u);
        let rho_prime = self.rho_derivative(f, 1, u)?;
        let w = u * rho_prime;
        let v2 = self.v_squared(f, u, VMethod::Series)?.value;
        Ok(LimitQuantities {
            u,
            rho,
            rho_prime,
            w,
            v2,
            cond_var: v2 - w * w,
        })
    }

    /// `G(u) = ∫_0^u rho_{2 sqrt(x)}(f') dx`, integrated in `y = sqrt(x)`.
    pub fn big_g(&self, f: &TestFunction, u: f64) -> Result<f64> {
        let fp = f.derivative_fn(1)?;
        if !(u >= 0.0) {
            return Err(LabError::InvalidArgument(format!("G needs u >= 0, got {u}")));
        }
        let integrand = |y: f64| 2.0 * y * self.gaussian_expectation(&fp, 2.0 * y);
        Ok(adaptive_simpson(&integrand, 0.0, u.sqrt(), BIG_G_TOLERANCE))
    }

    /// `|E[g(uD) He_2(D)] - u^2 E[g''(uD)]|` for standard normal `D`.
    pub fn ibp_residual(&self, g: &TestFunction, u: f64) -> Result<f64> {
        let g2 = g.derivative_fn(2)?;
        if !(u > 0.0) {
            return Err(LabError::InvalidArgument(format!("need u > 0, got {u}")));
        }
        let lhs = self.rule.expect(|d| g.eval(u * d) * (d * d - 1.0));
        let rhs = u * u * self.gaussian_expectation(g2, u);
        Ok((lhs - rhs).abs())
    }
}

pub fn rho(f: &TestFunction, u: f64) -> f64 {
    TheoryEngine::shared().rho(f, u)
}

pub fn v_squared(f: &TestFunction, x: f64, method: VMethod) -> Result<VSquared> {
    TheoryEngine::shared().v_squared(f, x, method)
}

pub fn w_coeff(f: &TestFunction, u: f64) -> Result<f64> {
    TheoryEngine::shared().w_coeff(f, u)
}

pub fn cond_variance(f: &TestFunction, sigma: f64) -> Result<f64> {
    TheoryEngine::shared().cond_variance(f, sigma)
}

pub fn big_g(f: &TestFunction, u: f64) -> Result<f64> {
    TheoryEngine::shared().big_g(f, u)
}

pub fn ibp_residual(g: &TestFunction, u: f64) -> Result<f64> {
    TheoryEngine::shared().ibp_residual(g, u)
}

/// Largest `q` for which `a_{q,k}` is computed in exact integer arithmetic.
pub const MAX_MONOMIAL_POWER: usize = 30;

/// `a_{q,k} = (-1)^k q! / (2^k k! (q - 2k)!)`.
pub fn a_coeff(q: usize, k: usize) -> Result<f64> {
    if !(2..=MAX_MONOMIAL_POWER).contains(&q) || k == 0 || 2 * k > q {
        return Err(LabError::OutOfRange(format!(
            "a_(q,k) needs 2 <= q <= {MAX_MONOMIAL_POWER} and 1 <= k <= q/2, got q = {q}, k = {k}"
        )));
    }
    let falling: u128 = ((q - 2 * k + 1)..=q).map(|j| j as u128).product();
    let k_fact: u128 = (1..=k).map(|j| j as u128).product();
    let magnitude = falling / ((1u128 << k) * k_fact);
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * magnitude as f64)
}

/// `c_q = sqrt(2^{2q+1} q! / (q + 1))`.
pub fn c_const(q: usize) -> Result<f64> {
    if !(2..=MAX_MONOMIAL_POWER).contains(&q) {
        return Err(LabError::OutOfRange(format!(
            "c_q needs 2 <= q <= {MAX_MONOMIAL_POWER}, got {q}"
        )));
    }
    let q_fact: f64 = (1..=q).map(|j| j as f64).product();
    Ok((2f64.powi(2 * q as i32 + 1) * q_fact / (q as f64 + 1.0)).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryRow {
    pub u: f64,
    pub rho: f64,
    pub w: f64,
    pub v2: f64,
    pub cond_var: f64,
    pub big_g: f64,
}

pub fn theory_table(engine: &TheoryEngine, f: &TestFunction, us: &[f64]) -> Result<Vec<TheoryRow>> {
    us.iter()
        .map(|&u| {
            let q = engine.limit_quantities(f, u)?;
            Ok(TheoryRow {
                u,
                rho: q.rho,
                w: q.w,
                v2: q.v2,
                cond_var: q.cond_var,
                big_g: engine.big_g(f, u)?,
            })
        })
        .collect()
}

pub fn write_theory_csv<W: Write>(rows: &[TheoryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["u", "rho", "w", "v2", "cond_var", "G"])?;
    for r in rows {
        w.write_record(
            [r.u, r.rho, r.w, r.v2, r.cond_var, r.big_g].map(|v| v.to_string()),
        )?;
    }
    w.flush()?;
    Ok(())
}
