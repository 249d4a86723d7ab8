//! Increment statistics of an estimated local-time field.
//!
//! For a field `L` on a lattice grid and an increment width `h = s dx`, the
//! normalized increment at cell `j` is `(L_{j+s} - L_j) / sqrt(h)` (a pure
//! index shift). All spatial integrals use the midpoint rule on the field
//! grid; a cell only partly inside an integration interval is weighted by
//! its overlap.

use crate::error::{LabError, Result};
use crate::functionals::TestFunction;
use crate::gaussian_theory::{a_coeff, TheoryEngine};
use crate::local_time::{integrate_field, LocalTimeField};
use crate::numeric::NeumaierSum;

/// Conditional-variance integrals at or below this are treated as degenerate.
pub const STUDENTIZER_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatResult {
    pub h: f64,
    pub v_stat: f64,
    pub lln_limit: f64,
    pub u_stat: f64,
    pub cond_var_integral: f64,
    pub studentized: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunctionalResult {
    pub t: f64,
    pub h: f64,
    pub v_stat: f64,
    pub lln_limit: f64,
    pub u_stat: f64,
    /// `G(L^t) - G(L^0)`
    pub g_term: f64,
    pub cond_var_integral: f64,
    pub residual: f64,
}

/// Cell shift for `h` plus the index range `[lo, hi)` of cells whose
/// increment can be nonzero.
struct Increments<'a> {
    values: &'a [f64],
    shift: usize,
    lo: usize,
    hi: usize,
    inv_sqrt_h: f64,
}

impl<'a> Increments<'a> {
    fn new(field: &'a LocalTimeField, h: f64) -> Result<Self> {
        let grid = field.grid();
        let shift = grid.shift_cells(h)?;
        let values = field.values();
        let n = values.len();
        let (lo, hi) = match (
            values.iter().position(|v| *v > 0.0),
            values.iter().rposition(|v| *v > 0.0),
        ) {
            (Some(first), Some(last)) => {
                if first < shift || last + shift >= n {
                    return Err(LabError::OutOfRange(format!(
                        "field support [{}, {}] is not padded by h = {h} inside grid [{}, {}]",
                        grid.left_edge(first),
                        grid.right_edge(last),
                        grid.x_min(),
                        grid.x_max()
                    )));
                }
                (first - shift, last + 1)
            }
            _ => (0, 0),
        };
        Ok(Self {
            values,
            shift,
            lo,
            hi,
            inv_sqrt_h: 1.0 / h.sqrt(),
        })
    }

    /// Raw increment `L_{j+s} - L_j`, with `L = 0` off the grid.
    fn raw(&self, j: usize) -> f64 {
        let ahead = self.values.get(j + self.shift).copied().unwrap_or(0.0);
        ahead - self.values[j]
    }

    fn normalized(&self, j: usize) -> f64 {
        self.raw(j) * self.inv_sqrt_h
    }
}

/// `V(f)^h = ∫ f(h^{-1/2} (L^{x+h} - L^x)) dx`.
pub fn v_stat(field: &LocalTimeField, f: &TestFunction, h: f64) -> Result<f64> {
    let inc = Increments::new(field, h)?;
    let dx = field.grid().dx();
    let mut acc = NeumaierSum::default();
    for j in inc.lo..inc.hi {
        acc.add(f.eval(inc.normalized(j)) * dx);
    }
    Ok(acc.value())
}

/// `V(f) = ∫ rho_{2 sqrt(L^u)}(f) du`.
pub fn lln_limit(field: &LocalTimeField, f: &TestFunction) -> f64 {
    lln_limit_with(TheoryEngine::shared(), field, f)
}

pub fn lln_limit_with(engine: &TheoryEngine, field: &LocalTimeField, f: &TestFunction) -> f64 {
    let dx = field.grid().dx();
    let mut acc = NeumaierSum::default();
    for v in field.values().iter().filter(|v| **v > 0.0) {
        acc.add(engine.rho(f, 2.0 * v.sqrt()) * dx);
    }
    acc.value()
}

/// `∫ (v^2 - w^2)(2 sqrt(L^u)) du`.
pub fn cond_var_integral(engine: &TheoryEngine, field: &LocalTimeField, f: &TestFunction) -> Result<f64> {
    let dx = field.grid().dx();
    let mut acc = NeumaierSum::default();
    for v in field.values().iter().filter(|v| **v > 0.0) {
        acc.add(engine.cond_variance(f, 2.0 * v.sqrt())? * dx);
    }
    Ok(acc.value())
}

pub fn u_stat_and_studentize(field: &LocalTimeField, f: &TestFunction, h: f64) -> Result<StatResult> {
    u_stat_and_studentize_with(TheoryEngine::shared(), field, f, h)
}

pub fn u_stat_and_studentize_with(
    engine: &TheoryEngine,
    field: &LocalTimeField,
    f: &TestFunction,
    h: f64,
) -> Result<StatResult> {
    f.require(1)?;
    let v = v_stat(field, f, h)?;
    let lln = lln_limit_with(engine, field, f);
    let u_stat = (v - lln) / h.sqrt();
    let cvi = cond_var_integral(engine, field, f)?;
    if !(cvi > STUDENTIZER_FLOOR) {
        return Err(LabError::DegenerateVariance(cvi));
    }
    Ok(StatResult {
        h,
        v_stat: v,
        lln_limit: lln,
        u_stat,
        cond_var_integral: cvi,
        studentized: u_stat / cvi.sqrt(),
    })
}

/// `∫ (L^{x+h} - L^x)^q dx`, unnormalized.
pub fn increment_power_integral(field: &LocalTimeField, q: usize, h: f64) -> Result<f64> {
    let inc = Increments::new(field, h)?;
    let dx = field.grid().dx();
    let mut acc = NeumaierSum::default();
    for j in inc.lo..inc.hi {
        acc.add(inc.raw(j).powi(q as i32) * dx);
    }
    Ok(acc.value())
}

/// `R_{q,h} = Σ_k a_{q,k} ∫ (L^{x+h} - L^x)^{q-2k} (4 ∫_x^{x+h} L^u du)^k dx`.
pub fn r_correction(field: &LocalTimeField, q: usize, h: f64) -> Result<f64> {
    let inc = Increments::new(field, h)?;
    let grid = field.grid();
    let dx = grid.dx();
    let weights: Vec<f64> = (1..=q / 2).map(|k| a_coeff(q, k)).collect::<Result<_>>()?;
    let mut acc = NeumaierSum::default();
    for j in inc.lo..inc.hi {
        let x = grid.center(j);
        let window = 4.0 * integrate_field(field, x, x + h)?;
        let delta = inc.raw(j);
        let mut term = 0.0;
        for (k, a) in weights.iter().enumerate().map(|(i, a)| (i + 1, a)) {
            term += a * delta.powi((q - 2 * k) as i32) * window.powi(k as i32);
        }
        acc.add(term * dx);
    }
    Ok(acc.value())
}

/// Overlap-weighted midpoint sum of `g(j)` over cells meeting `I_t`.
fn integrate_over_interval<G: FnMut(usize) -> Result<f64>>(
    field: &LocalTimeField,
    t: f64,
    mut g: G,
) -> Result<f64> {
    let grid = field.grid();
    if !grid.covers(t, t) {
        return Err(LabError::OutOfRange(format!(
            "t = {t} outside grid [{}, {}]",
            grid.x_min(),
            grid.x_max()
        )));
    }
    let (a, b) = (t.min(0.0), t.max(0.0));
    if a == b {
        return Ok(0.0);
    }
    let last = grid.cell_count() as i64 - 1;
    let j_lo = grid.cell_of(a).clamp(0, last) as usize;
    let j_hi = grid.cell_of(b).clamp(0, last) as usize;
    let mut acc = NeumaierSum::default();
    for j in j_lo..=j_hi {
        let overlap = b.min(grid.right_edge(j)) - a.max(grid.left_edge(j));
        if overlap > 0.0 {
            acc.add(g(j)? * overlap);
        }
    }
    Ok(acc.value())
}

/// `V(f)^h_t`, the statistic restricted to `I_t = [min(0, t), max(0, t)]`.
pub fn v_stat_functional(field: &LocalTimeField, f: &TestFunction, h: f64, t: f64) -> Result<f64> {
    let inc = Increments::new(field, h)?;
    integrate_over_interval(field, t, |j| Ok(f.eval(inc.normalized(j))))
}

/// `V(f)_t = ∫_{I_t} rho_{2 sqrt(L^u)}(f) du`.
pub fn lln_functional(engine: &TheoryEngine, field: &LocalTimeField, f: &TestFunction, t: f64) -> Result<f64> {
    let values = field.values();
    integrate_over_interval(field, t, |j| Ok(engine.rho(f, 2.0 * values[j].sqrt())))
}

pub fn functional_residual(field: &LocalTimeField, f: &TestFunction, h: f64, t: f64) -> Result<f64> {
    Ok(functional_residual_with(TheoryEngine::shared(), field, f, h, t)?.residual)
}

/// `(U(f)^h_t - (G(L^t) - G(L^0))) / sqrt(∫_{I_t} (v^2 - w^2)(2 sqrt(L^u)) du)`.
///
/// The `G` term is oriented along the increment direction: increments always
/// look towards `+x`, so for `t < 0` the path is traversed against them and
/// the term enters as `G(L^0) - G(L^t)`.
pub fn functional_residual_with(
    engine: &TheoryEngine,
    field: &LocalTimeField,
    f: &TestFunction,
    h: f64,
    t: f64,
) -> Result<FunctionalResult> {
    f.require(3)?;
    let v = v_stat_functional(field, f, h, t)?;
    let lln = lln_functional(engine, field, f, t)?;
    let u_stat = (v - lln) / h.sqrt();
    let values = field.values();
    let cvi = integrate_over_interval(field, t, |j| engine.cond_variance(f, 2.0 * values[j].sqrt()))?;
    if !(cvi > STUDENTIZER_FLOOR) {
        return Err(LabError::DegenerateVariance(cvi));
    }
    let g_term = if t == 0.0 {
        0.0
    } else {
        t.signum() * (engine.big_g(f, field.value_at(t))? - engine.big_g(f, field.value_at(0.0))?)
    };
    Ok(FunctionalResult {
        t,
        h,
        v_stat: v,
        lln_limit: lln,
        u_stat,
        g_term,
        cond_var_integral: cvi,
        residual: (u_stat - g_term) / cvi.sqrt(),
    })
}
