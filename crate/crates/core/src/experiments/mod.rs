//! Monte Carlo experiments over many simulated paths.
//!
//! Every experiment fans out over path indices (see [`crate::exec`]), computes
//! per-path rows with no shared mutable state, and reduces them in
//! path-index order with compensated sums. Output is therefore identical for
//! any worker count.

pub mod config;
pub mod ks;
pub mod report;

use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{LabError, Result};
use crate::exec::{map_indexed, Execution};
use crate::functionals::{make_monomial, parse_function_spec, TestFunction};
use crate::gaussian_theory::{c_const, TheoryEngine};
use crate::local_time::{
    default_kernel_eps, estimate, occupation, Estimator, LocalTimeField, SpatialGrid, CELLS_PER_MIN_H,
};
use crate::numeric::{log_log_slope, rms, Moments, NeumaierSum};
use crate::path_engine::{path_range, simulate_path, BrownianPath, SeedId};
use crate::statistics::{
    cond_var_integral, functional_residual_with, increment_power_integral, lln_functional, lln_limit_with,
    r_correction, v_stat, v_stat_functional, STUDENTIZER_FLOOR,
};

pub use ks::{ks_test, KsOutcome};

pub const MEAN_GATE: f64 = 0.15;
pub const VARIANCE_GATE: f64 = 0.2;
pub const KS_GATE: f64 = 0.005;

/// Grid spacing for the small-local-time diagnostic.
pub const DIAGNOSTIC_DX: f64 = 1.0 / 1024.0;
pub const DIAGNOSTIC_STEPS: usize = 1 << 18;

/// Default step count for increment width `h`: `2^20` for `h >= 0.05`,
/// `2^21` below. A calibration, not a derived rate.
pub fn scheduled_steps(h: f64) -> usize {
    if h >= 0.05 - 1e-12 {
        1 << 20
    } else {
        1 << 21
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EstimatorKind {
    #[default]
    PiecewiseLinear,
    Kernel,
}

impl EstimatorKind {
    pub fn tag(self) -> &'static str {
        match self {
            EstimatorKind::PiecewiseLinear => "pl",
            EstimatorKind::Kernel => "kernel",
        }
    }

    pub fn other(self) -> Self {
        match self {
            EstimatorKind::PiecewiseLinear => EstimatorKind::Kernel,
            EstimatorKind::Kernel => EstimatorKind::PiecewiseLinear,
        }
    }

    pub fn resolve(self, n_steps: usize, dx: f64) -> Estimator {
        match self {
            EstimatorKind::PiecewiseLinear => Estimator::PiecewiseLinear,
            EstimatorKind::Kernel => Estimator::Kernel {
                eps: default_kernel_eps(n_steps, dx),
            },
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pl" | "piecewise-linear" => Ok(EstimatorKind::PiecewiseLinear),
            "kernel" => Ok(EstimatorKind::Kernel),
            other => Err(LabError::InvalidArgument(format!(
                "unknown estimator {other:?} (expected pl or kernel)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Fixed step count; `None` selects [`scheduled_steps`] per `h`.
    pub n_steps: Option<usize>,
    pub path_count: usize,
    pub master_seed: u64,
    pub h_list: Vec<f64>,
    pub function_spec: String,
    pub estimator: EstimatorKind,
    pub normalize: bool,
    pub t_levels: Vec<f64>,
    /// Grid cells per smallest `h`.
    pub cells_per_h: usize,
    /// Output directory for CSV and text reports.
    pub output_path: Option<PathBuf>,
    /// `None` uses the global pool; `Some(1)` runs sequentially.
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_steps: None,
            path_count: 100,
            master_seed: 1,
            h_list: vec![0.05],
            function_spec: "mono:2".into(),
            estimator: EstimatorKind::PiecewiseLinear,
            normalize: false,
            t_levels: Vec::new(),
            cells_per_h: CELLS_PER_MIN_H,
            output_path: None,
            workers: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.path_count == 0 {
            return Err(LabError::InvalidArgument("path count must be at least 1".into()));
        }
        if self.cells_per_h == 0 {
            return Err(LabError::InvalidArgument("cells per h must be at least 1".into()));
        }
        if self.n_steps == Some(0) {
            return Err(LabError::InvalidArgument("n_steps must be at least 1".into()));
        }
        if self.h_list.is_empty() {
            return Err(LabError::InvalidArgument("h list is empty".into()));
        }
        if let Some(h) = self.h_list.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
            return Err(LabError::InvalidArgument(format!("h must be positive, got {h}")));
        }
        if let Some(t) = self.t_levels.iter().find(|t| !t.is_finite()) {
            return Err(LabError::InvalidArgument(format!("t level must be finite, got {t}")));
        }
        let dx = self.dx();
        for &h in &self.h_list {
            let ratio = h / dx;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio {
                return Err(LabError::Alignment { h, dx });
            }
        }
        let finest = self.finest_steps();
        if let Some(&h) = self.h_list.iter().find(|&&h| finest % self.steps_for(h) != 0) {
            return Err(LabError::Configuration(format!(
                "step count {} for h = {h} does not divide {finest}",
                self.steps_for(h)
            )));
        }
        Ok(())
    }

    /// Shared grid spacing: the smallest `h` over `cells_per_h`.
    pub fn dx(&self) -> f64 {
        self.h_min() / self.cells_per_h as f64
    }

    pub fn steps_for(&self, h: f64) -> usize {
        self.n_steps.unwrap_or_else(|| scheduled_steps(h))
    }

    pub fn execution(&self) -> Execution {
        Execution::from_workers(self.workers)
    }

    fn h_min(&self) -> f64 {
        self.h_list.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn h_max(&self) -> f64 {
        self.h_list.iter().copied().fold(0.0, f64::max)
    }

    fn finest_steps(&self) -> usize {
        self.h_list.iter().map(|&h| self.steps_for(h)).max().unwrap_or(1)
    }

    fn distinct_steps(&self) -> Vec<usize> {
        let mut steps: Vec<usize> = self.h_list.iter().map(|&h| self.steps_for(h)).collect();
        steps.sort_unstable_by(|a, b| b.cmp(a));
        steps.dedup();
        steps
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Lln,
    Clt,
    Functional,
    Correction { q: usize },
}

impl ExperimentKind {
    pub fn name(&self) -> String {
        match self {
            ExperimentKind::Lln => "lln".into(),
            ExperimentKind::Clt => "clt".into(),
            ExperimentKind::Functional => "functional".into(),
            ExperimentKind::Correction { q } => format!("correction(q={q})"),
        }
    }

    /// The per-path value whose distribution the summary describes.
    pub fn sample_value(&self, row: &PathRow) -> Option<f64> {
        match self {
            ExperimentKind::Functional => row.functional_residual,
            _ => row.studentized,
        }
    }
}

/// One path at one `(h, t)`. `None` marks a column that does not apply or a
/// degenerate studentizer.
#[derive(Clone, Debug, PartialEq)]
pub struct PathRow {
    pub path_index: usize,
    pub h: f64,
    pub t: Option<f64>,
    pub n_steps: usize,
    pub v_stat: f64,
    pub lln_limit: f64,
    pub u_stat: f64,
    pub cond_var_integral: f64,
    pub studentized: Option<f64>,
    pub r_correction: Option<f64>,
    pub functional_residual: Option<f64>,
    pub g_term: Option<f64>,
    /// `h^{-1/2} |V(f)(pl) - V(f)(kernel)|` on the same path.
    pub centering_budget: Option<f64>,
}

impl PathRow {
    fn new(path_index: usize, h: f64, n_steps: usize) -> Self {
        Self {
            path_index,
            h,
            t: None,
            n_steps,
            v_stat: f64::NAN,
            lln_limit: f64::NAN,
            u_stat: f64::NAN,
            cond_var_integral: f64::NAN,
            studentized: None,
            r_correction: None,
            functional_residual: None,
            g_term: None,
            centering_budget: None,
        }
    }

    fn set_centered(&mut self, v: f64, lln: f64, scale: f64, cvi: f64) {
        self.v_stat = v;
        self.lln_limit = lln;
        self.u_stat = (v - lln) * scale;
        self.cond_var_integral = cvi;
        self.studentized = (cvi > STUDENTIZER_FLOOR).then(|| self.u_stat / cvi.sqrt());
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub h: f64,
    pub t: Option<f64>,
    pub n_steps: usize,
    pub paths: usize,
    pub degenerate: usize,
    /// Mean of `v_stat`.
    pub mean_v: f64,
    /// Mean and RMS of `v_stat - lln_limit`.
    pub mean_error: f64,
    pub rms_error: f64,
    /// Moments of the experiment's sample (see [`ExperimentKind::sample_value`]).
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub ks: Option<KsOutcome>,
    pub mean_centering_budget: Option<f64>,
}

impl SummaryRow {
    pub fn variance(&self) -> f64 {
        self.sd * self.sd
    }
}

/// Group rows by `(h, t)` in order of first appearance and summarize each
/// group. Deterministic in the row order.
pub fn summarize(kind: ExperimentKind, rows: &[PathRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(u64, Option<u64>)> = Vec::new();
    for row in rows {
        let key = (row.h.to_bits(), row.t.map(f64::to_bits));
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.iter()
        .map(|key| {
            let group: Vec<&PathRow> = rows
                .iter()
                .filter(|r| (r.h.to_bits(), r.t.map(f64::to_bits)) == *key)
                .collect();
            let sample: Vec<f64> = group.iter().filter_map(|r| kind.sample_value(r)).collect();
            let errors: Vec<f64> = group.iter().map(|r| r.v_stat - r.lln_limit).collect();
            let vs: Vec<f64> = group.iter().map(|r| r.v_stat).collect();
            let moments = Moments::of(&sample);
            let budgets: Vec<f64> = group.iter().filter_map(|r| r.centering_budget).collect();
            SummaryRow {
                h: group[0].h,
                t: group[0].t,
                n_steps: group[0].n_steps,
                paths: group.len(),
                degenerate: group.len() - sample.len(),
                mean_v: Moments::of(&vs).mean,
                mean_error: Moments::of(&errors).mean,
                rms_error: rms(&errors),
                mean: moments.mean,
                sd: moments.sd(),
                skewness: moments.skewness,
                ks: ks_test(&sample).ok(),
                mean_centering_budget: (!budgets.is_empty()).then(|| Moments::of(&budgets).mean),
            }
        })
        .collect()
}

/// Outcome of the mean / variance / KS gates; at least two must pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GateOutcome {
    pub mean_ok: bool,
    pub variance_ok: bool,
    pub ks_ok: bool,
}

impl GateOutcome {
    pub fn evaluate(row: &SummaryRow, variance_tolerance: f64) -> Self {
        Self {
            mean_ok: row.mean.abs() <= MEAN_GATE,
            variance_ok: (row.variance() - 1.0).abs() <= variance_tolerance,
            ks_ok: row.ks.is_some_and(|k| k.p_value >= KS_GATE),
        }
    }

    pub fn passed_count(&self) -> usize {
        [self.mean_ok, self.variance_ok, self.ks_ok].iter().filter(|b| **b).count()
    }

    pub fn passed(&self) -> bool {
        self.passed_count() >= 2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub per_path: Vec<PathRow>,
    pub summary: Vec<SummaryRow>,
    /// LLN: log-log slope of RMS error against `h`. Correction: log-log slope
    /// of RMS(`R_{q,h}`) against `h`.
    pub slope: Option<f64>,
}

impl ExperimentReport {
    fn assemble(kind: ExperimentKind, config: &ExperimentConfig, mut per_path: Vec<PathRow>) -> Self {
        // Group-major order: h as configured, then t, then path index.
        let group_of = |r: &PathRow| {
            let hi = config.h_list.iter().position(|h| *h == r.h).unwrap_or(usize::MAX);
            let ti = r
                .t
                .and_then(|t| config.t_levels.iter().position(|x| *x == t))
                .unwrap_or(0);
            (hi, ti)
        };
        per_path.sort_by_key(|r| (group_of(r), r.path_index));
        let summary = summarize(kind, &per_path);
        let slope = match kind {
            ExperimentKind::Lln if summary.len() >= 2 => {
                let hs: Vec<f64> = summary.iter().map(|s| s.h).collect();
                let errs: Vec<f64> = summary.iter().map(|s| s.rms_error).collect();
                Some(log_log_slope(&hs, &errs))
            }
            ExperimentKind::Correction { .. } if summary.len() >= 2 => {
                let hs: Vec<f64> = summary.iter().map(|s| s.h).collect();
                let r_rms: Vec<f64> = hs
                    .iter()
                    .map(|h| {
                        let rs: Vec<f64> = per_path.iter().filter(|r| r.h == *h).filter_map(|r| r.r_correction).collect();
                        rms(&rs)
                    })
                    .collect();
                Some(log_log_slope(&hs, &r_rms))
            }
            _ => None,
        };
        Self {
            kind,
            config: config.clone(),
            per_path,
            summary,
            slope,
        }
    }

    pub fn gates(&self, variance_tolerance: f64) -> Vec<GateOutcome> {
        self.summary
            .iter()
            .map(|s| GateOutcome::evaluate(s, variance_tolerance))
            .collect()
    }

    /// True when some `(h, t)` group has no usable sample at all.
    pub fn has_degenerate_group(&self) -> bool {
        self.summary.iter().any(|s| s.degenerate == s.paths)
    }
}

/// Fields for one path at every step count the config needs, finest first.
struct PathFields {
    fields: Vec<(usize, LocalTimeField, Option<LocalTimeField>)>,
}

impl PathFields {
    fn build(config: &ExperimentConfig, index: usize, extra_points: &[f64], alternate: bool) -> Result<Self> {
        let steps = config.distinct_steps();
        let finest = simulate_path(steps[0], SeedId::new(config.master_seed, index as u64))?;
        let dx = config.dx();
        let pad = 2.0 * config.h_max();
        let mut fields = Vec::with_capacity(steps.len());
        for &n in &steps {
            let coarse;
            let path = if n == steps[0] {
                &finest
            } else {
                coarse = finest.coarsen(steps[0] / n)?;
                &coarse
            };
            let (lo, hi) = path_range(path);
            let lo = extra_points.iter().copied().fold(lo, f64::min);
            let hi = extra_points.iter().copied().fold(hi, f64::max);
            let grid = SpatialGrid::covering(lo, hi, dx, pad)?;
            let main = field_for(path, &grid, config.estimator, config.normalize)?;
            let alt = if alternate {
                Some(field_for(path, &grid, config.estimator.other(), config.normalize)?)
            } else {
                None
            };
            fields.push((n, main, alt));
        }
        Ok(Self { fields })
    }

    fn at(&self, n: usize) -> (&LocalTimeField, Option<&LocalTimeField>) {
        let (_, main, alt) = self
            .fields
            .iter()
            .find(|(m, _, _)| *m == n)
            .expect("fields are built for every configured step count");
        (main, alt.as_ref())
    }
}

fn field_for(path: &BrownianPath, grid: &SpatialGrid, kind: EstimatorKind, normalize: bool) -> Result<LocalTimeField> {
    let field = estimate(path, grid, kind.resolve(path.n_steps(), grid.dx()))?;
    if normalize {
        field.normalize()
    } else {
        Ok(field)
    }
}

/// Run `job` for every path index and concatenate rows in index order. The
/// first error by path index wins.
fn collect_rows<F>(config: &ExperimentConfig, job: F) -> Result<Vec<PathRow>>
where
    F: Fn(usize) -> Result<Vec<PathRow>> + Sync + Send,
{
    let results = map_indexed(config.execution(), config.path_count, job);
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

/// `V(f)^h` against its limit across `h`, with the RMS-error rate.
pub fn run_lln(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let f = parse_function_spec(&config.function_spec)?;
    let engine = TheoryEngine::shared();
    let studentize = f.require(1).is_ok();
    let rows = collect_rows(config, |index| {
        let fields = PathFields::build(config, index, &[], false)?;
        config
            .h_list
            .iter()
            .map(|&h| {
                let n = config.steps_for(h);
                let (field, _) = fields.at(n);
                let mut row = PathRow::new(index, h, n);
                let cvi = if studentize {
                    cond_var_integral(engine, field, &f)?
                } else {
                    f64::NAN
                };
                row.set_centered(v_stat(field, &f, h)?, lln_limit_with(engine, field, &f), h.powf(-0.5), cvi);
                Ok(row)
            })
            .collect()
    })?;
    Ok(ExperimentReport::assemble(ExperimentKind::Lln, config, rows))
}

/// Studentized `U(f)^h` per `h`, with the cross-estimator centering budget.
pub fn run_clt(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let f = parse_function_spec(&config.function_spec)?;
    f.require(1)?;
    let engine = TheoryEngine::shared();
    let rows = collect_rows(config, |index| {
        let fields = PathFields::build(config, index, &[], true)?;
        config
            .h_list
            .iter()
            .map(|&h| {
                let n = config.steps_for(h);
                let (field, alt) = fields.at(n);
                let mut row = PathRow::new(index, h, n);
                let lln = lln_limit_with(engine, field, &f);
                row.set_centered(v_stat(field, &f, h)?, lln, h.powf(-0.5), cond_var_integral(engine, field, &f)?);
                if let Some(alt) = alt {
                    row.centering_budget = Some((lln - lln_limit_with(engine, alt, &f)).abs() / h.sqrt());
                }
                Ok(row)
            })
            .collect()
    })?;
    Ok(ExperimentReport::assemble(ExperimentKind::Clt, config, rows))
}

/// Residual of the one-sided functional statistic at each `t` level.
pub fn run_functional(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if config.t_levels.is_empty() {
        return Err(LabError::InvalidArgument("functional experiment needs at least one t level".into()));
    }
    let f = parse_function_spec(&config.function_spec)?;
    f.require(1)?;
    f.require(3)?;
    let engine = TheoryEngine::shared();
    let rows = collect_rows(config, |index| {
        let fields = PathFields::build(config, index, &config.t_levels, false)?;
        let mut out = Vec::with_capacity(config.h_list.len() * config.t_levels.len());
        for &h in &config.h_list {
            let n = config.steps_for(h);
            let (field, _) = fields.at(n);
            for &t in &config.t_levels {
                let mut row = PathRow::new(index, h, n);
                row.t = Some(t);
                match functional_residual_with(engine, field, &f, h, t) {
                    Ok(r) => {
                        row.set_centered(r.v_stat, r.lln_limit, h.powf(-0.5), r.cond_var_integral);
                        row.g_term = Some(r.g_term);
                        row.functional_residual = Some(r.residual);
                    }
                    Err(LabError::DegenerateVariance(cvi)) => {
                        let v = v_stat_functional(field, &f, h, t)?;
                        row.set_centered(v, lln_functional(engine, field, &f, t)?, h.powf(-0.5), cvi);
                        row.studentized = None;
                    }
                    Err(e) => return Err(e),
                }
                out.push(row);
            }
        }
        Ok(out)
    })?;
    Ok(ExperimentReport::assemble(ExperimentKind::Functional, config, rows))
}

/// `∫ L^q` over the field grid.
pub fn power_integral(field: &LocalTimeField, q: usize) -> f64 {
    let dx = field.grid().dx();
    let mut acc = NeumaierSum::default();
    for v in field.values() {
        acc.add(v.powi(q as i32) * dx);
    }
    acc.value()
}

/// Monomial statistic with the `R_{q,h}` standardization for one field:
/// `h^{-(q+1)/2} (∫ (ΔL)^q + R_{q,h})` studentized by `c_q sqrt(∫ L^q)`.
///
/// The exponent `(q+1)/2` is the one under which `c_q` is the right constant
/// for every `q` (it is `3/2` at `q = 2` and `2` at `q = 3`).
pub fn correction_statistic(field: &LocalTimeField, q: usize, h: f64) -> Result<PathRow> {
    let c = c_const(q)?;
    let raw = increment_power_integral(field, q, h)?;
    let r = r_correction(field, q, h)?;
    let cvi = c * c * power_integral(field, q);
    if !(cvi > STUDENTIZER_FLOOR) {
        return Err(LabError::DegenerateVariance(cvi));
    }
    let mut row = PathRow::new(0, h, 0);
    row.set_centered(raw, -r, h.powf(-0.5 * (q as f64 + 1.0)), cvi);
    row.r_correction = Some(r);
    Ok(row)
}

pub fn run_correction_diagnostic(config: &ExperimentConfig, q: usize) -> Result<ExperimentReport> {
    config.validate()?;
    make_monomial(q)?;
    c_const(q)?;
    let rows = collect_rows(config, |index| {
        let fields = PathFields::build(config, index, &[], false)?;
        config
            .h_list
            .iter()
            .map(|&h| {
                let n = config.steps_for(h);
                let (field, _) = fields.at(n);
                let mut row = match correction_statistic(field, q, h) {
                    Ok(row) => row,
                    Err(LabError::DegenerateVariance(_)) => {
                        let mut row = PathRow::new(index, h, n);
                        row.r_correction = Some(r_correction(field, q, h)?);
                        row.v_stat = increment_power_integral(field, q, h)?;
                        row
                    }
                    Err(e) => return Err(e),
                };
                row.path_index = index;
                row.n_steps = n;
                Ok(row)
            })
            .collect()
    })?;
    Ok(ExperimentReport::assemble(ExperimentKind::Correction { q }, config, rows))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmallLtRow {
    pub eps: f64,
    /// Paths that reach `x0` with `L^{x0} < eps`.
    pub events: usize,
    pub frequency: f64,
    /// `frequency(eps) / frequency(eps / 2)` when `eps / 2` is also listed.
    pub ratio_to_half: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmallLtReport {
    pub x0: f64,
    pub n_steps: usize,
    pub paths: usize,
    pub hits: usize,
    pub hit_frequency: f64,
    pub rows: Vec<SmallLtRow>,
    /// `(hit, L^{x0})` per path index.
    pub per_path: Vec<(bool, f64)>,
}

/// Frequency of `{path reaches x0, L^{x0} < eps}` per `eps`.
pub fn small_lt_diagnostic(config: &ExperimentConfig, x0: f64, eps_list: &[f64]) -> Result<SmallLtReport> {
    if config.path_count == 0 {
        return Err(LabError::InvalidArgument("path count must be at least 1".into()));
    }
    if !(x0.is_finite() && x0 != 0.0) {
        return Err(LabError::InvalidArgument(format!("x0 must be finite and nonzero, got {x0}")));
    }
    if let Some(e) = eps_list.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(LabError::InvalidArgument(format!("eps must be non-negative, got {e}")));
    }
    let n = config.n_steps.unwrap_or(DIAGNOSTIC_STEPS);
    let per_path: Vec<(bool, f64)> = map_indexed(config.execution(), config.path_count, |index| {
        let path = simulate_path(n, SeedId::new(config.master_seed, index as u64))?;
        let (lo, hi) = path_range(&path);
        let hit = if x0 > 0.0 { hi >= x0 } else { lo <= x0 };
        let grid = SpatialGrid::covering(lo.min(x0), hi.max(x0), DIAGNOSTIC_DX, 4.0 * DIAGNOSTIC_DX)?;
        let field = field_for(&path, &grid, config.estimator, config.normalize)?;
        Ok((hit, field.value_at(x0)))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let paths = per_path.len();
    let hits = per_path.iter().filter(|(hit, _)| *hit).count();
    let frequency_of = |eps: f64| {
        let events = per_path.iter().filter(|(hit, l)| *hit && *l < eps).count();
        (events, events as f64 / paths as f64)
    };
    let rows = eps_list
        .iter()
        .map(|&eps| {
            let (events, frequency) = frequency_of(eps);
            let ratio_to_half = eps_list
                .iter()
                .any(|&e| (e - 0.5 * eps).abs() <= 1e-12 * eps)
                .then(|| frequency / frequency_of(0.5 * eps).1);
            SmallLtRow {
                eps,
                events,
                frequency,
                ratio_to_half,
            }
        })
        .collect();
    Ok(SmallLtReport {
        x0,
        n_steps: n,
        paths,
        hits,
        hit_frequency: hits as f64 / paths as f64,
        rows,
        per_path,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingReport {
    pub h_list: Vec<f64>,
    /// RMS over paths of `L^h - L^0`, per `h`.
    pub rms: Vec<f64>,
    pub slope: f64,
    /// `L^h - L^0` per path (outer) and `h` (inner).
    pub per_path: Vec<Vec<f64>>,
}

/// Moment scaling of `L^{x+h} - L^x` at `x = 0`.
pub fn increment_scaling(config: &ExperimentConfig) -> Result<ScalingReport> {
    config.validate()?;
    let per_path: Vec<Vec<f64>> = map_indexed(config.execution(), config.path_count, |index| {
        let fields = PathFields::build(config, index, &[], false)?;
        Ok(config
            .h_list
            .iter()
            .map(|&h| {
                let (field, _) = fields.at(config.steps_for(h));
                field.value_at(h) - field.value_at(0.0)
            })
            .collect())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let rms_per_h: Vec<f64> = (0..config.h_list.len())
        .map(|k| rms(&per_path.iter().map(|d| d[k]).collect::<Vec<_>>()))
        .collect();
    Ok(ScalingReport {
        h_list: config.h_list.clone(),
        slope: log_log_slope(&config.h_list, &rms_per_h),
        rms: rms_per_h,
        per_path,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossValidationRow {
    pub path_index: usize,
    pub n_steps: usize,
    pub sup_norm: f64,
    pub occupation_pl: f64,
    pub occupation_kernel: f64,
    pub v_stat_pl: f64,
    pub v_stat_kernel: f64,
}

/// Both estimators on the same paths (unnormalized), at the first `h` and
/// its step count.
pub fn cross_validate(config: &ExperimentConfig) -> Result<Vec<CrossValidationRow>> {
    config.validate()?;
    let f: TestFunction = parse_function_spec(&config.function_spec)?;
    let h = config.h_list[0];
    let n = config.steps_for(h);
    let dx = config.dx();
    map_indexed(config.execution(), config.path_count, |index| {
        let path = simulate_path(n, SeedId::new(config.master_seed, index as u64))?;
        let (lo, hi) = path_range(&path);
        let grid = SpatialGrid::covering(lo, hi, dx, 2.0 * config.h_max())?;
        let pl = field_for(&path, &grid, EstimatorKind::PiecewiseLinear, false)?;
        let kernel = field_for(&path, &grid, EstimatorKind::Kernel, false)?;
        let sup_norm = pl
            .values()
            .iter()
            .zip(kernel.values())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        Ok(CrossValidationRow {
            path_index: index,
            n_steps: n,
            sup_norm,
            occupation_pl: occupation(&pl),
            occupation_kernel: occupation(&kernel),
            v_stat_pl: v_stat(&pl, &f, h)?,
            v_stat_kernel: v_stat(&kernel, &f, h)?,
        })
    })
    .into_iter()
    .collect()
}
