//! Occupation-density estimators for the spatial local-time field `x ↦ L^x`.
//!
//! Two independent estimators are provided:
//!
//! * [`estimate_pl`] computes the exact occupation density of the
//!   piecewise-linear interpolant of the path. Mass is conserved per segment,
//!   so the field integrates to the total time 1 up to rounding.
//! * [`estimate_kernel`] discretizes `(1/2ε) ∫ 1{|W_s - x| < ε} ds` with the
//!   time integral taken as a left-point Riemann sum.
//!
//! Grids live on the lattice `dx · Z`: cell `j` of a grid covers
//! `[(first + j) dx, (first + j + 1) dx)`. An increment width `h` that is an
//! integer multiple of `dx` is therefore a pure index shift.

use std::io::Write;

use crate::error::{LabError, Result};
use crate::numeric::NeumaierSum;
use crate::path_engine::{path_range, BrownianPath};

/// Segments with `|ΔW| < FLAT_FLOOR_FACTOR * sqrt(dt)` deposit at their midpoint.
pub const FLAT_FLOOR_FACTOR: f64 = 1e-3;

/// Cells per smallest increment width in the default grid. Cell averaging
/// shrinks `E (ΔL)^2` by about `dx / 3h`, which the `h^{-1/2}` scaling
/// amplifies; at 64 cells this bias is well under the Monte Carlo noise.
pub const CELLS_PER_MIN_H: usize = 64;

/// Default kernel half-width at `n = 2^20` steps.
pub const DEFAULT_KERNEL_EPS: f64 = 1.0 / 256.0;

const ALIGN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialGrid {
    dx: f64,
    first: i64,
    cell_count: usize,
}

fn lattice_index(x: f64, dx: f64) -> Option<i64> {
    let r = x / dx;
    let k = r.round();
    ((r - k).abs() <= ALIGN_TOL * r.abs().max(1.0)).then_some(k as i64)
}

impl SpatialGrid {
    /// Grid on `[x_min, x_max]`; both ends must be integer multiples of `dx`.
    pub fn new(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(LabError::InvalidArgument(format!("dx must be positive, got {dx}")));
        }
        if !(x_max > x_min) {
            return Err(LabError::InvalidArgument(format!(
                "empty grid [{x_min}, {x_max}]"
            )));
        }
        let (Some(first), Some(last)) = (lattice_index(x_min, dx), lattice_index(x_max, dx))
        else {
            return Err(LabError::InvalidArgument(format!(
                "grid ends [{x_min}, {x_max}] are not multiples of dx = {dx}"
            )));
        };
        Ok(Self {
            dx,
            first,
            cell_count: (last - first) as usize,
        })
    }

    /// Smallest lattice grid covering `[lo - pad, hi + pad]`.
    pub fn covering(lo: f64, hi: f64, dx: f64, pad: f64) -> Result<Self> {
        if !(dx > 0.0) || !(pad >= 0.0) {
            return Err(LabError::InvalidArgument(format!(
                "need dx > 0 and pad >= 0, got dx = {dx}, pad = {pad}"
            )));
        }
        let first = ((lo - pad) / dx).floor() as i64;
        let last = ((hi + pad) / dx).ceil() as i64;
        Ok(Self {
            dx,
            first,
            cell_count: (last - first).max(1) as usize,
        })
    }

    /// Default grid for a set of increment widths: `dx = h_min / 64`, padded
    /// by `2 h_max` around the path range.
    pub fn for_path(path: &BrownianPath, h_min: f64, h_max: f64) -> Result<Self> {
        if !(h_min > 0.0) || h_max < h_min {
            return Err(LabError::InvalidArgument(format!(
                "invalid increment widths h_min = {h_min}, h_max = {h_max}"
            )));
        }
        let (lo, hi) = path_range(path);
        Self::covering(lo, hi, h_min / CELLS_PER_MIN_H as f64, 2.0 * h_max)
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn cell_count(&self) -> usize {
        self.cell_count
    }

    pub fn x_min(&self) -> f64 {
        self.first as f64 * self.dx
    }

    pub fn x_max(&self) -> f64 {
        (self.first + self.cell_count as i64) as f64 * self.dx
    }

    pub fn left_edge(&self, j: usize) -> f64 {
        (self.first + j as i64) as f64 * self.dx
    }

    pub fn right_edge(&self, j: usize) -> f64 {
        (self.first + j as i64 + 1) as f64 * self.dx
    }

    pub fn center(&self, j: usize) -> f64 {
        (self.first as f64 + j as f64 + 0.5) * self.dx
    }

    /// Lattice index of the first cell.
    pub fn first_cell(&self) -> i64 {
        self.first
    }

    /// Index of the cell containing `x` (cells are closed on the left),
    /// possibly outside `0..cell_count`.
    pub fn cell_of(&self, x: f64) -> i64 {
        (x / self.dx).floor() as i64 - self.first
    }

    fn clamp_cell(&self, x: f64) -> usize {
        self.cell_of(x).clamp(0, self.cell_count as i64 - 1) as usize
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        let slack = ALIGN_TOL * self.dx;
        lo >= self.x_min() - slack && hi <= self.x_max() + slack
    }

    /// Number of cells spanned by `h`, if `h` is a positive multiple of `dx`.
    pub fn shift_cells(&self, h: f64) -> Result<usize> {
        match lattice_index(h, self.dx) {
            Some(k) if k > 0 && h > 0.0 => Ok(k as usize),
            _ => Err(LabError::Alignment { h, dx: self.dx }),
        }
    }

    /// Same grid moved by `cells` lattice cells.
    pub fn translated(&self, cells: i64) -> Self {
        Self {
            first: self.first + cells,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Estimator {
    PiecewiseLinear,
    Kernel { eps: f64 },
}

impl Estimator {
    pub fn tag(&self) -> &'static str {
        match self {
            Estimator::PiecewiseLinear => "pl",
            Estimator::Kernel { .. } => "kernel",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalTimeField {
    grid: SpatialGrid,
    values: Vec<f64>,
    estimator: Estimator,
    normalized: bool,
}

impl LocalTimeField {
    /// Field from explicit cell values (synthetic fields in tests and oracles).
    pub fn from_values(grid: SpatialGrid, values: Vec<f64>, estimator: Estimator) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(LabError::InvalidArgument(format!(
                "{} values for {} cells",
                values.len(),
                grid.cell_count()
            )));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(LabError::InvalidArgument(
                "local-time values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            grid,
            values,
            estimator,
            normalized: false,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Rescale so that the occupation is exactly 1.
    pub fn normalize(mut self) -> Result<Self> {
        let occ = occupation(&self);
        if !(occ > 0.0) {
            return Err(LabError::DegenerateVariance(occ));
        }
        self.values.iter_mut().for_each(|v| *v /= occ);
        self.normalized = true;
        Ok(self)
    }

    /// Linear interpolation between cell centers, flat within the outer half
    /// cells and zero off the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x < g.x_min() || x > g.x_max() {
            return 0.0;
        }
        let r = x / g.dx - g.first as f64 - 0.5;
        if r <= 0.0 {
            return self.values[0];
        }
        let last = g.cell_count - 1;
        if r >= last as f64 {
            return self.values[last];
        }
        let j = r.floor() as usize;
        let frac = r - j as f64;
        self.values[j] * (1.0 - frac) + self.values[j + 1] * frac
    }

    /// Same field on a grid moved by `cells` lattice cells.
    pub fn translated(&self, cells: i64) -> Self {
        Self {
            grid: self.grid.translated(cells),
            ..self.clone()
        }
    }

    /// `x_center,L_value` rows, one per cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x_center", "L_value"])?;
        for (j, v) in self.values.iter().enumerate() {
            w.write_record([self.grid.center(j).to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportInterval {
    pub lower: f64,
    pub upper: f64,
}

fn check_covers(path: &BrownianPath, grid: &SpatialGrid) -> Result<()> {
    let (lo, hi) = path_range(path);
    if grid.covers(lo, hi) {
        Ok(())
    } else {
        Err(LabError::OutOfRange(format!(
            "grid [{}, {}] does not cover path range [{lo}, {hi}]",
            grid.x_min(),
            grid.x_max()
        )))
    }
}

/// Occupation density of the piecewise-linear interpolant of `path`.
pub fn estimate_pl(path: &BrownianPath, grid: &SpatialGrid) -> Result<LocalTimeField> {
    check_covers(path, grid)?;
    let dt = path.dt();
    let flat_floor = FLAT_FLOOR_FACTOR * dt.sqrt();
    let mut mass = vec![0.0; grid.cell_count()];

    for seg in path.values().windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let width = hi - lo;
        if width < flat_floor {
            let mid = 0.5 * (a + b);
            let j = grid.clamp_cell(mid);
            if mid == grid.left_edge(j) && j > 0 {
                mass[j - 1] += 0.5 * dt;
                mass[j] += 0.5 * dt;
            } else {
                mass[j] += dt;
            }
            continue;
        }
        let j_lo = grid.clamp_cell(lo);
        let j_hi = grid.clamp_cell(hi);
        if j_lo == j_hi {
            mass[j_lo] += dt;
            continue;
        }
        let density = dt / width;
        let mut deposited = 0.0;
        let first = density * (grid.right_edge(j_lo) - lo);
        mass[j_lo] += first;
        deposited += first;
        for cell in mass.iter_mut().take(j_hi).skip(j_lo + 1) {
            let m = density * grid.dx;
            *cell += m;
            deposited += m;
        }
        // Remainder to the last cell keeps each segment's mass exactly dt.
        mass[j_hi] += dt - deposited;
    }

    let inv_dx = 1.0 / grid.dx();
    for m in mass.iter_mut() {
        *m = (*m * inv_dx).max(0.0);
    }
    Ok(LocalTimeField {
        grid: *grid,
        values: mass,
        estimator: Estimator::PiecewiseLinear,
        normalized: false,
    })
}

/// Kernel half-width for `n_steps`: `2^-8` at `2^20` steps, shrinking like
/// `n^{-1/4}` (slower than `sqrt(dt)`), never below `dx`.
pub fn default_kernel_eps(n_steps: usize, dx: f64) -> f64 {
    let scale = ((1u64 << 20) as f64 / n_steps as f64).powf(0.25);
    (DEFAULT_KERNEL_EPS * scale).max(dx)
}

/// Windowed occupation estimator with half-width `eps`.
pub fn estimate_kernel(path: &BrownianPath, grid: &SpatialGrid, eps: f64) -> Result<LocalTimeField> {
    if !(eps >= grid.dx()) {
        return Err(LabError::InvalidArgument(format!(
            "kernel half-width {eps} is smaller than dx = {}",
            grid.dx()
        )));
    }
    check_covers(path, grid)?;
    let n = grid.cell_count() as i64;
    let first = grid.first_cell() as f64;
    let inv_dx = 1.0 / grid.dx();
    // Hit counts via a difference array; cell j counts when |W_i - x_j| < eps.
    let mut diff = vec![0i64; grid.cell_count() + 1];
    let values = path.values();
    for &w in &values[..values.len() - 1] {
        let lo_r = (w - eps) * inv_dx - first - 0.5;
        let hi_r = (w + eps) * inv_dx - first - 0.5;
        let j_lo = (lo_r.floor() as i64 + 1).max(0);
        let j_hi = (hi_r.ceil() as i64 - 1).min(n - 1);
        if j_lo <= j_hi {
            diff[j_lo as usize] += 1;
            diff[j_hi as usize + 1] -= 1;
        }
    }
    let scale = path.dt() / (2.0 * eps);
    let mut running = 0i64;
    let field = diff[..grid.cell_count()]
        .iter()
        .map(|d| {
            running += d;
            running as f64 * scale
        })
        .collect();
    Ok(LocalTimeField {
        grid: *grid,
        values: field,
        estimator: Estimator::Kernel { eps },
        normalized: false,
    })
}

pub fn estimate(path: &BrownianPath, grid: &SpatialGrid, estimator: Estimator) -> Result<LocalTimeField> {
    match estimator {
        Estimator::PiecewiseLinear => estimate_pl(path, grid),
        Estimator::Kernel { eps } => estimate_kernel(path, grid, eps),
    }
}

/// Total time `Σ L_j dx`.
pub fn occupation(field: &LocalTimeField) -> f64 {
    let mut acc = NeumaierSum::default();
    for v in &field.values {
        acc.add(*v * field.grid.dx);
    }
    acc.value()
}

/// `∫_a^b L^u du` with partial end cells weighted by overlap.
pub fn integrate_field(field: &LocalTimeField, a: f64, b: f64) -> Result<f64> {
    if !(a <= b) {
        return Err(LabError::InvalidArgument(format!("need a <= b, got [{a}, {b}]")));
    }
    let g = &field.grid;
    if !g.covers(a, b) {
        return Err(LabError::OutOfRange(format!(
            "[{a}, {b}] outside grid [{}, {}]",
            g.x_min(),
            g.x_max()
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let j_lo = g.clamp_cell(a);
    let j_hi = g.clamp_cell(b);
    let mut acc = NeumaierSum::default();
    for j in j_lo..=j_hi {
        let overlap = b.min(g.right_edge(j)) - a.max(g.left_edge(j));
        if overlap > 0.0 {
            acc.add(overlap * field.values[j]);
        }
    }
    Ok(acc.value())
}

/// Outermost cell edges where `L > threshold`, widened to contain 0.
pub fn support(field: &LocalTimeField, threshold: f64) -> SupportInterval {
    let above = |v: &f64| *v > threshold;
    match (
        field.values.iter().position(above),
        field.values.iter().rposition(above),
    ) {
        (Some(lo), Some(hi)) => SupportInterval {
            lower: field.grid.left_edge(lo).min(0.0),
            upper: field.grid.right_edge(hi).max(0.0),
        },
        _ => SupportInterval { lower: 0.0, upper: 0.0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    use crate::path_engine::{simulate_path, SeedId};

    fn unit_block() -> LocalTimeField {
        let grid = SpatialGrid::new(-0.5, 1.5, 0.25).unwrap();
        let values = (0..8)
            .map(|j| if (2..6).contains(&j) { 1.0 } else { 0.0 })
            .collect();
        LocalTimeField::from_values(grid, values, Estimator::PiecewiseLinear).unwrap()
    }

    fn tent_field() -> LocalTimeField {
        let path = BrownianPath::from_values(vec![0.0, 0.5, 0.0]).unwrap();
        let grid = SpatialGrid::new(-0.25, 0.75, 0.25).unwrap();
        estimate_pl(&path, &grid).unwrap()
    }

    #[test]
    fn grid_alignment() {
        let g = SpatialGrid::new(-0.5, 1.5, 0.25).unwrap();
        assert_eq!(g.cell_count(), 8);
        assert_eq!(g.x_max() - g.x_min(), g.cell_count() as f64 * g.dx());
        assert_eq!(g.shift_cells(0.5).unwrap(), 2);
        assert!(matches!(g.shift_cells(0.3), Err(LabError::Alignment { .. })));
        assert!(SpatialGrid::new(0.1, 1.0, 0.25).is_err());
        let g = SpatialGrid::covering(-0.013, 0.3, 0.00125, 0.4).unwrap();
        assert_eq!(g.shift_cells(0.02).unwrap(), 16);
        assert_eq!(g.shift_cells(0.2).unwrap(), 160);
        assert!(g.covers(-0.413, 0.7));
    }

    #[test]
    fn pl_single_segment() {
        let path = BrownianPath::from_values(vec![0.0, 1.0]).unwrap();
        let grid = SpatialGrid::new(0.0, 1.0, 0.25).unwrap();
        let f = estimate_pl(&path, &grid).unwrap();
        for v in f.values() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(occupation(&f), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn pl_tent_path() {
        let f = tent_field();
        assert_eq!(f.values(), &[0.0, 2.0, 2.0, 0.0]);
        assert_abs_diff_eq!(occupation(&f), 1.0, epsilon = 1e-15);
        let s = support(&f, 0.0);
        assert_eq!((s.lower, s.upper), (0.0, 0.5));
    }

    #[test]
    fn pl_flat_segment_goes_to_midpoint() {
        let path = BrownianPath::from_values(vec![0.0, 0.3, 0.3 + 1e-9, 0.0]).unwrap();
        let grid = SpatialGrid::new(-0.25, 0.5, 0.25).unwrap();
        let f = estimate_pl(&path, &grid).unwrap();
        assert_abs_diff_eq!(occupation(&f), 1.0, epsilon = 1e-14);
        // Two sloped segments spread 1/3 each over [0, 0.3]; the flat one sits in [0.25, 0.5).
        let expected_last = (2.0 / 3.0) * (0.05 / 0.3) / 0.25 + (1.0 / 3.0) / 0.25;
        assert_abs_diff_eq!(f.values()[2], expected_last, epsilon = 1e-8);
    }

    #[test]
    fn pl_rejects_uncovered_path() {
        let path = BrownianPath::from_values(vec![0.0, 2.0]).unwrap();
        let grid = SpatialGrid::new(0.0, 1.0, 0.25).unwrap();
        assert!(matches!(estimate_pl(&path, &grid), Err(LabError::OutOfRange(_))));
    }

    #[test]
    fn pl_mass_on_random_paths() {
        for i in 0..10 {
            let path = simulate_path(1 << 14, SeedId::new(11, i)).unwrap();
            let grid = SpatialGrid::for_path(&path, 0.02, 0.2).unwrap();
            let f = estimate_pl(&path, &grid).unwrap();
            assert_abs_diff_eq!(occupation(&f), 1.0, epsilon = 1e-12);
            assert!(f.values().iter().all(|v| *v >= 0.0));
            let (lo, hi) = path_range(&path);
            let s = support(&f, 0.0);
            assert!(s.lower >= lo - grid.dx() && s.upper <= hi + grid.dx());
        }
    }

    #[test]
    fn kernel_constant_path() {
        let path = BrownianPath::from_values(vec![0.0; 5]).unwrap();
        let grid = SpatialGrid::new(-1.0, 1.0, 0.125).unwrap();
        let f = estimate_kernel(&path, &grid, 0.5).unwrap();
        for j in 0..grid.cell_count() {
            let expected = if grid.center(j).abs() < 0.5 { 1.0 } else { 0.0 };
            assert_eq!(f.values()[j], expected, "cell {j}");
        }
    }

    #[test]
    fn kernel_single_segment_center() {
        // Linear path 0 -> 1 sampled finely; at x = 0.5 the window holds time 2 eps.
        let n = 1 << 12;
        let values = (0..=n).map(|i| i as f64 / n as f64).collect();
        let path = BrownianPath::from_values(values).unwrap();
        let grid = SpatialGrid::new(0.0, 1.0, 1.0 / 64.0).unwrap();
        let f = estimate_kernel(&path, &grid, 0.5).unwrap();
        assert_abs_diff_eq!(f.value_at(0.5), 1.0, epsilon = 1e-2);
    }

    #[test]
    fn kernel_rejects_narrow_window() {
        let path = BrownianPath::from_values(vec![0.0, 0.1]).unwrap();
        let grid = SpatialGrid::new(-1.0, 1.0, 0.125).unwrap();
        assert!(matches!(
            estimate_kernel(&path, &grid, 0.1),
            Err(LabError::InvalidArgument(_))
        ));
    }

    #[test]
    fn occupation_cases() {
        let grid = SpatialGrid::new(0.0, 1.0, 0.25).unwrap();
        let zero = LocalTimeField::from_values(grid, vec![0.0; 4], Estimator::PiecewiseLinear).unwrap();
        assert_eq!(occupation(&zero), 0.0);
        assert_abs_diff_eq!(occupation(&tent_field()), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn integrate_cases() {
        let f = unit_block();
        assert_abs_diff_eq!(integrate_field(&f, 0.25, 0.5).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(integrate_field(&f, 0.1, 0.3).unwrap(), 0.2, epsilon = 1e-15);
        assert_eq!(integrate_field(&f, 0.3, 0.3).unwrap(), 0.0);
        assert_abs_diff_eq!(
            integrate_field(&f, -0.5, 1.5).unwrap(),
            occupation(&f),
            epsilon = 1e-15
        );
        assert!(matches!(integrate_field(&f, -1.0, 0.0), Err(LabError::OutOfRange(_))));
    }

    #[test]
    fn support_cases() {
        let f = unit_block();
        let s = support(&f, 0.5);
        assert_eq!((s.lower, s.upper), (0.0, 1.0));
        let grid = SpatialGrid::new(0.0, 1.0, 0.25).unwrap();
        let zero = LocalTimeField::from_values(grid, vec![0.0; 4], Estimator::PiecewiseLinear).unwrap();
        let s = support(&zero, 0.0);
        assert_eq!((s.lower, s.upper), (0.0, 0.0));
    }

    #[test]
    fn normalization() {
        let grid = SpatialGrid::new(0.0, 1.0, 0.25).unwrap();
        let f = LocalTimeField::from_values(grid, vec![1.0, 2.0, 3.0, 2.0], Estimator::PiecewiseLinear)
            .unwrap()
            .normalize()
            .unwrap();
        assert!(f.is_normalized());
        assert_abs_diff_eq!(occupation(&f), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn point_values() {
        let f = tent_field();
        assert_eq!(f.value_at(0.25), 2.0);
        assert_eq!(f.value_at(0.0), 1.0);
        assert_eq!(f.value_at(-5.0), 0.0);
    }

    #[test]
    fn csv_dump() {
        let mut buf = Vec::new();
        tent_field().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "x_center,L_value\n-0.125,0\n0.125,2\n0.375,2\n0.625,0\n"
        );
    }
}
