//! CSV tables, plain-text summaries and histogram data.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a table
//! read back with [`read_per_path_csv`] reproduces the rows bit for bit.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{LabError, Result};
use crate::experiments::{
    CrossValidationRow, ExperimentKind, ExperimentReport, GateOutcome, PathRow, ScalingReport, SmallLtReport,
    SummaryRow, KS_GATE, MEAN_GATE, VARIANCE_GATE,
};

pub const PER_PATH_HEADER: [&str; 13] = [
    "path_index",
    "h",
    "t",
    "n_steps",
    "v_stat",
    "lln_limit",
    "u_stat",
    "cond_var_integral",
    "studentized",
    "r_correction",
    "functional_residual",
    "g_term",
    "centering_budget",
];

pub const SUMMARY_HEADER: [&str; 15] = [
    "h",
    "t",
    "n_steps",
    "paths",
    "degenerate",
    "mean_v",
    "mean_error",
    "rms_error",
    "mean",
    "sd",
    "skewness",
    "ks_statistic",
    "ks_p_value",
    "mean_centering_budget",
    "gates_passed",
];

/// Histogram range; values outside are counted in the end bins.
pub const HISTOGRAM_RANGE: (f64, f64) = (-4.0, 4.0);
pub const HISTOGRAM_BINS: usize = 32;

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_per_path_csv<W: Write>(rows: &[PathRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PER_PATH_HEADER)?;
    for r in rows {
        w.write_record([
            r.path_index.to_string(),
            num(r.h),
            opt(r.t),
            r.n_steps.to_string(),
            num(r.v_stat),
            num(r.lln_limit),
            num(r.u_stat),
            num(r.cond_var_integral),
            opt(r.studentized),
            opt(r.r_correction),
            opt(r.functional_residual),
            opt(r.g_term),
            opt(r.centering_budget),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_per_path_csv<R: Read>(input: R) -> Result<Vec<PathRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(PER_PATH_HEADER) {
        return Err(LabError::Configuration(format!("unexpected per-path header {header:?}")));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let bad = |col: usize| LabError::Parse {
            position: line + 2,
            message: format!("bad value in column {}", PER_PATH_HEADER[col]),
        };
        let float = |col: usize| record[col].parse::<f64>().map_err(|_| bad(col));
        let maybe = |col: usize| -> Result<Option<f64>> {
            if record[col].is_empty() {
                Ok(None)
            } else {
                float(col).map(Some)
            }
        };
        rows.push(PathRow {
            path_index: record[0].parse().map_err(|_| bad(0))?,
            h: float(1)?,
            t: maybe(2)?,
            n_steps: record[3].parse().map_err(|_| bad(3))?,
            v_stat: float(4)?,
            lln_limit: float(5)?,
            u_stat: float(6)?,
            cond_var_integral: float(7)?,
            studentized: maybe(8)?,
            r_correction: maybe(9)?,
            functional_residual: maybe(10)?,
            g_term: maybe(11)?,
            centering_budget: maybe(12)?,
        });
    }
    Ok(rows)
}

pub fn write_summary_csv<W: Write>(summary: &[SummaryRow], variance_tolerance: f64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for s in summary {
        let gates = GateOutcome::evaluate(s, variance_tolerance);
        w.write_record([
            num(s.h),
            opt(s.t),
            s.n_steps.to_string(),
            s.paths.to_string(),
            s.degenerate.to_string(),
            num(s.mean_v),
            num(s.mean_error),
            num(s.rms_error),
            num(s.mean),
            num(s.sd),
            num(s.skewness),
            opt(s.ks.map(|k| k.statistic)),
            opt(s.ks.map(|k| k.p_value)),
            opt(s.mean_centering_budget),
            gates.passed_count().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Histogram of each group's sample: `h, t, bin_left, bin_right, count`.
pub fn write_histogram_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let (lo, hi) = HISTOGRAM_RANGE;
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["h", "t", "bin_left", "bin_right", "count"])?;
    for s in &report.summary {
        let mut counts = [0usize; HISTOGRAM_BINS];
        for r in report.per_path.iter().filter(|r| r.h == s.h && r.t == s.t) {
            if let Some(x) = report.kind.sample_value(r) {
                let bin = ((x - lo) / width).floor().clamp(0.0, (HISTOGRAM_BINS - 1) as f64);
                counts[bin as usize] += 1;
            }
        }
        for (i, c) in counts.iter().enumerate() {
            w.write_record([
                num(s.h),
                opt(s.t),
                num(lo + width * i as f64),
                num(lo + width * (i + 1) as f64),
                c.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn variance_tolerance_for(kind: ExperimentKind, function_spec: &str) -> f64 {
    match (kind, function_spec.trim()) {
        (ExperimentKind::Clt, "mono:2" | "mono:3") => VARIANCE_GATE,
        (ExperimentKind::Clt, _) => 0.3,
        _ => VARIANCE_GATE,
    }
}

/// Plain-text summary with a calibration header. Contains no timings, so it
/// is as reproducible as the CSV tables.
pub fn write_text_summary<W: Write>(report: &ExperimentReport, mut out: W) -> Result<()> {
    let c = &report.config;
    let var_tol = variance_tolerance_for(report.kind, &c.function_spec);
    writeln!(out, "experiment: {}", report.kind.name())?;
    writeln!(out, "function: {}", c.function_spec)?;
    writeln!(out, "paths: {}  master seed: {}", c.path_count, c.master_seed)?;
    writeln!(out, "estimator: {}  normalized: {}", c.estimator.tag(), c.normalize)?;
    match c.n_steps {
        Some(n) => writeln!(out, "steps: {n} for every h")?,
        None => writeln!(out, "steps: schedule (2^20 for h >= 0.05, 2^21 below)")?,
    }
    writeln!(out, "grid spacing: {}", c.dx())?;
    writeln!(
        out,
        "calibration: gates |mean| <= {MEAN_GATE}, |var - 1| <= {var_tol}, KS p >= {KS_GATE}; pass = 2 of 3. \
         Tolerances and step schedule are calibration choices, not derived rates."
    )?;
    writeln!(out)?;
    for s in &report.summary {
        let gates = GateOutcome::evaluate(s, var_tol);
        let t = s.t.map(|t| format!(" t={t}")).unwrap_or_default();
        writeln!(
            out,
            "h={}{t} n={} paths={} degenerate={} mean_v={:.6} mean_err={:.6} rms_err={:.6}",
            s.h, s.n_steps, s.paths, s.degenerate, s.mean_v, s.mean_error, s.rms_error
        )?;
        let ks = s
            .ks
            .map(|k| format!("KS D={:.5} p={:.5}", k.statistic, k.p_value))
            .unwrap_or_else(|| "KS n/a".into());
        writeln!(
            out,
            "  sample mean={:.5} var={:.5} skew={:.5} {ks} gates={}/3{}",
            s.mean,
            s.variance(),
            s.skewness,
            gates.passed_count(),
            s.mean_centering_budget
                .map(|b| format!(" centering_budget={b:.5}"))
                .unwrap_or_default()
        )?;
    }
    if let Some(slope) = report.slope {
        let label = match report.kind {
            ExperimentKind::Correction { .. } => "R_q scaling exponent",
            _ => "RMS error slope",
        };
        writeln!(out, "\n{label}: {slope:.5}")?;
    }
    Ok(())
}

/// Write `per_path.csv`, `summary.csv`, `histogram.csv` and `summary.txt`.
pub fn write_report_files(report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let var_tol = variance_tolerance_for(report.kind, &report.config.function_spec);
    write_per_path_csv(&report.per_path, fs::File::create(dir.join("per_path.csv"))?)?;
    write_summary_csv(&report.summary, var_tol, fs::File::create(dir.join("summary.csv"))?)?;
    write_histogram_csv(report, fs::File::create(dir.join("histogram.csv"))?)?;
    write_text_summary(report, fs::File::create(dir.join("summary.txt"))?)?;
    Ok(())
}

pub fn write_small_lt_csv<W: Write>(report: &SmallLtReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x0", "eps", "paths", "hits", "events", "frequency", "hit_frequency", "ratio_to_half"])?;
    for r in &report.rows {
        w.write_record([
            num(report.x0),
            num(r.eps),
            report.paths.to_string(),
            report.hits.to_string(),
            r.events.to_string(),
            num(r.frequency),
            num(report.hit_frequency),
            opt(r.ratio_to_half),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_small_lt_paths_csv<W: Write>(report: &SmallLtReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path_index", "hit", "local_time_at_x0"])?;
    for (i, (hit, l)) in report.per_path.iter().enumerate() {
        w.write_record([i.to_string(), hit.to_string(), num(*l)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scaling_csv<W: Write>(report: &ScalingReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["h", "rms_increment", "slope"])?;
    for (h, r) in report.h_list.iter().zip(&report.rms) {
        w.write_record([num(*h), num(*r), num(report.slope)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cross_validation_csv<W: Write>(rows: &[CrossValidationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "path_index",
        "n_steps",
        "sup_norm",
        "occupation_pl",
        "occupation_kernel",
        "v_stat_pl",
        "v_stat_kernel",
    ])?;
    for r in rows {
        w.write_record([
            r.path_index.to_string(),
            r.n_steps.to_string(),
            num(r.sup_norm),
            num(r.occupation_pl),
            num(r.occupation_kernel),
            num(r.v_stat_pl),
            num(r.v_stat_kernel),
        ])?;
    }
    w.flush()?;
    Ok(())
}
