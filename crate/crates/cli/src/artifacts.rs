//! On-disk outputs: `result.json`, `errors.csv`, `response.csv` and sample tables.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use dssa_core::symbolic::evaluate_rational;
use dssa_core::{
    CircuitModel, DataPoint, FrequencyGrid, NumericRational, SymbolicRational, TestMetrics,
};
use num_complex::Complex64;

use crate::pipeline::RunReport;

pub fn result_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn errors_csv(metrics: &TestMetrics) -> String {
    let mut out = String::from("point,dc_error_db,max_root_error_pct,feasible\n");
    for (i, p) in metrics.per_point.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            i + 1,
            p.dc_error_db,
            p.max_root_error_pct,
            p.feasible
        );
    }
    out
}

fn mag_phase(h: Option<Complex64>) -> (f64, f64) {
    match h {
        Some(h) if h.is_finite() => (20.0 * h.norm().log10(), h.arg().to_degrees()),
        _ => (f64::NAN, f64::NAN),
    }
}

/// Bode data of the exact and simplified functions at nominal values.
pub fn response_csv(
    model: &CircuitModel,
    nominal: &NumericRational,
    simplified: &SymbolicRational,
    grid: &FrequencyGrid,
) -> String {
    let values = model.nominal_values();
    let mut out = String::from(
        "freq_hz,exact_mag_db,exact_phase_deg,simplified_mag_db,simplified_phase_deg\n",
    );
    for (&f, &s) in grid.freqs_hz.iter().zip(&grid.points) {
        let (em, ep) = mag_phase(Some(nominal.eval(s)));
        let (sm, sp) = mag_phase(evaluate_rational(simplified, &values, s).ok());
        let _ = writeln!(out, "{f},{em},{ep},{sm},{sp}");
    }
    out
}

fn fmt_root(r: &Complex64) -> String {
    if r.im < 0.0 {
        format!("{}-{}j", r.re, -r.im)
    } else {
        format!("{}+{}j", r.re, r.im)
    }
}

/// One row per sample; roots are `;`-separated `a+bj` values.
pub fn samples_csv(model: &CircuitModel, points: &[DataPoint]) -> String {
    let mut out = String::from("d");
    for name in model.param_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",dc_db,poles,zeros\n");
    for (d, p) in points.iter().enumerate() {
        let _ = write!(out, "{}", d + 1);
        for v in &p.values {
            let _ = write!(out, ",{v}");
        }
        let dc = p.exact_dc.map(|g| g.db.to_string()).unwrap_or_default();
        let join = |rs: &[Complex64]| rs.iter().map(fmt_root).collect::<Vec<_>>().join(";");
        let _ = writeln!(
            out,
            ",{dc},{},{}",
            join(&p.exact_poles),
            join(&p.exact_zeros)
        );
    }
    out
}

pub fn write_run_outputs(
    dir: &Path,
    report: &RunReport,
    model: &CircuitModel,
    nominal: &NumericRational,
    simplified: &SymbolicRational,
    grid: &FrequencyGrid,
) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("result.json"), result_json(report))?;
    fs::write(dir.join("errors.csv"), errors_csv(&report.test))?;
    fs::write(
        dir.join("response.csv"),
        response_csv(model, nominal, simplified, grid),
    )?;
    Ok(())
}
