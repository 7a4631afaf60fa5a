//! Numeric MNA engine.
//!
//! The pencil `G + s·C` is assembled from element stamps with an ideal unit
//! voltage source driving the input node. Exact transfer-function
//! coefficients are recovered by evaluating the system determinant and the
//! output response on a circle of sample points in the normalized frequency
//! `s' = s/ω₀` and interpolating.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::netlist::{CircuitModel, ElementKind};

/// Relative threshold below which boundary coefficients are treated as zero.
pub const EPS_TRIM: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("singular system at s = {s} (rcond ~ {rcond:.3e})")]
    Singular { s: Complex64, rcond: f64 },
    #[error("coefficient interpolation failed: {0}")]
    Interpolation(String),
    #[error("no finite nonzero dc gain")]
    NoFiniteDc,
    #[error("expected {expected} parameter values, got {got}")]
    ValueCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnaPencil {
    pub g: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub b: DVector<f64>,
    pub out_index: usize,
    /// Upper bound on the determinant degree in `s` (number of capacitors, capped by size).
    pub degree_bound: usize,
    /// Characteristic frequency used to bootstrap coefficient extraction.
    pub omega_hint: f64,
}

impl MnaPencil {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    fn system(&self, s: Complex64) -> DMatrix<Complex64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| {
            Complex64::new(self.g[(i, j)], 0.0) + s * self.c[(i, j)]
        })
    }
}

pub fn build_pencil(model: &CircuitModel, values: &[f64]) -> Result<MnaPencil, NumericError> {
    if values.len() != model.param_count() {
        return Err(NumericError::ValueCount {
            expected: model.param_count(),
            got: values.len(),
        });
    }
    debug_assert!(values.iter().all(|&v| v > 0.0));
    let nodes = model.node_count();
    let n = nodes + 1;
    let mut g = DMatrix::zeros(n, n);
    let mut c = DMatrix::zeros(n, n);
    // Node `k` maps to row `k - 1`; ground is dropped.
    let row = |node: usize| node.checked_sub(1);

    let stamp = |m: &mut DMatrix<f64>, r: usize, col: usize, v: f64| {
        if let (Some(i), Some(j)) = (row(r), row(col)) {
            m[(i, j)] += v;
        }
    };

    let mut log_g = (0.0, 0usize);
    let mut log_c = (0.0, 0usize);
    for e in &model.elements {
        let v = values[e.parameter_index];
        let t = &e.terminals;
        match e.kind {
            ElementKind::Conductance | ElementKind::Capacitance => {
                let m = if e.kind == ElementKind::Capacitance {
                    log_c = (log_c.0 + v.ln(), log_c.1 + 1);
                    &mut c
                } else {
                    log_g = (log_g.0 + v.ln(), log_g.1 + 1);
                    &mut g
                };
                stamp(m, t[0], t[0], v);
                stamp(m, t[1], t[1], v);
                stamp(m, t[0], t[1], -v);
                stamp(m, t[1], t[0], -v);
            }
            ElementKind::Vccs => {
                log_g = (log_g.0 + v.ln(), log_g.1 + 1);
                stamp(&mut g, t[0], t[2], v);
                stamp(&mut g, t[0], t[3], -v);
                stamp(&mut g, t[1], t[2], -v);
                stamp(&mut g, t[1], t[3], v);
            }
        }
    }

    let src = nodes;
    let input = model.input_node - 1;
    g[(input, src)] += 1.0;
    g[(src, input)] += 1.0;
    let mut b = DVector::zeros(n);
    b[src] = 1.0;

    let mean = |(sum, count): (f64, usize)| {
        if count == 0 {
            1.0
        } else {
            (sum / count as f64).exp()
        }
    };
    let omega_hint = mean(log_g) / mean(log_c);

    Ok(MnaPencil {
        g,
        c,
        b,
        out_index: model.output_node - 1,
        degree_bound: model.capacitor_count().min(n),
        omega_hint,
    })
}

/// Determinant of `G + s·C` and the output-node voltage.
fn solve_at(pencil: &MnaPencil, s: Complex64) -> Result<(Complex64, Complex64), NumericError> {
    let a = pencil.system(s);
    let lu = a.lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].norm()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let rcond = if max > 0.0 { min / max } else { 0.0 };
    if rcond.is_nan() || rcond <= 1e-15 {
        return Err(NumericError::Singular { s, rcond });
    }
    let det = lu.determinant();
    let rhs = pencil.b.map(|v| Complex64::new(v, 0.0));
    let v = lu.solve(&rhs).ok_or(NumericError::Singular { s, rcond })?;
    Ok((det, v[pencil.out_index]))
}

pub fn eval_response(pencil: &MnaPencil, s: Complex64) -> Result<Complex64, NumericError> {
    solve_at(pencil, s).map(|(_, h)| h)
}

/// Rational transfer function with ascending real coefficients in `s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericRational {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl NumericRational {
    pub fn num_degree(&self) -> usize {
        self.num.len().saturating_sub(1)
    }

    pub fn den_degree(&self) -> usize {
        self.den.len().saturating_sub(1)
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        poly_eval(&self.num, s) / poly_eval(&self.den, s)
    }

    pub fn poles(&self) -> Vec<Complex64> {
        find_roots(&self.den)
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        find_roots(&self.num)
    }
}

/// Horner evaluation of an ascending coefficient vector.
pub fn poly_eval(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

fn poly_eval_c(coeffs: &[Complex64], s: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * s + p;
        p = p * s + c;
    }
    (p, dp)
}

/// Interpolates real polynomial coefficients from values at `ω₀·e^{i(2πk+φ)/L}`.
fn circle_interpolate(values: &[Complex64], phase: f64) -> Vec<f64> {
    let l = values.len();
    (0..l)
        .map(|j| {
            let sum: Complex64 = values
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let theta = (2.0 * PI * k as f64 + phase) / l as f64;
                    v * Complex64::from_polar(1.0, -(j as f64) * theta)
                })
                .sum();
            sum.re / l as f64
        })
        .collect()
}

/// Zeroes boundary coefficients below `EPS_TRIM · max` and drops trailing zeros.
fn trim_normalized(coeffs: &mut Vec<f64>) {
    let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if max == 0.0 {
        coeffs.truncate(1);
        return;
    }
    let tiny = |c: f64| c.abs() < EPS_TRIM * max;
    while coeffs.len() > 1 && tiny(*coeffs.last().unwrap()) {
        coeffs.pop();
    }
    for c in coeffs.iter_mut() {
        if tiny(*c) {
            *c = 0.0;
        } else {
            break;
        }
    }
}

fn extract_at(pencil: &MnaPencil, omega0: f64) -> Result<NumericRational, NumericError> {
    let l = pencil.degree_bound + 1;
    let mut last_err = None;
    for attempt in 0..2 {
        let phase = 0.5 + 0.37 * attempt as f64;
        let mut dets = Vec::with_capacity(l);
        let mut nums = Vec::with_capacity(l);
        let mut failed = 0;
        for k in 0..l {
            let theta = (2.0 * PI * k as f64 + phase) / l as f64;
            let s = Complex64::from_polar(omega0, theta);
            match solve_at(pencil, s) {
                Ok((det, h)) => {
                    dets.push(det);
                    nums.push(h * det);
                }
                Err(e) => {
                    failed += 1;
                    last_err = Some(e);
                    break;
                }
            }
        }
        if failed > 0 {
            continue;
        }
        let mut den = circle_interpolate(&dets, phase);
        let mut num = circle_interpolate(&nums, phase);
        trim_normalized(&mut den);
        // The numerator is trimmed relative to its own scale.
        trim_normalized(&mut num);
        // Undo the frequency normalization: a'_j = a_j·ω₀^j.
        let denorm = |v: &mut Vec<f64>| {
            let mut scale = 1.0;
            for c in v.iter_mut() {
                *c /= scale;
                scale *= omega0;
            }
        };
        denorm(&mut den);
        denorm(&mut num);
        let norm = den.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if norm == 0.0 || !norm.is_finite() {
            return Err(NumericError::Interpolation("zero denominator".into()));
        }
        den.iter_mut().for_each(|c| *c /= norm);
        num.iter_mut().for_each(|c| *c /= norm);
        return Ok(NumericRational { num, den });
    }
    Err(NumericError::Interpolation(format!(
        "singular sample points: {}",
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// Extracts exact numerator and denominator coefficients.
///
/// A first pass samples around the element-value hint; the second pass
/// re-centres the sample circle on the geometric mean of the denominator
/// root magnitudes.
pub fn extract_coeffs(pencil: &MnaPencil) -> Result<NumericRational, NumericError> {
    let first = extract_at(pencil, pencil.omega_hint)?;
    let roots = find_roots(&first.den);
    let mags: Vec<f64> = roots
        .iter()
        .map(|r| r.norm())
        .filter(|&m| m > 0.0)
        .collect();
    if mags.is_empty() {
        return Ok(first);
    }
    let omega0 = (mags.iter().map(|m| m.ln()).sum::<f64>() / mags.len() as f64).exp();
    extract_at(pencil, omega0)
}

/// Roots of an ascending real coefficient vector.
///
/// Exact zero roots are split off first; the rest come from the eigenvalues
/// of the companion matrix of the scaled polynomial, each polished with one
/// Newton step.
pub fn find_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let mut hi = coeffs.len();
    while hi > 0 && coeffs[hi - 1] == 0.0 {
        hi -= 1;
    }
    let coeffs = &coeffs[..hi];
    let lo = coeffs.iter().take_while(|&&c| c == 0.0).count();
    if coeffs.len() <= 1 {
        return Vec::new();
    }
    let mut roots = vec![Complex64::new(0.0, 0.0); lo];
    let p = &coeffs[lo..];
    let deg = p.len() - 1;
    if deg == 0 {
        return roots;
    }
    // s = scale·u makes the constant and leading coefficients equal in size.
    let scale = (p[0] / p[deg]).abs().powf(1.0 / deg as f64);
    let mut q: Vec<f64> = Vec::with_capacity(p.len());
    let mut f = 1.0;
    for &c in p {
        q.push(c * f);
        f *= scale;
    }
    let lead = q[deg];
    q.iter_mut().for_each(|c| *c /= lead);

    let scaled: Vec<Complex64> = match deg {
        1 => vec![Complex64::new(-q[0], 0.0)],
        2 => quadratic_roots(q[1], q[0]),
        _ => {
            let mut comp = DMatrix::<f64>::zeros(deg, deg);
            for i in 1..deg {
                comp[(i, i - 1)] = 1.0;
            }
            for i in 0..deg {
                comp[(i, deg - 1)] = -q[i];
            }
            comp.complex_eigenvalues().iter().cloned().collect()
        }
    };
    let qc: Vec<Complex64> = q.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    for r in scaled {
        let (v, dv) = poly_eval_c(&qc, r);
        let polished = if dv.norm() > 0.0 { r - v / dv } else { r };
        let r = if polished.is_finite() && poly_eval_c(&qc, polished).0.norm() <= v.norm() {
            polished
        } else {
            r
        };
        roots.push(r * scale);
    }
    roots
}

/// Roots of the monic `u² + b·u + c`, without cancellation.
fn quadratic_roots(b: f64, c: f64) -> Vec<Complex64> {
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let q = if b >= 0.0 {
            -0.5 * (b + sq)
        } else {
            -0.5 * (b - sq)
        };
        let r2 = if q != 0.0 { c / q } else { 0.0 };
        vec![Complex64::new(q, 0.0), Complex64::new(r2, 0.0)]
    } else {
        let re = -0.5 * b;
        let im = 0.5 * (-disc).sqrt();
        vec![Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DcGain {
    pub db: f64,
    pub positive: bool,
}

pub fn dc_gain(r: &NumericRational) -> Result<DcGain, NumericError> {
    let f0 = r.num.first().copied().unwrap_or(0.0);
    let g0 = r.den.first().copied().unwrap_or(0.0);
    if f0 == 0.0 || g0 == 0.0 {
        return Err(NumericError::NoFiniteDc);
    }
    let ratio = f0 / g0;
    Ok(DcGain {
        db: 20.0 * ratio.abs().log10(),
        positive: ratio > 0.0,
    })
}
