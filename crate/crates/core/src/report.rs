//! Held-out accuracy metrics for a simplified function.

use serde::{Deserialize, Serialize};

use crate::fitness::{assess_points, FitnessConfig, PointCheck};
use crate::sampling::{DataPoint, FrequencyGrid};
use crate::symbolic::{SymbolicPolynomial, SymbolicRational};

/// Per-point figures written to `errors.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub dc_error_db: f64,
    /// Largest relative pole or zero displacement, in percent.
    pub max_root_error_pct: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    pub points: usize,
    pub avg_dc_error_db: f64,
    pub max_dc_error_db: f64,
    /// Mean over every matched (point, exact root) pair.
    pub avg_root_error_pct: f64,
    pub max_root_error_pct: f64,
    pub feasible_points: usize,
    #[serde(skip)]
    pub per_point: Vec<PointMetrics>,
}

impl TestMetrics {
    pub fn from_checks(checks: &[PointCheck], cfg: &FitnessConfig) -> Self {
        let n = checks.len();
        let dc: Vec<f64> = checks.iter().map(|c| c.dc_error_db).collect();
        let roots: Vec<f64> = checks
            .iter()
            .flat_map(|c| c.pole_errors.iter().chain(&c.zero_errors))
            .map(|e| e * 100.0)
            .collect();
        let mean = |v: &[f64]| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
        let per_point: Vec<PointMetrics> = checks
            .iter()
            .map(|c| PointMetrics {
                dc_error_db: c.dc_error_db,
                max_root_error_pct: c.max_root_error() * 100.0,
                feasible: c.slacks(cfg).all_satisfied(),
            })
            .collect();
        Self {
            points: n,
            avg_dc_error_db: mean(&dc),
            max_dc_error_db: max(&dc),
            avg_root_error_pct: mean(&roots),
            max_root_error_pct: max(&roots),
            feasible_points: per_point.iter().filter(|p| p.feasible).count(),
            per_point,
        }
    }

    pub fn all_feasible(&self) -> bool {
        self.feasible_points == self.points
    }
}

pub fn test_metrics(
    sr: &SymbolicRational,
    points: &[DataPoint],
    grid: &FrequencyGrid,
    cfg: &FitnessConfig,
) -> TestMetrics {
    TestMetrics::from_checks(&assess_points(sr, points, grid, cfg), cfg)
}

/// Active terms per coefficient polynomial, numerator first.
pub fn terms_per_polynomial(sr: &SymbolicRational) -> (Vec<usize>, Vec<usize>) {
    let count = |polys: &[SymbolicPolynomial]| polys.iter().map(|p| p.terms.len()).collect();
    (count(&sr.num), count(&sr.den))
}
