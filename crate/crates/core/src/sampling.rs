//! Monte Carlo dataset generation and the shared frequency grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::netlist::CircuitModel;
use crate::numeric::{
    build_pencil, dc_gain, extract_coeffs, DcGain, NumericError, NumericRational,
};

/// Redraws allowed for a sample whose exact extraction fails.
pub const MAX_RESAMPLE: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("dataset size must be at least 1")]
    Empty,
    #[error("split sizes {train} + {test} do not add up to {total} points")]
    SizeMismatch {
        train: usize,
        test: usize,
        total: usize,
    },
    #[error("sample {index} failed after {MAX_RESAMPLE} redraws: {source}")]
    Extraction { index: usize, source: NumericError },
}

/// One Monte Carlo sample with its exact characterization cached.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataPoint {
    pub values: Vec<f64>,
    pub exact: NumericRational,
    pub exact_poles: Vec<Complex64>,
    pub exact_zeros: Vec<Complex64>,
    /// `None` when the exact function has no finite nonzero dc gain.
    pub exact_dc: Option<DcGain>,
}

impl DataPoint {
    pub fn characterize(model: &CircuitModel, values: Vec<f64>) -> Result<Self, NumericError> {
        let pencil = build_pencil(model, &values)?;
        let exact = extract_coeffs(&pencil)?;
        Ok(Self {
            exact_poles: exact.poles(),
            exact_zeros: exact.zeros(),
            exact_dc: dc_gain(&exact).ok(),
            exact,
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub train: Vec<DataPoint>,
    pub test: Vec<DataPoint>,
}

/// `x_k = L_k + r·(H_k − L_k)` with `r` uniform on `[0, 1)`.
pub fn draw_values<R: Rng + ?Sized>(model: &CircuitModel, rng: &mut R) -> Vec<f64> {
    model
        .parameters
        .iter()
        .map(|p| p.lower + rng.gen::<f64>() * (p.upper - p.lower))
        .collect()
}

pub fn sample_dataset<R: Rng + ?Sized>(
    model: &CircuitModel,
    count: usize,
    rng: &mut R,
) -> Result<Vec<DataPoint>, SamplingError> {
    if count == 0 {
        return Err(SamplingError::Empty);
    }
    let mut points = Vec::with_capacity(count);
    for index in 0..count {
        let mut attempt = 0;
        loop {
            match DataPoint::characterize(model, draw_values(model, rng)) {
                Ok(p) => {
                    points.push(p);
                    break;
                }
                Err(source) if attempt >= MAX_RESAMPLE => {
                    return Err(SamplingError::Extraction { index, source })
                }
                Err(_) => attempt += 1,
            }
        }
    }
    Ok(points)
}

pub fn split<T, R: Rng + ?Sized>(
    points: Vec<T>,
    train: usize,
    test: usize,
    rng: &mut R,
) -> Result<(Vec<T>, Vec<T>), SamplingError> {
    if train + test != points.len() {
        return Err(SamplingError::SizeMismatch {
            train,
            test,
            total: points.len(),
        });
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(rng);
    let mut slots: Vec<Option<T>> = points.into_iter().map(Some).collect();
    let mut take = |idx: &[usize]| -> Vec<T> {
        idx.iter()
            .map(|&i| slots[i].take().expect("index used once"))
            .collect()
    };
    let train_part = take(&order[..train]);
    let test_part = take(&order[train..]);
    Ok((train_part, test_part))
}

pub fn split_dataset<R: Rng + ?Sized>(
    points: Vec<DataPoint>,
    train: usize,
    test: usize,
    rng: &mut R,
) -> Result<Dataset, SamplingError> {
    let (train, test) = split(points, train, test, rng)?;
    Ok(Dataset { train, test })
}

/// Logarithmic grid of `s_c = j·2π·f_c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyGrid {
    pub freqs_hz: Vec<f64>,
    #[serde(skip)]
    pub points: Vec<Complex64>,
}

impl FrequencyGrid {
    pub fn from_range(lo_hz: f64, hi_hz: f64, points_per_decade: usize) -> Self {
        let ppd = points_per_decade.max(1) as f64;
        let decades = (hi_hz / lo_hz).log10();
        // Tolerance keeps an exact whole number of decades from gaining a point.
        let steps = (decades * ppd - 1e-9).ceil().max(0.0) as usize;
        let freqs_hz: Vec<f64> = (0..=steps)
            .map(|c| lo_hz * 10f64.powf(c as f64 / ppd))
            .collect();
        let points = freqs_hz
            .iter()
            .map(|f| Complex64::new(0.0, 2.0 * PI * f))
            .collect();
        Self { freqs_hz, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Lowest angular frequency on the grid.
    pub fn omega_min(&self) -> f64 {
        self.points.first().map(|s| s.im).unwrap_or(1.0)
    }
}

/// Span from one decade below the slowest nominal root to one decade above
/// the fastest, `points_per_decade` points per decade. Rootless functions get
/// 1 Hz – 1 GHz.
pub fn frequency_grid(nominal: &NumericRational, points_per_decade: usize) -> FrequencyGrid {
    let mags: Vec<f64> = nominal
        .poles()
        .into_iter()
        .chain(nominal.zeros())
        .map(|r| r.norm())
        .filter(|m| m.is_finite() && *m > 0.0)
        .collect();
    if mags.is_empty() {
        return FrequencyGrid::from_range(1.0, 1e9, points_per_decade);
    }
    let lo = mags.iter().cloned().fold(f64::INFINITY, f64::min) / (2.0 * PI) / 10.0;
    let hi = mags.iter().cloned().fold(0.0, f64::max) / (2.0 * PI) * 10.0;
    FrequencyGrid::from_range(lo, hi, points_per_decade)
}
