//! Candidate scoring.
//!
//! `objective = w1·complexity + w2·error + λ·Σ max(0, normalized slack)`
//! where the slacks are the worst-case dc-gain, pole, zero and degree
//! violations over the training points. Dc slack is normalized by `T_dc`,
//! root slacks by `T_root`; the degree slack is used as-is.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::numeric::{find_roots, poly_eval};
use crate::sampling::{DataPoint, FrequencyGrid};
use crate::symbolic::{decode_unchecked, Chromosome, Layout, SymbolicRational, SINGULAR_DEN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessConfig {
    pub w1: f64,
    pub w2: f64,
    /// Allowed dc-gain deviation in dB.
    pub t_dc: f64,
    /// Allowed relative pole/zero displacement.
    pub t_root: f64,
    pub penalty_lambda: f64,
    pub error_clamp_db: f64,
}

impl Default for FitnessConfig {
    fn default() -> Self {
        Self {
            w1: 0.8,
            w2: 0.2,
            t_dc: 3.0,
            t_root: 0.30,
            penalty_lambda: 10.0,
            error_clamp_db: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Violations {
    pub dc: f64,
    pub pole: f64,
    pub zero: f64,
    pub degree: f64,
}

impl Violations {
    fn max_assign(&mut self, o: &Violations) {
        self.dc = self.dc.max(o.dc);
        self.pole = self.pole.max(o.pole);
        self.zero = self.zero.max(o.zero);
        self.degree = self.degree.max(o.degree);
    }

    fn lowest() -> Self {
        Self {
            dc: f64::NEG_INFINITY,
            pole: f64::NEG_INFINITY,
            zero: f64::NEG_INFINITY,
            degree: f64::NEG_INFINITY,
        }
    }

    pub fn all_satisfied(&self) -> bool {
        self.dc <= 0.0 && self.pole <= 0.0 && self.zero <= 0.0 && self.degree <= 0.0
    }

    /// `Σ max(0, slack)` with dc and root slacks scaled by their tolerances.
    pub fn normalized_total(&self, cfg: &FitnessConfig) -> f64 {
        (self.dc / cfg.t_dc).max(0.0)
            + (self.pole / cfg.t_root).max(0.0)
            + (self.zero / cfg.t_root).max(0.0)
            + self.degree.max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub complexity: f64,
    pub error: f64,
    pub objective: f64,
    /// Aggregated normalized constraint violation entering the objective.
    pub penalty: f64,
    pub feasible: bool,
    pub violations: Violations,
    pub per_point_dc_err: Vec<f64>,
    pub per_point_root_err: Vec<f64>,
}

/// Fraction of active term slots.
pub fn complexity(chrom: &Chromosome) -> f64 {
    let l = chrom.layout;
    chrom.active_terms() as f64 / (l.rows() * l.max_terms) as f64
}

fn wrap_phase(d: f64) -> f64 {
    let w = d - 2.0 * PI * (d / (2.0 * PI)).round();
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// `|ΔH| + |Δφ|` for one (point, frequency) pair; `None` marks a singular
/// simplified evaluation.
pub fn pair_error(simplified: Option<Complex64>, exact: Complex64, clamp: f64) -> f64 {
    let h = match simplified {
        Some(h) if h.is_finite() && h.norm() > 0.0 => h,
        _ => return clamp,
    };
    let dmag = (20.0 * (h.norm() / exact.norm()).log10()).abs().min(clamp);
    let dphase = wrap_phase(h.arg() - exact.arg()).abs();
    dmag + dphase
}

fn eval_simplified(num: &[f64], den: &[f64], s: Complex64) -> Option<Complex64> {
    let d = poly_eval(den, s);
    (d.norm() >= SINGULAR_DEN).then(|| poly_eval(num, s) / d)
}

/// Mean response error over `points × grid`.
pub fn response_error(
    sr: &SymbolicRational,
    points: &[DataPoint],
    grid: &FrequencyGrid,
    cfg: &FitnessConfig,
) -> f64 {
    if points.is_empty() || grid.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for p in points {
        let (num, den) = sr.coefficients(&p.values);
        for &s in &grid.points {
            sum += pair_error(
                eval_simplified(&num, &den, s),
                p.exact.eval(s),
                cfg.error_clamp_db,
            );
        }
    }
    sum / (2.0 * points.len() as f64 * grid.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootPair {
    pub exact: usize,
    pub simplified: Option<usize>,
    /// Relative displacement; 1.0 for an unmatched exact root.
    pub error: f64,
}

/// Greedy one-to-one matching by relative distance `|r_s − r_e| / |r_e|`.
/// Exact roots at the origin are measured against `omega_floor` instead.
pub fn match_roots(
    simplified: &[Complex64],
    exact: &[Complex64],
    omega_floor: f64,
) -> Vec<RootPair> {
    let scale = |r: Complex64| {
        let m = r.norm();
        if m > 0.0 {
            m
        } else {
            omega_floor
        }
    };
    let mut cands: Vec<(f64, usize, usize)> = Vec::with_capacity(simplified.len() * exact.len());
    for (e, &re) in exact.iter().enumerate() {
        for (s, &rs) in simplified.iter().enumerate() {
            let d = (rs - re).norm() / scale(re);
            cands.push((if d.is_nan() { f64::INFINITY } else { d }, e, s));
        }
    }
    cands.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let mut exact_used = vec![false; exact.len()];
    let mut simp_used = vec![false; simplified.len()];
    let mut pairs: Vec<RootPair> = Vec::with_capacity(exact.len());
    for (d, e, s) in cands {
        if exact_used[e] || simp_used[s] {
            continue;
        }
        exact_used[e] = true;
        simp_used[s] = true;
        pairs.push(RootPair {
            exact: e,
            simplified: Some(s),
            error: d,
        });
    }
    for (e, used) in exact_used.iter().enumerate() {
        if !used {
            pairs.push(RootPair {
                exact: e,
                simplified: None,
                error: 1.0,
            });
        }
    }
    pairs.sort_by_key(|p| p.exact);
    pairs
}

/// Per-point constraint outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCheck {
    pub dc_error_db: f64,
    pub pole_errors: Vec<f64>,
    pub zero_errors: Vec<f64>,
    pub degree_ok: bool,
}

impl PointCheck {
    pub fn max_root_error(&self) -> f64 {
        self.pole_errors
            .iter()
            .chain(&self.zero_errors)
            .cloned()
            .fold(0.0, f64::max)
    }

    pub fn slacks(&self, cfg: &FitnessConfig) -> Violations {
        let worst = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
        Violations {
            dc: self.dc_error_db - cfg.t_dc,
            pole: worst(&self.pole_errors) - cfg.t_root,
            zero: worst(&self.zero_errors) - cfg.t_root,
            degree: if self.degree_ok { 0.0 } else { 1.0 },
        }
    }
}

/// Highest index holding a nonzero value, i.e. the degree of an evaluated polynomial.
fn effective_degree(coeffs: &[f64]) -> Option<usize> {
    coeffs.iter().rposition(|&c| c != 0.0)
}

/// Precomputed exact quantities for one point.
#[derive(Debug, Clone)]
struct ExactView<'a> {
    point: &'a DataPoint,
    /// Exact response at every grid frequency.
    response: Vec<Complex64>,
}

fn check_point_with(
    sr: &SymbolicRational,
    num: &[f64],
    den: &[f64],
    exact: &ExactView<'_>,
    grid: &FrequencyGrid,
    cfg: &FitnessConfig,
) -> PointCheck {
    let point = exact.point;
    let clamp = cfg.error_clamp_db;

    let dc_error_db = match point.exact_dc {
        Some(dc) => {
            let (f0, g0) = (
                num.first().copied().unwrap_or(0.0),
                den.first().copied().unwrap_or(0.0),
            );
            let r = f0 / g0;
            if f0 == 0.0 || g0 == 0.0 || !r.is_finite() {
                clamp
            } else {
                (20.0 * r.abs().log10() - dc.db).abs().min(clamp)
            }
        }
        None => match (grid.points.first(), exact.response.first()) {
            (Some(&s0), Some(&h_exact)) => match eval_simplified(num, den, s0) {
                Some(h) if h.norm() > 0.0 && h.is_finite() => (20.0
                    * (h.norm() / h_exact.norm()).log10())
                .abs()
                .min(clamp),
                _ => clamp,
            },
            _ => clamp,
        },
    };

    let exact_m = point.exact.num_degree();
    let exact_n = point.exact.den_degree();
    let structure_ok = |polys: &[crate::symbolic::SymbolicPolynomial], coeffs: &[f64]| {
        coeffs
            .iter()
            .enumerate()
            .all(|(i, &c)| c == 0.0 || polys.get(i).is_some_and(|p| !p.is_empty()))
    };
    let degree_ok = effective_degree(num).unwrap_or(0) == exact_m
        && effective_degree(den) == Some(exact_n)
        && structure_ok(&sr.num, &point.exact.num)
        && structure_ok(&sr.den, &point.exact.den);

    let omega_floor = grid.omega_min();
    let errs = |coeffs: &[f64], exact_roots: &[Complex64]| -> Vec<f64> {
        let roots = if effective_degree(coeffs).is_some() {
            find_roots(coeffs)
        } else {
            Vec::new()
        };
        match_roots(&roots, exact_roots, omega_floor)
            .into_iter()
            .map(|p| p.error)
            .collect()
    };

    PointCheck {
        dc_error_db,
        pole_errors: errs(den, &point.exact_poles),
        zero_errors: errs(num, &point.exact_zeros),
        degree_ok,
    }
}

fn exact_view<'a>(point: &'a DataPoint, grid: &FrequencyGrid) -> ExactView<'a> {
    ExactView {
        point,
        response: grid.points.iter().map(|&s| point.exact.eval(s)).collect(),
    }
}

/// dc-gain and root checks for one point, without a prepared context.
pub fn constraints(
    sr: &SymbolicRational,
    point: &DataPoint,
    grid: &FrequencyGrid,
    cfg: &FitnessConfig,
) -> (PointCheck, Violations) {
    let view = exact_view(point, grid);
    let (num, den) = sr.coefficients(&point.values);
    let check = check_point_with(sr, &num, &den, &view, grid, cfg);
    let slacks = check.slacks(cfg);
    (check, slacks)
}

/// Checks every point independently; used for held-out reporting.
pub fn assess_points(
    sr: &SymbolicRational,
    points: &[DataPoint],
    grid: &FrequencyGrid,
    cfg: &FitnessConfig,
) -> Vec<PointCheck> {
    points
        .iter()
        .map(|p| constraints(sr, p, grid, cfg).0)
        .collect()
}

/// Immutable evaluation context shared by a whole optimization run.
pub struct FitnessContext<'a> {
    pub layout: Layout,
    pub grid: &'a FrequencyGrid,
    pub cfg: FitnessConfig,
    views: Vec<ExactView<'a>>,
}

impl<'a> FitnessContext<'a> {
    pub fn new(
        layout: Layout,
        train: &'a [DataPoint],
        grid: &'a FrequencyGrid,
        cfg: FitnessConfig,
    ) -> Self {
        Self {
            layout,
            grid,
            cfg,
            views: train.iter().map(|p| exact_view(p, grid)).collect(),
        }
    }

    pub fn train_len(&self) -> usize {
        self.views.len()
    }

    pub fn evaluate(&self, chrom: &Chromosome) -> EvaluationResult {
        let sr = decode_unchecked(chrom);
        self.evaluate_rational(&sr, complexity(chrom))
    }

    /// Scores a decoded candidate whose complexity is already known.
    pub fn evaluate_rational(&self, sr: &SymbolicRational, complexity: f64) -> EvaluationResult {
        let cfg = &self.cfg;
        let clamp = cfg.error_clamp_db;
        let mut err_sum = 0.0;
        let mut worst = Violations::lowest();
        let mut per_point_dc_err = Vec::with_capacity(self.views.len());
        let mut per_point_root_err = Vec::with_capacity(self.views.len());
        for view in &self.views {
            let (num, den) = sr.coefficients(&view.point.values);
            for (&s, &h_exact) in self.grid.points.iter().zip(&view.response) {
                err_sum += pair_error(eval_simplified(&num, &den, s), h_exact, clamp);
            }
            let check = check_point_with(sr, &num, &den, view, self.grid, cfg);
            worst.max_assign(&check.slacks(cfg));
            per_point_dc_err.push(check.dc_error_db);
            per_point_root_err.push(check.max_root_error());
        }
        let pairs = (self.views.len() * self.grid.len()).max(1);
        let error = err_sum / (2.0 * pairs as f64);
        if self.views.is_empty() {
            worst = Violations::default();
        }
        let penalty = worst.normalized_total(cfg);
        let objective = cfg.w1 * complexity + cfg.w2 * error + cfg.penalty_lambda * penalty;
        EvaluationResult {
            complexity,
            error,
            objective,
            penalty,
            feasible: worst.all_satisfied(),
            violations: worst,
            per_point_dc_err,
            per_point_root_err,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_netlist;
    use crate::numeric::NumericRational;
    use crate::sampling::{frequency_grid, sample_dataset, DataPoint};
    use crate::symbolic::{Chromosome, Layout};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const ONE_POLE: &str =
        "G gm1 1 0 in 0 1e-3\nR r1 1 0 1e5\nC c1 1 0 1e-12\n.input in\n.output 1\n";

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn complexity_counts_active_slots() {
        let layout = Layout::for_degrees(1, 1, 15, 3);
        let mut ch = Chromosome::empty(layout);
        assert_eq!(complexity(&ch), 0.0);
        ch.set_term(0, 0, 1, &[0]);
        ch.set_term(1, 3, -1, &[1]);
        ch.set_term(3, 14, 1, &[]);
        assert!((complexity(&ch) - 0.05).abs() < 1e-15);
        for p in 0..4 {
            for t in 0..15 {
                ch.set_term(p, t, 1, &[]);
            }
        }
        assert_eq!(complexity(&ch), 1.0);
    }

    #[test]
    fn pair_error_arithmetic() {
        // 1 dB magnitude and 0.5 rad phase difference.
        let exact = Complex64::from_polar(1.0, 0.2);
        let simp = Complex64::from_polar(10f64.powf(1.0 / 20.0), 0.7);
        let e = pair_error(Some(simp), exact, 100.0);
        assert!((e / 2.0 - 0.75).abs() < 1e-12);
        assert_eq!(pair_error(None, exact, 100.0), 100.0);
        assert_eq!(pair_error(Some(exact), exact, 100.0), 0.0);
    }

    #[test]
    fn phase_wraps_across_branch_cut() {
        let exact = Complex64::from_polar(1.0, PI - 0.1);
        let simp = Complex64::from_polar(1.0, -PI + 0.1);
        assert!((pair_error(Some(simp), exact, 100.0) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn shifted_pole_error_at_corner() {
        // exact -gm/(g + s c) versus -gm/(g + 2 s c) at s = j g/c.
        let (gm, g, cap) = (1e-3, 1e-5, 1e-12);
        let s = Complex64::new(0.0, g / cap);
        let exact = c(-gm) / (c(g) + s * cap);
        let simp = c(-gm) / (c(g) + s * 2.0 * cap);
        let dmag = (20.0 * (simp.norm() / exact.norm()).log10()).abs();
        let dphase = wrap_phase(simp.arg() - exact.arg()).abs();
        // closed form: 10·log10(5/2) dB and atan(2) − π/4 rad
        assert!((dmag - 10.0 * 2.5f64.log10()).abs() < 1e-12);
        assert!((dmag - 3.9794).abs() < 1e-4);
        assert!((dphase - (2f64.atan() - PI / 4.0)).abs() < 1e-12);
        assert!((dphase - 0.3217).abs() < 1e-4);
        assert!((pair_error(Some(simp), exact, 100.0) - dmag - dphase).abs() < 1e-12);
    }

    #[test]
    fn root_matching_examples() {
        let p = match_roots(&[c(-1.1e4), c(-0.9e7)], &[c(-1e4), c(-1e7)], 1.0);
        assert_eq!(p.len(), 2);
        assert!((p[0].error - 0.1).abs() < 1e-12 && (p[1].error - 0.1).abs() < 1e-12);
        assert_eq!(p[0].simplified, Some(0));

        let same = match_roots(&[c(-3.0), c(-5.0)], &[c(-5.0), c(-3.0)], 1.0);
        assert!(same.iter().all(|p| p.error == 0.0));

        let p = match_roots(&[c(-1.0)], &[c(-1.0), c(-10.0), c(-100.0)], 1.0);
        assert_eq!(p[0].error, 0.0);
        assert_eq!(p.iter().filter(|r| r.simplified.is_none()).count(), 2);
        assert!(p[1..].iter().all(|r| r.error == 1.0));

        // exact root at the origin uses the floor frequency
        let p = match_roots(&[c(-0.5)], &[c(0.0)], 10.0);
        assert!((p[0].error - 0.05).abs() < 1e-15);
    }

    fn one_pole_setup() -> (Vec<DataPoint>, FrequencyGrid, Layout) {
        let m = parse_netlist(ONE_POLE).unwrap();
        let pts = sample_dataset(&m, 10, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let nominal = DataPoint::characterize(&m, m.nominal_values()).unwrap();
        let grid = frequency_grid(&nominal.exact, 3);
        (pts, grid, Layout::for_degrees(0, 1, 15, 3))
    }

    fn exact_one_pole(layout: Layout) -> Chromosome {
        let mut ch = Chromosome::empty(layout);
        ch.set_term(0, 0, -1, &[0]);
        ch.set_term(1, 0, 1, &[1]);
        ch.set_term(2, 0, 1, &[2]);
        ch
    }

    #[test]
    fn exact_equivalent_objective() {
        let (pts, grid, layout) = one_pole_setup();
        let ctx = FitnessContext::new(layout, &pts, &grid, FitnessConfig::default());
        let r = ctx.evaluate(&exact_one_pole(layout));
        assert!((r.complexity - 3.0 / 45.0).abs() < 1e-15);
        assert!(r.error < 1e-9, "error {}", r.error);
        assert!(r.feasible);
        assert!((r.objective - 0.8 * 3.0 / 45.0).abs() < 1e-9);
        assert!((r.objective - 0.0533).abs() < 1e-4);
        assert!(r.per_point_dc_err.iter().all(|&e| e < 1e-9));
        assert!(r.per_point_root_err.iter().all(|&e| e < 1e-9));
    }

    #[test]
    fn empty_chromosome_is_penalized() {
        let (pts, grid, layout) = one_pole_setup();
        let ctx = FitnessContext::new(layout, &pts, &grid, FitnessConfig::default());
        let r = ctx.evaluate(&Chromosome::empty(layout));
        assert!(!r.feasible);
        assert_eq!(r.violations.degree, 1.0);
        assert!(r.objective > 10.0);
    }

    #[test]
    fn spurious_term_is_worse() {
        let (pts, grid, layout) = one_pole_setup();
        let ctx = FitnessContext::new(layout, &pts, &grid, FitnessConfig::default());
        let exact = ctx.evaluate(&exact_one_pole(layout));
        let mut ch = exact_one_pole(layout);
        // c1·g_r1·gm1 in the s^0 denominator slot is ~1e-20 against 1e-5.
        ch.set_term(1, 5, 1, &[0, 1, 2]);
        let worse = ctx.evaluate(&ch);
        assert!(worse.complexity > exact.complexity);
        assert!((worse.complexity - exact.complexity - 1.0 / 45.0).abs() < 1e-15);
        assert!(worse.objective > exact.objective);
    }

    #[test]
    fn constraint_slacks() {
        let (pts, grid, layout) = one_pole_setup();
        let cfg = FitnessConfig::default();
        let exact = crate::symbolic::decode_unchecked(&exact_one_pole(layout));
        let (_, v) = constraints(&exact, &pts[0], &grid, &cfg);
        assert!(v.all_satisfied());

        let check = PointCheck {
            dc_error_db: 2.0,
            pole_errors: vec![0.4],
            zero_errors: vec![],
            degree_ok: true,
        };
        let s = check.slacks(&cfg);
        assert!((s.dc + 1.0).abs() < 1e-15);
        assert!((s.pole - 0.10).abs() < 1e-12);
        assert!(s.zero < 0.0);
    }

    #[test]
    fn response_error_identity_and_shift() {
        let (pts, grid, layout) = one_pole_setup();
        let cfg = FitnessConfig::default();
        let exact = crate::symbolic::decode_unchecked(&exact_one_pole(layout));
        assert!(response_error(&exact, &pts, &grid, &cfg) < 1e-12);
        let mut shifted = exact_one_pole(layout);
        shifted.set_term(2, 1, 1, &[2]);
        let sr = crate::symbolic::decode_unchecked(&shifted);
        assert!(response_error(&sr, &pts, &grid, &cfg) > 0.1);
        let (check, v) = constraints(&sr, &pts[0], &grid, &cfg);
        assert!((check.pole_errors[0] - 0.5).abs() < 1e-9);
        assert!(!v.all_satisfied());
    }

    #[test]
    fn singular_simplified_dc_is_clamped() {
        let (pts, grid, layout) = one_pole_setup();
        let cfg = FitnessConfig::default();
        let mut ch = Chromosome::empty(layout);
        ch.set_term(0, 0, -1, &[0]);
        ch.set_term(2, 0, 1, &[2]);
        let sr = crate::symbolic::decode_unchecked(&ch);
        let (check, v) = constraints(&sr, &pts[0], &grid, &cfg);
        assert_eq!(check.dc_error_db, cfg.error_clamp_db);
        assert_eq!(v.degree, 1.0);
    }

    #[test]
    fn rootless_exact_dc_uses_lowest_frequency() {
        // Highpass with no dc path: exact dc undefined.
        let point = DataPoint {
            values: vec![1.0],
            exact: NumericRational {
                num: vec![0.0, 1.0],
                den: vec![1.0, 1.0],
            },
            exact_poles: vec![c(-1.0)],
            exact_zeros: vec![c(0.0)],
            exact_dc: None,
        };
        let grid = FrequencyGrid::from_range(0.01, 10.0, 3);
        let sr = SymbolicRational {
            num: vec![
                Default::default(),
                crate::symbolic::SymbolicPolynomial {
                    terms: vec![crate::symbolic::SymbolicTerm {
                        sign: 1,
                        present: vec![false],
                    }],
                },
            ],
            den: vec![
                crate::symbolic::SymbolicPolynomial {
                    terms: vec![crate::symbolic::SymbolicTerm {
                        sign: 1,
                        present: vec![false],
                    }],
                },
                crate::symbolic::SymbolicPolynomial {
                    terms: vec![crate::symbolic::SymbolicTerm {
                        sign: 1,
                        present: vec![false],
                    }],
                },
            ],
        };
        let (check, v) = constraints(&sr, &point, &grid, &FitnessConfig::default());
        assert!(check.dc_error_db < 1e-12);
        assert!(v.all_satisfied(), "{v:?}");
    }
}
