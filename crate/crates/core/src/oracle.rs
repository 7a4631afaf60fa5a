//! Exact symbolic transfer functions by cofactor expansion.
//!
//! Every pencil entry is an integer combination of `1`, `x_k` and `s·x_k`.
//! The determinant is expanded along rows with minors memoized by their
//! column subsets, and the numerator follows from Cramer's rule on the
//! output column. This is exponential in the node count and exists only to
//! validate the numeric engine on small circuits.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::netlist::{CircuitModel, ElementKind};
use crate::numeric::{build_pencil, extract_coeffs, NumericError};

/// Largest non-ground node count the oracle accepts.
pub const MAX_ORACLE_NODES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle not applicable at this scale: {nodes} nodes (limit {MAX_ORACLE_NODES})")]
    NotApplicable { nodes: usize },
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// Power of `s` and a sorted parameter multiset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub s_power: u32,
    pub params: Vec<u16>,
}

impl Monomial {
    fn one() -> Self {
        Self {
            s_power: 0,
            params: Vec::new(),
        }
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut params = Vec::with_capacity(self.params.len() + other.params.len());
        let (mut i, mut j) = (0, 0);
        while i < self.params.len() && j < other.params.len() {
            if self.params[i] <= other.params[j] {
                params.push(self.params[i]);
                i += 1;
            } else {
                params.push(other.params[j]);
                j += 1;
            }
        }
        params.extend_from_slice(&self.params[i..]);
        params.extend_from_slice(&other.params[j..]);
        Monomial {
            s_power: self.s_power + other.s_power,
            params,
        }
    }

    pub fn has_repeated_param(&self) -> bool {
        self.params.windows(2).any(|w| w[0] == w[1])
    }

    fn value(&self, values: &[f64]) -> f64 {
        self.params.iter().map(|&k| values[k as usize]).product()
    }
}

pub type SymPoly = BTreeMap<Monomial, i64>;

fn poly_mul(a: &SymPoly, b: &SymPoly) -> SymPoly {
    let mut out = SymPoly::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            *out.entry(ma.mul(mb)).or_insert(0) += ca * cb;
        }
    }
    out.retain(|_, c| *c != 0);
    out
}

fn poly_add_scaled(acc: &mut SymPoly, p: &SymPoly, sign: i64) {
    for (m, c) in p {
        *acc.entry(m.clone()).or_insert(0) += sign * c;
    }
    acc.retain(|_, c| *c != 0);
}

fn eval_sym(p: &SymPoly, values: &[f64], s: Complex64) -> Complex64 {
    p.iter()
        .map(|(m, &c)| s.powu(m.s_power) * (c as f64 * m.value(values)))
        .sum()
}

/// Exact numerator and denominator in expanded sum-of-products form.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSymbolic {
    pub num: SymPoly,
    pub den: SymPoly,
    pub param_names: Vec<String>,
}

impl ExactSymbolic {
    pub fn eval(&self, values: &[f64], s: Complex64) -> Complex64 {
        eval_sym(&self.num, values, s) / eval_sym(&self.den, values, s)
    }

    /// Numeric coefficients of `s^i` for the given parameter values.
    pub fn coefficients(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let coeffs = |p: &SymPoly| {
            let deg = p.keys().map(|m| m.s_power as usize).max().unwrap_or(0);
            let mut v = vec![0.0; deg + 1];
            for (m, &c) in p {
                v[m.s_power as usize] += c as f64 * m.value(values);
            }
            v
        };
        (coeffs(&self.num), coeffs(&self.den))
    }

    /// Stored terms whose parameter multiset repeats a parameter.
    pub fn repeated_param_terms(&self) -> usize {
        self.num
            .keys()
            .chain(self.den.keys())
            .filter(|m| m.has_repeated_param())
            .count()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (label, poly) in [("numerator", &self.num), ("denominator", &self.den)] {
            let _ = writeln!(out, "{label}:");
            let mut by_power: BTreeMap<u32, Vec<(&Monomial, i64)>> = BTreeMap::new();
            for (m, &c) in poly {
                by_power.entry(m.s_power).or_default().push((m, c));
            }
            for (pow, terms) in by_power {
                let body: Vec<String> = terms
                    .iter()
                    .map(|(m, c)| {
                        let sign = if *c < 0 { "-" } else { "+" };
                        let mag = c.unsigned_abs();
                        let names: Vec<&str> = m
                            .params
                            .iter()
                            .map(|&k| self.param_names[k as usize].as_str())
                            .collect();
                        let prod = if names.is_empty() {
                            "1".to_string()
                        } else {
                            names.join("·")
                        };
                        if mag == 1 {
                            format!("{sign} {prod}")
                        } else {
                            format!("{sign} {mag}·{prod}")
                        }
                    })
                    .collect();
                let _ = writeln!(out, "  s^{pow}: {}", body.join(" "));
            }
        }
        let (n, d, t) = term_count(self);
        let _ = writeln!(out, "terms: numerator {n}, denominator {d}, total {t}");
        out
    }
}

pub fn term_count(e: &ExactSymbolic) -> (usize, usize, usize) {
    (e.num.len(), e.den.len(), e.num.len() + e.den.len())
}

fn symbolic_matrix(model: &CircuitModel) -> (Vec<Vec<SymPoly>>, usize) {
    let nodes = model.node_count();
    let n = nodes + 1;
    let mut a = vec![vec![SymPoly::new(); n]; n];
    let mut add = |r: usize, c: usize, mono: &Monomial, coef: i64| {
        if r == 0 || c == 0 {
            return;
        }
        let cell = &mut a[r - 1][c - 1];
        *cell.entry(mono.clone()).or_insert(0) += coef;
        cell.retain(|_, v| *v != 0);
    };
    for e in &model.elements {
        let k = e.parameter_index as u16;
        let t = &e.terminals;
        let mono = Monomial {
            s_power: u32::from(e.kind == ElementKind::Capacitance),
            params: vec![k],
        };
        match e.kind {
            ElementKind::Conductance | ElementKind::Capacitance => {
                add(t[0], t[0], &mono, 1);
                add(t[1], t[1], &mono, 1);
                add(t[0], t[1], &mono, -1);
                add(t[1], t[0], &mono, -1);
            }
            ElementKind::Vccs => {
                add(t[0], t[2], &mono, 1);
                add(t[0], t[3], &mono, -1);
                add(t[1], t[2], &mono, -1);
                add(t[1], t[3], &mono, 1);
            }
        }
    }
    let one: SymPoly = [(Monomial::one(), 1)].into_iter().collect();
    let inp = model.input_node - 1;
    a[inp][nodes] = one.clone();
    a[nodes][inp] = one;
    (a, model.output_node - 1)
}

fn determinant(a: &[Vec<SymPoly>]) -> SymPoly {
    fn minor(a: &[Vec<SymPoly>], mask: u32, memo: &mut HashMap<u32, SymPoly>) -> SymPoly {
        if mask == 0 {
            return [(Monomial::one(), 1)].into_iter().collect();
        }
        if let Some(p) = memo.get(&mask) {
            return p.clone();
        }
        let n = a.len();
        let row = n - mask.count_ones() as usize;
        let mut acc = SymPoly::new();
        let mut position = 0;
        for col in 0..n {
            if mask & (1 << col) == 0 {
                continue;
            }
            let entry = &a[row][col];
            if !entry.is_empty() {
                let sub = minor(a, mask & !(1 << col), memo);
                if !sub.is_empty() {
                    let sign = if position % 2 == 0 { 1 } else { -1 };
                    poly_add_scaled(&mut acc, &poly_mul(entry, &sub), sign);
                }
            }
            position += 1;
        }
        memo.insert(mask, acc.clone());
        acc
    }
    let mut memo = HashMap::new();
    minor(a, (1u32 << a.len()) - 1, &mut memo)
}

pub fn exact_symbolic(model: &CircuitModel) -> Result<ExactSymbolic, OracleError> {
    let nodes = model.node_count();
    if nodes > MAX_ORACLE_NODES {
        return Err(OracleError::NotApplicable { nodes });
    }
    let (a, out) = symbolic_matrix(model);
    let mut den = determinant(&a);
    let mut cramer = a.clone();
    let src = a.len() - 1;
    for (r, row) in cramer.iter_mut().enumerate() {
        row[out] = if r == src {
            [(Monomial::one(), 1)].into_iter().collect()
        } else {
            SymPoly::new()
        };
    }
    let mut num = determinant(&cramer);
    // Fix the overall sign so the lowest-order denominator term is positive.
    if den.values().next().is_some_and(|&c| c < 0) {
        den.values_mut().for_each(|c| *c = -*c);
        num.values_mut().for_each(|c| *c = -*c);
    }
    Ok(ExactSymbolic {
        num,
        den,
        param_names: model.parameters.iter().map(|p| p.name.clone()).collect(),
    })
}

/// Largest relative deviation between the oracle and the numeric
/// coefficient path over random in-range parameter vectors and frequencies.
pub fn verify_consistency<R: Rng + ?Sized>(
    model: &CircuitModel,
    sample_count: usize,
    rng: &mut R,
) -> Result<f64, OracleError> {
    if sample_count == 0 {
        return Ok(0.0);
    }
    let exact = exact_symbolic(model)?;
    let mut worst = 0.0f64;
    for _ in 0..sample_count {
        let values: Vec<f64> = model
            .parameters
            .iter()
            .map(|p| p.lower + rng.gen::<f64>() * (p.upper - p.lower))
            .collect();
        let pencil = build_pencil(model, &values)?;
        let rational = extract_coeffs(&pencil)?;
        // Log-uniform over four decades either side of the circuit's own scale.
        let omega = pencil.omega_hint * 10f64.powf(rng.gen_range(-4.0..4.0));
        let phase = rng.gen_range(0.0..std::f64::consts::PI);
        let s = Complex64::from_polar(omega, phase);
        let want = exact.eval(&values, s);
        let got = rational.eval(s);
        worst = worst.max((got - want).norm() / want.norm());
    }
    Ok(worst)
}
