//! Simplified symbolic transfer functions and their chromosome encoding.
//!
//! A chromosome is a `P × Q` gene matrix with one row per coefficient
//! polynomial (numerator rows first, ascending powers of `s`). Each row holds
//! `T` term slots of `K + 1` genes: `K` binary parameter-presence genes and a
//! ternary term selector (`0` absent, `±1` present with that sign).

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::CircuitModel;

/// Denominator magnitudes below this are treated as a singular evaluation.
pub const SINGULAR_DEN: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolicError {
    #[error("chromosome layout {got:?} does not match expected {expected:?}")]
    DimensionMismatch { expected: Layout, got: Layout },
    #[error("simplified denominator vanishes")]
    Singular,
}

/// Shape of a chromosome: `P = num_polys + den_polys` rows, `Q = T·(K+1)` columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layout {
    pub num_polys: usize,
    pub den_polys: usize,
    pub max_terms: usize,
    pub params: usize,
}

impl Layout {
    /// Layout for numerator degree `m`, denominator degree `n`.
    pub fn for_degrees(m: usize, n: usize, max_terms: usize, params: usize) -> Self {
        Self {
            num_polys: m + 1,
            den_polys: n + 1,
            max_terms,
            params,
        }
    }

    pub fn rows(&self) -> usize {
        self.num_polys + self.den_polys
    }

    pub fn cols(&self) -> usize {
        self.max_terms * (self.params + 1)
    }

    pub fn len(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of the presence gene for parameter `k` in slot `t` of row `p`.
    pub fn s_index(&self, p: usize, t: usize, k: usize) -> usize {
        p * self.cols() + t * (self.params + 1) + k
    }

    /// Flat index of the term selector of slot `t` in row `p`.
    pub fn ts_index(&self, p: usize, t: usize) -> usize {
        p * self.cols() + t * (self.params + 1) + self.params
    }

    pub fn is_selector(&self, flat: usize) -> bool {
        (flat % self.cols()) % (self.params + 1) == self.params
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Chromosome {
    pub layout: Layout,
    /// Row-major `P × Q` genes.
    pub genes: Vec<i8>,
}

impl Chromosome {
    pub fn empty(layout: Layout) -> Self {
        Self {
            layout,
            genes: vec![0; layout.len()],
        }
    }

    pub fn ts(&self, p: usize, t: usize) -> i8 {
        self.genes[self.layout.ts_index(p, t)]
    }

    pub fn set_term(&mut self, p: usize, t: usize, sign: i8, present: &[usize]) {
        let l = self.layout;
        for k in 0..l.params {
            self.genes[l.s_index(p, t, k)] = 0;
        }
        for &k in present {
            self.genes[l.s_index(p, t, k)] = 1;
        }
        self.genes[l.ts_index(p, t)] = sign;
    }

    pub fn active_terms(&self) -> usize {
        let l = self.layout;
        (0..l.rows())
            .flat_map(|p| (0..l.max_terms).map(move |t| (p, t)))
            .filter(|&(p, t)| self.ts(p, t) != 0)
            .count()
    }

    /// Whether every gene lies in its alphabet.
    pub fn is_well_formed(&self) -> bool {
        self.genes.len() == self.layout.len()
            && self.genes.iter().enumerate().all(|(i, &g)| {
                if self.layout.is_selector(i) {
                    (-1..=1).contains(&g)
                } else {
                    g == 0 || g == 1
                }
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymbolicTerm {
    pub sign: i8,
    pub present: Vec<bool>,
}

impl SymbolicTerm {
    pub fn degree(&self) -> usize {
        self.present.iter().filter(|&&b| b).count()
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        let prod: f64 = self
            .present
            .iter()
            .zip(values)
            .filter(|(p, _)| **p)
            .map(|(_, v)| v)
            .product();
        f64::from(self.sign) * prod
    }

    fn names<'a>(&self, names: &'a [&'a str]) -> Vec<&'a str> {
        self.present
            .iter()
            .zip(names)
            .filter(|(p, _)| **p)
            .map(|(_, n)| *n)
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicPolynomial {
    pub terms: Vec<SymbolicTerm>,
}

impl SymbolicPolynomial {
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

pub fn evaluate_poly(poly: &SymbolicPolynomial, values: &[f64]) -> f64 {
    poly.terms.iter().map(|t| t.eval(values)).sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicRational {
    /// Coefficient polynomials of `s^0 … s^M`.
    pub num: Vec<SymbolicPolynomial>,
    /// Coefficient polynomials of `s^0 … s^N`.
    pub den: Vec<SymbolicPolynomial>,
}

impl SymbolicRational {
    pub fn term_count(&self) -> usize {
        self.num
            .iter()
            .chain(&self.den)
            .map(|p| p.terms.len())
            .sum()
    }

    /// Numeric coefficient vectors at one parameter point.
    pub fn coefficients(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let eval =
            |polys: &[SymbolicPolynomial]| polys.iter().map(|p| evaluate_poly(p, values)).collect();
        (eval(&self.num), eval(&self.den))
    }

    pub fn canonical(&self, names: &[&str]) -> Self {
        Self {
            num: self.num.iter().map(|p| canonicalize(p, names)).collect(),
            den: self.den.iter().map(|p| canonicalize(p, names)).collect(),
        }
    }
}

pub fn evaluate_rational(
    sr: &SymbolicRational,
    values: &[f64],
    s: Complex64,
) -> Result<Complex64, SymbolicError> {
    let (num, den) = sr.coefficients(values);
    let d = crate::numeric::poly_eval(&den, s);
    if d.norm() < SINGULAR_DEN {
        return Err(SymbolicError::Singular);
    }
    Ok(crate::numeric::poly_eval(&num, s) / d)
}

pub fn decode(chrom: &Chromosome, model: &CircuitModel) -> Result<SymbolicRational, SymbolicError> {
    let l = chrom.layout;
    if l.params != model.param_count() || chrom.genes.len() != l.len() {
        let expected = Layout {
            params: model.param_count(),
            ..l
        };
        return Err(SymbolicError::DimensionMismatch { expected, got: l });
    }
    Ok(decode_unchecked(chrom))
}

/// Decodes without consulting a circuit model.
pub fn decode_unchecked(chrom: &Chromosome) -> SymbolicRational {
    let l = chrom.layout;
    let row = |p: usize| SymbolicPolynomial {
        terms: (0..l.max_terms)
            .filter_map(|t| {
                let sign = chrom.ts(p, t);
                (sign != 0).then(|| SymbolicTerm {
                    sign,
                    present: (0..l.params)
                        .map(|k| chrom.genes[l.s_index(p, t, k)] == 1)
                        .collect(),
                })
            })
            .collect(),
    };
    SymbolicRational {
        num: (0..l.num_polys).map(row).collect(),
        den: (l.num_polys..l.rows()).map(row).collect(),
    }
}

/// Merges duplicate products, drops cancelled pairs, and orders terms by
/// descending parameter count then parameter names.
pub fn canonicalize(poly: &SymbolicPolynomial, names: &[&str]) -> SymbolicPolynomial {
    let mut net: BTreeMap<Vec<bool>, i64> = BTreeMap::new();
    for t in &poly.terms {
        *net.entry(t.present.clone()).or_insert(0) += i64::from(t.sign);
    }
    let mut terms: Vec<SymbolicTerm> = net
        .into_iter()
        .filter(|(_, c)| *c != 0)
        .flat_map(|(present, c)| {
            let sign = if c > 0 { 1 } else { -1 };
            std::iter::repeat_n(SymbolicTerm { sign, present }, c.unsigned_abs() as usize)
        })
        .collect();
    terms.sort_by(|a, b| match b.degree().cmp(&a.degree()) {
        Ordering::Equal => a.names(names).cmp(&b.names(names)),
        o => o,
    });
    SymbolicPolynomial { terms }
}

fn render_poly(poly: &SymbolicPolynomial, names: &[&str]) -> Vec<(bool, String)> {
    poly.terms
        .iter()
        .map(|t| {
            let n = t.names(names);
            (
                t.sign < 0,
                if n.is_empty() {
                    "1".to_string()
                } else {
                    n.join("·")
                },
            )
        })
        .collect()
}

fn render_side(polys: &[SymbolicPolynomial], names: &[&str]) -> String {
    let mut pieces: Vec<(bool, String)> = Vec::new();
    for (power, poly) in polys.iter().enumerate() {
        let terms = render_poly(poly, names);
        if terms.is_empty() {
            continue;
        }
        let s = match power {
            0 => String::new(),
            1 => "s".to_string(),
            p => format!("s^{p}"),
        };
        if power == 0 {
            pieces.extend(terms);
        } else if terms.len() == 1 {
            let (neg, body) = &terms[0];
            let body = if body == "1" {
                s
            } else {
                format!("{s}·{body}")
            };
            pieces.push((*neg, body));
        } else {
            let inner = join_signed(&terms);
            pieces.push((false, format!("{s}·({inner})")));
        }
    }
    if pieces.is_empty() {
        "0".to_string()
    } else {
        join_signed(&pieces)
    }
}

fn join_signed(pieces: &[(bool, String)]) -> String {
    let mut out = String::new();
    for (i, (neg, body)) in pieces.iter().enumerate() {
        match (i, neg) {
            (0, true) => out.push('-'),
            (0, false) => {}
            (_, true) => out.push_str(" - "),
            (_, false) => out.push_str(" + "),
        }
        out.push_str(body);
    }
    out
}

/// `H(s) = (f₀ + s·f₁ + …) / (g₀ + s·g₁ + …)` in parameter names.
pub fn render(sr: &SymbolicRational, model: &CircuitModel) -> String {
    let names = model.param_names();
    format!(
        "H(s) = ({}) / ({})",
        render_side(&sr.num, &names),
        render_side(&sr.den, &names)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_netlist;
    use proptest::prelude::*;

    fn term(sign: i8, present: &[bool]) -> SymbolicTerm {
        SymbolicTerm {
            sign,
            present: present.to_vec(),
        }
    }

    #[test]
    fn decode_row_example() {
        let layout = Layout {
            num_polys: 1,
            den_polys: 0,
            max_terms: 2,
            params: 3,
        };
        let chrom = Chromosome {
            layout,
            genes: vec![1, 0, 1, 1, 0, 1, 0, -1],
        };
        let sr = decode_unchecked(&chrom);
        assert_eq!(
            sr.num[0].terms,
            vec![
                term(1, &[true, false, true]),
                term(-1, &[false, true, false])
            ]
        );
        assert_eq!(evaluate_poly(&sr.num[0], &[2.0, 5.0, 3.0]), 1.0);
    }

    #[test]
    fn absent_and_constant_slots() {
        let layout = Layout {
            num_polys: 1,
            den_polys: 1,
            max_terms: 2,
            params: 3,
        };
        let mut chrom = Chromosome::empty(layout);
        chrom.genes[layout.s_index(0, 0, 1)] = 1; // don't-care under TS = 0
        chrom.set_term(1, 1, 1, &[]);
        let sr = decode_unchecked(&chrom);
        assert!(sr.num[0].is_empty());
        assert_eq!(evaluate_poly(&sr.num[0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(sr.den[0].terms, vec![term(1, &[false, false, false])]);
        assert_eq!(evaluate_poly(&sr.den[0], &[9.0, 8.0, 7.0]), 1.0);
    }

    #[test]
    fn decode_checks_dimensions() {
        let m = parse_netlist("C c1 1 0 1p\n.input 1\n.output 1\n").unwrap();
        let chrom = Chromosome::empty(Layout::for_degrees(0, 0, 2, 4));
        assert!(matches!(
            decode(&chrom, &m),
            Err(SymbolicError::DimensionMismatch { .. })
        ));
        let chrom = Chromosome::empty(Layout::for_degrees(0, 0, 2, 1));
        assert!(decode(&chrom, &m).is_ok());
    }

    fn one_pole() -> (CircuitModel, SymbolicRational) {
        let m = parse_netlist(
            "G gm1 1 0 in 0 1e-3\nR r1 1 0 1e5\nC c1 1 0 1e-12\n.input in\n.output 1\n",
        )
        .unwrap();
        let mut chrom = Chromosome::empty(Layout::for_degrees(0, 1, 15, 3));
        chrom.set_term(0, 0, -1, &[0]);
        chrom.set_term(1, 0, 1, &[1]);
        chrom.set_term(2, 0, 1, &[2]);
        let sr = decode(&chrom, &m).unwrap();
        (m, sr)
    }

    #[test]
    fn one_pole_rational() {
        let (m, sr) = one_pole();
        let v = m.nominal_values();
        let h0 = evaluate_rational(&sr, &v, Complex64::new(0.0, 0.0)).unwrap();
        assert!((h0 - Complex64::new(-100.0, 0.0)).norm() < 1e-9);
        let h = evaluate_rational(&sr, &v, Complex64::new(0.0, 1e7)).unwrap();
        let want = Complex64::new(-100.0, 0.0) / Complex64::new(1.0, 1.0);
        assert!((h - want).norm() / want.norm() < 1e-12);
        assert_eq!(render(&sr, &m), "H(s) = (-gm1) / (g_r1 + s·c1)");
    }

    #[test]
    fn singular_and_empty_rendering() {
        let (m, mut sr) = one_pole();
        sr.den.iter_mut().for_each(|p| p.terms.clear());
        assert_eq!(
            evaluate_rational(&sr, &m.nominal_values(), Complex64::new(0.0, 1.0)),
            Err(SymbolicError::Singular)
        );
        sr.num[0].terms.clear();
        assert_eq!(render(&sr, &m), "H(s) = (0) / (0)");
    }

    #[test]
    fn render_grouped_powers() {
        let m = parse_netlist("C a 1 0 1p\nC b 1 0 1p\n.input 1\n.output 1\n").unwrap();
        let sr = SymbolicRational {
            num: vec![SymbolicPolynomial {
                terms: vec![term(1, &[false, false])],
            }],
            den: vec![
                SymbolicPolynomial::default(),
                SymbolicPolynomial {
                    terms: vec![term(-1, &[true, false])],
                },
                SymbolicPolynomial {
                    terms: vec![term(1, &[true, true]), term(-1, &[false, true])],
                },
            ],
        };
        assert_eq!(render(&sr, &m), "H(s) = (1) / (-s·a + s^2·(a·b - b))");
    }

    #[test]
    fn canonicalize_examples() {
        let names = ["x1", "x2", "x3"];
        let dup = SymbolicPolynomial {
            terms: vec![term(1, &[true, true, false]), term(1, &[true, true, false])],
        };
        assert_eq!(canonicalize(&dup, &names).terms.len(), 2);

        let cancel = SymbolicPolynomial {
            terms: vec![
                term(1, &[true, false, false]),
                term(-1, &[true, false, false]),
            ],
        };
        assert!(canonicalize(&cancel, &names).is_empty());

        let order = SymbolicPolynomial {
            terms: vec![
                term(1, &[false, true, false]),
                term(1, &[true, false, true]),
            ],
        };
        let c = canonicalize(&order, &names);
        assert_eq!(c.terms[0].present, vec![true, false, true]);
        assert_eq!(c.terms[1].present, vec![false, true, false]);
    }

    fn arb_poly(k: usize) -> impl Strategy<Value = SymbolicPolynomial> {
        prop::collection::vec(
            (
                prop_oneof![Just(1i8), Just(-1i8)],
                prop::collection::vec(any::<bool>(), k),
            ),
            0..15,
        )
        .prop_map(|ts| SymbolicPolynomial {
            terms: ts
                .into_iter()
                .map(|(sign, present)| SymbolicTerm { sign, present })
                .collect(),
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn canonicalize_preserves_value(
            poly in arb_poly(4),
            xs in prop::collection::vec(prop::collection::vec(0.1f64..10.0, 4), 100),
        ) {
            let names = ["a", "b", "c", "d"];
            let c = canonicalize(&poly, &names);
            for x in &xs {
                let (u, v) = (evaluate_poly(&poly, x), evaluate_poly(&c, x));
                let scale = poly.terms.iter().map(|t| t.eval(x).abs()).sum::<f64>().max(1e-300);
                prop_assert!((u - v).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn decoded_terms_bounded(genes in prop::collection::vec(0u8..6, 3 * 4 * 5)) {
            let layout = Layout { num_polys: 1, den_polys: 2, max_terms: 4, params: 4 };
            let genes: Vec<i8> = genes
                .iter()
                .enumerate()
                .map(|(i, &g)| if layout.is_selector(i) { (g % 3) as i8 - 1 } else { (g % 2) as i8 })
                .collect();
            let chrom = Chromosome { layout, genes };
            prop_assert!(chrom.is_well_formed());
            let sr = decode_unchecked(&chrom);
            for p in sr.num.iter().chain(&sr.den) {
                prop_assert!(p.terms.len() <= layout.max_terms);
            }
            prop_assert_eq!(sr.term_count(), chrom.active_terms());
        }
    }
}
