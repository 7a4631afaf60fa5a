//! Small-signal netlist parser.
//!
//! Line-oriented format, one element or directive per line:
//!
//! ```text
//! # comment
//! .title <text>
//! .input <node>
//! .output <node>
//! G <name> <out+> <out-> <ctrl+> <ctrl-> <siemens>   (VCCS)
//! G <name> <n+> <n-> <siemens>                       (conductance)
//! R <name> <n+> <n-> <ohms>                          (stored as conductance g_<name>)
//! C <name> <n+> <n-> <farads>
//! .vary <param|*> <percent>
//! ```
//!
//! Node `0` is ground. Every element owns exactly one symbolic parameter.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

/// Default symmetric variation in percent around the nominal value.
pub const DEFAULT_SPREAD_PCT: f64 = 50.0;

pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetlistError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown node `{node}`")]
    UnknownNode { line: usize, node: String },
    #[error("line {line}: duplicate element name `{name}`")]
    DuplicateName { line: usize, name: String },
    #[error("line {line}: value of `{name}` must be positive, got {value}")]
    NonPositiveValue {
        line: usize,
        name: String,
        value: f64,
    },
    #[error("line {line}: element `{name}` connects a node to itself")]
    Degenerate { line: usize, name: String },
    #[error("line {line}: unknown parameter `{name}`")]
    UnknownParameter { line: usize, name: String },
    #[error("missing `{0}` directive")]
    MissingDirective(&'static str),
    #[error("no elements")]
    NoElements,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Conductance,
    Capacitance,
    Vccs,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Element {
    pub kind: ElementKind,
    pub name: String,
    /// `[n+, n-]` for two-terminal elements, `[out+, out-, ctrl+, ctrl-]` for a VCCS.
    pub terminals: Vec<NodeId>,
    pub parameter_index: usize,
    /// Original resistance when the element came from an `R` line.
    pub ohms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parameter {
    pub name: String,
    pub nominal: f64,
    pub lower: f64,
    pub upper: f64,
    pub spread_pct: f64,
}

impl Parameter {
    fn new(name: String, nominal: f64) -> Self {
        let mut p = Self {
            name,
            nominal,
            lower: nominal,
            upper: nominal,
            spread_pct: DEFAULT_SPREAD_PCT,
        };
        p.set_spread(DEFAULT_SPREAD_PCT);
        p
    }

    pub fn set_spread(&mut self, pct: f64) {
        self.spread_pct = pct;
        self.lower = self.nominal * (1.0 - pct / 100.0);
        self.upper = self.nominal * (1.0 + pct / 100.0);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircuitModel {
    pub title: Option<String>,
    /// Node names indexed by id; entry 0 is ground.
    pub node_names: Vec<String>,
    pub input_node: NodeId,
    pub output_node: NodeId,
    pub elements: Vec<Element>,
    pub parameters: Vec<Parameter>,
}

impl CircuitModel {
    /// Non-ground node count.
    pub fn node_count(&self) -> usize {
        self.node_names.len() - 1
    }

    /// Number of symbolic parameters (K).
    pub fn param_count(&self) -> usize {
        self.parameters.len()
    }

    pub fn nominal_values(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.nominal).collect()
    }

    pub fn param_names(&self) -> Vec<&str> {
        self.parameters.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.parameters.iter().position(|p| p.name == name)
    }

    pub fn capacitor_count(&self) -> usize {
        self.elements
            .iter()
            .filter(|e| e.kind == ElementKind::Capacitance)
            .count()
    }

    /// Canonical netlist text; parsing it yields a model equal to `self`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(t) = &self.title {
            let _ = writeln!(out, ".title {t}");
        }
        let n = |id: NodeId| self.node_names[id].as_str();
        for e in &self.elements {
            let p = &self.parameters[e.parameter_index];
            let t = &e.terminals;
            let _ = match (e.kind, e.ohms) {
                (ElementKind::Vccs, _) => writeln!(
                    out,
                    "G {} {} {} {} {} {:e}",
                    e.name,
                    n(t[0]),
                    n(t[1]),
                    n(t[2]),
                    n(t[3]),
                    p.nominal
                ),
                (ElementKind::Conductance, Some(ohms)) => {
                    writeln!(out, "R {} {} {} {:e}", e.name, n(t[0]), n(t[1]), ohms)
                }
                (ElementKind::Conductance, None) => {
                    writeln!(out, "G {} {} {} {:e}", e.name, n(t[0]), n(t[1]), p.nominal)
                }
                (ElementKind::Capacitance, _) => {
                    writeln!(out, "C {} {} {} {:e}", e.name, n(t[0]), n(t[1]), p.nominal)
                }
            };
        }
        for p in &self.parameters {
            if p.spread_pct != DEFAULT_SPREAD_PCT {
                let _ = writeln!(out, ".vary {} {}", p.name, p.spread_pct);
            }
        }
        let _ = writeln!(out, ".input {}", n(self.input_node));
        let _ = writeln!(out, ".output {}", n(self.output_node));
        out
    }
}

/// Parses a number with an optional SPICE scale suffix (`f p n u m k meg g t`).
fn parse_value(tok: &str) -> Option<f64> {
    if let Ok(v) = tok.parse::<f64>() {
        return Some(v);
    }
    let lower = tok.to_ascii_lowercase();
    let (digits, scale) = if let Some(d) = lower.strip_suffix("meg") {
        (d, 1e6)
    } else {
        let split = lower.len().checked_sub(1)?;
        let (d, suffix) = lower.split_at(split);
        let scale = match suffix {
            "f" => 1e-15,
            "p" => 1e-12,
            "n" => 1e-9,
            "u" => 1e-6,
            "m" => 1e-3,
            "k" => 1e3,
            "g" => 1e9,
            "t" => 1e12,
            _ => return None,
        };
        (d, scale)
    };
    digits.parse::<f64>().ok().map(|v| v * scale)
}

struct Builder {
    node_names: Vec<String>,
    node_ids: HashMap<String, NodeId>,
    elements: Vec<Element>,
    parameters: Vec<Parameter>,
}

impl Builder {
    fn node(&mut self, tok: &str) -> NodeId {
        if tok == "0" {
            return 0;
        }
        if let Some(&id) = self.node_ids.get(tok) {
            return id;
        }
        let id = self.node_names.len();
        self.node_names.push(tok.to_string());
        self.node_ids.insert(tok.to_string(), id);
        id
    }
}

pub fn parse_netlist(text: &str) -> Result<CircuitModel, NetlistError> {
    let mut b = Builder {
        node_names: vec!["0".to_string()],
        node_ids: HashMap::new(),
        elements: Vec::new(),
        parameters: Vec::new(),
    };
    let mut title = None;
    let mut input: Option<(usize, String)> = None;
    let mut output: Option<(usize, String)> = None;
    let mut varies: Vec<(usize, String, f64)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let syntax = |msg: &str| NetlistError::Syntax {
            line: line_no,
            msg: msg.to_string(),
        };
        let head = toks[0];

        if let Some(directive) = head.strip_prefix('.') {
            match directive {
                "title" => {
                    let rest = line[head.len()..].trim();
                    title = Some(rest.to_string());
                }
                "input" | "output" => {
                    if toks.len() != 2 {
                        return Err(syntax(&format!(".{directive} takes exactly one node")));
                    }
                    let slot = if directive == "input" {
                        &mut input
                    } else {
                        &mut output
                    };
                    *slot = Some((line_no, toks[1].to_string()));
                }
                "vary" => {
                    if toks.len() != 3 {
                        return Err(syntax(".vary takes a parameter name and a percentage"));
                    }
                    let pct = parse_value(toks[2])
                        .ok_or_else(|| syntax(&format!("bad percentage `{}`", toks[2])))?;
                    if !(0.0..100.0).contains(&pct) {
                        return Err(syntax("variation must be in [0, 100) percent"));
                    }
                    varies.push((line_no, toks[1].to_string(), pct));
                }
                _ => return Err(syntax(&format!("unknown directive `{head}`"))),
            }
            continue;
        }

        let (kind, node_toks, value_tok) = match (head, toks.len()) {
            ("G", 7) => (ElementKind::Vccs, &toks[2..6], toks[6]),
            ("G", 5) | ("R", 5) => (ElementKind::Conductance, &toks[2..4], toks[4]),
            ("C", 5) => (ElementKind::Capacitance, &toks[2..4], toks[4]),
            ("G" | "R" | "C", n) => {
                return Err(syntax(&format!("wrong field count {n} for `{head}` line")))
            }
            _ => return Err(syntax(&format!("unknown element type `{head}`"))),
        };
        let name = toks[1].to_string();
        let value =
            parse_value(value_tok).ok_or_else(|| syntax(&format!("bad value `{value_tok}`")))?;
        if value <= 0.0 || !value.is_finite() {
            return Err(NetlistError::NonPositiveValue {
                line: line_no,
                name,
                value,
            });
        }
        let mut terminals: Vec<NodeId> = node_toks.iter().map(|t| b.node(t)).collect();
        if terminals[0] == terminals[1] {
            return Err(NetlistError::Degenerate {
                line: line_no,
                name,
            });
        }
        // A VCCS sensing its own output pair is a plain conductance.
        let kind = if kind == ElementKind::Vccs && terminals[0..2] == terminals[2..4] {
            terminals.truncate(2);
            ElementKind::Conductance
        } else {
            kind
        };

        let (param_name, nominal, ohms) = if head == "R" {
            (format!("g_{name}"), 1.0 / value, Some(value))
        } else {
            (name.clone(), value, None)
        };
        if b.elements.iter().any(|e| e.name == name)
            || b.parameters.iter().any(|p| p.name == param_name)
        {
            return Err(NetlistError::DuplicateName {
                line: line_no,
                name,
            });
        }
        let parameter_index = b.parameters.len();
        b.parameters.push(Parameter::new(param_name, nominal));
        b.elements.push(Element {
            kind,
            name,
            terminals,
            parameter_index,
            ohms,
        });
    }

    if b.elements.is_empty() {
        return Err(NetlistError::NoElements);
    }

    for (line, name, pct) in varies {
        if name == "*" {
            b.parameters.iter_mut().for_each(|p| p.set_spread(pct));
        } else {
            let p = b
                .parameters
                .iter_mut()
                .find(|p| p.name == name)
                .ok_or(NetlistError::UnknownParameter { line, name })?;
            p.set_spread(pct);
        }
    }

    let resolve = |slot: Option<(usize, String)>, which: &'static str| {
        let (line, tok) = slot.ok_or(NetlistError::MissingDirective(which))?;
        match b.node_ids.get(&tok) {
            Some(&id) => Ok(id),
            None => Err(NetlistError::UnknownNode { line, node: tok }),
        }
    };
    let input_node = resolve(input, ".input")?;
    let output_node = resolve(output, ".output")?;

    Ok(CircuitModel {
        title,
        node_names: b.node_names,
        input_node,
        output_node,
        elements: b.elements,
        parameters: b.parameters,
    })
}
