//! Parse → sample → optimize → report.

use std::collections::HashMap;

use dssa_core::fitness::Violations;
use dssa_core::ga::{self, GaError};
use dssa_core::numeric::{build_pencil, extract_coeffs, NumericError};
use dssa_core::report::{terms_per_polynomial, test_metrics};
use dssa_core::sampling::{frequency_grid, sample_dataset, split_dataset, SamplingError};
use dssa_core::symbolic::{SymbolicPolynomial, SymbolicTerm};
use dssa_core::{
    CircuitModel, Dataset, EvaluationResult, FitnessContext, FrequencyGrid, Layout,
    NumericRational, SymbolicRational, TestMetrics,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("nominal circuit: {0}")]
    Nominal(#[from] NumericError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Ga(#[from] GaError),
    #[error("expression uses parameter `{0}` which the netlist does not define")]
    UnknownParameter(String),
    #[error("expression term has sign {0}, expected +1 or -1")]
    BadSign(i8),
}

/// One signed product of parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExprTerm {
    pub sign: i8,
    pub params: Vec<String>,
}

/// Coefficient polynomials per power of `s`, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expression {
    pub numerator: Vec<Vec<ExprTerm>>,
    pub denominator: Vec<Vec<ExprTerm>>,
}

impl Expression {
    pub fn from_rational(sr: &SymbolicRational, names: &[&str]) -> Self {
        let side = |polys: &[SymbolicPolynomial]| {
            polys
                .iter()
                .map(|p| {
                    p.terms
                        .iter()
                        .map(|t| ExprTerm {
                            sign: t.sign,
                            params: t
                                .present
                                .iter()
                                .zip(names)
                                .filter(|(on, _)| **on)
                                .map(|(_, n)| n.to_string())
                                .collect(),
                        })
                        .collect()
                })
                .collect()
        };
        Self {
            numerator: side(&sr.num),
            denominator: side(&sr.den),
        }
    }

    pub fn to_rational(&self, model: &CircuitModel) -> Result<SymbolicRational, PipelineError> {
        let index: HashMap<&str, usize> = model
            .param_names()
            .into_iter()
            .enumerate()
            .map(|(i, n)| (n, i))
            .collect();
        let side = |polys: &[Vec<ExprTerm>]| -> Result<Vec<SymbolicPolynomial>, PipelineError> {
            polys
                .iter()
                .map(|terms| {
                    let terms = terms
                        .iter()
                        .map(|t| {
                            if t.sign != 1 && t.sign != -1 {
                                return Err(PipelineError::BadSign(t.sign));
                            }
                            let mut present = vec![false; model.param_count()];
                            for name in &t.params {
                                let k = index
                                    .get(name.as_str())
                                    .ok_or_else(|| PipelineError::UnknownParameter(name.clone()))?;
                                present[*k] = true;
                            }
                            Ok(SymbolicTerm {
                                sign: t.sign,
                                present,
                            })
                        })
                        .collect::<Result<_, _>>()?;
                    Ok(SymbolicPolynomial { terms })
                })
                .collect()
        };
        Ok(SymbolicRational {
            num: side(&self.numerator)?,
            den: side(&self.denominator)?,
        })
    }
}

/// Everything derived from the netlist and seed before optimization starts.
pub struct Prepared {
    pub nominal: NumericRational,
    pub grid: FrequencyGrid,
    pub dataset: Dataset,
    pub layout: Layout,
}

/// Extracts the nominal function, builds the grid and draws the dataset from
/// the start of `rng`.
pub fn prepare(
    model: &CircuitModel,
    cfg: &RunConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Prepared, PipelineError> {
    cfg.validate()?;
    let nominal = extract_coeffs(&build_pencil(model, &model.nominal_values())?)?;
    let grid = frequency_grid(&nominal, cfg.points_per_decade);
    let points = sample_dataset(model, cfg.train + cfg.test, rng)?;
    let dataset = split_dataset(points, cfg.train, cfg.test, rng)?;
    let layout = Layout::for_degrees(
        nominal.num_degree(),
        nominal.den_degree(),
        cfg.max_terms,
        model.param_count(),
    );
    Ok(Prepared {
        nominal,
        grid,
        dataset,
        layout,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSummary {
    pub objective: f64,
    pub complexity: f64,
    pub error: f64,
    pub violations: Violations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSummary {
    pub numerator: Vec<usize>,
    pub denominator: Vec<usize>,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSummary {
    pub title: Option<String>,
    pub nodes: usize,
    pub parameters: Vec<String>,
    pub numerator_degree: usize,
    pub denominator_degree: usize,
}

/// Contents of `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub circuit: CircuitSummary,
    pub expression: Expression,
    pub rendered: String,
    pub objective: ObjectiveSummary,
    pub train_feasible: bool,
    pub terms: TermSummary,
    pub test: TestMetrics,
}

pub struct RunOutcome {
    pub report: RunReport,
    pub prepared: Prepared,
    pub simplified: SymbolicRational,
    pub history: Vec<f64>,
}

pub fn run(
    model: &CircuitModel,
    cfg: &RunConfig,
    progress: impl FnMut(usize, f64, bool),
) -> Result<RunOutcome, PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let prepared = prepare(model, cfg, &mut rng)?;
    let ga_cfg = dssa_core::GaConfig {
        seed: cfg.seed,
        ..cfg.ga
    };
    let ctx = FitnessContext::new(
        prepared.layout,
        &prepared.dataset.train,
        &prepared.grid,
        cfg.fitness,
    );
    let outcome = ga::run(&ga_cfg, &ctx, &mut rng, progress)?;

    let names = model.param_names();
    let simplified = dssa_core::symbolic::decode_unchecked(&outcome.best).canonical(&names);
    let report = build_report(model, cfg, &prepared, &simplified, &outcome.result);
    Ok(RunOutcome {
        report,
        prepared,
        simplified,
        history: outcome.history,
    })
}

fn build_report(
    model: &CircuitModel,
    cfg: &RunConfig,
    prepared: &Prepared,
    simplified: &SymbolicRational,
    result: &EvaluationResult,
) -> RunReport {
    let names = model.param_names();
    let test = test_metrics(
        simplified,
        &prepared.dataset.test,
        &prepared.grid,
        &cfg.fitness,
    );
    let (numerator, denominator) = terms_per_polynomial(simplified);
    RunReport {
        config: RunConfig {
            ga: dssa_core::GaConfig {
                seed: cfg.seed,
                ..cfg.ga
            },
            ..cfg.clone()
        },
        circuit: CircuitSummary {
            title: model.title.clone(),
            nodes: model.node_count(),
            parameters: names.iter().map(|n| n.to_string()).collect(),
            numerator_degree: prepared.nominal.num_degree(),
            denominator_degree: prepared.nominal.den_degree(),
        },
        expression: Expression::from_rational(simplified, &names),
        rendered: dssa_core::symbolic::render(simplified, model),
        objective: ObjectiveSummary {
            objective: result.objective,
            complexity: result.complexity,
            error: result.error,
            violations: result.violations,
        },
        train_feasible: result.feasible,
        terms: TermSummary {
            total: simplified.term_count(),
            numerator,
            denominator,
        },
        test,
    }
}

/// Scores a saved expression on the test set that `cfg` with `seed` draws.
pub fn evaluate_expression(
    model: &CircuitModel,
    cfg: &RunConfig,
    expression: &Expression,
    seed: u64,
) -> Result<(SymbolicRational, TestMetrics), PipelineError> {
    let sr = expression.to_rational(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prepared = prepare(model, cfg, &mut rng)?;
    let metrics = test_metrics(&sr, &prepared.dataset.test, &prepared.grid, &cfg.fitness);
    Ok((sr, metrics))
}
