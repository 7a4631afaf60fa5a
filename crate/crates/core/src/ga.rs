//! Genetic search over term-selector chromosomes.
//!
//! Each generation is built from three parts: the best `⌈p_r·pop⌉` members
//! copied unchanged, `⌈p_c·pop⌉` uniform-crossover children of two
//! roulette-selected parents, and single-gene mutants of roulette-selected
//! parents for the remainder. Random draws per generation are consumed in a
//! fixed order: all selections, then crossover masks, then mutations.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fitness::{EvaluationResult, FitnessContext};
use crate::symbolic::{Chromosome, Layout};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaError {
    #[error("operator fractions sum to {0}, expected 1")]
    Fractions(f64),
    #[error("population must hold at least 2 members, got {0}")]
    Population(usize),
    #[error("term-selector init probabilities must be nonnegative and sum to 1")]
    InitProbs,
    #[error("crossover parents have layouts {a:?} and {b:?}")]
    DimensionMismatch { a: Layout, b: Layout },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub iterations: usize,
    pub p_r: f64,
    pub p_c: f64,
    pub p_m: f64,
    pub seed: u64,
    /// Initial probabilities of a term selector being `0`, `+1`, `-1`.
    pub ts_init_probs: [f64; 3],
    /// Evaluate each generation on the rayon pool.
    pub parallel: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 50,
            iterations: 1000,
            p_r: 0.1,
            p_c: 0.5,
            p_m: 0.4,
            seed: 1,
            ts_init_probs: [0.7, 0.2, 0.1],
            parallel: false,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), GaError> {
        let sum = self.p_r + self.p_c + self.p_m;
        if (sum - 1.0).abs() > 1e-12 || self.p_r < 0.0 || self.p_c < 0.0 || self.p_m < 0.0 {
            return Err(GaError::Fractions(sum));
        }
        if self.population < 2 {
            return Err(GaError::Population(self.population));
        }
        let p = self.ts_init_probs;
        if p.iter().any(|&x| x < 0.0) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(GaError::InitProbs);
        }
        Ok(())
    }

    /// Member counts produced by reproduction, crossover and mutation.
    pub fn operator_counts(&self) -> (usize, usize, usize) {
        let pop = self.population;
        let elites = ((self.p_r * pop as f64).ceil() as usize).min(pop);
        let cross = ((self.p_c * pop as f64).ceil() as usize).min(pop - elites);
        (elites, cross, pop - elites - cross)
    }
}

pub fn init_population<R: Rng + ?Sized>(
    cfg: &GaConfig,
    layout: Layout,
    rng: &mut R,
) -> Vec<Chromosome> {
    let [p0, p_plus, _] = cfg.ts_init_probs;
    (0..cfg.population)
        .map(|_| {
            let genes = (0..layout.len())
                .map(|i| {
                    if layout.is_selector(i) {
                        let r: f64 = rng.gen();
                        if r < p0 {
                            0
                        } else if r < p0 + p_plus {
                            1
                        } else {
                            -1
                        }
                    } else {
                        i8::from(rng.gen::<bool>())
                    }
                })
                .collect();
            Chromosome { layout, genes }
        })
        .collect()
}

/// Roulette wheel over `Obj_max − Obj_i + ε`; lower objectives win more often.
pub fn select_roulette<R: Rng + ?Sized>(objectives: &[f64], rng: &mut R) -> usize {
    if objectives.len() <= 1 {
        return 0;
    }
    let max = objectives.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = objectives.iter().cloned().fold(f64::INFINITY, f64::min);
    let eps = 1e-12 * (max - min + 1.0);
    let total: f64 = objectives.iter().map(|o| max - o + eps).sum();
    let mut target = rng.gen::<f64>() * total;
    for (i, o) in objectives.iter().enumerate() {
        target -= max - o + eps;
        if target < 0.0 {
            return i;
        }
    }
    objectives.len() - 1
}

/// Each gene copied from `a` or `b` with probability ½.
pub fn uniform_crossover<R: Rng + ?Sized>(
    a: &Chromosome,
    b: &Chromosome,
    rng: &mut R,
) -> Result<Chromosome, GaError> {
    if a.layout != b.layout || a.genes.len() != b.genes.len() {
        return Err(GaError::DimensionMismatch {
            a: a.layout,
            b: b.layout,
        });
    }
    let genes = a
        .genes
        .iter()
        .zip(&b.genes)
        .map(|(&x, &y)| if rng.gen::<bool>() { x } else { y })
        .collect();
    Ok(Chromosome {
        layout: a.layout,
        genes,
    })
}

/// Changes exactly one gene: presence genes flip, selectors move to one of
/// the other two values.
pub fn mutate<R: Rng + ?Sized>(parent: &Chromosome, rng: &mut R) -> Chromosome {
    let mut child = parent.clone();
    let pos = rng.gen_range(0..child.genes.len());
    let g = &mut child.genes[pos];
    if parent.layout.is_selector(pos) {
        let others: [i8; 2] = match *g {
            0 => [1, -1],
            1 => [0, -1],
            _ => [0, 1],
        };
        *g = others[usize::from(rng.gen::<bool>())];
    } else {
        *g = 1 - *g;
    }
    child
}

#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub best: Chromosome,
    pub result: EvaluationResult,
    /// Best-ever objective over all members after initialization and after
    /// each generation.
    pub history: Vec<f64>,
    /// Whether any feasible member was ever seen.
    pub found_feasible: bool,
}

fn evaluate_all(
    ctx: &FitnessContext<'_>,
    members: &[Chromosome],
    parallel: bool,
) -> Vec<EvaluationResult> {
    if parallel {
        members.par_iter().map(|c| ctx.evaluate(c)).collect()
    } else {
        members.iter().map(|c| ctx.evaluate(c)).collect()
    }
}

struct BestTracker {
    feasible: Option<(Chromosome, EvaluationResult)>,
    any: Option<(Chromosome, EvaluationResult)>,
}

impl BestTracker {
    fn offer(&mut self, c: &Chromosome, r: &EvaluationResult) {
        let better = |slot: &Option<(Chromosome, EvaluationResult)>| {
            slot.as_ref().is_none_or(|(_, b)| r.objective < b.objective)
        };
        if r.feasible && better(&self.feasible) {
            self.feasible = Some((c.clone(), r.clone()));
        }
        if better(&self.any) {
            self.any = Some((c.clone(), r.clone()));
        }
    }

    /// Lowest objective seen so far, feasible or not.
    fn current(&self) -> f64 {
        self.any
            .as_ref()
            .map_or(f64::INFINITY, |(_, r)| r.objective)
    }
}

/// One evaluated generation.
#[derive(Debug, Clone)]
pub struct Population {
    pub members: Vec<Chromosome>,
    pub evals: Vec<EvaluationResult>,
}

/// Parent indices (into the previous generation) of each new member, in
/// member order: elites, then crossover children, then mutation children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lineage {
    pub elites: Vec<usize>,
    pub crossover: Vec<(usize, usize)>,
    pub mutation: Vec<usize>,
}

impl Population {
    pub fn initial<R: Rng + ?Sized>(cfg: &GaConfig, ctx: &FitnessContext<'_>, rng: &mut R) -> Self {
        let members = init_population(cfg, ctx.layout, rng);
        let evals = evaluate_all(ctx, &members, cfg.parallel);
        Self { members, evals }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Breeds and evaluates the next generation. Elites keep their scores.
    pub fn next_generation<R: Rng + ?Sized>(
        &self,
        cfg: &GaConfig,
        ctx: &FitnessContext<'_>,
        rng: &mut R,
    ) -> Result<(Population, Lineage), GaError> {
        let (n_elite, n_cross, n_mut) = cfg.operator_counts();
        let objectives: Vec<f64> = self.evals.iter().map(|e| e.objective).collect();
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| objectives[a].total_cmp(&objectives[b]).then(a.cmp(&b)));

        let lineage = Lineage {
            elites: order[..n_elite].to_vec(),
            crossover: (0..n_cross)
                .map(|_| {
                    (
                        select_roulette(&objectives, rng),
                        select_roulette(&objectives, rng),
                    )
                })
                .collect(),
            mutation: (0..n_mut)
                .map(|_| select_roulette(&objectives, rng))
                .collect(),
        };

        let mut members: Vec<Chromosome> = Vec::with_capacity(self.len());
        members.extend(lineage.elites.iter().map(|&i| self.members[i].clone()));
        for &(a, b) in &lineage.crossover {
            members.push(uniform_crossover(&self.members[a], &self.members[b], rng)?);
        }
        for &p in &lineage.mutation {
            members.push(mutate(&self.members[p], rng));
        }

        let mut evals: Vec<EvaluationResult> = lineage
            .elites
            .iter()
            .map(|&i| self.evals[i].clone())
            .collect();
        evals.extend(evaluate_all(ctx, &members[n_elite..], cfg.parallel));
        Ok((Population { members, evals }, lineage))
    }
}

/// Progress callback receives `(iteration, best objective, best is feasible)`.
pub fn run<R: Rng + ?Sized>(
    cfg: &GaConfig,
    ctx: &FitnessContext<'_>,
    rng: &mut R,
    mut progress: impl FnMut(usize, f64, bool),
) -> Result<GaOutcome, GaError> {
    cfg.validate()?;
    let n_elite = cfg.operator_counts().0;

    let mut pop = Population::initial(cfg, ctx, rng);
    let mut best = BestTracker {
        feasible: None,
        any: None,
    };
    for (c, r) in pop.members.iter().zip(&pop.evals) {
        best.offer(c, r);
    }
    let mut history = Vec::with_capacity(cfg.iterations + 1);
    history.push(best.current());
    progress(0, best.current(), best.feasible.is_some());

    for it in 1..=cfg.iterations {
        pop = pop.next_generation(cfg, ctx, rng)?.0;
        for (c, r) in pop.members.iter().zip(&pop.evals).skip(n_elite) {
            best.offer(c, r);
        }
        history.push(best.current());
        progress(it, best.current(), best.feasible.is_some());
    }

    let found_feasible = best.feasible.is_some();
    let (best, result) = best.feasible.or(best.any).expect("population is nonempty");
    Ok(GaOutcome {
        best,
        result,
        history,
        found_feasible,
    })
}
