//! Subcommand definitions and handlers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dssa_core::oracle::{exact_symbolic, term_count};
use dssa_core::sampling::sample_dataset;
use dssa_core::{parse_netlist, CircuitModel, TestMetrics};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::artifacts::{samples_csv, write_run_outputs};
use crate::config::RunConfig;
use crate::pipeline::{self, RunReport};

/// Process exit status of a run whose best solution violates constraints.
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "dssa",
    version,
    about = "Simplified symbolic transfer functions for linear circuits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize a simplified transfer function and write the reports.
    Run(RunArgs),
    /// Print the exact symbolic expansion and term counts.
    Exact { netlist: PathBuf },
    /// Draw Monte Carlo samples and print them as CSV.
    Sample {
        netlist: PathBuf,
        #[arg(short = 'n', default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Re-score a saved result on the test set drawn with `--seed`.
    Eval {
        netlist: PathBuf,
        result: PathBuf,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub netlist: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub pop: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long)]
    pub test: Option<usize>,
    #[arg(long)]
    pub parallel: bool,
    #[arg(long)]
    pub verbose: bool,
    #[arg(short = 'o', long = "out")]
    pub output_dir: Option<PathBuf>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            cfg.apply_file(&text)
                .with_context(|| format!("in {}", path.display()))?;
        }
        cfg.netlist = self.netlist.clone();
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.pop {
            cfg.ga.population = v;
        }
        if let Some(v) = self.iters {
            cfg.ga.iterations = v;
        }
        if let Some(v) = self.train {
            cfg.train = v;
        }
        if let Some(v) = self.test {
            cfg.test = v;
        }
        if self.parallel {
            cfg.ga.parallel = true;
        }
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_model(path: &Path) -> Result<CircuitModel> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading netlist {}", path.display()))?;
    parse_netlist(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Runs one subcommand and returns the process exit status.
pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Run(args) => cmd_run(&args, out, err),
        Command::Exact { netlist } => cmd_exact(&netlist, out),
        Command::Sample {
            netlist,
            count,
            seed,
        } => cmd_sample(&netlist, count, seed, out),
        Command::Eval {
            netlist,
            result,
            seed,
        } => cmd_eval(&netlist, &result, seed, out),
    }
}

fn print_metrics(out: &mut dyn Write, m: &TestMetrics) -> Result<()> {
    writeln!(
        out,
        "test points      {} ({} feasible)",
        m.points, m.feasible_points
    )?;
    writeln!(
        out,
        "dc-gain error    avg {:.4} dB, max {:.4} dB",
        m.avg_dc_error_db, m.max_dc_error_db
    )?;
    writeln!(
        out,
        "pole/zero error  avg {:.3} %, max {:.3} %",
        m.avg_root_error_pct, m.max_root_error_pct
    )?;
    Ok(())
}

fn print_summary(out: &mut dyn Write, r: &RunReport) -> Result<()> {
    writeln!(out, "{}", r.rendered)?;
    writeln!(
        out,
        "terms            {} (numerator {:?}, denominator {:?})",
        r.terms.total, r.terms.numerator, r.terms.denominator
    )?;
    writeln!(
        out,
        "objective        {:.6} (complexity {:.4}, error {:.4})",
        r.objective.objective, r.objective.complexity, r.objective.error
    )?;
    writeln!(out, "train feasible   {}", r.train_feasible)?;
    print_metrics(out, &r.test)
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = args.resolve()?;
    let model = load_model(&cfg.netlist)?;
    if cfg.ga.parallel {
        writeln!(
            err,
            "note: --parallel evaluates fitness concurrently; results remain seed-determined but timings vary"
        )?;
    }
    let started = Instant::now();
    let verbose = args.verbose;
    let outcome = pipeline::run(&model, &cfg, |it, best, feasible| {
        if verbose {
            let _ = writeln!(err, "iter {it:5}  best {best:.6}  feasible {feasible}");
        }
    })?;
    let elapsed = started.elapsed();
    write_run_outputs(
        &cfg.output_dir,
        &outcome.report,
        &model,
        &outcome.prepared.nominal,
        &outcome.simplified,
        &outcome.prepared.grid,
    )
    .with_context(|| format!("writing results to {}", cfg.output_dir.display()))?;

    print_summary(out, &outcome.report)?;
    writeln!(out, "wall time        {:.2} s", elapsed.as_secs_f64())?;
    if outcome.report.train_feasible {
        Ok(0)
    } else {
        writeln!(
            err,
            "warning: no feasible solution found; reporting the lowest objective"
        )?;
        Ok(EXIT_INFEASIBLE)
    }
}

pub fn cmd_exact(netlist: &Path, out: &mut dyn Write) -> Result<i32> {
    let model = load_model(netlist)?;
    let exact = exact_symbolic(&model)?;
    write!(out, "{}", exact.render())?;
    let (_, _, total) = term_count(&exact);
    writeln!(
        out,
        "nodes {}, parameters {}, exact terms {total}",
        model.node_count(),
        model.param_count()
    )?;
    if exact.repeated_param_terms() > 0 {
        writeln!(
            out,
            "warning: {} terms repeat a parameter",
            exact.repeated_param_terms()
        )?;
    }
    Ok(0)
}

pub fn cmd_sample(netlist: &Path, count: usize, seed: u64, out: &mut dyn Write) -> Result<i32> {
    let model = load_model(netlist)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = sample_dataset(&model, count, &mut rng)?;
    write!(out, "{}", samples_csv(&model, &points))?;
    Ok(0)
}

pub fn cmd_eval(netlist: &Path, result: &Path, seed: u64, out: &mut dyn Write) -> Result<i32> {
    let model = load_model(netlist)?;
    let text =
        fs::read_to_string(result).with_context(|| format!("reading {}", result.display()))?;
    let report: RunReport =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", result.display()))?;
    if report.circuit.parameters != model.param_names() {
        bail!(
            "result parameters {:?} do not match netlist parameters {:?}",
            report.circuit.parameters,
            model.param_names()
        );
    }
    let (sr, metrics) =
        pipeline::evaluate_expression(&model, &report.config, &report.expression, seed)?;
    writeln!(out, "{}", dssa_core::symbolic::render(&sr, &model))?;
    print_metrics(out, &metrics)?;
    Ok(0)
}
