use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use maxcap::analysis::{entropy_report_mmnl, entropy_report_mnl, estimate_z};
use maxcap::binary::{solve_exact, SolverConfig, SolverMode};
use maxcap::experiment::{run_experiment, ExperimentConfig};
use maxcap::generators::{
    gen_hm14, gen_hm14_mmnl, gen_mmnl3, materialize_sample, GenerativeModel, Hm14Params, Mmnl3Params,
    NoiseModel,
};
use maxcap::io::{instance_to_json, load_instance};
use maxcap::model::objective_mnl;
use maxcap::moa::{solve_mnl_bruteforce, solve_moa, MoaConfig};
use maxcap::simulate::{build_coverage, cluster, size_reduction};
use maxcap::{ChoiceInstance, DecisionVector, Method};
use serde_json::json;

/// Exit status when some solve stopped at a limit.
const FLAGGED: u8 = 2;

#[derive(Parser)]
#[command(name = "maxcap", version, about = "Maximum-capture facility location solvers and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated instance as JSON.
    Generate(GenerateArgs),
    /// Solve an instance file with one method.
    Solve(SolveArgs),
    /// Expected choice entropy of an instance or a generative family.
    Entropy(EntropyArgs),
    /// Market share of a given set of open candidates.
    Evaluate(EvaluateArgs),
    /// Run an experiment config and write the CSV reports.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyName {
    Hm14,
    Hm14Mmnl,
    Mmnl3,
}

#[derive(Args)]
struct FamilyArgs {
    #[arg(long, value_enum)]
    family: FamilyName,
    /// Distance sensitivity; hm14 requires it, mmnl3 defaults to 1.
    #[arg(long)]
    beta: Option<f64>,
    /// Competitor distance scaling (hm14).
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Candidate count (hm14).
    #[arg(long)]
    candidates: Option<usize>,
    /// Competitor count (hm14).
    #[arg(long, default_value_t = 10)]
    competitors: usize,
    /// Budget r; defaults to the family's own.
    #[arg(long)]
    budget: Option<usize>,
    /// Facility layout seed for generative families; defaults to --seed.
    #[arg(long)]
    layout_seed: Option<u64>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Number of customers.
    #[arg(long)]
    customers: usize,
    #[arg(long)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Sb,
    Sbc,
    Moa,
    Brute,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "sbc")]
    method: MethodArg,
    /// Noise scenarios per customer (sb, sbc).
    #[arg(long, default_value_t = 1)]
    scenarios: usize,
    /// Scenario seed; required by sb and sbc.
    #[arg(long)]
    seed: Option<u64>,
    /// Customer groups for moa; one per customer when absent.
    #[arg(long)]
    groups: Option<usize>,
    #[arg(long, default_value_t = 600.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 20_000_000)]
    node_limit: u64,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EntropyArgs {
    /// Instance file; exact logit entropy over its customers.
    #[arg(long, conflicts_with = "family")]
    instance: Option<PathBuf>,
    #[command(flatten)]
    family: Option<FamilyArgs>,
    /// Monte Carlo draws for a generative family.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Comma-separated candidate indices to open.
    #[arg(long, value_delimiter = ',', required = true)]
    open: Vec<usize>,
    /// Instance file; exact share over its customers.
    #[arg(long, conflicts_with = "family")]
    instance: Option<PathBuf>,
    #[command(flatten)]
    family: Option<FamilyArgs>,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's parallel job count.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides the config's report path.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Record wall-clock times in the report.
    #[arg(long)]
    timing: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are configuration errors, not flagged runs
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Entropy(a) => entropy(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display())),
        None => match writeln!(std::io::stdout().lock(), "{text}") {
            Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        },
    }
}

fn generative(f: &FamilyArgs, seed: u64) -> Result<GenerativeModel> {
    let layout = f.layout_seed.unwrap_or(seed);
    Ok(match f.family {
        FamilyName::Hm14 => bail!("hm14 is a finite-sample family; pass --instance instead"),
        FamilyName::Hm14Mmnl => gen_hm14_mmnl(layout),
        FamilyName::Mmnl3 => {
            let mut params = Mmnl3Params::with_beta(f.beta.unwrap_or(1.0));
            if let Some(r) = f.budget {
                params.budget = r;
            }
            gen_mmnl3(&params, layout)?
        }
    })
}

fn generate(a: GenerateArgs) -> Result<u8> {
    let f = &a.family;
    let instance = match f.family {
        FamilyName::Hm14 => {
            let (Some(beta), Some(d), Some(r)) = (f.beta, f.candidates, f.budget) else {
                bail!("hm14 needs --beta, --candidates and --budget");
            };
            let mut params = Hm14Params::new(a.customers, d, beta, f.alpha, r);
            params.n_competitors = f.competitors;
            gen_hm14(&params, a.seed)?
        }
        _ => {
            let inst = materialize_sample(&generative(f, a.seed)?, a.customers, a.seed)?;
            match f.budget {
                Some(r) => inst.with_budget(r)?,
                None => inst,
            }
        }
    };
    emit(&instance_to_json(&instance)?, a.out.as_deref())?;
    Ok(0)
}

fn solve(a: SolveArgs) -> Result<u8> {
    let instance = load_instance(&a.instance)?;
    let time_limit = Duration::from_secs_f64(a.time_limit);
    let mut reduction = None;
    let solution = match a.method {
        MethodArg::Sb | MethodArg::Sbc => {
            let seed = a.seed.context("--seed is required for simulation methods")?;
            let coverage = build_coverage(&instance, a.scenarios, &NoiseModel::GumbelStandard, seed)?;
            let config = SolverConfig {
                mode: SolverMode::BranchAndBound,
                node_limit: a.node_limit,
                time_limit,
            };
            if a.method == MethodArg::Sb {
                let mut sol = solve_exact(&coverage.as_unclustered(), &config)?;
                sol.method = Method::Sb;
                sol
            } else {
                let clustered = cluster(&coverage);
                reduction = Some(size_reduction(&coverage, &clustered));
                solve_exact(&clustered, &config)?
            }
        }
        MethodArg::Moa => {
            let config = MoaConfig {
                groups: a.groups,
                master_node_limit: a.node_limit,
                time_limit,
                ..MoaConfig::default()
            };
            solve_moa(&instance, &config)?.solution
        }
        MethodArg::Brute => solve_mnl_bruteforce(&instance)?,
    };
    let report = json!({
        "method": solution.method,
        "open": solution.decision.indices(),
        "objective": solution.objective,
        "share": objective_mnl(&instance, &solution.decision)?,
        "optimal": solution.optimal,
        "iterations": solution.iterations,
        "size_reduction_pct": reduction,
    });
    emit(&serde_json::to_string_pretty(&report)?, a.out.as_deref())?;
    Ok(if solution.optimal { 0 } else { FLAGGED })
}

fn entropy(a: EntropyArgs) -> Result<u8> {
    let report = match (&a.instance, &a.family) {
        (Some(path), _) => entropy_report_mnl(&load_instance(path)?),
        (None, Some(f)) => {
            let seed = a.seed.context("--seed is required for Monte Carlo entropy")?;
            entropy_report_mmnl(&generative(f, seed)?, a.samples, seed)?
        }
        (None, None) => bail!("pass --instance or --family"),
    };
    emit(&serde_json::to_string_pretty(&report)?, None)?;
    Ok(0)
}

fn decision(n_candidates: usize, open: &[usize]) -> Result<DecisionVector> {
    Ok(DecisionVector::from_indices(n_candidates, open)?)
}

fn evaluate(a: EvaluateArgs) -> Result<u8> {
    let report = match (&a.instance, &a.family) {
        (Some(path), _) => {
            let instance: ChoiceInstance = load_instance(path)?;
            let x = decision(instance.n_candidates(), &a.open)?;
            json!({ "open": x.indices(), "share": objective_mnl(&instance, &x)? })
        }
        (None, Some(f)) => {
            let seed = a.seed.context("--seed is required for Monte Carlo evaluation")?;
            let model = generative(f, seed)?;
            let x = decision(model.n_candidates(), &a.open)?;
            let est = estimate_z(&model, &x, a.samples, seed)?;
            json!({ "open": x.indices(), "share": est.value, "std_error": est.std_error, "samples": est.sample_size })
        }
        (None, None) => bail!("pass --instance or --family"),
    };
    emit(&serde_json::to_string_pretty(&report)?, None)?;
    Ok(0)
}

fn bench(a: BenchArgs) -> Result<u8> {
    let mut config = ExperimentConfig::load(&a.config)?;
    if a.jobs.is_some() {
        config.jobs = a.jobs;
    }
    if a.timing {
        config.timing = true;
    }
    let output = a
        .output
        .or_else(|| config.output.clone())
        .context("no output path in the config or on the command line")?;
    let report = run_experiment(&config)?;
    for path in report.write(&output)? {
        eprintln!("wrote {}", path.display());
    }
    let flagged = report.flagged();
    if flagged > 0 {
        eprintln!("{flagged} rows stopped at a limit");
        return Ok(FLAGGED);
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
