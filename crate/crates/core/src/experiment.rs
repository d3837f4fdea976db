//! Seeded experiment grids with CSV reports.
//!
//! A configuration names an instance family, parameter ladders, solution
//! methods and seeds. Every (cell, seed) pair is one job; jobs run in
//! parallel and each emits one row per (sample size, scenario count, method).
//! Rows come out in configuration order, so a configuration always produces
//! the same report. Wall-clock times are only written when `timing` is set.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{entropy_mmnl, entropy_mnl, rgap_values, rgen_gap, EvaluationSample};
use crate::binary::{solve_exact, SolverConfig, SolverMode};
use crate::error::{Error, Result};
use crate::generators::{
    gen_hm14, gen_hm14_mmnl, gen_mmnl3, materialize_sample, GenerativeModel, Hm14Params, Mmnl3Params,
    NoiseModel,
};
use crate::io::load_instance;
use crate::model::{objective_mnl, ChoiceInstance, Method, Solution};
use crate::moa::{solve_mnl_bruteforce, solve_moa, MoaConfig};
use crate::simulate::{build_coverage, cluster, size_reduction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    /// Finite-support logit instances on a square; one instance per cell
    /// and seed.
    Hm14 {
        betas: Vec<f64>,
        alphas: Vec<f64>,
        n_candidates: Vec<usize>,
        budgets: Vec<usize>,
        #[serde(default = "default_competitors")]
        n_competitors: usize,
    },
    /// Generative model with uniform customers and fixed budget 5.
    Hm14Mmnl {
        /// Keep one facility layout for every seed instead of one per seed.
        #[serde(default)]
        layout_seed: Option<u64>,
    },
    /// Three-segment generative model.
    Mmnl3 {
        betas: Vec<f64>,
        #[serde(default)]
        layout_seed: Option<u64>,
    },
    /// A fixed instance file; seeds only drive the scenario noise.
    File { path: PathBuf },
}

fn default_competitors() -> usize {
    10
}

impl FamilySpec {
    pub fn label(&self) -> &'static str {
        match self {
            FamilySpec::Hm14 { .. } => "hm14",
            FamilySpec::Hm14Mmnl { .. } => "hm14-mmnl",
            FamilySpec::Mmnl3 { .. } => "mmnl3",
            FamilySpec::File { .. } => "file",
        }
    }

    fn is_generative(&self) -> bool {
        matches!(self, FamilySpec::Hm14Mmnl { .. } | FamilySpec::Mmnl3 { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    #[serde(default = "default_time_limit")]
    pub time_limit_s: f64,
    #[serde(default = "default_node_limit")]
    pub node_limit: u64,
    /// MOA customer groups; absent means one group per customer.
    #[serde(default)]
    pub moa_groups: Option<usize>,
    #[serde(default = "default_tolerance")]
    pub moa_tolerance: f64,
}

fn default_time_limit() -> f64 {
    600.0
}

fn default_node_limit() -> u64 {
    20_000_000
}

fn default_tolerance() -> f64 {
    1e-6
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            time_limit_s: default_time_limit(),
            node_limit: default_node_limit(),
            moa_groups: None,
            moa_tolerance: default_tolerance(),
        }
    }
}

impl Limits {
    fn solver(&self) -> SolverConfig {
        SolverConfig {
            mode: SolverMode::BranchAndBound,
            node_limit: self.node_limit,
            time_limit: Duration::from_secs_f64(self.time_limit_s),
        }
    }

    fn moa(&self, n_customers: usize) -> MoaConfig {
        MoaConfig {
            groups: self.moa_groups.map(|t| t.min(n_customers)),
            tolerance: self.moa_tolerance,
            time_limit: Duration::from_secs_f64(self.time_limit_s),
            ..Default::default()
        }
    }
}

fn default_s_ladder() -> Vec<usize> {
    vec![1]
}

fn default_eval_samples() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: FamilySpec,
    pub methods: Vec<Method>,
    /// Customer sample sizes; ignored by the file family.
    #[serde(default)]
    pub n_ladder: Vec<usize>,
    #[serde(default = "default_s_ladder")]
    pub s_ladder: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Out-of-sample draws for the generative families, used for both the
    /// value estimate and the entropy estimate.
    #[serde(default = "default_eval_samples")]
    pub eval_samples: usize,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub limits: Limits,
    /// Write wall-clock times; reports are then no longer reproducible.
    #[serde(default)]
    pub timing: bool,
    /// Parallel jobs; absent means one per core.
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.methods.is_empty() {
            return bad("method list is empty");
        }
        if self.seeds.is_empty() {
            return bad("seed list is empty");
        }
        if !matches!(self.family, FamilySpec::File { .. }) && (self.n_ladder.is_empty() || self.n_ladder.contains(&0)) {
            return bad("sample size ladder must be nonempty and positive");
        }
        let simulated = self.methods.iter().any(|m| matches!(m, Method::Sb | Method::Sbc));
        if simulated && (self.s_ladder.is_empty() || self.s_ladder.contains(&0)) {
            return bad("scenario ladder must be nonempty and positive");
        }
        if self.family.is_generative() && self.eval_samples == 0 {
            return bad("eval_samples must be positive");
        }
        if self.jobs == Some(0) {
            return bad("jobs must be positive");
        }
        if !(self.limits.time_limit_s > 0.0) {
            return bad("time limit must be positive");
        }
        match &self.family {
            FamilySpec::Hm14 {
                betas,
                alphas,
                n_candidates,
                budgets,
                ..
            } => {
                if betas.is_empty() || alphas.is_empty() || n_candidates.is_empty() || budgets.is_empty() {
                    return bad("hm14 ladders must be nonempty");
                }
                for &d in n_candidates {
                    for &r in budgets {
                        Hm14Params::new(1, d, betas[0], alphas[0], r).validate()?;
                    }
                }
                for &b in betas {
                    for &a in alphas {
                        Hm14Params::new(1, n_candidates[0], b, a, budgets[0]).validate()?;
                    }
                }
            }
            FamilySpec::Mmnl3 { betas, .. } => {
                if betas.is_empty() {
                    return bad("mmnl3 beta ladder is empty");
                }
                for &b in betas {
                    Mmnl3Params::with_beta(b).validate()?;
                }
            }
            FamilySpec::Hm14Mmnl { .. } | FamilySpec::File { .. } => {}
        }
        Ok(())
    }
}

/// One line of the main report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub family: String,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub r: usize,
    pub n: usize,
    pub s: Option<usize>,
    pub seed: u64,
    pub method: Method,
    pub time_ms: Option<f64>,
    /// Value of the problem the method solved: the sampled logit objective
    /// for exact methods, the simulated share for the simulation route.
    pub objective: Option<f64>,
    pub rgap_pct: Option<f64>,
    pub rgen_gap_pct: Option<f64>,
    pub entropy: f64,
    pub size_reduction_pct: Option<f64>,
    pub optimal_flag: u8,
}

/// One outer iteration of an MOA solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub family: String,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub r: usize,
    pub n: usize,
    pub seed: u64,
    pub iteration: usize,
    pub bound: f64,
    pub incumbent: f64,
    pub gap: f64,
}

/// Per-cell means over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub family: String,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub r: usize,
    pub n: usize,
    pub s: Option<usize>,
    pub method: Method,
    pub rows: usize,
    pub optimal_rows: usize,
    pub time_ms: Option<f64>,
    pub objective: Option<f64>,
    pub rgap_pct: Option<f64>,
    pub rgen_gap_pct: Option<f64>,
    pub entropy: f64,
    pub size_reduction_pct: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub traces: Vec<TraceRow>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl ExperimentReport {
    /// Rows whose solve hit a limit or failed.
    pub fn flagged(&self) -> usize {
        self.rows.iter().filter(|r| r.optimal_flag == 0).count()
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        // Keyed by first appearance so the summary follows the report order.
        let mut order: Vec<Vec<&ReportRow>> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        for row in &self.rows {
            let key = format!(
                "{}|{:?}|{:?}|{}|{}|{:?}|{}",
                row.family, row.beta, row.alpha, row.r, row.n, row.s, row.method
            );
            let i = *index.entry(key).or_insert_with(|| {
                order.push(Vec::new());
                order.len() - 1
            });
            order[i].push(row);
        }
        order
            .into_iter()
            .map(|group| {
                let first = group[0];
                SummaryRow {
                    family: first.family.clone(),
                    beta: first.beta,
                    alpha: first.alpha,
                    r: first.r,
                    n: first.n,
                    s: first.s,
                    method: first.method,
                    rows: group.len(),
                    optimal_rows: group.iter().filter(|r| r.optimal_flag == 1).count(),
                    time_ms: mean(group.iter().map(|r| r.time_ms)),
                    objective: mean(group.iter().map(|r| r.objective)),
                    rgap_pct: mean(group.iter().map(|r| r.rgap_pct)),
                    rgen_gap_pct: mean(group.iter().map(|r| r.rgen_gap_pct)),
                    entropy: mean(group.iter().map(|r| Some(r.entropy))).unwrap_or(0.0),
                    size_reduction_pct: mean(group.iter().map(|r| r.size_reduction_pct)),
                }
            })
            .collect()
    }

    /// Writes `<output>`, `<stem>_summary.csv` and, when MOA ran,
    /// `<stem>_trace.csv`. Returns the paths written.
    pub fn write(&self, output: &Path) -> Result<Vec<PathBuf>> {
        let mut written = vec![output.to_path_buf()];
        write_csv(output, &self.rows)?;
        let summary = sibling(output, "summary");
        write_csv(&summary, &self.summary())?;
        written.push(summary);
        if !self.traces.is_empty() {
            let trace = sibling(output, "trace");
            write_csv(&trace, &self.traces)?;
            written.push(trace);
        }
        Ok(written)
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Where an instance comes from within one job.
enum Source<'a> {
    Fixed(&'a ChoiceInstance),
    Hm14(Hm14Params),
    Model(&'a GenerativeModel),
}

struct CellKey {
    beta: Option<f64>,
    alpha: Option<f64>,
}

struct Job<'a> {
    config: &'a ExperimentConfig,
    key: CellKey,
    seed: u64,
}

impl Job<'_> {
    fn row(&self, r: usize, n: usize, s: Option<usize>, method: Method) -> ReportRow {
        ReportRow {
            family: self.config.family.label().to_string(),
            beta: self.key.beta,
            alpha: self.key.alpha,
            r,
            n,
            s,
            seed: self.seed,
            method,
            time_ms: None,
            objective: None,
            rgap_pct: None,
            rgen_gap_pct: None,
            entropy: 0.0,
            size_reduction_pct: None,
            optimal_flag: 0,
        }
    }

    fn time(&self, t: Duration) -> Option<f64> {
        self.config.timing.then_some(t.as_secs_f64() * 1e3)
    }

    /// Solves one instance with every configured method.
    fn solve_instance(
        &self,
        instance: &ChoiceInstance,
        entropy: f64,
        evaluation: Option<&EvaluationSample<'_>>,
        report: &mut ExperimentReport,
    ) -> Result<()> {
        let config = self.config;
        let n = instance.n_customers();
        let r = instance.budget();
        let first = report.rows.len();
        // Solution of each row, for gap metrics once the exact reference is known.
        let mut decisions: Vec<Option<Solution>> = Vec::new();
        let mut reference: Option<f64> = None;
        for &method in &config.methods {
            match method {
                Method::Moa | Method::Brute => {
                    let mut row = self.row(r, n, None, method);
                    row.entropy = entropy;
                    let outcome = if method == Method::Moa {
                        solve_moa(instance, &config.limits.moa(n)).map(|o| {
                            for t in &o.trace {
                                report.traces.push(TraceRow {
                                    family: row.family.clone(),
                                    beta: row.beta,
                                    alpha: row.alpha,
                                    r,
                                    n,
                                    seed: self.seed,
                                    iteration: t.iteration,
                                    bound: t.bound,
                                    incumbent: t.incumbent,
                                    gap: t.gap,
                                });
                            }
                            o.solution
                        })
                    } else {
                        solve_mnl_bruteforce(instance)
                    };
                    match outcome {
                        Ok(sol) => {
                            row.time_ms = self.time(sol.wall_time);
                            row.objective = Some(sol.objective);
                            row.optimal_flag = u8::from(sol.optimal);
                            if sol.optimal && reference.is_none() {
                                reference = Some(sol.objective);
                            }
                            decisions.push(Some(sol));
                        }
                        Err(Error::EnumerationLimit { .. }) => decisions.push(None),
                        Err(e) => return Err(e),
                    }
                    report.rows.push(row);
                }
                Method::Sb | Method::Sbc => {
                    for &s in &config.s_ladder {
                        let start = Instant::now();
                        let coverage = build_coverage(instance, s, &config.noise, self.seed)?;
                        let mut row = self.row(r, n, Some(s), method);
                        row.entropy = entropy;
                        let sol = if method == Method::Sb {
                            let mut sol = solve_exact(&coverage.as_unclustered(), &config.limits.solver())?;
                            sol.method = Method::Sb;
                            sol
                        } else {
                            let clustered = cluster(&coverage);
                            row.size_reduction_pct = Some(size_reduction(&coverage, &clustered));
                            solve_exact(&clustered, &config.limits.solver())?
                        };
                        row.time_ms = self.time(start.elapsed());
                        row.objective = Some(sol.objective);
                        row.optimal_flag = u8::from(sol.optimal);
                        decisions.push(Some(sol));
                        report.rows.push(row);
                    }
                }
            }
        }
        for (row, decision) in report.rows[first..].iter_mut().zip(&decisions) {
            let Some(sol) = decision else { continue };
            if let Some(z_star) = reference {
                let z = objective_mnl(instance, &sol.decision)?;
                row.rgap_pct = rgap_values(z, z_star).ok();
            }
            if let Some(eval) = evaluation {
                let z_hat = eval.estimate(&sol.decision)?.value;
                row.rgen_gap_pct = rgen_gap(sol.objective, z_hat).ok();
            }
        }
        Ok(())
    }

    fn run(&self, source: Source<'_>) -> Result<ExperimentReport> {
        let config = self.config;
        let mut report = ExperimentReport::default();
        match source {
            Source::Fixed(instance) => {
                let entropy = entropy_mnl(instance);
                self.solve_instance(instance, entropy, None, &mut report)?;
            }
            Source::Hm14(params) => {
                for &n in &config.n_ladder {
                    let instance = gen_hm14(
                        &Hm14Params {
                            n_customers: n,
                            ..params.clone()
                        },
                        self.seed,
                    )?;
                    let entropy = entropy_mnl(&instance);
                    self.solve_instance(&instance, entropy, None, &mut report)?;
                }
            }
            Source::Model(model) => {
                let evaluation = EvaluationSample::new(model, config.eval_samples, self.seed)?;
                let entropy = entropy_mmnl(model, config.eval_samples, self.seed)?;
                for &n in &config.n_ladder {
                    let instance = materialize_sample(model, n, self.seed)?;
                    self.solve_instance(&instance, entropy, Some(&evaluation), &mut report)?;
                }
            }
        }
        Ok(report)
    }
}

/// Runs every job of the grid and concatenates their rows in configuration
/// order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let parts: Vec<Result<ExperimentReport>> = pool.install(|| match &config.family {
        FamilySpec::File { path } => {
            let instance = load_instance(path)?;
            Ok::<_, Error>(config
                .seeds
                .par_iter()
                .map(|&seed| {
                    Job {
                        config,
                        key: CellKey { beta: None, alpha: None },
                        seed,
                    }
                    .run(Source::Fixed(&instance))
                })
                .collect())
        }
        FamilySpec::Hm14 {
            betas,
            alphas,
            n_candidates,
            budgets,
            n_competitors,
        } => {
            let mut cells = Vec::new();
            for &beta in betas {
                for &d in n_candidates {
                    for &alpha in alphas {
                        for &r in budgets {
                            for &seed in &config.seeds {
                                cells.push((beta, d, alpha, r, seed));
                            }
                        }
                    }
                }
            }
            Ok(cells
                .par_iter()
                .map(|&(beta, d, alpha, r, seed)| {
                    let params = Hm14Params {
                        n_competitors: *n_competitors,
                        ..Hm14Params::new(1, d, beta, alpha, r)
                    };
                    Job {
                        config,
                        key: CellKey {
                            beta: Some(beta),
                            alpha: Some(alpha),
                        },
                        seed,
                    }
                    .run(Source::Hm14(params))
                })
                .collect())
        }
        FamilySpec::Hm14Mmnl { layout_seed } => Ok(config
            .seeds
            .par_iter()
            .map(|&seed| {
                let model = gen_hm14_mmnl(layout_seed.unwrap_or(seed));
                Job {
                    config,
                    key: CellKey {
                        beta: Some(1.0),
                        alpha: None,
                    },
                    seed,
                }
                .run(Source::Model(&model))
            })
            .collect()),
        FamilySpec::Mmnl3 { betas, layout_seed } => {
            let cells: Vec<(f64, u64)> = betas
                .iter()
                .flat_map(|&b| config.seeds.iter().map(move |&s| (b, s)))
                .collect();
            Ok(cells
                .par_iter()
                .map(|&(beta, seed)| {
                    let model = gen_mmnl3(&Mmnl3Params::with_beta(beta), layout_seed.unwrap_or(seed))?;
                    Job {
                        config,
                        key: CellKey {
                            beta: Some(beta),
                            alpha: None,
                        },
                        seed,
                    }
                    .run(Source::Model(&model))
                })
                .collect())
        }
    })?;
    let mut report = ExperimentReport::default();
    for part in parts {
        let part = part?;
        report.rows.extend(part.rows);
        report.traces.extend(part.traces);
    }
    Ok(report)
}
