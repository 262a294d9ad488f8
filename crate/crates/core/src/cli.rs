//! The `art` command line: argument parsing, subcommands and reports.
//!
//! Every subcommand produces one JSON document (schema [`SCHEMA_VERSION`])
//! that embeds the resolved configuration, or an aligned text summary with
//! `--format text`.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::art::{self, ScoreScaling, ScoreVector, TestVariant};
use crate::blocks::plan_blocks;
use crate::error::ArtError;
use crate::estimation::{self, ClusterEstimates};
use crate::group::{GroupMode, GroupSpec, SignGroup, DEFAULT_DRAWS, DEFAULT_SEED};
use crate::interval::{self, interval_inputs};
use crate::io::{self, CliError, CliResult, ContrastSpec, DataConfig, RunConfig, WaldConfig};
use crate::model::{ClusteredDataset, ExtendedReal, LinearHypothesis, MultiHypothesis};
use crate::simulation::{self, DgpSpec, MonteCarloReport, StudySettings};

pub const SCHEMA_VERSION: &str = "art-report/1";
pub const SEED_ENV: &str = "ART_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "art",
    version,
    about = "Approximate randomization tests for regressions with few clusters"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test c'beta = lambda.
    Test(TestArgs),
    /// Confidence interval for c'beta.
    Ci(CiArgs),
    /// Monte Carlo size and power study from a design file.
    Simulate(SimulateArgs),
    /// Print consecutive-block pseudo-cluster sizes.
    Blocks(BlocksArgs),
    /// Write the canonicalized dataset as CSV.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Auto,
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Unstudentized,
    Studentized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScalingArg {
    RootN,
    RootNj,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Comma-separated input file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Column holding cluster labels.
    #[arg(long = "cluster")]
    pub cluster: Option<String>,
    /// Outcome column.
    #[arg(long)]
    pub outcome: String,
    /// Covariate columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Prepend an intercept column named `const`.
    #[arg(long)]
    pub intercept: bool,
    /// Form pseudo-clusters from this many consecutive blocks (list to sweep).
    #[arg(long, value_delimiter = ',')]
    pub blocks: Vec<usize>,
    /// Time column ordering the observations in block mode.
    #[arg(long = "time")]
    pub time: Option<String>,
}

impl DataArgs {
    fn config(&self) -> DataConfig {
        DataConfig {
            input: self.input.clone(),
            cluster_column: self.cluster.clone(),
            outcome: self.outcome.clone(),
            covariates: self.covariates.clone(),
            intercept: self.intercept,
            blocks: self.blocks.clone(),
            time_column: self.time.clone(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GroupArgs {
    /// Sign-group construction; auto enumerates exhaustively up to 14 clusters.
    #[arg(long, value_enum, default_value = "auto")]
    pub mode: ModeArg,
    /// Number of sign vectors B in sampled mode (identity included).
    #[arg(long, default_value_t = DEFAULT_DRAWS)]
    pub draws: usize,
    /// Seed for sampled sign vectors.
    #[arg(long, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Permit exhaustive enumeration beyond 20 clusters (up to 24).
    #[arg(long)]
    pub allow_large_group: bool,
}

impl GroupArgs {
    fn spec(&self) -> GroupSpec {
        match self.mode {
            ModeArg::Auto => GroupSpec::Auto {
                draws: self.draws,
                seed: self.seed,
            },
            ModeArg::Exhaustive => GroupSpec::Exhaustive {
                allow_large: self.allow_large_group,
            },
            ModeArg::Sampled => GroupSpec::Sampled {
                draws: self.draws,
                seed: self.seed,
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ContrastArgs {
    /// Contrast vector c, comma separated, one entry per coefficient.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        conflicts_with = "coef"
    )]
    pub contrast: Vec<f64>,
    /// Name of a single coefficient to test (unit-vector contrast).
    #[arg(long)]
    pub coef: Option<String>,
}

impl ContrastArgs {
    fn spec(&self) -> CliResult<ContrastSpec> {
        match (&self.coef, self.contrast.is_empty()) {
            (Some(name), _) => Ok(ContrastSpec::Coefficient(name.clone())),
            (None, false) => Ok(ContrastSpec::Vector(self.contrast.clone())),
            (None, true) => Err(CliError::Usage(
                "specify the contrast with --contrast or --coef".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub contrast: ContrastArgs,
    /// Hypothesized value lambda.
    #[arg(long = "null", default_value_t = 0.0, allow_negative_numbers = true)]
    pub null_value: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub group: GroupArgs,
    #[arg(long, value_enum, default_value = "unstudentized")]
    pub variant: VariantArg,
    /// Rows of R for a joint Wald test, e.g. "1,0,0;0,1,0".
    #[arg(long, allow_hyphen_values = true)]
    pub restriction: Option<String>,
    /// Right-hand side Lambda of the joint test, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub values: Vec<f64>,
    /// Per-cluster rate of the Wald scores.
    #[arg(long, value_enum, default_value = "root-n")]
    pub scaling: ScalingArg,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CiArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub contrast: ContrastArgs,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub group: GroupArgs,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Design file (TOML, or JSON when the extension is .json).
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BlocksArgs {
    /// Number of time-ordered observations.
    #[arg(long)]
    pub n: usize,
    /// Block counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub q: Vec<usize>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_restriction(text: &str, values: &[f64], scaling: ScalingArg) -> CliResult<WaldConfig> {
    let rows = text
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Usage(format!("bad restriction entry {v:?}")))
                })
                .collect::<CliResult<Vec<f64>>>()
        })
        .collect::<CliResult<Vec<_>>>()?;
    let values = if values.is_empty() {
        vec![0.0; rows.len()]
    } else {
        values.to_vec()
    };
    Ok(WaldConfig {
        rows,
        values,
        scaling: match scaling {
            ScalingArg::RootN => ScoreScaling::RootN,
            ScalingArg::RootNj => ScoreScaling::RootNj,
        },
    })
}

impl TestArgs {
    pub fn config(&self) -> CliResult<RunConfig> {
        let restriction = self
            .restriction
            .as_deref()
            .map(|r| parse_restriction(r, &self.values, self.scaling))
            .transpose()?;
        let contrast = match (&restriction, self.contrast.spec()) {
            (_, Ok(c)) => c,
            // a joint test alone needs no scalar contrast
            (Some(w), Err(_)) => ContrastSpec::Vector(w.rows[0].clone()),
            (None, Err(e)) => return Err(e),
        };
        let cfg = RunConfig {
            data: self.data.config(),
            contrast,
            null_value: self.null_value,
            alpha: self.alpha,
            group: self.group.spec(),
            variant: match self.variant {
                VariantArg::Unstudentized => TestVariant::Unstudentized,
                VariantArg::Studentized => TestVariant::Studentized,
            },
            restriction,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl CiArgs {
    pub fn config(&self) -> CliResult<RunConfig> {
        let cfg = RunConfig {
            data: self.data.config(),
            contrast: self.contrast.spec()?,
            null_value: 0.0,
            alpha: self.alpha,
            group: self.group.spec(),
            variant: TestVariant::Unstudentized,
            restriction: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupInfo {
    pub mode: GroupMode,
    pub size: usize,
    pub seed: Option<u64>,
}

impl GroupInfo {
    fn of(group: &SignGroup) -> Self {
        Self {
            mode: group.mode(),
            size: group.len(),
            seed: group.seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub label: String,
    pub size: usize,
    pub beta: Vec<f64>,
    /// `c'beta_j`.
    pub estimate: f64,
    /// `sqrt(n_j) (c'beta_j - lambda)`; zero-centred at lambda0 in `ci`.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldSummary {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub scaling: ScoreScaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRun {
    pub blocks: Option<usize>,
    pub q: usize,
    pub n: usize,
    pub coefficients: Vec<String>,
    pub contrast: Vec<f64>,
    pub null_value: f64,
    pub clusters: Vec<ClusterSummary>,
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub variant: TestVariant,
    pub min_attainable_p: f64,
    pub group: GroupInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wald: Option<WaldSummary>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub schema: String,
    pub command: String,
    pub config: RunConfig,
    pub runs: Vec<TestRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiRun {
    pub blocks: Option<usize>,
    pub q: usize,
    pub n: usize,
    pub coefficients: Vec<String>,
    pub contrast: Vec<f64>,
    pub clusters: Vec<ClusterSummary>,
    pub lambda0: f64,
    pub lower: ExtendedReal,
    pub upper: ExtendedReal,
    pub lower_infinite: bool,
    pub upper_infinite: bool,
    pub alpha: f64,
    pub group: GroupInfo,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiReport {
    pub schema: String,
    pub command: String,
    pub config: RunConfig,
    pub runs: Vec<CiRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub q: usize,
    pub base_size: usize,
    pub last_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlocksReport {
    pub schema: String,
    pub command: String,
    pub n: usize,
    pub plans: Vec<BlockRow>,
}

/// Contents of a `simulate` design file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationFile {
    pub design: DgpSpec,
    pub study: StudySettings,
    /// Effect sizes `c'beta - lambda` for power; empty runs only the size study.
    #[serde(default)]
    pub effects: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub effect: f64,
    pub report: MonteCarloReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub schema: String,
    pub command: String,
    pub config: SimulationFile,
    pub size: MonteCarloReport,
    pub power: Vec<PowerRow>,
    pub tolerance: String,
}

fn block_choices(cfg: &DataConfig) -> Vec<Option<usize>> {
    if cfg.blocks.is_empty() {
        vec![None]
    } else {
        cfg.blocks.iter().map(|&q| Some(q)).collect()
    }
}

fn cluster_summaries(
    data: &ClusteredDataset,
    est: &ClusterEstimates,
    h: &LinearHypothesis,
) -> Vec<ClusterSummary> {
    let thetas = est.contrast_estimates(h.contrast());
    (0..est.q())
        .map(|j| ClusterSummary {
            label: data.label(j).to_string(),
            size: est.sizes[j],
            beta: est.betas[j].clone(),
            estimate: thetas[j],
            score: (est.sizes[j] as f64).sqrt() * (thetas[j] - h.value()),
        })
        .collect()
}

fn trivial_power_warning(q: usize, group_size: usize, min_p: f64, alpha: f64) -> Option<String> {
    (min_p > alpha).then(|| {
        format!(
            "trivial power: with q = {q} clusters and {group_size} sign changes the smallest \
             attainable p-value is {min_p} > alpha = {alpha}; the test cannot reject"
        )
    })
}

/// Run the `test` subcommand.
pub fn cmd_test(cfg: &RunConfig) -> CliResult<TestReport> {
    cfg.validate()?;
    let mut runs = Vec::new();
    for blocks in block_choices(&cfg.data) {
        let data = io::ingest(&cfg.data, blocks)?;
        let h = cfg.hypothesis(&data)?;
        let group = cfg.group.build(data.q())?;
        let est = estimation::fit_per_cluster(&data)?;
        let s = ScoreVector::from_estimates(&est, &h)?;
        let res = art::run_test_on_scores(&s, cfg.alpha, &group, cfg.variant)?;
        let wald = match &cfg.restriction {
            Some(w) => Some(run_wald(&est, w, cfg.alpha, &group)?),
            None => None,
        };
        let mut warnings = Vec::new();
        warnings.extend(trivial_power_warning(
            data.q(),
            group.len(),
            res.min_attainable_p(),
            cfg.alpha,
        ));
        runs.push(TestRun {
            blocks,
            q: data.q(),
            n: data.n(),
            coefficients: data.covariate_names().to_vec(),
            contrast: h.contrast().to_vec(),
            null_value: h.value(),
            clusters: cluster_summaries(&data, &est, &h),
            statistic: res.statistic,
            critical_value: res.critical_value,
            p_value: res.p_value,
            reject: res.reject,
            alpha: res.alpha,
            variant: res.variant,
            min_attainable_p: res.min_attainable_p(),
            group: GroupInfo::of(&group),
            wald,
            warnings,
        });
    }
    Ok(TestReport {
        schema: SCHEMA_VERSION.into(),
        command: "test".into(),
        config: cfg.clone(),
        runs,
    })
}

fn run_wald(
    est: &ClusterEstimates,
    w: &WaldConfig,
    alpha: f64,
    group: &SignGroup,
) -> CliResult<WaldSummary> {
    let p = w.rows.len();
    let d = w.rows.first().map_or(0, Vec::len);
    if p == 0 || w.rows.iter().any(|r| r.len() != d) {
        return Err(CliError::Usage(
            "restriction rows must share one length".into(),
        ));
    }
    if d != est.dim() {
        return Err(CliError::Usage(format!(
            "restriction has {d} columns but the model has {} coefficients",
            est.dim()
        )));
    }
    let flat: Vec<f64> = w.rows.iter().flatten().copied().collect();
    let h = MultiHypothesis::new(DMatrix::from_row_slice(p, d, &flat), w.values.clone())?;
    let res = art::run_wald_test(est, &h, alpha, group, w.scaling)?;
    Ok(WaldSummary {
        statistic: res.statistic,
        critical_value: res.critical_value,
        p_value: res.p_value,
        reject: res.reject,
        scaling: w.scaling,
    })
}

/// Run the `ci` subcommand.
pub fn cmd_ci(cfg: &RunConfig) -> CliResult<CiReport> {
    cfg.validate()?;
    let mut runs = Vec::new();
    for blocks in block_choices(&cfg.data) {
        let data = io::ingest(&cfg.data, blocks)?;
        let h = cfg.hypothesis(&data)?;
        let group = cfg.group.build(data.q())?;
        let est = estimation::fit_per_cluster(&data)?;
        let inputs = interval_inputs(&est, h.contrast(), &group)?;
        let ci = interval::interval(&inputs, cfg.alpha)?;
        let centred = h.with_value(ci.lambda0)?;
        let mut warnings = Vec::new();
        if !ci.is_bounded() {
            warnings.push(format!(
                "unbounded interval: alpha = {} is too small for {} sign changes over q = {} clusters",
                cfg.alpha,
                group.len(),
                data.q()
            ));
        }
        runs.push(CiRun {
            blocks,
            q: data.q(),
            n: data.n(),
            coefficients: data.covariate_names().to_vec(),
            contrast: h.contrast().to_vec(),
            clusters: cluster_summaries(&data, &est, &centred),
            lambda0: ci.lambda0,
            lower: ci.lower,
            upper: ci.upper,
            lower_infinite: !ci.lower.is_finite(),
            upper_infinite: !ci.upper.is_finite(),
            alpha: cfg.alpha,
            group: GroupInfo::of(&group),
            warnings,
        });
    }
    Ok(CiReport {
        schema: SCHEMA_VERSION.into(),
        command: "ci".into(),
        config: cfg.clone(),
        runs,
    })
}

/// Run the `blocks` subcommand.
pub fn cmd_blocks(n: usize, qs: &[usize]) -> CliResult<BlocksReport> {
    let plans = qs
        .iter()
        .map(|&q| {
            plan_blocks(n, q).map(|p| BlockRow {
                q,
                base_size: p.base_size,
                last_size: p.last_size,
            })
        })
        .collect::<Result<Vec<_>, ArtError>>()?;
    Ok(BlocksReport {
        schema: SCHEMA_VERSION.into(),
        command: "blocks".into(),
        n,
        plans,
    })
}

pub fn load_simulation_file(path: &std::path::Path) -> CliResult<SimulationFile> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::Format(e.to_string()))
    } else {
        toml::from_str(&text).map_err(|e| CliError::Format(e.to_string()))
    }
}

/// Run the `simulate` subcommand.
pub fn cmd_simulate(file: &SimulationFile) -> CliResult<SimulateReport> {
    if !(file.study.alpha > 0.0 && file.study.alpha < 1.0) {
        return Err(CliError::Usage(format!(
            "alpha must lie in (0, 1), got {}",
            file.study.alpha
        )));
    }
    let size = simulation::size_study(&file.design, &file.study)?;
    let power = simulation::power_curve(&file.design, &file.study, &file.effects)?
        .into_iter()
        .map(|(effect, report)| PowerRow { effect, report })
        .collect();
    Ok(SimulateReport {
        schema: SCHEMA_VERSION.into(),
        command: "simulate".into(),
        config: file.clone(),
        size,
        power,
        tolerance: "rates are reported with Monte Carlo standard errors; bands are rate +/- 2 MCSE"
            .into(),
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn render_test(report: &TestReport) -> String {
    let mut out = String::new();
    for run in &report.runs {
        if let Some(q) = run.blocks {
            let _ = writeln!(out, "# {q} consecutive blocks");
        }
        let _ = writeln!(
            out,
            "{:<12} {:>8} {:>14} {:>14}",
            "cluster", "n_j", "c'beta_j", "S_j"
        );
        for c in &run.clusters {
            let _ = writeln!(
                out,
                "{:<12} {:>8} {:>14.6} {:>14.6}",
                c.label, c.size, c.estimate, c.score
            );
        }
        let _ = writeln!(out, "statistic       {:.6}", run.statistic);
        let _ = writeln!(out, "critical value  {:.6}", run.critical_value);
        let _ = writeln!(out, "p-value         {:.6}", run.p_value);
        let _ = writeln!(out, "reject          {}", run.reject);
        let _ = writeln!(
            out,
            "group           {:?}, {} elements, seed {}",
            run.group.mode,
            run.group.size,
            run.group.seed.map_or("-".to_string(), |s| s.to_string())
        );
        if let Some(w) = &run.wald {
            let _ = writeln!(
                out,
                "wald            statistic {:.6}, p-value {:.6}, reject {}",
                w.statistic, w.p_value, w.reject
            );
        }
        for w in &run.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
    }
    out
}

fn render_ci(report: &CiReport) -> String {
    let mut out = String::new();
    for run in &report.runs {
        if let Some(q) = run.blocks {
            let _ = writeln!(out, "# {q} consecutive blocks");
        }
        let _ = writeln!(out, "lambda0  {:.6}", run.lambda0);
        let _ = writeln!(
            out,
            "{:.0}% CI  [{}, {}]",
            100.0 * (1.0 - run.alpha),
            run.lower,
            run.upper
        );
        for w in &run.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
    }
    out
}

fn render_blocks(report: &BlocksReport) -> String {
    let mut out = format!("{:>6} {:>10} {:>10}\n", "q", "base", "last");
    for p in &report.plans {
        let _ = writeln!(out, "{:>6} {:>10} {:>10}", p.q, p.base_size, p.last_size);
    }
    out
}

fn render_simulate(report: &SimulateReport) -> String {
    let mut out = format!(
        "{:>10} {:>8} {:>10} {:>10}\n",
        "effect", "R", "rate", "mcse"
    );
    let rows = std::iter::once((0.0, &report.size))
        .chain(report.power.iter().map(|p| (p.effect, &p.report)));
    for (effect, r) in rows {
        let _ = writeln!(
            out,
            "{:>10.4} {:>8} {:>10.4} {:>10.4}",
            effect, r.replications, r.rate, r.mcse
        );
    }
    out
}

fn write_output(text: String, output: Option<&PathBuf>) -> CliResult<String> {
    match output {
        Some(path) => {
            std::fs::write(path, text).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

/// Execute a parsed command line. Returns what should go to standard output.
pub fn execute(cli: &Cli) -> CliResult<String> {
    match &cli.command {
        Command::Test(args) => {
            let report = cmd_test(&args.config()?)?;
            for run in &report.runs {
                run.warnings.iter().for_each(|w| log::warn!("{w}"));
            }
            let text = match args.format {
                Format::Json => to_json(&report),
                Format::Text => render_test(&report),
            };
            write_output(text, args.output.as_ref())
        }
        Command::Ci(args) => {
            let report = cmd_ci(&args.config()?)?;
            for run in &report.runs {
                run.warnings.iter().for_each(|w| log::warn!("{w}"));
            }
            let text = match args.format {
                Format::Json => to_json(&report),
                Format::Text => render_ci(&report),
            };
            write_output(text, args.output.as_ref())
        }
        Command::Simulate(args) => {
            let file = load_simulation_file(&args.design)?;
            let report = cmd_simulate(&file)?;
            let text = match args.format {
                Format::Json => to_json(&report),
                Format::Text => render_simulate(&report),
            };
            write_output(text, args.output.as_ref())
        }
        Command::Blocks(args) => {
            let report = cmd_blocks(args.n, &args.q)?;
            Ok(match args.format {
                Format::Json => to_json(&report),
                Format::Text => render_blocks(&report),
            })
        }
        Command::Export(args) => {
            let cfg = args.data.config();
            cfg.validate()?;
            if cfg.blocks.len() > 1 {
                return Err(CliError::Usage("export takes a single block count".into()));
            }
            let data = io::ingest(&cfg, cfg.blocks.first().copied())?;
            let mut buf = Vec::new();
            io::export_csv(&data, &cfg.outcome, &mut buf)?;
            let text = String::from_utf8(buf).expect("csv output is UTF-8");
            write_output(text, args.output.as_ref())
        }
    }
}

/// Extra guidance printed after an error.
pub fn hint(err: &CliError) -> Option<&'static str> {
    match err {
        CliError::Art(ArtError::IdentificationFailure { .. }) => Some(
            "the coefficients must be identified within every cluster. Remedies: cluster more \
             coarsely by combining clusters so the regressor varies within each merged cluster, \
             or respecify the model (for example, replace time fixed effects with \
             cluster-specific trends).",
        ),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_test_command() {
        let cli = Cli::try_parse_from([
            "art",
            "test",
            "--input",
            "d.csv",
            "--cluster",
            "g",
            "--outcome",
            "y",
            "--covariates",
            "x1,x2",
            "--intercept",
            "--coef",
            "x1",
            "--null",
            "-0.5",
            "--mode",
            "sampled",
            "--draws",
            "500",
            "--seed",
            "9",
        ])
        .unwrap();
        let Command::Test(args) = cli.command else {
            panic!()
        };
        let cfg = args.config().unwrap();
        assert_eq!(cfg.null_value, -0.5);
        assert_eq!(cfg.group, GroupSpec::sampled(500, 9));
        assert_eq!(cfg.contrast, ContrastSpec::Coefficient("x1".into()));
        assert_eq!(cfg.data.coefficient_names(), ["const", "x1", "x2"]);
    }

    #[test]
    fn negative_contrast_entries() {
        let cli = Cli::try_parse_from([
            "art",
            "ci",
            "--input",
            "d.csv",
            "--cluster",
            "g",
            "--outcome",
            "y",
            "--covariates",
            "x1,x2",
            "--contrast",
            "-1,1",
        ])
        .unwrap();
        let Command::Ci(args) = cli.command else {
            panic!()
        };
        assert_eq!(
            args.config().unwrap().contrast,
            ContrastSpec::Vector(vec![-1.0, 1.0])
        );
    }

    #[test]
    fn missing_contrast_is_usage_error() {
        let cli = Cli::try_parse_from([
            "art",
            "ci",
            "--input",
            "d.csv",
            "--cluster",
            "g",
            "--outcome",
            "y",
            "--covariates",
            "x1",
        ])
        .unwrap();
        let Command::Ci(args) = cli.command else {
            panic!()
        };
        assert_eq!(args.config().unwrap_err().exit_code(), 1);
    }

    #[test]
    fn restriction_parsing() {
        let w = parse_restriction("1,0;0,-1", &[], ScalingArg::RootN).unwrap();
        assert_eq!(w.rows, vec![vec![1.0, 0.0], vec![0.0, -1.0]]);
        assert_eq!(w.values, vec![0.0, 0.0]);
        assert!(parse_restriction("1,x", &[], ScalingArg::RootN).is_err());
    }

    #[test]
    fn blocks_report() {
        let r = cmd_blocks(2631, &[8, 10, 16]).unwrap();
        let bases: Vec<usize> = r.plans.iter().map(|p| p.base_size).collect();
        assert_eq!(bases, vec![328, 263, 164]);
        let err = cmd_blocks(10, &[11]).unwrap_err();
        assert!(matches!(
            err,
            CliError::Art(ArtError::TooFewObservations { .. })
        ));
    }
}
