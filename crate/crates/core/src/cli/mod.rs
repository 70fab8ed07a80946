//! Command-line pipeline: `build`/`synth` produce per-window graphs, the
//! analysis stages read them, `report` flattens everything to CSV.
//!
//! Every artifact carries the hash of the effective run configuration and
//! the seed. JSON artifacts hold no timestamps, so re-running a stage with
//! the same configuration rewrites identical bytes.

mod artifact;
mod classify;
mod report;
mod stages;
mod summary;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub use artifact::{config_hash, Artifact, GraphsManifest, WindowEntry};
pub use classify::{Evaluation, StoredModel, Trained};
pub use summary::{summarize, SummaryRow};

use crate::classify::{BaseKind, Objective, Scheme};
use crate::graph::DiameterMode;
use crate::ingest::Granularity;
use crate::rating::{FirmMeta, Status};
use crate::synth::SynthSpec;

/// A failed run, grouped by exit status.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("config error: {0}")]
    Config(String),
    #[error("dependency error: stage `{stage}` is missing or stale; {hint}")]
    Dependency { stage: String, hint: String },
    #[error("data error: {0}")]
    Data(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Dependency { .. } => 3,
            Failure::Data(_) => 4,
        }
    }

    pub(crate) fn missing(stage: &str, hint: impl Into<String>) -> Self {
        Failure::Dependency { stage: stage.to_string(), hint: hint.into() }
    }
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

/// Which nodes the analyses see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Subgraph {
    Customers,
    Rated,
    #[default]
    All,
}

impl Subgraph {
    pub fn keeps(self, f: &FirmMeta) -> bool {
        match self {
            Subgraph::Customers => f.status == Status::Customer,
            Subgraph::Rated => f.rating.is_known(),
            Subgraph::All => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    OneStep,
    #[default]
    TwoStep,
}

impl Strategy {
    pub fn scheme(self) -> Scheme {
        match self {
            Strategy::OneStep => Scheme::OneStep,
            Strategy::TwoStep => Scheme::TwoStep,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub base: BaseKind,
    pub strategy: Strategy,
    /// JSON array of grid points; a built-in grid per learner when absent.
    pub grid: Option<PathBuf>,
    pub objective: Objective,
    pub train_frac: f64,
    /// Window label to train on; the first window when absent.
    pub label: Option<String>,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            base: BaseKind::Tree,
            strategy: Strategy::TwoStep,
            grid: None,
            objective: Objective::Accuracy,
            train_frac: 0.75,
            label: None,
        }
    }
}

/// Effective run configuration: the config file with command-line flags
/// applied on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub transactions: Option<PathBuf>,
    pub firms: Option<PathBuf>,
    pub window: Granularity,
    pub subgraph: Subgraph,
    pub seed: u64,
    /// Output directory; not part of the config hash.
    pub out: PathBuf,
    /// Significance level before Bonferroni correction.
    pub p_s: f64,
    /// Groups with fewer rated members are not tested.
    pub min_rated: usize,
    pub k_max: usize,
    pub diameter: DiameterMode,
    /// Louvain restarts, seeded `seed, seed + 1, ...`.
    pub louvain_runs: usize,
    pub min_module_size: usize,
    pub classify: ClassifyConfig,
    pub synth: Option<SynthSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            transactions: None,
            firms: None,
            window: Granularity::Monthly,
            subgraph: Subgraph::All,
            seed: 0,
            out: PathBuf::from("paynet-out"),
            p_s: crate::partition::DEFAULT_P_S,
            min_rated: crate::partition::DEFAULT_MIN_RATED,
            k_max: crate::riskstats::DEFAULT_K_MAX,
            diameter: DiameterMode::DoubleSweepBound,
            louvain_runs: 5,
            min_module_size: crate::classify::DEFAULT_MIN_MODULE_SIZE,
            classify: ClassifyConfig::default(),
            synth: None,
        }
    }
}

impl RunConfig {
    pub fn louvain_seeds(&self) -> Vec<u64> {
        (0..self.louvain_runs as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }

    fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(Failure::Config(m));
        if !(self.p_s > 0.0 && self.p_s <= 1.0) {
            return bad(format!("p_s = {} must lie in (0, 1]", self.p_s));
        }
        if self.k_max == 0 {
            return bad("k_max must be at least 1".into());
        }
        if self.louvain_runs == 0 {
            return bad("louvain_runs must be at least 1".into());
        }
        let f = self.classify.train_frac;
        if !(f > 0.0 && f < 1.0) {
            return bad(format!("classify.train_frac = {f} must lie in (0, 1)"));
        }
        for path in [&self.transactions, &self.firms, &self.classify.grid].into_iter().flatten() {
            if !path.exists() {
                return bad(format!("{} does not exist", path.display()));
            }
        }
        if let Some(spec) = &self.synth {
            spec.validate().map_err(|e| Failure::Config(format!("synth: {e}")))?;
        }
        Ok(())
    }
}

fn parse_granularity(s: &str) -> Result<Granularity, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

fn parse_base(s: &str) -> Result<BaseKind, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| format!("unknown objective `{s}` (accuracy, recall-h, ws-acc, ws-rec, ws-pr)"))
}

#[derive(Debug, Parser)]
#[command(name = "paynet", version, about = "Payment-network analysis pipeline")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Aggregation window: monthly, weekly or daily.
    #[arg(long, global = true, value_parser = parse_granularity)]
    pub window: Option<Granularity>,
    #[arg(long, global = true, value_enum)]
    pub subgraph: Option<Subgraph>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build one graph per window from transactions and firm metadata.
    Build {
        #[arg(long)]
        transactions: Option<PathBuf>,
        #[arg(long)]
        firms: Option<PathBuf>,
    },
    /// Degree and strength fits, assortativity, components, bow-tie.
    Metrics,
    /// Rating-by-degree curves, cumulative logits, distance tables, excess volumes.
    Risk,
    /// Modules, hierarchy and their rating enrichment.
    Partition,
    /// Train, evaluate and apply rating classifiers.
    Classify {
        #[command(subcommand)]
        action: ClassifyAction,
    },
    /// Generate a synthetic network in place of `build`.
    Synth {
        /// JSON generator spec; overrides the `synth` section of the config.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Flatten all stage outputs into CSV tables.
    Report,
}

#[derive(Debug, Subcommand)]
pub enum ClassifyAction {
    Train {
        #[arg(long, value_parser = parse_base)]
        base: Option<BaseKind>,
        #[arg(long, value_enum)]
        strategy: Option<Strategy>,
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, value_parser = parse_objective)]
        objective: Option<Objective>,
        /// Window label to train on.
        #[arg(long)]
        label: Option<String>,
    },
    /// Predict ratings of unrated nodes with the trained model.
    Predict,
}

fn read_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

/// Merges the config file and the flags into the effective configuration.
pub fn resolve(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => read_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.window {
        cfg.window = w;
    }
    if let Some(s) = cli.subgraph {
        cfg.subgraph = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    match &cli.command {
        Command::Build { transactions, firms } => {
            if transactions.is_some() {
                cfg.transactions = transactions.clone();
            }
            if firms.is_some() {
                cfg.firms = firms.clone();
            }
        }
        Command::Synth { spec: Some(p) } => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            let spec: SynthSpec =
                serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            cfg.synth = Some(spec);
        }
        Command::Classify { action: ClassifyAction::Train { base, strategy, grid, objective, label } } => {
            let c = &mut cfg.classify;
            if let Some(b) = base {
                c.base = *b;
            }
            if let Some(s) = strategy {
                c.strategy = *s;
            }
            if grid.is_some() {
                c.grid = grid.clone();
            }
            if let Some(o) = objective {
                c.objective = *o;
            }
            if label.is_some() {
                c.label = label.clone();
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> CliResult<()> {
    let cfg = resolve(cli)?;
    let run = artifact::Run::new(cfg);
    match &cli.command {
        Command::Build { .. } => stages::build(&run),
        Command::Synth { .. } => stages::synth(&run),
        Command::Metrics => stages::metrics(&run),
        Command::Risk => stages::risk(&run),
        Command::Partition => stages::partition(&run),
        Command::Classify { action: ClassifyAction::Train { .. } } => classify::train(&run),
        Command::Classify { action: ClassifyAction::Predict } => classify::predict(&run),
        Command::Report => report::report(&run),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status. Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("paynet: {f}");
            f.exit_code()
        }
    }
}
