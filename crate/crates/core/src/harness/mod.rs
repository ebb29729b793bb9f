//! Experiment plumbing: algorithm selection, per-trial oracle
//! verification, normalized cost ratios, scaling studies and JSON/CSV
//! export.

mod export;
mod flood;
mod scaling;
mod trial;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bfscover::PingPolicy;
use crate::exec::{self, ExecMode};
use crate::netgraph::{log2_ceil, GraphError, GraphFamily, GraphGenSpec, IdScheme, NodeId};

pub use export::{csv_header, trial_csv_row, write_csv, write_record};
pub use flood::{flood_baseline_bfs, FloodRun};
pub use scaling::{scaling_study, ScalingRow, ScalingTable, MAX_RATIO_GROWTH};
pub use trial::{run_trial, TrialRecord, Verdict};

/// Environment variable that overrides the directory of every output file.
pub const OUT_DIR_ENV: &str = "KT1SIM_OUT_DIR";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    BfsCover,
    BfsSpanner,
    LeRand,
    LeDet,
    CoverOnly,
    SpannerOnly,
    GlobalMst,
    FloodBaseline,
}

impl Algo {
    pub const ALL: [Algo; 8] = [
        Algo::BfsCover,
        Algo::BfsSpanner,
        Algo::LeRand,
        Algo::LeDet,
        Algo::CoverOnly,
        Algo::SpannerOnly,
        Algo::GlobalMst,
        Algo::FloodBaseline,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Algo::BfsCover => "bfs_cover",
            Algo::BfsSpanner => "bfs_spanner",
            Algo::LeRand => "le_rand",
            Algo::LeDet => "le_det",
            Algo::CoverOnly => "cover_only",
            Algo::SpannerOnly => "spanner_only",
            Algo::GlobalMst => "global_mst",
            Algo::FloodBaseline => "flood_baseline",
        }
    }

    /// Exponent `k` of the advertised `n · ⌈log₂ n⌉^k` message bound.
    pub fn message_exponent(self) -> Option<u32> {
        match self {
            Algo::BfsCover | Algo::CoverOnly => Some(3),
            Algo::LeRand => Some(4),
            Algo::BfsSpanner | Algo::LeDet | Algo::SpannerOnly | Algo::GlobalMst => Some(2),
            Algo::FloodBaseline => None,
        }
    }

    /// Advertised round shape for diameter `d` and `L = ⌈log₂ n⌉`.
    pub fn round_scale(self, n: usize, d: u32) -> f64 {
        let l = f64::from(log2_ceil(n).max(1));
        let d = f64::from(d);
        match self {
            Algo::BfsCover | Algo::LeRand | Algo::CoverOnly => d * l + l.powi(3),
            Algo::BfsSpanner | Algo::SpannerOnly | Algo::GlobalMst => d * l + l * l,
            Algo::LeDet => d * l * l + l * l,
            Algo::FloodBaseline => d.max(1.0),
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Algo::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}`"))
    }
}

/// `messages / (n · ⌈log₂ n⌉^k)`.
pub fn message_ratio(messages: u64, n: usize, k: u32) -> f64 {
    let l = f64::from(log2_ceil(n).max(1));
    messages as f64 / (n as f64 * l.powi(k as i32))
}

/// A graph family whose parameters may depend on `n`. `erdos_renyi`
/// without a probability means `p = min(1, 2 ln n / n)`, which keeps the
/// expected degree logarithmic and the graph connected with high
/// probability, so sizes are comparable across `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum FamilySpec {
    Fixed(GraphFamily),
    MatchedErdosRenyi,
}

impl FamilySpec {
    pub fn at(self, n: usize) -> GraphFamily {
        match self {
            FamilySpec::Fixed(f) => f,
            FamilySpec::MatchedErdosRenyi => {
                let nf = n.max(2) as f64;
                GraphFamily::ErdosRenyi {
                    p: (2.0 * nf.ln() / nf).min(1.0),
                }
            }
        }
    }
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilySpec::Fixed(g) => g.fmt(f),
            FamilySpec::MatchedErdosRenyi => f.write_str("erdos_renyi"),
        }
    }
}

impl FromStr for FamilySpec {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, GraphError> {
        match s.trim() {
            "erdos_renyi" => Ok(FamilySpec::MatchedErdosRenyi),
            other => other.parse().map(FamilySpec::Fixed),
        }
    }
}

impl From<FamilySpec> for String {
    fn from(f: FamilySpec) -> String {
        f.to_string()
    }
}

impl TryFrom<String> for FamilySpec {
    type Error = GraphError;

    fn try_from(s: String) -> Result<Self, GraphError> {
        s.parse()
    }
}

/// One experiment: an algorithm run over several seeded trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphGenSpec,
    pub algo: Algo,
    #[serde(default = "one")]
    pub trials: usize,
    /// Trial seeds; `0..trials` when absent.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    /// Draw a fresh graph per trial (graph seed = spec seed + trial seed).
    #[serde(default = "yes")]
    pub vary_graph: bool,
    /// BFS root; the smallest id when absent.
    #[serde(default)]
    pub root: Option<NodeId>,
    #[serde(default)]
    pub ping_policy: Option<PingPolicy>,
    /// Shared size estimate for `le_rand`.
    #[serde(default)]
    pub n_estimate: Option<usize>,
    /// Keep full outputs (trees, leaders) in the JSON record.
    #[serde(default = "yes")]
    pub include_outputs: bool,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn new(graph: GraphGenSpec, algo: Algo) -> Self {
        ExperimentConfig {
            graph,
            algo,
            trials: 1,
            seeds: None,
            vary_graph: true,
            root: None,
            ping_policy: None,
            n_estimate: None,
            include_outputs: true,
            output_path: None,
        }
    }

    pub fn with_seeds(mut self, seeds: impl IntoIterator<Item = u64>) -> Self {
        let seeds: Vec<u64> = seeds.into_iter().collect();
        self.trials = seeds.len();
        self.seeds = Some(seeds);
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.graph.validate()?;
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.trials {
                return Err(HarnessError::Config(format!(
                    "trials = {} but {} seeds given",
                    self.trials,
                    seeds.len()
                )));
            }
        }
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds
            .clone()
            .unwrap_or_else(|| (0..self.trials as u64).collect())
    }

    pub fn graph_for(&self, seed: u64) -> GraphGenSpec {
        if self.vary_graph {
            self.graph.with_seed(self.graph.seed.wrapping_add(seed))
        } else {
            self.graph
        }
    }
}

/// Aggregate over an experiment's trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub trials: usize,
    pub passed: usize,
    pub median_rounds: f64,
    pub median_messages: f64,
    pub median_message_ratio: Option<f64>,
    pub median_round_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialRecord>,
    pub summary: ExperimentSummary,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    }
}

fn summarize(trials: &[TrialRecord]) -> ExperimentSummary {
    let pick = |f: &dyn Fn(&TrialRecord) -> f64| {
        let mut v: Vec<f64> = trials.iter().map(f).collect();
        median(&mut v)
    };
    let ratios: Vec<f64> = trials.iter().filter_map(|t| t.message_ratio).collect();
    ExperimentSummary {
        trials: trials.len(),
        passed: trials.iter().filter(|t| t.verdict.pass).count(),
        median_rounds: pick(&|t| t.metrics.rounds as f64),
        median_messages: pick(&|t| t.metrics.messages_total as f64),
        median_message_ratio: (!ratios.is_empty()).then(|| median(&mut ratios.clone())),
        median_round_ratio: pick(&|t| t.round_ratio),
    }
}

/// Runs every trial (concurrently under `ExecMode::Parallel`), verifies
/// each against its oracle, and writes the JSON record and CSV rows when
/// an output path is configured.
pub fn run_experiment(cfg: &ExperimentConfig, mode: ExecMode) -> Result<ExperimentRecord, HarnessError> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    let trials = exec::map(mode, &seeds, |&seed| run_trial(cfg, seed))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let record = ExperimentRecord {
        config: cfg.clone(),
        summary: summarize(&trials),
        trials,
    };
    if let Some(path) = &cfg.output_path {
        let json = resolve_output(path);
        write_record(&record, &json)?;
        write_csv(&record.trials, &json.with_extension("csv"))?;
    }
    Ok(record)
}

/// Applies the output-directory override from [`OUT_DIR_ENV`].
pub fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) => Path::new(&dir).join(path.file_name().unwrap_or(path.as_os_str())),
        None => path.to_path_buf(),
    }
}

/// Graph spec for family `f` at size `n`, with random ids.
pub fn spec_for(f: FamilySpec, n: usize, seed: u64) -> GraphGenSpec {
    GraphGenSpec::new(f.at(n), n)
        .with_ids(IdScheme::RandomPermutation)
        .with_seed(seed)
}
