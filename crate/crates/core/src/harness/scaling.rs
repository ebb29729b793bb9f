use serde::{Deserialize, Serialize};

use super::{median, run_trial, spec_for, Algo, ExperimentConfig, FamilySpec, HarnessError};
use crate::exec::{self, ExecMode};

/// Largest accepted growth of a normalized ratio across a sweep.
pub const MAX_RATIO_GROWTH: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub trials: usize,
    pub passed: usize,
    pub median_messages: f64,
    pub median_rounds: f64,
    pub median_message_ratio: Option<f64>,
    pub median_round_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub family: FamilySpec,
    pub algo: Algo,
    pub rows: Vec<ScalingRow>,
}

/// `last / first` of a column, or `None` for fewer than two rows.
fn growth(values: &[f64]) -> Option<f64> {
    match (values.first(), values.last()) {
        (Some(&a), Some(&b)) if values.len() > 1 && a > 0.0 => Some(b / a),
        _ => None,
    }
}

impl ScalingTable {
    /// Growth of the median message ratio from the smallest to the largest `n`.
    pub fn message_growth(&self) -> Option<f64> {
        let v: Option<Vec<f64>> = self.rows.iter().map(|r| r.median_message_ratio).collect();
        growth(&v?)
    }

    pub fn round_growth(&self) -> Option<f64> {
        growth(&self.rows.iter().map(|r| r.median_round_ratio).collect::<Vec<_>>())
    }

    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed == r.trials)
    }

    /// Every trial passed and both ratios grew by at most [`MAX_RATIO_GROWTH`].
    pub fn within_growth(&self) -> bool {
        let ok = |g: Option<f64>| g.is_none_or(|g| g <= MAX_RATIO_GROWTH);
        self.all_passed() && ok(self.message_growth()) && ok(self.round_growth())
    }

    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }
}

/// Runs `algo` on `family` at each size in `ns` with every seed, graphs
/// drawn with random ids; the per-size medians form one row.
pub fn scaling_study(
    family: FamilySpec,
    algo: Algo,
    ns: &[usize],
    seeds: &[u64],
    mode: ExecMode,
) -> Result<ScalingTable, HarnessError> {
    let jobs: Vec<(usize, u64)> = ns
        .iter()
        .flat_map(|&n| seeds.iter().map(move |&s| (n, s)))
        .collect();
    let records = exec::map(mode, &jobs, |&(n, seed)| {
        let mut cfg = ExperimentConfig::new(spec_for(family, n, seed), algo);
        cfg.vary_graph = false;
        cfg.include_outputs = false;
        run_trial(&cfg, seed)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let rows = ns
        .iter()
        .map(|&n| {
            let ts: Vec<_> = records.iter().filter(|t| t.n == n).collect();
            let col = |f: &dyn Fn(&&crate::harness::TrialRecord) -> f64| {
                median(&mut ts.iter().map(f).collect::<Vec<_>>())
            };
            let ratios: Option<Vec<f64>> = ts.iter().map(|t| t.message_ratio).collect();
            ScalingRow {
                n,
                trials: ts.len(),
                passed: ts.iter().filter(|t| t.verdict.pass).count(),
                median_messages: col(&|t| t.metrics.messages_total as f64),
                median_rounds: col(&|t| t.metrics.rounds as f64),
                median_message_ratio: ratios.map(|mut r| median(&mut r)),
                median_round_ratio: col(&|t| t.round_ratio),
            }
        })
        .collect();
    Ok(ScalingTable { family, algo, rows })
}
