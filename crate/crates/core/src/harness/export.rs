use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{ExperimentRecord, HarnessError, TrialRecord};

/// Flat CSV view of a [`TrialRecord`].
#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    algo: &'a str,
    family: String,
    n: usize,
    m: usize,
    diameter: u32,
    graph_seed: u64,
    seed: u64,
    rounds: u64,
    messages: u64,
    message_ratio: Option<f64>,
    round_ratio: f64,
    pass: bool,
    trace_hash: String,
}

impl<'a> From<&'a TrialRecord> for CsvRow<'a> {
    fn from(t: &'a TrialRecord) -> Self {
        CsvRow {
            algo: t.algo.label(),
            family: t.graph.family.to_string(),
            n: t.n,
            m: t.m,
            diameter: t.diameter,
            graph_seed: t.graph.seed,
            seed: t.seed,
            rounds: t.metrics.rounds,
            messages: t.metrics.messages_total,
            message_ratio: t.message_ratio,
            round_ratio: t.round_ratio,
            pass: t.verdict.pass,
            trace_hash: format!("{:016x}", t.trace_hash),
        }
    }
}

pub fn csv_header() -> Vec<&'static str> {
    vec![
        "algo",
        "family",
        "n",
        "m",
        "diameter",
        "graph_seed",
        "seed",
        "rounds",
        "messages",
        "message_ratio",
        "round_ratio",
        "pass",
        "trace_hash",
    ]
}

/// One CSV line (no trailing newline) for `t`.
pub fn trial_csv_row(t: &TrialRecord) -> Result<String, HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.serialize(CsvRow::from(t))?;
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8_lossy(&bytes).trim_end().to_string())
}

fn ensure_parent(path: &Path) -> Result<(), HarnessError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => Ok(fs::create_dir_all(dir)?),
        _ => Ok(()),
    }
}

pub fn write_csv(trials: &[TrialRecord], path: &Path) -> Result<(), HarnessError> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    for t in trials {
        w.serialize(CsvRow::from(t))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_record(record: &ExperimentRecord, path: &Path) -> Result<(), HarnessError> {
    ensure_parent(path)?;
    fs::write(path, serde_json::to_string_pretty(record)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::ExecMode;
    use crate::harness::{run_experiment, Algo, ExperimentConfig};
    use crate::netgraph::{GraphFamily, GraphGenSpec};

    #[test]
    fn csv_agrees_with_json() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(GraphGenSpec::new(GraphFamily::Grid, 16), Algo::FloodBaseline)
            .with_seeds([3, 4]);
        cfg.output_path = Some(dir.path().join("out/flood.json"));
        let rec = run_experiment(&cfg, ExecMode::Sequential).unwrap();
        let json: ExperimentRecord =
            serde_json::from_str(&fs::read_to_string(dir.path().join("out/flood.json")).unwrap()).unwrap();
        assert_eq!(json, rec);
        let mut reader = csv::Reader::from_path(dir.path().join("out/flood.csv")).unwrap();
        assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), csv_header());
        let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 2);
        for (row, t) in rows.iter().zip(&rec.trials) {
            assert_eq!(row[7].parse::<u64>().unwrap(), t.metrics.rounds);
            assert_eq!(row[8].parse::<u64>().unwrap(), t.metrics.messages_total);
            assert_eq!(&row[11], "true");
            assert_eq!(row.iter().collect::<Vec<_>>().join(","), trial_csv_row(t).unwrap());
        }
    }
}
