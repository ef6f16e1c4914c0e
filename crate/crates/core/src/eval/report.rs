use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::confusion::ConfusionMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    Ss,
    Tse,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Ss => "ss",
            Task::Tse => "tse",
        })
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ss" => Ok(Task::Ss),
            "tse" => Ok(Task::Tse),
            other => Err(Error::InvalidArgument(format!("unknown task {other:?}, expected ss or tse"))),
        }
    }
}

/// Scores of one reference against the estimate assigned to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub id: String,
    pub task: Task,
    pub n: usize,
    pub n_est: usize,
    pub reference: usize,
    pub estimate: usize,
    /// The estimate was copied because the model found too few speakers.
    pub duplicated: bool,
    pub si_snr: f64,
    pub si_snri: f64,
    pub sdr: f64,
    pub sdri: f64,
    pub input_si_snr: f64,
    pub input_sdr: f64,
    /// Filled in by external tools.
    pub pesq: Option<f64>,
    pub wer: Option<f64>,
}

/// Per-example means over the scored references.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleRow {
    pub id: String,
    pub task: Task,
    pub n: usize,
    pub n_est: usize,
    pub si_snr: f64,
    pub si_snri: f64,
    pub sdr: f64,
    pub sdri: f64,
    pub pesq: Option<f64>,
    pub wer: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub task: Task,
    pub n: usize,
    pub examples: usize,
    pub si_snr: f64,
    pub si_snri: f64,
    pub sdr: f64,
    pub sdri: f64,
    pub counting_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub oracle_n: bool,
    pub examples: Vec<ExampleRow>,
    pub references: Vec<ReferenceRow>,
    pub aggregates: Vec<Aggregate>,
    pub confusion: ConfusionMatrix,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if c == 0 {
        f64::NAN
    } else {
        s / c as f64
    }
}

impl EvalReport {
    pub fn new(task: Task, oracle_n: bool, n_max: usize) -> Self {
        Self {
            task,
            oracle_n,
            examples: Vec::new(),
            references: Vec::new(),
            aggregates: Vec::new(),
            confusion: ConfusionMatrix::new(n_max),
        }
    }

    pub(crate) fn push(&mut self, id: String, n: usize, n_est: usize, rows: Vec<ReferenceRow>) -> Result<()> {
        self.confusion.add(n, n_est)?;
        self.examples.push(ExampleRow {
            id,
            task: self.task,
            n,
            n_est,
            si_snr: mean(rows.iter().map(|r| r.si_snr)),
            si_snri: mean(rows.iter().map(|r| r.si_snri)),
            sdr: mean(rows.iter().map(|r| r.sdr)),
            sdri: mean(rows.iter().map(|r| r.sdri)),
            pesq: None,
            wer: None,
        });
        self.references.extend(rows);
        Ok(())
    }

    /// Recomputes the per-count aggregates.
    pub fn finish(&mut self) {
        let mut by_n: BTreeMap<usize, Vec<&ExampleRow>> = BTreeMap::new();
        for r in &self.examples {
            by_n.entry(r.n).or_default().push(r);
        }
        self.aggregates = by_n
            .into_iter()
            .map(|(n, rows)| Aggregate {
                task: self.task,
                n,
                examples: rows.len(),
                si_snr: mean(rows.iter().map(|r| r.si_snr)),
                si_snri: mean(rows.iter().map(|r| r.si_snri)),
                sdr: mean(rows.iter().map(|r| r.sdr)),
                sdri: mean(rows.iter().map(|r| r.sdri)),
                counting_accuracy: self.confusion.accuracy(n),
            })
            .collect();
    }
}

pub const EXAMPLES_FILE: &str = "examples.jsonl";
pub const REFERENCES_FILE: &str = "references.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFUSION_FILE: &str = "confusion.csv";

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes the per-example and per-reference rows, the aggregate summary and
/// the confusion counts with row percentages.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_jsonl(&dir.join(EXAMPLES_FILE), &report.examples)?;
    write_jsonl(&dir.join(REFERENCES_FILE), &report.references)?;
    let summary = serde_json::json!({
        "task": report.task,
        "oracle_n": report.oracle_n,
        "examples": report.examples.len(),
        "aggregates": report.aggregates,
        "confusion": {
            "rows": "n = 1..=n_max",
            "columns": "n_est = 0..=n_max",
            "counts": report.confusion.counts,
            "percent": report.confusion.percentages(),
        },
    });
    let path = dir.join(SUMMARY_FILE);
    fs::write(&path, serde_json::to_vec_pretty(&summary)?).map_err(|e| Error::io(&path, e))?;

    let path = dir.join(CONFUSION_FILE);
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let n_max = report.confusion.n_max;
    let header: Vec<String> = (0..=n_max).map(|j| format!("count_{j}")).chain((0..=n_max).map(|j| format!("pct_{j}"))).collect();
    let io = |e| Error::io(&path, e);
    writeln!(f, "n,{}", header.join(",")).map_err(io)?;
    let pct = report.confusion.percentages();
    for (i, row) in report.confusion.counts.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .map(|c| c.to_string())
            .chain(pct[i].iter().map(|p| format!("{p:.2}")))
            .collect();
        writeln!(f, "{},{}", i + 1, cells.join(",")).map_err(io)?;
    }
    Ok(())
}
