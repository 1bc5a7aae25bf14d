//! Per-label precision / recall / accuracy and evaluation reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Sample;
use crate::encode::{EncodeOptions, Vocabulary};
use crate::model::{predict_sample, ModelConfig, ModelError, ModelParams, Prediction};
use crate::scalar::Scalar;

pub const LABEL_NAMES: [&str; 3] = ["pragma", "private", "reduction"];

/// Published pragma scores of the full-size model, shown in report footers
/// for context only.
pub const REFERENCE_PRAGMA: LabelMetrics = LabelMetrics {
    precision: 0.849,
    recall: 0.848,
    accuracy: 0.872,
};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no samples to evaluate")]
    Empty,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Confusion { tp, fp, fn_, tn }
    }

    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// P = tp/(tp+fp), R = tp/(tp+fn), Acc = (tp+tn)/total; a zero denominator
/// gives 0.
pub fn compute_metrics(c: &Confusion) -> Result<LabelMetrics, MetricsError> {
    if c.total() == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(LabelMetrics {
        precision: ratio(c.tp, c.tp + c.fp),
        recall: ratio(c.tp, c.tp + c.fn_),
        accuracy: ratio(c.tp + c.tn, c.total()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: u64,
    pub confusion: [Confusion; 3],
    pub labels: [LabelMetrics; 3],
    pub macro_avg: LabelMetrics,
}

impl Metrics {
    pub fn from_confusions(confusion: [Confusion; 3]) -> Result<Self, MetricsError> {
        let mut labels = [LabelMetrics::default(); 3];
        for (m, c) in labels.iter_mut().zip(&confusion) {
            *m = compute_metrics(c)?;
        }
        let avg = |f: fn(&LabelMetrics) -> f64| labels.iter().map(f).sum::<f64>() / 3.0;
        Ok(Metrics {
            n: confusion[0].total(),
            macro_avg: LabelMetrics {
                precision: avg(|m| m.precision),
                recall: avg(|m| m.recall),
                accuracy: avg(|m| m.accuracy),
            },
            confusion,
            labels,
        })
    }

    /// Metrics over `(predicted, actual)` label triples.
    pub fn from_pairs(pairs: impl IntoIterator<Item = ([bool; 3], [bool; 3])>) -> Result<Self, MetricsError> {
        let mut conf = [Confusion::default(); 3];
        for (pred, truth) in pairs {
            for k in 0..3 {
                conf[k].add(pred[k], truth[k]);
            }
        }
        Self::from_confusions(conf)
    }
}

/// One line of `per_sample.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub id: String,
    pub path: String,
    pub p_pragma: f64,
    pub p_private: f64,
    pub p_reduction: f64,
    pub y_pragma: u8,
    pub y_private: u8,
    pub y_reduction: u8,
    pub raw_pragma: u8,
    pub raw_private: u8,
    pub raw_reduction: u8,
    pub gated_pragma: u8,
    pub gated_private: u8,
    pub gated_reduction: u8,
}

impl SampleRow {
    pub fn new(sample: &Sample, pred: &Prediction) -> Self {
        let raw = pred.raw_labels();
        let gated = Prediction::from_probs(pred.probs, true).labels;
        SampleRow {
            id: sample.id.clone(),
            path: sample.path.clone(),
            p_pragma: pred.probs[0],
            p_private: pred.probs[1],
            p_reduction: pred.probs[2],
            y_pragma: sample.label_pragma,
            y_private: sample.label_private,
            y_reduction: sample.label_reduction,
            raw_pragma: raw[0] as u8,
            raw_private: raw[1] as u8,
            raw_reduction: raw[2] as u8,
            gated_pragma: gated[0] as u8,
            gated_private: gated[1] as u8,
            gated_reduction: gated[2] as u8,
        }
    }

    pub fn truth(&self) -> [bool; 3] {
        [self.y_pragma, self.y_private, self.y_reduction].map(|v| v == 1)
    }

    pub fn raw(&self) -> [bool; 3] {
        [self.raw_pragma, self.raw_private, self.raw_reduction].map(|v| v == 1)
    }

    pub fn gated(&self) -> [bool; 3] {
        [self.gated_pragma, self.gated_private, self.gated_reduction].map(|v| v == 1)
    }

    /// Benchmark name: the first path component.
    pub fn group(&self) -> &str {
        self.path.split('/').next().unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub name: String,
    pub raw: Metrics,
    pub gated: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Whether gated predictions are the headline numbers.
    pub gate: bool,
    pub n: u64,
    pub raw: Metrics,
    pub gated: Metrics,
    /// Per-benchmark breakdown, present in benchmark mode.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub groups: Vec<GroupReport>,
}

impl Report {
    /// Aggregates rows; with `by_group`, also per first path component.
    pub fn from_rows(rows: &[SampleRow], gate: bool, by_group: bool) -> Result<Self, MetricsError> {
        let raw = Metrics::from_pairs(rows.iter().map(|r| (r.raw(), r.truth())))?;
        let gated = Metrics::from_pairs(rows.iter().map(|r| (r.gated(), r.truth())))?;
        let mut groups = Vec::new();
        if by_group {
            let mut by: BTreeMap<&str, Vec<&SampleRow>> = BTreeMap::new();
            for r in rows {
                by.entry(r.group()).or_default().push(r);
            }
            for (name, rs) in by {
                groups.push(GroupReport {
                    name: name.to_string(),
                    raw: Metrics::from_pairs(rs.iter().map(|r| (r.raw(), r.truth())))?,
                    gated: Metrics::from_pairs(rs.iter().map(|r| (r.gated(), r.truth())))?,
                });
            }
        }
        Ok(Report {
            gate,
            n: raw.n,
            raw,
            gated,
            groups,
        })
    }

    fn table(out: &mut String, m: &Metrics) {
        let _ = writeln!(out, "{:<10}{:>8}{:>8}{:>8}", "label", "P", "R", "Acc");
        for (name, l) in LABEL_NAMES.iter().zip(&m.labels) {
            let _ = writeln!(
                out,
                "{:<10}{:>8.3}{:>8.3}{:>8.3}",
                name, l.precision, l.recall, l.accuracy
            );
        }
        let a = &m.macro_avg;
        let _ = writeln!(
            out,
            "{:<10}{:>8.3}{:>8.3}{:>8.3}",
            "macro", a.precision, a.recall, a.accuracy
        );
    }

    /// Plain-text report: headline table, the other variant, per-benchmark
    /// tables when present, and the reference footer.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let (first, second) = if self.gate {
            (("gated", &self.gated), ("raw", &self.raw))
        } else {
            (("raw", &self.raw), ("gated", &self.gated))
        };
        let _ = writeln!(out, "samples {}", self.n);
        let _ = writeln!(out);
        for (name, m) in [first, second] {
            let _ = writeln!(out, "[{name}]");
            Self::table(&mut out, m);
            let _ = writeln!(out);
        }
        for g in &self.groups {
            let m = if self.gate { &g.gated } else { &g.raw };
            let _ = writeln!(out, "[benchmark {}] samples {}", g.name, m.n);
            Self::table(&mut out, m);
            let _ = writeln!(out);
        }
        let r = REFERENCE_PRAGMA;
        let _ = writeln!(
            out,
            "reference (published full-scale model, pragma): P={:.3} R={:.3} Acc={:.3} -- not comparable, shown for context",
            r.precision, r.recall, r.accuracy
        );
        out
    }
}

/// Predicts every sample and returns the per-sample rows in input order.
/// Work is spread over `threads` workers; the result does not depend on it.
pub fn predict_rows<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    vocab: &Vocabulary,
    opts: &EncodeOptions,
    samples: &[Sample],
    threads: usize,
) -> Result<Vec<SampleRow>, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    let one = |s: &Sample| -> Result<SampleRow, MetricsError> {
        let p = predict_sample(params, cfg, vocab, opts, s, false)?;
        Ok(SampleRow::new(s, &p))
    };
    if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| MetricsError::Pool(e.to_string()))?;
        pool.install(|| samples.par_iter().map(one).collect())
    } else {
        samples.iter().map(one).collect()
    }
}

pub struct Evaluation {
    pub rows: Vec<SampleRow>,
    pub report: Report,
}

pub fn evaluate<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    vocab: &Vocabulary,
    opts: &EncodeOptions,
    samples: &[Sample],
    gate: bool,
    by_group: bool,
    threads: usize,
) -> Result<Evaluation, MetricsError> {
    let rows = predict_rows(params, cfg, vocab, opts, samples, threads)?;
    let report = Report::from_rows(&rows, gate, by_group)?;
    Ok(Evaluation { rows, report })
}

pub fn write_rows_csv(path: &Path, rows: &[SampleRow]) -> Result<(), MetricsError> {
    let csv_err = |source| MetricsError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<SampleRow>, MetricsError> {
    let csv_err = |source| MetricsError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// Writes `report.txt`, `report.json` and `per_sample.csv` into `dir`.
pub fn write_evaluation(dir: &Path, eval: &Evaluation) -> Result<(), MetricsError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| MetricsError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let txt = dir.join("report.txt");
    fs::write(&txt, eval.report.render()).map_err(io(&txt))?;
    let json = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(&eval.report).map_err(|source| MetricsError::Json {
        path: json.clone(),
        source,
    })?;
    text.push('\n');
    fs::write(&json, text).map_err(io(&json))?;
    write_rows_csv(&dir.join("per_sample.csv"), &eval.rows)
}
