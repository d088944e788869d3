//! Benchmark harness: per-query precision / recall / F1 / accuracy /
//! parameter accuracy / latency, plus arithmetic means, as JSON and an
//! aligned text table.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::agent::QueryType;
use crate::error::{Error, Result};
use crate::pipeline::Pipeline;
use crate::vocab::{Category, Vocabulary};

/// One benchmark question with gold label sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub qid: String,
    pub question: String,
    pub expected_type: QueryType,
    pub gold_defects: BTreeSet<String>,
    pub gold_parameters: BTreeSet<String>,
}

/// Set-overlap metrics over defect labels. `accuracy` is per-query gold
/// coverage of the retained labels, which coincides with recall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Full per-query metric row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub parameter_accuracy: f64,
    pub latency_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryRow {
    pub qid: String,
    pub query_type: QueryType,
    #[serde(flatten)]
    pub metrics: QueryMetrics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub per_query: Vec<QueryRow>,
    pub means: QueryMetrics,
}

/// Precision, recall, F1, and accuracy of a predicted label set against a
/// nonempty gold set.
pub fn compute_label_metrics(predicted: &BTreeSet<String>, gold: &BTreeSet<String>) -> LabelMetrics {
    let hits = predicted.intersection(gold).count() as f64;
    let precision = if predicted.is_empty() {
        0.0
    } else {
        hits / predicted.len() as f64
    };
    let recall = hits / gold.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    LabelMetrics {
        precision,
        recall,
        f1,
        accuracy: recall,
    }
}

/// Benchmark run options.
#[derive(Debug, Clone, Copy, Default)]
pub struct BenchmarkOptions {
    /// Run queries concurrently (latency still reported per query).
    pub parallel: bool,
    /// Report latency as 0.0 for byte-reproducible report files.
    pub fixed_latency: bool,
}

/// Load and validate a benchmark file (a JSON array of items).
pub fn load_benchmark(path: &Path, vocab: &Vocabulary) -> Result<Vec<BenchmarkItem>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let items: Vec<BenchmarkItem> = serde_json::from_str(&raw).map_err(|e| {
        Error::parse(
            path,
            Some(format!("line {}, column {}", e.line(), e.column())),
            e.to_string(),
        )
    })?;
    validate_benchmark(&items, vocab)?;
    Ok(items)
}

/// Reject duplicate qids, empty gold sets, and gold labels that are not
/// vocabulary canonicals — before any query runs.
pub fn validate_benchmark(items: &[BenchmarkItem], vocab: &Vocabulary) -> Result<()> {
    let mut seen = BTreeSet::new();
    for item in items {
        if !seen.insert(item.qid.clone()) {
            return Err(Error::InvalidArgument(format!("duplicate qid `{}`", item.qid)));
        }
        if item.gold_defects.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{}: gold_defects must be nonempty",
                item.qid
            )));
        }
        if item.gold_parameters.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{}: gold_parameters must be nonempty",
                item.qid
            )));
        }
        for (label, want) in item
            .gold_defects
            .iter()
            .map(|l| (l, Category::Defect))
            .chain(item.gold_parameters.iter().map(|l| (l, Category::Parameter)))
        {
            match vocab.category_of(label) {
                Some(category) if category == want => {}
                Some(category) => {
                    return Err(Error::InvalidArgument(format!(
                        "{}: gold label `{label}` is a {category}, expected {want}",
                        item.qid
                    )))
                }
                None => {
                    return Err(Error::InvalidArgument(format!(
                        "{}: gold label `{label}` is not a vocabulary canonical",
                        item.qid
                    )))
                }
            }
        }
    }
    Ok(())
}

/// Run the full plan → retrieve → aggregate path for every item and score
/// retained labels against gold.
pub fn run_benchmark(
    items: &[BenchmarkItem],
    pipeline: &Pipeline,
    options: BenchmarkOptions,
) -> Result<BenchmarkReport> {
    validate_benchmark(items, &pipeline.vocab)?;

    let run_one = |item: &BenchmarkItem| -> Result<QueryRow> {
        let started = Instant::now();
        let outcome = pipeline.run_query(&item.question, None, None)?;
        let latency_s = if options.fixed_latency {
            0.0
        } else {
            started.elapsed().as_secs_f64()
        };
        let predicted_defects: BTreeSet<String> = outcome
            .aggregated
            .retained_terms(Category::Defect)
            .iter()
            .cloned()
            .collect();
        let predicted_parameters: BTreeSet<String> = outcome
            .aggregated
            .retained_terms(Category::Parameter)
            .iter()
            .cloned()
            .collect();
        let label = compute_label_metrics(&predicted_defects, &item.gold_defects);
        let parameter_accuracy = predicted_parameters
            .intersection(&item.gold_parameters)
            .count() as f64
            / item.gold_parameters.len() as f64;
        if outcome.plan.query_type != item.expected_type {
            log::warn!(
                "{}: classified as {} but benchmark expects {}",
                item.qid,
                outcome.plan.query_type,
                item.expected_type
            );
        }
        Ok(QueryRow {
            qid: item.qid.clone(),
            query_type: outcome.plan.query_type,
            metrics: QueryMetrics {
                precision: label.precision,
                recall: label.recall,
                f1: label.f1,
                accuracy: label.accuracy,
                parameter_accuracy,
                latency_s,
            },
        })
    };

    let per_query: Vec<QueryRow> = if options.parallel {
        let mut rows: Vec<Option<Result<QueryRow>>> = Vec::new();
        rows.resize_with(items.len(), || None);
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for item in items {
                handles.push(scope.spawn(move || run_one(item)));
            }
            for (slot, handle) in rows.iter_mut().zip(handles) {
                *slot = Some(handle.join().expect("benchmark query thread panicked"));
            }
        });
        rows.into_iter()
            .map(|r| r.expect("all slots filled"))
            .collect::<Result<Vec<_>>>()?
    } else {
        items.iter().map(run_one).collect::<Result<Vec<_>>>()?
    };

    Ok(report_from_rows(per_query))
}

/// Assemble a report, computing arithmetic means over all rows.
pub fn report_from_rows(per_query: Vec<QueryRow>) -> BenchmarkReport {
    let n = per_query.len().max(1) as f64;
    let sum = |f: fn(&QueryMetrics) -> f64| per_query.iter().map(|r| f(&r.metrics)).sum::<f64>() / n;
    let means = QueryMetrics {
        precision: sum(|m| m.precision),
        recall: sum(|m| m.recall),
        f1: sum(|m| m.f1),
        accuracy: sum(|m| m.accuracy),
        parameter_accuracy: sum(|m| m.parameter_accuracy),
        latency_s: sum(|m| m.latency_s),
    };
    BenchmarkReport { per_query, means }
}

impl BenchmarkReport {
    /// Aligned plain-text table, one row per query plus a mean row.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<6} {:<12} {:>9} {:>7} {:>9} {:>9} {:>10} {:>11}\n",
            "QID", "Type", "Precision", "Recall", "F1-score", "Accuracy", "Param-Acc", "Latency (s)"
        ));
        for row in &self.per_query {
            let m = &row.metrics;
            out.push_str(&format!(
                "{:<6} {:<12} {:>9.3} {:>7.3} {:>9.3} {:>9.3} {:>10.3} {:>11.4}\n",
                row.qid,
                row.query_type.to_string(),
                m.precision,
                m.recall,
                m.f1,
                m.accuracy,
                m.parameter_accuracy,
                m.latency_s
            ));
        }
        let m = &self.means;
        out.push_str(&format!(
            "{:<6} {:<12} {:>9.3} {:>7.3} {:>9.3} {:>9.3} {:>10.3} {:>11.4}\n",
            "Mean",
            "",
            m.precision,
            m.recall,
            m.f1,
            m.accuracy,
            m.parameter_accuracy,
            m.latency_s
        ));
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| Error::InvalidArgument(format!("report serialization failed: {e}")))
    }
}
