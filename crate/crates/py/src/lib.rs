use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use schemalink::agreement::{cohen_kappa, pairwise_f1, AgreementGranularity};
use schemalink::analytics::{dataset_stats, pearson, LENGTH_STRATA, TARGET_STRATA};
use schemalink::evaluator::{evaluate_corpus, metrics_from_counts, EvalCounts};
use schemalink::io::{load_annotations, load_schemas};
use schemalink::linker::{
    link_indexed, link_with_index, LinkMode, LinkerConfig, SchemaIndex, Strategy,
};
use schemalink::report::stratum_label;
use schemalink::{AnnotatedExample, LabeledSpan, LinkTarget, Schema};

fn value_err(e: schemalink::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn load_examples(path: &str) -> PyResult<Vec<AnnotatedExample>> {
    Ok(load_annotations(path).map_err(value_err)?.examples)
}

fn triples(spans: &[LabeledSpan]) -> Vec<(usize, usize, String)> {
    spans
        .iter()
        .map(|s| (s.start, s.end, s.target.render()))
        .collect()
}

/// Splits a name into its lowercase word pieces (underscores, whitespace,
/// and camelCase boundaries).
#[pyfunction]
fn normalize_name(name: &str) -> PyResult<Vec<String>> {
    schemalink::normalize_name(name).map_err(value_err)
}

/// Tokenizes a question into (surface, start, end) triples with offsets in
/// Unicode scalar values.
#[pyfunction]
fn tokenize(text: &str) -> Vec<(String, usize, usize)> {
    schemalink::tokenize(text)
        .tokens
        .into_iter()
        .map(|t| (t.surface, t.start, t.end))
        .collect()
}

/// Parses a target label into (table, column or None).
#[pyfunction]
fn parse_target(label: &str) -> PyResult<(String, Option<String>)> {
    match LinkTarget::parse(label).map_err(value_err)? {
        LinkTarget::Table { table } => Ok((table, None)),
        LinkTarget::Column { table, column } => Ok((table, Some(column))),
    }
}

/// Rounds half away from zero to the given number of decimals.
#[pyfunction]
fn round_half_up(value: f64, decimals: u32) -> f64 {
    schemalink::evaluator::round_half_up(value, decimals)
}

/// Precision, recall, and F1 percentages from raw counts.
#[pyfunction]
fn metrics(true_positives: u64, false_positives: u64, false_negatives: u64) -> (f64, f64, f64) {
    let m = metrics_from_counts(&EvalCounts {
        true_positives,
        false_positives,
        false_negatives,
    });
    (m.precision, m.recall, m.f1)
}

fn counts_dict<'py>(py: Python<'py>, counts: &EvalCounts) -> PyResult<Bound<'py, PyDict>> {
    let m = metrics_from_counts(counts);
    let d = PyDict::new(py);
    d.set_item("tp", counts.true_positives)?;
    d.set_item("fp", counts.false_positives)?;
    d.set_item("fn", counts.false_negatives)?;
    d.set_item("precision", m.precision)?;
    d.set_item("recall", m.recall)?;
    d.set_item("f1", m.f1)?;
    Ok(d)
}

/// Scores a predicted span file against a gold one; both files must list the
/// same questions in the same order.
#[pyfunction]
fn evaluate_files<'py>(
    py: Python<'py>,
    predicted: &str,
    gold: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let predicted = load_examples(predicted)?;
    let gold = load_examples(gold)?;
    if predicted.len() != gold.len() {
        return Err(PyValueError::new_err(format!(
            "predicted file holds {} examples but gold holds {}",
            predicted.len(),
            gold.len()
        )));
    }
    for (i, (p, g)) in predicted.iter().zip(&gold).enumerate() {
        if p.question.text != g.question.text {
            return Err(PyValueError::new_err(format!(
                "example {}: questions differ: {:?} vs {:?}",
                i + 1,
                p.question.text,
                g.question.text
            )));
        }
    }
    let counts = evaluate_corpus(
        predicted
            .iter()
            .zip(&gold)
            .map(|(p, g)| (p.spans.as_slice(), g.spans.as_slice())),
    );
    counts_dict(py, &counts)
}

/// Cohen's kappa between two span files, as a dict.
#[pyfunction]
#[pyo3(signature = (first, second, granularity = "target"))]
fn cohen_kappa_files<'py>(
    py: Python<'py>,
    first: &str,
    second: &str,
    granularity: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let granularity: AgreementGranularity = granularity.parse().map_err(value_err)?;
    let first = load_examples(first)?;
    let second = load_examples(second)?;
    let report = cohen_kappa(&first, &second, granularity).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("granularity", report.granularity.as_str())?;
    d.set_item("kappa", report.kappa)?;
    d.set_item("se", report.standard_error)?;
    d.set_item("ci", report.ci95)?;
    d.set_item("p", report.p_value)?;
    d.set_item("observed", report.observed_agreement)?;
    d.set_item("expected", report.expected_agreement)?;
    d.set_item("considered_tokens", report.considered_tokens)?;
    d.set_item("total_tokens", report.total_tokens)?;
    d.set_item("examples", report.examples)?;
    Ok(d)
}

/// Micro-averaged span F1 treating one annotator as prediction and the other
/// as gold; symmetric.
#[pyfunction]
fn pairwise_f1_files(first: &str, second: &str) -> PyResult<f64> {
    let first = load_examples(first)?;
    let second = load_examples(second)?;
    pairwise_f1(&first, &second).map_err(value_err)
}

/// Label statistics of a span file: stratum name to counts, plus the number
/// of sentences.
#[pyfunction]
fn dataset_stats_file<'py>(py: Python<'py>, path: &str) -> PyResult<Bound<'py, PyDict>> {
    let examples = load_examples(path)?;
    let stats = dataset_stats(&examples).map_err(value_err)?;
    let d = PyDict::new(py);
    for length in LENGTH_STRATA {
        for target in TARGET_STRATA {
            let s = stats.stratum(target, length);
            let row = PyDict::new(py);
            row.set_item("labels", s.labels)?;
            row.set_item("max", s.max)?;
            row.set_item("min", s.min)?;
            row.set_item("avg", s.avg)?;
            row.set_item("std", s.std)?;
            d.set_item(stratum_label(target, length), row)?;
        }
    }
    d.set_item("sentences", stats.sentences)?;
    Ok(d)
}

/// Pearson correlation with a two-sided p-value: returns (r, p, n).
#[pyfunction]
fn pearson_r(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<(f64, f64, usize)> {
    let result = pearson(&xs, &ys).map_err(value_err)?;
    Ok((result.r, result.p_value, result.n))
}

/// A loaded schema catalog with per-database linking.
#[pyclass]
struct SchemaCatalog {
    schemas: BTreeMap<String, Schema>,
    indexes: BTreeMap<String, SchemaIndex>,
}

#[pymethods]
impl SchemaCatalog {
    #[new]
    fn new(path: &str) -> PyResult<Self> {
        Ok(SchemaCatalog {
            schemas: load_schemas(path).map_err(value_err)?,
            indexes: BTreeMap::new(),
        })
    }

    fn db_ids(&self) -> Vec<String> {
        self.schemas.keys().cloned().collect()
    }

    /// Links one question against one database and returns
    /// (start, end, target) triples.
    #[pyo3(signature = (question, db_id, config = "full", strategy = "multi", seed = None, prob = None, index = 0))]
    #[allow(clippy::too_many_arguments)]
    fn link(
        &mut self,
        question: &str,
        db_id: &str,
        config: &str,
        strategy: &str,
        seed: Option<u64>,
        prob: Option<f64>,
        index: u64,
    ) -> PyResult<Vec<(usize, usize, String)>> {
        let schema = self
            .schemas
            .get(db_id)
            .ok_or_else(|| PyValueError::new_err(format!("unknown db_id {db_id:?}")))?;
        let mut config = LinkerConfig::preset(config).map_err(value_err)?;
        if let Some(seed) = seed {
            config.seed = seed;
        }
        if let Some(prob) = prob {
            config.random_link_prob = prob;
        }
        config.validate().map_err(value_err)?;
        let strategy: Strategy = strategy.parse().map_err(value_err)?;
        let question = schemalink::tokenize(question);
        let spans = match config.mode {
            LinkMode::Rule => {
                if !self.indexes.contains_key(db_id) {
                    self.indexes.insert(
                        db_id.to_string(),
                        SchemaIndex::build(schema).map_err(value_err)?,
                    );
                }
                link_with_index(&question, &self.indexes[db_id], &config, strategy)
            }
            _ => link_indexed(&question, schema, &config, strategy, index),
        }
        .map_err(value_err)?;
        Ok(triples(&spans))
    }
}

#[pymodule]
fn schemalink_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<SchemaCatalog>()?;
    m.add_function(wrap_pyfunction!(normalize_name, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(parse_target, m)?)?;
    m.add_function(wrap_pyfunction!(round_half_up, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_files, m)?)?;
    m.add_function(wrap_pyfunction!(cohen_kappa_files, m)?)?;
    m.add_function(wrap_pyfunction!(pairwise_f1_files, m)?)?;
    m.add_function(wrap_pyfunction!(dataset_stats_file, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_r, m)?)?;
    Ok(())
}
