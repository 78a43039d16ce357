//! File formats: database catalogs, question files, span annotations (JSONL),
//! and results tables (CSV).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{
    tokenize, AnnotatedExample, Column, LabeledSpan, LinkTarget, Schema, Table, ValueType,
};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Load {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn record_err(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Record {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

// ---------------------------------------------------------------------------
// Database catalogs

#[derive(Deserialize)]
struct RawCatalogEntry {
    db_id: String,
    table_names_original: Vec<String>,
    #[serde(default)]
    table_names: Vec<String>,
    column_names_original: Vec<(i64, String)>,
    #[serde(default)]
    column_names: Vec<(i64, String)>,
    #[serde(default)]
    column_types: Vec<String>,
}

/// Loads a JSON catalog of database schemas keyed by identifier.
///
/// The file is an array of entries carrying parallel arrays of original and
/// natural names. Column entries are `[table_index, name]` pairs; the
/// conventional `[-1, "*"]` pseudo-column is dropped. Real column entries
/// referencing a table index out of range fail the load.
pub fn load_schemas(path: impl AsRef<Path>) -> Result<BTreeMap<String, Schema>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let entries: Vec<RawCatalogEntry> = serde_json::from_str(&text)
        .map_err(|e| load_err(path, format!("invalid catalog JSON: {e}")))?;
    let mut schemas = BTreeMap::new();
    for entry in entries {
        let db_id = entry.db_id.clone();
        let mut tables: Vec<Table> = entry
            .table_names_original
            .iter()
            .enumerate()
            .map(|(i, original)| Table {
                original_name: original.clone(),
                natural_name: entry
                    .table_names
                    .get(i)
                    .cloned()
                    .unwrap_or_else(|| original.clone()),
                columns: Vec::new(),
            })
            .collect();
        for (j, (table_idx, original)) in entry.column_names_original.iter().enumerate() {
            if *table_idx < 0 {
                continue;
            }
            let table_idx = *table_idx as usize;
            if table_idx >= tables.len() {
                return Err(load_err(
                    path,
                    format!(
                        "db {db_id:?}: column {original:?} references table index {table_idx} but only {} tables exist",
                        tables.len()
                    ),
                ));
            }
            let natural = entry
                .column_names
                .get(j)
                .map(|(_, name)| name.clone())
                .unwrap_or_else(|| original.clone());
            let value_type = entry
                .column_types
                .get(j)
                .map(|t| ValueType::from_label(t))
                .unwrap_or(ValueType::Other);
            tables[table_idx].columns.push(Column {
                original_name: original.clone(),
                natural_name: natural,
                value_type,
            });
        }
        let schema =
            Schema::new(db_id.clone(), tables).map_err(|e| load_err(path, e.to_string()))?;
        if schemas.insert(db_id.clone(), schema).is_some() {
            return Err(load_err(
                path,
                format!("duplicate database identifier {db_id:?}"),
            ));
        }
    }
    Ok(schemas)
}

// ---------------------------------------------------------------------------
// Question files

/// One entry of a question file: the question, its database, and the SQL it
/// should translate to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub question: String,
    pub db_id: String,
    #[serde(default)]
    pub query: String,
}

/// Loads a JSON array of question records.
pub fn load_questions(path: impl AsRef<Path>) -> Result<Vec<QuestionRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| load_err(path, format!("invalid question JSON: {e}")))
}

// ---------------------------------------------------------------------------
// Annotation files (JSONL)

/// Reads a JSONL file line by line. Blank lines are skipped; each remaining
/// line yields its 1-based line number and either the parsed value or the
/// parse error message, so callers can keep going past bad lines.
pub fn read_jsonl(
    path: impl AsRef<Path>,
) -> Result<Vec<(usize, std::result::Result<Value, String>)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push((i + 1, serde_json::from_str(line).map_err(|e| e.to_string())));
    }
    Ok(out)
}

/// A parsed annotation file plus notes about how it was parsed.
#[derive(Debug, Clone)]
pub struct AnnotationFile {
    pub examples: Vec<AnnotatedExample>,
    /// How many records used the legacy `label` key instead of `labels`.
    pub legacy_label_records: usize,
}

fn parse_label_triple(
    value: &Value,
    index: usize,
) -> std::result::Result<(usize, usize, LinkTarget), String> {
    let arr = value
        .as_array()
        .ok_or_else(|| format!("label {index}: expected a [start, end, target] array"))?;
    if arr.len() != 3 {
        return Err(format!(
            "label {index}: expected 3 elements, found {}",
            arr.len()
        ));
    }
    let offset = |v: &Value, what: &str| {
        v.as_i64()
            .filter(|n| *n >= 0)
            .map(|n| n as usize)
            .ok_or_else(|| format!("label {index}: {what} is not a non-negative integer"))
    };
    let start = offset(&arr[0], "start")?;
    let end = offset(&arr[1], "end")?;
    let label = arr[2]
        .as_str()
        .ok_or_else(|| format!("label {index}: target is not a string"))?;
    let target = LinkTarget::parse(label).map_err(|e| format!("label {index}: {e}"))?;
    Ok((start, end, target))
}

/// Parses one annotation record object. Returns the example plus whether the
/// legacy `label` key supplied the spans.
fn parse_annotation_record(value: &Value) -> std::result::Result<(AnnotatedExample, bool), String> {
    let obj = value.as_object().ok_or("record is not a JSON object")?;
    let question_text = obj
        .get("question")
        .and_then(Value::as_str)
        .ok_or("missing or non-string \"question\" field")?;
    let (labels, legacy) = match (obj.get("labels"), obj.get("label")) {
        (Some(v), _) => (v, false),
        (None, Some(v)) => (v, true),
        (None, None) => return Err("missing \"labels\" field".into()),
    };
    let labels = labels.as_array().ok_or("\"labels\" is not an array")?;
    let db_id = match obj.get("db_id") {
        None | Some(Value::Null) => None,
        Some(v) => Some(v.as_str().ok_or("\"db_id\" is not a string")?.to_string()),
    };
    let question = tokenize(question_text);
    let mut spans = Vec::with_capacity(labels.len());
    for (i, label) in labels.iter().enumerate() {
        let (start, end, target) = parse_label_triple(label, i)?;
        let span = LabeledSpan::new(&question, start, end, target).map_err(|e| e.to_string())?;
        spans.push(span);
    }
    let example = AnnotatedExample::new(db_id, question, spans).map_err(|e| e.to_string())?;
    Ok((example, legacy))
}

/// Loads a span annotation file: one JSON object per line with `question`,
/// `labels` (`[[start, end, target], ...]`), and optionally `db_id`. The
/// legacy `label` key is accepted; [`AnnotationFile::legacy_label_records`]
/// reports how often it occurred.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<AnnotationFile> {
    let path = path.as_ref();
    let mut examples = Vec::new();
    let mut legacy_label_records = 0;
    for (line, parsed) in read_jsonl(path)? {
        let value = parsed.map_err(|e| record_err(path, line, format!("invalid JSON: {e}")))?;
        let (example, legacy) =
            parse_annotation_record(&value).map_err(|e| record_err(path, line, e))?;
        if legacy {
            legacy_label_records += 1;
        }
        examples.push(example);
    }
    Ok(AnnotationFile {
        examples,
        legacy_label_records,
    })
}

/// Loads annotations and aligns them one-to-one with a question file: record
/// `i` must repeat the text of question `i`. Database identifiers are filled
/// in from the question file; a record carrying a conflicting identifier of
/// its own fails the alignment.
pub fn load_annotations_aligned(
    path: impl AsRef<Path>,
    questions: &[QuestionRecord],
) -> Result<AnnotationFile> {
    let path = path.as_ref();
    let mut file = load_annotations(path)?;
    if file.examples.len() != questions.len() {
        return Err(Error::Alignment(format!(
            "{} has {} records but the question file has {}",
            path.display(),
            file.examples.len(),
            questions.len()
        )));
    }
    for (i, (example, question)) in file.examples.iter_mut().zip(questions).enumerate() {
        if example.question.text != question.question {
            return Err(Error::Alignment(format!(
                "record {} of {} does not match its question: annotation says {:?}, question file says {:?}",
                i + 1,
                path.display(),
                example.question.text,
                question.question
            )));
        }
        match &example.db_id {
            Some(db) if *db != question.db_id => {
                return Err(Error::Alignment(format!(
                    "record {} of {}: db_id {:?} conflicts with the question file's {:?}",
                    i + 1,
                    path.display(),
                    db,
                    question.db_id
                )));
            }
            _ => example.db_id = Some(question.db_id.clone()),
        }
    }
    Ok(file)
}

#[derive(Serialize)]
struct OutRecord<'a> {
    question: &'a str,
    labels: Vec<(usize, usize, String)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    db_id: Option<&'a str>,
}

/// Writes annotations (gold or predicted) in the JSONL interchange format.
/// Loading the result reproduces the input examples exactly.
pub fn write_annotations_to(
    mut writer: impl std::io::Write,
    examples: &[AnnotatedExample],
) -> std::io::Result<()> {
    for example in examples {
        let record = OutRecord {
            question: &example.question.text,
            labels: example
                .spans
                .iter()
                .map(|s| (s.start, s.end, s.target.render()))
                .collect(),
            db_id: example.db_id.as_deref(),
        };
        serde_json::to_writer(&mut writer, &record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// [`write_annotations_to`] targeting a file path.
pub fn write_annotations(path: impl AsRef<Path>, examples: &[AnnotatedExample]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = std::io::BufWriter::new(file);
    write_annotations_to(&mut writer, examples).map_err(|e| io_err(path, e))?;
    writer.flush().map_err(|e| io_err(path, e))
}

// ---------------------------------------------------------------------------
// Results tables (CSV)

/// One row of a results table: a system name, its exact-match accuracy, and
/// its span-level scores. Percentages are stored at full precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub system: String,
    pub em: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    #[serde(rename = "fp")]
    pub false_positives: u64,
    #[serde(rename = "fn")]
    pub false_negatives: u64,
    #[serde(rename = "tp")]
    pub true_positives: u64,
}

/// A parsed results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<ResultsRow>,
}

pub const RESULTS_HEADER: &[&str] = &[
    "system",
    "em",
    "f1",
    "precision",
    "recall",
    "fp",
    "fn",
    "tp",
];
pub const RESULTS_NUMERIC_COLUMNS: &[&str] = &["em", "f1", "precision", "recall", "fp", "fn", "tp"];

impl ResultsTable {
    /// Extracts a numeric column by header name.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let pick: fn(&ResultsRow) -> f64 = match name {
            "em" => |r| r.em,
            "f1" => |r| r.f1,
            "precision" => |r| r.precision,
            "recall" => |r| r.recall,
            "fp" => |r| r.false_positives as f64,
            "fn" => |r| r.false_negatives as f64,
            "tp" => |r| r.true_positives as f64,
            _ => {
                return Err(Error::Input(format!(
                    "unknown results column {name:?}; numeric columns are {}",
                    RESULTS_NUMERIC_COLUMNS.join(", ")
                )))
            }
        };
        Ok(self.rows.iter().map(pick).collect())
    }
}

/// Loads a results CSV with the header
/// `system,em,f1,precision,recall,fp,fn,tp`. Percent columns must lie in
/// [0, 100] and counts must be non-negative integers.
pub fn load_results(path: impl AsRef<Path>) -> Result<ResultsTable> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| load_err(path, e.to_string()))?;
    {
        let headers = reader
            .headers()
            .map_err(|e| load_err(path, e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != RESULTS_HEADER {
            return Err(load_err(
                path,
                format!(
                    "unexpected header {:?}; expected {}",
                    headers.iter().collect::<Vec<_>>().join(","),
                    RESULTS_HEADER.join(",")
                ),
            ));
        }
    }
    let mut rows = Vec::new();
    for (i, row) in reader.deserialize::<ResultsRow>().enumerate() {
        let record_no = i + 2; // header occupies line 1
        let row = row.map_err(|e| record_err(path, record_no, e.to_string()))?;
        for (value, name) in [
            (row.em, "em"),
            (row.f1, "f1"),
            (row.precision, "precision"),
            (row.recall, "recall"),
        ] {
            if !(0.0..=100.0).contains(&value) || !value.is_finite() {
                return Err(record_err(
                    path,
                    record_no,
                    format!("column {name:?} value {value} is outside [0, 100]"),
                ));
            }
        }
        rows.push(row);
    }
    Ok(ResultsTable { rows })
}

/// Writes a results CSV in the interchange header order. The header is
/// written even for an empty table so the file always loads back.
pub fn write_results_to(writer: impl std::io::Write, rows: &[ResultsRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    w.write_record(RESULTS_HEADER)
        .map_err(|e| Error::Input(format!("writing results header: {e}")))?;
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::Input(format!("serializing results row: {e}")))?;
    }
    w.flush()
        .map_err(|e| Error::Input(format!("flushing results table: {e}")))?;
    Ok(())
}

/// [`write_results_to`] targeting a file path.
pub fn write_results(path: impl AsRef<Path>, rows: &[ResultsRow]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    write_results_to(file, rows)
}

// ---------------------------------------------------------------------------
// Corpus

/// A schema catalog plus annotated examples, with every example resolved to a
/// loaded schema.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub schemas: BTreeMap<String, Schema>,
    pub examples: Vec<AnnotatedExample>,
}

impl Corpus {
    pub fn new(
        schemas: BTreeMap<String, Schema>,
        examples: Vec<AnnotatedExample>,
    ) -> Result<Corpus> {
        for (i, example) in examples.iter().enumerate() {
            let db_id = example.db_id.as_deref().ok_or_else(|| {
                Error::Input(format!(
                    "example {} ({:?}) carries no database identifier",
                    i + 1,
                    example.question.text
                ))
            })?;
            if !schemas.contains_key(db_id) {
                return Err(Error::Input(format!(
                    "example {} references database {db_id:?}, which is not in the catalog",
                    i + 1
                )));
            }
        }
        Ok(Corpus { schemas, examples })
    }

    /// The schema an example was annotated against. Valid by construction.
    pub fn schema_for(&self, example: &AnnotatedExample) -> &Schema {
        &self.schemas[example
            .db_id
            .as_deref()
            .expect("corpus examples carry db_id")]
    }
}
