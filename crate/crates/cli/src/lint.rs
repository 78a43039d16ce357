use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use schemalink::io::{read_jsonl, QuestionRecord};
use schemalink::{tokenize, LinkTarget, Schema};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Error => write!(f, "error"),
            Severity::Warning => write!(f, "warning"),
        }
    }
}

#[derive(Debug)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    fn error(line: Option<usize>, message: String) -> Diagnostic {
        Diagnostic {
            severity: Severity::Error,
            line,
            message,
        }
    }

    fn warning(line: Option<usize>, message: String) -> Diagnostic {
        Diagnostic {
            severity: Severity::Warning,
            line,
            message,
        }
    }
}

/// Checks an annotation file record by record, continuing past bad records
/// so one pass reports everything. Schema and question checks only run when
/// the respective inputs are supplied.
pub fn lint_annotations(
    path: &Path,
    schemas: Option<&BTreeMap<String, Schema>>,
    questions: Option<&[QuestionRecord]>,
) -> schemalink::Result<Vec<Diagnostic>> {
    let records = read_jsonl(path)?;
    let mut diags = Vec::new();
    if let Some(questions) = questions {
        if records.len() != questions.len() {
            diags.push(Diagnostic::error(
                None,
                format!(
                    "file holds {} records but the questions file holds {}",
                    records.len(),
                    questions.len()
                ),
            ));
        }
    }
    for (index, (line, parsed)) in records.iter().enumerate() {
        match parsed {
            Ok(value) => lint_record(index, *line, value, schemas, questions, &mut diags),
            Err(e) => diags.push(Diagnostic::error(Some(*line), format!("invalid JSON: {e}"))),
        }
    }
    Ok(diags)
}

fn lint_record(
    index: usize,
    line: usize,
    value: &Value,
    schemas: Option<&BTreeMap<String, Schema>>,
    questions: Option<&[QuestionRecord]>,
    diags: &mut Vec<Diagnostic>,
) {
    let line = Some(line);
    let Some(obj) = value.as_object() else {
        diags.push(Diagnostic::error(
            line,
            "record is not a JSON object".into(),
        ));
        return;
    };
    let Some(question_text) = obj.get("question").and_then(Value::as_str) else {
        diags.push(Diagnostic::error(
            line,
            "missing or non-string \"question\" field".into(),
        ));
        return;
    };
    if !question_text.is_ascii() {
        diags.push(Diagnostic::warning(
            line,
            "question contains non-ASCII characters; offsets are character counts and byte-oriented tools will disagree".into(),
        ));
    }

    let labels = match (obj.get("labels"), obj.get("label")) {
        (Some(v), _) => v,
        (None, Some(v)) => {
            diags.push(Diagnostic::warning(
                line,
                "record uses the legacy \"label\" key; rename it to \"labels\"".into(),
            ));
            v
        }
        (None, None) => {
            diags.push(Diagnostic::error(line, "missing \"labels\" field".into()));
            return;
        }
    };
    let Some(labels) = labels.as_array() else {
        diags.push(Diagnostic::error(line, "\"labels\" is not an array".into()));
        return;
    };

    let mut db_id = match obj.get("db_id") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            diags.push(Diagnostic::error(line, "\"db_id\" is not a string".into()));
            None
        }
    };
    if let Some(questions) = questions {
        if let Some(expected) = questions.get(index) {
            if expected.question != question_text {
                diags.push(Diagnostic::error(
                    line,
                    format!(
                        "question text diverges from the questions file: {:?} vs {:?}",
                        question_text, expected.question
                    ),
                ));
            }
            match &db_id {
                Some(db) if *db != expected.db_id => diags.push(Diagnostic::error(
                    line,
                    format!(
                        "db_id {:?} conflicts with the questions file ({:?})",
                        db, expected.db_id
                    ),
                )),
                _ => db_id = Some(expected.db_id.clone()),
            }
        }
    }

    let schema = match (schemas, &db_id) {
        (Some(schemas), Some(db)) => match schemas.get(db) {
            Some(schema) => Some(schema),
            None => {
                diags.push(Diagnostic::error(
                    line,
                    format!("db_id {db:?} is not in the schema catalog"),
                ));
                None
            }
        },
        (Some(_), None) => {
            diags.push(Diagnostic::warning(
                line,
                "record has no db_id; schema checks skipped".into(),
            ));
            None
        }
        (None, _) => None,
    };

    let question = tokenize(question_text);
    let char_len = question.char_len();
    let mut ranges: Vec<(usize, usize, usize)> = Vec::new();
    let mut seen: BTreeSet<(usize, usize, String)> = BTreeSet::new();
    for (i, label) in labels.iter().enumerate() {
        let Some((start, end, raw_target)) = lint_triple(i, label, diags, line) else {
            continue;
        };
        let target = match LinkTarget::parse(&raw_target) {
            Ok(target) => target,
            Err(e) => {
                diags.push(Diagnostic::error(line, format!("label {i}: {e}")));
                continue;
            }
        };
        if start >= end {
            diags.push(Diagnostic::error(
                line,
                format!("label {i}: span [{start}, {end}) is inverted or empty"),
            ));
            continue;
        }
        if end > char_len {
            diags.push(Diagnostic::error(
                line,
                format!(
                    "label {i}: span [{start}, {end}) runs past the question ({char_len} characters)"
                ),
            ));
            continue;
        }
        if !question
            .tokens
            .iter()
            .any(|t| t.start < end && t.end > start)
        {
            diags.push(Diagnostic::error(
                line,
                format!("label {i}: span [{start}, {end}) covers no tokens"),
            ));
            continue;
        }
        if !seen.insert((start, end, raw_target.clone())) {
            diags.push(Diagnostic::warning(
                line,
                format!(
                    "label {i}: duplicate of an earlier [{start}, {end}, {raw_target:?}] label"
                ),
            ));
        }
        ranges.push((start, end, i));
        if let Some(schema) = schema {
            lint_target(i, &target, schema, diags, line);
        }
    }

    ranges.sort_unstable();
    for pair in ranges.windows(2) {
        let (a_start, a_end, a_idx) = pair[0];
        let (b_start, b_end, b_idx) = pair[1];
        if (a_start, a_end) != (b_start, b_end) && b_start < a_end {
            diags.push(Diagnostic::error(
                line,
                format!(
                    "labels {a_idx} and {b_idx} overlap: [{a_start}, {a_end}) vs [{b_start}, {b_end})"
                ),
            ));
        }
    }
}

fn lint_triple(
    i: usize,
    label: &Value,
    diags: &mut Vec<Diagnostic>,
    line: Option<usize>,
) -> Option<(usize, usize, String)> {
    let mut fail = |message: String| {
        diags.push(Diagnostic::error(line, message));
        None
    };
    let Some(arr) = label.as_array() else {
        return fail(format!("label {i}: expected a [start, end, target] array"));
    };
    if arr.len() != 3 {
        return fail(format!(
            "label {i}: expected 3 elements, found {}",
            arr.len()
        ));
    }
    let offset = |v: &Value| v.as_i64().filter(|n| *n >= 0).map(|n| n as usize);
    let Some(start) = offset(&arr[0]) else {
        return fail(format!("label {i}: start is not a non-negative integer"));
    };
    let Some(end) = offset(&arr[1]) else {
        return fail(format!("label {i}: end is not a non-negative integer"));
    };
    let Some(target) = arr[2].as_str() else {
        return fail(format!("label {i}: target is not a string"));
    };
    Some((start, end, target.to_string()))
}

fn lint_target(
    i: usize,
    target: &LinkTarget,
    schema: &Schema,
    diags: &mut Vec<Diagnostic>,
    line: Option<usize>,
) {
    if schema.contains_target(target) {
        return;
    }
    if let Some(canonical) = schema.resolve_target_normalized(target) {
        diags.push(Diagnostic::warning(
            line,
            format!(
                "label {i}: target {:?} does not match the schema spelling {:?}",
                target.render(),
                canonical.render()
            ),
        ));
        return;
    }
    let table = LinkTarget::table(target.table_name());
    let table_known =
        schema.contains_target(&table) || schema.resolve_target_normalized(&table).is_some();
    let message = match (target, table_known) {
        (LinkTarget::Column { table, column }, true) => {
            format!("label {i}: table {table:?} has no column {column:?}")
        }
        _ => format!(
            "label {i}: unknown table {:?} in db {:?}",
            target.table_name(),
            schema.db_id
        ),
    };
    diags.push(Diagnostic::error(line, message));
}
