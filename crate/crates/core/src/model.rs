//! Core data model: questions, tokens, link targets, labeled spans, and
//! database schemas.
//!
//! All character offsets in this crate count Unicode scalar values, not bytes,
//! so annotations written against non-ASCII text stay portable.

use crate::error::{Error, Result};

/// Value category of a database column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueType {
    Text,
    Number,
    Time,
    Boolean,
    Other,
}

impl ValueType {
    /// Maps a catalog type label onto a category. Unknown labels fall back to
    /// `Other` rather than failing the whole catalog load.
    pub fn from_label(label: &str) -> ValueType {
        match label.to_ascii_lowercase().as_str() {
            "text" => ValueType::Text,
            "number" => ValueType::Number,
            "time" => ValueType::Time,
            "boolean" => ValueType::Boolean,
            _ => ValueType::Other,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ValueType::Text => "text",
            ValueType::Number => "number",
            ValueType::Time => "time",
            ValueType::Boolean => "boolean",
            ValueType::Other => "others",
        }
    }
}

/// A database column with both its identifier-style and human-readable names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub original_name: String,
    pub natural_name: String,
    pub value_type: ValueType,
}

/// A database table and its columns, in catalog order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub original_name: String,
    pub natural_name: String,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn column(&self, original_name: &str) -> Option<&Column> {
        self.columns
            .iter()
            .find(|c| c.original_name == original_name)
    }
}

/// A database schema: an identifier plus its tables in catalog order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub db_id: String,
    pub tables: Vec<Table>,
}

impl Schema {
    /// Builds a schema, checking the naming invariants: the identifier is
    /// non-empty, every name survives normalization, and normalized original
    /// names are unique (tables within the schema, columns within a table).
    pub fn new(db_id: impl Into<String>, tables: Vec<Table>) -> Result<Schema> {
        let db_id = db_id.into();
        if db_id.is_empty() {
            return Err(Error::InvalidSchema {
                db_id,
                reason: "empty database identifier".into(),
            });
        }
        let invalid = |reason: String| Error::InvalidSchema {
            db_id: db_id.clone(),
            reason,
        };
        let mut seen_tables = std::collections::HashSet::new();
        for table in &tables {
            let key = normalize_key(&table.original_name)
                .map_err(|e| invalid(format!("table {:?}: {e}", table.original_name)))?;
            if !seen_tables.insert(key) {
                return Err(invalid(format!(
                    "duplicate table name {:?} after normalization",
                    table.original_name
                )));
            }
            normalize_key(&table.natural_name)
                .map_err(|e| invalid(format!("table {:?}: {e}", table.original_name)))?;
            let mut seen_columns = std::collections::HashSet::new();
            for column in &table.columns {
                let key = normalize_key(&column.original_name).map_err(|e| {
                    invalid(format!(
                        "column {:?}.{:?}: {e}",
                        table.original_name, column.original_name
                    ))
                })?;
                if !seen_columns.insert(key) {
                    return Err(invalid(format!(
                        "duplicate column name {:?} in table {:?} after normalization",
                        column.original_name, table.original_name
                    )));
                }
                normalize_key(&column.natural_name).map_err(|e| {
                    invalid(format!(
                        "column {:?}.{:?}: {e}",
                        table.original_name, column.original_name
                    ))
                })?;
            }
        }
        Ok(Schema { db_id, tables })
    }

    pub fn table(&self, original_name: &str) -> Option<&Table> {
        self.tables
            .iter()
            .find(|t| t.original_name == original_name)
    }

    /// True when the target's table (and column, if any) exist under exactly
    /// these original names.
    pub fn contains_target(&self, target: &LinkTarget) -> bool {
        match target {
            LinkTarget::Table { table } => self.table(table).is_some(),
            LinkTarget::Column { table, column } => self
                .table(table)
                .map_or(false, |t| t.column(column).is_some()),
        }
    }

    /// Looks up a target by normalized names, returning the canonical original
    /// spelling when found. Lets a linter distinguish "misspelled" from
    /// "miscased" labels.
    pub fn resolve_target_normalized(&self, target: &LinkTarget) -> Option<LinkTarget> {
        let find_table = |name: &str| {
            let key = normalize_key(name).ok()?;
            self.tables
                .iter()
                .find(|t| normalize_key(&t.original_name).ok().as_deref() == Some(&key))
        };
        match target {
            LinkTarget::Table { table } => {
                find_table(table).map(|t| LinkTarget::table(&t.original_name))
            }
            LinkTarget::Column { table, column } => {
                let t = find_table(table)?;
                let key = normalize_key(column).ok()?;
                t.columns
                    .iter()
                    .find(|c| normalize_key(&c.original_name).ok().as_deref() == Some(&key))
                    .map(|c| LinkTarget::column(&t.original_name, &c.original_name))
            }
        }
    }
}

/// Splits a schema name into lowercase word pieces.
///
/// Boundaries are underscores, whitespace, and lower-to-upper camel-case
/// transitions. Errors when nothing is left after splitting.
///
/// ```
/// use schemalink::normalize_name;
/// assert_eq!(normalize_name("Record_Company").unwrap(), ["record", "company"]);
/// assert_eq!(normalize_name("airportCode").unwrap(), ["airport", "code"]);
/// ```
pub fn normalize_name(raw: &str) -> Result<Vec<String>> {
    let mut pieces = Vec::new();
    let mut current = String::new();
    let mut prev_lower = false;
    for ch in raw.chars() {
        if ch == '_' || ch.is_whitespace() {
            if !current.is_empty() {
                pieces.push(std::mem::take(&mut current));
            }
            prev_lower = false;
            continue;
        }
        if ch.is_uppercase() && prev_lower && !current.is_empty() {
            pieces.push(std::mem::take(&mut current));
        }
        prev_lower = ch.is_lowercase();
        current.extend(ch.to_lowercase());
    }
    if !current.is_empty() {
        pieces.push(current);
    }
    if pieces.is_empty() {
        return Err(Error::Input(format!("name {raw:?} normalizes to nothing")));
    }
    Ok(pieces)
}

/// Normalized name pieces joined into a single comparison key.
pub(crate) fn normalize_key(raw: &str) -> Result<String> {
    Ok(normalize_name(raw)?.join(" "))
}

/// One token of a question: its surface form and character span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    /// Offset of the first character, counted in Unicode scalar values.
    pub start: usize,
    /// Offset one past the last character.
    pub end: usize,
}

impl Token {
    /// Word tokens are maximal alphanumeric runs; everything else is a single
    /// punctuation character.
    pub fn is_word(&self) -> bool {
        self.surface
            .chars()
            .next()
            .is_some_and(char::is_alphanumeric)
    }

    /// Lowercased surface form, used for matching against schema names.
    pub fn normalized(&self) -> String {
        self.surface.to_lowercase()
    }
}

/// A question with its tokenization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub text: String,
    pub tokens: Vec<Token>,
}

impl Question {
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

/// Tokenizes question text into maximal alphanumeric runs and single
/// punctuation characters, skipping whitespace.
///
/// ```
/// use schemalink::tokenize;
/// let q = tokenize("List UAL's flights.");
/// let surfaces: Vec<&str> = q.tokens.iter().map(|t| t.surface.as_str()).collect();
/// assert_eq!(surfaces, ["List", "UAL", "'", "s", "flights", "."]);
/// ```
pub fn tokenize(text: &str) -> Question {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut current_start = 0usize;
    let flush = |current: &mut String, start: usize, end: usize, tokens: &mut Vec<Token>| {
        if !current.is_empty() {
            tokens.push(Token {
                surface: std::mem::take(current),
                start,
                end,
            });
        }
    };
    let mut pos = 0usize;
    for (i, ch) in text.chars().enumerate() {
        pos = i;
        if ch.is_alphanumeric() {
            if current.is_empty() {
                current_start = i;
            }
            current.push(ch);
            continue;
        }
        flush(&mut current, current_start, i, &mut tokens);
        if !ch.is_whitespace() {
            tokens.push(Token {
                surface: ch.to_string(),
                start: i,
                end: i + 1,
            });
        }
    }
    if !current.is_empty() {
        flush(&mut current, current_start, pos + 1, &mut tokens);
    }
    Question {
        text: text.to_string(),
        tokens,
    }
}

/// What a question span points at: a table or one of its columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinkTarget {
    Table { table: String },
    Column { table: String, column: String },
}

impl LinkTarget {
    pub fn table(table: impl Into<String>) -> LinkTarget {
        LinkTarget::Table {
            table: table.into(),
        }
    }

    pub fn column(table: impl Into<String>, column: impl Into<String>) -> LinkTarget {
        LinkTarget::Column {
            table: table.into(),
            column: column.into(),
        }
    }

    /// Parses a target label: `table` or `table.column`. The split happens at
    /// the first dot, so column names may themselves contain dots.
    pub fn parse(label: &str) -> Result<LinkTarget> {
        let malformed = |reason: &str| Error::MalformedLabel {
            label: label.to_string(),
            reason: reason.to_string(),
        };
        if label.is_empty() {
            return Err(malformed("empty label"));
        }
        match label.split_once('.') {
            None => Ok(LinkTarget::table(label)),
            Some(("", _)) => Err(malformed("empty table part before the dot")),
            Some((_, "")) => Err(malformed("empty column part after the dot")),
            Some((table, column)) => Ok(LinkTarget::column(table, column)),
        }
    }

    /// Inverse of [`LinkTarget::parse`].
    pub fn render(&self) -> String {
        match self {
            LinkTarget::Table { table } => table.clone(),
            LinkTarget::Column { table, column } => format!("{table}.{column}"),
        }
    }

    pub fn table_name(&self) -> &str {
        match self {
            LinkTarget::Table { table } | LinkTarget::Column { table, .. } => table,
        }
    }

    pub fn column_name(&self) -> Option<&str> {
        match self {
            LinkTarget::Table { .. } => None,
            LinkTarget::Column { column, .. } => Some(column),
        }
    }

    pub fn is_column(&self) -> bool {
        matches!(self, LinkTarget::Column { .. })
    }

    /// "table" or "column"; the coarse category used by kind-level agreement.
    pub fn kind_str(&self) -> &'static str {
        if self.is_column() {
            "column"
        } else {
            "table"
        }
    }
}

/// A labeled question span: a character range plus the schema element it
/// mentions. `token_length` is derived from the question's tokenization at
/// construction time and never serialized.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledSpan {
    pub start: usize,
    pub end: usize,
    pub target: LinkTarget,
    pub token_length: usize,
}

impl LabeledSpan {
    /// Validates the range against the question and counts covered tokens.
    /// A span must be non-empty, lie within the text, and overlap at least
    /// one token.
    pub fn new(
        question: &Question,
        start: usize,
        end: usize,
        target: LinkTarget,
    ) -> Result<LabeledSpan> {
        let invalid = |reason: &str| Error::InvalidSpan {
            start,
            end,
            context: question.text.clone(),
            reason: reason.to_string(),
        };
        if start >= end {
            return Err(invalid("start must be smaller than end"));
        }
        if end > question.char_len() {
            return Err(invalid("end lies beyond the question text"));
        }
        let token_length = question
            .tokens
            .iter()
            .filter(|t| t.start < end && t.end > start)
            .count();
        if token_length == 0 {
            return Err(invalid("span covers no tokens"));
        }
        Ok(LabeledSpan {
            start,
            end,
            target,
            token_length,
        })
    }

    /// The annotated text slice.
    pub fn surface<'q>(&self, question: &'q Question) -> String {
        question
            .text
            .chars()
            .skip(self.start)
            .take(self.end - self.start)
            .collect()
    }
}

/// A question together with its span annotations (gold or predicted).
///
/// Spans are kept sorted by position. Ranges are either identical (several
/// targets for the same mention) or disjoint; exact duplicates and partially
/// overlapping ranges are rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedExample {
    pub db_id: Option<String>,
    pub question: Question,
    pub spans: Vec<LabeledSpan>,
}

impl AnnotatedExample {
    pub fn new(
        db_id: Option<String>,
        question: Question,
        mut spans: Vec<LabeledSpan>,
    ) -> Result<AnnotatedExample> {
        spans.sort();
        for pair in spans.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a == b {
                return Err(Error::InvalidSpan {
                    start: b.start,
                    end: b.end,
                    context: question.text.clone(),
                    reason: format!("duplicate span for target {:?}", b.target.render()),
                });
            }
            if b.start < a.end && (a.start, a.end) != (b.start, b.end) {
                return Err(Error::OverlappingSpans(a.start, a.end, b.start, b.end));
            }
        }
        Ok(AnnotatedExample {
            db_id,
            question,
            spans,
        })
    }
}
