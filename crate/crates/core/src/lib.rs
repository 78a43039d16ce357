//! Schema linking and evaluation toolkit for text-to-SQL datasets.
//!
//! The crate covers the full annotation pipeline: tokenizing natural-language
//! questions, loading database catalogs and span annotations, linking question
//! spans to schema elements with a configurable rule engine, scoring
//! predictions at span level, measuring inter-annotator agreement, and
//! computing corpus statistics, correlations, and database-disjoint splits.

pub mod agreement;
pub mod analytics;
pub mod error;
pub mod evaluator;
pub mod io;
pub mod linker;
pub mod model;
pub mod report;

pub use error::{Error, Result};
pub use model::{
    normalize_name, tokenize, AnnotatedExample, Column, LabeledSpan, LinkTarget, Question, Schema,
    Table, Token, ValueType,
};
