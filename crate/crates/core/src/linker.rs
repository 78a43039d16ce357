//! Rule-based schema linking: finding the question spans that mention tables
//! and columns of a database schema.
//!
//! The engine scans n-gram windows over the question from longest to
//! shortest, left to right, matching each window against normalized table and
//! column names. Matched windows consume their tokens so later (shorter)
//! windows cannot reuse them. Exact name matches are resolved in a first
//! pass; partial matches only get to claim whatever tokens remain.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{normalize_name, LabeledSpan, LinkTarget, Question, Schema, Token};

pub const DEFAULT_MAX_NGRAM_LEN: usize = 6;
pub const DEFAULT_RANDOM_LINK_PROB: f64 = 0.2;

/// How the linker produces spans: by rule matching, by random guessing (a
/// floor baseline), or not at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkMode {
    Rule,
    Random,
    None,
}

/// What to emit when several schema elements match one span: the single best
/// candidate, or all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    SingleTarget,
    MultiTarget,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::SingleTarget => "single",
            Strategy::MultiTarget => "multi",
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Strategy> {
        match s {
            "single" => Ok(Strategy::SingleTarget),
            "multi" => Ok(Strategy::MultiTarget),
            _ => Err(Error::Config(format!(
                "unknown strategy {s:?}; expected \"single\" or \"multi\""
            ))),
        }
    }
}

/// How a window matched a name. `Exact` means the window covers the whole
/// name word for word (inflectional variants included); `Partial` means the
/// window sits inside a longer name, or matches the name only after
/// concatenating its words. `Exact` outranks `Partial`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MatchKind {
    Partial,
    Exact,
}

/// Switches of the rule engine. The named presets reproduce the standard
/// ablation grid; [`LinkerConfig::preset`] resolves an alias.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkerConfig {
    pub mode: LinkMode,
    /// Allow windows of a single token.
    pub use_unigrams: bool,
    /// Allow partial (subsequence / inflection) matches.
    pub use_partial_match: bool,
    /// Match against column names.
    pub use_columns: bool,
    /// Match against table names.
    pub use_tables: bool,
    /// Restrict to single-token windows.
    pub only_unigrams: bool,
    pub max_ngram_len: usize,
    /// Probability that a word token gets a random label in random mode.
    pub random_link_prob: f64,
    pub seed: u64,
}

impl Default for LinkerConfig {
    fn default() -> Self {
        LinkerConfig::full()
    }
}

/// Preset aliases, in canonical order.
pub const CONFIG_ALIASES: &[&str] = &["full", "a", "b", "c", "d", "e", "f", "g", "h"];

impl LinkerConfig {
    /// The complete rule engine: all window lengths, all match kinds, both
    /// name families.
    pub fn full() -> LinkerConfig {
        LinkerConfig {
            mode: LinkMode::Rule,
            use_unigrams: true,
            use_partial_match: true,
            use_columns: true,
            use_tables: true,
            only_unigrams: false,
            max_ngram_len: DEFAULT_MAX_NGRAM_LEN,
            random_link_prob: DEFAULT_RANDOM_LINK_PROB,
            seed: 0,
        }
    }

    /// Resolves a preset alias:
    /// `full` the complete engine, `a` no unigrams, `b` no unigrams and no
    /// partial matches, `c` no columns, `d` no tables, `e` only unigrams,
    /// `f` only unigrams without partial matches, `g` random linking,
    /// `h` no linking.
    pub fn preset(alias: &str) -> Result<LinkerConfig> {
        let mut config = LinkerConfig::full();
        match alias {
            "full" => {}
            "a" => config.use_unigrams = false,
            "b" => {
                config.use_unigrams = false;
                config.use_partial_match = false;
            }
            "c" => config.use_columns = false,
            "d" => config.use_tables = false,
            "e" => config.only_unigrams = true,
            "f" => {
                config.only_unigrams = true;
                config.use_partial_match = false;
            }
            "g" => config.mode = LinkMode::Random,
            "h" => config.mode = LinkMode::None,
            _ => {
                return Err(Error::Config(format!(
                    "unknown config alias {alias:?}; known aliases: {}",
                    CONFIG_ALIASES.join(", ")
                )))
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_ngram_len == 0 {
            return Err(Error::Config("max_ngram_len must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.random_link_prob) || !self.random_link_prob.is_finite() {
            return Err(Error::Config(format!(
                "random_link_prob {} is outside [0, 1]",
                self.random_link_prob
            )));
        }
        if self.only_unigrams && !self.use_unigrams {
            return Err(Error::Config(
                "only_unigrams contradicts use_unigrams = false".into(),
            ));
        }
        Ok(())
    }
}

/// A candidate window: `token_len` word tokens starting at token index
/// `token_start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NgramWindow {
    pub token_start: usize,
    pub token_len: usize,
}

impl NgramWindow {
    pub fn token_range(&self) -> std::ops::Range<usize> {
        self.token_start..self.token_start + self.token_len
    }
}

/// Enumerates candidate windows, longest first, left to right within each
/// length. Windows live inside maximal runs of word tokens: punctuation
/// breaks a run and never appears in any window.
///
/// ```
/// use schemalink::{tokenize, linker::enumerate_ngrams};
/// let q = tokenize("How many countries exist ?");
/// let windows = enumerate_ngrams(&q, 6);
/// assert_eq!(windows.len(), 10);
/// assert_eq!((windows[0].token_start, windows[0].token_len), (0, 4));
/// ```
pub fn enumerate_ngrams(question: &Question, max_len: usize) -> Vec<NgramWindow> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < question.tokens.len() {
        if question.tokens[i].is_word() {
            let start = i;
            while i < question.tokens.len() && question.tokens[i].is_word() {
                i += 1;
            }
            runs.push((start, i - start));
        } else {
            i += 1;
        }
    }
    let longest = runs.iter().map(|(_, len)| *len).max().unwrap_or(0);
    let cap = longest.min(max_len);
    let mut windows = Vec::new();
    for len in (1..=cap).rev() {
        for &(start, run_len) in &runs {
            if run_len < len {
                continue;
            }
            for s in start..=start + run_len - len {
                windows.push(NgramWindow {
                    token_start: s,
                    token_len: len,
                });
            }
        }
    }
    windows
}

// ---------------------------------------------------------------------------
// Name matching

/// Inflectional stems considered equivalent to a word: the word itself and
/// trailing-plural reductions (drop `s` or `es`, keeping a stem of at least
/// two characters).
fn stems(word: &str) -> impl Iterator<Item = &str> {
    let char_len = word.chars().count();
    let strip = move |suffix: &'static str, min_len: usize| {
        word.strip_suffix(suffix).filter(|_| char_len >= min_len)
    };
    std::iter::once(word)
        .chain(strip("s", 3))
        .chain(strip("es", 4))
}

fn words_equal(a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    stems(a).any(|sa| stems(b).any(|sb| sa == sb))
}

/// Is `needle` a contiguous subsequence of `hay`, word for word (up to
/// inflection)?
fn contains_sequence(hay: &[String], needle: &[String]) -> bool {
    if needle.is_empty() || needle.len() > hay.len() {
        return false;
    }
    hay.windows(needle.len())
        .any(|w| w.iter().zip(needle).all(|(h, n)| words_equal(h, n)))
}

fn exact_match(gram: &[String], name: &[String]) -> bool {
    // whole-name equality word for word; trailing plurals count as equal so
    // "singers" still matches the table "singer" exactly
    gram.len() == name.len() && gram.iter().zip(name).all(|(g, n)| words_equal(g, n))
}

fn partial_match(gram: &[String], name: &[String]) -> bool {
    // one-directional: the window must sit inside the name. The reverse
    // direction would let every window around a mention match too, and the
    // longest-first scan would then always claim maximal windows.
    if contains_sequence(name, gram) {
        return true;
    }
    // splitting differences: "high schoolers" vs "highschooler"
    words_equal(&gram.concat(), &name.concat())
}

struct NameEntry {
    target: LinkTarget,
    variants: Vec<Vec<String>>,
}

impl NameEntry {
    fn new(target: LinkTarget, names: [&str; 2]) -> Result<NameEntry> {
        let mut variants = Vec::new();
        for name in names {
            let normalized = normalize_name(name)?;
            if !variants.contains(&normalized) {
                variants.push(normalized);
            }
        }
        Ok(NameEntry { target, variants })
    }

    fn classify(&self, gram: &[String], allow_partial: bool) -> Option<MatchKind> {
        if self.variants.iter().any(|v| exact_match(gram, v)) {
            return Some(MatchKind::Exact);
        }
        if allow_partial && self.variants.iter().any(|v| partial_match(gram, v)) {
            return Some(MatchKind::Partial);
        }
        None
    }
}

/// Normalized name tables for one schema, reusable across questions.
pub struct SchemaIndex {
    columns: Vec<NameEntry>,
    tables: Vec<NameEntry>,
}

impl SchemaIndex {
    pub fn build(schema: &Schema) -> Result<SchemaIndex> {
        let mut columns = Vec::new();
        let mut tables = Vec::new();
        for table in &schema.tables {
            tables.push(NameEntry::new(
                LinkTarget::table(&table.original_name),
                [&table.original_name, &table.natural_name],
            )?);
            for column in &table.columns {
                columns.push(NameEntry::new(
                    LinkTarget::column(&table.original_name, &column.original_name),
                    [&column.original_name, &column.natural_name],
                )?);
            }
        }
        Ok(SchemaIndex { columns, tables })
    }

    /// Matches one normalized n-gram against the schema under the config's
    /// gates. Candidates come back in priority order: an exact match anywhere
    /// suppresses all partial candidates, then a column match suppresses
    /// table candidates of the same kind, then schema order decides.
    pub fn match_ngram(
        &self,
        gram: &[String],
        config: &LinkerConfig,
    ) -> Vec<(LinkTarget, MatchKind)> {
        let mut candidates: Vec<(LinkTarget, MatchKind)> = Vec::new();
        if config.use_columns {
            for entry in &self.columns {
                if let Some(kind) = entry.classify(gram, config.use_partial_match) {
                    candidates.push((entry.target.clone(), kind));
                }
            }
        }
        if config.use_tables {
            for entry in &self.tables {
                if let Some(kind) = entry.classify(gram, config.use_partial_match) {
                    candidates.push((entry.target.clone(), kind));
                }
            }
        }
        if candidates.iter().any(|(_, k)| *k == MatchKind::Exact) {
            candidates.retain(|(_, k)| *k == MatchKind::Exact);
        }
        if candidates.iter().any(|(t, _)| t.is_column()) {
            candidates.retain(|(t, _)| t.is_column());
        }
        candidates
    }
}

/// Matches a single n-gram against a schema. Convenience wrapper around
/// [`SchemaIndex::match_ngram`] for one-off lookups.
pub fn match_ngram(
    gram: &[String],
    schema: &Schema,
    config: &LinkerConfig,
) -> Result<Vec<(LinkTarget, MatchKind)>> {
    Ok(SchemaIndex::build(schema)?.match_ngram(gram, config))
}

// ---------------------------------------------------------------------------
// Linking

/// Links a question against a schema. Equivalent to [`link_indexed`] with
/// question index 0.
pub fn link(
    question: &Question,
    schema: &Schema,
    config: &LinkerConfig,
    strategy: Strategy,
) -> Result<Vec<LabeledSpan>> {
    link_indexed(question, schema, config, strategy, 0)
}

/// Links one question. `question_index` individualizes the random stream in
/// random mode, so corpus runs are reproducible regardless of traversal
/// order; rule mode ignores it.
pub fn link_indexed(
    question: &Question,
    schema: &Schema,
    config: &LinkerConfig,
    strategy: Strategy,
    question_index: u64,
) -> Result<Vec<LabeledSpan>> {
    config.validate()?;
    match config.mode {
        LinkMode::None => Ok(Vec::new()),
        LinkMode::Random => random_link(question, schema, config, question_index),
        LinkMode::Rule => {
            let index = SchemaIndex::build(schema)?;
            link_with_index(question, &index, config, strategy)
        }
    }
}

/// Rule-mode linking against a prebuilt [`SchemaIndex`].
pub fn link_with_index(
    question: &Question,
    index: &SchemaIndex,
    config: &LinkerConfig,
    strategy: Strategy,
) -> Result<Vec<LabeledSpan>> {
    config.validate()?;
    let tokens = &question.tokens;
    let norms: Vec<String> = tokens.iter().map(Token::normalized).collect();
    let windows = enumerate_ngrams(question, config.max_ngram_len);
    let mut consumed = vec![false; tokens.len()];
    let mut out = Vec::new();
    for pass in [MatchKind::Exact, MatchKind::Partial] {
        if pass == MatchKind::Partial && !config.use_partial_match {
            continue;
        }
        for window in &windows {
            if window.token_len == 1 && !config.use_unigrams {
                continue;
            }
            if window.token_len > 1 && config.only_unigrams {
                continue;
            }
            if window.token_range().any(|i| consumed[i]) {
                continue;
            }
            let gram = &norms[window.token_range()];
            let mut candidates = index.match_ngram(gram, config);
            candidates.retain(|(_, kind)| *kind == pass);
            if candidates.is_empty() {
                continue;
            }
            let start = tokens[window.token_start].start;
            let end = tokens[window.token_start + window.token_len - 1].end;
            let take = match strategy {
                Strategy::SingleTarget => 1,
                Strategy::MultiTarget => candidates.len(),
            };
            for (target, _) in candidates.into_iter().take(take) {
                out.push(LabeledSpan::new(question, start, end, target)?);
            }
            for i in window.token_range() {
                consumed[i] = true;
            }
        }
    }
    out.sort();
    Ok(out)
}

fn mix_seed(seed: u64, question_index: u64) -> u64 {
    // splitmix64 over a golden-ratio spread of the index
    let mut z = seed ^ question_index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random-mode linking: each word token independently receives a uniformly
/// drawn table or column with probability `random_link_prob`. Each question
/// gets its own ChaCha8 stream derived from `(seed, question_index)`.
pub fn random_link(
    question: &Question,
    schema: &Schema,
    config: &LinkerConfig,
    question_index: u64,
) -> Result<Vec<LabeledSpan>> {
    config.validate()?;
    let mut targets = Vec::new();
    for table in &schema.tables {
        targets.push(LinkTarget::table(&table.original_name));
        for column in &table.columns {
            targets.push(LinkTarget::column(
                &table.original_name,
                &column.original_name,
            ));
        }
    }
    if targets.is_empty() {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, question_index));
    let mut out = Vec::new();
    for token in question.tokens.iter().filter(|t| t.is_word()) {
        if rng.random::<f64>() < config.random_link_prob {
            let target = targets[rng.random_range(0..targets.len())].clone();
            out.push(LabeledSpan::new(question, token.start, token.end, target)?);
        }
    }
    Ok(out)
}
