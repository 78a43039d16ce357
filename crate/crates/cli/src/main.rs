mod lint;
mod manifest;

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use schemalink::agreement::{cohen_kappa, pairwise_f1, AgreementGranularity};
use schemalink::analytics::{dataset_stats, pearson, split_no_db_overlap};
use schemalink::evaluator::{evaluate_corpus, round_half_up};
use schemalink::io::{
    load_annotations, load_annotations_aligned, load_questions, load_results, load_schemas,
    write_annotations, write_results_to, Corpus, RESULTS_NUMERIC_COLUMNS,
};
use schemalink::linker::{
    link_indexed, link_with_index, LinkMode, LinkerConfig, SchemaIndex, Strategy,
};
use schemalink::{report, tokenize, AnnotatedExample};

use lint::Severity;
use manifest::RunManifest;

#[derive(Parser)]
#[command(
    name = "schemalink",
    version,
    about = "Schema linking and span-level evaluation toolkit for text-to-SQL"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Link questions to schema elements and write the predicted spans
    Link(LinkArgs),
    /// Score a predicted span file against a gold one
    Eval(EvalArgs),
    /// Inter-annotator agreement between two span files
    Agree(AgreeArgs),
    /// Label-count statistics of a span file
    Stats(StatsArgs),
    /// Pearson correlation between two columns of a results table
    Corr(CorrArgs),
    /// Split a span file into two halves with disjoint databases
    Split(SplitArgs),
    /// Check a span file for structural and schema problems
    Lint(LintArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Single,
    Multi,
}

impl From<StrategyArg> for Strategy {
    fn from(value: StrategyArg) -> Strategy {
        match value {
            StrategyArg::Single => Strategy::SingleTarget,
            StrategyArg::Multi => Strategy::MultiTarget,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    Target,
    Kind,
}

impl From<GranularityArg> for AgreementGranularity {
    fn from(value: GranularityArg) -> AgreementGranularity {
        match value {
            GranularityArg::Target => AgreementGranularity::Target,
            GranularityArg::Kind => AgreementGranularity::Kind,
        }
    }
}

#[derive(Args)]
struct LinkArgs {
    /// Schema catalog (tables.json)
    #[arg(long)]
    tables: PathBuf,
    /// Question file (JSON array with question and db_id)
    #[arg(long)]
    questions: PathBuf,
    /// Where to write the predicted spans (JSONL)
    #[arg(long)]
    out: PathBuf,
    /// Linker preset: full, or one of the ablations a-h
    #[arg(long, default_value = "full")]
    config: String,
    /// Whether a window may keep one target or several
    #[arg(long, value_enum, default_value_t = StrategyArg::Multi)]
    strategy: StrategyArg,
    /// Seed for the random preset
    #[arg(long)]
    seed: Option<u64>,
    /// Per-token labeling probability for the random preset
    #[arg(long)]
    prob: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted span file (JSONL)
    predicted: PathBuf,
    /// Gold span file (JSONL)
    gold: PathBuf,
    /// Exact-match accuracy to carry into the EM column
    #[arg(long)]
    em: Option<f64>,
    /// Row label in the report
    #[arg(long, default_value = "run")]
    system: String,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    /// Also write the report here, with a manifest beside it
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AgreeArgs {
    /// First annotator's span file (JSONL)
    first: PathBuf,
    /// Second annotator's span file (JSONL)
    second: PathBuf,
    /// Label identity for agreement: full target or just its kind
    #[arg(long, value_enum, default_value_t = GranularityArg::Target)]
    granularity: GranularityArg,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    /// Also write the report here, with a manifest beside it
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Span file (JSONL)
    annotations: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    /// Also write the report here, with a manifest beside it
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CorrArgs {
    /// Results table (CSV)
    results: PathBuf,
    /// First column name
    x: String,
    /// Second column name
    y: String,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    /// Also write the report here, with a manifest beside it
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    /// Span file to split (JSONL)
    annotations: PathBuf,
    /// Schema catalog; when given, every example must resolve against it
    #[arg(long)]
    tables: Option<PathBuf>,
    /// Question file supplying db_id for records that lack one
    #[arg(long)]
    questions: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the smaller (dev) side
    #[arg(long)]
    out_dev: PathBuf,
    /// Where to write the larger (test) side
    #[arg(long)]
    out_test: PathBuf,
}

#[derive(Args)]
struct LintArgs {
    /// Span file to check (JSONL)
    annotations: PathBuf,
    /// Schema catalog enabling target checks
    #[arg(long)]
    tables: Option<PathBuf>,
    /// Question file enabling alignment checks
    #[arg(long)]
    questions: Option<PathBuf>,
}

/// CLI-level bad invocation (unknown column name and the like), as opposed to
/// bad data.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(failure_code(&e))
        }
    }
}

fn failure_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match e.downcast_ref::<schemalink::Error>() {
        Some(schemalink::Error::Config(_)) => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Link(args) => cmd_link(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Agree(args) => cmd_agree(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Corr(args) => cmd_corr(args),
        Command::Split(args) => cmd_split(args),
        Command::Lint(args) => cmd_lint(args),
    }
}

/// Relative input paths fall back to `$SCHEMALINK_DATA` when they do not
/// exist as given; output paths are always taken literally.
fn resolve_input(path: &Path) -> PathBuf {
    if path.exists() || path.is_absolute() {
        return path.to_path_buf();
    }
    if let Some(root) = std::env::var_os("SCHEMALINK_DATA") {
        let candidate = Path::new(&root).join(path);
        if candidate.exists() {
            return candidate;
        }
    }
    path.to_path_buf()
}

fn cmd_link(args: LinkArgs) -> anyhow::Result<u8> {
    let tables_path = resolve_input(&args.tables);
    let questions_path = resolve_input(&args.questions);
    let schemas = load_schemas(&tables_path)?;
    let questions = load_questions(&questions_path)?;

    let mut config = LinkerConfig::preset(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(prob) = args.prob {
        config.random_link_prob = prob;
    }
    config.validate()?;
    let strategy = Strategy::from(args.strategy);

    let mut indexes: BTreeMap<String, SchemaIndex> = BTreeMap::new();
    let mut examples = Vec::with_capacity(questions.len());
    let mut emitted = 0usize;
    for (i, record) in questions.iter().enumerate() {
        let schema = schemas.get(&record.db_id).ok_or_else(|| {
            schemalink::Error::Input(format!(
                "question {} references database {:?}, which is not in the catalog",
                i + 1,
                record.db_id
            ))
        })?;
        let question = tokenize(&record.question);
        let spans = match config.mode {
            LinkMode::Rule => {
                let index = match indexes.entry(record.db_id.clone()) {
                    Entry::Occupied(slot) => slot.into_mut(),
                    Entry::Vacant(slot) => slot.insert(SchemaIndex::build(schema)?),
                };
                link_with_index(&question, index, &config, strategy)?
            }
            _ => link_indexed(&question, schema, &config, strategy, i as u64)?,
        };
        emitted += spans.len();
        examples.push(AnnotatedExample::new(
            Some(record.db_id.clone()),
            question,
            spans,
        )?);
    }
    write_annotations(&args.out, &examples)?;

    let mut manifest = RunManifest::new("link");
    manifest.config = Some(args.config.clone());
    manifest.strategy = Some(strategy.as_str().to_string());
    manifest.seed = Some(config.seed);
    if matches!(config.mode, LinkMode::Random) {
        manifest.option("prob", config.random_link_prob);
    }
    manifest.input("tables", &tables_path)?;
    manifest.input("questions", &questions_path)?;
    manifest.write_beside(&args.out)?;

    println!(
        "linked {} questions; emitted {} spans",
        examples.len(),
        emitted
    );
    Ok(0)
}

/// Prints the report and mirrors it to `--out` (plus a manifest) when given.
fn emit(report: &str, out: Option<&Path>, manifest: RunManifest) -> anyhow::Result<()> {
    print!("{report}");
    if let Some(out) = out {
        fs::write(out, report)
            .map_err(|e| anyhow::anyhow!("writing report {}: {e}", out.display()))?;
        manifest.write_beside(out)?;
    }
    Ok(())
}

fn check_aligned(
    predicted: &[AnnotatedExample],
    gold: &[AnnotatedExample],
) -> Result<(), schemalink::Error> {
    if predicted.len() != gold.len() {
        return Err(schemalink::Error::Alignment(format!(
            "predicted file holds {} examples but gold holds {}",
            predicted.len(),
            gold.len()
        )));
    }
    let mismatched: Vec<(usize, &AnnotatedExample, &AnnotatedExample)> = predicted
        .iter()
        .zip(gold)
        .enumerate()
        .filter(|(_, (p, g))| p.question.text != g.question.text)
        .map(|(i, (p, g))| (i + 1, p, g))
        .collect();
    if mismatched.is_empty() {
        return Ok(());
    }
    let mut detail = String::new();
    for (i, p, g) in mismatched.iter().take(5) {
        detail.push_str(&format!(
            "\n  example {}: {:?} vs {:?}",
            i, p.question.text, g.question.text
        ));
    }
    if mismatched.len() > 5 {
        detail.push_str(&format!("\n  ... and {} more", mismatched.len() - 5));
    }
    Err(schemalink::Error::Alignment(format!(
        "question text diverges on {} of {} examples:{detail}",
        mismatched.len(),
        gold.len()
    )))
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<u8> {
    let predicted_path = resolve_input(&args.predicted);
    let gold_path = resolve_input(&args.gold);
    let predicted = load_annotations(&predicted_path)?.examples;
    let gold = load_annotations(&gold_path)?.examples;
    check_aligned(&predicted, &gold)?;
    let counts = evaluate_corpus(
        predicted
            .iter()
            .zip(&gold)
            .map(|(p, g)| (p.spans.as_slice(), g.spans.as_slice())),
    );

    let report = match args.format {
        FormatArg::Text => report::render_eval(&args.system, args.em, &counts),
        FormatArg::Csv => {
            let row = report::results_row(&args.system, args.em.unwrap_or(0.0), &counts);
            let mut buf = Vec::new();
            write_results_to(&mut buf, &[row])?;
            String::from_utf8(buf).expect("results CSV is UTF-8")
        }
    };

    let mut manifest = RunManifest::new("eval");
    manifest.option("system", &args.system);
    if let Some(em) = args.em {
        manifest.option("em", em);
    }
    manifest.input("predicted", &predicted_path)?;
    manifest.input("gold", &gold_path)?;
    emit(&report, args.out.as_deref(), manifest)?;
    Ok(0)
}

fn cmd_agree(args: AgreeArgs) -> anyhow::Result<u8> {
    let first_path = resolve_input(&args.first);
    let second_path = resolve_input(&args.second);
    let first = load_annotations(&first_path)?.examples;
    let second = load_annotations(&second_path)?.examples;
    let granularity = AgreementGranularity::from(args.granularity);
    let agreement = cohen_kappa(&first, &second, granularity)?;
    let f1 = pairwise_f1(&first, &second)?;

    let report = match args.format {
        FormatArg::Text => format!(
            "{}pairwise F1: {:.1}\n",
            report::render_agreement(&agreement),
            round_half_up(f1, 1)
        ),
        FormatArg::Csv => format!(
            "granularity,kappa,se,ci_low,ci_high,p,observed,expected,considered_tokens,total_tokens,examples,f1\n{},{},{},{},{},{},{},{},{},{},{},{}\n",
            agreement.granularity.as_str(),
            agreement.kappa,
            agreement.standard_error,
            agreement.ci95.0,
            agreement.ci95.1,
            agreement.p_value,
            agreement.observed_agreement,
            agreement.expected_agreement,
            agreement.considered_tokens,
            agreement.total_tokens,
            agreement.examples,
            f1
        ),
    };

    let mut manifest = RunManifest::new("agree");
    manifest.option("granularity", granularity.as_str());
    manifest.input("first", &first_path)?;
    manifest.input("second", &second_path)?;
    emit(&report, args.out.as_deref(), manifest)?;
    Ok(0)
}

fn cmd_stats(args: StatsArgs) -> anyhow::Result<u8> {
    let annotations_path = resolve_input(&args.annotations);
    let examples = load_annotations(&annotations_path)?.examples;
    let stats = dataset_stats(&examples)?;
    let report = match args.format {
        FormatArg::Text => report::render_stats(&stats),
        FormatArg::Csv => report::stats_csv(&stats),
    };
    let mut manifest = RunManifest::new("stats");
    manifest.input("annotations", &annotations_path)?;
    emit(&report, args.out.as_deref(), manifest)?;
    Ok(0)
}

fn cmd_corr(args: CorrArgs) -> anyhow::Result<u8> {
    for name in [&args.x, &args.y] {
        if !RESULTS_NUMERIC_COLUMNS.contains(&name.as_str()) {
            return Err(UsageError(format!(
                "unknown column {name:?}; numeric columns: {}",
                RESULTS_NUMERIC_COLUMNS.join(", ")
            ))
            .into());
        }
    }
    let results_path = resolve_input(&args.results);
    let table = load_results(&results_path)?;
    let xs = table.column(&args.x)?;
    let ys = table.column(&args.y)?;
    let result = pearson(&xs, &ys)?;

    let report = match args.format {
        FormatArg::Text => report::render_correlation(&args.x, &args.y, &result),
        FormatArg::Csv => format!(
            "x,y,r,p,n\n{},{},{},{},{}\n",
            args.x, args.y, result.r, result.p_value, result.n
        ),
    };
    let mut manifest = RunManifest::new("corr");
    manifest.option("x", &args.x);
    manifest.option("y", &args.y);
    manifest.input("results", &results_path)?;
    emit(&report, args.out.as_deref(), manifest)?;
    Ok(0)
}

fn cmd_split(args: SplitArgs) -> anyhow::Result<u8> {
    let annotations_path = resolve_input(&args.annotations);
    let questions_path = args.questions.as_deref().map(resolve_input);
    let tables_path = args.tables.as_deref().map(resolve_input);

    let examples = match &questions_path {
        Some(path) => {
            let questions = load_questions(path)?;
            load_annotations_aligned(&annotations_path, &questions)?.examples
        }
        None => load_annotations(&annotations_path)?.examples,
    };
    let examples = match &tables_path {
        Some(path) => Corpus::new(load_schemas(path)?, examples)?.examples,
        None => examples,
    };

    let plan = split_no_db_overlap(&examples, args.seed)?;
    let side = |indices: &[usize]| -> Vec<AnnotatedExample> {
        indices.iter().map(|&i| examples[i].clone()).collect()
    };
    write_annotations(&args.out_dev, &side(&plan.dev_indices))?;
    write_annotations(&args.out_test, &side(&plan.test_indices))?;

    let mut manifest = RunManifest::new("split");
    manifest.seed = Some(args.seed);
    manifest.input("annotations", &annotations_path)?;
    if let Some(path) = &questions_path {
        manifest.input("questions", path)?;
    }
    if let Some(path) = &tables_path {
        manifest.input("tables", path)?;
    }
    manifest.write_beside(&args.out_dev)?;
    manifest.write_beside(&args.out_test)?;

    println!(
        "dev: {} examples across {} databases; test: {} examples across {} databases; imbalance: {}",
        plan.dev_indices.len(),
        plan.dev_dbs.len(),
        plan.test_indices.len(),
        plan.test_dbs.len(),
        plan.imbalance
    );
    Ok(0)
}

fn cmd_lint(args: LintArgs) -> anyhow::Result<u8> {
    let annotations_path = resolve_input(&args.annotations);
    let schemas = match args.tables.as_deref().map(resolve_input) {
        Some(path) => Some(load_schemas(path)?),
        None => None,
    };
    let questions = match args.questions.as_deref().map(resolve_input) {
        Some(path) => Some(load_questions(path)?),
        None => None,
    };

    let diagnostics =
        lint::lint_annotations(&annotations_path, schemas.as_ref(), questions.as_deref())?;
    for d in &diagnostics {
        match d.line {
            Some(line) => println!("{}: line {}: {}", d.severity, line, d.message),
            None => println!("{}: {}", d.severity, d.message),
        }
    }
    let errors = diagnostics
        .iter()
        .filter(|d| d.severity == Severity::Error)
        .count();
    let warnings = diagnostics.len() - errors;
    println!("{errors} error(s), {warnings} warning(s)");
    Ok(if errors > 0 { 3 } else { 0 })
}
