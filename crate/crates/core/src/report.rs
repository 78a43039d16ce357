//! Plain-text and CSV rendering of evaluation, statistics, agreement, and
//! correlation results.

use crate::agreement::AgreementReport;
use crate::analytics::{
    CorrelationResult, LabelStats, LengthStratum, TargetStratum, LENGTH_STRATA, TARGET_STRATA,
};
use crate::evaluator::{metrics_from_counts, round_half_up, EvalCounts};
use crate::io::ResultsRow;

fn pct(value: f64) -> String {
    format!("{:.1}", round_half_up(value, 1))
}

/// Formats a p-value: fixed four decimals, switching to scientific notation
/// below 0.001.
pub fn format_p(p: f64) -> String {
    if p == 0.0 {
        "0".to_string()
    } else if p < 0.001 {
        format!("{p:.1e}")
    } else {
        format!("{p:.4}")
    }
}

/// Builds an interchange results row from counts. `em` comes from an
/// external execution of the downstream parser and is simply carried along.
pub fn results_row(system: &str, em: f64, counts: &EvalCounts) -> ResultsRow {
    let metrics = metrics_from_counts(counts);
    ResultsRow {
        system: system.to_string(),
        em,
        f1: metrics.f1,
        precision: metrics.precision,
        recall: metrics.recall,
        false_positives: counts.false_positives,
        false_negatives: counts.false_negatives,
        true_positives: counts.true_positives,
    }
}

/// One aligned text row of span-level scores, with a header line.
pub fn render_eval(system: &str, em: Option<f64>, counts: &EvalCounts) -> String {
    let metrics = metrics_from_counts(counts);
    let mut header = format!("{:<12}", "system");
    let mut row = format!("{system:<12}");
    if let Some(em) = em {
        header.push_str(&format!("{:>8}", "EM"));
        row.push_str(&format!("{:>8}", pct(em)));
    }
    header.push_str(&format!(
        "{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}",
        "F1", "Pre.", "Rec.", "#FP", "#FN", "#TP"
    ));
    row.push_str(&format!(
        "{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}",
        pct(metrics.f1),
        pct(metrics.precision),
        pct(metrics.recall),
        counts.false_positives,
        counts.false_negatives,
        counts.true_positives
    ));
    format!("{header}\n{row}\n")
}

/// Canonical row name of a statistics stratum, shared by every rendering.
pub fn stratum_label(target: TargetStratum, length: LengthStratum) -> String {
    let base = match target {
        TargetStratum::All => "Total",
        TargetStratum::Table => "Table",
        TargetStratum::Column => "Column",
    };
    match length {
        LengthStratum::All => base.to_string(),
        LengthStratum::Single => format!("{base} (l=1)"),
        LengthStratum::Multi => format!("{base} (l>=2)"),
    }
}

/// Aligned text table of label statistics, length-major like the usual
/// dataset overview tables.
pub fn render_stats(stats: &LabelStats) -> String {
    let mut out = format!(
        "{:<14}{:>9}{:>6}{:>6}{:>7}{:>7}\n",
        "", "#LABEL", "MAX", "MIN", "AVG", "STD"
    );
    for length in LENGTH_STRATA {
        for target in TARGET_STRATA {
            let s = stats.stratum(target, length);
            out.push_str(&format!(
                "{:<14}{:>9}{:>6}{:>6}{:>7.2}{:>7.2}\n",
                stratum_label(target, length),
                s.labels,
                s.max,
                s.min,
                round_half_up(s.avg, 2),
                round_half_up(s.std, 2)
            ));
        }
    }
    out.push_str(&format!("sentences: {}\n", stats.sentences));
    out
}

/// CSV export of label statistics at full precision.
pub fn stats_csv(stats: &LabelStats) -> String {
    let mut out = String::from("stratum,labels,max,min,avg,std\n");
    for length in LENGTH_STRATA {
        for target in TARGET_STRATA {
            let s = stats.stratum(target, length);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                stratum_label(target, length),
                s.labels,
                s.max,
                s.min,
                s.avg,
                s.std
            ));
        }
    }
    out
}

const MAX_CATEGORY_ROWS: usize = 12;

/// Structured text report of an agreement analysis.
pub fn render_agreement(report: &AgreementReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "Cohen's kappa ({} level)\n",
        report.granularity.as_str()
    ));
    out.push_str(&format!("  kappa:              {:.3}\n", report.kappa));
    out.push_str(&format!(
        "  95% CI:             [{:.3}, {:.3}]\n",
        report.ci95.0, report.ci95.1
    ));
    out.push_str(&format!(
        "  p (one-sided):      {}\n",
        format_p(report.p_value)
    ));
    out.push_str(&format!(
        "  observed agreement: {:.3}\n",
        report.observed_agreement
    ));
    out.push_str(&format!(
        "  expected agreement: {:.3}\n",
        report.expected_agreement
    ));
    out.push_str(&format!(
        "  tokens considered:  {} of {} across {} examples\n",
        report.considered_tokens, report.total_tokens, report.examples
    ));
    out.push('\n');
    out.push_str(&format!(
        "  {:<28}{:>8}{:>8}{:>8}\n",
        "label", "a", "b", "agree"
    ));
    for category in report.categories.iter().take(MAX_CATEGORY_ROWS) {
        out.push_str(&format!(
            "  {:<28}{:>8}{:>8}{:>8}\n",
            category.label, category.count_a, category.count_b, category.agreements
        ));
    }
    if report.categories.len() > MAX_CATEGORY_ROWS {
        out.push_str(&format!(
            "  ... and {} more labels\n",
            report.categories.len() - MAX_CATEGORY_ROWS
        ));
    }
    out
}

/// One-line correlation summary.
pub fn render_correlation(x_name: &str, y_name: &str, result: &CorrelationResult) -> String {
    format!(
        "Pearson r({x_name}, {y_name}) = {:.3}  (n = {}, two-sided p = {})\n",
        result.r,
        result.n,
        format_p(result.p_value)
    )
}
