//! Span-level scoring of predicted annotations against gold annotations.

use std::collections::HashMap;
use std::ops::{Add, AddAssign};

use crate::error::{Error, Result};
use crate::model::{LabeledSpan, Question};

/// Class label for tokens not covered by any span.
pub const NONE_LABEL: &str = "NONE";

/// Raw matching counts. Matching is one-to-one on exact
/// `(start, end, target)` identity, multiset style: each gold span absorbs at
/// most one identical predicted span, surplus duplicates on either side count
/// as errors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl EvalCounts {
    pub fn gold_total(&self) -> u64 {
        self.true_positives + self.false_negatives
    }

    pub fn predicted_total(&self) -> u64 {
        self.true_positives + self.false_positives
    }
}

impl Add for EvalCounts {
    type Output = EvalCounts;
    fn add(self, other: EvalCounts) -> EvalCounts {
        EvalCounts {
            true_positives: self.true_positives + other.true_positives,
            false_positives: self.false_positives + other.false_positives,
            false_negatives: self.false_negatives + other.false_negatives,
        }
    }
}

impl AddAssign for EvalCounts {
    fn add_assign(&mut self, other: EvalCounts) {
        *self = *self + other;
    }
}

impl std::iter::Sum for EvalCounts {
    fn sum<I: Iterator<Item = EvalCounts>>(iter: I) -> EvalCounts {
        iter.fold(EvalCounts::default(), Add::add)
    }
}

/// Scores one question's predictions against its gold spans.
pub fn evaluate(predicted: &[LabeledSpan], gold: &[LabeledSpan]) -> EvalCounts {
    let mut remaining: HashMap<(usize, usize, &crate::model::LinkTarget), u64> = HashMap::new();
    for g in gold {
        *remaining.entry((g.start, g.end, &g.target)).or_insert(0) += 1;
    }
    let mut counts = EvalCounts::default();
    for p in predicted {
        match remaining.get_mut(&(p.start, p.end, &p.target)) {
            Some(n) if *n > 0 => {
                *n -= 1;
                counts.true_positives += 1;
            }
            _ => counts.false_positives += 1,
        }
    }
    counts.false_negatives = gold.len() as u64 - counts.true_positives;
    counts
}

/// Micro-averages counts over (predicted, gold) pairs.
pub fn evaluate_corpus<'a, I>(pairs: I) -> EvalCounts
where
    I: IntoIterator<Item = (&'a [LabeledSpan], &'a [LabeledSpan])>,
{
    pairs
        .into_iter()
        .map(|(predicted, gold)| evaluate(predicted, gold))
        .sum()
}

/// Precision, recall, and F1 as percentages at full precision. Round with
/// [`round_half_up`] for display only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Derives percentage metrics from counts. Empty denominators yield zero
/// rather than NaN, so an all-empty prediction scores 0/0/0.
pub fn metrics_from_counts(counts: &EvalCounts) -> Metrics {
    let ratio = |num: u64, denom: u64| {
        if denom == 0 {
            0.0
        } else {
            100.0 * num as f64 / denom as f64
        }
    };
    let precision = ratio(counts.true_positives, counts.predicted_total());
    let recall = ratio(counts.true_positives, counts.gold_total());
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics {
        precision,
        recall,
        f1,
    }
}

/// Rounds half-up (ties away from zero) at the given number of decimals.
/// Matches how percentages are conventionally printed in result tables.
pub fn round_half_up(value: f64, decimals: u32) -> f64 {
    let factor = 10f64.powi(decimals as i32);
    let scaled = value * factor;
    let rounded = if scaled < 0.0 {
        -(-scaled + 0.5).floor()
    } else {
        (scaled + 0.5).floor()
    };
    rounded / factor
}

/// Projects spans onto the question's token sequence: each token gets its
/// covering span's rendered target, or [`NONE_LABEL`]. Errors if two spans
/// claim the same token, since the per-token view cannot represent that.
pub fn project_tokens(question: &Question, spans: &[LabeledSpan]) -> Result<Vec<String>> {
    let mut labels = vec![NONE_LABEL.to_string(); question.tokens.len()];
    for span in spans {
        for (i, token) in question.tokens.iter().enumerate() {
            if token.start < span.end && token.end > span.start {
                if labels[i] != NONE_LABEL {
                    return Err(Error::Input(format!(
                        "token {:?} at [{}, {}) is claimed by more than one span",
                        token.surface, token.start, token.end
                    )));
                }
                labels[i] = span.target.render();
            }
        }
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{tokenize, LabeledSpan, LinkTarget};
    use approx::assert_relative_eq;

    fn span(q: &Question, start: usize, end: usize, label: &str) -> LabeledSpan {
        LabeledSpan::new(q, start, end, LinkTarget::parse(label).unwrap()).unwrap()
    }

    #[test]
    fn identical_sets_are_perfect() {
        let q = tokenize("How many singers do we have ?");
        let gold = vec![span(&q, 9, 16, "singer")];
        let counts = evaluate(&gold, &gold);
        assert_eq!(
            counts,
            EvalCounts {
                true_positives: 1,
                false_positives: 0,
                false_negatives: 0
            }
        );
        let m = metrics_from_counts(&counts);
        assert_eq!((m.precision, m.recall, m.f1), (100.0, 100.0, 100.0));
    }

    #[test]
    fn empty_predictions_miss_everything() {
        let q = tokenize("How many singers do we have ?");
        let gold = vec![span(&q, 9, 16, "singer"), span(&q, 0, 3, "other")];
        let counts = evaluate(&[], &gold);
        assert_eq!(counts.false_negatives, 2);
        assert_eq!(counts.gold_total(), 2);
        let m = metrics_from_counts(&counts);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn target_mismatch_is_both_fp_and_fn() {
        let q = tokenize("How many singers do we have ?");
        let gold = vec![span(&q, 9, 16, "singer")];
        let pred = vec![span(&q, 9, 16, "singer.Name")];
        let counts = evaluate(&pred, &gold);
        assert_eq!(
            counts,
            EvalCounts {
                true_positives: 0,
                false_positives: 1,
                false_negatives: 1
            }
        );
    }

    #[test]
    fn boundary_mismatch_is_not_a_match() {
        let q = tokenize("How many singers do we have ?");
        let gold = vec![span(&q, 9, 16, "singer")];
        let pred = vec![span(&q, 9, 15, "singer")];
        let counts = evaluate(&pred, &gold);
        assert_eq!(counts.true_positives, 0);
    }

    #[test]
    fn duplicate_predictions_count_once() {
        let q = tokenize("singer name and singer name");
        let gold = vec![span(&q, 0, 6, "singer")];
        let pred = vec![span(&q, 0, 6, "singer"), span(&q, 16, 22, "singer")];
        // distinct offsets: second prediction is a miss
        let counts = evaluate(&pred, &gold);
        assert_eq!(counts.true_positives, 1);
        assert_eq!(counts.false_positives, 1);
        // literal duplicates in the prediction list also only match once
        let dup = vec![pred[0].clone(), pred[0].clone()];
        let counts = evaluate(&dup, &gold);
        assert_eq!(counts.true_positives, 1);
        assert_eq!(counts.false_positives, 1);
    }

    #[test]
    fn corpus_micro_average() {
        let q1 = tokenize("How many singers do we have ?");
        let q2 = tokenize("List all airlines .");
        let gold1 = vec![span(&q1, 9, 16, "singer")];
        let gold2 = vec![span(&q2, 9, 17, "airlines")];
        let pred1: Vec<LabeledSpan> = vec![];
        let pred2 = gold2.clone();
        let total = evaluate_corpus(vec![
            (pred1.as_slice(), gold1.as_slice()),
            (pred2.as_slice(), gold2.as_slice()),
        ]);
        assert_eq!(
            total,
            EvalCounts {
                true_positives: 1,
                false_positives: 0,
                false_negatives: 1
            }
        );
    }

    #[test]
    fn metrics_match_reference_rows() {
        let m = metrics_from_counts(&EvalCounts {
            true_positives: 1266,
            false_positives: 157,
            false_negatives: 188,
        });
        assert_relative_eq!(m.precision, 88.96697118763177, max_relative = 1e-12);
        assert_relative_eq!(m.recall, 87.07015130674003, max_relative = 1e-12);
        assert_relative_eq!(m.f1, 88.00834202294057, max_relative = 1e-12);
        assert_eq!(round_half_up(m.precision, 1), 89.0);
        assert_eq!(round_half_up(m.recall, 1), 87.1);
        assert_eq!(round_half_up(m.f1, 1), 88.0);

        let m = metrics_from_counts(&EvalCounts {
            true_positives: 967,
            false_positives: 243,
            false_negatives: 487,
        });
        assert_eq!(round_half_up(m.precision, 1), 79.9);
        assert_eq!(round_half_up(m.recall, 1), 66.5);
        assert_eq!(round_half_up(m.f1, 1), 72.6);
    }

    #[test]
    fn rounding_half_up() {
        assert_eq!(round_half_up(49.25, 1), 49.3);
        assert_eq!(round_half_up(49.24999, 1), 49.2);
        assert_eq!(round_half_up(0.05, 1), 0.1);
        assert_eq!(round_half_up(-0.05, 1), -0.1);
        assert_eq!(round_half_up(87.0646, 1), 87.1);
    }

    #[test]
    fn projection_marks_covered_tokens() {
        let q = tokenize("What is the abbreviation of JetBlue ?");
        let spans = vec![span(&q, 12, 24, "airlines.Abbreviation")];
        let labels = project_tokens(&q, &spans).unwrap();
        assert_eq!(
            labels,
            [
                "NONE",
                "NONE",
                "NONE",
                "airlines.Abbreviation",
                "NONE",
                "NONE",
                "NONE"
            ]
        );
    }

    #[test]
    fn projection_rejects_double_claims() {
        let q = tokenize("singer name");
        let spans = vec![span(&q, 0, 11, "singer"), span(&q, 0, 11, "singer.Name")];
        let err = project_tokens(&q, &spans).unwrap_err().to_string();
        assert!(err.contains("more than one span"), "{err}");
    }

    #[test]
    fn multi_token_span_projects_to_each_token() {
        let q = tokenize("name of the record company ?");
        let spans = vec![span(&q, 12, 26, "record_companies")];
        let labels = project_tokens(&q, &spans).unwrap();
        assert_eq!(labels[3], "record_companies");
        assert_eq!(labels[4], "record_companies");
        assert_eq!(labels[0], "NONE");
        assert_eq!(labels[5], "NONE");
    }
}
