//! Inter-annotator agreement: Cohen's kappa over token-level labels, plus
//! span-level pairwise F1.

use std::collections::BTreeMap;
use std::str::FromStr;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::evaluator::{evaluate_corpus, metrics_from_counts, project_tokens, NONE_LABEL};
use crate::model::AnnotatedExample;

/// What counts as "the same label" for kappa: the full rendered target, or
/// just its kind (table vs column).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgreementGranularity {
    Target,
    Kind,
}

impl AgreementGranularity {
    pub fn as_str(&self) -> &'static str {
        match self {
            AgreementGranularity::Target => "target",
            AgreementGranularity::Kind => "kind",
        }
    }
}

impl FromStr for AgreementGranularity {
    type Err = Error;
    fn from_str(s: &str) -> Result<AgreementGranularity> {
        match s {
            "target" => Ok(AgreementGranularity::Target),
            "kind" => Ok(AgreementGranularity::Kind),
            _ => Err(Error::Config(format!(
                "unknown granularity {s:?}; expected \"target\" or \"kind\""
            ))),
        }
    }
}

/// Per-category marginals and agreements, for the report's confusion summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryAgreement {
    pub label: String,
    pub count_a: u64,
    pub count_b: u64,
    pub agreements: u64,
}

/// Cohen's kappa with its normal-approximation uncertainty.
///
/// Tokens labeled `NONE` by both annotators are excluded; `considered_tokens`
/// counts what remains. The confidence interval is `kappa ± 1.96 · SE` with
/// `SE = sqrt(p_o (1 - p_o) / n) / (1 - p_e)`; it is not clamped, so its ends
/// can leave [-1, 1] for small n. The p-value is one-sided against the
/// chance-agreement null, using `SE0 = sqrt(p_e / (n (1 - p_e)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementReport {
    pub granularity: AgreementGranularity,
    pub kappa: f64,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    pub standard_error: f64,
    pub ci95: (f64, f64),
    pub p_value: f64,
    pub considered_tokens: u64,
    pub total_tokens: u64,
    pub examples: u64,
    pub categories: Vec<CategoryAgreement>,
}

fn project_labels(
    example: &AnnotatedExample,
    granularity: AgreementGranularity,
) -> Result<Vec<String>> {
    let labels = project_tokens(&example.question, &example.spans)?;
    Ok(match granularity {
        AgreementGranularity::Target => labels,
        AgreementGranularity::Kind => {
            let mut kinds = vec![NONE_LABEL.to_string(); example.question.tokens.len()];
            for span in &example.spans {
                for (i, token) in example.question.tokens.iter().enumerate() {
                    if token.start < span.end && token.end > span.start {
                        kinds[i] = span.target.kind_str().to_string();
                    }
                }
            }
            kinds
        }
    })
}

fn paired<'a>(
    a: &'a [AnnotatedExample],
    b: &'a [AnnotatedExample],
) -> Result<Vec<(&'a AnnotatedExample, &'a AnnotatedExample)>> {
    if a.len() != b.len() {
        return Err(Error::Alignment(format!(
            "annotation sets differ in size: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    for (i, (ea, eb)) in a.iter().zip(b).enumerate() {
        if ea.question.text != eb.question.text {
            return Err(Error::Alignment(format!(
                "record {}: questions differ: {:?} vs {:?}",
                i + 1,
                ea.question.text,
                eb.question.text
            )));
        }
    }
    Ok(a.iter().zip(b).collect())
}

/// Cohen's kappa between two annotators over the same questions, restricted
/// to tokens that at least one annotator labeled.
pub fn cohen_kappa(
    a: &[AnnotatedExample],
    b: &[AnnotatedExample],
    granularity: AgreementGranularity,
) -> Result<AgreementReport> {
    let pairs = paired(a, b)?;
    let mut total_tokens = 0u64;
    let mut n = 0u64;
    let mut agreements = 0u64;
    let mut marginals_a: BTreeMap<String, u64> = BTreeMap::new();
    let mut marginals_b: BTreeMap<String, u64> = BTreeMap::new();
    let mut agreed: BTreeMap<String, u64> = BTreeMap::new();
    for (ea, eb) in &pairs {
        let labels_a = project_labels(ea, granularity)?;
        let labels_b = project_labels(eb, granularity)?;
        total_tokens += labels_a.len() as u64;
        for (la, lb) in labels_a.into_iter().zip(labels_b) {
            if la == NONE_LABEL && lb == NONE_LABEL {
                continue;
            }
            n += 1;
            if la == lb {
                agreements += 1;
                *agreed.entry(la.clone()).or_insert(0) += 1;
            }
            *marginals_a.entry(la).or_insert(0) += 1;
            *marginals_b.entry(lb).or_insert(0) += 1;
        }
    }
    if n == 0 {
        return Err(Error::UndefinedAgreement(
            "no token was labeled by either annotator".into(),
        ));
    }
    let nf = n as f64;
    let p_o = agreements as f64 / nf;
    let mut p_e = 0.0;
    for (label, ca) in &marginals_a {
        if let Some(cb) = marginals_b.get(label) {
            p_e += (*ca as f64 / nf) * (*cb as f64 / nf);
        }
    }
    if p_e >= 1.0 {
        return Err(Error::UndefinedAgreement(
            "expected agreement is 1, kappa is undefined".into(),
        ));
    }
    let kappa = (p_o - p_e) / (1.0 - p_e);
    let standard_error = (p_o * (1.0 - p_o) / nf).sqrt() / (1.0 - p_e);
    let ci95 = (kappa - 1.96 * standard_error, kappa + 1.96 * standard_error);
    let se_null = (p_e / (nf * (1.0 - p_e))).sqrt();
    // se_null is 0 when the marginals are disjoint (p_e = 0); the null
    // distribution is degenerate at 0, so any positive kappa is certain
    let p_value = if se_null == 0.0 {
        if kappa > 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        1.0 - normal.cdf(kappa / se_null)
    };

    let mut labels: Vec<&String> = marginals_a.keys().chain(marginals_b.keys()).collect();
    labels.sort();
    labels.dedup();
    // NONE is the least interesting row, push it last
    labels.sort_by_key(|l| l.as_str() == NONE_LABEL);
    let categories = labels
        .into_iter()
        .map(|label| CategoryAgreement {
            label: label.clone(),
            count_a: marginals_a.get(label).copied().unwrap_or(0),
            count_b: marginals_b.get(label).copied().unwrap_or(0),
            agreements: agreed.get(label).copied().unwrap_or(0),
        })
        .collect();

    Ok(AgreementReport {
        granularity,
        kappa,
        observed_agreement: p_o,
        expected_agreement: p_e,
        standard_error,
        ci95,
        p_value,
        considered_tokens: n,
        total_tokens,
        examples: pairs.len() as u64,
        categories,
    })
}

/// Micro-averaged span F1 between two annotators (percentage). Symmetric:
/// either side can play gold.
pub fn pairwise_f1(a: &[AnnotatedExample], b: &[AnnotatedExample]) -> Result<f64> {
    let pairs = paired(a, b)?;
    let counts = evaluate_corpus(
        pairs
            .iter()
            .map(|(ea, eb)| (eb.spans.as_slice(), ea.spans.as_slice())),
    );
    Ok(metrics_from_counts(&counts).f1)
}
