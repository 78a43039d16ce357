//! Corpus-level analysis: label statistics, metric correlations, and
//! database-disjoint splits.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::AnnotatedExample;

/// Which targets a statistics row counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetStratum {
    All,
    Table,
    Column,
}

/// Which span lengths (in tokens) a statistics row counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthStratum {
    All,
    Single,
    Multi,
}

pub const TARGET_STRATA: [TargetStratum; 3] = [
    TargetStratum::All,
    TargetStratum::Table,
    TargetStratum::Column,
];
pub const LENGTH_STRATA: [LengthStratum; 3] = [
    LengthStratum::All,
    LengthStratum::Single,
    LengthStratum::Multi,
];

/// Aggregates of per-sentence label counts for one stratum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StratumStats {
    /// Total labels over the corpus.
    pub labels: u64,
    /// Largest per-sentence count.
    pub max: u64,
    /// Smallest per-sentence count.
    pub min: u64,
    /// Mean per-sentence count.
    pub avg: f64,
    /// Population standard deviation of per-sentence counts.
    pub std: f64,
}

/// Label statistics over a corpus, stratified by target kind and span length.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelStats {
    pub sentences: u64,
    strata: [[StratumStats; 3]; 3],
}

impl LabelStats {
    pub fn stratum(&self, target: TargetStratum, length: LengthStratum) -> &StratumStats {
        &self.strata[target_index(target)][length_index(length)]
    }
}

fn target_index(t: TargetStratum) -> usize {
    match t {
        TargetStratum::All => 0,
        TargetStratum::Table => 1,
        TargetStratum::Column => 2,
    }
}

fn length_index(l: LengthStratum) -> usize {
    match l {
        LengthStratum::All => 0,
        LengthStratum::Single => 1,
        LengthStratum::Multi => 2,
    }
}

/// Computes per-sentence label statistics. Every sentence participates in
/// every stratum, contributing zero where it has no matching labels; the
/// standard deviation is the population form. Errors on an empty corpus.
pub fn dataset_stats(examples: &[AnnotatedExample]) -> Result<LabelStats> {
    if examples.is_empty() {
        return Err(Error::Input(
            "cannot compute statistics of zero examples".into(),
        ));
    }
    let n = examples.len() as f64;
    let mut per_sentence = vec![[[0u64; 3]; 3]; examples.len()];
    for (i, example) in examples.iter().enumerate() {
        for span in &example.spans {
            let t_idx = if span.target.is_column() { 2 } else { 1 };
            let l_idx = if span.token_length == 1 { 1 } else { 2 };
            for ti in [0, t_idx] {
                for li in [0, l_idx] {
                    per_sentence[i][ti][li] += 1;
                }
            }
        }
    }
    let empty = StratumStats {
        labels: 0,
        max: 0,
        min: 0,
        avg: 0.0,
        std: 0.0,
    };
    let mut strata = [[empty; 3]; 3];
    for ti in 0..3 {
        for li in 0..3 {
            let counts = per_sentence.iter().map(|s| s[ti][li]);
            let total: u64 = counts.clone().sum();
            let max = counts.clone().max().unwrap_or(0);
            let min = counts.clone().min().unwrap_or(0);
            let avg = total as f64 / n;
            let var = counts.map(|c| (c as f64 - avg).powi(2)).sum::<f64>() / n;
            strata[ti][li] = StratumStats {
                labels: total,
                max,
                min,
                avg,
                std: var.sqrt(),
            };
        }
    }
    Ok(LabelStats {
        sentences: examples.len() as u64,
        strata,
    })
}

// ---------------------------------------------------------------------------
// Correlation

/// Pearson correlation with a two-sided t-test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationResult {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Pearson's r between two series, with the two-sided p-value of the exact
/// t-test (`t = r sqrt(n-2) / sqrt(1 - r^2)` on n-2 degrees of freedom).
/// Errors on mismatched lengths, fewer than 3 points, non-finite values, or
/// a constant series.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult> {
    if xs.len() != ys.len() {
        return Err(Error::UndefinedCorrelation(format!(
            "series lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 3 points, got {n}"
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::UndefinedCorrelation(
            "non-finite value in input".into(),
        ));
    }
    let nf = n as f64;
    let mean_x = xs.iter().sum::<f64>() / nf;
    let mean_y = ys.iter().sum::<f64>() / nf;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "a series is constant, correlation is undefined".into(),
        ));
    }
    let r = (cov / (var_x.sqrt() * var_y.sqrt())).clamp(-1.0, 1.0);
    let df = nf - 2.0;
    let p_value = if 1.0 - r * r <= f64::EPSILON {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Ok(CorrelationResult { r, p_value, n })
}

// ---------------------------------------------------------------------------
// Database-disjoint splitting

/// A two-way partition of examples with no database shared across sides.
/// Indices refer to the input order; `imbalance` is the difference in
/// example counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub dev_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub dev_dbs: Vec<String>,
    pub test_dbs: Vec<String>,
    pub imbalance: u64,
}

/// The exact subset-sum search is affordable up to this many databases;
/// beyond it a seeded greedy split takes over.
pub const EXACT_SPLIT_MAX_DBS: usize = 30;

/// Splits examples into two sides with disjoint databases, balancing example
/// counts. With at most [`EXACT_SPLIT_MAX_DBS`] databases the split is
/// optimal (exact subset-sum); otherwise largest-first greedy. The seed
/// shuffles database order, breaking ties deterministically.
pub fn split_no_db_overlap(examples: &[AnnotatedExample], seed: u64) -> Result<SplitPlan> {
    if examples.is_empty() {
        return Err(Error::Split("cannot split zero examples".into()));
    }
    let mut by_db: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, example) in examples.iter().enumerate() {
        let db = example.db_id.as_deref().ok_or_else(|| {
            Error::Split(format!(
                "example {} ({:?}) carries no database identifier",
                i + 1,
                example.question.text
            ))
        })?;
        by_db.entry(db).or_default().push(i);
    }
    if by_db.len() < 2 {
        return Err(Error::Split(
            "need at least 2 distinct databases to form disjoint sides".into(),
        ));
    }
    let mut dbs: Vec<&str> = by_db.keys().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    dbs.shuffle(&mut rng);
    let counts: Vec<usize> = dbs.iter().map(|db| by_db[db].len()).collect();
    let total: usize = counts.iter().sum();

    let chosen: Vec<bool> = if dbs.len() <= EXACT_SPLIT_MAX_DBS {
        exact_partition(&counts, total)
    } else {
        greedy_partition(&counts)
    };

    let side_sum: usize = counts
        .iter()
        .zip(&chosen)
        .filter(|(_, c)| **c)
        .map(|(n, _)| n)
        .sum();
    // dev is the smaller (or equal) side
    let dev_flag = side_sum * 2 <= total;
    let mut dev_dbs = Vec::new();
    let mut test_dbs = Vec::new();
    for (db, on_side) in dbs.iter().zip(&chosen) {
        if *on_side == dev_flag {
            dev_dbs.push((*db).to_string());
        } else {
            test_dbs.push((*db).to_string());
        }
    }
    dev_dbs.sort();
    test_dbs.sort();
    let collect = |names: &[String]| {
        let mut indices: Vec<usize> = names
            .iter()
            .flat_map(|db| by_db[db.as_str()].iter().copied())
            .collect();
        indices.sort_unstable();
        indices
    };
    let dev_indices = collect(&dev_dbs);
    let test_indices = collect(&test_dbs);
    let imbalance = dev_indices.len().abs_diff(test_indices.len()) as u64;
    Ok(SplitPlan {
        dev_indices,
        test_indices,
        dev_dbs,
        test_dbs,
        imbalance,
    })
}

/// Exact subset-sum: marks a subset whose example count is as close to half
/// the total as possible. Ties prefer the smaller sum.
fn exact_partition(counts: &[usize], total: usize) -> Vec<bool> {
    // parent[s] = (item index, previous sum) for the first way found to reach s
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; total + 1];
    let mut reachable = vec![false; total + 1];
    reachable[0] = true;
    for (i, &c) in counts.iter().enumerate() {
        for s in (0..=total.saturating_sub(c)).rev() {
            if reachable[s] && !reachable[s + c] {
                reachable[s + c] = true;
                parent[s + c] = Some((i, s));
            }
        }
    }
    let best = (0..=total)
        .filter(|s| reachable[*s])
        .min_by_key(|s| (total.abs_diff(2 * s), *s))
        .expect("sum 0 is always reachable");
    let mut chosen = vec![false; counts.len()];
    let mut s = best;
    while s > 0 {
        let (i, prev) = parent[s].expect("reachable sums have parents");
        chosen[i] = true;
        s = prev;
    }
    chosen
}

/// Largest-first greedy: each database joins the currently lighter side.
fn greedy_partition(counts: &[usize]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(counts[i]));
    let mut chosen = vec![false; counts.len()];
    let (mut sum_a, mut sum_b) = (0usize, 0usize);
    for i in order {
        if sum_a <= sum_b {
            chosen[i] = true;
            sum_a += counts[i];
        } else {
            sum_b += counts[i];
        }
    }
    chosen
}
