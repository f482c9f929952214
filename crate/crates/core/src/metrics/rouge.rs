use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{mean, MetricError, TokenizedCorpus, TokenizedItem};

pub const ROUGE_BETA: f64 = 1.2;

/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE-L for one item. Precision and recall are each maximized over the
/// references before forming the F-measure, as in the COCO caption scorer.
pub(crate) fn rouge_l_item(item: &TokenizedItem) -> f64 {
    if item.candidate.is_empty() {
        return 0.0;
    }
    let mut best_p: f64 = 0.0;
    let mut best_r: f64 = 0.0;
    for r in &item.references {
        if r.is_empty() {
            continue;
        }
        let lcs = lcs_len(&item.candidate, r) as f64;
        best_p = best_p.max(lcs / item.candidate.len() as f64);
        best_r = best_r.max(lcs / r.len() as f64);
    }
    if best_p == 0.0 || best_r == 0.0 {
        return 0.0;
    }
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * best_p * best_r / (best_r + b2 * best_p)
}

pub(crate) fn rouge_l_items(corpus: &TokenizedCorpus) -> Vec<f64> {
    corpus.items.iter().map(rouge_l_item).collect()
}

/// Mean per-item ROUGE-L, x100.
pub fn rouge_l(corpus: &TokenizedCorpus) -> Result<f64, MetricError> {
    if corpus.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    Ok(mean(&rouge_l_items(corpus)) * 100.0)
}
