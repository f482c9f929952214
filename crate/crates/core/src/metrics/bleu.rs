use super::{ngram_counts, MetricError, TokenizedCorpus, TokenizedItem};

/// Clipped n-gram matches and candidate n-gram total for one item.
fn clipped(item: &TokenizedItem, n: usize) -> (usize, usize) {
    let cand = ngram_counts(&item.candidate, n);
    let refs: alloc::vec::Vec<_> = item.references.iter().map(|r| ngram_counts(r, n)).collect();
    let mut matched = 0;
    let mut total = 0;
    for (gram, &count) in &cand {
        let max_ref = refs
            .iter()
            .map(|r| r.get(gram).copied().unwrap_or(0))
            .max()
            .unwrap_or(0);
        matched += count.min(max_ref);
        total += count;
    }
    (matched, total)
}

/// Reference length closest to the candidate length; ties go to the shorter.
fn closest_ref_len(item: &TokenizedItem) -> usize {
    let c = item.candidate.len();
    item.references
        .iter()
        .map(|r| r.len())
        .min_by_key(|&len| (len.abs_diff(c), len))
        .unwrap_or(0)
}

/// `BP * exp(mean_k ln p_k)` over orders `1..=n`, x100.
fn combine(matched: &[usize], totals: &[usize], cand_len: usize, ref_len: usize) -> f64 {
    if cand_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for (&m, &t) in matched.iter().zip(totals) {
        if m == 0 || t == 0 {
            return 0.0;
        }
        log_sum += libm::log(m as f64 / t as f64);
    }
    let bp = if cand_len > ref_len {
        1.0
    } else {
        libm::exp(1.0 - ref_len as f64 / cand_len as f64)
    };
    bp * libm::exp(log_sum / matched.len() as f64) * 100.0
}

/// Corpus-level BLEU-`n` (n = 1 or 2): clipped counts and lengths are summed
/// over all items before the precisions and brevity penalty are formed.
pub fn bleu(corpus: &TokenizedCorpus, n: usize) -> Result<f64, MetricError> {
    if !(1..=2).contains(&n) {
        return Err(MetricError::UnsupportedOrder(n));
    }
    if corpus.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let mut matched = [0usize; 2];
    let mut totals = [0usize; 2];
    let (mut c, mut r) = (0usize, 0usize);
    for item in &corpus.items {
        for k in 1..=n {
            let (m, t) = clipped(item, k);
            matched[k - 1] += m;
            totals[k - 1] += t;
        }
        c += item.candidate.len();
        r += closest_ref_len(item);
    }
    Ok(combine(&matched[..n], &totals[..n], c, r))
}

/// BLEU-`n` of a single item (no smoothing), x100.
pub fn sentence_bleu(item: &TokenizedItem, n: usize) -> f64 {
    let n = n.clamp(1, 4);
    let mut matched = [0usize; 4];
    let mut totals = [0usize; 4];
    for k in 1..=n {
        let (m, t) = clipped(item, k);
        matched[k - 1] = m;
        totals[k - 1] = t;
    }
    combine(
        &matched[..n],
        &totals[..n],
        item.candidate.len(),
        closest_ref_len(item),
    )
}
