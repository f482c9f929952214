//! CIDEr-D: TF-IDF weighted n-gram cosine similarity with clipping and a
//! Gaussian length penalty. Document frequencies come from the evaluation
//! corpus's own reference sets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::{mean, ngram_counts, MetricError, TokenizedCorpus};

pub const CIDER_MAX_N: usize = 4;
pub const CIDER_SIGMA: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CiderScores {
    /// Corpus score: 100 x mean item score.
    pub corpus: f64,
    /// Per-item scores on the same scale as `corpus`.
    pub items: Vec<f64>,
    /// True for a one-item corpus, where every IDF weight is zero.
    pub idf_degenerate: bool,
}

type Gram<'a> = &'a [String];

/// TF-IDF vector per n-gram order plus its L2 norms.
struct Weighted<'a> {
    vecs: Vec<BTreeMap<Gram<'a>, f64>>,
    norms: Vec<f64>,
}

fn weigh<'a>(tokens: &'a [String], df: &BTreeMap<Gram<'a>, usize>, log_n: f64) -> Weighted<'a> {
    let mut vecs = Vec::with_capacity(CIDER_MAX_N);
    let mut norms = Vec::with_capacity(CIDER_MAX_N);
    for n in 1..=CIDER_MAX_N {
        let mut v = BTreeMap::new();
        let mut sq = 0.0;
        for (gram, tf) in ngram_counts(tokens, n) {
            let d = df.get(gram).copied().unwrap_or(0).max(1) as f64;
            let w = tf as f64 * (log_n - libm::log(d));
            sq += w * w;
            v.insert(gram, w);
        }
        vecs.push(v);
        norms.push(libm::sqrt(sq));
    }
    Weighted { vecs, norms }
}

fn similarity(cand: &Weighted<'_>, cand_len: usize, r: &Weighted<'_>, ref_len: usize) -> f64 {
    let delta = cand_len as f64 - ref_len as f64;
    let penalty = libm::exp(-(delta * delta) / (2.0 * CIDER_SIGMA * CIDER_SIGMA));
    let mut total = 0.0;
    for n in 0..CIDER_MAX_N {
        let mut val = 0.0;
        for (gram, &wc) in &cand.vecs[n] {
            if let Some(&wr) = r.vecs[n].get(gram) {
                val += wc.min(wr) * wr;
            }
        }
        if cand.norms[n] != 0.0 && r.norms[n] != 0.0 {
            val /= cand.norms[n] * r.norms[n];
        }
        total += val * penalty;
    }
    total / CIDER_MAX_N as f64
}

pub fn cider(corpus: &TokenizedCorpus) -> Result<CiderScores, MetricError> {
    if corpus.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let mut df: BTreeMap<Gram<'_>, usize> = BTreeMap::new();
    for item in &corpus.items {
        let mut seen: BTreeSet<Gram<'_>> = BTreeSet::new();
        for r in &item.references {
            for n in 1..=CIDER_MAX_N {
                seen.extend(ngram_counts(r, n).into_keys());
            }
        }
        for gram in seen {
            *df.entry(gram).or_insert(0) += 1;
        }
    }
    let log_n = libm::log(corpus.len() as f64);

    let items: Vec<f64> = corpus
        .items
        .iter()
        .map(|item| {
            let cand = weigh(&item.candidate, &df, log_n);
            let sims: Vec<f64> = item
                .references
                .iter()
                .map(|r| similarity(&cand, item.candidate.len(), &weigh(r, &df, log_n), r.len()))
                .collect();
            mean(&sims) * 10.0 * 100.0
        })
        .collect();

    Ok(CiderScores {
        corpus: mean(&items),
        items,
        idf_degenerate: corpus.len() == 1,
    })
}
