//! Multi-reference caption metrics: corpus BLEU-1/2, ROUGE-L, METEOR (exact
//! and stem stages), and CIDEr-D. Scores are on a 0-100 scale; CIDEr-D is
//! the usual (x10) consensus score times 100 and can exceed 100.

mod bleu;
mod cider;
mod meteor;
pub mod porter;
mod rouge;
mod tokenize;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use bleu::{bleu, sentence_bleu};
pub use cider::{cider, CiderScores, CIDER_MAX_N, CIDER_SIGMA};
pub use meteor::{meteor, meteor_alignment, meteor_from_counts, Alignment, METEOR_ALPHA, METEOR_BETA, METEOR_GAMMA};
pub use rouge::{lcs_len, rouge_l, ROUGE_BETA};
pub use tokenize::{tokenize, TokenizerConfig};

/// Most references an item may carry.
pub const MAX_REFERENCES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("item {0} has no references")]
    NoReferences(String),
    #[error("item {0} has more than three references")]
    TooManyReferences(String),
    #[error("item {0} has a blank reference")]
    BlankReference(String),
    #[error("BLEU order must be 1 or 2, got {0}")]
    UnsupportedOrder(usize),
}

/// A candidate caption and its human references.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub item_id: String,
    pub candidate: String,
    pub references: Vec<String>,
}

impl CorpusItem {
    pub fn new(
        item_id: impl Into<String>,
        candidate: impl Into<String>,
        references: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        CorpusItem {
            item_id: item_id.into(),
            candidate: candidate.into(),
            references: references.into_iter().map(Into::into).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        if self.references.is_empty() {
            return Err(MetricError::NoReferences(self.item_id.clone()));
        }
        if self.references.len() > MAX_REFERENCES {
            return Err(MetricError::TooManyReferences(self.item_id.clone()));
        }
        if self.references.iter().any(|r| r.trim().is_empty()) {
            return Err(MetricError::BlankReference(self.item_id.clone()));
        }
        Ok(())
    }
}

/// Tokenized form shared by every metric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedItem {
    pub candidate: Vec<String>,
    pub references: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedCorpus {
    pub items: Vec<TokenizedItem>,
}

impl TokenizedCorpus {
    pub fn new(corpus: &[CorpusItem], cfg: &TokenizerConfig) -> Result<Self, MetricError> {
        if corpus.is_empty() {
            return Err(MetricError::EmptyCorpus);
        }
        let items = corpus
            .iter()
            .map(|item| {
                item.validate()?;
                Ok(TokenizedItem {
                    candidate: tokenize(&item.candidate, cfg),
                    references: item.references.iter().map(|r| tokenize(r, cfg)).collect(),
                })
            })
            .collect::<Result<Vec<_>, MetricError>>()?;
        Ok(TokenizedCorpus { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Multiset of the `n`-grams of `tokens`.
pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut counts = BTreeMap::new();
    if n > 0 && tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu1: f64,
    pub bleu2: f64,
    pub rouge_l: f64,
    pub meteor: f64,
    pub cider: f64,
    pub item_count: usize,
    /// Set when CIDEr's document frequencies carry no information (a
    /// one-item corpus), which forces CIDEr to 0.
    pub cider_idf_degenerate: bool,
}

/// Sentence-level scores for one item, same scales as [`MetricReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScores {
    pub item_id: String,
    pub bleu1: f64,
    pub bleu2: f64,
    pub rouge_l: f64,
    pub meteor: f64,
    pub cider: f64,
}

/// Corpus BLEU-`n` with the default tokenizer.
pub fn bleu_n(corpus: &[CorpusItem], n: usize) -> Result<f64, MetricError> {
    bleu(&TokenizedCorpus::new(corpus, &TokenizerConfig::default())?, n)
}

/// Runs every metric on one tokenization of `corpus`.
pub fn evaluate_corpus(
    corpus: &[CorpusItem],
    cfg: &TokenizerConfig,
) -> Result<(MetricReport, Vec<ItemScores>), MetricError> {
    let tc = TokenizedCorpus::new(corpus, cfg)?;
    let cider_scores = cider(&tc)?;
    let rouge_items = rouge::rouge_l_items(&tc);
    let meteor_items = meteor::meteor_items(&tc);

    let report = MetricReport {
        bleu1: bleu(&tc, 1)?,
        bleu2: bleu(&tc, 2)?,
        rouge_l: mean(&rouge_items) * 100.0,
        meteor: mean(&meteor_items) * 100.0,
        cider: cider_scores.corpus,
        item_count: tc.len(),
        cider_idf_degenerate: cider_scores.idf_degenerate,
    };

    let items = corpus
        .iter()
        .zip(&tc.items)
        .enumerate()
        .map(|(i, (item, tok))| ItemScores {
            item_id: item.item_id.clone(),
            bleu1: sentence_bleu(tok, 1),
            bleu2: sentence_bleu(tok, 2),
            rouge_l: rouge_items[i] * 100.0,
            meteor: meteor_items[i] * 100.0,
            cider: cider_scores.items[i],
        })
        .collect();
    Ok((report, items))
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}
