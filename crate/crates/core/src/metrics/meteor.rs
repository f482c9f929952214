//! METEOR without the synonym stage.
//!
//! Alignment is a one-to-one matching of candidate and reference unigrams in
//! which every pair is either an exact match or a Porter-stem match. The
//! chosen alignment maximizes exact matches, then total matches, then
//! minimizes the number of chunks (runs of pairs adjacent in both strings).
//! The score is `Fmean * (1 - penalty)` with
//! `Fmean = P R / (alpha P + (1 - alpha) R)` and
//! `penalty = gamma (chunks / matches)^beta`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::porter::stem;
use super::{mean, MetricError, TokenizedCorpus, TokenizedItem};

pub const METEOR_ALPHA: f64 = 0.9;
pub const METEOR_BETA: f64 = 3.0;
pub const METEOR_GAMMA: f64 = 0.5;

/// References longer than this are aligned greedily instead of exactly.
const EXACT_SEARCH_LIMIT: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Alignment {
    pub exact: usize,
    pub matches: usize,
    pub chunks: usize,
}

/// Score for `matches` aligned unigrams in `chunks` chunks.
pub fn meteor_from_counts(matches: usize, chunks: usize, cand_len: usize, ref_len: usize) -> f64 {
    if matches == 0 || cand_len == 0 || ref_len == 0 {
        return 0.0;
    }
    let p = matches as f64 / cand_len as f64;
    let r = matches as f64 / ref_len as f64;
    let fmean = p * r / (METEOR_ALPHA * p + (1.0 - METEOR_ALPHA) * r);
    let frag = chunks as f64 / matches as f64;
    let penalty = METEOR_GAMMA * libm::pow(frag, METEOR_BETA);
    fmean * (1.0 - penalty)
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Stem,
    Exact,
}

/// Lexicographic objective: more exact, more total, fewer chunks.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
struct Objective {
    exact: usize,
    matches: usize,
    neg_chunks: isize,
}

impl Objective {
    fn add(self, o: Objective) -> Objective {
        Objective {
            exact: self.exact + o.exact,
            matches: self.matches + o.matches,
            neg_chunks: self.neg_chunks + o.neg_chunks,
        }
    }
}

struct Search {
    /// For each candidate position, the reference positions it may pair with.
    options: Vec<Vec<(usize, Kind)>>,
    memo: BTreeMap<(usize, u32, usize), Objective>,
}

const NO_PREV: usize = usize::MAX;

impl Search {
    /// Best objective for candidate positions `i..`, given the set of used
    /// reference positions and the reference position paired with `i - 1`.
    fn best(&mut self, i: usize, used: u32, prev: usize) -> Objective {
        if i == self.options.len() {
            return Objective::default();
        }
        if let Some(&hit) = self.memo.get(&(i, used, prev)) {
            return hit;
        }
        let mut best = self.best(i + 1, used, NO_PREV);
        for k in 0..self.options[i].len() {
            let (j, kind) = self.options[i][k];
            if used & (1 << j) != 0 {
                continue;
            }
            let continues = prev != NO_PREV && j == prev + 1;
            let step = Objective {
                exact: usize::from(kind == Kind::Exact),
                matches: 1,
                neg_chunks: if continues { 0 } else { -1 },
            };
            let total = step.add(self.best(i + 1, used | (1 << j), j));
            if total > best {
                best = total;
            }
        }
        self.memo.insert((i, used, prev), best);
        best
    }
}

fn pair_kind(c: &str, c_stem: &str, r: &str, r_stem: &str) -> Option<Kind> {
    if c == r {
        Some(Kind::Exact)
    } else if c_stem == r_stem {
        Some(Kind::Stem)
    } else {
        None
    }
}

/// Best alignment of `cand` against `reference`.
pub fn meteor_alignment(cand: &[String], reference: &[String]) -> Alignment {
    let c_stems: Vec<String> = cand.iter().map(|t| stem(t)).collect();
    let r_stems: Vec<String> = reference.iter().map(|t| stem(t)).collect();
    let options: Vec<Vec<(usize, Kind)>> = cand
        .iter()
        .zip(&c_stems)
        .map(|(c, cs)| {
            reference
                .iter()
                .zip(&r_stems)
                .enumerate()
                .filter_map(|(j, (r, rs))| pair_kind(c, cs, r, rs).map(|k| (j, k)))
                .collect()
        })
        .collect();

    if reference.len() > EXACT_SEARCH_LIMIT {
        return greedy(&options, reference.len());
    }
    let mut search = Search {
        options,
        memo: BTreeMap::new(),
    };
    let best = search.best(0, 0, NO_PREV);
    Alignment {
        exact: best.exact,
        matches: best.matches,
        chunks: best.neg_chunks.unsigned_abs(),
    }
}

/// Exact matches first, then stem matches, each taking the reference
/// position that extends the current chunk when possible, else the first
/// free one.
fn greedy(options: &[Vec<(usize, Kind)>], ref_len: usize) -> Alignment {
    let mut pairs: Vec<Option<usize>> = alloc::vec![None; options.len()];
    let mut used = alloc::vec![false; ref_len];
    let mut exact = 0;
    for stage in [Kind::Exact, Kind::Stem] {
        for i in 0..options.len() {
            if pairs[i].is_some() {
                continue;
            }
            let prev = i.checked_sub(1).and_then(|p| pairs[p]);
            let free = |&&(j, k): &&(usize, Kind)| k == stage && !used[j];
            let pick = options[i]
                .iter()
                .filter(free)
                .find(|(j, _)| prev.is_some_and(|p| *j == p + 1))
                .or_else(|| options[i].iter().find(free));
            if let Some(&(j, k)) = pick {
                pairs[i] = Some(j);
                used[j] = true;
                exact += usize::from(k == Kind::Exact);
            }
        }
    }
    let mut matches = 0;
    let mut chunks = 0;
    let mut prev: Option<usize> = None;
    for p in &pairs {
        match (p, prev) {
            (Some(j), Some(q)) if *j == q + 1 => matches += 1,
            (Some(_), _) => {
                matches += 1;
                chunks += 1;
            }
            (None, _) => {}
        }
        prev = *p;
    }
    Alignment {
        exact,
        matches,
        chunks,
    }
}

/// Best score over the item's references.
pub(crate) fn meteor_item(item: &TokenizedItem) -> f64 {
    item.references
        .iter()
        .map(|r| {
            let a = meteor_alignment(&item.candidate, r);
            meteor_from_counts(a.matches, a.chunks, item.candidate.len(), r.len())
        })
        .fold(0.0, f64::max)
}

pub(crate) fn meteor_items(corpus: &TokenizedCorpus) -> Vec<f64> {
    corpus.items.iter().map(meteor_item).collect()
}

/// Mean per-item METEOR, x100.
pub fn meteor(corpus: &TokenizedCorpus) -> Result<f64, MetricError> {
    if corpus.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    Ok(mean(&meteor_items(corpus)) * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn identical_four_tokens() {
        let t = toks("turn on the music");
        let a = meteor_alignment(&t, &t);
        assert_eq!(a, Alignment { exact: 4, matches: 4, chunks: 1 });
        let s = meteor_from_counts(4, 1, 4, 4);
        assert!((s - (1.0 - 0.5 * 0.015625)).abs() < 1e-15);
        assert!((s * 100.0 - 99.22).abs() < 0.01);
    }

    #[test]
    fn no_alignment() {
        let a = meteor_alignment(&toks("a b"), &toks("c d"));
        assert_eq!(a.matches, 0);
        assert_eq!(meteor_from_counts(0, 0, 2, 2), 0.0);
    }

    #[test]
    fn stem_stage() {
        // running ~ run by stem, fast == fast exactly; one chunk.
        let a = meteor_alignment(&toks("running fast"), &toks("run fast"));
        assert_eq!(a, Alignment { exact: 1, matches: 2, chunks: 1 });
        let s = meteor_from_counts(2, 1, 2, 2);
        assert!((s - (1.0 - 0.5 * 0.125)).abs() < 1e-15);
    }

    #[test]
    fn chunks_are_minimized() {
        // "the cat" can pair with either "the" of the reference; choosing the
        // one before "cat" gives a single chunk.
        let a = meteor_alignment(&toks("the cat"), &toks("the dog the cat"));
        assert_eq!(a, Alignment { exact: 2, matches: 2, chunks: 1 });
        // Reordered words need two chunks.
        let a = meteor_alignment(&toks("b a"), &toks("a b"));
        assert_eq!(a.chunks, 2);
    }

    #[test]
    fn exact_preferred_over_stem() {
        // "run" could stem-match "running", but the exact pair wins.
        let a = meteor_alignment(&toks("run"), &toks("running run"));
        assert_eq!(a, Alignment { exact: 1, matches: 1, chunks: 1 });
    }

    #[test]
    fn long_reference_uses_greedy() {
        let long: Vec<String> = (0..30).map(|i| alloc::format!("w{i}")).collect();
        let a = meteor_alignment(&long[..5], &long);
        assert_eq!(a, Alignment { exact: 5, matches: 5, chunks: 1 });
    }
}
