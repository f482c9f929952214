//! Brute-force reference implementations of the caption metrics, written
//! directly from the metric definitions with plain vectors and exhaustive
//! enumeration. They share no code with the library's metric module apart
//! from the Porter stemmer (a fixed word-level function, not a metric).
//!
//! Inputs are pre-tokenized: one candidate and its references per item.

#![allow(dead_code)]

use alttext_core::metrics::porter::stem;

pub type Tokens = Vec<String>;

#[derive(Debug, Clone)]
pub struct Item {
    pub cand: Tokens,
    pub refs: Vec<Tokens>,
}

fn ngrams(t: &[String], n: usize) -> Vec<Vec<String>> {
    if t.len() < n {
        return Vec::new();
    }
    (0..=t.len() - n).map(|i| t[i..i + n].to_vec()).collect()
}

fn count(list: &[Vec<String>], g: &[String]) -> usize {
    list.iter().filter(|x| x.as_slice() == g).count()
}

fn distinct(list: &[Vec<String>]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = Vec::new();
    for g in list {
        if !out.contains(g) {
            out.push(g.clone());
        }
    }
    out
}

// ---------------------------------------------------------------- BLEU

/// Corpus BLEU-n x100: modified precision with clipping to the maximum
/// reference count, summed over the corpus; geometric mean over orders;
/// brevity penalty against the summed best-match reference lengths.
pub fn bleu(items: &[Item], n: usize) -> f64 {
    let mut log_p = 0.0;
    for k in 1..=n {
        let mut num = 0usize;
        let mut den = 0usize;
        for it in items {
            let cg = ngrams(&it.cand, k);
            den += cg.len();
            for g in distinct(&cg) {
                let c = count(&cg, &g);
                let m = it
                    .refs
                    .iter()
                    .map(|r| count(&ngrams(r, k), &g))
                    .max()
                    .unwrap_or(0);
                num += c.min(m);
            }
        }
        if num == 0 || den == 0 {
            return 0.0;
        }
        log_p += (num as f64 / den as f64).ln() / n as f64;
    }
    let c: usize = items.iter().map(|i| i.cand.len()).sum();
    if c == 0 {
        return 0.0;
    }
    let mut r = 0usize;
    for it in items {
        // best match length: smallest |len - c|, shorter wins ties
        let mut best: Option<usize> = None;
        for rf in &it.refs {
            let l = rf.len();
            best = match best {
                None => Some(l),
                Some(b) => {
                    let (db, dl) = (b.abs_diff(it.cand.len()), l.abs_diff(it.cand.len()));
                    if dl < db || (dl == db && l < b) {
                        Some(l)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        r += best.unwrap_or(0);
    }
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    100.0 * bp * log_p.exp()
}

// ------------------------------------------------------------- ROUGE-L

fn is_subsequence(sub: &[&String], of: &[String]) -> bool {
    let mut it = of.iter();
    sub.iter().all(|s| it.any(|o| o == *s))
}

/// LCS length by enumerating every subsequence of `a`.
pub fn lcs_brute(a: &[String], b: &[String]) -> usize {
    assert!(a.len() <= 20, "exhaustive LCS only for short inputs");
    let mut best = 0;
    for mask in 0u32..(1u32 << a.len()) {
        let sub: Vec<&String> = (0..a.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &a[i])
            .collect();
        if sub.len() > best && is_subsequence(&sub, b) {
            best = sub.len();
        }
    }
    best
}

/// Mean ROUGE-L x100, beta = 1.2; per item precision and recall are each
/// the maximum over references.
pub fn rouge_l(items: &[Item]) -> f64 {
    let beta2 = 1.2f64 * 1.2;
    let mut sum = 0.0;
    for it in items {
        let mut p: f64 = 0.0;
        let mut r: f64 = 0.0;
        for rf in &it.refs {
            if it.cand.is_empty() || rf.is_empty() {
                continue;
            }
            let l = lcs_brute(&it.cand, rf) as f64;
            p = p.max(l / it.cand.len() as f64);
            r = r.max(l / rf.len() as f64);
        }
        if p > 0.0 && r > 0.0 {
            sum += (1.0 + beta2) * p * r / (r + beta2 * p);
        }
    }
    100.0 * sum / items.len() as f64
}

// -------------------------------------------------------------- METEOR

/// Every one-to-one matching between `c` and `r` whose pairs are exact or
/// stem matches; returns the best (exact, matches, -chunks).
fn best_alignment(c: &[String], r: &[String]) -> (usize, usize, usize) {
    fn rec(
        i: usize,
        c: &[String],
        r: &[String],
        used: &mut Vec<bool>,
        pairs: &mut Vec<(usize, usize)>,
        best: &mut (usize, usize, isize),
    ) {
        if i == c.len() {
            let exact = pairs.iter().filter(|(a, b)| c[*a] == r[*b]).count();
            let m = pairs.len();
            let mut chunks = 0isize;
            for (k, &(a, b)) in pairs.iter().enumerate() {
                let joined = k > 0 && pairs[k - 1].0 + 1 == a && pairs[k - 1].1 + 1 == b;
                if !joined {
                    chunks += 1;
                }
            }
            let score = (exact, m, -chunks);
            if score > *best {
                *best = score;
            }
            return;
        }
        rec(i + 1, c, r, used, pairs, best);
        for j in 0..r.len() {
            if used[j] {
                continue;
            }
            if c[i] == r[j] || stem(&c[i]) == stem(&r[j]) {
                used[j] = true;
                pairs.push((i, j));
                rec(i + 1, c, r, used, pairs, best);
                pairs.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (0, 0, 0isize);
    rec(0, c, r, &mut vec![false; r.len()], &mut Vec::new(), &mut best);
    (best.0, best.1, (-best.2) as usize)
}

pub fn meteor_counts(c: &[String], r: &[String]) -> (usize, usize) {
    let (_, m, ch) = best_alignment(c, r);
    (m, ch)
}

fn meteor_sentence(c: &[String], r: &[String]) -> f64 {
    let (m, ch) = meteor_counts(c, r);
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / c.len() as f64;
    let rc = m as f64 / r.len() as f64;
    // alpha = 0.9 weights precision in the harmonic mean
    let f = p * rc / (0.9 * p + 0.1 * rc);
    let pen = 0.5 * (ch as f64 / m as f64).powi(3);
    f * (1.0 - pen)
}

pub fn meteor(items: &[Item]) -> f64 {
    let mut sum = 0.0;
    for it in items {
        let best = it
            .refs
            .iter()
            .map(|r| meteor_sentence(&it.cand, r))
            .fold(0.0, f64::max);
        sum += best;
    }
    100.0 * sum / items.len() as f64
}

// --------------------------------------------------------------- CIDEr-D

/// Corpus CIDEr-D on the 100x scale (reported value = 100 x the x10 score).
pub fn cider(items: &[Item]) -> (f64, Vec<f64>) {
    let n_docs = items.len() as f64;
    // document frequency: number of items whose reference set has the n-gram
    let df = |g: &[String]| -> f64 {
        items
            .iter()
            .filter(|it| it.refs.iter().any(|r| count(&ngrams(r, g.len()), g) > 0))
            .count() as f64
    };
    let vector = |t: &[String], n: usize| -> Vec<(Vec<String>, f64)> {
        let gs = ngrams(t, n);
        distinct(&gs)
            .into_iter()
            .map(|g| {
                let tf = count(&gs, &g) as f64;
                let w = tf * (n_docs.ln() - df(&g).max(1.0).ln());
                (g, w)
            })
            .collect()
    };
    let weight_of = |v: &[(Vec<String>, f64)], g: &[String]| {
        v.iter().find(|(x, _)| x.as_slice() == g).map(|(_, w)| *w)
    };
    let norm = |v: &[(Vec<String>, f64)]| v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();

    let mut scores = Vec::new();
    for it in items {
        let mut per_ref = Vec::new();
        for rf in &it.refs {
            let delta = it.cand.len() as f64 - rf.len() as f64;
            let gauss = (-(delta * delta) / (2.0 * 36.0)).exp();
            let mut acc = 0.0;
            for n in 1..=4 {
                let vc = vector(&it.cand, n);
                let vr = vector(rf, n);
                let mut dot = 0.0;
                for (g, wc) in &vc {
                    if let Some(wr) = weight_of(&vr, g) {
                        dot += wc.min(wr) * wr;
                    }
                }
                let (nc, nr) = (norm(&vc), norm(&vr));
                if nc != 0.0 && nr != 0.0 {
                    dot /= nc * nr;
                }
                acc += dot * gauss;
            }
            per_ref.push(acc / 4.0);
        }
        let s = per_ref.iter().sum::<f64>() / per_ref.len() as f64;
        scores.push(s * 10.0 * 100.0);
    }
    let corpus = scores.iter().sum::<f64>() / scores.len() as f64;
    (corpus, scores)
}

// ------------------------------------------------------- random corpora

use alttext_core::CorpusItem;
use rand::{Rng, RngCore};

/// Small vocabulary with shared stems so the METEOR stem stage is exercised.
pub const WORDS: &[&str] = &[
    "turn", "on", "the", "music", "play", "playing", "played", "run", "running", "button",
    "open", "menu", "close", "search", "a", "b",
];

fn random_caption<R: RngCore>(rng: &mut R) -> Tokens {
    let len = rng.random_range(1..=5);
    (0..len)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())].to_string())
        .collect()
}

/// Up to `max_items` items, each with 1-5 token captions and 1-3 references.
pub fn random_items<R: RngCore>(rng: &mut R, max_items: usize) -> Vec<Item> {
    let n = rng.random_range(1..=max_items);
    (0..n)
        .map(|_| {
            let cand = random_caption(rng);
            let refs = (0..rng.random_range(1..=3)).map(|_| random_caption(rng)).collect();
            Item { cand, refs }
        })
        .collect()
}

pub fn to_corpus(items: &[Item]) -> Vec<CorpusItem> {
    items
        .iter()
        .enumerate()
        .map(|(i, it)| {
            CorpusItem::new(
                format!("i{i}"),
                it.cand.join(" "),
                it.refs.iter().map(|r| r.join(" ")),
            )
        })
        .collect()
}
