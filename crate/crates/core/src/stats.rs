//! Ground-truth dataset statistics: per-split counts, caption diversity and
//! the rank/frequency CDF.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("icon {0} has no captions")]
    EmptyCaptionList(String),
    #[error("no captions given")]
    EmptyInput,
    #[error("unknown split tag {0:?}")]
    UnknownSplitTag(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" | "training" => Ok(Split::Train),
            "valid" | "validation" | "val" | "dev" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            _ => Err(StatsError::UnknownSplitTag(s.to_string())),
        }
    }
}

/// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Generator for one keyed draw. Each key gets its own stream, so adding or
/// removing keys never changes the draws for the others.
pub fn keyed_rng(seed: u64, key: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(key.as_bytes()).rotate_left(17))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionPick {
    /// Position of the chosen caption in the icon's caption list.
    pub index: usize,
    pub caption: String,
}

/// Picks one caption per icon uniformly at random.
pub fn pick_one_caption(
    captions_per_icon: &BTreeMap<String, Vec<String>>,
    seed: u64,
) -> Result<BTreeMap<String, CaptionPick>, StatsError> {
    captions_per_icon
        .iter()
        .map(|(icon, captions)| {
            if captions.is_empty() {
                return Err(StatsError::EmptyCaptionList(icon.clone()));
            }
            let index = keyed_rng(seed, icon).random_range(0..captions.len());
            Ok((
                icon.clone(),
                CaptionPick {
                    index,
                    caption: captions[index].clone(),
                },
            ))
        })
        .collect()
}

/// Whether the "rare label" shares count unique labels or occurrences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareBasis {
    #[default]
    UniqueLabels,
    Occurrences,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DiversityOptions {
    pub case_fold: bool,
    pub basis: ShareBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptionDistribution {
    pub total: usize,
    pub unique_count: usize,
    /// Occurrences of the three most frequent labels over all occurrences.
    pub top3_share: f64,
    /// Labels occurring at most four times.
    pub le4_share: f64,
    /// Labels occurring exactly once.
    pub singleton_share: f64,
}

/// Exact-string frequencies after trimming outer whitespace (and optional
/// case folding).
pub fn caption_frequencies<S: AsRef<str>>(
    captions: &[S],
    case_fold: bool,
) -> BTreeMap<String, usize> {
    let mut freq = BTreeMap::new();
    for c in captions {
        let c = c.as_ref().trim();
        let key = if case_fold { c.to_lowercase() } else { c.to_string() };
        *freq.entry(key).or_insert(0) += 1;
    }
    freq
}

pub fn diversity_stats<S: AsRef<str>>(
    captions: &[S],
    opts: &DiversityOptions,
) -> Result<CaptionDistribution, StatsError> {
    if captions.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let freq = caption_frequencies(captions, opts.case_fold);
    let total = captions.len();
    let unique = freq.len();
    let mut counts: Vec<usize> = freq.values().copied().collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let top3: usize = counts.iter().take(3).sum();

    let share = |pred: fn(usize) -> bool| match opts.basis {
        ShareBasis::UniqueLabels => {
            counts.iter().filter(|&&c| pred(c)).count() as f64 / unique as f64
        }
        ShareBasis::Occurrences => {
            counts.iter().filter(|&&c| pred(c)).sum::<usize>() as f64 / total as f64
        }
    };

    Ok(CaptionDistribution {
        total,
        unique_count: unique,
        top3_share: top3 as f64 / total as f64,
        le4_share: share(|c| c <= 4),
        singleton_share: share(|c| c == 1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub rank: usize,
    pub label: String,
    pub count: usize,
    pub cumulative_fraction: f64,
}

/// Labels by descending frequency (ties in lexicographic order) with the
/// cumulative share of occurrences. The last point is exactly 1.0.
pub fn cdf_points<S: AsRef<str>>(
    captions: &[S],
    case_fold: bool,
) -> Result<Vec<CdfPoint>, StatsError> {
    if captions.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut ranked: Vec<(String, usize)> = caption_frequencies(captions, case_fold)
        .into_iter()
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let total = captions.len();
    let mut cum = 0usize;
    Ok(ranked
        .into_iter()
        .enumerate()
        .map(|(i, (label, count))| {
            cum += count;
            CdfPoint {
                rank: i + 1,
                label,
                count,
                cumulative_fraction: cum as f64 / total as f64,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitCounts {
    pub icon_count: usize,
    pub caption_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitSummary {
    pub train: SplitCounts,
    pub valid: SplitCounts,
    pub test: SplitCounts,
}

impl SplitSummary {
    pub fn get(&self, split: Split) -> &SplitCounts {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    fn get_mut(&mut self, split: Split) -> &mut SplitCounts {
        match split {
            Split::Train => &mut self.train,
            Split::Valid => &mut self.valid,
            Split::Test => &mut self.test,
        }
    }

    pub fn total(&self) -> SplitCounts {
        let mut t = SplitCounts::default();
        for s in Split::ALL {
            t.icon_count += self.get(s).icon_count;
            t.caption_count += self.get(s).caption_count;
        }
        t
    }
}

/// Aggregates `(split tag, caption count)` per icon.
pub fn split_counts<'a, I>(icons: I) -> Result<SplitSummary, StatsError>
where
    I: IntoIterator<Item = (&'a str, usize)>,
{
    let mut summary = SplitSummary::default();
    for (tag, captions) in icons {
        let counts = summary.get_mut(tag.parse()?);
        counts.icon_count += 1;
        counts.caption_count += captions;
    }
    Ok(summary)
}
