//! Table and line-record files read and written by the pipeline.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use alttext_core::metrics::{CorpusItem, ItemScores, MetricReport};
use alttext_core::prompt::{ClassCount, FineTuneRecord};
use alttext_core::stats::{CaptionDistribution, CdfPoint, Split, SplitSummary};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}:{line}: {reason}")]
    Record {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> FormatError + '_ {
    move |source| FormatError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, FormatError> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    rdr.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(csv_err(path))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), FormatError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes headers even when `rows` is empty.
fn write_csv_with_header<T: Serialize>(
    path: &Path,
    header: &[&str],
    rows: &[T],
) -> Result<(), FormatError> {
    if !rows.is_empty() {
        return write_csv(path, rows);
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, FormatError> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| FormatError::Record {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), FormatError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    for r in rows {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

// ---------------------------------------------------------------- icons

/// One detected icon and its crop in screenshot pixels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IconRow {
    pub screen_id: String,
    pub node_path: String,
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl IconRow {
    pub fn icon_id(&self) -> String {
        icon_id(&self.screen_id, &self.node_path)
    }
}

pub fn icon_id(screen_id: &str, node_path: &str) -> String {
    format!("{screen_id}/{node_path}")
}

pub fn read_icons(path: &Path) -> Result<Vec<IconRow>, FormatError> {
    read_csv(path)
}

pub fn write_icons(path: &Path, rows: &[IconRow]) -> Result<(), FormatError> {
    write_csv_with_header(path, &["screen_id", "node_path", "x", "y", "w", "h"], rows)
}

/// Counts from one detection pass.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectStats {
    pub screens: usize,
    pub parse_errors: usize,
    pub class_matches: usize,
    pub rejected_by_shape: usize,
    pub empty_crops: usize,
    pub candidates: usize,
    /// Share of class matches rejected by the shape filter.
    pub removal_fraction: f64,
}

pub fn write_detect_stats(path: &Path, s: &DetectStats) -> Result<(), FormatError> {
    write_csv(path, std::slice::from_ref(s))
}

// -------------------------------------------------------------- dataset

/// One caption of one icon.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DatasetRow {
    pub icon_id: String,
    pub screen_id: String,
    pub node_path: String,
    pub split: String,
    pub caption: String,
}

/// All captions of one icon, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetIcon {
    pub screen_id: String,
    pub node_path: String,
    pub split: Split,
    pub captions: Vec<String>,
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRow>, FormatError> {
    read_csv(path)
}

pub fn write_dataset(path: &Path, rows: &[DatasetRow]) -> Result<(), FormatError> {
    write_csv_with_header(path, &["icon_id", "screen_id", "node_path", "split", "caption"], rows)
}

/// Groups caption rows by icon. An icon listed under two split tags is an
/// error, as is an unknown tag.
pub fn group_dataset(
    rows: &[DatasetRow],
    path: &Path,
) -> Result<BTreeMap<String, DatasetIcon>, FormatError> {
    let mut out: BTreeMap<String, DatasetIcon> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        let bad = |reason: String| FormatError::Record {
            path: path.to_path_buf(),
            line: i + 2,
            reason,
        };
        let split: Split = r.split.parse().map_err(|e| bad(format!("{e}")))?;
        let entry = out.entry(r.icon_id.clone()).or_insert_with(|| DatasetIcon {
            screen_id: r.screen_id.clone(),
            node_path: r.node_path.clone(),
            split,
            captions: Vec::new(),
        });
        if entry.split != split {
            return Err(bad(format!("icon {} appears in two splits", r.icon_id)));
        }
        if !r.caption.trim().is_empty() {
            entry.captions.push(r.caption.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct Wc20Row {
    #[serde(rename = "screenId")]
    screen_id: String,
    #[serde(rename = "nodeId")]
    node_id: String,
    captions: String,
}

/// Caption table of the widget-caption release: `(screen_id, node_path)`
/// to the `|`-separated captions, blanks dropped.
pub fn read_wc20_captions(
    path: &Path,
) -> Result<BTreeMap<(String, String), Vec<String>>, FormatError> {
    let rows: Vec<Wc20Row> = read_csv(path)?;
    let mut out: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
    for r in rows {
        let caps = r
            .captions
            .split('|')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(String::from);
        out.entry((r.screen_id.trim().to_string(), r.node_id.trim().to_string()))
            .or_default()
            .extend(caps);
    }
    Ok(out)
}

/// Screen id to split, from `split/{train,dev,test}_screens.txt` style
/// files: every `*_screens.txt` in `dir`, tag taken from the file name.
pub fn read_wc20_splits(dir: &Path) -> Result<BTreeMap<String, Split>, FormatError> {
    let mut out = BTreeMap::new();
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with("_screens.txt"))
        })
        .collect();
    files.sort();
    for f in files {
        let name = f.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let tag = name.trim_end_matches("_screens.txt");
        let split: Split = tag.parse().map_err(|e| FormatError::Record {
            path: f.clone(),
            line: 0,
            reason: format!("{e}"),
        })?;
        let text = fs::read_to_string(&f).map_err(io_err(&f))?;
        for id in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            out.insert(id.to_string(), split);
        }
    }
    Ok(out)
}

/// Caption list from a text file (one per line) or a CSV with a
/// `caption` column.
pub fn read_captions(path: &Path) -> Result<Vec<String>, FormatError> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
        let headers = rdr.headers().map_err(csv_err(path))?.clone();
        let col = headers.iter().position(|h| h == "caption").ok_or_else(|| FormatError::Record {
            path: path.to_path_buf(),
            line: 1,
            reason: "no caption column".into(),
        })?;
        let mut out = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err(path))?;
            out.push(rec.get(col).unwrap_or_default().to_string());
        }
        return Ok(out);
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(String::from)
        .collect())
}

// -------------------------------------------------------------- results

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultStatus {
    Ok,
    Failed,
}

/// Outcome of annotating one icon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationResult {
    pub icon_id: String,
    pub screen_id: String,
    pub node_path: String,
    pub status: ResultStatus,
    #[serde(default)]
    pub icon_label: Option<String>,
    #[serde(default)]
    pub ocr_texts: Vec<String>,
    #[serde(default)]
    pub prompt: Option<String>,
    #[serde(default)]
    pub alt_text: Option<String>,
    #[serde(default)]
    pub error: Option<String>,
}

pub fn read_results(path: &Path) -> Result<Vec<AnnotationResult>, FormatError> {
    read_jsonl(path)
}

pub fn write_results(path: &Path, rows: &[AnnotationResult]) -> Result<(), FormatError> {
    write_jsonl(path, rows)
}

// ------------------------------------------------------------ fine-tune

/// Validates every record before writing anything.
pub fn emit_finetune_file(path: &Path, records: &[FineTuneRecord]) -> Result<(), FormatError> {
    for (i, r) in records.iter().enumerate() {
        r.validate().map_err(|e| FormatError::Record {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
    }
    write_jsonl(path, records)
}

pub fn read_finetune_file(path: &Path) -> Result<Vec<FineTuneRecord>, FormatError> {
    read_jsonl(path)
}

pub fn write_class_counts(path: &Path, rows: &[ClassCount]) -> Result<(), FormatError> {
    #[derive(Serialize)]
    struct Row<'a> {
        class: &'a str,
        available: usize,
        selected: usize,
    }
    let rows: Vec<Row<'_>> = rows
        .iter()
        .map(|r| Row {
            class: &r.class,
            available: r.available,
            selected: r.selected,
        })
        .collect();
    write_csv_with_header(path, &["class", "available", "selected"], &rows)
}

// ---------------------------------------------------------------- corpus

/// Reads `.jsonl` records of `{item_id, candidate, references}` or a CSV
/// with `item_id`, `candidate` and one or more `reference*` columns.
pub fn read_corpus(path: &Path) -> Result<Vec<CorpusItem>, FormatError> {
    let is_jsonl = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("jsonl") || e.eq_ignore_ascii_case("json"));
    if is_jsonl {
        return read_jsonl(path);
    }
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let missing = |col: &str| FormatError::Record {
        path: path.to_path_buf(),
        line: 1,
        reason: format!("no {col} column"),
    };
    let id_col = find("item_id").ok_or_else(|| missing("item_id"))?;
    let cand_col = find("candidate").ok_or_else(|| missing("candidate"))?;
    let ref_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("ref"))
        .map(|(i, _)| i)
        .collect();
    if ref_cols.is_empty() {
        return Err(missing("reference"));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        let refs: Vec<String> = ref_cols
            .iter()
            .filter_map(|&i| rec.get(i))
            .filter(|r| !r.trim().is_empty())
            .map(String::from)
            .collect();
        out.push(CorpusItem::new(
            rec.get(id_col).unwrap_or_default(),
            rec.get(cand_col).unwrap_or_default(),
            refs,
        ));
    }
    Ok(out)
}

pub fn write_corpus_csv(path: &Path, items: &[CorpusItem]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["item_id", "candidate", "reference_1", "reference_2", "reference_3"])
        .map_err(csv_err(path))?;
    for it in items {
        let mut rec = vec![it.item_id.as_str(), it.candidate.as_str()];
        for i in 0..3 {
            rec.push(it.references.get(i).map_or("", String::as_str));
        }
        w.write_record(rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

// ---------------------------------------------------------------- report

fn report_rows(r: &MetricReport) -> [(&'static str, f64); 5] {
    [
        ("BLEU-1", r.bleu1),
        ("BLEU-2", r.bleu2),
        ("ROUGE-L", r.rouge_l),
        ("METEOR", r.meteor),
        ("CIDEr", r.cider),
    ]
}

pub fn write_report_csv(path: &Path, r: &MetricReport) -> Result<(), FormatError> {
    #[derive(Serialize)]
    struct Row {
        metric: &'static str,
        value: String,
    }
    let mut rows: Vec<Row> = report_rows(r)
        .into_iter()
        .map(|(metric, v)| Row {
            metric,
            value: format!("{v:.4}"),
        })
        .collect();
    rows.push(Row {
        metric: "items",
        value: r.item_count.to_string(),
    });
    write_csv(path, &rows)
}

/// Fixed-width table for the terminal.
pub fn format_report_table(r: &MetricReport) -> String {
    let mut s = String::new();
    let rows = report_rows(r);
    s.push_str(&rows.iter().map(|(m, _)| format!("{m:>8}")).collect::<Vec<_>>().join(" "));
    s.push('\n');
    s.push_str(&rows.iter().map(|(_, v)| format!("{v:>8.1}")).collect::<Vec<_>>().join(" "));
    s.push('\n');
    s.push_str(&format!("({} items", r.item_count));
    if r.cider_idf_degenerate {
        s.push_str("; CIDEr undefined for a single item");
    }
    s.push_str(")\n");
    s
}

pub fn write_item_scores(path: &Path, items: &[ItemScores]) -> Result<(), FormatError> {
    #[derive(Serialize)]
    struct Row<'a> {
        item_id: &'a str,
        bleu1: String,
        bleu2: String,
        rouge_l: String,
        meteor: String,
        cider: String,
    }
    let f = |v: f64| format!("{v:.4}");
    let rows: Vec<Row<'_>> = items
        .iter()
        .map(|i| Row {
            item_id: &i.item_id,
            bleu1: f(i.bleu1),
            bleu2: f(i.bleu2),
            rouge_l: f(i.rouge_l),
            meteor: f(i.meteor),
            cider: f(i.cider),
        })
        .collect();
    write_csv(path, &rows)
}

// ----------------------------------------------------------------- stats

pub fn write_split_summary(path: &Path, rows: &[(&str, SplitSummary)]) -> Result<(), FormatError> {
    #[derive(Serialize)]
    struct Row<'a> {
        variant: &'a str,
        train: usize,
        valid: usize,
        test: usize,
        total: usize,
    }
    let rows: Vec<Row<'_>> = rows
        .iter()
        .flat_map(|(name, s)| {
            let icons = Row {
                variant: "icons",
                train: s.train.icon_count,
                valid: s.valid.icon_count,
                test: s.test.icon_count,
                total: s.total().icon_count,
            };
            let caps = Row {
                variant: name,
                train: s.train.caption_count,
                valid: s.valid.caption_count,
                test: s.test.caption_count,
                total: s.total().caption_count,
            };
            [icons, caps]
        })
        .collect();
    write_csv(path, &rows)
}

pub fn write_diversity(path: &Path, rows: &[(&str, CaptionDistribution)]) -> Result<(), FormatError> {
    #[derive(Serialize)]
    struct Row<'a> {
        corpus: &'a str,
        captions: usize,
        unique: usize,
        top3_share: String,
        le4_share: String,
        singleton_share: String,
    }
    let rows: Vec<Row<'_>> = rows
        .iter()
        .map(|(name, d)| Row {
            corpus: name,
            captions: d.total,
            unique: d.unique_count,
            top3_share: format!("{:.4}", d.top3_share),
            le4_share: format!("{:.4}", d.le4_share),
            singleton_share: format!("{:.4}", d.singleton_share),
        })
        .collect();
    write_csv(path, &rows)
}

pub fn write_cdf(path: &Path, points: &[CdfPoint]) -> Result<(), FormatError> {
    #[derive(Serialize)]
    struct Row<'a> {
        rank: usize,
        label: &'a str,
        count: usize,
        cumulative_fraction: f64,
    }
    let rows: Vec<Row<'_>> = points
        .iter()
        .map(|p| Row {
            rank: p.rank,
            label: &p.label,
            count: p.count,
            cumulative_fraction: p.cumulative_fraction,
        })
        .collect();
    write_csv(path, &rows)
}
