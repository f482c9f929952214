//! The pipeline commands behind the CLI subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use alttext_core::icon::{calibrate_shape_filter, detect_icons_in, is_icon_class, CropRect};
use alttext_core::metrics::{ItemScores, MetricError, MetricReport, MAX_REFERENCES};
use alttext_core::prompt::{class_counts, ClassCount, LabeledIcon};
use alttext_core::stats::{
    cdf_points, diversity_stats, pick_one_caption, split_counts, DiversityOptions, ShareBasis,
    Split, StatsError,
};
use alttext_core::vh::NodePath;
use alttext_core::{
    assign_class, build_prompt, evaluate_corpus, extract_context, parse_screen,
    sample_finetune_set, serialize_context, Bounds, ClassVocab, CorpusItem, FineTuneRecord,
    Screen, ShapeFilterConfig,
};
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, PipelineConfig};
use crate::formats::{
    self, AnnotationResult, DatasetRow, DetectStats, FormatError, IconRow, ResultStatus,
};
use crate::imageio;
use crate::manifest::{
    now_unix_ms, redact, sha256_hex, sidecar_path, IconRecord, LoggedCall, ProviderStats,
    RunManifest, RunTimes,
};
use crate::providers::{
    generate_alttext, label_icon, ocr_icon, upscale_icon, Backend, Budget, CallRecord, Fixtures,
    HttpBackend, MockBackend, ProviderClient, ProviderConfig, ProviderError, ProviderKind,
    ResponseCache, Transport,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Input(String),
    #[error("no references for {} item(s), first: {}", .0.len(), .0[0])]
    MissingReference(Vec<String>),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("fetch failed: {0}")]
    Fetch(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 4,
            _ => 1,
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |e| PipelineError::Io(format!("{}: {e}", path.display()))
}

/// Process outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    /// Some icons failed.
    Partial,
    /// A spend limit stopped the run.
    BudgetHalt,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Partial => 2,
            ExitStatus::BudgetHalt => 3,
        }
    }
}

fn file_digest(path: &Path) -> Result<String, PipelineError> {
    Ok(sha256_hex(&fs::read(path).map_err(io_error(path))?))
}

// ================================================================ detect

/// Caption table and split lists of the widget-caption release.
#[derive(Debug, Clone)]
pub struct Wc20Paths {
    pub captions_csv: PathBuf,
    pub splits_dir: PathBuf,
}

#[derive(Debug, Clone, Default)]
pub struct DetectOptions {
    /// Restrict detection to captioned nodes and emit a dataset manifest.
    pub wc20: Option<Wc20Paths>,
    /// Tune the shape filter to reject this share of class matches.
    pub calibrate_target: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DetectSummary {
    pub icons: Vec<IconRow>,
    pub stats: DetectStats,
    pub shape_filter: ShapeFilterConfig,
    pub dataset: Option<Vec<DatasetRow>>,
}

fn screen_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, PipelineError> {
    let mut out: Vec<(String, PathBuf)> = fs::read_dir(dir)
        .map_err(io_error(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .filter_map(|p| Some((p.file_stem()?.to_str()?.to_string(), p)))
        .collect();
    out.sort();
    Ok(out)
}

fn load_screen(path: &Path, screen_id: &str) -> Result<Screen, String> {
    let raw = fs::read_to_string(path).map_err(|e| e.to_string())?;
    parse_screen(&raw, screen_id).map_err(|e| e.to_string())
}

fn screenshot_dims(cfg: &PipelineConfig, screen: &Screen) -> (u32, u32) {
    imageio::find_screenshot(&cfg.paths.screenshots_dir, &screen.screen_id)
        .and_then(|p| imageio::dimensions(&p))
        .unwrap_or(screen.screen_dims)
}

/// Runs the icon filters over every screen and writes `icons.csv` and
/// `detect_stats.csv` (plus `dataset.csv` for a caption join).
pub fn cmd_detect(cfg: &PipelineConfig, opts: &DetectOptions) -> Result<DetectSummary, PipelineError> {
    cfg.ensure_dirs()?;
    let files = screen_files(&cfg.paths.screens_dir)?;

    let wc20 = match &opts.wc20 {
        Some(p) => Some((
            formats::read_wc20_captions(&p.captions_csv)?,
            formats::read_wc20_splits(&p.splits_dir)?,
        )),
        None => None,
    };
    let keep = |screen_id: &str, path: &str| -> bool {
        match &wc20 {
            None => true,
            Some((caps, splits)) => {
                splits.contains_key(screen_id)
                    && caps.contains_key(&(screen_id.to_string(), path.to_string()))
            }
        }
    };

    let mut screens = Vec::new();
    let mut parse_errors = 0;
    for (id, path) in &files {
        match load_screen(path, id) {
            Ok(s) => screens.push(s),
            Err(e) => {
                log::warn!("skipping screen {id}: {e}");
                parse_errors += 1;
            }
        }
    }

    let mut shape_filter = cfg.shape_filter;
    if let Some(target) = opts.calibrate_target {
        let mut pool: Vec<(Bounds, (u32, u32))> = Vec::new();
        for s in &screens {
            for (path, node) in paths_of(s) {
                if is_icon_class(&node.class_name) && keep(&s.screen_id, &path) {
                    pool.push((node.bounds, s.screen_dims));
                }
            }
        }
        let cal = calibrate_shape_filter(&pool, &cfg.shape_filter, target);
        log::info!(
            "calibrated shape filter: scale {:.4}, removal {:.4}",
            cal.scale,
            cal.removal_fraction
        );
        shape_filter = cal.config;
    }

    let mut stats = DetectStats {
        screens: files.len(),
        parse_errors,
        ..DetectStats::default()
    };
    let mut icons = Vec::new();
    let mut dataset = wc20.as_ref().map(|_| Vec::new());
    for s in &screens {
        let shot = screenshot_dims(cfg, s);
        let kept = detect_icons_in(s, &shape_filter, shot);
        let considered: Vec<String> = paths_of(s)
            .into_iter()
            .filter(|(p, n)| is_icon_class(&n.class_name) && keep(&s.screen_id, p))
            .map(|(p, _)| p)
            .collect();
        stats.class_matches += considered.len();
        for c in &kept.candidates {
            let path = c.node_path.to_string();
            if !keep(&s.screen_id, &path) {
                continue;
            }
            icons.push(IconRow {
                screen_id: s.screen_id.clone(),
                node_path: path.clone(),
                x: c.crop_rect.x,
                y: c.crop_rect.y,
                w: c.crop_rect.w,
                h: c.crop_rect.h,
            });
            if let (Some(rows), Some((caps, splits))) = (dataset.as_mut(), wc20.as_ref()) {
                let split = splits[&s.screen_id];
                for cap in &caps[&(s.screen_id.clone(), path.clone())] {
                    rows.push(DatasetRow {
                        icon_id: formats::icon_id(&s.screen_id, &path),
                        screen_id: s.screen_id.clone(),
                        node_path: path.clone(),
                        split: split.as_str().to_string(),
                        caption: cap.clone(),
                    });
                }
            }
        }
        let kept_here = icons.iter().filter(|r| r.screen_id == s.screen_id).count();
        let shape_ok_here = considered
            .iter()
            .filter(|p| {
                let node = s.node_at(&NodePath::parse(p).expect("own path")).expect("own node");
                alttext_core::shape_ok(&node.bounds, s.screen_dims, &shape_filter)
            })
            .count();
        stats.rejected_by_shape += considered.len() - shape_ok_here;
        stats.empty_crops += shape_ok_here - kept_here;
    }
    stats.candidates = icons.len();
    stats.removal_fraction = if stats.class_matches == 0 {
        0.0
    } else {
        stats.rejected_by_shape as f64 / stats.class_matches as f64
    };

    formats::write_icons(&cfg.output("icons.csv"), &icons)?;
    formats::write_detect_stats(&cfg.output("detect_stats.csv"), &stats)?;
    if opts.calibrate_target.is_some() {
        let text = toml::to_string(&shape_filter).expect("shape filter serializes");
        let path = cfg.output("shape_filter.toml");
        fs::write(&path, text).map_err(io_error(&path))?;
    }
    if let Some(rows) = &dataset {
        formats::write_dataset(&cfg.output("dataset.csv"), rows)?;
    }
    Ok(DetectSummary {
        icons,
        stats,
        shape_filter,
        dataset,
    })
}

/// Every node with its path, in pre-order.
fn paths_of(s: &Screen) -> Vec<(String, &alttext_core::UiNode)> {
    fn walk<'a>(n: &'a alttext_core::UiNode, path: NodePath, out: &mut Vec<(String, &'a alttext_core::UiNode)>) {
        out.push((path.to_string(), n));
        for (i, c) in n.children.iter().enumerate() {
            walk(c, path.child(i), out);
        }
    }
    let mut out = Vec::new();
    walk(&s.root, NodePath::root(), &mut out);
    out
}

// ============================================================== providers

/// The four provider handles used by `annotate`.
pub struct Providers {
    pub upscaler: Option<ProviderClient>,
    pub ocr: Option<ProviderClient>,
    pub vision: Option<ProviderClient>,
    pub chat: Option<ProviderClient>,
}

impl Providers {
    /// Remote clients from the configuration, or fixture-backed clients in
    /// mock mode. Mock responses are cached apart from real ones.
    pub fn build(cfg: &PipelineConfig, transport: Arc<dyn Transport>) -> Result<Self, PipelineError> {
        let shared = cfg.annotate.budget_usd.map(|b| Arc::new(Budget::new(Some(b))));
        if cfg.annotate.mock {
            let fixtures = match &cfg.paths.fixtures {
                Some(p) => Fixtures::load(p).map_err(|e| {
                    ConfigError::Invalid(format!("fixtures {}: {e}", p.display()))
                })?,
                None => Fixtures::default(),
            };
            let backend: Arc<dyn Backend> = Arc::new(MockBackend::new(Arc::new(fixtures)));
            let cache = ResponseCache::new(cfg.paths.cache_dir.join("mock"));
            let make = |kind: ProviderKind| {
                let pc = cfg
                    .providers
                    .get(&kind)
                    .cloned()
                    .unwrap_or_else(|| ProviderConfig::new(kind, "mock://", "mock"));
                let price = cfg.prices.0.get(&pc.model_name).copied().unwrap_or_default();
                Some(ProviderClient::new(pc, backend.clone(), Some(cache.clone()), price, shared.clone()))
            };
            return Ok(Providers {
                upscaler: make(ProviderKind::Upscaler),
                ocr: make(ProviderKind::Ocr),
                vision: make(ProviderKind::VisionLabeler),
                chat: make(ProviderKind::ChatLlm),
            });
        }
        let cache = ResponseCache::new(&cfg.paths.cache_dir);
        let make = |kind: ProviderKind| {
            cfg.providers.get(&kind).map(|pc| {
                let key = HttpBackend::key_from_env(pc.api_key_env.as_deref());
                let backend = Arc::new(HttpBackend::new(&pc.endpoint, key, transport.clone()));
                ProviderClient::new(
                    pc.clone(),
                    backend,
                    Some(cache.clone()),
                    cfg.prices.get(&pc.model_name),
                    shared.clone(),
                )
            })
        };
        let p = Providers {
            upscaler: make(ProviderKind::Upscaler),
            ocr: make(ProviderKind::Ocr),
            vision: make(ProviderKind::VisionLabeler),
            chat: make(ProviderKind::ChatLlm),
        };
        if p.vision.is_none() {
            return Err(ConfigError::Invalid("providers.vision_labeler is not configured".into()).into());
        }
        if p.chat.is_none() && !cfg.annotate.prompts_only {
            return Err(ConfigError::Invalid("providers.chat_llm is not configured".into()).into());
        }
        if p.ocr.is_none() {
            log::warn!("no OCR provider configured; contexts will carry no OCR text");
        }
        Ok(p)
    }

    fn each(&self) -> impl Iterator<Item = &ProviderClient> {
        [&self.upscaler, &self.ocr, &self.vision, &self.chat]
            .into_iter()
            .flatten()
    }

    /// Backend attempts across all providers.
    pub fn attempts(&self) -> usize {
        self.each().map(ProviderClient::attempts).sum()
    }

    fn stats(&self) -> BTreeMap<ProviderKind, ProviderStats> {
        self.each()
            .map(|c| {
                (
                    c.kind(),
                    ProviderStats {
                        attempts: c.attempts(),
                        cache_hits: c.cache_hits(),
                        charged_usd: c.charged_usd(),
                        peak_in_flight: c.limiter().peak(),
                    },
                )
            })
            .collect()
    }
}

// =============================================================== annotate

/// Hooks for stopping a run early.
#[derive(Debug, Clone, Default)]
pub struct AnnotateOptions {
    /// Checked before each icon is started.
    pub cancel: Option<Arc<AtomicBool>>,
    /// Stop starting new icons once this many have finished.
    pub stop_after: Option<usize>,
}

#[derive(Debug)]
pub struct AnnotateSummary {
    pub results: Vec<AnnotationResult>,
    pub manifest: RunManifest,
    pub status: ExitStatus,
    pub interrupted: bool,
}

struct Outcome {
    result: AnnotationResult,
    record: IconRecord,
    budget_halt: bool,
}

struct IconFailure {
    error: ProviderErrorOr,
}

enum ProviderErrorOr {
    Provider(ProviderError),
    Other(String),
}

impl From<ProviderError> for IconFailure {
    fn from(e: ProviderError) -> Self {
        IconFailure { error: ProviderErrorOr::Provider(e) }
    }
}

impl From<String> for IconFailure {
    fn from(e: String) -> Self {
        IconFailure { error: ProviderErrorOr::Other(e) }
    }
}

fn log_call(calls: &mut Vec<LoggedCall>, rec: CallRecord, resp_body: serde_json::Value) {
    calls.push(LoggedCall {
        call: rec,
        response: redact(&resp_body),
    });
}

/// Parsed screens shared by the workers.
struct ScreenCache<'a> {
    cfg: &'a PipelineConfig,
    loaded: Mutex<BTreeMap<String, Arc<Result<Screen, String>>>>,
}

impl ScreenCache<'_> {
    fn get(&self, screen_id: &str) -> Arc<Result<Screen, String>> {
        if let Some(s) = self.loaded.lock().expect("screen cache").get(screen_id) {
            return s.clone();
        }
        let path = self.cfg.paths.screens_dir.join(format!("{screen_id}.json"));
        let parsed = Arc::new(load_screen(&path, screen_id));
        self.loaded
            .lock()
            .expect("screen cache")
            .entry(screen_id.to_string())
            .or_insert(parsed)
            .clone()
    }
}

struct Progress {
    label: Option<String>,
    ocr_texts: Vec<String>,
    context_digest: Option<String>,
    prompt: Option<String>,
    alt_text: Option<String>,
    calls: Vec<LoggedCall>,
    warnings: Vec<String>,
}

fn annotate_icon(
    cfg: &PipelineConfig,
    providers: &Providers,
    screens: &ScreenCache<'_>,
    row: &IconRow,
    p: &mut Progress,
) -> Result<(), IconFailure> {
    let screen = screens.get(&row.screen_id);
    let screen = screen.as_ref().as_ref().map_err(|e| format!("screen {}: {e}", row.screen_id))?;
    let path = NodePath::parse(&row.node_path).ok_or_else(|| format!("bad node path {}", row.node_path))?;
    let node = screen
        .node_at(&path)
        .ok_or_else(|| format!("no node {} in screen {}", row.node_path, row.screen_id))?;

    let shot_path = imageio::find_screenshot(&cfg.paths.screenshots_dir, &row.screen_id)
        .ok_or_else(|| format!("no screenshot for screen {}", row.screen_id))?;
    let shot = imageio::load(&shot_path).map_err(|e| e.to_string())?;
    let crop = shot
        .crop(&CropRect { x: row.x, y: row.y, w: row.w, h: row.h })
        .map_err(|e| format!("crop {}: {e}", row.icon_id()))?;

    let (icon, rec) = upscale_icon(providers.upscaler.as_ref(), &crop)?;
    if let Some(rec) = rec {
        log_call(&mut p.calls, rec, serde_json::json!({ "width": icon.width(), "height": icon.height() }));
    }

    if let Some(ocr) = &providers.ocr {
        match ocr_icon(ocr, &icon, cfg.annotate.ocr_min_confidence) {
            Ok((res, rec)) => {
                p.ocr_texts = res.texts();
                log_call(&mut p.calls, rec, serde_json::to_value(&res).expect("ocr serializes"));
            }
            Err(e @ ProviderError::BudgetExceeded { .. }) => return Err(e.into()),
            Err(e) => p.warnings.push(format!("OCR skipped: {e}")),
        }
    }

    let vision = providers.vision.as_ref().ok_or_else(|| "no vision labeler".to_string())?;
    let (label, rec) = label_icon(vision, &icon)?;
    log_call(&mut p.calls, rec, serde_json::json!({ "label": label.label }));
    p.label = Some(label.label.clone());

    let (ctx, warning) = extract_context(screen, node, &p.ocr_texts).map_err(|e| e.to_string())?;
    if let Some(w) = warning {
        p.warnings.push(format!("{w:?}"));
    }
    let context = serialize_context(&ctx);
    p.context_digest = Some(sha256_hex(context.as_bytes()));
    let prompt = build_prompt(&label.label, &context).map_err(|e| e.to_string())?;
    p.prompt = Some(prompt.clone());

    if cfg.annotate.prompts_only {
        return Ok(());
    }
    let chat = providers.chat.as_ref().ok_or_else(|| "no chat provider".to_string())?;
    let alt = generate_alttext(chat, &prompt)?;
    log_call(&mut p.calls, alt.record, serde_json::json!({ "text": alt.text }));
    p.alt_text = Some(alt.text);
    Ok(())
}

fn run_one(cfg: &PipelineConfig, providers: &Providers, screens: &ScreenCache<'_>, row: &IconRow) -> Outcome {
    let mut p = Progress {
        label: None,
        ocr_texts: Vec::new(),
        context_digest: None,
        prompt: None,
        alt_text: None,
        calls: Vec::new(),
        warnings: Vec::new(),
    };
    let outcome = annotate_icon(cfg, providers, screens, row, &mut p);
    let (status, error, budget_halt) = match outcome {
        Ok(()) => (ResultStatus::Ok, None, false),
        Err(IconFailure { error }) => {
            let halt = matches!(error, ProviderErrorOr::Provider(ProviderError::BudgetExceeded { .. }));
            let msg = match error {
                ProviderErrorOr::Provider(e) => e.to_string(),
                ProviderErrorOr::Other(e) => e,
            };
            log::warn!("{}: {msg}", row.icon_id());
            (ResultStatus::Failed, Some(msg), halt)
        }
    };
    let prompt_digest = p.prompt.as_deref().map(|t| sha256_hex(t.as_bytes()));
    Outcome {
        result: AnnotationResult {
            icon_id: row.icon_id(),
            screen_id: row.screen_id.clone(),
            node_path: row.node_path.clone(),
            status,
            icon_label: p.label.clone(),
            ocr_texts: p.ocr_texts,
            prompt: p.prompt,
            alt_text: p.alt_text.clone(),
            error: error.clone(),
        },
        record: IconRecord {
            icon_id: row.icon_id(),
            status,
            context_digest: p.context_digest,
            icon_label: p.label,
            prompt_digest,
            alt_text: p.alt_text,
            calls: p.calls,
            warnings: p.warnings,
            error,
        },
        budget_halt,
    }
}

/// Annotates every icon of `icons_csv`, writing `results.jsonl`,
/// `run_manifest.json` and its timing sidecar to the output directory.
/// A rerun reuses cached provider responses, so an interrupted run resumes
/// where it stopped.
pub fn cmd_annotate(
    cfg: &PipelineConfig,
    icons_csv: &Path,
    providers: &Providers,
    opts: &AnnotateOptions,
) -> Result<AnnotateSummary, PipelineError> {
    cfg.ensure_dirs()?;
    let started = now_unix_ms();
    let rows = formats::read_icons(icons_csv)?;
    let mut inputs = BTreeMap::new();
    inputs.insert("icons".to_string(), file_digest(icons_csv)?);
    if let (true, Some(f)) = (cfg.annotate.mock, &cfg.paths.fixtures) {
        inputs.insert("fixtures".to_string(), file_digest(f)?);
    }
    let mut manifest = RunManifest::new("annotate", cfg, inputs);

    let screens = ScreenCache {
        cfg,
        loaded: Mutex::new(BTreeMap::new()),
    };
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let halted = AtomicBool::new(false);
    let slots: Mutex<Vec<Option<Outcome>>> = Mutex::new((0..rows.len()).map(|_| None).collect());

    let workers = cfg.annotate.workers.max(1).min(rows.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let cancelled = opts.cancel.as_ref().is_some_and(|c| c.load(Ordering::SeqCst));
                if stop.load(Ordering::SeqCst) || cancelled {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= rows.len() {
                    break;
                }
                let out = run_one(cfg, providers, &screens, &rows[i]);
                if out.budget_halt {
                    halted.store(true, Ordering::SeqCst);
                    stop.store(true, Ordering::SeqCst);
                }
                slots.lock().expect("result slots")[i] = Some(out);
                let n = done.fetch_add(1, Ordering::SeqCst) + 1;
                if opts.stop_after.is_some_and(|k| n >= k) {
                    stop.store(true, Ordering::SeqCst);
                }
            });
        }
    });

    let budget_halt = halted.load(Ordering::SeqCst);
    let outcomes: Vec<Outcome> = slots
        .into_inner()
        .expect("result slots")
        .into_iter()
        .flatten()
        // icons refused for budget are not results; a rerun with more
        // budget picks them up
        .filter(|o| !o.budget_halt)
        .collect();
    let interrupted = outcomes.len() < rows.len() && !budget_halt;

    let results: Vec<AnnotationResult> = outcomes.iter().map(|o| o.result.clone()).collect();
    let records: Vec<IconRecord> = outcomes.into_iter().map(|o| o.record).collect();
    let any_failed = records.iter().any(|r| r.status == ResultStatus::Failed);
    manifest.finish(
        records,
        budget_halt.then(|| "spend limit reached".to_string()),
    );

    formats::write_results(&cfg.output("results.jsonl"), &results)?;
    let manifest_path = cfg.output("run_manifest.json");
    manifest.write(&manifest_path).map_err(io_error(&manifest_path))?;
    let times = RunTimes {
        run_id: manifest.run_id.clone(),
        started_unix_ms: started,
        finished_unix_ms: now_unix_ms(),
        interrupted,
        providers: providers.stats(),
    };
    let side = sidecar_path(&manifest_path);
    times.write(&side).map_err(io_error(&side))?;

    let status = if budget_halt {
        ExitStatus::BudgetHalt
    } else if any_failed {
        ExitStatus::Partial
    } else {
        ExitStatus::Success
    };
    Ok(AnnotateSummary {
        results,
        manifest,
        status,
        interrupted,
    })
}


// ========================================================== finetune-prep

#[derive(Debug, Clone)]
pub struct FinetuneSummary {
    pub pool: usize,
    pub records: Vec<FineTuneRecord>,
    pub class_counts: Vec<ClassCount>,
}

fn load_vocab(cfg: &PipelineConfig) -> Result<ClassVocab, PipelineError> {
    match &cfg.finetune.vocab {
        Some(p) => Ok(ClassVocab::from_lines(&fs::read_to_string(p).map_err(io_error(p))?)),
        None => Ok(ClassVocab::rico_icons()),
    }
}

/// Builds the chat-format fine-tune file from annotated training icons:
/// one seeded caption per icon, a class from its icon label, then at most
/// `cap_per_class` icons per class.
pub fn cmd_finetune_prep(
    cfg: &PipelineConfig,
    results_path: &Path,
    dataset_path: &Path,
) -> Result<FinetuneSummary, PipelineError> {
    cfg.ensure_dirs()?;
    let vocab = load_vocab(cfg)?;
    let results = formats::read_results(results_path)?;
    let dataset = formats::group_dataset(&formats::read_dataset(dataset_path)?, dataset_path)?;

    let train: BTreeMap<String, Vec<String>> = dataset
        .iter()
        .filter(|(_, d)| d.split == Split::Train && !d.captions.is_empty())
        .map(|(id, d)| (id.clone(), d.captions.clone()))
        .collect();
    let picks = pick_one_caption(&train, cfg.seeds.caption_pick)?;

    let mut prompts: BTreeMap<&str, &str> = BTreeMap::new();
    let mut pool = Vec::new();
    for r in &results {
        let (Some(pick), Some(label), Some(prompt)) =
            (picks.get(&r.icon_id), r.icon_label.as_deref(), r.prompt.as_deref())
        else {
            continue;
        };
        prompts.insert(&r.icon_id, prompt);
        pool.push(LabeledIcon {
            icon_id: r.icon_id.clone(),
            class: assign_class(label, &vocab).to_string(),
            caption: pick.caption.clone(),
        });
    }
    pool.sort_by(|a, b| a.icon_id.cmp(&b.icon_id));
    pool.dedup_by(|a, b| a.icon_id == b.icon_id);
    if pool.len() < train.len() {
        log::warn!(
            "{} training icons have no prompt in {}",
            train.len() - pool.len(),
            results_path.display()
        );
    }

    let selected = sample_finetune_set(&pool, cfg.finetune.cap_per_class, cfg.seeds.finetune);
    let records = selected
        .iter()
        .map(|s| FineTuneRecord::new(prompts[s.icon_id.as_str()], &s.caption))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| PipelineError::Input(e.to_string()))?;
    let counts = class_counts(&pool, &selected, &vocab);

    formats::emit_finetune_file(&cfg.output("finetune.jsonl"), &records)?;
    formats::write_class_counts(&cfg.output("class_counts.csv"), &counts)?;
    #[derive(serde::Serialize)]
    struct PickRow<'a> {
        icon_id: &'a str,
        index: usize,
        caption: &'a str,
    }
    let pick_rows: Vec<PickRow<'_>> = picks
        .iter()
        .map(|(id, p)| PickRow {
            icon_id: id,
            index: p.index,
            caption: &p.caption,
        })
        .collect();
    formats::write_csv(&cfg.output("caption_picks.csv"), &pick_rows)?;
    Ok(FinetuneSummary {
        pool: pool.len(),
        records,
        class_counts: counts,
    })
}

// =============================================================== evaluate

/// What to score.
#[derive(Debug, Clone)]
pub enum EvalInput {
    /// Candidates and references in one file.
    Corpus(PathBuf),
    /// Generated alt-text scored against the dataset captions.
    Results { results: PathBuf, references: PathBuf },
}

/// Scores the candidates, writing `metrics_summary.csv` and
/// `metrics_items.csv`.
pub fn cmd_evaluate(
    cfg: &PipelineConfig,
    input: &EvalInput,
) -> Result<(MetricReport, Vec<ItemScores>), PipelineError> {
    cfg.ensure_dirs()?;
    let corpus = match input {
        EvalInput::Corpus(p) => formats::read_corpus(p)?,
        EvalInput::Results { results, references } => {
            let refs = formats::group_dataset(&formats::read_dataset(references)?, references)?;
            let mut missing = Vec::new();
            let mut corpus = Vec::new();
            for r in formats::read_results(results)? {
                let Some(text) = r.alt_text.as_deref().filter(|_| r.status == ResultStatus::Ok) else {
                    log::warn!("{}: no alt text, not scored", r.icon_id);
                    continue;
                };
                match refs.get(&r.icon_id).filter(|d| !d.captions.is_empty()) {
                    Some(d) => {
                        if d.captions.len() > MAX_REFERENCES {
                            log::debug!("{}: scoring against the first {MAX_REFERENCES} captions", r.icon_id);
                        }
                        corpus.push(CorpusItem::new(
                            r.icon_id.clone(),
                            text,
                            d.captions.iter().take(MAX_REFERENCES).cloned(),
                        ));
                    }
                    None => missing.push(r.icon_id.clone()),
                }
            }
            if !missing.is_empty() {
                return Err(PipelineError::MissingReference(missing));
            }
            corpus
        }
    };
    let (report, items) = evaluate_corpus(&corpus, &cfg.tokenizer)?;
    formats::write_report_csv(&cfg.output("metrics_summary.csv"), &report)?;
    formats::write_item_scores(&cfg.output("metrics_items.csv"), &items)?;
    Ok((report, items))
}

// ================================================================== stats

#[derive(Debug, Clone, Default)]
pub struct StatsInput {
    /// Dataset manifest for split counts and caption diversity.
    pub dataset: Option<PathBuf>,
    /// Further caption lists, each reported under its file stem.
    pub captions: Vec<PathBuf>,
    pub case_fold: bool,
    pub basis: ShareBasis,
}

#[derive(Debug, Clone)]
pub struct StatsSummary {
    pub splits: Vec<(String, alttext_core::stats::SplitSummary)>,
    pub diversity: Vec<(String, alttext_core::stats::CaptionDistribution)>,
}

/// Split tallies, caption diversity and frequency CDFs. Writes
/// `stats_splits.csv`, `stats_diversity.csv` and one `cdf_<name>.csv` per
/// caption corpus.
pub fn cmd_stats(cfg: &PipelineConfig, input: &StatsInput) -> Result<StatsSummary, PipelineError> {
    cfg.ensure_dirs()?;
    let opts = DiversityOptions {
        case_fold: input.case_fold,
        basis: input.basis,
    };
    let mut corpora: Vec<(String, Vec<String>)> = Vec::new();
    let mut splits = Vec::new();
    if let Some(path) = &input.dataset {
        let icons = formats::group_dataset(&formats::read_dataset(path)?, path)?;
        let all = split_counts(icons.values().map(|d| (d.split.as_str(), d.captions.len())))?;
        let with_caps: BTreeMap<String, Vec<String>> = icons
            .iter()
            .filter(|(_, d)| !d.captions.is_empty())
            .map(|(id, d)| (id.clone(), d.captions.clone()))
            .collect();
        let picks = pick_one_caption(&with_caps, cfg.seeds.caption_pick)?;
        let one = split_counts(picks.keys().map(|id| (icons[id].split.as_str(), 1)))?;
        splits.push(("all_captions".to_string(), all));
        splits.push(("one_caption".to_string(), one));
        corpora.push((
            "all_captions".to_string(),
            icons.values().flat_map(|d| d.captions.iter().cloned()).collect(),
        ));
        corpora.push((
            "one_caption".to_string(),
            picks.into_values().map(|p| p.caption).collect(),
        ));
    }
    for path in &input.captions {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "captions".to_string());
        corpora.push((name, formats::read_captions(path)?));
    }
    if corpora.is_empty() {
        return Err(PipelineError::Input("stats needs a dataset or a caption file".into()));
    }

    let mut diversity = Vec::new();
    for (name, caps) in &corpora {
        diversity.push((name.clone(), diversity_stats(caps, &opts)?));
        let cdf = cdf_points(caps, input.case_fold)?;
        formats::write_cdf(&cfg.output(&format!("cdf_{name}.csv")), &cdf)?;
    }
    if !splits.is_empty() {
        let rows: Vec<(&str, _)> = splits.iter().map(|(n, s)| (n.as_str(), *s)).collect();
        formats::write_split_summary(&cfg.output("stats_splits.csv"), &rows)?;
    }
    let rows: Vec<(&str, _)> = diversity.iter().map(|(n, d)| (n.as_str(), *d)).collect();
    formats::write_diversity(&cfg.output("stats_diversity.csv"), &rows)?;
    Ok(StatsSummary { splits, diversity })
}

// ============================================================= fetch-data

/// Downloads each configured file into `paths.data_dir`, checking pinned
/// digests. Existing files with a matching digest are left alone.
pub fn cmd_fetch_data(cfg: &PipelineConfig) -> Result<Vec<(PathBuf, String)>, PipelineError> {
    let root = &cfg.paths.data_dir;
    fs::create_dir_all(root).map_err(io_error(root))?;
    let mut out = Vec::new();
    for entry in &cfg.fetch {
        let dest = root.join(&entry.dest);
        if dest.exists() {
            let have = file_digest(&dest)?;
            if entry.sha256.as_deref().is_none_or(|want| want.eq_ignore_ascii_case(&have)) {
                log::info!("{} present", dest.display());
                out.push((dest, have));
                continue;
            }
        }
        if let Some(dir) = dest.parent() {
            fs::create_dir_all(dir).map_err(io_error(dir))?;
        }
        log::info!("fetching {}", entry.url);
        let resp = ureq::get(&entry.url)
            .call()
            .map_err(|e| PipelineError::Fetch(format!("{}: {e}", entry.url)))?;
        let mut reader = resp.into_body().into_reader();
        let mut tmp = tempfile::NamedTempFile::new_in(dest.parent().unwrap_or(root))
            .map_err(io_error(&dest))?;
        let mut hasher = Sha256::new();
        let mut buf = vec![0u8; 1 << 16];
        loop {
            let n = reader.read(&mut buf).map_err(|e| PipelineError::Fetch(e.to_string()))?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
            std::io::Write::write_all(&mut tmp, &buf[..n]).map_err(io_error(&dest))?;
        }
        let got = hex::encode(hasher.finalize());
        match &entry.sha256 {
            Some(want) if !want.eq_ignore_ascii_case(&got) => {
                return Err(PipelineError::Fetch(format!(
                    "{}: sha256 {got}, expected {want}",
                    entry.url
                )));
            }
            Some(_) => {}
            None => println!("{}  {}", got, entry.dest.display()),
        }
        tmp.persist(&dest).map_err(|e| io_error(&dest)(e.error))?;
        out.push((dest, got));
    }
    Ok(out)
}
