use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use alttext::pipeline::{
    self, AnnotateOptions, DetectOptions, EvalInput, Providers, StatsInput, Wc20Paths,
};
use alttext::providers::UreqTransport;
use alttext::{ExitStatus, PipelineConfig, PipelineError};
use alttext::config::Seeds;
use alttext_core::stats::ShareBasis;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "alttext", version, about = "Icon alt-text pipeline for Android screens")]
struct Cli {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Use the fixture providers; no network access.
    #[arg(long, global = true)]
    mock: bool,
    /// Run-wide provider spend limit in US dollars.
    #[arg(long, global = true)]
    budget_usd: Option<f64>,
    /// Concurrent icons during annotation.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find icon candidates in the screen corpus.
    Detect {
        /// Caption table to restrict detection to captioned nodes.
        #[arg(long, requires = "splits")]
        captions: Option<PathBuf>,
        /// Directory of `<split>_screens.txt` lists.
        #[arg(long, requires = "captions")]
        splits: Option<PathBuf>,
        /// Scale the shape thresholds to reject this share of class matches.
        #[arg(long)]
        calibrate: Option<f64>,
    },
    /// Generate alt-text for every icon of an icon manifest.
    Annotate {
        #[arg(long, default_value = "out/icons.csv")]
        icons: PathBuf,
        /// Stop after the prompt stage.
        #[arg(long)]
        prompts_only: bool,
    },
    /// Build the chat-format fine-tuning file.
    FinetunePrep {
        #[arg(long, default_value = "out/results.jsonl")]
        results: PathBuf,
        #[arg(long, default_value = "out/dataset.csv")]
        dataset: PathBuf,
    },
    /// Score generated captions.
    Evaluate {
        /// Candidates with references (jsonl, json or csv).
        #[arg(long, conflicts_with_all = ["results", "references"])]
        corpus: Option<PathBuf>,
        #[arg(long, requires = "references")]
        results: Option<PathBuf>,
        #[arg(long)]
        references: Option<PathBuf>,
    },
    /// Split counts and caption diversity.
    Stats {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Extra caption lists (txt, one per line, or csv with a caption column).
        #[arg(long)]
        captions: Vec<PathBuf>,
        #[arg(long)]
        case_fold: bool,
        #[arg(long, value_enum, default_value_t = Basis::Unique)]
        basis: Basis,
    },
    /// Download the configured public data files.
    FetchData,
}

#[derive(Clone, Copy, ValueEnum)]
enum Basis {
    Unique,
    Occurrences,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seeds = Seeds::all(s);
    }
    if cli.mock {
        cfg.annotate.mock = true;
    }
    if let Some(b) = cli.budget_usd {
        cfg.annotate.budget_usd = Some(b);
    }
    if let Some(w) = cli.workers {
        cfg.annotate.workers = w;
    }
    if let Some(o) = &cli.out {
        cfg.paths.output_dir = o.clone();
    }
    if let Command::Annotate { prompts_only: true, .. } = cli.command {
        cfg.annotate.prompts_only = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitStatus, PipelineError> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Detect { captions, splits, calibrate } => {
            let opts = DetectOptions {
                wc20: captions.zip(splits).map(|(captions_csv, splits_dir)| Wc20Paths {
                    captions_csv,
                    splits_dir,
                }),
                calibrate_target: calibrate,
            };
            let s = pipeline::cmd_detect(&cfg, &opts)?;
            println!(
                "screens {}  class matches {}  rejected by shape {} ({:.1}%)  off-screen {}  icons {}",
                s.stats.screens,
                s.stats.class_matches,
                s.stats.rejected_by_shape,
                100.0 * s.stats.removal_fraction,
                s.stats.empty_crops,
                s.stats.candidates
            );
            Ok(ExitStatus::Success)
        }
        Command::Annotate { icons, .. } => {
            let providers = Providers::build(&cfg, Arc::new(UreqTransport::default()))?;
            let s = pipeline::cmd_annotate(&cfg, &icons, &providers, &AnnotateOptions::default())?;
            let t = &s.manifest.totals;
            println!(
                "icons {}  ok {}  failed {}  cost ${:.4}  run {}",
                t.icons, t.ok, t.failed, t.cost_usd, s.manifest.run_id
            );
            if let Some(reason) = &s.manifest.halted {
                eprintln!("halted: {reason}");
            }
            Ok(s.status)
        }
        Command::FinetunePrep { results, dataset } => {
            let s = pipeline::cmd_finetune_prep(&cfg, &results, &dataset)?;
            println!("pool {}  records {}", s.pool, s.records.len());
            Ok(ExitStatus::Success)
        }
        Command::Evaluate { corpus, results, references } => {
            let input = match (corpus, results, references) {
                (Some(c), _, _) => EvalInput::Corpus(c),
                (None, Some(results), Some(references)) => EvalInput::Results { results, references },
                _ => {
                    return Err(PipelineError::Input(
                        "evaluate needs --corpus or --results with --references".into(),
                    ))
                }
            };
            let (report, _) = pipeline::cmd_evaluate(&cfg, &input)?;
            print!("{}", alttext::formats::format_report_table(&report));
            Ok(ExitStatus::Success)
        }
        Command::Stats { dataset, captions, case_fold, basis } => {
            let input = StatsInput {
                dataset,
                captions,
                case_fold,
                basis: match basis {
                    Basis::Unique => ShareBasis::UniqueLabels,
                    Basis::Occurrences => ShareBasis::Occurrences,
                },
            };
            let s = pipeline::cmd_stats(&cfg, &input)?;
            for (name, sp) in &s.splits {
                let t = sp.total();
                println!(
                    "{name}: icons {}/{}/{} ({})  captions {}/{}/{} ({})",
                    sp.train.icon_count,
                    sp.valid.icon_count,
                    sp.test.icon_count,
                    t.icon_count,
                    sp.train.caption_count,
                    sp.valid.caption_count,
                    sp.test.caption_count,
                    t.caption_count
                );
            }
            for (name, d) in &s.diversity {
                println!(
                    "{name}: captions {}  unique {}  top-3 {:.1}%  <=4 {:.1}%  once {:.1}%",
                    d.total,
                    d.unique_count,
                    100.0 * d.top3_share,
                    100.0 * d.le4_share,
                    100.0 * d.singleton_share
                );
            }
            Ok(ExitStatus::Success)
        }
        Command::FetchData => {
            pipeline::cmd_fetch_data(&cfg)?;
            Ok(ExitStatus::Success)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
