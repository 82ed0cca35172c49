use adforge::backends::{load_annotations, Backends};
use adforge::evalstats::{
    eval_report, load_ground_truth, load_ratings, one_way_anova, weighted_kappa, wilcoxon_signed_rank,
};
use adforge::service::{process_annotations, AppState, DocumentStore};
use adforge::{AnnotationFile, PipelineConfig};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "adforge", version, about = "Layered audio description documents from video annotations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline on an annotation file.
    Process {
        annotations: PathBuf,
        /// Key-value pipeline config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Store directory; without it the document is printed.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Add annotation files to a store without processing them.
    Ingest {
        #[arg(required = true)]
        annotations: Vec<PathBuf>,
        #[arg(long, default_value = "store")]
        store: PathBuf,
    },
    /// Label precision/recall (and rating statistics) against ground truth.
    Evaluate {
        /// Annotation file, or a directory of them.
        predictions: PathBuf,
        /// Ground-truth JSON file, or a directory of JSON and LabelMe XML.
        ground_truth: PathBuf,
        #[arg(long)]
        ratings: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print JSON instead of text tables.
        #[arg(long)]
        json: bool,
    },
    /// Standalone statistical tests over files of numbers.
    Stats {
        #[command(subcommand)]
        test: StatsCommand,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "store")]
        store: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Quadratic-weighted kappa between two graders' score files.
    Kappa {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 7)]
        scale: u32,
    },
    /// Wilcoxon signed-rank test on two paired score files.
    Wilcoxon { x: PathBuf, y: PathBuf },
    /// One-way ANOVA, one file per group.
    Anova {
        #[arg(required = true, num_args = 2..)]
        groups: Vec<PathBuf>,
    },
}

/// Numbers separated by whitespace or commas; `#` starts a comment.
fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            out.push(tok.parse().with_context(|| format!("{}: `{tok}` is not a number", path.display()))?);
        }
    }
    Ok(out)
}

fn read_scores(path: &Path) -> Result<Vec<u32>> {
    read_numbers(path)?
        .into_iter()
        .map(|v| {
            if v.fract() == 0.0 && v >= 0.0 {
                Ok(v as u32)
            } else {
                bail!("{}: score {v} is not a whole number", path.display())
            }
        })
        .collect()
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    Ok(match path {
        Some(p) => PipelineConfig::from_file(p).with_context(|| format!("config {}", p.display()))?,
        None => PipelineConfig::default(),
    })
}

fn load_predictions(path: &Path) -> Result<Vec<AnnotationFile>> {
    if !path.is_dir() {
        return Ok(vec![load_annotations(path)?]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "json"));
    files.sort();
    files
        .iter()
        .map(|p| load_annotations(p).with_context(|| format!("predictions {}", p.display())))
        .collect()
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Process { annotations, config, out } => {
            let config = load_config(config.as_deref())?;
            let ann = load_annotations(&annotations)
                .with_context(|| format!("annotations {}", annotations.display()))?;
            let backends = Backends::from_env(&ann);
            match out {
                Some(root) => {
                    let store = DocumentStore::open(&root)?;
                    store.ingest_annotations(&ann)?;
                    let doc = process_annotations(&ann, &config, &backends, store.sound_cache())?;
                    let entry = store.save_document(&doc)?;
                    store.persist_sounds()?;
                    println!(
                        "{}: {} keyframes -> {} (sha256 {})",
                        doc.meta.video_id,
                        doc.keyframes.len(),
                        root.join(&entry.file).display(),
                        entry.sha256
                    );
                }
                None => {
                    let cache = adforge::audio::SoundCache::in_memory();
                    let doc = process_annotations(&ann, &config, &backends, &cache)?;
                    print!("{}", String::from_utf8(adforge::service::store::document_bytes(&doc))?);
                }
            }
        }
        Command::Ingest { annotations, store } => {
            let store = DocumentStore::open(&store)?;
            for path in annotations {
                let ann = load_annotations(&path).with_context(|| format!("annotations {}", path.display()))?;
                store.ingest_annotations(&ann)?;
                println!("ingested {}", ann.meta.video_id);
            }
        }
        Command::Evaluate { predictions, ground_truth, ratings, iou, config, json } => {
            let mut config = load_config(config.as_deref())?;
            config.iou_match_threshold = iou;
            config.validate()?;
            let preds = load_predictions(&predictions)?;
            let truth = load_ground_truth(&ground_truth)?;
            let ratings = match ratings {
                Some(p) => load_ratings(&p).with_context(|| format!("ratings {}", p.display()))?,
                None => Vec::new(),
            };
            let report = eval_report(&preds, &truth, &ratings, &config)?;
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_text());
            }
        }
        Command::Stats { test } => match test {
            StatsCommand::Kappa { a, b, scale } => {
                let kappa = weighted_kappa(&read_scores(&a)?, &read_scores(&b)?, scale)?;
                print_json(&serde_json::json!({ "kappa": kappa }))?;
            }
            StatsCommand::Wilcoxon { x, y } => {
                let (x, y) = (read_numbers(&x)?, read_numbers(&y)?);
                if x.len() != y.len() {
                    bail!("paired files differ in length ({} vs {})", x.len(), y.len());
                }
                let pairs: Vec<(f64, f64)> = x.into_iter().zip(y).collect();
                print_json(&wilcoxon_signed_rank(&pairs)?)?;
            }
            StatsCommand::Anova { groups } => {
                let groups = groups.iter().map(|p| read_numbers(p)).collect::<Result<Vec<_>>>()?;
                print_json(&one_way_anova(&groups)?)?;
            }
        },
        Command::Serve { store, addr, config } => {
            let config = load_config(config.as_deref())?;
            let store = Arc::new(DocumentStore::open(&store)?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&addr).await?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                adforge::service::http::serve(listener, AppState::new(store, config)).await
            })?;
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
