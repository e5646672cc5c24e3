use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use tablesel::pipeline::{
    self, corpus::read_document, extract_documents, ingest_corpus, DocRecord, ModelBundle,
    PipelineConfig, OUTPUT_SCHEMA_VERSION,
};
use tablesel::synth::{generate_corpus, SynthSpec};
use tablesel::{Error, Result};

#[derive(Parser)]
#[command(
    name = "tablesel",
    version,
    about = "Select and render table answers for web queries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract candidate tables of every corpus document.
    Extract {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Assemble features for every query-table pair with a trained model.
    Features {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train similarity models and the classifier on a labeled corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Model path; defaults to OUT/model.json.
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Score a labeled corpus and write precision/recall curves.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Answer one query from ranked HTML documents.
    Answer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        query: String,
        /// HTML documents in rank order.
        #[arg(long = "doc", required = true)]
        docs: Vec<PathBuf>,
        /// Writes OUT/answer.json instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Print a summary of a corpus and/or a model.
    Inspect {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic labeled corpus.
    GenerateCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "q")]
        id_prefix: String,
        #[arg(long, default_value_t = 100)]
        normal: usize,
        #[arg(long, default_value_t = 0)]
        match_distractor: usize,
        #[arg(long, default_value_t = 0)]
        dominance_distractor: usize,
        #[arg(long, default_value_t = 0)]
        metadata_cell_conflict: usize,
        #[arg(long, default_value_t = 4)]
        docs_per_query: usize,
        /// Click log size; 0 writes none.
        #[arg(long, default_value_t = 400)]
        clicks: usize,
    },
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    match &common.config {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(|e| Error::io("<stdout>", e))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract {
            corpus,
            out,
            common,
        } => {
            let cfg = load_config(&common)?;
            let c = ingest_corpus(&corpus, cfg.k)?;
            let records = pipeline::extract_records(&c);
            pipeline::write_jsonl(&out.join("tables.jsonl"), &records)?;
            print_json(&json!({ "queries": c.queries.len(), "tables": records.len() }))
        }
        Command::Features {
            corpus,
            model,
            out,
            common,
        } => {
            let cfg = load_config(&common)?;
            let bundle = ModelBundle::load(&model)?;
            let c = ingest_corpus(&corpus, cfg.k)?;
            let records = pipeline::corpus_features(&c, &bundle)?;
            pipeline::write_jsonl(&out.join("features.jsonl"), &records)?;
            print_json(&json!({ "pairs": records.len() }))
        }
        Command::Train {
            corpus,
            out,
            model,
            common,
        } => {
            let cfg = load_config(&common)?;
            let c = ingest_corpus(&corpus, cfg.k)?;
            let trained = pipeline::train(&c, &cfg)?;
            pipeline::write_training(&out, &trained)?;
            if let Some(m) = model {
                trained.bundle.save(&m)?;
            }
            print_json(&json!({
                "queries_used": trained.report.queries_used,
                "training_pairs": trained.report.training_pairs,
                "trees": trained.bundle.classifier.trees.len(),
            }))
        }
        Command::Evaluate {
            corpus,
            model,
            out,
            common,
        } => {
            let cfg = load_config(&common)?;
            let bundle = ModelBundle::load(&model)?;
            let c = ingest_corpus(&corpus, cfg.k)?;
            let ev = pipeline::evaluate(&c, &bundle, &cfg)?;
            pipeline::write_evaluation(&out, &ev)?;
            let answered = ev.answers.iter().filter(|a| a.answer.is_some()).count();
            print_json(
                &json!({ "queries": ev.answers.len(), "answered": answered, "pairs": ev.scores.len() }),
            )
        }
        Command::Answer {
            model,
            query,
            docs,
            out,
            common,
        } => {
            let cfg = load_config(&common)?;
            let bundle = ModelBundle::load(&model)?;
            let synonyms = pipeline::load_synonyms(&cfg)?;
            let docs = docs
                .iter()
                .take(cfg.k.unwrap_or(usize::MAX))
                .enumerate()
                .map(|(i, p)| {
                    let rec = DocRecord {
                        rank: i + 1,
                        path: p.display().to_string(),
                        url: None,
                    };
                    Ok((rec, read_document(p)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let tables = extract_documents(&docs);
            let record = pipeline::answer(&bundle, &cfg, "cli", &query, &tables, &synonyms)?;
            match out {
                Some(dir) => {
                    let mut bytes = serde_json::to_vec_pretty(&record)?;
                    bytes.push(b'\n');
                    pipeline::write_file(&dir.join("answer.json"), &bytes)
                }
                None => print_json(&serde_json::to_value(&record)?),
            }
        }
        Command::Inspect {
            corpus,
            model,
            common,
        } => {
            let cfg = load_config(&common)?;
            let c = corpus
                .as_deref()
                .map(|p| ingest_corpus(p, cfg.k))
                .transpose()?;
            let b = model.as_deref().map(ModelBundle::load).transpose()?;
            if c.is_none() && b.is_none() {
                return Err(Error::InvalidArgument(
                    "inspect needs --corpus and/or --model".into(),
                ));
            }
            pipeline::inspect(&mut std::io::stdout().lock(), c.as_ref(), b.as_ref(), &cfg)
        }
        Command::GenerateCorpus {
            out,
            seed,
            id_prefix,
            normal,
            match_distractor,
            dominance_distractor,
            metadata_cell_conflict,
            docs_per_query,
            clicks,
        } => {
            let spec = SynthSpec {
                seed,
                id_prefix,
                normal,
                match_distractor,
                dominance_distractor,
                metadata_cell_conflict,
                docs_per_query,
                clicks,
            };
            let scenarios = generate_corpus(Path::new(&out), &spec)?;
            print_json(&json!({ "queries": scenarios.len() }))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = json!({
                "schema_version": OUTPUT_SCHEMA_VERSION,
                "error": { "kind": e.kind(), "message": e.to_string() },
            });
            eprintln!("{record}");
            ExitCode::from(2)
        }
    }
}
