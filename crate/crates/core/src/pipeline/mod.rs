//! Corpus ingestion, training, evaluation and answering.

pub mod config;
pub mod corpus;

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{self, BoostedModel, LabeledPair};
use crate::docmap::{build_documents, cell_tokens, metadata_tokens, tokenize, Strategy};
use crate::eval::{
    classifier_pr, default_thresholds, selector_pr, PrPoint, QueryCandidates, ScoredCandidate,
};
use crate::extraction::{ExtractedTable, TableKey};
use crate::features::{
    assemble, Bm25Model, FeatureConfig, FeatureVector, QueryContext, SimilarityKind,
    SimilarityModels,
};
use crate::selector::{select_scored, Selection};
use crate::similarity::{cdssm_train, tm_train, Background, CdssmTrainConfig};
use crate::snippet::{generate, Snippet, Synonyms};
use crate::{Error, Result};

pub use config::{CorpusFilter, PipelineConfig, TmConfig};
pub use corpus::{extract_documents, ingest_corpus, Corpus, CorpusQuery, DocRecord};

pub const OUTPUT_SCHEMA_VERSION: u32 = 1;

/// Everything `answer` needs besides the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub schema_version: u32,
    pub features: FeatureConfig,
    pub similarity: SimilarityModels,
    pub classifier: BoostedModel,
}

impl ModelBundle {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != OUTPUT_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                what: "model bundle".into(),
                found: self.schema_version,
                expected: OUTPUT_SCHEMA_VERSION,
            });
        }
        let fp = self.features.fingerprint();
        if fp != self.classifier.fingerprint {
            return Err(Error::ConfigMismatch {
                expected: fp,
                actual: self.classifier.fingerprint.clone(),
            });
        }
        self.similarity.check(&self.features)?;
        self.classifier.validate()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, serde_json::to_string(self)?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let b: ModelBundle = serde_json::from_str(&text)?;
        b.validate()?;
        Ok(b)
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    write_file(path, &buf)
}

pub fn write_curve(dir: &Path, name: &str, points: &[PrPoint]) -> Result<()> {
    let mut csv = Vec::new();
    crate::eval::write_curve_csv(points, &mut csv)?;
    write_file(&dir.join(format!("{name}.csv")), &csv)?;
    let mut json = crate::eval::curve_json(points)?.into_bytes();
    json.push(b'\n');
    write_file(&dir.join(format!("{name}.json")), &json)
}

pub fn passes_filter(q: &CorpusQuery, filter: &CorpusFilter) -> bool {
    !filter.enabled
        || q.tables.iter().any(|t| {
            t.doc_rank <= filter.top_docs && t.dominance.frac_cleaned > filter.min_fraction
        })
}

/// Training text pairs for the translation model and C-DSSM: the corpus
/// click log when present, otherwise each query paired with the metadata and
/// cell tokens of its positively labeled tables.
pub fn similarity_pairs(
    queries: &[&CorpusQuery],
    clicks: &[(String, String)],
) -> Vec<(Vec<String>, Vec<String>)> {
    if !clicks.is_empty() {
        return clicks
            .iter()
            .map(|(q, d)| (tokenize(q), tokenize(d)))
            .collect();
    }
    let mut out = Vec::new();
    for q in queries {
        let qt = tokenize(&q.text);
        for t in &q.tables {
            if q.label(t.key()) == Some(true) {
                let mut doc = metadata_tokens(t);
                doc.extend(cell_tokens(t));
                out.push((qt.clone(), doc));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub schema_version: u32,
    pub queries_total: usize,
    pub queries_used: usize,
    pub training_pairs: usize,
    pub positives: usize,
    pub similarity_pairs: usize,
    pub tm_log_likelihood: Vec<f64>,
    pub cdssm_losses: Vec<f64>,
    pub classifier_losses: Vec<f64>,
}

pub fn fit_similarity_models(
    queries: &[&CorpusQuery],
    clicks: &[(String, String)],
    cfg: &PipelineConfig,
    report: &mut TrainReport,
) -> Result<SimilarityModels> {
    let fcfg = cfg.features.normalized()?;
    let tables: Vec<&ExtractedTable> = queries.iter().flat_map(|q| &q.tables).collect();
    let mut models = SimilarityModels::default();
    if fcfg.similarities.contains(&SimilarityKind::Bm25) {
        models.bm25 = Some(Bm25Model::fit(tables.iter().copied(), cfg.bm25));
    }
    let needs_pairs = fcfg.similarities.iter().any(|s| *s != SimilarityKind::Bm25);
    if !needs_pairs {
        return Ok(models);
    }
    let pairs = similarity_pairs(queries, clicks);
    report.similarity_pairs = pairs.len();
    if fcfg.similarities.contains(&SimilarityKind::Tm) {
        let (mut tm, tm_report) = tm_train(&pairs, cfg.tm.iterations, cfg.tm.beta)?;
        let docs: Vec<Vec<String>> = tables
            .iter()
            .map(|t| build_documents(t, Strategy::Single).docs.swap_remove(0).1)
            .collect();
        tm.set_background(Background::from_docs(&docs));
        report.tm_log_likelihood = tm_report.log_likelihood;
        models.tm = Some(tm);
    }
    if fcfg.similarities.contains(&SimilarityKind::Cdssm) {
        if pairs.len() < 2 {
            return Err(Error::TrainingData(
                "C-DSSM training needs at least two text pairs".into(),
            ));
        }
        let ccfg = CdssmTrainConfig {
            negatives: cfg
                .cdssm
                .negatives
                .min(pairs.len().min(cfg.cdssm.batch_size) - 1)
                .max(1),
            ..cfg.cdssm
        };
        let (params, cdssm_report) = cdssm_train(&pairs, &ccfg)?;
        report.cdssm_losses = cdssm_report.losses;
        models.cdssm = Some(params);
    }
    Ok(models)
}

pub fn query_features(
    q: &CorpusQuery,
    models: &SimilarityModels,
    fcfg: &FeatureConfig,
) -> Result<Vec<FeatureVector>> {
    let ctx = QueryContext::new(q.id.clone(), tokenize(&q.text), models);
    q.tables
        .iter()
        .map(|t| assemble(&ctx, t, models, fcfg))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub schema_version: u32,
    #[serde(flatten)]
    pub features: FeatureVector,
    pub label: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub bundle: ModelBundle,
    pub features: Vec<FeatureRecord>,
    pub report: TrainReport,
}

fn used_queries<'a>(corpus: &'a Corpus, cfg: &PipelineConfig) -> Vec<&'a CorpusQuery> {
    corpus
        .queries
        .iter()
        .filter(|q| passes_filter(q, &cfg.corpus_filter))
        .collect()
}

fn labeled_features(
    queries: &[&CorpusQuery],
    models: &SimilarityModels,
    fcfg: &FeatureConfig,
) -> Result<Vec<FeatureRecord>> {
    let per_query: Vec<Result<Vec<FeatureRecord>>> = queries
        .par_iter()
        .map(|q| {
            Ok(query_features(q, models, fcfg)?
                .into_iter()
                .zip(&q.tables)
                .map(|(fv, t)| FeatureRecord {
                    schema_version: OUTPUT_SCHEMA_VERSION,
                    features: fv,
                    label: q.label(t.key()),
                })
                .collect())
        })
        .collect();
    Ok(per_query.into_iter().collect::<Result<Vec<_>>>()?.concat())
}

/// Fits the similarity models and the classifier on the labeled pairs of
/// `corpus`. Unlabeled tables are not used for training.
pub fn train(corpus: &Corpus, cfg: &PipelineConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let fcfg = cfg.features.normalized()?;
    let queries = used_queries(corpus, cfg);
    let mut report = TrainReport {
        schema_version: OUTPUT_SCHEMA_VERSION,
        queries_total: corpus.queries.len(),
        queries_used: queries.len(),
        ..TrainReport::default()
    };
    let models = fit_similarity_models(&queries, &corpus.clicks, cfg, &mut report)?;
    let features = labeled_features(&queries, &models, &fcfg)?;
    let data: Vec<LabeledPair> = features
        .iter()
        .filter_map(|r| {
            r.label.map(|label| LabeledPair {
                features: r.features.clone(),
                label,
            })
        })
        .collect();
    report.training_pairs = data.len();
    report.positives = data.iter().filter(|p| p.label).count();
    let (model, cls_report) = classifier::train(&data, &cfg.classifier)?;
    report.classifier_losses = cls_report.losses;
    Ok(TrainOutput {
        bundle: ModelBundle {
            schema_version: OUTPUT_SCHEMA_VERSION,
            features: fcfg,
            similarity: models,
            classifier: model,
        },
        features,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub schema_version: u32,
    pub query_id: String,
    pub doc_rank: usize,
    pub table_index: usize,
    pub score: f64,
    pub label: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerBody {
    pub doc_rank: usize,
    pub table_index: usize,
    pub score: f64,
    pub margin: Option<f64>,
    pub snippet: Snippet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub schema_version: u32,
    pub query_id: String,
    pub query: String,
    pub theta: f64,
    /// `"answer"` or `"no_answer"`.
    pub status: String,
    pub answer: Option<AnswerBody>,
}

pub fn load_synonyms(cfg: &PipelineConfig) -> Result<Synonyms> {
    cfg.synonyms
        .as_deref()
        .map_or_else(|| Ok(Synonyms::default()), Synonyms::load)
}

fn answer_record(
    query_id: &str,
    query: &str,
    tables: &[ExtractedTable],
    selection: Option<Selection>,
    cfg: &PipelineConfig,
    synonyms: &Synonyms,
) -> Result<AnswerRecord> {
    let answer = match selection {
        Some(sel) => {
            let t = tables
                .iter()
                .find(|t| t.key() == sel.key)
                .expect("selected key comes from the candidate list");
            Some(AnswerBody {
                doc_rank: sel.key.doc_rank,
                table_index: sel.key.table_index,
                score: sel.score,
                margin: sel.margin,
                snippet: generate(
                    t,
                    &tokenize(query),
                    cfg.snippet_rows,
                    cfg.snippet_cols,
                    synonyms,
                )?,
            })
        }
        None => None,
    };
    Ok(AnswerRecord {
        schema_version: OUTPUT_SCHEMA_VERSION,
        query_id: query_id.to_string(),
        query: query.to_string(),
        theta: cfg.theta,
        status: if answer.is_some() {
            "answer"
        } else {
            "no_answer"
        }
        .to_string(),
        answer,
    })
}

/// Extract, featurize, score, select and render for one query. Labels are
/// never consulted.
pub fn answer(
    bundle: &ModelBundle,
    cfg: &PipelineConfig,
    query_id: &str,
    query: &str,
    tables: &[ExtractedTable],
    synonyms: &Synonyms,
) -> Result<AnswerRecord> {
    cfg.validate()?;
    let ctx = QueryContext::new(query_id, tokenize(query), &bundle.similarity);
    let scored = tables
        .iter()
        .map(|t| {
            let fv = assemble(&ctx, t, &bundle.similarity, &bundle.features)?;
            Ok((t.key(), classifier::predict(&bundle.classifier, &fv)?))
        })
        .collect::<Result<Vec<(TableKey, f64)>>>()?;
    answer_record(
        query_id,
        query,
        tables,
        select_scored(&scored, cfg.theta),
        cfg,
        synonyms,
    )
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub scores: Vec<ScoreRecord>,
    pub answers: Vec<AnswerRecord>,
    pub classifier: Vec<PrPoint>,
    pub selector: Vec<PrPoint>,
}

/// Scores every candidate of the filtered corpus. Curves count unlabeled
/// candidates as negatives.
pub fn evaluate(corpus: &Corpus, bundle: &ModelBundle, cfg: &PipelineConfig) -> Result<Evaluation> {
    cfg.validate()?;
    let synonyms = load_synonyms(cfg)?;
    let queries = used_queries(corpus, cfg);
    let per_query: Vec<Result<(Vec<ScoreRecord>, AnswerRecord)>> = queries
        .par_iter()
        .map(|q| {
            let fvs = query_features(q, &bundle.similarity, &bundle.features)?;
            let mut scores = Vec::with_capacity(fvs.len());
            for (fv, t) in fvs.iter().zip(&q.tables) {
                scores.push(ScoreRecord {
                    schema_version: OUTPUT_SCHEMA_VERSION,
                    query_id: q.id.clone(),
                    doc_rank: t.doc_rank,
                    table_index: t.table_index,
                    score: classifier::predict(&bundle.classifier, fv)?,
                    label: q.label(t.key()),
                });
            }
            let scored: Vec<(TableKey, f64)> = q
                .tables
                .iter()
                .map(|t| t.key())
                .zip(scores.iter().map(|s| s.score))
                .collect();
            let ans = answer_record(
                &q.id,
                &q.text,
                &q.tables,
                select_scored(&scored, cfg.theta),
                cfg,
                &synonyms,
            )?;
            Ok((scores, ans))
        })
        .collect();
    let mut scores = Vec::new();
    let mut answers = Vec::new();
    for r in per_query {
        let (s, a) = r?;
        scores.extend(s);
        answers.push(a);
    }
    let pairs: Vec<(f64, bool)> = scores
        .iter()
        .map(|s| (s.score, s.label == Some(true)))
        .collect();
    let mut grouped: Vec<QueryCandidates> = Vec::with_capacity(queries.len());
    for s in &scores {
        if grouped.last().map_or(true, |g| g.query_id != s.query_id) {
            grouped.push(QueryCandidates {
                query_id: s.query_id.clone(),
                candidates: Vec::new(),
            });
        }
        grouped
            .last_mut()
            .unwrap()
            .candidates
            .push(ScoredCandidate {
                key: TableKey {
                    doc_rank: s.doc_rank,
                    table_index: s.table_index,
                },
                score: s.score,
                label: s.label == Some(true),
            });
    }
    // Queries without candidates still count as misses when they have none to
    // return, so keep them in the grouping.
    for q in &queries {
        if q.tables.is_empty() {
            grouped.push(QueryCandidates {
                query_id: q.id.clone(),
                candidates: Vec::new(),
            });
        }
    }
    let thresholds = default_thresholds();
    Ok(Evaluation {
        classifier: classifier_pr(&pairs, &thresholds),
        selector: selector_pr(&grouped, &thresholds),
        scores,
        answers,
    })
}

pub fn write_evaluation(dir: &Path, ev: &Evaluation) -> Result<()> {
    write_jsonl(&dir.join("scores.jsonl"), &ev.scores)?;
    write_jsonl(&dir.join("answers.jsonl"), &ev.answers)?;
    write_curve(dir, "classifier_pr", &ev.classifier)?;
    write_curve(dir, "selector_pr", &ev.selector)
}

pub fn write_training(dir: &Path, out: &TrainOutput) -> Result<()> {
    out.bundle.save(&dir.join("model.json"))?;
    write_jsonl(&dir.join("features.jsonl"), &out.features)?;
    let mut report = serde_json::to_vec_pretty(&out.report)?;
    report.push(b'\n');
    write_file(&dir.join("train_report.json"), &report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRecord {
    pub schema_version: u32,
    pub query_id: String,
    #[serde(flatten)]
    pub table: ExtractedTable,
}

pub fn extract_records(corpus: &Corpus) -> Vec<TableRecord> {
    corpus
        .queries
        .iter()
        .flat_map(|q| {
            q.tables.iter().map(|t| TableRecord {
                schema_version: OUTPUT_SCHEMA_VERSION,
                query_id: q.id.clone(),
                table: t.clone(),
            })
        })
        .collect()
}

/// Features of every candidate pair of the (unfiltered) corpus.
pub fn corpus_features(corpus: &Corpus, bundle: &ModelBundle) -> Result<Vec<FeatureRecord>> {
    let all: Vec<&CorpusQuery> = corpus.queries.iter().collect();
    labeled_features(&all, &bundle.similarity, &bundle.features)
}

/// Human-readable listing of a corpus and, optionally, a model.
pub fn inspect<W: Write>(
    out: &mut W,
    corpus: Option<&Corpus>,
    bundle: Option<&ModelBundle>,
    cfg: &PipelineConfig,
) -> Result<()> {
    let io = |e| Error::io("<stdout>", e);
    if let Some(b) = bundle {
        writeln!(out, "model {}", b.classifier.fingerprint).map_err(io)?;
        writeln!(out, "  trees: {}", b.classifier.trees.len()).map_err(io)?;
        writeln!(out, "  features: {}", b.classifier.feature_names.join(", ")).map_err(io)?;
    }
    if let Some(c) = corpus {
        writeln!(
            out,
            "corpus {} ({} queries, k = {})",
            c.root.display(),
            c.queries.len(),
            c.k
        )
        .map_err(io)?;
        for q in &c.queries {
            let keep = if passes_filter(q, &cfg.corpus_filter) {
                ""
            } else {
                "  [filtered]"
            };
            writeln!(out, "{}  {:?}{}", q.id, q.text, keep).map_err(io)?;
            for t in &q.tables {
                writeln!(
                    out,
                    "  doc {} table {}: {}x{} subject={:?} frac_raw={:.3} frac_cleaned={:.3} frac_main={:.3} label={:?}",
                    t.doc_rank,
                    t.table_index,
                    t.n_rows(),
                    t.n_cols(),
                    t.subject_col,
                    t.dominance.frac_raw,
                    t.dominance.frac_cleaned,
                    t.dominance.frac_main,
                    q.label(t.key())
                )
                .map_err(io)?;
            }
        }
    }
    Ok(())
}
