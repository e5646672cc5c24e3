//! Query-document similarity: BM25 word matching, C-DSSM semantic
//! similarity and translation-model likelihood.

pub mod bm25;
pub mod cdssm;
pub mod translation;

pub use bm25::{bm25, corpus_stats, Bm25Params, CorpusStats};
pub use cdssm::{
    cdssm_forward, cdssm_grad_check, cdssm_grad_check_step, cdssm_similarity, cdssm_train,
    CdssmParams, CdssmShape, CdssmTrainConfig, GradCheckSample,
};
pub use translation::{tm_score, tm_train, Background, TranslationTable};
