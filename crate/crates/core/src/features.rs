//! Per-pair feature assembly for the table answer classifier.
//!
//! Feature order is fixed by [`FeatureConfig`]: similarity features first
//! (model-major: BM25, TM, C-DSSM; then one per document of the mapping
//! strategy), then the fraction, position and quality groups.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::docmap::{build_documents, DocKind, Strategy};
use crate::extraction::ExtractedTable;
use crate::quality::compute_quality;
use crate::similarity::cdssm::cosine;
use crate::similarity::{
    bm25, cdssm_forward, corpus_stats, tm_score, Bm25Params, CdssmParams, CorpusStats,
    TranslationTable,
};
use crate::{Error, Result};

/// Substituted for translation log-probabilities that are not finite.
pub const LOG_PROB_FLOOR: f64 = -1.0e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityKind {
    Bm25,
    Tm,
    Cdssm,
}

impl SimilarityKind {
    pub fn name(self) -> &'static str {
        match self {
            SimilarityKind::Bm25 => "bm25",
            SimilarityKind::Tm => "tm",
            SimilarityKind::Cdssm => "cdssm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    Fraction,
    Position,
    Quality,
}

impl FeatureGroup {
    pub fn feature_names(self) -> &'static [&'static str] {
        match self {
            FeatureGroup::Fraction => &["frac_raw", "frac_cleaned", "frac_main"],
            FeatureGroup::Position => &["pos_raw", "pos_cleaned", "pos_main", "table_index"],
            FeatureGroup::Quality => &[
                "q_n_rows",
                "q_n_cols",
                "q_empty_cell_fraction",
                "q_has_column_names",
                "q_has_numeric_column",
                "q_numeric_column_count",
                "q_subject_distinct_fraction",
                "q_type_consistency_mean",
                "q_type_consistency_min",
            ],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Fraction => "fraction",
            FeatureGroup::Position => "position",
            FeatureGroup::Quality => "quality",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub strategy: Strategy,
    pub similarities: Vec<SimilarityKind>,
    pub groups: Vec<FeatureGroup>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            strategy: Strategy::MDocCDoc,
            similarities: vec![
                SimilarityKind::Bm25,
                SimilarityKind::Tm,
                SimilarityKind::Cdssm,
            ],
            groups: vec![
                FeatureGroup::Fraction,
                FeatureGroup::Position,
                FeatureGroup::Quality,
            ],
        }
    }
}

impl FeatureConfig {
    /// Sorted, deduplicated copy; errors when nothing is enabled.
    pub fn normalized(&self) -> Result<FeatureConfig> {
        let mut c = self.clone();
        c.similarities.sort();
        c.similarities.dedup();
        c.groups.sort();
        c.groups.dedup();
        if c.similarities.is_empty() && c.groups.is_empty() {
            return Err(Error::InvalidArgument(
                "feature config enables no similarity model and no table feature group".into(),
            ));
        }
        Ok(c)
    }

    pub fn feature_names(&self) -> Vec<String> {
        let c = self.normalized().unwrap_or_else(|_| self.clone());
        let mut names = Vec::new();
        for sim in &c.similarities {
            for doc in c.strategy.doc_kinds() {
                names.push(format!("{}_{}", sim.name(), doc.name()));
            }
        }
        for g in &c.groups {
            names.extend(g.feature_names().iter().map(|s| s.to_string()));
        }
        names
    }

    /// Stable identifier embedded in trained models.
    pub fn fingerprint(&self) -> String {
        let c = self.normalized().unwrap_or_else(|_| self.clone());
        let sims: Vec<&str> = c.similarities.iter().map(|s| s.name()).collect();
        let groups: Vec<&str> = c.groups.iter().map(|g| g.name()).collect();
        format!(
            "features/v1:{}:{}:{}",
            c.strategy.name(),
            sims.join(","),
            groups.join(",")
        )
    }
}

/// BM25 statistics per document kind over the whole ingested corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bm25Model {
    pub params: Bm25Params,
    pub stats: BTreeMap<DocKind, CorpusStats>,
}

impl Bm25Model {
    pub fn fit<'a>(
        tables: impl IntoIterator<Item = &'a ExtractedTable>,
        params: Bm25Params,
    ) -> Self {
        let mut docs: BTreeMap<DocKind, Vec<Vec<String>>> = BTreeMap::new();
        for t in tables {
            for (kind, tokens) in build_documents(t, Strategy::MDocCDocSDoc).docs {
                docs.entry(kind).or_default().push(tokens);
            }
            let single = build_documents(t, Strategy::Single);
            docs.entry(DocKind::Doc)
                .or_default()
                .push(single.docs[0].1.clone());
        }
        Bm25Model {
            params,
            stats: docs
                .into_iter()
                .map(|(k, d)| (k, corpus_stats(&d)))
                .collect(),
        }
    }

    pub fn stats(&self, kind: DocKind) -> CorpusStats {
        self.stats.get(&kind).cloned().unwrap_or_default()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimilarityModels {
    pub bm25: Option<Bm25Model>,
    pub tm: Option<TranslationTable>,
    pub cdssm: Option<CdssmParams>,
}

impl SimilarityModels {
    pub fn check(&self, cfg: &FeatureConfig) -> Result<()> {
        for sim in &cfg.similarities {
            let present = match sim {
                SimilarityKind::Bm25 => self.bm25.is_some(),
                SimilarityKind::Tm => self.tm.is_some(),
                SimilarityKind::Cdssm => self.cdssm.is_some(),
            };
            if !present {
                return Err(Error::MissingModel(sim.name()));
            }
        }
        Ok(())
    }
}

/// Identifies a query-table pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey {
    pub query_id: String,
    pub doc_rank: usize,
    pub table_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub key: PairKey,
    pub fingerprint: String,
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

/// Query-side state reused across all candidate tables of one query.
#[derive(Debug, Clone)]
pub struct QueryContext {
    pub query_id: String,
    pub tokens: Vec<String>,
    cdssm_vector: Option<Vec<f64>>,
}

impl QueryContext {
    pub fn new(
        query_id: impl Into<String>,
        tokens: Vec<String>,
        models: &SimilarityModels,
    ) -> Self {
        let cdssm_vector = models.cdssm.as_ref().map(|p| cdssm_forward(&tokens, p));
        QueryContext {
            query_id: query_id.into(),
            tokens,
            cdssm_vector,
        }
    }
}

fn finite_or(value: f64, fallback: f64) -> f64 {
    if value.is_finite() {
        value
    } else if value.is_nan() {
        0.0
    } else {
        fallback
    }
}

pub fn assemble(
    query: &QueryContext,
    t: &ExtractedTable,
    models: &SimilarityModels,
    cfg: &FeatureConfig,
) -> Result<FeatureVector> {
    let cfg = cfg.normalized()?;
    models.check(&cfg)?;
    let docs = build_documents(t, cfg.strategy);
    let mut values = Vec::new();
    for sim in &cfg.similarities {
        for (kind, doc) in &docs.docs {
            let v = match sim {
                SimilarityKind::Bm25 => {
                    let m = models.bm25.as_ref().expect("checked");
                    bm25(&query.tokens, doc, &m.stats(*kind), m.params)
                }
                SimilarityKind::Tm => finite_or(
                    tm_score(&query.tokens, doc, models.tm.as_ref().expect("checked")),
                    LOG_PROB_FLOOR,
                ),
                SimilarityKind::Cdssm => {
                    let p = models.cdssm.as_ref().expect("checked");
                    let q = query
                        .cdssm_vector
                        .clone()
                        .unwrap_or_else(|| cdssm_forward(&query.tokens, p));
                    cosine(&q, &cdssm_forward(doc, p))
                }
            };
            values.push(finite_or(v, 0.0));
        }
    }
    let d = &t.dominance;
    for g in &cfg.groups {
        match g {
            FeatureGroup::Fraction => values.extend([d.frac_raw, d.frac_cleaned, d.frac_main]),
            FeatureGroup::Position => {
                values.extend([d.pos_raw, d.pos_cleaned, d.pos_main, t.table_index as f64])
            }
            FeatureGroup::Quality => {
                let q = compute_quality(t);
                values.extend([
                    q.n_rows as f64,
                    q.n_cols as f64,
                    q.empty_cell_fraction,
                    q.has_column_names as u8 as f64,
                    q.has_numeric_column as u8 as f64,
                    q.numeric_column_count as f64,
                    q.subject_distinct_fraction,
                    q.type_consistency_mean,
                    q.type_consistency_min,
                ])
            }
        }
    }
    let names = cfg.feature_names();
    debug_assert_eq!(names.len(), values.len());
    Ok(FeatureVector {
        key: PairKey {
            query_id: query.query_id.clone(),
            doc_rank: t.doc_rank,
            table_index: t.table_index,
        },
        fingerprint: cfg.fingerprint(),
        names,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docmap::{tokenize, Strategy};
    use crate::extraction::extract_from_html;
    use crate::similarity::{tm_train, CdssmShape};
    use proptest::prelude::*;
    use proptest::strategy::Strategy as _;

    const PAGE: &str = "<html><head><title>Largest cities in California</title></head><body>\
        <h1>California cities by population</h1><table><tr><th>Rank</th><th>City</th><th>Population</th></tr>\
        <tr><td>1</td><td>Los Angeles</td><td>3,898,747</td></tr>\
        <tr><td>2</td><td>San Diego</td><td>1,386,932</td></tr>\
        <tr><td>3</td><td>San Jose</td><td>1,013,240</td></tr></table></body></html>";

    fn models(tables: &[ExtractedTable]) -> SimilarityModels {
        let pairs = vec![(
            tokenize("california cities"),
            tokenize("largest cities in california"),
        )];
        let (tm, _) = tm_train(&pairs, 3, 0.8).unwrap();
        SimilarityModels {
            bm25: Some(Bm25Model::fit(tables, Bm25Params::default())),
            tm: Some(tm),
            cdssm: Some(CdssmParams::init(
                CdssmShape {
                    trigram_dim: 64,
                    window: 3,
                    conv_dim: 8,
                    sem_dim: 4,
                },
                1,
            )),
        }
    }

    fn fixture() -> (Vec<ExtractedTable>, SimilarityModels) {
        let tables = extract_from_html(PAGE, "https://example.org/ca-cities", 1);
        let m = models(&tables);
        (tables, m)
    }

    #[test]
    fn six_similarity_features_for_two_docs_three_models() {
        let (tables, m) = fixture();
        let cfg = FeatureConfig::default();
        let q = QueryContext::new("q1", tokenize("california cities by population"), &m);
        let fv = assemble(&q, &tables[0], &m, &cfg).unwrap();
        let sims = fv
            .names
            .iter()
            .filter(|n| n.starts_with("bm25_") || n.starts_with("tm_") || n.starts_with("cdssm_"))
            .count();
        assert_eq!(sims, 6);
        assert_eq!(fv.names.len(), 6 + 3 + 4 + 9);
        assert!(fv.values.iter().all(|v| v.is_finite()));
        assert_eq!(fv.get("table_index"), Some(1.0));
    }

    #[test]
    fn cdssm_only_three_documents() {
        let (tables, m) = fixture();
        let cfg = FeatureConfig {
            strategy: Strategy::MDocCDocSDoc,
            similarities: vec![SimilarityKind::Cdssm],
            groups: vec![],
        };
        let q = QueryContext::new("q1", tokenize("california cities"), &m);
        let fv = assemble(&q, &tables[0], &m, &cfg).unwrap();
        assert_eq!(fv.names, vec!["cdssm_mdoc", "cdssm_cdoc", "cdssm_sdoc"]);
        let p = m.cdssm.as_ref().unwrap();
        let docs = build_documents(&tables[0], Strategy::MDocCDocSDoc);
        let expected = cosine(
            &cdssm_forward(&q.tokens, p),
            &cdssm_forward(docs.get(DocKind::MDoc).unwrap(), p),
        );
        assert_eq!(fv.values[0], expected);
    }

    #[test]
    fn empty_sdoc_gives_zero_cdssm() {
        let (mut tables, m) = fixture();
        tables[0].subject_col = None;
        let cfg = FeatureConfig {
            strategy: Strategy::MDocSDoc,
            similarities: vec![SimilarityKind::Cdssm],
            groups: vec![],
        };
        let q = QueryContext::new("q", tokenize("cities"), &m);
        let fv = assemble(&q, &tables[0], &m, &cfg).unwrap();
        assert_eq!(fv.get("cdssm_sdoc"), Some(0.0));
    }

    #[test]
    fn missing_model_is_an_error() {
        let (tables, mut m) = fixture();
        m.tm = None;
        let q = QueryContext::new("q", tokenize("cities"), &m);
        assert!(matches!(
            assemble(&q, &tables[0], &m, &FeatureConfig::default()),
            Err(Error::MissingModel("tm"))
        ));
    }

    #[test]
    fn empty_config_is_rejected() {
        let cfg = FeatureConfig {
            strategy: Strategy::Single,
            similarities: vec![],
            groups: vec![],
        };
        assert!(cfg.normalized().is_err());
    }

    fn any_config() -> impl proptest::strategy::Strategy<Value = FeatureConfig> {
        let strategies = prop_oneof![
            Just(Strategy::Single),
            Just(Strategy::MDocCDoc),
            Just(Strategy::MDocSDoc),
            Just(Strategy::MDocCDocSDoc)
        ];
        (strategies, 0u8..8, 0u8..8)
            .prop_filter("something enabled", |(_, s, g)| *s != 0 || *g != 0)
            .prop_map(|(strategy, s, g)| FeatureConfig {
                strategy,
                similarities: [
                    SimilarityKind::Bm25,
                    SimilarityKind::Tm,
                    SimilarityKind::Cdssm,
                ]
                .into_iter()
                .enumerate()
                .filter(|(i, _)| s & (1 << i) != 0)
                .map(|(_, k)| k)
                .collect(),
                groups: [
                    FeatureGroup::Fraction,
                    FeatureGroup::Position,
                    FeatureGroup::Quality,
                ]
                .into_iter()
                .enumerate()
                .filter(|(i, _)| g & (1 << i) != 0)
                .map(|(_, k)| k)
                .collect(),
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn length_depends_only_on_config(cfg in any_config(), query in "[a-z]{1,8}( [a-z]{1,8}){0,3}") {
            let (tables, m) = fixture();
            let q = QueryContext::new("q", tokenize(&query), &m);
            let fv = assemble(&q, &tables[0], &m, &cfg).unwrap();
            prop_assert_eq!(fv.values.len(), cfg.feature_names().len());
            prop_assert!(fv.values.iter().all(|v| v.is_finite()));
        }

        #[test]
        fn disabling_a_group_drops_only_its_features(cfg in any_config(), which in 0usize..3) {
            let group = [FeatureGroup::Fraction, FeatureGroup::Position, FeatureGroup::Quality][which];
            let mut smaller = cfg.clone();
            smaller.groups.retain(|g| *g != group);
            prop_assume!(smaller.normalized().is_ok());
            let (tables, m) = fixture();
            let q = QueryContext::new("q", tokenize("california cities"), &m);
            let full = assemble(&q, &tables[0], &m, &cfg).unwrap();
            let part = assemble(&q, &tables[0], &m, &smaller).unwrap();
            let dropped: Vec<&str> = if cfg.groups.contains(&group) { group.feature_names().to_vec() } else { vec![] };
            let kept: Vec<(&String, &f64)> = full
                .names
                .iter()
                .zip(&full.values)
                .filter(|(n, _)| !dropped.contains(&n.as_str()))
                .collect();
            let part_pairs: Vec<(&String, &f64)> = part.names.iter().zip(&part.values).collect();
            prop_assert_eq!(kept, part_pairs);
        }
    }
}
