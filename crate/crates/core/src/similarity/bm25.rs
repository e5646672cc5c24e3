//! Okapi BM25 word matching.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub doc_count: usize,
    pub df: BTreeMap<String, usize>,
    pub avgdl: f64,
}

impl CorpusStats {
    pub fn df(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`, always positive.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count as f64;
        let df = self.df(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }
}

pub fn corpus_stats<D: AsRef<[String]>>(docs: &[D]) -> CorpusStats {
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    let mut total_len = 0usize;
    for doc in docs {
        let doc = doc.as_ref();
        total_len += doc.len();
        let unique: HashSet<&String> = doc.iter().collect();
        for term in unique {
            *df.entry(term.clone()).or_default() += 1;
        }
    }
    let doc_count = docs.len();
    CorpusStats {
        doc_count,
        df,
        avgdl: if doc_count == 0 {
            0.0
        } else {
            total_len as f64 / doc_count as f64
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// BM25 of `doc` for `query`. Repeated query terms contribute once per
/// occurrence.
pub fn bm25(query: &[String], doc: &[String], stats: &CorpusStats, params: Bm25Params) -> f64 {
    if query.is_empty() || doc.is_empty() {
        return 0.0;
    }
    let mut tf: HashMap<&str, usize> = HashMap::new();
    for t in doc {
        *tf.entry(t.as_str()).or_default() += 1;
    }
    let len_ratio = if stats.avgdl > 0.0 {
        doc.len() as f64 / stats.avgdl
    } else {
        1.0
    };
    let norm = params.k1 * (1.0 - params.b + params.b * len_ratio);
    query
        .iter()
        .map(|q| match tf.get(q.as_str()) {
            Some(&f) => {
                let f = f as f64;
                stats.idf(q) * f * (params.k1 + 1.0) / (f + norm)
            }
            None => 0.0,
        })
        .sum()
}
