//! File-based corpus standing in for a web search engine.
//!
//! ```text
//! root/queries.jsonl   {"schema_version":1,"id":"q1","text":"...","docs":[{"rank":1,"path":"docs/a.html","url":"..."}]}
//! root/docs/**         HTML documents
//! root/labels.jsonl    {"schema_version":1,"query_id":"q1","doc_rank":1,"table_index":1,"label":1}   (optional)
//! root/clicks.jsonl    {"schema_version":1,"query":"...","doc":"..."}                                (optional)
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::extraction::{extract_from_html, ExtractedTable, TableKey};
use crate::{Error, Result};

pub const CORPUS_SCHEMA_VERSION: u32 = 1;
pub const QUERIES_FILE: &str = "queries.jsonl";
pub const LABELS_FILE: &str = "labels.jsonl";
pub const CLICKS_FILE: &str = "clicks.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocRecord {
    pub rank: usize,
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub schema_version: u32,
    pub id: String,
    pub text: String,
    pub docs: Vec<DocRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub schema_version: u32,
    pub query_id: String,
    pub doc_rank: usize,
    pub table_index: usize,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickRecord {
    pub schema_version: u32,
    pub query: String,
    pub doc: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusQuery {
    pub id: String,
    pub text: String,
    pub docs: Vec<DocRecord>,
    /// Candidate tables of all documents, in (doc_rank, table_index) order.
    pub tables: Vec<ExtractedTable>,
    pub labels: BTreeMap<TableKey, bool>,
}

impl CorpusQuery {
    pub fn label(&self, key: TableKey) -> Option<bool> {
        self.labels.get(&key).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub root: PathBuf,
    /// Largest number of documents consumed for any query.
    pub k: usize,
    pub queries: Vec<CorpusQuery>,
    pub clicks: Vec<(String, String)>,
}

fn corpus_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Corpus {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_jsonl<T: DeserializeOwned>(
    path: &Path,
    version: impl Fn(&T) -> u32,
) -> Result<Vec<(usize, T)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: T =
            serde_json::from_str(line).map_err(|e| corpus_err(path, line_no, e.to_string()))?;
        let v = version(&rec);
        if v != CORPUS_SCHEMA_VERSION {
            return Err(corpus_err(
                path,
                line_no,
                format!("unsupported schema_version {v} (expected {CORPUS_SCHEMA_VERSION})"),
            ));
        }
        out.push((line_no, rec));
    }
    Ok(out)
}

/// Reads a document leniently; invalid UTF-8 is replaced.
pub fn read_document(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

pub fn document_url(doc: &DocRecord) -> String {
    doc.url.clone().unwrap_or_else(|| doc.path.clone())
}

/// Extracts every candidate table of a ranked document list.
pub fn extract_documents(docs: &[(DocRecord, String)]) -> Vec<ExtractedTable> {
    docs.iter()
        .flat_map(|(d, html)| extract_from_html(html, &document_url(d), d.rank))
        .collect()
}

/// Loads and validates a corpus. `k` keeps only documents ranked `<= k`.
pub fn ingest_corpus(root: &Path, k: Option<usize>) -> Result<Corpus> {
    let qpath = root.join(QUERIES_FILE);
    if !qpath.is_file() {
        return Err(corpus_err(&qpath, 0, "missing queries file"));
    }
    let records = read_jsonl::<QueryRecord>(&qpath, |r| r.schema_version)?;
    let mut seen = BTreeSet::new();
    let mut validated = Vec::with_capacity(records.len());
    for (line, mut rec) in records {
        if !seen.insert(rec.id.clone()) {
            return Err(corpus_err(
                &qpath,
                line,
                format!("duplicate query id `{}`", rec.id),
            ));
        }
        rec.docs.sort_by_key(|d| d.rank);
        for (i, d) in rec.docs.iter().enumerate() {
            if d.rank != i + 1 {
                return Err(corpus_err(
                    &qpath,
                    line,
                    format!(
                        "rank gap in query `{}`: expected rank {}, found {}",
                        rec.id,
                        i + 1,
                        d.rank
                    ),
                ));
            }
        }
        if let Some(k) = k {
            rec.docs.truncate(k);
        }
        validated.push(rec);
    }

    let loaded: Vec<Result<CorpusQuery>> = validated
        .into_par_iter()
        .map(|rec| {
            let docs = rec
                .docs
                .iter()
                .map(|d| Ok((d.clone(), read_document(&root.join(&d.path))?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(CorpusQuery {
                tables: extract_documents(&docs),
                id: rec.id,
                text: rec.text,
                docs: rec.docs,
                labels: BTreeMap::new(),
            })
        })
        .collect();
    let mut queries = loaded.into_iter().collect::<Result<Vec<_>>>()?;

    let lpath = root.join(LABELS_FILE);
    if lpath.is_file() {
        let index: BTreeMap<String, usize> = queries
            .iter()
            .enumerate()
            .map(|(i, q)| (q.id.clone(), i))
            .collect();
        for (line, rec) in read_jsonl::<LabelRecord>(&lpath, |r| r.schema_version)? {
            let Some(&qi) = index.get(&rec.query_id) else {
                return Err(corpus_err(
                    &lpath,
                    line,
                    format!("unknown query `{}`", rec.query_id),
                ));
            };
            let q = &mut queries[qi];
            let key = TableKey {
                doc_rank: rec.doc_rank,
                table_index: rec.table_index,
            };
            if !q.tables.iter().any(|t| t.key() == key) {
                return Err(corpus_err(
                    &lpath,
                    line,
                    format!(
                        "label references nonexistent table (doc_rank {}, table_index {}) of query `{}`",
                        rec.doc_rank, rec.table_index, rec.query_id
                    ),
                ));
            }
            if rec.label > 1 {
                return Err(corpus_err(
                    &lpath,
                    line,
                    format!("label must be 0 or 1, got {}", rec.label),
                ));
            }
            if q.labels.insert(key, rec.label == 1).is_some() {
                return Err(corpus_err(&lpath, line, "duplicate label"));
            }
        }
    }

    let cpath = root.join(CLICKS_FILE);
    let clicks = if cpath.is_file() {
        read_jsonl::<ClickRecord>(&cpath, |r| r.schema_version)?
            .into_iter()
            .map(|(_, r)| (r.query, r.doc))
            .collect()
    } else {
        Vec::new()
    };

    Ok(Corpus {
        root: root.to_path_buf(),
        k: queries.iter().map(|q| q.docs.len()).max().unwrap_or(0),
        queries,
        clicks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAGE: &str = "<html><head><title>Cities</title></head><body><h1>Cities</h1><table>\
        <tr><th>City</th><th>Pop</th></tr><tr><td>A</td><td>1</td></tr><tr><td>B</td><td>2</td></tr>\
        </table></body></html>";

    fn write(dir: &Path, name: &str, text: &str) {
        let p = dir.join(name);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, text).unwrap();
    }

    fn query_line(id: &str, ranks: &[usize]) -> String {
        let docs: Vec<DocRecord> = ranks
            .iter()
            .map(|&r| DocRecord {
                rank: r,
                path: "docs/a.html".into(),
                url: None,
            })
            .collect();
        serde_json::to_string(&QueryRecord {
            schema_version: 1,
            id: id.into(),
            text: "cities".into(),
            docs,
        })
        .unwrap()
    }

    #[test]
    fn minimal_corpus() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "docs/a.html", PAGE);
        write(dir.path(), QUERIES_FILE, &query_line("q1", &[1]));
        write(
            dir.path(),
            LABELS_FILE,
            r#"{"schema_version":1,"query_id":"q1","doc_rank":1,"table_index":1,"label":1}"#,
        );
        let c = ingest_corpus(dir.path(), None).unwrap();
        assert_eq!(c.k, 1);
        assert_eq!(c.queries[0].tables.len(), 1);
        assert_eq!(c.queries[0].label(c.queries[0].tables[0].key()), Some(true));
    }

    #[test]
    fn five_docs_give_k5_and_k_truncates() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "docs/a.html", PAGE);
        write(
            dir.path(),
            QUERIES_FILE,
            &query_line("q1", &[3, 1, 2, 5, 4]),
        );
        assert_eq!(ingest_corpus(dir.path(), None).unwrap().k, 5);
        assert_eq!(ingest_corpus(dir.path(), Some(2)).unwrap().k, 2);
    }

    #[test]
    fn rank_gap_is_reported_with_line() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "docs/a.html", PAGE);
        write(
            dir.path(),
            QUERIES_FILE,
            &format!(
                "{}\n{}\n",
                query_line("q1", &[1]),
                query_line("q2", &[1, 3])
            ),
        );
        let err = ingest_corpus(dir.path(), None).unwrap_err();
        assert!(
            matches!(&err, Error::Corpus { line: 2, message, .. } if message.contains("rank gap")),
            "{err}"
        );
    }

    #[test]
    fn label_for_missing_table() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "docs/a.html", PAGE);
        write(dir.path(), QUERIES_FILE, &query_line("q1", &[1]));
        write(
            dir.path(),
            LABELS_FILE,
            "\n{\"schema_version\":1,\"query_id\":\"q1\",\"doc_rank\":1,\"table_index\":2,\"label\":0}\n",
        );
        let err = ingest_corpus(dir.path(), None).unwrap_err();
        assert!(
            matches!(&err, Error::Corpus { line: 2, message, .. } if message.contains("nonexistent"))
        );
    }

    #[test]
    fn missing_queries_file() {
        let dir = tempfile::tempdir().unwrap();
        let err = ingest_corpus(dir.path(), None).unwrap_err();
        assert!(err.to_string().contains("missing queries file"));
    }

    #[test]
    fn bad_schema_version() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            QUERIES_FILE,
            r#"{"schema_version":9,"id":"q","text":"x","docs":[]}"#,
        );
        assert!(ingest_corpus(dir.path(), None).is_err());
    }
}
