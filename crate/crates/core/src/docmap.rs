//! Mapping a table to token documents.
//!
//! A table becomes one document (`Single`: metadata then cells) or several
//! separate documents: metadata (`mdoc`), cell content (`cdoc`) and subject
//! column (`sdoc`). Cell content skips numeric columns entirely.

use serde::{Deserialize, Serialize};

use crate::extraction::ExtractedTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    Single,
    MDocCDoc,
    MDocSDoc,
    MDocCDocSDoc,
}

impl Strategy {
    pub fn doc_kinds(self) -> &'static [DocKind] {
        match self {
            Strategy::Single => &[DocKind::Doc],
            Strategy::MDocCDoc => &[DocKind::MDoc, DocKind::CDoc],
            Strategy::MDocSDoc => &[DocKind::MDoc, DocKind::SDoc],
            Strategy::MDocCDocSDoc => &[DocKind::MDoc, DocKind::CDoc, DocKind::SDoc],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Single => "Single",
            Strategy::MDocCDoc => "MDocCDoc",
            Strategy::MDocSDoc => "MDocSDoc",
            Strategy::MDocCDocSDoc => "MDocCDocSDoc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocKind {
    Doc,
    MDoc,
    CDoc,
    SDoc,
}

impl DocKind {
    pub fn name(self) -> &'static str {
        match self {
            DocKind::Doc => "doc",
            DocKind::MDoc => "mdoc",
            DocKind::CDoc => "cdoc",
            DocKind::SDoc => "sdoc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentSet {
    pub strategy: Strategy,
    pub docs: Vec<(DocKind, Vec<String>)>,
}

impl DocumentSet {
    pub fn get(&self, kind: DocKind) -> Option<&[String]> {
        self.docs
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, d)| d.as_slice())
    }
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn tokenize_into(text: &str, out: &mut Vec<String>) {
    out.extend(tokenize(text));
}

/// Host split on dots and path split on `/`, `-`, `_`; scheme, query string
/// and fragment dropped.
pub fn tokenize_url(url: &str) -> Vec<String> {
    let rest = url.split_once("://").map_or(url, |(_, r)| r);
    let rest = rest.split(['?', '#']).next().unwrap_or("");
    tokenize(rest)
}

pub fn metadata_tokens(t: &ExtractedTable) -> Vec<String> {
    let m = &t.metadata;
    let mut out = tokenize_url(&m.url);
    tokenize_into(&m.page_title, &mut out);
    tokenize_into(&m.h1_heading, &mut out);
    for h in &m.section_headings {
        tokenize_into(h, &mut out);
    }
    tokenize_into(&m.caption, &mut out);
    for row in [&m.header_row, &m.footer_row, &m.column_names]
        .into_iter()
        .flatten()
    {
        for cell in row {
            tokenize_into(cell, &mut out);
        }
    }
    out
}

pub fn cell_tokens(t: &ExtractedTable) -> Vec<String> {
    let keep: Vec<bool> = (0..t.n_cols()).map(|c| !t.is_numeric_column(c)).collect();
    let mut out = Vec::new();
    for row in &t.grid {
        for (cell, _) in row.iter().zip(&keep).filter(|(_, k)| **k) {
            tokenize_into(cell, &mut out);
        }
    }
    out
}

pub fn subject_tokens(t: &ExtractedTable) -> Vec<String> {
    let Some(col) = t.subject_col else {
        return Vec::new();
    };
    let mut out = tokenize(t.column_name(col));
    for cell in t.column(col) {
        tokenize_into(cell, &mut out);
    }
    out
}

pub fn build_documents(t: &ExtractedTable, strategy: Strategy) -> DocumentSet {
    let docs = strategy
        .doc_kinds()
        .iter()
        .map(|&kind| {
            let tokens = match kind {
                DocKind::Doc => {
                    let mut d = metadata_tokens(t);
                    d.extend(cell_tokens(t));
                    d
                }
                DocKind::MDoc => metadata_tokens(t),
                DocKind::CDoc => cell_tokens(t),
                DocKind::SDoc => subject_tokens(t),
            };
            (kind, tokens)
        })
        .collect();
    DocumentSet { strategy, docs }
}
