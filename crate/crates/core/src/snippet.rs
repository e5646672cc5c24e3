//! m x n snippet of a selected table: promote rows and columns with
//! exclusive keyword matches, round-robin over entity-column cells, other
//! cells and column names, then fill with the top rows and leftmost columns.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::docmap::{tokenize, tokenize_url};
use crate::extraction::{distinct_fraction, ExtractedTable};
use crate::{Error, Result};

pub const DEFAULT_ROWS: usize = 4;
pub const DEFAULT_COLS: usize = 4;
pub const MIN_COVERAGE: f64 = 0.5;
pub const SYNONYM_WEIGHT: f64 = 0.5;
pub const MAX_EMPTY_FRACTION: f64 = 0.5;
pub const MIN_DISTINCT_FRACTION: f64 = 0.2;

/// Query token to synonyms. The text format is one entry per line, the
/// query token followed by its synonyms, whitespace separated; `#` starts a
/// comment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Synonyms(pub BTreeMap<String, Vec<String>>);

impl Synonyms {
    pub fn parse(text: &str) -> Self {
        let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("");
            let mut words = line.split_whitespace().map(|w| fold(&w.to_lowercase()));
            if let Some(key) = words.next() {
                let entry = map.entry(key).or_default();
                for w in words {
                    if !entry.contains(&w) {
                        entry.push(w);
                    }
                }
            }
        }
        Synonyms(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        std::fs::read_to_string(path)
            .map(|s| Self::parse(&s))
            .map_err(|e| Error::io(path, e))
    }

    fn of(&self, folded: &str) -> &[String] {
        self.0.get(folded).map_or(&[], Vec::as_slice)
    }
}

/// Light plural folding so "cities" and "city" match.
pub fn fold(token: &str) -> String {
    if token.len() > 4 && token.ends_with("ies") {
        format!("{}y", &token[..token.len() - 3])
    } else if token.len() > 3 && token.ends_with('s') && !token.ends_with("ss") {
        token[..token.len() - 1].to_string()
    } else {
        token.to_string()
    }
}

fn folded_tokens(text: &str) -> Vec<String> {
    tokenize(text).iter().map(|t| fold(t)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchSource {
    EntityCell,
    AttributeCell,
    ColumnName,
}

/// `row` is `None` for column-name matches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub row: Option<usize>,
    pub col: usize,
    pub desirability: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchLists {
    pub ec: Vec<Match>,
    pub ac: Vec<Match>,
    pub cn: Vec<Match>,
}

/// Page-level metadata tokens; column names and the header row are left out
/// so they can still produce column-name matches.
fn metadata_vocab(t: &ExtractedTable) -> HashSet<String> {
    let m = &t.metadata;
    let mut out: Vec<String> = tokenize_url(&m.url).iter().map(|t| fold(t)).collect();
    for text in [&m.page_title, &m.h1_heading, &m.caption, &m.preceding_text]
        .into_iter()
        .chain(&m.section_headings)
    {
        out.extend(folded_tokens(text));
    }
    for cell in m.footer_row.iter().flatten() {
        out.extend(folded_tokens(cell));
    }
    out.into_iter().collect()
}

/// Exact and synonym matches of `text` against the exclusive query keywords,
/// and the cell's token count.
fn count_matches(
    text: &str,
    keywords: &BTreeSet<String>,
    synonyms: &Synonyms,
) -> (usize, usize, usize) {
    let tokens = folded_tokens(text);
    let (mut exact, mut syn) = (0, 0);
    for tok in &tokens {
        if keywords.contains(tok) {
            exact += 1;
        } else if keywords.iter().any(|k| synonyms.of(k).contains(tok)) {
            syn += 1;
        }
    }
    (exact, syn, tokens.len())
}

fn desirability(exact: usize, syn: usize, len: usize) -> f64 {
    (exact as f64 + SYNONYM_WEIGHT * syn as f64) / len as f64
}

fn sort_matches(list: &mut [Match]) {
    list.sort_by(|a, b| {
        b.desirability
            .total_cmp(&a.desirability)
            .then(a.row.cmp(&b.row))
            .then(a.col.cmp(&b.col))
    });
}

pub fn find_matches(query: &[String], t: &ExtractedTable, synonyms: &Synonyms) -> MatchLists {
    let meta = metadata_vocab(t);
    let keywords: BTreeSet<String> = query
        .iter()
        .map(|q| fold(&q.to_lowercase()))
        .filter(|q| !meta.contains(q))
        .collect();
    let mut lists = MatchLists::default();
    if keywords.is_empty() {
        return lists;
    }
    for (r, row) in t.grid.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            let (exact, syn, len) = count_matches(cell, &keywords, synonyms);
            if exact + syn == 0 || ((exact + syn) as f64 / len as f64) < MIN_COVERAGE {
                continue;
            }
            let m = Match {
                row: Some(r),
                col: c,
                desirability: desirability(exact, syn, len),
            };
            if t.subject_col == Some(c) {
                lists.ec.push(m);
            } else {
                lists.ac.push(m);
            }
        }
    }
    for c in 0..t.n_cols() {
        let (exact, syn, len) = count_matches(t.column_name(c), &keywords, synonyms);
        if exact + syn > 0 {
            lists.cn.push(Match {
                row: None,
                col: c,
                desirability: desirability(exact, syn, len),
            });
        }
    }
    sort_matches(&mut lists.ec);
    sort_matches(&mut lists.ac);
    sort_matches(&mut lists.cn);
    lists
}

/// `X ∪ {y}` while `|X| < cap`, otherwise `X`. Returns whether `X` grew.
pub fn union_capped(set: &mut BTreeSet<usize>, y: usize, cap: usize) -> bool {
    set.len() < cap && set.insert(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub source: MatchSource,
    pub matched: Match,
    pub row_added: bool,
    pub col_added: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snippet {
    /// Ascending grid row indices.
    pub rows: Vec<usize>,
    /// Columns in table order.
    pub cols: Vec<usize>,
    pub column_names: Vec<String>,
    pub cells: Vec<Vec<String>>,
    pub title: String,
    pub url: String,
}

fn column_eligible(t: &ExtractedTable, c: usize) -> bool {
    let n = t.n_rows();
    if n == 0 {
        return false;
    }
    let empty = t.column(c).filter(|s| s.trim().is_empty()).count();
    empty as f64 / n as f64 <= MAX_EMPTY_FRACTION
        && distinct_fraction(t.column(c)) >= MIN_DISTINCT_FRACTION
}

pub fn generate(
    t: &ExtractedTable,
    query: &[String],
    m: usize,
    n: usize,
    synonyms: &Synonyms,
) -> Result<Snippet> {
    generate_traced(t, query, m, n, synonyms).map(|(s, _)| s)
}

/// The subject column occupies one column slot before the round-robin starts.
pub fn generate_traced(
    t: &ExtractedTable,
    query: &[String],
    m: usize,
    n: usize,
    synonyms: &Synonyms,
) -> Result<(Snippet, Vec<TraceStep>)> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(
            "snippet size must be at least 1 x 1".into(),
        ));
    }
    let lists = find_matches(query, t, synonyms);
    let mut rows = BTreeSet::new();
    let mut cols = BTreeSet::new();
    if let Some(s) = t.subject_col {
        cols.insert(s);
    }
    let mut trace = Vec::new();
    let mut queues = [
        (MatchSource::EntityCell, lists.ec.into_iter()),
        (MatchSource::AttributeCell, lists.ac.into_iter()),
        (MatchSource::ColumnName, lists.cn.into_iter()),
    ];
    loop {
        let mut popped = false;
        for (source, queue) in queues.iter_mut() {
            let Some(a) = queue.next() else { continue };
            popped = true;
            let row_added = a.row.map_or(false, |r| union_capped(&mut rows, r, m));
            let col_added = union_capped(&mut cols, a.col, n);
            trace.push(TraceStep {
                source: *source,
                matched: a,
                row_added,
                col_added,
            });
        }
        if !popped || (rows.len() >= m && cols.len() >= n) {
            break;
        }
    }
    for r in 0..t.n_rows() {
        if rows.len() >= m {
            break;
        }
        rows.insert(r);
    }
    for c in 0..t.n_cols() {
        if cols.len() >= n {
            break;
        }
        if column_eligible(t, c) {
            cols.insert(c);
        }
    }
    let rows: Vec<usize> = rows.into_iter().collect();
    let cols: Vec<usize> = cols.into_iter().collect();
    let snippet = Snippet {
        column_names: cols.iter().map(|&c| t.column_name(c).to_string()).collect(),
        cells: rows
            .iter()
            .map(|&r| cols.iter().map(|&c| t.grid[r][c].clone()).collect())
            .collect(),
        title: if t.metadata.page_title.is_empty() {
            t.metadata.h1_heading.clone()
        } else {
            t.metadata.page_title.clone()
        },
        url: t.metadata.url.clone(),
        rows,
        cols,
    };
    Ok((snippet, trace))
}
