//! Relational table extraction from HTML pages.
//!
//! [`extract_candidate_tables`] parses nothing itself; callers hand it a
//! [`DomTree`] from [`parse_html`]. Every table element whose span-expanded
//! grid passes [`is_relational`] becomes an [`ExtractedTable`] carrying its
//! data grid (header and footer rows split off into metadata), page metadata,
//! subject column and dominance features.

pub mod dom;
pub mod dominance;
pub mod grid;

use serde::{Deserialize, Serialize};

pub use dom::{parse_html, DomTree, Node, NodeId, NodeKind};
pub use dominance::{compute_dominance, dominance_counts, DominanceCounts, DominanceFeatures};
pub use grid::{build_grid, is_relational, CellGrid, RelationalContext, RowSection};

use crate::text::{is_numeric_column, normalize_whitespace, truncate_chars};

pub const PRECEDING_TEXT_MAX_CHARS: usize = 500;
/// Minimum distinct-value fraction for the preferred subject column.
pub const SUBJECT_DISTINCT_FRACTION: f64 = 0.8;

/// Identifies a candidate table within the ranked result list. Ordering is
/// (doc_rank, table_index), which is also the selector's tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TableKey {
    pub doc_rank: usize,
    pub table_index: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub url: String,
    pub page_title: String,
    pub h1_heading: String,
    /// Enclosing h2/h3/h4 chain, outermost first.
    pub section_headings: Vec<String>,
    pub preceding_text: String,
    pub caption: String,
    pub header_row: Option<Vec<String>>,
    pub footer_row: Option<Vec<String>>,
    pub column_names: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedTable {
    pub grid: Vec<Vec<String>>,
    pub metadata: TableMetadata,
    pub subject_col: Option<usize>,
    pub doc_rank: usize,
    pub table_index: usize,
    pub dominance: DominanceFeatures,
}

impl ExtractedTable {
    pub fn key(&self) -> TableKey {
        TableKey {
            doc_rank: self.doc_rank,
            table_index: self.table_index,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.grid.len()
    }

    pub fn n_cols(&self) -> usize {
        self.grid.first().map_or(0, Vec::len)
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = &str> + '_ {
        self.grid.iter().map(move |r| r[col].as_str())
    }

    pub fn is_numeric_column(&self, col: usize) -> bool {
        is_numeric_column(self.column(col))
    }

    /// Name of column `col`, or "" when the table has no column names.
    pub fn column_name(&self, col: usize) -> &str {
        self.metadata
            .column_names
            .as_ref()
            .and_then(|names| names.get(col))
            .map_or("", String::as_str)
    }
}

/// Distinct non-empty values divided by the row count.
pub fn distinct_fraction<'a>(cells: impl IntoIterator<Item = &'a str>) -> f64 {
    let mut n = 0usize;
    let mut seen = std::collections::HashSet::new();
    for c in cells {
        n += 1;
        if !c.is_empty() {
            seen.insert(c);
        }
    }
    if n == 0 {
        0.0
    } else {
        seen.len() as f64 / n as f64
    }
}

/// Leftmost non-numeric column with distinct fraction >= 0.8, else the
/// leftmost non-numeric column, else none.
pub fn detect_subject_column(grid: &[Vec<String>]) -> Option<usize> {
    let n_cols = grid.first().map_or(0, Vec::len);
    let column = |c: usize| grid.iter().map(move |r| r[c].as_str());
    let non_numeric: Vec<usize> = (0..n_cols)
        .filter(|&c| !is_numeric_column(column(c)))
        .collect();
    non_numeric
        .iter()
        .copied()
        .find(|&c| distinct_fraction(column(c)) >= SUBJECT_DISTINCT_FRACTION)
        .or_else(|| non_numeric.first().copied())
}

fn normalized_text(dom: &DomTree, id: NodeId) -> String {
    normalize_whitespace(&dom.text_content(id))
}

const PRECEDING_BLOCKS: &[&str] = &[
    "p",
    "div",
    "section",
    "article",
    "blockquote",
    "ul",
    "ol",
    "dl",
    "pre",
    "header",
    "aside",
    "main",
    "figure",
    "center",
    "address",
    "form",
    "fieldset",
    "details",
];

fn preceding_text(dom: &DomTree, table: NodeId) -> String {
    let mut cur = table;
    while let Some(parent) = dom.node(cur).parent {
        let siblings = &dom.node(parent).children;
        let pos = siblings.iter().position(|&s| s == cur).unwrap_or(0);
        for &sib in siblings[..pos].iter().rev() {
            let node = dom.node(sib);
            if node.tag().map_or(false, |t| PRECEDING_BLOCKS.contains(&t)) {
                let text = normalized_text(dom, sib);
                if !text.is_empty() {
                    return truncate_chars(&text, PRECEDING_TEXT_MAX_CHARS).to_string();
                }
            }
        }
        cur = parent;
    }
    String::new()
}

fn section_headings(dom: &DomTree, table: NodeId) -> Vec<String> {
    let start = dom.node(table).start;
    let mut chain: [Option<String>; 3] = [None, None, None];
    for id in dom.preorder() {
        let node = dom.node(id);
        if node.start >= start {
            break;
        }
        let level = match node.tag() {
            Some("h2") => 0,
            Some("h3") => 1,
            Some("h4") => 2,
            _ => continue,
        };
        if node.end > start {
            continue;
        }
        chain[level] = Some(normalized_text(dom, id));
        for deeper in chain.iter_mut().skip(level + 1) {
            *deeper = None;
        }
    }
    chain
        .into_iter()
        .flatten()
        .filter(|h| !h.is_empty())
        .collect()
}

/// Splits the full grid into header row(s), data rows and footer row(s):
/// thead/tfoot rows when present, otherwise a first row made of `th` cells is
/// the header.
struct SplitGrid {
    header_rows: Vec<Vec<String>>,
    footer_rows: Vec<Vec<String>>,
    data: Vec<Vec<String>>,
}

fn split_grid(grid: &CellGrid) -> SplitGrid {
    let texts = grid.texts();
    let has_thead = grid.sections.contains(&RowSection::Head);
    let mut out = SplitGrid {
        header_rows: Vec::new(),
        footer_rows: Vec::new(),
        data: Vec::new(),
    };
    for (i, (row, section)) in texts.into_iter().zip(&grid.sections).enumerate() {
        match section {
            RowSection::Head => out.header_rows.push(row),
            RowSection::Foot => out.footer_rows.push(row),
            RowSection::Body => {
                let th_row = i == 0 && !has_thead && grid.rows[0].iter().all(|c| c.is_header);
                if th_row {
                    out.header_rows.push(row);
                } else {
                    out.data.push(row);
                }
            }
        }
    }
    out
}

/// Page-level metadata for `table`. `grid` is the table's full grid.
pub fn extract_metadata(dom: &DomTree, table: NodeId, grid: &CellGrid, url: &str) -> TableMetadata {
    let first_text = |tag: &str| {
        dom.elements_by_tag(tag)
            .first()
            .map(|&id| normalized_text(dom, id))
            .unwrap_or_default()
    };
    let caption = dom
        .node(table)
        .children
        .iter()
        .find(|&&c| dom.node(c).is_element("caption"))
        .map(|&c| normalized_text(dom, c))
        .unwrap_or_default();
    let split = split_grid(grid);
    TableMetadata {
        url: normalize_whitespace(url),
        page_title: first_text("title"),
        h1_heading: first_text("h1"),
        section_headings: section_headings(dom, table),
        preceding_text: preceding_text(dom, table),
        caption,
        header_row: split.header_rows.first().cloned(),
        footer_row: split.footer_rows.last().cloned(),
        column_names: split.header_rows.last().cloned(),
    }
}

/// All relational tables of a page, in document order, with consecutive
/// 1-based `table_index`.
pub fn extract_candidate_tables(
    dom: &DomTree,
    source: &str,
    url: &str,
    doc_rank: usize,
) -> Vec<ExtractedTable> {
    assert!(doc_rank >= 1, "doc_rank is 1-based");
    let mut out = Vec::new();
    for table in dom.elements_by_tag("table") {
        let grid = build_grid(dom, table);
        if !is_relational(&grid, &RelationalContext::of(dom, table)) {
            continue;
        }
        let split = split_grid(&grid);
        if split.data.len() < 2 {
            continue;
        }
        let metadata = extract_metadata(dom, table, &grid, url);
        let table_index = out.len() + 1;
        out.push(ExtractedTable {
            subject_col: detect_subject_column(&split.data),
            grid: split.data,
            metadata,
            doc_rank,
            table_index,
            dominance: compute_dominance(dom, source, table, table_index),
        });
    }
    out
}

/// Parses `source` and extracts its relational tables.
pub fn extract_from_html(source: &str, url: &str, doc_rank: usize) -> Vec<ExtractedTable> {
    let dom = parse_html(source);
    extract_candidate_tables(&dom, source, url, doc_rank)
}
