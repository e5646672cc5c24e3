//! Cell grid extraction with row/col span expansion, and the relational-table
//! heuristics.

use super::dom::{DomTree, NodeId};
use crate::text::normalize_whitespace;

/// Spans larger than this are clamped.
const MAX_SPAN: usize = 100;
/// Cells whose median length exceeds this are prose, not data.
pub const MAX_MEDIAN_CELL_CHARS: usize = 100;
pub const MAX_EMPTY_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSection {
    Head,
    Body,
    Foot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridCell {
    pub text: String,
    pub is_header: bool,
    pub has_nested_table: bool,
}

impl GridCell {
    fn empty() -> Self {
        GridCell {
            text: String::new(),
            is_header: false,
            has_nested_table: false,
        }
    }
}

/// Rectangular grid of a table element, spans expanded, all rows included.
#[derive(Debug, Clone, Default)]
pub struct CellGrid {
    pub rows: Vec<Vec<GridCell>>,
    pub sections: Vec<RowSection>,
}

impl CellGrid {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn texts(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|c| c.text.clone()).collect())
            .collect()
    }

    pub fn from_texts(rows: &[Vec<&str>]) -> Self {
        let width = rows.iter().map(Vec::len).max().unwrap_or(0);
        CellGrid {
            rows: rows
                .iter()
                .map(|r| {
                    let mut out: Vec<GridCell> = r
                        .iter()
                        .map(|t| GridCell {
                            text: t.to_string(),
                            is_header: false,
                            has_nested_table: false,
                        })
                        .collect();
                    out.resize(width, GridCell::empty());
                    out
                })
                .collect(),
            sections: vec![RowSection::Body; rows.len()],
        }
    }
}

/// Context about the table element that is not visible in the grid itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct RelationalContext {
    pub role_presentation: bool,
}

impl RelationalContext {
    pub fn of(dom: &DomTree, table: NodeId) -> Self {
        let role = dom.node(table).attr("role").unwrap_or("");
        RelationalContext {
            role_presentation: role.eq_ignore_ascii_case("presentation")
                || role.eq_ignore_ascii_case("none"),
        }
    }
}

/// Collects the rows that belong to `table` (not to tables nested inside it),
/// tagging each with its thead/tbody/tfoot section.
fn table_rows(dom: &DomTree, table: NodeId) -> Vec<(NodeId, RowSection)> {
    let mut out = Vec::new();
    let mut stack: Vec<(NodeId, RowSection)> = dom
        .node(table)
        .children
        .iter()
        .rev()
        .map(|&c| (c, RowSection::Body))
        .collect();
    while let Some((id, section)) = stack.pop() {
        let node = dom.node(id);
        let Some(tag) = node.tag() else { continue };
        match tag {
            "table" => continue,
            "tr" => {
                out.push((id, section));
                continue;
            }
            _ => {}
        }
        let section = match tag {
            "thead" => RowSection::Head,
            "tfoot" => RowSection::Foot,
            "tbody" => RowSection::Body,
            _ => section,
        };
        for &c in node.children.iter().rev() {
            stack.push((c, section));
        }
    }
    out
}

fn parse_span(value: Option<&str>) -> usize {
    value
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(1)
        .min(MAX_SPAN)
}

/// Builds the span-expanded grid for a table element. Ragged rows are padded
/// on the right with empty cells.
pub fn build_grid(dom: &DomTree, table: NodeId) -> CellGrid {
    let rows = table_rows(dom, table);
    let n_rows = rows.len();
    let mut slots: Vec<Vec<Option<GridCell>>> = vec![Vec::new(); n_rows];
    let mut sections = Vec::with_capacity(n_rows);
    for (r, (tr, section)) in rows.iter().enumerate() {
        sections.push(*section);
        let mut col = 0usize;
        for &cell_id in &dom.node(*tr).children {
            let cell = dom.node(cell_id);
            let is_header = match cell.tag() {
                Some("td") => false,
                Some("th") => true,
                _ => continue,
            };
            let nested = dom
                .descendants(cell_id)
                .into_iter()
                .any(|d| dom.node(d).is_element("table"));
            let text = normalize_whitespace(
                &dom.text_content_skipping(cell_id, &|n| n.is_element("table")),
            );
            let colspan = parse_span(cell.attr("colspan"));
            let rowspan = parse_span(cell.attr("rowspan"));
            while slots[r].get(col).map_or(false, Option::is_some) {
                col += 1;
            }
            for dr in 0..rowspan.min(n_rows - r) {
                let row = &mut slots[r + dr];
                for dc in 0..colspan {
                    let c = col + dc;
                    if row.len() <= c {
                        row.resize(c + 1, None);
                    }
                    if row[c].is_none() {
                        row[c] = Some(GridCell {
                            text: text.clone(),
                            is_header,
                            has_nested_table: nested,
                        });
                    }
                }
            }
            col += colspan;
        }
    }
    let width = slots.iter().map(Vec::len).max().unwrap_or(0);
    let rows = slots
        .into_iter()
        .map(|row| {
            let mut row: Vec<GridCell> = row
                .into_iter()
                .map(|c| c.unwrap_or_else(GridCell::empty))
                .collect();
            row.resize(width, GridCell::empty());
            row
        })
        .collect();
    CellGrid { rows, sections }
}

fn median(values: &mut [usize]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    }
}

/// Number of distinct non-empty column vectors.
fn distinct_content_columns(grid: &CellGrid) -> usize {
    let mut seen: Vec<Vec<&str>> = Vec::new();
    for c in 0..grid.n_cols() {
        let col: Vec<&str> = grid.rows.iter().map(|r| r[c].text.as_str()).collect();
        if col.iter().all(|t| t.is_empty()) {
            continue;
        }
        if !seen.contains(&col) {
            seen.push(col);
        }
    }
    seen.len()
}

/// Relational-table heuristics: at least 2x2, no nested tables, at most half
/// the cells empty, median cell length at most 100 characters, not a
/// presentation table and at least two columns with distinct content.
pub fn is_relational(grid: &CellGrid, ctx: &RelationalContext) -> bool {
    if grid.n_rows() < 2 || grid.n_cols() < 2 {
        return false;
    }
    let cells = || grid.rows.iter().flatten();
    if cells().any(|c| c.has_nested_table) {
        return false;
    }
    let total = grid.n_rows() * grid.n_cols();
    let empty = cells().filter(|c| c.text.is_empty()).count();
    if empty as f64 > MAX_EMPTY_FRACTION * total as f64 {
        return false;
    }
    let mut lengths: Vec<usize> = cells().map(|c| c.text.chars().count()).collect();
    if median(&mut lengths) > MAX_MEDIAN_CELL_CHARS as f64 {
        return false;
    }
    if ctx.role_presentation {
        return false;
    }
    distinct_content_columns(grid) >= 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::dom::parse_html;

    fn grid_of(html: &str) -> CellGrid {
        let dom = parse_html(html);
        let t = dom.elements_by_tag("table")[0];
        build_grid(&dom, t)
    }

    #[test]
    fn header_row_table_is_relational() {
        let g = grid_of(
            "<table><tr><th>Name</th><th>Age</th></tr><tr><td>Ann</td><td>31</td></tr></table>",
        );
        assert_eq!((g.n_rows(), g.n_cols()), (2, 2));
        assert!(g.rows[0][0].is_header);
        assert!(is_relational(&g, &RelationalContext::default()));
    }

    #[test]
    fn single_row_is_not_relational() {
        let g = CellGrid::from_texts(&[vec!["a", "b", "c", "d", "e"]]);
        assert!(!is_relational(&g, &RelationalContext::default()));
    }

    #[test]
    fn nested_table_cell_rejects_outer() {
        let html = "<table><tr><td>a</td><td>b</td><td>c</td></tr>\
                    <tr><td>d</td><td><table><tr><td>x</td><td>y</td></tr><tr><td>z</td><td>w</td></tr></table></td><td>f</td></tr>\
                    <tr><td>g</td><td>h</td><td>i</td></tr></table>";
        let dom = parse_html(html);
        let tables = dom.elements_by_tag("table");
        let outer = build_grid(&dom, tables[0]);
        assert_eq!((outer.n_rows(), outer.n_cols()), (3, 3));
        assert!(!is_relational(&outer, &RelationalContext::default()));
        let inner = build_grid(&dom, tables[1]);
        assert_eq!((inner.n_rows(), inner.n_cols()), (2, 2));
        assert!(is_relational(&inner, &RelationalContext::default()));
    }

    #[test]
    fn spans_are_expanded() {
        let g = grid_of(
            "<table><tr><td rowspan=2>A</td><td colspan=2>B</td></tr>\
             <tr><td>C</td><td>D</td></tr><tr><td>E</td></tr></table>",
        );
        assert_eq!(
            g.texts(),
            vec![vec!["A", "B", "B"], vec!["A", "C", "D"], vec!["E", "", ""],]
        );
    }

    #[test]
    fn sections_follow_thead_tfoot() {
        let g = grid_of(
            "<table><thead><tr><th>a</th><th>b</th></tr></thead><tbody><tr><td>1</td><td>2</td></tr></tbody>\
             <tfoot><tr><td>s</td><td>t</td></tr></tfoot></table>",
        );
        assert_eq!(
            g.sections,
            vec![RowSection::Head, RowSection::Body, RowSection::Foot]
        );
    }

    #[test]
    fn heuristics_reject_sparse_prose_and_layout() {
        let sparse = CellGrid::from_texts(&[vec!["a", ""], vec!["", ""]]);
        assert!(!is_relational(&sparse, &RelationalContext::default()));
        let long = "x".repeat(150);
        let prose = CellGrid::from_texts(&[vec![&long, &long], vec![&long, "b"]]);
        assert!(!is_relational(&prose, &RelationalContext::default()));
        let layout = CellGrid::from_texts(&[vec!["menu", "menu"], vec!["body", "body"]]);
        assert!(!is_relational(&layout, &RelationalContext::default()));
        let ok = CellGrid::from_texts(&[vec!["a", "b"], vec!["c", "d"]]);
        assert!(!is_relational(
            &ok,
            &RelationalContext {
                role_presentation: true
            }
        ));
        assert!(is_relational(&ok, &RelationalContext::default()));
    }
}
