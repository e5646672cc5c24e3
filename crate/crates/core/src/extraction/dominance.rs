//! Dominance and position of a table within its page.
//!
//! Three scopes are measured, all in UTF-8 bytes:
//! - raw: the whole source;
//! - cleaned: the source with script elements, style elements and comments
//!   removed;
//! - main: the cleaned span of the lowest common ancestor of the first `<h1>`
//!   and the table (the whole cleaned document when the page has no `<h1>`).

use serde::{Deserialize, Serialize};

use super::dom::{DomTree, NodeId, NodeKind};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DominanceFeatures {
    pub frac_raw: f64,
    pub frac_cleaned: f64,
    pub frac_main: f64,
    pub pos_raw: f64,
    pub pos_cleaned: f64,
    pub pos_main: f64,
    pub table_index: usize,
}

/// Byte counts behind [`DominanceFeatures`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DominanceCounts {
    pub total_raw: usize,
    pub table_raw: usize,
    pub before_raw: usize,
    pub total_cleaned: usize,
    pub table_cleaned: usize,
    pub before_cleaned: usize,
    pub main_len: usize,
    pub before_main: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        (num as f64 / den as f64).clamp(0.0, 1.0)
    }
}

impl DominanceCounts {
    pub fn features(&self, table_index: usize) -> DominanceFeatures {
        DominanceFeatures {
            frac_raw: ratio(self.table_raw, self.total_raw),
            frac_cleaned: ratio(self.table_cleaned, self.total_cleaned),
            frac_main: ratio(self.table_cleaned, self.main_len),
            pos_raw: ratio(self.before_raw, self.total_raw),
            pos_cleaned: ratio(self.before_cleaned, self.total_cleaned),
            pos_main: ratio(self.before_main, self.main_len),
            table_index,
        }
    }
}

/// Sorted, disjoint byte intervals removed by cleaning.
fn removed_intervals(dom: &DomTree) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for id in dom.preorder() {
        let node = dom.node(id);
        let removable = match &node.kind {
            NodeKind::Comment(_) => true,
            NodeKind::Element { tag, .. } => tag == "script" || tag == "style",
            _ => false,
        };
        if !removable {
            continue;
        }
        if let Some(&(_, last_end)) = out.last() {
            if node.start < last_end {
                continue;
            }
        }
        out.push((node.start, node.end));
    }
    out
}

/// Bytes removed in `[0, pos)`.
fn removed_before(intervals: &[(usize, usize)], pos: usize) -> usize {
    intervals
        .iter()
        .map(|&(s, e)| e.min(pos).saturating_sub(s))
        .sum()
}

/// Maps a raw offset to its offset in the cleaned source.
fn cleaned_offset(intervals: &[(usize, usize)], pos: usize) -> usize {
    pos - removed_before(intervals, pos)
}

pub fn dominance_counts(dom: &DomTree, table: NodeId) -> DominanceCounts {
    let total_raw = dom.source_len();
    let t = dom.node(table);
    let intervals = removed_intervals(dom);
    let total_cleaned = cleaned_offset(&intervals, total_raw);
    let t_start = cleaned_offset(&intervals, t.start);
    let t_end = cleaned_offset(&intervals, t.end);

    let main = dom
        .elements_by_tag("h1")
        .first()
        .map(|&h1| dom.lowest_common_ancestor(h1, table))
        .filter(|&lca| lca != dom.root());
    let (main_start, main_end) = match main {
        Some(lca) => {
            let n = dom.node(lca);
            (
                cleaned_offset(&intervals, n.start),
                cleaned_offset(&intervals, n.end),
            )
        }
        None => (0, total_cleaned),
    };

    DominanceCounts {
        total_raw,
        table_raw: t.span_len(),
        before_raw: t.start,
        total_cleaned,
        table_cleaned: t_end - t_start,
        before_cleaned: t_start,
        main_len: main_end - main_start,
        before_main: t_start - main_start,
    }
}

/// Dominance features of `table` in the page `source` that `dom` was parsed
/// from.
pub fn compute_dominance(
    dom: &DomTree,
    source: &str,
    table: NodeId,
    table_index: usize,
) -> DominanceFeatures {
    debug_assert_eq!(dom.source_len(), source.len());
    dominance_counts(dom, table).features(table_index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::dom::parse_html;

    fn counts(src: &str) -> DominanceCounts {
        let dom = parse_html(src);
        let t = dom.elements_by_tag("table")[0];
        dominance_counts(&dom, t)
    }

    #[test]
    fn table_first_in_document() {
        let src = "<table><tr><td>a</td></tr></table><p>tail</p>";
        let c = counts(src);
        assert_eq!(c.before_raw, 0);
        assert_eq!(c.before_main, 0);
        let f = c.features(1);
        assert_eq!(f.pos_main, 0.0);
        assert_eq!(f.frac_raw, 34.0 / 45.0);
    }

    #[test]
    fn cleaning_removes_script_style_comments() {
        let table = "<table><tr><td>a</td></tr></table>";
        let src = format!("<script>var x=1;</script><style>p{{}}</style><!--c-->{table}");
        let c = counts(&src);
        assert_eq!(c.total_raw, src.len());
        assert_eq!(c.total_cleaned, table.len());
        assert_eq!(c.before_cleaned, 0);
        assert_eq!(c.features(1).frac_cleaned, 1.0);
    }

    #[test]
    fn main_container_is_lca_of_h1_and_table() {
        let main = "<div><h1>T</h1><table><tr><td>x</td></tr></table></div>";
        let src = format!("<div>nav nav nav</div>{main}<div>footer</div>");
        let c = counts(&src);
        assert_eq!(c.main_len, main.len());
        assert_eq!(c.before_main, "<div><h1>T</h1>".len());
        assert_eq!(c.table_cleaned, "<table><tr><td>x</td></tr></table>".len());
    }

    #[test]
    fn deterministic() {
        let src = "<html><body><h1>a</h1><table><tr><td>1</td></tr></table></body></html>";
        assert_eq!(counts(src), counts(src));
    }
}
