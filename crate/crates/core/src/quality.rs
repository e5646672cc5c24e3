//! Query-independent table quality features.

use serde::{Deserialize, Serialize};

use crate::extraction::{distinct_fraction, ExtractedTable};
use crate::text::is_numeric_cell;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityFeatures {
    pub n_rows: usize,
    pub n_cols: usize,
    pub empty_cell_fraction: f64,
    pub has_column_names: bool,
    pub has_numeric_column: bool,
    pub numeric_column_count: usize,
    /// 0 when the table has no subject column.
    pub subject_distinct_fraction: f64,
    pub type_consistency_mean: f64,
    pub type_consistency_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellType {
    Number,
    Text,
    TextWithDigits,
}

pub fn cell_type(cell: &str) -> CellType {
    if is_numeric_cell(cell) {
        CellType::Number
    } else if cell.chars().any(|c| c.is_ascii_digit()) {
        CellType::TextWithDigits
    } else {
        CellType::Text
    }
}

/// Share of non-empty cells that have the column's majority type. A column
/// with no non-empty cells scores 0.
pub fn type_consistency<'a>(cells: impl IntoIterator<Item = &'a str>) -> f64 {
    let mut counts = [0usize; 3];
    for c in cells.into_iter().filter(|c| !c.trim().is_empty()) {
        counts[cell_type(c) as usize] += 1;
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        0.0
    } else {
        *counts.iter().max().unwrap() as f64 / total as f64
    }
}

pub fn compute_quality(t: &ExtractedTable) -> QualityFeatures {
    let (n_rows, n_cols) = (t.n_rows(), t.n_cols());
    let total = n_rows * n_cols;
    let empty = t
        .grid
        .iter()
        .flatten()
        .filter(|c| c.trim().is_empty())
        .count();
    let numeric_column_count = (0..n_cols).filter(|&c| t.is_numeric_column(c)).count();
    let consistency: Vec<f64> = (0..n_cols).map(|c| type_consistency(t.column(c))).collect();
    let (mean, min) = if consistency.is_empty() {
        (0.0, 0.0)
    } else {
        (
            consistency.iter().sum::<f64>() / consistency.len() as f64,
            consistency.iter().cloned().fold(f64::INFINITY, f64::min),
        )
    };
    QualityFeatures {
        n_rows,
        n_cols,
        empty_cell_fraction: if total == 0 {
            0.0
        } else {
            empty as f64 / total as f64
        },
        has_column_names: t.metadata.column_names.is_some(),
        has_numeric_column: numeric_column_count > 0,
        numeric_column_count,
        subject_distinct_fraction: t
            .subject_col
            .map_or(0.0, |c| distinct_fraction(t.column(c))),
        type_consistency_mean: mean,
        type_consistency_min: min,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::{DominanceFeatures, TableMetadata};
    use proptest::prelude::*;

    fn table(rows: Vec<Vec<&str>>, subject: Option<usize>) -> ExtractedTable {
        ExtractedTable {
            grid: rows
                .into_iter()
                .map(|r| r.into_iter().map(str::to_string).collect())
                .collect(),
            metadata: TableMetadata::default(),
            subject_col: subject,
            doc_rank: 1,
            table_index: 1,
            dominance: DominanceFeatures {
                frac_raw: 0.0,
                frac_cleaned: 0.0,
                frac_main: 0.0,
                pos_raw: 0.0,
                pos_cleaned: 0.0,
                pos_main: 0.0,
                table_index: 1,
            },
        }
    }

    #[test]
    fn clean_string_table() {
        let q = compute_quality(&table(
            vec![
                vec!["a", "b", "c"],
                vec!["d", "e", "f"],
                vec!["g", "h", "i"],
            ],
            Some(0),
        ));
        assert_eq!(q.empty_cell_fraction, 0.0);
        assert_eq!(q.type_consistency_min, 1.0);
        assert!(!q.has_numeric_column);
        assert!(!q.has_column_names);
    }

    #[test]
    fn empty_fraction_two_of_twelve() {
        let q = compute_quality(&table(
            vec![
                vec!["a", "1", "x"],
                vec!["", "2", "y"],
                vec!["c", "", "z"],
                vec!["d", "4", "w"],
            ],
            None,
        ));
        assert_eq!(q.empty_cell_fraction, 2.0 / 12.0);
        assert_eq!(q.numeric_column_count, 1);
        assert_eq!(q.subject_distinct_fraction, 0.0);
    }

    #[test]
    fn subject_distinct() {
        let q = compute_quality(&table(
            vec![
                vec!["a", "1"],
                vec!["b", "2"],
                vec!["b", "3"],
                vec!["c", "4"],
            ],
            Some(0),
        ));
        assert_eq!(q.subject_distinct_fraction, 0.75);
    }

    #[test]
    fn mixed_types() {
        assert_eq!(type_consistency(["1", "2", "Route 66", "x"]), 0.5);
        assert_eq!(cell_type("Route 66"), CellType::TextWithDigits);
        assert_eq!(type_consistency(["", ""]), 0.0);
    }

    fn grid_strategy() -> impl Strategy<Value = Vec<Vec<String>>> {
        (2usize..6, 2usize..5).prop_flat_map(|(r, c)| {
            proptest::collection::vec(
                proptest::collection::vec(prop_oneof![Just(String::new()), "[a-c1-3]{1,3}"], c),
                r,
            )
        })
    }

    proptest! {
        #[test]
        fn row_permutation_invariant(grid in grid_strategy(), seed in any::<u64>()) {
            let mut t = table(vec![], Some(0));
            t.grid = grid;
            let base = compute_quality(&t);
            let n = t.grid.len();
            t.grid.rotate_left((seed as usize) % n);
            t.grid.swap(0, n - 1);
            let q = compute_quality(&t);
            prop_assert_eq!(base.n_rows, q.n_rows);
            prop_assert_eq!(base.empty_cell_fraction, q.empty_cell_fraction);
            prop_assert_eq!(base.numeric_column_count, q.numeric_column_count);
            prop_assert_eq!(base.subject_distinct_fraction, q.subject_distinct_fraction);
            prop_assert!((base.type_consistency_mean - q.type_consistency_mean).abs() < 1e-12);
            prop_assert_eq!(base.type_consistency_min, q.type_consistency_min);
        }

        #[test]
        fn padding_with_empty_cells_increases_emptiness(grid in grid_strategy()) {
            let mut t = table(vec![], None);
            t.grid = grid;
            let before = compute_quality(&t).empty_cell_fraction;
            prop_assume!(before < 1.0);
            for row in &mut t.grid {
                row.push(String::new());
            }
            prop_assert!(compute_quality(&t).empty_cell_fraction > before);
        }
    }
}
