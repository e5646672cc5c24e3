//! Small text helpers shared across modules.

/// Collapses runs of whitespace (including non-breaking spaces) to a single
/// space and trims both ends.
pub fn normalize_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text
        .split(|c: char| c.is_whitespace())
        .filter(|w| !w.is_empty())
    {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Truncates to at most `max_chars` characters on a char boundary.
pub fn truncate_chars(text: &str, max_chars: usize) -> &str {
    match text.char_indices().nth(max_chars) {
        Some((idx, _)) => &text[..idx],
        None => text,
    }
}

const CURRENCY: &[char] = &['$', '\u{20ac}', '\u{a3}', '\u{a5}', '\u{20b9}', '\u{a2}'];

/// A cell is numeric if, after stripping commas, currency symbols and one
/// trailing `%`, it parses as a finite decimal number.
pub fn is_numeric_cell(cell: &str) -> bool {
    let mut s: String = cell
        .trim()
        .chars()
        .filter(|c| *c != ',' && !CURRENCY.contains(c))
        .collect();
    if s.ends_with('%') {
        s.pop();
    }
    let s = s.trim();
    if s.is_empty() || !s.chars().any(|c| c.is_ascii_digit()) {
        return false;
    }
    if !s
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'))
    {
        return false;
    }
    s.parse::<f64>().map_or(false, f64::is_finite)
}

/// Fraction of non-empty cells that must be numeric for a numeric column.
pub const NUMERIC_COLUMN_FRACTION: f64 = 0.8;

/// A column is numeric if at least 80% of its non-empty cells are numeric.
/// Columns with no non-empty cells are not numeric.
pub fn is_numeric_column<'a>(cells: impl IntoIterator<Item = &'a str>) -> bool {
    let (mut non_empty, mut numeric) = (0usize, 0usize);
    for c in cells {
        if c.trim().is_empty() {
            continue;
        }
        non_empty += 1;
        if is_numeric_cell(c) {
            numeric += 1;
        }
    }
    non_empty > 0 && numeric as f64 >= NUMERIC_COLUMN_FRACTION * non_empty as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitespace() {
        assert_eq!(normalize_whitespace("  a \n\t b\u{a0}c  "), "a b c");
        assert_eq!(normalize_whitespace(""), "");
    }

    #[test]
    fn numeric_cells() {
        for yes in [
            "12",
            "1,234",
            "$5.50",
            "12%",
            "-3",
            "1e5",
            " 42 ",
            "\u{20ac}7",
        ] {
            assert!(is_numeric_cell(yes), "{yes}");
        }
        for no in [
            "",
            "abc",
            "12a",
            "inf",
            "NaN",
            "%",
            "$",
            "1-2-3",
            "San Jose 2",
        ] {
            assert!(!is_numeric_cell(no), "{no}");
        }
    }

    #[test]
    fn numeric_column_threshold() {
        assert!(is_numeric_column(["1", "2", "3", "4", "x"]));
        assert!(!is_numeric_column(["1", "2", "3", "x", "y"]));
        assert!(is_numeric_column(["1", "", ""]));
        assert!(!is_numeric_column(["", ""]));
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate_chars("h\u{e9}llo", 2), "h\u{e9}");
        assert_eq!(truncate_chars("hi", 5), "hi");
    }
}
