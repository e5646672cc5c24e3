//! Word translation model trained with IBM-Model-1 EM on clicked
//! (query, document) pairs, scoring `log P(query | document)` with background
//! smoothing.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Add-one smoothed unigram model. Unseen words share one extra slot, so
/// every word has non-zero probability.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
}

impl Background {
    pub fn from_docs<D: AsRef<[String]>>(docs: &[D]) -> Self {
        let mut bg = Background::default();
        for d in docs {
            for t in d.as_ref() {
                *bg.counts.entry(t.clone()).or_default() += 1;
                bg.total += 1;
            }
        }
        bg
    }

    pub fn prob(&self, word: &str) -> f64 {
        let c = self.counts.get(word).copied().unwrap_or(0);
        (c as f64 + 1.0) / (self.total as f64 + self.counts.len() as f64 + 1.0)
    }
}

/// `probs[w][q] = P(q | w)` for document word `w` and query word `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationTable {
    pub probs: BTreeMap<String, BTreeMap<String, f64>>,
    pub background: Background,
    pub beta: f64,
}

impl TranslationTable {
    pub fn prob(&self, query_word: &str, doc_word: &str) -> f64 {
        self.probs
            .get(doc_word)
            .and_then(|row| row.get(query_word))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn set_background(&mut self, background: Background) {
        self.background = background;
    }
}

#[derive(Debug, Clone)]
pub struct TmTrainReport {
    /// Training log-likelihood before the first and after every iteration.
    pub log_likelihood: Vec<f64>,
}

type Table = HashMap<String, HashMap<String, f64>>;

/// `sum_q ln(1/|D| sum_w t(q|w))` over all pairs.
fn log_likelihood(pairs: &[(Vec<String>, Vec<String>)], t: &Table) -> f64 {
    let mut ll = 0.0;
    for (q, d) in pairs {
        if q.is_empty() || d.is_empty() {
            continue;
        }
        for qw in q {
            let s: f64 = d.iter().map(|w| t[w][qw]).sum();
            ll += (s / d.len() as f64).ln();
        }
    }
    ll
}

/// IBM Model 1 EM over document-to-query alignments. The background model is
/// built from every query and document token of `pairs`; replace it with
/// [`TranslationTable::set_background`] when scoring against another corpus.
pub fn tm_train(
    pairs: &[(Vec<String>, Vec<String>)],
    iterations: usize,
    beta: f64,
) -> Result<(TranslationTable, TmTrainReport)> {
    if pairs.is_empty() {
        return Err(Error::TrainingData(
            "translation model needs at least one pair".into(),
        ));
    }
    if iterations == 0 {
        return Err(Error::InvalidArgument(
            "iterations must be at least 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!(
            "beta {beta} outside [0, 1]"
        )));
    }
    // Uniform start over the query words each document word co-occurs with.
    let mut cooc: HashMap<String, HashSet<String>> = HashMap::new();
    for (q, d) in pairs {
        if q.is_empty() {
            continue;
        }
        for w in d {
            cooc.entry(w.clone()).or_default().extend(q.iter().cloned());
        }
    }
    let mut t: Table = cooc
        .into_iter()
        .map(|(w, qs)| {
            let p = 1.0 / qs.len() as f64;
            (w, qs.into_iter().map(|q| (q, p)).collect())
        })
        .collect();

    let mut lls = vec![log_likelihood(pairs, &t)];
    for _ in 0..iterations {
        let mut counts: Table = HashMap::new();
        let mut totals: HashMap<String, f64> = HashMap::new();
        for (q, d) in pairs {
            if q.is_empty() || d.is_empty() {
                continue;
            }
            for qw in q {
                let denom: f64 = d.iter().map(|w| t[w][qw]).sum();
                for w in d {
                    let c = t[w][qw] / denom;
                    *counts
                        .entry(w.clone())
                        .or_default()
                        .entry(qw.clone())
                        .or_default() += c;
                    *totals.entry(w.clone()).or_default() += c;
                }
            }
        }
        for (w, row) in &mut counts {
            let total = totals[w];
            for c in row.values_mut() {
                *c /= total;
            }
        }
        // Words seen only with empty queries keep no row; others are replaced.
        t = counts;
        lls.push(log_likelihood(pairs, &t));
    }

    let all_docs: Vec<&[String]> = pairs
        .iter()
        .flat_map(|(q, d)| [q.as_slice(), d.as_slice()])
        .collect();
    let table = TranslationTable {
        probs: t
            .into_iter()
            .map(|(w, row)| (w, row.into_iter().collect()))
            .collect(),
        background: Background::from_docs(&all_docs),
        beta,
    };
    Ok((
        table,
        TmTrainReport {
            log_likelihood: lls,
        },
    ))
}

/// `sum_q ln[(1 - beta) P_bg(q) + beta sum_w P(q|w) P_mle(w|doc)]`.
///
/// Finite whenever `beta < 1`; with `beta = 1` a query word no document word
/// translates to gives negative infinity.
pub fn tm_score(query: &[String], doc: &[String], table: &TranslationTable) -> f64 {
    let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
    for w in doc {
        *tf.entry(w.as_str()).or_default() += 1;
    }
    let len = doc.len() as f64;
    query
        .iter()
        .map(|q| {
            let translated: f64 = tf
                .iter()
                .map(|(w, &c)| table.prob(q, w) * c as f64 / len)
                .sum();
            let p = (1.0 - table.beta) * table.background.prob(q) + table.beta * translated;
            p.ln()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn row_sums_ok(t: &TranslationTable) {
        for row in t.probs.values() {
            let s: f64 = row.values().sum();
            assert!((s - 1.0).abs() <= 1e-9, "{s}");
            assert!(row.values().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn forced_alignment() {
        let (t, _) = tm_train(&[(toks("a"), toks("a"))], 1, 0.8).unwrap();
        assert_eq!(t.prob("a", "a"), 1.0);
    }

    #[test]
    fn disjoint_vocabularies_converge() {
        let pairs = [(toks("x"), toks("u")), (toks("y"), toks("v"))];
        let (t, _) = tm_train(&pairs, 10, 0.8).unwrap();
        assert!((t.prob("x", "u") - 1.0).abs() < 1e-12);
        assert!((t.prob("y", "v") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn em_is_monotone_and_normalized() {
        let pairs = [
            (toks("cheap flights"), toks("airline tickets cheap fares")),
            (toks("cheap hotels"), toks("hotel rooms cheap rates")),
            (toks("flights paris"), toks("airline paris tickets")),
            (toks("hotels paris"), toks("hotel paris rooms")),
        ];
        for iters in [1, 3, 20] {
            let (t, report) = tm_train(&pairs, iters, 0.8).unwrap();
            row_sums_ok(&t);
            assert_eq!(report.log_likelihood.len(), iters + 1);
            for w in report.log_likelihood.windows(2) {
                assert!(w[1] >= w[0] - 1e-9);
            }
        }
    }

    #[test]
    fn identity_table_scores_zero() {
        let mut probs = BTreeMap::new();
        probs.insert("a".to_string(), BTreeMap::from([("a".to_string(), 1.0)]));
        let t = TranslationTable {
            probs,
            background: Background::default(),
            beta: 1.0,
        };
        assert_eq!(tm_score(&toks("a"), &toks("a"), &t), 0.0);
    }

    #[test]
    fn unseen_word_falls_back_to_background() {
        let (mut t, _) = tm_train(&[(toks("a"), toks("b"))], 2, 0.9).unwrap();
        let corpus = [toks("b c"), toks("c d"), toks("d d e")];
        t.set_background(Background::from_docs(&corpus));
        // 7 tokens over 4 types, +1 unseen slot.
        let expected = ((1.0f64 - 0.9) * (1.0 / (7.0 + 4.0 + 1.0))).ln();
        assert_eq!(tm_score(&toks("zzz"), &toks("b"), &t), expected);
        assert_eq!(Background::from_docs(&corpus).prob("d"), 4.0 / 12.0);
    }

    #[test]
    fn longer_query_never_scores_higher() {
        let pairs = [(toks("a b"), toks("a c")), (toks("b"), toks("c"))];
        let (t, _) = tm_train(&pairs, 5, 0.8).unwrap();
        let d = toks("a c c");
        assert!(tm_score(&toks("a b"), &d, &t) <= tm_score(&toks("a"), &d, &t));
    }

    #[test]
    fn empty_doc_uses_background_only() {
        let (t, _) = tm_train(&[(toks("a"), toks("b"))], 1, 0.8).unwrap();
        let expected = ((1.0 - 0.8) * t.background.prob("a")).ln();
        assert_eq!(tm_score(&toks("a"), &[], &t), expected);
    }
}
