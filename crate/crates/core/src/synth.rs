//! Synthetic labeled corpora with controlled query-table match strength and
//! table dominance.
//!
//! Every query has a few ranked HTML documents holding one relational table
//! each. A table's match strength is the number of query words in its title,
//! h1 and caption; its dominance is set with filler paragraphs around it.
//! Outside the conflict family a table is labeled relevant when at least
//! [`LABEL_MIN_META_MATCHES`] query words appear in its metadata and it
//! covers at least [`LABEL_MIN_DOMINANCE`] of its cleaned page.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::extraction::{extract_from_html, TableKey};
use crate::pipeline::corpus::{
    ClickRecord, DocRecord, LabelRecord, QueryRecord, CLICKS_FILE, CORPUS_SCHEMA_VERSION,
    LABELS_FILE, QUERIES_FILE,
};
use crate::pipeline::{write_file, write_jsonl};
use crate::{Error, Result};

pub const QUERY_WORDS: usize = 3;
/// Query words come from a shared pool so that training and held-out
/// queries overlap in vocabulary, as queries in a real log do.
pub const TOPIC_POOL: usize = 150;
pub const LABEL_MIN_META_MATCHES: usize = 2;
pub const LABEL_MIN_DOMINANCE: f64 = 0.3;
pub const SCENARIOS_FILE: &str = "scenarios.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Match strength and dominance both follow a shared latent relevance.
    Normal,
    /// The distractor matches the query better but is a small table on a
    /// long page.
    MatchDistractor,
    /// The distractor dominates its page but barely matches the query.
    DominanceDistractor,
    /// The relevant table matches in its metadata; the distractor matches
    /// weakly in metadata and repeatedly in its cells.
    MetadataCellConflict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub id_prefix: String,
    pub normal: usize,
    pub match_distractor: usize,
    pub dominance_distractor: usize,
    pub metadata_cell_conflict: usize,
    pub docs_per_query: usize,
    /// Size of the click log written next to the labeled queries.
    pub clicks: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 1,
            id_prefix: "q".into(),
            normal: 100,
            match_distractor: 0,
            dominance_distractor: 0,
            metadata_cell_conflict: 0,
            docs_per_query: 4,
            clicks: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub query_id: String,
    pub family: Family,
    pub positive: Option<TableKey>,
    pub distractor: Option<TableKey>,
}

#[derive(Debug, Clone, Copy)]
struct TableSpec {
    meta_matches: usize,
    cell_matches: usize,
    dominance: f64,
    role: Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Positive,
    Distractor,
    Other,
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

fn vocabulary(rng: &mut ChaCha8Rng, size: usize) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(size);
    while out.len() < size {
        let syllables = rng.gen_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
            w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
        }
        w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    topics: &'a [String],
    /// Everything else on a page.
    vocab: &'a [String],
}

impl Gen<'_> {
    fn word(&mut self, avoid: &[String]) -> String {
        loop {
            let w = &self.vocab[self.rng.gen_range(0..self.vocab.len())];
            if !avoid.contains(w) {
                return w.clone();
            }
        }
    }

    fn query(&mut self) -> Vec<String> {
        self.topics
            .choose_multiple(&mut self.rng, QUERY_WORDS)
            .cloned()
            .collect()
    }

    /// A clicked title: most query words plus unrelated ones.
    fn click(&mut self) -> ClickRecord {
        let query = self.query();
        let keep = self.rng.gen_range(2..=QUERY_WORDS);
        let extra = self.rng.gen_range(2..=6);
        let doc = self.phrase(&query[..keep], extra, &query);
        ClickRecord {
            schema_version: CORPUS_SCHEMA_VERSION,
            query: query.join(" "),
            doc,
        }
    }

    fn words(&mut self, n: usize, avoid: &[String]) -> Vec<String> {
        (0..n).map(|_| self.word(avoid)).collect()
    }

    fn phrase(&mut self, matched: &[String], extra: usize, avoid: &[String]) -> String {
        let mut w: Vec<String> = matched.to_vec();
        w.extend(self.words(extra, avoid));
        w.shuffle(&mut self.rng);
        w.join(" ")
    }

    fn filler(&mut self, bytes: usize, avoid: &[String]) -> String {
        let mut out = String::new();
        while out.len() < bytes {
            let n = self.rng.gen_range(8..20);
            let _ = write!(
                out,
                "<p>{}.</p>\n",
                capitalize(&self.words(n, avoid).join(" "))
            );
        }
        out
    }

    fn table(&mut self, query: &[String], spec: &TableSpec, matched: &[String]) -> String {
        let rows = self.rng.gen_range(8..=14usize);
        let mut html = String::from("<table>\n");
        let caption_words: Vec<String> = matched
            .iter()
            .filter(|_| self.rng.gen_bool(0.7))
            .cloned()
            .collect();
        let caption = self.phrase(&caption_words, 2, query);
        let _ = write!(html, "<caption>{}</caption>\n", capitalize(&caption));
        let names: Vec<String> = self.words(4, query).iter().map(|w| capitalize(w)).collect();
        html.push_str("<thead><tr>");
        for n in &names {
            let _ = write!(html, "<th>{n}</th>");
        }
        html.push_str("</tr></thead>\n<tbody>\n");
        let mut match_rows: Vec<usize> = (0..rows).collect();
        match_rows.shuffle(&mut self.rng);
        match_rows.truncate(spec.cell_matches.min(rows));
        for r in 0..rows {
            let subject = format!(
                "{} {}",
                capitalize(&self.word(query)),
                capitalize(&self.word(query))
            );
            let notes = if match_rows.contains(&r) {
                let k = match_rows.iter().position(|&m| m == r).unwrap();
                let mut w = vec![query[k % query.len()].clone()];
                if spec.role == Role::Distractor && spec.meta_matches < LABEL_MIN_META_MATCHES {
                    w.push(query[(k + 1) % query.len()].clone());
                }
                w.join(" ")
            } else {
                let n = self.rng.gen_range(1..=2);
                self.words(n, query).join(" ")
            };
            let _ = write!(
                html,
                "<tr><td>{subject}</td><td>{}</td><td>{notes}</td><td>{}</td></tr>\n",
                self.rng.gen_range(100..99_999),
                self.rng.gen_range(1..999),
            );
        }
        html.push_str("</tbody>\n</table>\n");
        html
    }

    /// Returns the page and its URL.
    fn page(&mut self, query: &[String], spec: &TableSpec) -> (String, String) {
        let mut q = query.to_vec();
        q.shuffle(&mut self.rng);
        let matched: Vec<String> = q[..spec.meta_matches.min(q.len())].to_vec();
        let title = capitalize(&self.phrase(&matched, 2, query));
        let h1 = capitalize(&self.phrase(&matched, 1, query));
        let url = format!(
            "https://{}.example/{}-{}",
            self.word(query),
            self.word(query),
            self.word(query)
        );
        let table = self.table(query, spec, &matched);
        let script = if self.rng.gen_bool(0.5) {
            let n = self.rng.gen_range(100..600);
            format!("<script>var s = \"{}\";</script>\n", "x".repeat(n))
        } else {
            String::new()
        };
        let head = format!("<!DOCTYPE html>\n<html><head><title>{title}</title>\n{script}</head>\n<body>\n<h1>{h1}</h1>\n");
        let section = format!("<h2>{}</h2>\n", capitalize(&self.phrase(&[], 2, query)));
        let tail = "</body></html>\n";
        let base = head.len() - script.len() + section.len() + table.len() + tail.len();
        let wanted = (table.len() as f64 / spec.dominance.max(0.01)).round() as usize;
        let fill = wanted.saturating_sub(base);
        let before_share: f64 = self.rng.gen_range(0.0..1.0);
        let before_bytes = (fill as f64 * before_share) as usize;
        let before = self.filler(before_bytes, query);
        let after = self.filler(fill.saturating_sub(before.len()), query);
        (format!("{head}{before}{section}{table}{after}{tail}"), url)
    }
}

/// Share of normal tables whose dominance ignores the latent relevance.
pub const DECOUPLED_SHARE: f64 = 0.3;

fn normal_spec(rng: &mut ChaCha8Rng, relevance: f64) -> TableSpec {
    let noisy = |rng: &mut ChaCha8Rng| (relevance + rng.gen_range(-0.3..0.3)).clamp(0.0, 1.0);
    let meta_matches = (noisy(rng) * QUERY_WORDS as f64).round() as usize;
    let dominance_level = if rng.gen_bool(DECOUPLED_SHARE) {
        rng.gen_range(0.0..1.0)
    } else {
        noisy(rng)
    };
    TableSpec {
        meta_matches,
        cell_matches: rng.gen_range(0..=meta_matches),
        dominance: 0.04 + 0.86 * dominance_level,
        role: Role::Other,
    }
}

fn family_specs(rng: &mut ChaCha8Rng, family: Family, docs: usize) -> Vec<TableSpec> {
    let mut specs = Vec::with_capacity(docs);
    match family {
        Family::Normal => {
            let r = rng.gen_range(0.5..1.0);
            specs.push(normal_spec(rng, r));
        }
        Family::MatchDistractor => {
            specs.push(TableSpec {
                meta_matches: 2,
                cell_matches: rng.gen_range(0..=1),
                dominance: rng.gen_range(0.45..0.75),
                role: Role::Positive,
            });
            specs.push(TableSpec {
                meta_matches: 3,
                cell_matches: rng.gen_range(2..=4),
                dominance: rng.gen_range(0.03..0.10),
                role: Role::Distractor,
            });
        }
        Family::DominanceDistractor => {
            specs.push(TableSpec {
                meta_matches: 3,
                cell_matches: rng.gen_range(0..=2),
                dominance: rng.gen_range(0.34..0.45),
                role: Role::Positive,
            });
            specs.push(TableSpec {
                meta_matches: rng.gen_range(0..=1),
                cell_matches: 0,
                dominance: rng.gen_range(0.72..0.92),
                role: Role::Distractor,
            });
        }
        Family::MetadataCellConflict => {
            specs.push(TableSpec {
                meta_matches: 3,
                cell_matches: rng.gen_range(0..=3),
                dominance: rng.gen_range(0.45..0.8),
                role: Role::Positive,
            });
            specs.push(TableSpec {
                meta_matches: rng.gen_range(0..=1),
                cell_matches: rng.gen_range(3..=8),
                dominance: rng.gen_range(0.45..0.8),
                role: Role::Distractor,
            });
        }
    }
    while specs.len() < docs {
        let spec = match family {
            Family::MetadataCellConflict => TableSpec {
                meta_matches: 0,
                cell_matches: rng.gen_range(0..=1),
                dominance: rng.gen_range(0.45..0.8),
                role: Role::Other,
            },
            Family::Normal => {
                let r = rng.gen_range(0.0..1.0);
                normal_spec(rng, r)
            }
            _ => {
                let r = rng.gen_range(0.0..0.4);
                normal_spec(rng, r)
            }
        };
        specs.push(spec);
    }
    specs
}

/// Ranks for `specs`: the first two (the positive and distractor of the
/// adversarial families, or the likely-relevant table of a normal query)
/// land somewhere in the top three.
fn assign_ranks(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let top = n.min(3);
    let mut head: Vec<usize> = (1..=top).collect();
    head.shuffle(rng);
    let mut tail: Vec<usize> = (top + 1..=n).collect();
    tail.shuffle(rng);
    let lead = 2.min(n);
    let mut ranks: Vec<usize> = head[..lead].to_vec();
    let mut rest: Vec<usize> = head[lead..].iter().copied().chain(tail).collect();
    rest.shuffle(rng);
    ranks.extend(rest);
    ranks
}

/// Writes a corpus under `dir` and returns the per-query scenario records,
/// also saved as `scenarios.jsonl`.
pub fn generate_corpus(dir: &Path, spec: &SynthSpec) -> Result<Vec<Scenario>> {
    if spec.docs_per_query < 2 {
        return Err(Error::InvalidArgument(
            "docs_per_query must be at least 2".into(),
        ));
    }
    let mut vocab_rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_70c4b);
    let vocab = vocabulary(&mut vocab_rng, 4000);
    let (topics, general) = vocab.split_at(TOPIC_POOL);
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        topics,
        vocab: general,
    };
    let plan: Vec<Family> = [
        (Family::Normal, spec.normal),
        (Family::MatchDistractor, spec.match_distractor),
        (Family::DominanceDistractor, spec.dominance_distractor),
        (Family::MetadataCellConflict, spec.metadata_cell_conflict),
    ]
    .iter()
    .flat_map(|&(f, n)| std::iter::repeat(f).take(n))
    .collect();

    let mut queries = Vec::new();
    let mut labels = Vec::new();
    let mut scenarios = Vec::new();
    for (i, family) in plan.into_iter().enumerate() {
        let id = format!("{}{:04}", spec.id_prefix, i + 1);
        let query = g.query();
        let specs = family_specs(&mut g.rng, family, spec.docs_per_query);
        let ranks = assign_ranks(&mut g.rng, specs.len());
        let mut docs = Vec::new();
        let mut scenario = Scenario {
            query_id: id.clone(),
            family,
            positive: None,
            distractor: None,
        };
        for (ts, &rank) in specs.iter().zip(&ranks) {
            let (html, url) = g.page(&query, ts);
            let path = format!("docs/{id}/d{rank}.html");
            let tables = extract_from_html(&html, &url, rank);
            let [table] = tables.as_slice() else {
                return Err(Error::TrainingData(format!(
                    "generated page {path} has {} tables",
                    tables.len()
                )));
            };
            write_file(&dir.join(&path), html.as_bytes())?;
            let label = match family {
                Family::MetadataCellConflict => ts.role == Role::Positive,
                _ => {
                    ts.meta_matches >= LABEL_MIN_META_MATCHES
                        && table.dominance.frac_cleaned >= LABEL_MIN_DOMINANCE
                }
            };
            match ts.role {
                Role::Positive => scenario.positive = Some(table.key()),
                Role::Distractor => scenario.distractor = Some(table.key()),
                Role::Other => {}
            }
            labels.push(LabelRecord {
                schema_version: CORPUS_SCHEMA_VERSION,
                query_id: id.clone(),
                doc_rank: rank,
                table_index: table.table_index,
                label: label as u8,
            });
            docs.push(DocRecord {
                rank,
                path,
                url: Some(url),
            });
        }
        docs.sort_by_key(|d| d.rank);
        queries.push(QueryRecord {
            schema_version: CORPUS_SCHEMA_VERSION,
            id,
            text: query.join(" "),
            docs,
        });
        scenarios.push(scenario);
    }
    labels.sort_by(|a, b| (&a.query_id, a.doc_rank).cmp(&(&b.query_id, b.doc_rank)));
    if spec.clicks > 0 {
        let mut c = Gen {
            rng: ChaCha8Rng::seed_from_u64(spec.seed ^ 0xc11c),
            topics,
            vocab: general,
        };
        let clicks: Vec<ClickRecord> = (0..spec.clicks).map(|_| c.click()).collect();
        write_jsonl(&dir.join(CLICKS_FILE), &clicks)?;
    }
    write_jsonl(&dir.join(QUERIES_FILE), &queries)?;
    write_jsonl(&dir.join(LABELS_FILE), &labels)?;
    write_jsonl(&dir.join(SCENARIOS_FILE), &scenarios)?;
    Ok(scenarios)
}

pub fn read_scenarios(dir: &Path) -> Result<Vec<Scenario>> {
    let path = dir.join(SCENARIOS_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
