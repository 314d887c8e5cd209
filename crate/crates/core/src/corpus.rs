//! Corpus ingestion: sentence selection, per-class sampling and the TSV
//! corpus file.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::rng;

/// Words per selected review sentence must lie strictly between these bounds.
pub const MIN_WORDS_EXCLUSIVE: usize = 10;
pub const MAX_WORDS_EXCLUSIVE: usize = 20;

pub const DEFAULT_REVIEW_FIELD: &str = "reviewText";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub id: String,
    pub label: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub examples: Vec<Example>,
    /// Sorted distinct labels of `examples`.
    pub labels: Vec<String>,
    pub seed: Option<u64>,
}

/// Per-run record counts. `skipped` counts bad records; `filtered` counts
/// well-formed reviews without a qualifying sentence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub records: usize,
    pub malformed: usize,
    pub missing_field: usize,
    pub empty_text: usize,
    pub filtered: usize,
}

impl IngestStats {
    pub fn skipped(&self) -> usize {
        self.malformed + self.missing_field + self.empty_text
    }

    fn merge(&mut self, other: IngestStats) {
        self.records += other.records;
        self.malformed += other.malformed;
        self.missing_field += other.missing_field;
        self.empty_text += other.empty_text;
        self.filtered += other.filtered;
    }
}

/// Collapses every whitespace run to one space and trims the ends.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Number of maximal non-whitespace runs.
pub fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// Splits text into sentences. A sentence ends after a maximal run of `.`,
/// `!` or `?` that is followed by whitespace or the end of the text; the
/// terminators stay with the sentence.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let is_term = |c: char| matches!(c, '.' | '!' | '?');
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((_, c)) = chars.next() {
        if !is_term(c) {
            continue;
        }
        while let Some(&(_, n)) = chars.peek() {
            if is_term(n) {
                chars.next();
            } else {
                break;
            }
        }
        match chars.peek() {
            None => {
                push_trimmed(&mut out, &text[start..]);
                start = text.len();
            }
            Some(&(pos, n)) if n.is_whitespace() => {
                push_trimmed(&mut out, &text[start..pos]);
                start = pos;
            }
            _ => {}
        }
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed<'a>(out: &mut Vec<&'a str>, s: &'a str) {
    let t = s.trim();
    if !t.is_empty() {
        out.push(t);
    }
}

/// First sentence of a review with more than 10 and fewer than 20 words,
/// whitespace-normalized.
pub fn select_review_sentence(review_text: &str) -> Option<String> {
    let normalized = normalize_whitespace(review_text);
    split_sentences(&normalized)
        .into_iter()
        .find(|s| {
            let w = word_count(s);
            w > MIN_WORDS_EXCLUSIVE && w < MAX_WORDS_EXCLUSIVE
        })
        .map(str::to_owned)
}

/// Keeps at most `per_class` examples of each label, drawn uniformly without
/// replacement from a stream seeded by `(seed, label)`. Retained examples keep
/// their original relative order.
pub fn sample_per_class(examples: Vec<Example>, per_class: usize, seed: u64) -> Vec<Example> {
    assert!(per_class >= 1, "per_class must be at least 1");
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, ex) in examples.iter().enumerate() {
        by_label.entry(ex.label.as_str()).or_default().push(i);
    }
    let mut keep = vec![false; examples.len()];
    for (label, members) in &by_label {
        if members.len() <= per_class {
            members.iter().for_each(|&i| keep[i] = true);
            continue;
        }
        let mut rng = rng::stream(seed, label.as_bytes());
        for pick in index::sample(&mut rng, members.len(), per_class) {
            keep[members[pick]] = true;
        }
    }
    examples
        .into_iter()
        .zip(keep)
        .filter_map(|(ex, k)| k.then_some(ex))
        .collect()
}

impl Corpus {
    /// Orders examples by label (stable within a label) and records the label set.
    pub fn from_examples(mut examples: Vec<Example>, seed: Option<u64>) -> Result<Self> {
        examples.sort_by(|a, b| a.label.cmp(&b.label));
        let mut ids = HashSet::new();
        for ex in &examples {
            if ex.text.is_empty() {
                return Err(Error::Invalid(format!("example {} has empty text", ex.id)));
            }
            if !ids.insert(ex.id.as_str()) {
                return Err(Error::Invalid(format!("duplicate example id {}", ex.id)));
            }
        }
        let labels = examples
            .iter()
            .map(|e| e.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(Corpus {
            examples,
            labels,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.examples.iter().map(|e| e.text.as_str()).collect()
    }

    pub fn example_labels(&self) -> Vec<&str> {
        self.examples.iter().map(|e| e.label.as_str()).collect()
    }

    pub fn count_by_label(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for ex in &self.examples {
            *counts.entry(ex.label.as_str()).or_insert(0) += 1;
        }
        counts
    }

    /// Serialized `id<TAB>label<TAB>text` lines, LF-terminated.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for ex in &self.examples {
            out.push_str(&tsv_field(&ex.id));
            out.push('\t');
            out.push_str(&tsv_field(&ex.label));
            out.push('\t');
            out.push_str(&tsv_field(&ex.text));
            out.push('\n');
        }
        out
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_tsv().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&content, path)
    }

    fn parse_tsv(content: &str, path: &Path) -> Result<Self> {
        let mut examples = Vec::new();
        for (i, line) in content.split_terminator('\n').enumerate() {
            let bad = |message: &str| Error::CorpusFormat {
                path: path.to_path_buf(),
                line: i + 1,
                message: message.to_owned(),
            };
            let mut cols = line.splitn(3, '\t');
            let (Some(id), Some(label), Some(text)) = (cols.next(), cols.next(), cols.next())
            else {
                return Err(bad("expected three tab-separated columns"));
            };
            if text.contains('\t') || text.contains('\r') {
                return Err(bad("text contains a tab or carriage return"));
            }
            if id.is_empty() || label.is_empty() || text.is_empty() {
                return Err(bad("empty column"));
            }
            examples.push(Example {
                id: id.to_owned(),
                label: label.to_owned(),
                text: text.to_owned(),
            });
        }
        let labels: BTreeSet<String> = examples.iter().map(|e| e.label.clone()).collect();
        let mut ids = HashSet::new();
        for ex in &examples {
            if !ids.insert(ex.id.as_str()) {
                return Err(Error::Invalid(format!("duplicate example id {}", ex.id)));
            }
        }
        // Row order is the alignment authority, so it is kept as read.
        Ok(Corpus {
            examples,
            labels: labels.into_iter().collect(),
            seed: None,
        })
    }
}

fn tsv_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// Options for Amazon review ingestion.
#[derive(Debug, Clone)]
pub struct AmazonOptions {
    pub per_class: usize,
    pub seed: u64,
    pub review_field: String,
}

impl Default for AmazonOptions {
    fn default() -> Self {
        AmazonOptions {
            per_class: 1000,
            seed: 0,
            review_field: DEFAULT_REVIEW_FIELD.to_owned(),
        }
    }
}

/// Reads one JSON-lines file, calling `f` with the 1-based line number and
/// parsed object for every non-blank line. Undecodable lines are tallied.
fn for_each_record(
    path: &Path,
    stats: &mut IngestStats,
    mut f: impl FnMut(usize, &Value, &mut IngestStats),
) -> Result<()> {
    let ingest_err = |e: std::io::Error| Error::Ingest {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let file = File::open(path).map_err(ingest_err)?;
    let mut reader = BufReader::new(file);
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf).map_err(ingest_err)? == 0 {
            break;
        }
        line_no += 1;
        let Ok(line) = std::str::from_utf8(&buf) else {
            stats.records += 1;
            stats.malformed += 1;
            continue;
        };
        if line.trim().is_empty() {
            continue;
        }
        stats.records += 1;
        match serde_json::from_str::<Value>(line) {
            Ok(v) if v.is_object() => f(line_no, &v, stats),
            _ => stats.malformed += 1,
        }
    }
    Ok(())
}

/// Builds an Amazon corpus from one JSON-lines file per category.
pub fn ingest_amazon(
    inputs: &[(PathBuf, String)],
    opts: &AmazonOptions,
) -> Result<(Corpus, IngestStats)> {
    let mut stats = IngestStats::default();
    let mut candidates = Vec::new();
    for (file_idx, (path, category)) in inputs.iter().enumerate() {
        let label = normalize_whitespace(category);
        if label.is_empty() {
            return Err(Error::Ingest {
                path: path.clone(),
                message: "empty category name".into(),
            });
        }
        let mut file_stats = IngestStats::default();
        for_each_record(path, &mut file_stats, |line_no, v, st| {
            let Some(review) = v.get(&opts.review_field).and_then(Value::as_str) else {
                st.missing_field += 1;
                return;
            };
            if review.trim().is_empty() {
                st.empty_text += 1;
                return;
            }
            match select_review_sentence(review) {
                Some(text) => candidates.push(Example {
                    id: format!("amazon-{file_idx}-{line_no}"),
                    label: label.clone(),
                    text,
                }),
                None => st.filtered += 1,
            }
        })?;
        stats.merge(file_stats);
    }
    let sampled = sample_per_class(candidates, opts.per_class, opts.seed);
    Ok((Corpus::from_examples(sampled, Some(opts.seed))?, stats))
}

/// Builds a news corpus from a JSON-lines file of `headline`/`category` records.
pub fn ingest_news(path: &Path, per_class: usize, seed: u64) -> Result<(Corpus, IngestStats)> {
    let mut stats = IngestStats::default();
    let mut candidates = Vec::new();
    for_each_record(path, &mut stats, |line_no, v, st| {
        let (Some(headline), Some(category)) = (
            v.get("headline").and_then(Value::as_str),
            v.get("category").and_then(Value::as_str),
        ) else {
            st.missing_field += 1;
            return;
        };
        let text = normalize_whitespace(headline);
        let label = normalize_whitespace(category);
        if text.is_empty() || label.is_empty() {
            st.empty_text += 1;
            return;
        }
        candidates.push(Example {
            id: format!("news-{line_no}"),
            label,
            text,
        });
    })?;
    let sampled = sample_per_class(candidates, per_class, seed);
    Ok((Corpus::from_examples(sampled, Some(seed))?, stats))
}
