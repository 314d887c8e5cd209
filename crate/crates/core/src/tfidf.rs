//! Bag-of-words vectorizer with smoothed TF-IDF weighting and L2 row
//! normalization.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::SparseMatrix;
use crate::scalar::Scalar;

/// Lowercases `text` and returns its alphanumeric runs of at least two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel<T> {
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<T>,
    n_docs: usize,
}

#[derive(Serialize)]
struct VocabEntry {
    index: usize,
    idf: f64,
}

impl<T: Scalar> TfidfModel<T> {
    /// Fits the vocabulary (columns in lexicographic token order) and
    /// `idf(t) = ln((1 + n) / (1 + df(t))) + 1`.
    pub fn fit<S: AsRef<str>>(docs: &[S]) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::Invalid(
                "cannot fit TF-IDF on an empty corpus".into(),
            ));
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in docs {
            let distinct: BTreeSet<String> = tokenize(doc.as_ref()).into_iter().collect();
            for t in distinct {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let n = docs.len();
        let mut vocabulary = BTreeMap::new();
        let mut idf = Vec::with_capacity(df.len());
        for (i, (token, count)) in df.into_iter().enumerate() {
            let w = ((1.0 + n as f64) / (1.0 + count as f64)).ln() + 1.0;
            idf.push(T::of(w));
            vocabulary.insert(token, i);
        }
        Ok(TfidfModel {
            vocabulary,
            idf,
            n_docs: n,
        })
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[T] {
        &self.idf
    }

    pub fn idf_of(&self, token: &str) -> Option<T> {
        self.vocabulary.get(token).map(|&i| self.idf[i])
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn n_features(&self) -> usize {
        self.idf.len()
    }

    /// `count(t, d) · idf(t)` per row, then L2-normalized. Unknown tokens are
    /// ignored, so a document of only unknown tokens yields an empty row.
    pub fn transform<S: AsRef<str> + Sync>(&self, docs: &[S]) -> SparseMatrix<T> {
        use rayon::prelude::*;
        let rows: Vec<Vec<(usize, T)>> = docs
            .par_iter()
            .map(|doc| self.transform_one(doc.as_ref()))
            .collect();
        SparseMatrix::from_rows(self.n_features(), rows)
            .expect("vectorizer rows are sorted, in range and finite")
    }

    fn transform_one(&self, doc: &str) -> Vec<(usize, T)> {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for t in tokenize(doc) {
            if let Some(&col) = self.vocabulary.get(&t) {
                *counts.entry(col).or_insert(0) += 1;
            }
        }
        let mut row: Vec<(usize, T)> = counts
            .into_iter()
            .map(|(col, c)| (col, T::of_usize(c) * self.idf[col]))
            .collect();
        let norm = row.iter().map(|&(_, v)| v * v).sum::<T>().sqrt();
        if norm > T::zero() {
            row.iter_mut().for_each(|(_, v)| *v /= norm);
        }
        row
    }

    /// `{token: {index, idf}}` as pretty JSON.
    pub fn vocab_json(&self) -> String {
        let map: BTreeMap<&str, VocabEntry> = self
            .vocabulary
            .iter()
            .map(|(t, &i)| {
                (
                    t.as_str(),
                    VocabEntry {
                        index: i,
                        idf: self.idf[i].as_f64(),
                    },
                )
            })
            .collect();
        serde_json::to_string_pretty(&map).expect("vocabulary serializes")
    }
}
