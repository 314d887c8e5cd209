//! Classification scores, the evaluation report, vector similarity and the
//! stratified train/test split.

use std::collections::BTreeMap;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Length { left: a, right: b });
    }
    Ok(())
}

/// Counts indexed `[true][predicted]` over a fixed label order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new<S: AsRef<str>, L: AsRef<str>>(
        y_true: &[S],
        y_pred: &[S],
        labels: &[L],
    ) -> Result<Self> {
        check_lengths(y_true.len(), y_pred.len())?;
        let index: BTreeMap<&str, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_ref(), i))
            .collect();
        let lookup = |s: &S| {
            index
                .get(s.as_ref())
                .copied()
                .ok_or_else(|| Error::Invalid(format!("label {:?} not in label set", s.as_ref())))
        };
        let n = labels.len();
        let mut counts = vec![vec![0; n]; n];
        for (t, p) in y_true.iter().zip(y_pred) {
            counts[lookup(t)?][lookup(p)?] += 1;
        }
        Ok(ConfusionMatrix {
            labels: labels.iter().map(|l| l.as_ref().to_owned()).collect(),
            counts,
        })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.trace(), self.total())
    }

    /// Precision, recall and F1 per label; any 0/0 is scored 0.
    pub fn class_scores(&self) -> Vec<ClassScores> {
        let n = self.labels.len();
        (0..n)
            .map(|c| {
                let tp = self.counts[c][c];
                let predicted: usize = (0..n).map(|t| self.counts[t][c]).sum();
                let support: usize = self.counts[c].iter().sum();
                let precision = ratio(tp, predicted);
                let recall = ratio(tp, support);
                let f1 = if precision + recall > 0.0 {
                    2.0 * precision * recall / (precision + recall)
                } else {
                    0.0
                };
                ClassScores {
                    precision,
                    recall,
                    f1,
                    support,
                }
            })
            .collect()
    }

    /// Unweighted mean of per-class F1 over every label.
    pub fn macro_f1(&self) -> f64 {
        let scores = self.class_scores();
        if scores.is_empty() {
            return 0.0;
        }
        scores.iter().map(|s| s.f1).sum::<f64>() / scores.len() as f64
    }

    /// CSV with a `true\predicted` corner cell, labels across and down.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for l in &self.labels {
            out.push(',');
            out.push_str(&csv_escape(l));
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            out.push_str(&csv_escape(l));
            for c in row {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

pub fn macro_f1<S: AsRef<str>, L: AsRef<str>>(
    y_true: &[S],
    y_pred: &[S],
    labels: &[L],
) -> Result<f64> {
    Ok(ConfusionMatrix::new(y_true, y_pred, labels)?.macro_f1())
}

pub fn accuracy<S: PartialEq>(y_true: &[S], y_pred: &[S]) -> Result<f64> {
    check_lengths(y_true.len(), y_pred.len())?;
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(ratio(hits, y_true.len()))
}

/// `u·v / (‖u‖·‖v‖)`, clamped to `[-1, 1]`.
pub fn cosine_similarity<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    check_lengths(u.len(), v.len())?;
    let dot: T = u.iter().zip(v).map(|(&a, &b)| a * b).sum();
    let nu: T = u.iter().map(|&a| a * a).sum::<T>().sqrt();
    let nv: T = v.iter().map(|&a| a * a).sum::<T>().sqrt();
    if nu == T::zero() || nv == T::zero() {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (nu * nv)).max(-T::one()).min(T::one()))
}

/// Angle between `u` and `v` in radians, in `[0, π]`.
pub fn angular_distance<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    Ok(cosine_similarity(u, v)?.acos())
}

/// Row indices of a stratified partition, both sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Classes with a single member, kept entirely in train.
    pub singleton_classes: Vec<String>,
}

/// Sends `round(test_fraction · m)` members of each class of size `m` to test,
/// clamped to `1..=m-1` when `m ≥ 2`; singleton classes stay in train.
pub fn stratified_split<S: AsRef<str>>(
    labels: &[S],
    test_fraction: f64,
    seed: u64,
) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l.as_ref()).or_default().push(i);
    }
    let mut is_test = vec![false; labels.len()];
    let mut singleton_classes = Vec::new();
    for (class, members) in &by_class {
        let m = members.len();
        if m < 2 {
            singleton_classes.push((*class).to_owned());
            continue;
        }
        let n_test = ((test_fraction * m as f64).round() as usize).clamp(1, m - 1);
        let mut tag = b"split\0".to_vec();
        tag.extend_from_slice(class.as_bytes());
        let mut rng = rng::stream(seed, &tag);
        for pick in index::sample(&mut rng, m, n_test) {
            is_test[members[pick]] = true;
        }
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| is_test[i]);
    Ok(Split {
        train,
        test,
        singleton_classes,
    })
}

/// Provenance of one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub dataset: String,
    pub model: String,
    pub method: String,
    pub seed: u64,
    /// `"split"` or `"in-sample"`.
    pub split_mode: String,
    pub test_fraction: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(default)]
    pub split_warnings: Vec<String>,
    pub corpus_sha256: Option<String>,
    pub embeddings_sha256: Option<String>,
    pub created_at_ms: u64,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub f1_macro: f64,
    pub accuracy: f64,
    pub per_class: BTreeMap<String, ClassScores>,
    pub confusion: ConfusionMatrix,
    pub meta: RunMeta,
}

impl EvalReport {
    pub fn from_predictions<S: AsRef<str>, L: AsRef<str>>(
        y_true: &[S],
        y_pred: &[S],
        labels: &[L],
        meta: RunMeta,
    ) -> Result<Self> {
        let confusion = ConfusionMatrix::new(y_true, y_pred, labels)?;
        let per_class = confusion
            .labels
            .iter()
            .cloned()
            .zip(confusion.class_scores())
            .collect();
        Ok(EvalReport {
            f1_macro: confusion.macro_f1(),
            accuracy: confusion.accuracy(),
            per_class,
            confusion,
            meta,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
