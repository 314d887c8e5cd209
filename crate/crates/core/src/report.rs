//! End-to-end evaluation runs and result tables.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::json;
use sha2::{Digest, Sha256};

use crate::cluster_classifier::ClusterModel;
use crate::corpus::Corpus;
use crate::embedding_store::load_embeddings;
use crate::error::{Error, Result};
use crate::kmeans::KMeansConfig;
use crate::logreg::{train_logreg, LogRegConfig, LogRegModel};
use crate::matrix::{DenseMatrix, RowMatrix, SparseMatrix};
use crate::metrics::{csv_escape, stratified_split, EvalReport, RunMeta};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Cluster,
    LogReg,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cluster => "cluster",
            Method::LogReg => "logreg",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cluster" => Some(Method::Cluster),
            "logreg" => Some(Method::LogReg),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMode {
    /// Stratified split; fit on train, score on the held-out fraction.
    Split { test_fraction: f64 },
    /// Fit and score on every row.
    InSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalize {
    On,
    Off,
    /// On for imported neural embeddings, off for the native TF-IDF vectors.
    Auto,
}

pub const TFIDF_MODEL_NAME: &str = "tfidf";

impl Normalize {
    pub fn resolve(self, model_name: &str) -> bool {
        match self {
            Normalize::On => true,
            Normalize::Off => false,
            Normalize::Auto => model_name != TFIDF_MODEL_NAME,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub method: Method,
    pub mode: EvalMode,
    pub seed: u64,
    /// Cluster count; defaults to the number of classes in the corpus.
    pub k: Option<usize>,
    pub max_iter: usize,
    pub tol: f64,
    pub n_init: usize,
    pub normalize: Normalize,
    pub logreg: LogRegConfig,
    /// Standardize features (train-split statistics) before logistic regression.
    pub standardize: bool,
}

impl EvalConfig {
    pub fn new(method: Method) -> Self {
        let km = KMeansConfig::new(1);
        EvalConfig {
            method,
            mode: EvalMode::Split { test_fraction: 0.2 },
            seed: 0,
            k: None,
            max_iter: km.max_iter,
            tol: km.tol,
            n_init: km.n_init,
            normalize: Normalize::Auto,
            logreg: LogRegConfig::default(),
            standardize: false,
        }
    }
}

/// Where the evaluated data came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub dataset: String,
    pub model: String,
    pub corpus_sha256: Option<String>,
    pub embeddings_sha256: Option<String>,
}

/// Feature standardization, only meaningful for dense rows.
pub trait Standardize<T>: Sized {
    fn standardized_pair(train: &Self, test: &Self) -> Result<(Self, Self)>;
}

impl<T: Scalar> Standardize<T> for DenseMatrix<T> {
    fn standardized_pair(train: &Self, test: &Self) -> Result<(Self, Self)> {
        let (mean, std) = train.column_stats();
        let (mut a, mut b) = (train.clone(), test.clone());
        a.standardize_with(&mean, &std);
        b.standardize_with(&mean, &std);
        Ok((a, b))
    }
}

impl<T: Scalar> Standardize<T> for SparseMatrix<T> {
    fn standardized_pair(_: &Self, _: &Self) -> Result<(Self, Self)> {
        Err(Error::Config(
            "standardization requires dense features".into(),
        ))
    }
}

#[derive(Debug)]
pub struct EvalOutcome<T> {
    pub report: EvalReport,
    pub logreg_model: Option<LogRegModel<T>>,
    pub cluster_model: Option<ClusterModel<T>>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Split (or not), fit the chosen classifier, predict and score. Macro F1 runs
/// over the label set of all `labels`, not only those present in the test rows.
pub fn evaluate<T, M, S>(
    x: &M,
    labels: &[S],
    provenance: &Provenance,
    config: &EvalConfig,
) -> Result<EvalOutcome<T>>
where
    T: Scalar,
    M: RowMatrix<T> + Standardize<T>,
    S: AsRef<str>,
{
    if x.n_rows() != labels.len() {
        return Err(Error::Alignment {
            expected: labels.len(),
            found: x.n_rows(),
        });
    }
    let label_set: Vec<&str> = labels
        .iter()
        .map(AsRef::as_ref)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let (train, test, warnings, split_mode, test_fraction) = match config.mode {
        EvalMode::InSample => {
            let all: Vec<usize> = (0..labels.len()).collect();
            (all.clone(), all, Vec::new(), "in-sample", None)
        }
        EvalMode::Split { test_fraction } => {
            let s = stratified_split(labels, test_fraction, config.seed)?;
            let warnings = s
                .singleton_classes
                .iter()
                .map(|c| format!("class {c:?} has one member; kept in train"))
                .collect();
            (s.train, s.test, warnings, "split", Some(test_fraction))
        }
    };
    if test.is_empty() {
        return Err(Error::Invalid("test partition is empty".into()));
    }
    let x_train = x.select_rows(&train);
    let x_test = x.select_rows(&test);
    let y_train: Vec<&str> = train.iter().map(|&i| labels[i].as_ref()).collect();
    let y_test: Vec<&str> = test.iter().map(|&i| labels[i].as_ref()).collect();

    let mut logreg_model = None;
    let mut cluster_model = None;
    let (predicted, config_echo) = match config.method {
        Method::Cluster => {
            let k = config.k.unwrap_or(label_set.len());
            let kmc = KMeansConfig {
                k,
                max_iter: config.max_iter,
                tol: config.tol,
                n_init: config.n_init,
                seed: config.seed,
            };
            let normalize = config.normalize.resolve(&provenance.model);
            let model = ClusterModel::fit(&x_train, &y_train, &kmc, normalize)?;
            let predicted = model.predict(&x_test)?;
            let echo = json!({
                "k": k,
                "max_iter": kmc.max_iter,
                "tol": kmc.tol,
                "n_init": kmc.n_init,
                "normalize": normalize,
                "train_inertia": model.kmeans.inertia.as_f64(),
                "iterations_run": model.kmeans.iterations_run,
            });
            cluster_model = Some(model);
            (predicted, echo)
        }
        Method::LogReg => {
            let (model, predicted) = if config.standardize {
                let (a, b) = M::standardized_pair(&x_train, &x_test)?;
                let model = train_logreg(&a, &y_train, &config.logreg)?;
                let predicted = model.predict(&b)?.0;
                (model, predicted)
            } else {
                let model = train_logreg(&x_train, &y_train, &config.logreg)?;
                let predicted = model.predict(&x_test)?.0;
                (model, predicted)
            };
            let echo = json!({
                "l2": config.logreg.l2,
                "max_epochs": config.logreg.max_epochs,
                "grad_tol": config.logreg.grad_tol,
                "learning_rate": config.logreg.learning_rate,
                "standardize": config.standardize,
            });
            logreg_model = Some(model);
            (predicted, echo)
        }
    };
    let meta = RunMeta {
        dataset: provenance.dataset.clone(),
        model: provenance.model.clone(),
        method: config.method.as_str().to_owned(),
        seed: config.seed,
        split_mode: split_mode.to_owned(),
        test_fraction,
        n_train: train.len(),
        n_test: test.len(),
        split_warnings: warnings,
        corpus_sha256: provenance.corpus_sha256.clone(),
        embeddings_sha256: provenance.embeddings_sha256.clone(),
        created_at_ms: now_ms(),
        config: config_echo,
    };
    let predicted_refs: Vec<&str> = predicted.iter().map(String::as_str).collect();
    let report = EvalReport::from_predictions(&y_test, &predicted_refs, &label_set, meta)?;
    Ok(EvalOutcome {
        report,
        logreg_model,
        cluster_model,
    })
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Loads a corpus TSV and its aligned emb-v1 file and evaluates them.
/// `dataset` defaults to the corpus file stem.
pub fn run_evaluate(
    corpus_path: &Path,
    embeddings_path: &Path,
    dataset: Option<&str>,
    config: &EvalConfig,
) -> Result<EvalOutcome<f64>> {
    let corpus = Corpus::read_tsv(corpus_path)?;
    let emb = load_embeddings(embeddings_path, Some(corpus.len()))?;
    let provenance = Provenance {
        dataset: dataset.map(str::to_owned).unwrap_or_else(|| {
            corpus_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        }),
        model: emb.model_name.clone(),
        corpus_sha256: Some(sha256_file(corpus_path)?),
        embeddings_sha256: Some(sha256_file(embeddings_path)?),
    };
    let x: DenseMatrix<f64> = emb.data.cast();
    evaluate(&x, &corpus.example_labels(), &provenance, config)
}

/// One-line run summary: `dataset model method f1_macro accuracy`.
pub fn summary_line(report: &EvalReport) -> String {
    format!(
        "{} {} {} {:.4} {:.4}",
        report.meta.dataset,
        report.meta.model,
        report.meta.method,
        report.f1_macro,
        report.accuracy
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

/// A rendered-ready table: one row per model, `None` for missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
    pub decimals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    pub per_dataset: Vec<Table>,
    pub average: Table,
    pub warnings: Vec<String>,
}

/// Per-dataset score tables (three decimals) plus a table of F1 averaged over
/// datasets (two decimals). Duplicate `(model, method, dataset)` reports keep
/// the latest one. An average is only shown when the model has that method on
/// every dataset.
pub fn build_tables(reports: &[EvalReport]) -> Result<Tables> {
    if reports.is_empty() {
        return Err(Error::Invalid("no reports to tabulate".into()));
    }
    let mut warnings = Vec::new();
    let mut cells: BTreeMap<(String, Method, String), &EvalReport> = BTreeMap::new();
    let mut models: Vec<String> = Vec::new();
    let mut methods: BTreeSet<Method> = BTreeSet::new();
    let mut datasets: BTreeSet<String> = BTreeSet::new();
    for r in reports {
        let method = Method::parse(&r.meta.method)
            .ok_or_else(|| Error::Invalid(format!("unknown method {:?}", r.meta.method)))?;
        if !models.contains(&r.meta.model) {
            models.push(r.meta.model.clone());
        }
        methods.insert(method);
        datasets.insert(r.meta.dataset.clone());
        let key = (r.meta.model.clone(), method, r.meta.dataset.clone());
        match cells.get(&key) {
            Some(prev) => {
                warnings.push(format!(
                    "duplicate report for model={} method={} dataset={}; keeping the latest",
                    key.0,
                    method.as_str(),
                    key.2
                ));
                if r.meta.created_at_ms >= prev.meta.created_at_ms {
                    cells.insert(key, r);
                }
            }
            None => {
                cells.insert(key, r);
            }
        }
    }

    let per_dataset = datasets
        .iter()
        .map(|ds| {
            let mut columns = Vec::new();
            for m in &methods {
                let prefix = match m {
                    Method::Cluster => "Clusters",
                    Method::LogReg => "LogReg",
                };
                columns.push(format!("{prefix} F1"));
                columns.push(format!("{prefix} Acc"));
            }
            let rows = models
                .iter()
                .map(|model| {
                    let values = methods
                        .iter()
                        .flat_map(|&m| {
                            let r = cells.get(&(model.clone(), m, ds.clone()));
                            [r.map(|r| r.f1_macro), r.map(|r| r.accuracy)]
                        })
                        .collect();
                    (model.clone(), values)
                })
                .collect();
            Table {
                title: ds.clone(),
                columns,
                rows,
                decimals: 3,
            }
        })
        .collect();

    let average = Table {
        title: format!("Average F1 over {} dataset(s)", datasets.len()),
        columns: methods
            .iter()
            .map(|m| match m {
                Method::Cluster => "Cluster F1".to_owned(),
                Method::LogReg => "LogReg F1".to_owned(),
            })
            .collect(),
        rows: models
            .iter()
            .map(|model| {
                let values = methods
                    .iter()
                    .map(|&m| {
                        let scores: Option<Vec<f64>> = datasets
                            .iter()
                            .map(|ds| {
                                cells
                                    .get(&(model.clone(), m, ds.clone()))
                                    .map(|r| r.f1_macro)
                            })
                            .collect();
                        scores.map(|s| s.iter().sum::<f64>() / s.len() as f64)
                    })
                    .collect();
                (model.clone(), values)
            })
            .collect(),
        decimals: 2,
    };
    Ok(Tables {
        per_dataset,
        average,
        warnings,
    })
}

impl Table {
    pub fn cell_text(&self, row: usize, col: usize) -> String {
        match self.rows[row].1[col] {
            Some(v) => format!("{:.*}", self.decimals, v),
            None => "—".to_owned(),
        }
    }

    pub fn to_markdown(&self) -> String {
        let mut best: Vec<Option<String>> = Vec::with_capacity(self.columns.len());
        for c in 0..self.columns.len() {
            let top = self
                .rows
                .iter()
                .filter_map(|(_, v)| v[c])
                .fold(None, |b: Option<f64>, v| Some(b.map_or(v, |b| b.max(v))));
            best.push(top.map(|v| format!("{:.*}", self.decimals, v)));
        }
        let mut out = format!("### {}\n\n| Model |", self.title);
        for c in &self.columns {
            out.push_str(&format!(" {c} |"));
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(self.columns.len()));
        out.push('\n');
        for (r, (model, _)) in self.rows.iter().enumerate() {
            out.push_str(&format!("| {model} |"));
            for (c, top) in best.iter().enumerate() {
                let text = self.cell_text(r, c);
                if top.as_deref() == Some(text.as_str()) && self.rows.len() > 1 {
                    out.push_str(&format!(" **{text}** |"));
                } else {
                    out.push_str(&format!(" {text} |"));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("table,model");
        for c in &self.columns {
            out.push(',');
            out.push_str(&csv_escape(c));
        }
        out.push('\n');
        for (r, (model, _)) in self.rows.iter().enumerate() {
            out.push_str(&csv_escape(&self.title));
            out.push(',');
            out.push_str(&csv_escape(model));
            for c in 0..self.columns.len() {
                out.push(',');
                out.push_str(&self.cell_text(r, c));
            }
            out.push('\n');
        }
        out
    }
}

/// Renders every per-dataset table followed by the averaged table. Returns the
/// text and any duplicate-report warnings.
pub fn render_tables(reports: &[EvalReport], format: TableFormat) -> Result<(String, Vec<String>)> {
    let tables = build_tables(reports)?;
    let render = |t: &Table| match format {
        TableFormat::Markdown => t.to_markdown(),
        TableFormat::Csv => t.to_csv(),
    };
    let parts: Vec<String> = tables
        .per_dataset
        .iter()
        .chain(std::iter::once(&tables.average))
        .map(render)
        .collect();
    Ok((parts.join("\n"), tables.warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ConfusionMatrix;

    pub(crate) fn fake(model: &str, method: &str, dataset: &str, f1: f64, ts: u64) -> EvalReport {
        EvalReport {
            f1_macro: f1,
            accuracy: f1 + 0.01,
            per_class: BTreeMap::new(),
            confusion: ConfusionMatrix {
                labels: vec![],
                counts: vec![],
            },
            meta: RunMeta {
                dataset: dataset.into(),
                model: model.into(),
                method: method.into(),
                seed: 0,
                split_mode: "in-sample".into(),
                test_fraction: None,
                n_train: 0,
                n_test: 0,
                split_warnings: vec![],
                corpus_sha256: None,
                embeddings_sha256: None,
                created_at_ms: ts,
                config: json!({}),
            },
        }
    }

    #[test]
    fn two_by_two_by_two_shape() {
        let mut reports = Vec::new();
        for model in ["m1", "m2"] {
            for method in ["cluster", "logreg"] {
                for ds in ["d1", "d2"] {
                    reports.push(fake(model, method, ds, 0.5, 1));
                }
            }
        }
        let t = build_tables(&reports).unwrap();
        assert_eq!(t.per_dataset.len(), 2);
        assert_eq!(t.average.rows.len(), 2);
        assert_eq!(t.average.columns.len(), 2);
        assert_eq!(t.per_dataset[0].columns.len(), 4);
    }

    #[test]
    fn single_report_single_cell() {
        let t = build_tables(&[fake("m", "cluster", "d", 0.3, 1)]).unwrap();
        assert_eq!(t.average.rows.len(), 1);
        assert_eq!(t.average.columns, vec!["Cluster F1"]);
    }

    #[test]
    fn average_rounds_to_two_decimals() {
        let t = build_tables(&[
            fake("sbert", "cluster", "amazon", 0.225, 1),
            fake("sbert", "cluster", "news", 0.212, 1),
        ])
        .unwrap();
        assert!((t.average.rows[0].1[0].unwrap() - 0.2185).abs() < 1e-12);
        assert_eq!(t.average.cell_text(0, 0), "0.22");
    }

    #[test]
    fn missing_cells_render_as_dash() {
        let reports = [
            fake("a", "cluster", "d1", 0.2, 1),
            fake("a", "cluster", "d2", 0.3, 1),
            fake("b", "cluster", "d1", 0.4, 1),
        ];
        let (md, _) = render_tables(&reports, TableFormat::Markdown).unwrap();
        assert!(md.contains("| b | — |"));
        assert!(md.contains("**0.400**"));
    }

    #[test]
    fn latest_duplicate_wins() {
        let (csv, warnings) = render_tables(
            &[
                fake("a", "logreg", "d", 0.9, 5),
                fake("a", "logreg", "d", 0.1, 3),
            ],
            TableFormat::Csv,
        )
        .unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(csv.contains("d,a,0.900,0.910"));
    }

    #[test]
    fn no_reports_is_an_error() {
        assert!(build_tables(&[]).is_err());
    }
}
