use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use embclust::corpus::{ingest_amazon, ingest_news, AmazonOptions, DEFAULT_REVIEW_FIELD};
use embclust::embedding_store::{save_embeddings, EmbeddingMatrix};
use embclust::report::{render_tables, summary_line, TableFormat, TFIDF_MODEL_NAME};
use embclust::{
    Corpus, EvalConfig, EvalMode, EvalReport, LogRegConfig, Method, Normalize, RowMatrix,
    TfidfModel,
};

/// Cluster-classifier and logistic-regression evaluation over sentence embeddings.
#[derive(Debug, Parser)]
#[command(name = "embclust", version)]
struct Cli {
    /// Seed for sampling, splits and k-means restarts.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a corpus TSV from raw JSON-lines data.
    #[command(subcommand)]
    Ingest(IngestCommand),
    /// Compute embeddings natively.
    #[command(subcommand)]
    Embed(EmbedCommand),
    /// Fit and score a classifier on a corpus and its embeddings.
    Evaluate(EvaluateArgs),
    /// Render result tables from evaluation reports.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
enum IngestCommand {
    /// Amazon reviews, one JSON-lines file per category.
    Amazon {
        /// `<file>:<category>`, repeatable.
        #[arg(long = "input", required = true, num_args = 1..)]
        inputs: Vec<String>,
        #[arg(long, default_value_t = 1000)]
        per_class: usize,
        #[arg(long, default_value = DEFAULT_REVIEW_FIELD)]
        review_field: String,
    },
    /// News headlines with `headline` and `category` fields.
    News {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1000)]
        per_class: usize,
    },
}

#[derive(Debug, Subcommand)]
enum EmbedCommand {
    /// TF-IDF bag of words, written densified as emb-v1.
    Tfidf {
        #[arg(long)]
        corpus: PathBuf,
        /// JSON vocabulary `{token: {index, idf}}`.
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Cluster,
    Logreg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EvalArg {
    Split,
    InSample,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormalizeArg {
    On,
    Off,
    Auto,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Markdown,
    Csv,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Dataset name recorded in the report; defaults to the corpus file stem.
    #[arg(long)]
    dataset: Option<String>,
    /// Held-out fraction for `--eval split`.
    #[arg(long, default_value_t = 0.2)]
    split: f64,
    #[arg(long = "eval", value_enum, default_value = "split")]
    eval_mode: EvalArg,
    /// Cluster count; defaults to the number of classes.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 300)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 10)]
    n_init: usize,
    #[arg(long, value_enum, default_value = "auto")]
    normalize: NormalizeArg,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    #[arg(long, default_value_t = 1000)]
    max_epochs: usize,
    #[arg(long, default_value_t = 1e-5)]
    grad_tol: f64,
    #[arg(long, default_value_t = 0.5)]
    learning_rate: f64,
    /// Standardize features before logistic regression.
    #[arg(long)]
    standardize: bool,
    /// Also write the confusion matrix as CSV.
    #[arg(long)]
    confusion_csv: Option<PathBuf>,
    /// Dump the trained logistic-regression model as JSON.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "markdown")]
    format: FormatArg,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<embclust::Error> for Failure {
    fn from(e: embclust::Error) -> Self {
        Failure::Data(e.into())
    }
}

fn require_out(out: &Option<PathBuf>) -> Result<&Path, Failure> {
    out.as_deref()
        .ok_or_else(|| Failure::Usage("--out is required for this command".into()))
}

fn parse_input(spec: &str) -> Result<(PathBuf, String), Failure> {
    match spec.rsplit_once(':') {
        Some((file, category)) if !file.is_empty() && !category.trim().is_empty() => {
            Ok((PathBuf::from(file), category.to_owned()))
        }
        _ => Err(Failure::Usage(format!(
            "--input expects <file>:<category>, got {spec:?}"
        ))),
    }
}

fn write(path: &Path, content: &str) -> Result<(), Failure> {
    std::fs::write(path, content)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Data)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Ingest(cmd) => {
            let out = require_out(&cli.out)?;
            let (corpus, stats) = match cmd {
                IngestCommand::Amazon {
                    inputs,
                    per_class,
                    review_field,
                } => {
                    if per_class == 0 {
                        return Err(Failure::Usage("--per-class must be at least 1".into()));
                    }
                    let inputs = inputs
                        .iter()
                        .map(|s| parse_input(s))
                        .collect::<Result<Vec<_>, _>>()?;
                    let opts = AmazonOptions {
                        per_class,
                        seed: cli.seed,
                        review_field,
                    };
                    ingest_amazon(&inputs, &opts)?
                }
                IngestCommand::News { input, per_class } => {
                    if per_class == 0 {
                        return Err(Failure::Usage("--per-class must be at least 1".into()));
                    }
                    ingest_news(&input, per_class, cli.seed)?
                }
            };
            corpus.write_tsv(out)?;
            eprintln!("skipped={}", stats.skipped());
            eprintln!("filtered={}", stats.filtered);
            log::info!(
                "wrote {} examples in {} classes to {}",
                corpus.len(),
                corpus.labels.len(),
                out.display()
            );
        }
        Command::Embed(EmbedCommand::Tfidf { corpus, vocab }) => {
            let out = require_out(&cli.out)?;
            let corpus = Corpus::read_tsv(&corpus)?;
            let texts = corpus.texts();
            let model = TfidfModel::<f32>::fit(&texts)?;
            let sparse = model.transform(&texts);
            if sparse.n_cols() == 0 {
                return Err(Failure::Data(anyhow::anyhow!(
                    "corpus has no tokens; TF-IDF vocabulary is empty"
                )));
            }
            let emb = EmbeddingMatrix::new(TFIDF_MODEL_NAME, sparse.to_dense())?;
            save_embeddings(&emb, out)?;
            if let Some(vocab) = vocab {
                write(&vocab, &model.vocab_json())?;
            }
            log::info!("{} rows × {} features", emb.n(), emb.dim());
        }
        Command::Evaluate(args) => {
            let out = require_out(&cli.out)?;
            let mode = match args.eval_mode {
                EvalArg::InSample => EvalMode::InSample,
                EvalArg::Split => {
                    if !(args.split > 0.0 && args.split < 1.0) {
                        return Err(Failure::Usage("--split must lie in (0, 1)".into()));
                    }
                    EvalMode::Split {
                        test_fraction: args.split,
                    }
                }
            };
            let method = match args.method {
                MethodArg::Cluster => Method::Cluster,
                MethodArg::Logreg => Method::LogReg,
            };
            let config = EvalConfig {
                method,
                mode,
                seed: cli.seed,
                k: args.k,
                max_iter: args.max_iter,
                tol: args.tol,
                n_init: args.n_init,
                normalize: match args.normalize {
                    NormalizeArg::On => Normalize::On,
                    NormalizeArg::Off => Normalize::Off,
                    NormalizeArg::Auto => Normalize::Auto,
                },
                logreg: LogRegConfig {
                    l2: args.l2,
                    max_epochs: args.max_epochs,
                    grad_tol: args.grad_tol,
                    learning_rate: args.learning_rate,
                },
                standardize: args.standardize,
            };
            let outcome = embclust::run_evaluate(
                &args.corpus,
                &args.embeddings,
                args.dataset.as_deref(),
                &config,
            )?;
            for w in &outcome.report.meta.split_warnings {
                eprintln!("warning: {w}");
            }
            write(out, &outcome.report.to_json())?;
            if let Some(path) = &args.confusion_csv {
                write(path, &outcome.report.confusion.to_csv())?;
            }
            if let (Some(path), Some(model)) = (&args.model_out, &outcome.logreg_model) {
                write(path, &model.to_json())?;
            }
            println!("{}", summary_line(&outcome.report));
        }
        Command::Report(args) => {
            let reports = args
                .reports
                .iter()
                .map(|p| {
                    let text = std::fs::read_to_string(p)
                        .with_context(|| format!("reading {}", p.display()))?;
                    EvalReport::from_json(&text).with_context(|| format!("parsing {}", p.display()))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            let format = match args.format {
                FormatArg::Markdown => TableFormat::Markdown,
                FormatArg::Csv => TableFormat::Csv,
            };
            let (text, warnings) = render_tables(&reports, format)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            match &cli.out {
                Some(path) => write(path, &text)?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
