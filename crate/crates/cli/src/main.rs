//! `prodclass`: train, evaluate, tune and apply product-name classifiers.
//!
//! Exit codes: 0 success, 1 invalid configuration or input, 2 data error,
//! 3 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prodclass::error::ErrorKind;
use prodclass::pipeline::{self, PipelineConfig};
use prodclass::synth::{self, CorpusSpec, Imbalance};
use prodclass::{ClassifierSpec, Error, Result, VectorizationKind};

#[derive(Parser)]
#[command(name = "prodclass", version, about = "Product-name classification pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit on a stratified split, evaluate on the held-out part, save the model.
    Train(RunArgs),
    /// k-fold cross-validation of one configuration.
    Cv(RunArgs),
    /// Grid search by cross-validation.
    Grid(RunArgs),
    /// Label every row of a CSV file with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write a synthetic labeled product corpus.
    GenCorpus {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 15)]
        classes: usize,
        #[arg(long, default_value_t = 2500)]
        size: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.02)]
        noise_rate: f64,
        /// uniform, mild or strong
        #[arg(long, default_value = "mild")]
        imbalance: String,
    },
    /// Print a saved model's metadata.
    Inspect { model: PathBuf },
}

/// Settings shared by train, cv and grid; flags override the config file.
#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV path.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Vectorization kind, e.g. tfidf or fasttext-sg.
    #[arg(long)]
    vectorizer: Option<String>,
    /// Classifier algorithm with default hyperparameters, e.g. svm.
    #[arg(long)]
    classifier: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Number of cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,
}

impl RunArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(p) = &self.data {
            c.dataset.path = p.clone();
        }
        if let Some(d) = &self.output_dir {
            c.output_dir = d.clone();
        }
        if let Some(v) = &self.vectorizer {
            c.vectorizer.kind = v.parse::<VectorizationKind>()?;
        }
        if let Some(a) = &self.classifier {
            if a != c.classifier.algorithm() {
                c.classifier = ClassifierSpec::default_for(a)?;
                c.grid = None;
            }
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(t) = self.threads {
            c.threads = t;
        }
        if let Some(k) = self.folds {
            c.cv.k = k;
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let out = pipeline::run_train(&args.config()?)?;
            print!("{}", out.report.render(out.archive.labels.labels()));
            for w in &out.archive.model.diagnostics.warnings {
                eprintln!("warning: {w}");
            }
            println!("\nmodel:  {}", out.archive_path.display());
            println!("report: {}", out.report_path.display());
        }
        Command::Cv(args) => {
            let config = args.config()?;
            let cv = pipeline::run_cv(&config)?;
            for w in cv.warnings() {
                eprintln!("warning: {w}");
            }
            for f in &cv.folds {
                println!(
                    "fold {:>2}  accuracy {:.4}  macro F1 {:.4}  weighted F1 {:.4}",
                    f.fold,
                    f.report.accuracy,
                    f.report.macro_f1(),
                    f.report.weighted_f1()
                );
            }
            println!(
                "mean     accuracy {:.4} ± {:.4}  macro F1 {:.4} ± {:.4}  weighted F1 {:.4} ± {:.4}",
                cv.accuracy.mean,
                cv.accuracy.std,
                cv.macro_f1.mean,
                cv.macro_f1.std,
                cv.weighted_f1.mean,
                cv.weighted_f1.std
            );
            println!("log: {}", config.output_dir.join("cv.log.jsonl").display());
        }
        Command::Grid(args) => {
            let config = args.config()?;
            let result = pipeline::run_grid(&config)?;
            for (i, p) in result.points.iter().enumerate() {
                let params: Vec<String> = p.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!(
                    "{} {:<40} accuracy {:.4} ± {:.4}  weighted F1 {:.4}",
                    if i == result.best { '*' } else { ' ' },
                    params.join(" "),
                    p.cv.accuracy.mean,
                    p.cv.accuracy.std,
                    p.cv.weighted_f1.mean
                );
            }
            println!("log: {}", config.output_dir.join("grid.log.jsonl").display());
        }
        Command::Predict { model, input, output } => {
            let n = pipeline::run_predict(&model, &input, &output)?;
            println!("labeled {n} rows -> {}", output.display());
        }
        Command::GenCorpus {
            output,
            classes,
            size,
            seed,
            noise_rate,
            imbalance,
        } => {
            let imbalance: Imbalance = serde_plain(&imbalance)?;
            let spec = CorpusSpec {
                classes,
                size,
                seed,
                noise_rate,
                imbalance,
            };
            let n = synth::write_corpus(&output, &spec)?;
            println!("wrote {n} records -> {}", output.display());
        }
        Command::Inspect { model } => println!("{}", pipeline::inspect(&model)?),
    }
    Ok(())
}

fn serde_plain(value: &str) -> Result<Imbalance> {
    match value {
        "uniform" => Ok(Imbalance::Uniform),
        "mild" => Ok(Imbalance::Mild),
        "strong" => Ok(Imbalance::Strong),
        other => Err(Error::config(
            "imbalance",
            format!("unknown profile `{other}` (expected uniform, mild or strong)"),
        )),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Validation => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numeric => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
