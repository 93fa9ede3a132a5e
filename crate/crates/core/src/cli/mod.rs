//! Command-line harness. Every command takes `--config`, `--seed` and
//! `--out`; failures print one `error code=<code> message=<json string>` line
//! to stderr and exit nonzero.

pub mod config;
pub mod grid;
pub mod histogram;
pub mod pipeline;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::datamodel::{load_dataset, save_dataset, Dataset};
use crate::error::{Error, Result};
use crate::eval::evaluate_offline;
use crate::explain::feature_importance;
use crate::interleave::run_interleaving_experiment;
use crate::labelforge::{load_score_file, SigmoidParams};
use crate::ranker::{load_ensemble, save_ensemble};

pub use config::{ContentSource, ExperimentConfig, VariantConfig, DEFAULT_CONFIG};
pub use grid::{run_grid, write_grid, GridReport};
pub use histogram::{histogram, Histogram};

#[derive(Debug, Parser)]
#[command(
    name = "ltrkit",
    version,
    about = "Learning-to-rank label engineering and evaluation toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the training and evaluation corpora.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Train one variant's ranker.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        variant: String,
        /// Training corpus; generated from the config when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Offline NDCG comparison of two models with simulated judges.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        baseline_model: PathBuf,
        #[arg(long)]
        variant_model: PathBuf,
        /// Evaluation corpus; generated from the config when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Team-draft interleaving of two models with simulated users.
    Interleave {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        baseline_model: PathBuf,
        #[arg(long)]
        variant_model: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Mean |SHAP| feature importance of a model.
    Explain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train and compare every variant in the config.
    Grid {
        #[command(flatten)]
        common: Common,
    },
    /// Histogram of content scores before and after a sigmoid transform.
    Histogram {
        #[command(flatten)]
        common: Common,
        /// `pair_id,score` file; otherwise scores come from `--variant`.
        #[arg(long, conflicts_with = "variant")]
        scores: Option<PathBuf>,
        /// Variant whose content source and transform to use.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        #[arg(long, requires = "beta")]
        alpha: Option<f64>,
        #[arg(long, requires = "alpha")]
        beta: Option<f64>,
    },
}

struct Loaded {
    config: ExperimentConfig,
    master: u64,
}

fn load(common: &Common) -> Result<Loaded> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("--config is required for this command".into()))?;
    let config = ExperimentConfig::load(path)?;
    let master = common.seed.unwrap_or(config.seed);
    Ok(Loaded { config, master })
}

fn out_dir(common: &Common) -> Result<&Path> {
    fs::create_dir_all(&common.out).map_err(|e| Error::io(&common.out, e))?;
    Ok(&common.out)
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn eval_data(l: &Loaded, data: &Option<PathBuf>) -> Result<Dataset> {
    match data {
        Some(p) => load_dataset(p),
        None => pipeline::eval_corpus(&l.config, l.master),
    }
}

fn cmd_generate(common: &Common) -> Result<()> {
    let l = load(common)?;
    let out = out_dir(common)?;
    let train = pipeline::train_corpus(&l.config, l.master)?;
    let eval = pipeline::eval_corpus(&l.config, l.master)?;
    save_dataset(&train, out.join("train.csv"))?;
    save_dataset(&eval, out.join("eval.csv"))?;
    println!(
        "wrote {} and {}",
        out.join("train.csv").display(),
        out.join("eval.csv").display()
    );
    Ok(())
}

fn cmd_train(common: &Common, variant: &str, data: &Option<PathBuf>) -> Result<()> {
    let l = load(common)?;
    let v = l.config.variant(variant)?;
    let train = match data {
        Some(p) => load_dataset(p)?,
        None => pipeline::train_corpus(&l.config, l.master)?,
    };
    let content = pipeline::ContentModels::train(&l.config, &train, l.master, [v])?;
    let outcome = pipeline::train_variant(&l.config, v, &train, &content, l.master)?;
    let out = out_dir(common)?;
    save_ensemble(&outcome.ensemble, out.join("model.json"))?;
    write_file(&out.join("train_ndcg.csv"), |w| {
        grid::write_train_ndcg(&outcome.train_ndcg, w)
    })?;
    println!("wrote {}", out.join("model.json").display());
    Ok(())
}

fn cmd_evaluate(
    common: &Common,
    baseline: &Path,
    variant: &Path,
    data: &Option<PathBuf>,
) -> Result<()> {
    let l = load(common)?;
    let (b, v) = (load_ensemble(baseline)?, load_ensemble(variant)?);
    let eval = eval_data(&l, data)?;
    let seed = pipeline::stream(l.master, pipeline::streams::OFFLINE);
    let report = evaluate_offline(&b, &v, &eval, &l.config.judge, l.config.eval.k, seed)?;
    let out = out_dir(common)?;
    write_file(&out.join("offline.csv"), |w| report.write_csv(w))?;
    write_file(&out.join("offline_per_query.csv"), |w| {
        report.write_per_query_csv(w)
    })?;
    println!("{}", report.csv_row());
    Ok(())
}

fn cmd_interleave(
    common: &Common,
    baseline: &Path,
    variant: &Path,
    data: &Option<PathBuf>,
) -> Result<()> {
    let l = load(common)?;
    let (b, v) = (load_ensemble(baseline)?, load_ensemble(variant)?);
    let eval = eval_data(&l, data)?;
    let seed = pipeline::stream(l.master, pipeline::streams::INTERLEAVE);
    let report =
        run_interleaving_experiment(&b, &v, &eval, &l.config.user, &l.config.interleave, seed)?;
    let out = out_dir(common)?;
    write_file(&out.join("interleave.csv"), |w| report.write_csv(w))?;
    println!("{}", report.csv_row());
    Ok(())
}

fn cmd_explain(common: &Common, model: &Path, data: &Option<PathBuf>) -> Result<()> {
    let l = load(common)?;
    let ensemble = load_ensemble(model)?;
    let eval = eval_data(&l, data)?;
    let sample = grid::explain_sample(&eval, l.config.explain.sample_size, l.master);
    let report = feature_importance(&ensemble, sample)?;
    let out = out_dir(common)?;
    write_file(&out.join("importance.csv"), |w| report.write_csv(w))?;
    println!("wrote {}", out.join("importance.csv").display());
    Ok(())
}

fn cmd_grid(common: &Common) -> Result<()> {
    let l = load(common)?;
    let report = run_grid(&l.config, l.master)?;
    write_grid(&report, &common.out)?;
    print!("{}", report.to_text());
    Ok(())
}

fn cmd_histogram(
    common: &Common,
    scores: &Option<PathBuf>,
    variant: &Option<String>,
    bins: usize,
    transform: Option<SigmoidParams>,
) -> Result<()> {
    let (values, transform) = match (scores, variant) {
        (Some(path), _) => {
            let mut pairs: Vec<(String, f64)> = load_score_file(path)?.into_iter().collect();
            pairs.sort_by(|a, b| a.0.cmp(&b.0));
            (
                pairs.into_iter().map(|(_, s)| s).collect::<Vec<f64>>(),
                transform,
            )
        }
        (None, Some(name)) => {
            let l = load(common)?;
            let v = l.config.variant(name)?;
            let train = pipeline::train_corpus(&l.config, l.master)?;
            let content = pipeline::ContentModels::train(&l.config, &train, l.master, [v])?;
            let c = content.content_scores(v, &train)?;
            (c.into_iter().flatten().collect(), transform.or(v.transform))
        }
        (None, None) => {
            return Err(Error::InvalidConfig(
                "histogram needs --scores or --variant".into(),
            ))
        }
    };
    if let Some(t) = transform {
        t.validate()?;
    }
    let h = histogram(&values, bins, transform)?;
    let out = out_dir(common)?;
    write_file(&out.join("histogram.csv"), |w| h.write_csv(w))?;
    println!("wrote {}", out.join("histogram.csv").display());
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate { common } => cmd_generate(common),
        Command::Train {
            common,
            variant,
            data,
        } => cmd_train(common, variant, data),
        Command::Evaluate {
            common,
            baseline_model,
            variant_model,
            data,
        } => cmd_evaluate(common, baseline_model, variant_model, data),
        Command::Interleave {
            common,
            baseline_model,
            variant_model,
            data,
        } => cmd_interleave(common, baseline_model, variant_model, data),
        Command::Explain {
            common,
            model,
            data,
        } => cmd_explain(common, model, data),
        Command::Grid { common } => cmd_grid(common),
        Command::Histogram {
            common,
            scores,
            variant,
            bins,
            alpha,
            beta,
        } => {
            let transform = alpha
                .zip(*beta)
                .map(|(alpha, beta)| SigmoidParams { alpha, beta });
            cmd_histogram(common, scores, variant, *bins, transform)
        }
    }
}

/// One machine-readable line describing a failure.
pub fn error_line(code: &str, message: &str) -> String {
    format!(
        "error code={code} message={}",
        serde_json::to_string(message).expect("strings serialize")
    )
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            eprintln!(
                "{}",
                error_line(
                    "usage",
                    e.to_string().lines().next().unwrap_or("invalid usage")
                )
            );
            let _ = e.print();
            return 2;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(e.code(), &e.to_string()));
            1
        }
    }
}
