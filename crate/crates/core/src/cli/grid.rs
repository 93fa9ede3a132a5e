//! The variant grid: train every variant, compare each against the baseline
//! offline and online, and attribute the xe-dense feature.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::datamodel::{Channel, Dataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate_offline, EvalReport};
use crate::explain::{feature_importance, ImportanceReport};
use crate::interleave::{run_interleaving_experiment, InterleaveReport};
use crate::labelforge::SigmoidParams;
use crate::ranker::{save_ensemble, TreeEnsemble};
use crate::seed;

use super::config::{ContentSource, ExperimentConfig, VariantConfig};
use super::pipeline::{self, stream, streams, ContentModels};

#[derive(Debug, Clone)]
pub struct VariantResult {
    pub ensemble: TreeEnsemble,
    pub train_ndcg: Vec<f64>,
    pub offline: EvalReport,
    /// `None` for the baseline's self-comparison.
    pub interleave: Option<InterleaveReport>,
    pub importance: ImportanceReport,
    /// Rank and mean |SHAP| of the xe-dense feature, when the variant uses it.
    pub xe: Option<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct VariantFailure {
    pub code: &'static str,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct VariantRow {
    pub name: String,
    pub content_source: ContentSource,
    pub transform: Option<SigmoidParams>,
    pub use_xe_features: bool,
    pub result: std::result::Result<VariantResult, VariantFailure>,
}

#[derive(Debug, Clone)]
pub struct GridReport {
    pub master_seed: u64,
    pub baseline: String,
    pub ndcg_k: usize,
    /// Baseline first, then the other variants in config order.
    pub rows: Vec<VariantRow>,
}

const CSV_HEADER: &str = "variant,content_source,alpha,beta,xe_features,status,\
ndcg_baseline,ndcg_variant,ndcg_pct_change,ndcg_p,\
atc_baseline,atc_variant,atc_pct_change,atc_p,\
xe_rank,xe_mean_abs_shap,error";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl VariantRow {
    pub fn ok(&self) -> Option<&VariantResult> {
        self.result.as_ref().ok()
    }

    fn cells(&self) -> Vec<String> {
        let (alpha, beta) = self.transform.map_or(("NA".into(), "NA".into()), |t| {
            (t.alpha.to_string(), t.beta.to_string())
        });
        let mut cells = vec![
            self.name.clone(),
            self.content_source.as_str().to_string(),
            alpha,
            beta,
            self.use_xe_features.to_string(),
        ];
        match &self.result {
            Ok(r) => {
                cells.push("ok".into());
                cells.push(format!("{:.6}", r.offline.mean_baseline));
                cells.push(format!("{:.6}", r.offline.mean_variant));
                cells.push(format!("{:.4}", r.offline.pct_change));
                cells.push(format!("{:.6}", r.offline.test.p));
                match &r.interleave {
                    Some(i) => {
                        cells.push(i.atc_baseline.to_string());
                        cells.push(i.atc_variant.to_string());
                        cells.push(i.pct_change.map_or("NA".into(), |v| format!("{v:.4}")));
                        cells.push(format!("{:.6}", i.test.p));
                    }
                    None => {
                        cells.extend([
                            "NA".into(),
                            "NA".into(),
                            format!("{:.4}", 0.0),
                            format!("{:.6}", 1.0),
                        ]);
                    }
                }
                match r.xe {
                    Some((rank, value)) => {
                        cells.push(rank.to_string());
                        cells.push(format!("{value:.6}"));
                    }
                    None => cells.extend(["NA".into(), "NA".into()]),
                }
                cells.push(String::new());
            }
            Err(f) => {
                cells.push(format!("error:{}", f.code));
                cells.extend(std::iter::repeat_n(String::new(), 10));
                cells.push(f.message.clone());
            }
        }
        cells
    }
}

impl GridReport {
    pub fn row(&self, name: &str) -> Option<&VariantRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for row in &self.rows {
            let cells: Vec<String> = row.cells().iter().map(|c| csv_field(c)).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Fixed-width table for reading in a terminal.
    pub fn to_text(&self) -> String {
        let headers = [
            "variant", "source", "alpha", "beta", "xe", "status", "ndcg_b", "ndcg_v", "ndcg_%",
            "ndcg_p", "atc_b", "atc_v", "atc_%", "atc_p", "xe_rank", "xe_shap",
        ];
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut c = r.cells();
                c.pop();
                c
            })
            .collect();
        let widths: Vec<usize> = (0..headers.len())
            .map(|j| {
                rows.iter()
                    .map(|r| r[j].len())
                    .chain([headers[j].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut s = String::new();
        let _ = writeln!(
            s,
            "variant grid: master seed {}, baseline {}, NDCG@{}, ATC@{}",
            self.master_seed,
            self.baseline,
            self.ndcg_k,
            crate::interleave::ATC_DEPTH
        );
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let header: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
        let _ = writeln!(s, "{}", line(&header));
        let _ = writeln!(
            s,
            "{}",
            widths
                .iter()
                .map(|w| "-".repeat(*w))
                .collect::<Vec<_>>()
                .join("  ")
        );
        for r in &rows {
            let _ = writeln!(s, "{}", line(r));
        }
        for r in &self.rows {
            if let Err(f) = &r.result {
                let _ = writeln!(s, "{} failed ({}): {}", r.name, f.code, f.message);
            }
        }
        s
    }
}

/// Items whose attributions feed the importance ranking: the same seeded
/// sample of evaluation rows for every variant.
pub fn explain_sample(eval: &Dataset, size: usize, master: u64) -> Vec<&[f64]> {
    let rows: Vec<&[f64]> = eval.items().map(|(_, i)| i.features.values()).collect();
    let n = size.min(rows.len());
    let mut rng = seed::rng(stream(master, streams::EXPLAIN));
    let mut idx = sample(&mut rng, rows.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| rows[i]).collect()
}

struct Shared<'a> {
    config: &'a ExperimentConfig,
    master: u64,
    train: Dataset,
    eval: Dataset,
    content: ContentModels,
}

fn xe_importance(
    importance: &ImportanceReport,
    eval: &Dataset,
    variant: &VariantConfig,
) -> Option<(usize, f64)> {
    if !variant.use_xe_features {
        return None;
    }
    let f = eval
        .schema()
        .indices_of(Channel::XeDense)
        .into_iter()
        .next()?;
    Some((importance.rank[f], importance.mean_abs_shap[f]))
}

fn run_variant(
    shared: &Shared,
    variant: &VariantConfig,
    baseline: Option<&TreeEnsemble>,
) -> Result<VariantResult> {
    let cfg = shared.config;
    log::info!("training variant {}", variant.name);
    let outcome =
        pipeline::train_variant(cfg, variant, &shared.train, &shared.content, shared.master)?;
    let ensemble = outcome.ensemble;
    let reference = baseline.unwrap_or(&ensemble);
    let offline = evaluate_offline(
        reference,
        &ensemble,
        &shared.eval,
        &cfg.judge,
        cfg.eval.k,
        stream(shared.master, streams::OFFLINE),
    )?;
    let interleave = match baseline {
        Some(b) => Some(run_interleaving_experiment(
            b,
            &ensemble,
            &shared.eval,
            &cfg.user,
            &cfg.interleave,
            stream(shared.master, streams::INTERLEAVE),
        )?),
        None => None,
    };
    let sample = explain_sample(&shared.eval, cfg.explain.sample_size, shared.master);
    let importance = feature_importance(&ensemble, sample)?;
    let xe = xe_importance(&importance, &shared.eval, variant);
    Ok(VariantResult {
        ensemble,
        train_ndcg: outcome.train_ndcg,
        offline,
        interleave,
        importance,
        xe,
    })
}

fn row(variant: &VariantConfig, result: Result<VariantResult>) -> VariantRow {
    VariantRow {
        name: variant.name.clone(),
        content_source: variant.content_source,
        transform: variant.transform,
        use_xe_features: variant.use_xe_features,
        result: result.map_err(|e| VariantFailure {
            code: e.code(),
            message: e.to_string(),
        }),
    }
}

/// Runs the whole grid in memory. Fails only if the shared inputs or the
/// baseline fail; any other variant's failure is recorded in its row.
pub fn run_grid(config: &ExperimentConfig, master: u64) -> Result<GridReport> {
    config.validate()?;
    let train = pipeline::train_corpus(config, master)?;
    let eval = pipeline::eval_corpus(config, master)?;
    let content = ContentModels::train(
        config,
        &train,
        master,
        config
            .variants
            .iter()
            .filter(|v| v.content_source != ContentSource::FileScores),
    )?;
    let shared = Shared {
        config,
        master,
        train,
        eval,
        content,
    };
    let base_cfg = config.baseline_variant();
    let base = run_variant(&shared, base_cfg, None)?;
    let others: Vec<&VariantConfig> = config
        .variants
        .iter()
        .filter(|v| v.name != config.baseline)
        .collect();
    let rows: Vec<VariantRow> = others
        .par_iter()
        .map(|v| row(v, run_variant(&shared, v, Some(&base.ensemble))))
        .collect();
    let mut all = Vec::with_capacity(rows.len() + 1);
    all.push(row(base_cfg, Ok(base)));
    all.extend(rows);
    Ok(GridReport {
        master_seed: master,
        baseline: config.baseline.clone(),
        ndcg_k: config.eval.k,
        rows: all,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn write_with(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Writes `grid_report.csv`, `grid_report.txt` and one directory of
/// artifacts per successful variant under `out`.
/// Training NDCG per boosting round; round 0 is before the first tree.
pub fn write_train_ndcg<W: Write>(train_ndcg: &[f64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "round,train_ndcg")?;
    for (i, v) in train_ndcg.iter().enumerate() {
        writeln!(w, "{i},{v}")?;
    }
    Ok(())
}

pub fn write_grid(report: &GridReport, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for row in &report.rows {
        let Ok(r) = &row.result else { continue };
        let dir = out.join("variants").join(&row.name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        save_ensemble(&r.ensemble, dir.join("model.json"))?;
        write_with(&dir.join("offline.csv"), |w| r.offline.write_csv(w))?;
        write_with(&dir.join("offline_per_query.csv"), |w| {
            r.offline.write_per_query_csv(w)
        })?;
        if let Some(i) = &r.interleave {
            write_with(&dir.join("interleave.csv"), |w| i.write_csv(w))?;
        }
        write_with(&dir.join("importance.csv"), |w| r.importance.write_csv(w))?;
        write_with(&dir.join("train_ndcg.csv"), |w| {
            write_train_ndcg(&r.train_ndcg, w)
        })?;
    }
    write_with(&out.join("grid_report.csv"), |w| report.write_csv(w))?;
    write_with(&out.join("grid_report.txt"), |w| {
        w.write_all(report.to_text().as_bytes())
    })?;
    Ok(())
}
