//! Experiment CLI for tabular novel class discovery.
//!
//! Verbosity comes from the `TABNCD_LOG` environment variable
//! (error|warn|info|debug, default info). Exit codes: 2 configuration
//! error, 3 data error, 4 training divergence, 1 anything else.

mod aggregate;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use tabncd_core::data::summarize;
use tabncd_core::experiment::{self as pipeline, ExperimentConfig};
use tabncd_core::metrics::MetricsReport;
use tabncd_core::{Error, Result};

use aggregate::{aggregate, format_table, MetricsSample};

#[derive(Parser)]
#[command(
    name = "tabncd",
    about = "Novel class discovery experiments on tabular data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Realize the NCD protocol split and write its summary.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Self-supervised encoder pretraining (writes encoder.tncd).
    Pretrain {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Joint training from a pretrained encoder (or --cold-start).
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Checkpoint holding a pretrained encoder (from `pretrain`).
        #[arg(long)]
        encoder: Option<PathBuf>,
        /// Train without pretraining (the encoder starts random).
        #[arg(long, default_value_t = false)]
        cold_start: bool,
        /// Also dump per-batch pseudo-label precision to CSV.
        #[arg(long, default_value_t = false)]
        dump_pseudo_precision: bool,
    },
    /// Evaluate a trained model checkpoint on the unlabeled test split.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a comparison method under the same protocol.
    Baseline {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// kmeans | projection | all
        #[arg(long, default_value = "all")]
        method: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export latent embeddings for external visualization.
    ExportEmbeddings {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out_csv: PathBuf,
    },
    /// Full pipeline: split, pretrain, train, evaluate, baselines, export.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Repeat the full pipeline over several seeds and aggregate.
    SweepSeeds {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Number of seeds to run.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// First seed; runs use base_seed..base_seed+seeds.
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new()
            .filter_or("TABNCD_LOG", "info")
            .write_style("TABNCD_LOG_STYLE"),
    )
    .format_timestamp(None)
    .init();

    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            let code = match e {
                Error::Config(_) => 2,
                Error::Data(_) | Error::Csv(_) => 3,
                Error::Diverged(_) => 4,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Split { manifest, out } => {
            let (ds, _) = pipeline::load_dataset(&manifest)?;
            let summary = summarize(&ds);
            pipeline::write_json(&out.join("split_summary.json"), &summary)?;
            info!("split summary written to {:?}", out.join("split_summary.json"));
            Ok(())
        }
        Command::Pretrain {
            manifest,
            config,
            out,
        } => {
            let cfg = ExperimentConfig::load(config.as_deref())?;
            let (ds, _) = pipeline::load_dataset(&manifest)?;
            pipeline::write_json(&out.join("config.json"), &cfg)?;
            pipeline::pretrain(&ds, &cfg, &out)?;
            Ok(())
        }
        Command::Train {
            manifest,
            config,
            out,
            encoder,
            cold_start,
            dump_pseudo_precision,
        } => {
            let cfg = ExperimentConfig::load(config.as_deref())?;
            let (ds, _) = pipeline::load_dataset(&manifest)?;
            let encoder_net = match (&encoder, cold_start) {
                (Some(path), _) => Some(pipeline::load_encoder(path)?),
                (None, true) => None,
                (None, false) => {
                    return Err(Error::config(
                        "train needs --encoder <checkpoint> or an explicit --cold-start",
                    ))
                }
            };
            pipeline::write_json(&out.join("config.json"), &cfg)?;
            let (_, log) = pipeline::train(&ds, &cfg, encoder_net, &out)?;
            if dump_pseudo_precision {
                dump_precision_csv(&log, &out.join("pseudo_precision.csv"))?;
            }
            Ok(())
        }
        Command::Eval {
            manifest,
            checkpoint,
            out,
        } => {
            let (ds, _) = pipeline::load_dataset(&manifest)?;
            let model = pipeline::load_model(&checkpoint)?;
            let report = pipeline::evaluate(&model, &ds)?;
            info!(
                "{}: ACC {:.4} BACC {:.4} NMI {:.4} ARI {:.4}",
                ds.name, report.acc, report.bacc, report.nmi, report.ari
            );
            pipeline::write_json(&out.join("metrics_tabularncd.json"), &report)?;
            Ok(())
        }
        Command::Baseline {
            manifest,
            config,
            method,
            out,
        } => {
            let cfg = ExperimentConfig::load(config.as_deref())?;
            let (ds, _) = pipeline::load_dataset(&manifest)?;
            let mut reports: BTreeMap<String, MetricsReport> = BTreeMap::new();
            match method.as_str() {
                "kmeans" => {
                    reports.insert("kmeans".into(), pipeline::kmeans_baseline(&ds, cfg.seed)?);
                }
                "projection" => {
                    reports.insert(
                        "baseline".into(),
                        pipeline::projection_baseline_report(&ds, &cfg)?,
                    );
                }
                "all" => {
                    reports.insert("kmeans".into(), pipeline::kmeans_baseline(&ds, cfg.seed)?);
                    reports.insert(
                        "baseline".into(),
                        pipeline::projection_baseline_report(&ds, &cfg)?,
                    );
                }
                other => {
                    return Err(Error::config(format!(
                        "unknown baseline method {other:?} (kmeans | projection | all)"
                    )))
                }
            }
            for (name, report) in &reports {
                info!("{name}: ACC {:.4} BACC {:.4}", report.acc, report.bacc);
            }
            pipeline::write_json(&out.join("metrics_baselines.json"), &reports)?;
            Ok(())
        }
        Command::ExportEmbeddings {
            manifest,
            checkpoint,
            out_csv,
        } => {
            let (ds, _) = pipeline::load_dataset(&manifest)?;
            let encoder = pipeline::load_encoder(&checkpoint)?;
            pipeline::export_embeddings(&encoder, &ds, &out_csv)?;
            info!("embeddings written to {out_csv:?}");
            Ok(())
        }
        Command::Run {
            manifest,
            config,
            out,
            seed,
        } => {
            let metrics = pipeline::run_experiment(&manifest, config.as_deref(), &out, seed)?;
            info!("metrics written to {metrics:?}");
            Ok(())
        }
        Command::SweepSeeds {
            manifest,
            config,
            out,
            seeds,
            base_seed,
        } => {
            let base_cfg = ExperimentConfig::load(config.as_deref())?;
            let mut per_method: BTreeMap<String, Vec<MetricsSample>> = BTreeMap::new();
            let mut seed_list = Vec::new();
            let mut dataset = String::new();
            for i in 0..seeds {
                let seed = base_seed + i;
                seed_list.push(seed);
                let run_dir = out.join(format!("seed_{seed}"));
                // per-epoch checkpoints would add up across a sweep
                let mut cfg = base_cfg.clone().with_seed(seed);
                cfg.checkpoint_every_epoch = false;
                std::fs::create_dir_all(&run_dir)?;
                let cfg_path = run_dir.join("sweep_config.json");
                pipeline::write_json(&cfg_path, &cfg)?;
                let metrics_path =
                    pipeline::run_experiment(&manifest, Some(&cfg_path), &run_dir, None)?;
                let text = std::fs::read_to_string(&metrics_path)?;
                let reports: BTreeMap<String, MetricsReport> = serde_json::from_str(&text)?;
                for (name, report) in reports {
                    per_method.entry(name).or_default().push(MetricsSample {
                        acc: report.acc,
                        bacc: report.bacc,
                        nmi: report.nmi,
                        ari: report.ari,
                    });
                }
                if dataset.is_empty() {
                    let (manifest_parsed, _) =
                        tabncd_core::data::DatasetManifest::from_path(&manifest)?;
                    dataset = manifest_parsed.name;
                }
            }
            let report = aggregate(&dataset, &seed_list, &per_method);
            pipeline::write_json(&out.join("aggregate.json"), &report)?;
            println!("{}", format_table(&report));
            Ok(())
        }
    }
}

fn dump_precision_csv(log: &pipeline::TrainLog, path: &std::path::Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["epoch", "batch", "precision"])?;
    for entry in &log.epochs {
        for (batch, p) in entry.losses.batch_pseudo_precisions.iter().enumerate() {
            writer.write_record([
                entry.losses.epoch.to_string(),
                batch.to_string(),
                p.to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}
