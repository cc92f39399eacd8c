//! Run-level orchestration: the flat experiment configuration plus the
//! plumbing each CLI subcommand drives (pretrain, train, evaluate,
//! baselines, embedding export, full runs). Every artifact lands under the
//! chosen output directory; input files are never mutated.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::baselines::{kmeans_best, projection_baseline, KMEANS_MAX_ITER, KMEANS_RESTARTS};
use crate::data::{build_dataset, summarize, DatasetManifest, NcdDataset};
use crate::error::{Error, Result};
use crate::joint::{Architecture, EpochLog, JointModel, TrainConfig, Trainer};
use crate::metrics::MetricsReport;
use crate::nn::checkpoint::{load_named, load_nets, save_nets};
use crate::nn::DenseNet;
use crate::rng::{derive_seed, seeded};
use crate::ssl::{ssl_pretrain, PretrainLog, SslConfig, SslHeads};

/// Scalar type experiments run at.
pub type Real = f64;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Single seed all run randomness flows from.
    pub seed: u64,

    // encoder sizing (None derives from the input dimension)
    pub hidden: Option<usize>,
    pub latent: Option<usize>,

    // self-supervised pretraining
    pub ssl_epochs: usize,
    pub p_m: f64,
    pub alpha: f64,
    pub lr_ssl: f64,

    // joint training
    pub w1: f64,
    pub w2: f64,
    pub top_k: usize,
    pub lr_classifier: f64,
    pub lr_cluster: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub k_neighbors: usize,

    /// Write a checkpoint after every joint-training epoch.
    pub checkpoint_every_epoch: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            hidden: None,
            latent: None,
            ssl_epochs: 30,
            p_m: 0.3,
            alpha: 2.0,
            lr_ssl: 1e-3,
            w1: 0.8,
            w2: 0.9,
            top_k: 5,
            lr_classifier: 1e-3,
            lr_cluster: 1e-3,
            batch_size: 512,
            epochs: 30,
            k_neighbors: 5,
            checkpoint_every_epoch: true,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg = match path {
            None => ExperimentConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::config(format!("cannot read config {p:?}: {e}")))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::config(format!("invalid config {p:?}: {e}")))?
            }
        };
        cfg.train_config().validate()?;
        if !(cfg.p_m > 0.0 && cfg.p_m < 1.0) {
            return Err(Error::config(format!("p_m {} must lie in (0, 1)", cfg.p_m)));
        }
        Ok(cfg)
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            hidden: self.hidden,
            latent: self.latent,
        }
    }

    pub fn ssl_config(&self) -> SslConfig {
        SslConfig {
            epochs: self.ssl_epochs,
            p_m: self.p_m,
            alpha: self.alpha,
            lr: self.lr_ssl,
            batch_size: self.batch_size,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            w1: self.w1,
            w2: self.w2,
            top_k: self.top_k,
            lr_classifier: self.lr_classifier,
            lr_cluster: self.lr_cluster,
            batch_size: self.batch_size,
            epochs: self.epochs,
            augment: AugmentConfig {
                k_neighbors: self.k_neighbors,
            },
            seed: self.seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}


pub fn load_dataset(manifest_path: &Path) -> Result<(NcdDataset<Real>, DatasetManifest)> {
    let (manifest, base) = DatasetManifest::from_path(manifest_path)?;
    let ds = build_dataset::<Real>(&manifest, &base)?;
    info!(
        "loaded {}: {} train rows ({} labeled), {} test rows, {} encoded dims",
        ds.name,
        ds.train.len(),
        ds.train.labeled_indices().len(),
        ds.test.x.rows(),
        ds.schema.encoded_dim()
    );
    Ok((ds, manifest))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Self-supervised pretraining; writes `encoder.tncd` and
/// `pretrain_log.json` under `out_dir` and returns the encoder.
pub fn pretrain(
    ds: &NcdDataset<Real>,
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(DenseNet<Real>, PretrainLog)> {
    let mut rng = seeded(cfg.seed, "encoder-init");
    let d = ds.schema.encoded_dim();
    let (hidden, latent) = cfg.architecture().resolve(d);
    let mut encoder = DenseNet::new(
        d,
        &[
            crate::nn::LayerSpec::new(hidden, crate::nn::Activation::Relu),
            crate::nn::LayerSpec::new(latent, crate::nn::Activation::Identity),
        ],
        &mut rng,
    )?;
    let mut heads = SslHeads::new(latent, d, &mut rng)?;
    let log = ssl_pretrain(&mut encoder, &mut heads, &ds.train.x, &cfg.ssl_config(), cfg.seed)?;
    save_nets(&out_dir.join("encoder.tncd"), &[("encoder", &encoder)])?;
    write_json(&out_dir.join("pretrain_log.json"), &log)?;
    info!(
        "pretraining done: final loss {:.4}",
        log.epochs.last().map_or(f64::NAN, |e| e.total)
    );
    Ok((encoder, log))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestMetricsEntry {
    pub acc: f64,
    pub bacc: f64,
    pub nmi: f64,
    pub ari: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainEpochEntry {
    #[serde(flatten)]
    pub losses: EpochLog,
    /// Metrics on the unlabeled test split after this epoch.
    pub test: TestMetricsEntry,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainLog {
    pub dataset: String,
    pub seed: u64,
    pub epochs: Vec<TrainEpochEntry>,
}

fn summarize_metrics(report: &MetricsReport) -> TestMetricsEntry {
    TestMetricsEntry {
        acc: report.acc,
        bacc: report.bacc,
        nmi: report.nmi,
        ari: report.ari,
    }
}

/// Joint training; writes per-epoch checkpoints (when configured),
/// `model.tncd` and `train_log.json`, and returns the trained model.
pub fn train(
    ds: &NcdDataset<Real>,
    cfg: &ExperimentConfig,
    encoder: Option<DenseNet<Real>>,
    out_dir: &Path,
) -> Result<(JointModel<Real>, TrainLog)> {
    let mut rng = seeded(cfg.seed, "heads-init");
    let model = match encoder {
        Some(enc) => JointModel::with_encoder(
            enc,
            ds.classes.n_known(),
            ds.classes.n_unknown(),
            &mut rng,
        )?,
        None => {
            info!("cold start: no pretrained encoder");
            JointModel::new(
                ds.schema.encoded_dim(),
                &cfg.architecture(),
                ds.classes.n_known(),
                ds.classes.n_unknown(),
                &mut rng,
            )?
        }
    };

    let mut trainer = Trainer::new(model, &ds.train, &ds.schema, cfg.train_config())?;
    let mut log = TrainLog {
        dataset: ds.name.clone(),
        seed: cfg.seed,
        epochs: Vec::with_capacity(cfg.epochs),
    };
    let (x_u, y_u) = ds.unknown_test();
    for epoch in 0..cfg.epochs {
        let losses = trainer.train_epoch(&ds.train, Some(&ds.train_truth))?;
        let clusters = trainer.model().predict_clusters(&x_u)?;
        let report = MetricsReport::compute(&y_u, &clusters)?;
        info!(
            "epoch {epoch}: l_class {:.4} l_clust {:.4} precision {:.3} test ACC {:.4}",
            losses.l_class,
            losses.l_clust,
            losses.pseudo_precision.unwrap_or(f64::NAN),
            report.acc
        );
        log.epochs.push(TrainEpochEntry {
            losses,
            test: summarize_metrics(&report),
        });
        if cfg.checkpoint_every_epoch {
            save_model(
                trainer.model(),
                &out_dir.join(format!("checkpoints/epoch_{epoch:04}.tncd")),
            )?;
        }
    }
    let model = trainer.into_model();
    save_model(&model, &out_dir.join("model.tncd"))?;
    write_json(&out_dir.join("train_log.json"), &log)?;
    Ok((model, log))
}

pub fn save_model(model: &JointModel<Real>, path: &Path) -> Result<()> {
    save_nets(
        path,
        &[
            ("encoder", &model.encoder),
            ("classifier", &model.classifier),
            ("cluster_head", &model.cluster_head),
        ],
    )
}

pub fn load_model(path: &Path) -> Result<JointModel<Real>> {
    let mut nets: BTreeMap<String, DenseNet<Real>> = load_nets(path)?.into_iter().collect();
    let take = |nets: &mut BTreeMap<String, DenseNet<Real>>, name: &str| {
        nets.remove(name)
            .ok_or_else(|| Error::data(format!("checkpoint {path:?} has no {name:?} net")))
    };
    Ok(JointModel {
        encoder: take(&mut nets, "encoder")?,
        classifier: take(&mut nets, "classifier")?,
        cluster_head: take(&mut nets, "cluster_head")?,
    })
}

/// Metrics for the trained model on the unlabeled test split.
pub fn evaluate(model: &JointModel<Real>, ds: &NcdDataset<Real>) -> Result<MetricsReport> {
    let (x_u, y_u) = ds.unknown_test();
    let clusters = model.predict_clusters(&x_u)?;
    MetricsReport::compute(&y_u, &clusters)
}

/// k-means competitor: clusters the unlabeled test rows directly in input
/// space with k = C^u.
pub fn kmeans_baseline(ds: &NcdDataset<Real>, seed: u64) -> Result<MetricsReport> {
    let (x_u, y_u) = ds.unknown_test();
    let result = kmeans_best(
        &x_u,
        ds.classes.n_unknown(),
        derive_seed(seed, "kmeans-baseline"),
        KMEANS_MAX_ITER,
        KMEANS_RESTARTS,
    )?;
    MetricsReport::compute(&y_u, &result.labels)
}

/// Supervised-projection baseline on the unlabeled test rows.
pub fn projection_baseline_report(
    ds: &NcdDataset<Real>,
    cfg: &ExperimentConfig,
) -> Result<MetricsReport> {
    let (x_u, y_u) = ds.unknown_test();
    let labels = projection_baseline(
        &ds.train,
        ds.classes.n_known(),
        &x_u,
        ds.classes.n_unknown(),
        &cfg.architecture(),
        cfg.epochs,
        cfg.lr_classifier,
        cfg.batch_size,
        derive_seed(cfg.seed, "projection-baseline"),
    )?;
    MetricsReport::compute(&y_u, &labels)
}

/// One row per sample: id, split, true class, latent coordinates. Ground
/// truth appears here for audit/visualization only.
pub fn export_embeddings(
    encoder: &DenseNet<Real>,
    ds: &NcdDataset<Real>,
    out_csv: &Path,
) -> Result<()> {
    if encoder.input_dim() != ds.schema.encoded_dim() {
        return Err(Error::config(format!(
            "checkpoint expects {} inputs, dataset has {}",
            encoder.input_dim(),
            ds.schema.encoded_dim()
        )));
    }
    if let Some(dir) = out_csv.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let latent = encoder.output_dim();
    let mut writer = csv::Writer::from_path(out_csv)?;
    let mut header = vec!["id".to_string(), "split".to_string(), "class".to_string()];
    header.extend((0..latent).map(|i| format!("z{i}")));
    writer.write_record(&header)?;

    let n_known = ds.classes.n_known();
    let train_splits: Vec<&str> = ds
        .train
        .labels
        .iter()
        .map(|l| {
            if l.is_some() {
                "train_labeled"
            } else {
                "train_unlabeled"
            }
        })
        .collect();
    let test_splits: Vec<&str> = ds
        .test
        .y
        .iter()
        .map(|&y| {
            if y < n_known {
                "test_labeled"
            } else {
                "test_unlabeled"
            }
        })
        .collect();

    let mut id = 0usize;
    for (x, classes, splits) in [
        (&ds.train.x, &ds.train_truth, &train_splits),
        (&ds.test.x, &ds.test.y, &test_splits),
    ] {
        let z = encoder.forward(x)?;
        for r in 0..z.rows() {
            let mut record = vec![
                id.to_string(),
                splits[r].to_string(),
                ds.classes.name_of(classes[r]).to_string(),
            ];
            record.extend(z.row(r).iter().map(|v| v.to_string()));
            writer.write_record(&record)?;
            id += 1;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Full experiment: split summary, pretraining, joint training, evaluation
/// of TabularNCD plus both baselines, and the embedding export.
pub fn run_experiment(
    manifest_path: &Path,
    config_path: Option<&Path>,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<PathBuf> {
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(seed) = seed_override {
        cfg = cfg.with_seed(seed);
    }
    std::fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("config.json"), &cfg)?;

    let (ds, _manifest) = load_dataset(manifest_path)?;
    write_json(&out_dir.join("split_summary.json"), &summarize(&ds))?;

    let (encoder, _) = pretrain(&ds, &cfg, out_dir)?;
    let (model, _) = train(&ds, &cfg, Some(encoder), out_dir)?;

    let tabularncd = evaluate(&model, &ds)?;
    let kmeans = kmeans_baseline(&ds, cfg.seed)?;
    let baseline = projection_baseline_report(&ds, &cfg)?;
    info!(
        "{}: tabularncd ACC {:.4} | kmeans ACC {:.4} | baseline ACC {:.4}",
        ds.name, tabularncd.acc, kmeans.acc, baseline.acc
    );

    let mut metrics = BTreeMap::new();
    metrics.insert("tabularncd", tabularncd);
    metrics.insert("kmeans", kmeans);
    metrics.insert("baseline", baseline);
    let metrics_path = out_dir.join("metrics.json");
    write_json(&metrics_path, &metrics)?;

    export_embeddings(&model.encoder, &ds, &out_dir.join("embeddings.csv"))?;
    Ok(metrics_path)
}

/// Loads just the encoder from either a model or an encoder checkpoint.
pub fn load_encoder(path: &Path) -> Result<DenseNet<Real>> {
    load_named(path, "encoder")
}
