//! Multi-seed aggregation: mean and sample standard deviation per metric
//! per method, mirroring how the results table reports 10-run spreads.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    MeanStd { mean, std }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub acc: MeanStd,
    pub bacc: MeanStd,
    pub nmi: MeanStd,
    pub ari: MeanStd,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub dataset: String,
    pub seeds: Vec<u64>,
    pub methods: BTreeMap<String, MethodAggregate>,
}

pub struct MetricsSample {
    pub acc: f64,
    pub bacc: f64,
    pub nmi: f64,
    pub ari: f64,
}

pub fn aggregate(
    dataset: &str,
    seeds: &[u64],
    per_method: &BTreeMap<String, Vec<MetricsSample>>,
) -> SweepReport {
    let methods = per_method
        .iter()
        .map(|(name, samples)| {
            let collect = |f: fn(&MetricsSample) -> f64| {
                mean_std(&samples.iter().map(f).collect::<Vec<_>>())
            };
            (
                name.clone(),
                MethodAggregate {
                    acc: collect(|s| s.acc),
                    bacc: collect(|s| s.bacc),
                    nmi: collect(|s| s.nmi),
                    ari: collect(|s| s.ari),
                },
            )
        })
        .collect();
    SweepReport {
        dataset: dataset.to_string(),
        seeds: seeds.to_vec(),
        methods,
    }
}

/// Text table in the style of the paper's results rows.
pub fn format_table(report: &SweepReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:<12} {:>14} {:>14} {:>14} {:>14}\n",
        "dataset", "method", "BACC (%)", "ACC (%)", "NMI", "ARI"
    ));
    for (method, agg) in &report.methods {
        out.push_str(&format!(
            "{:<12} {:<12} {:>7.1}+-{:<4.1} {:>7.1}+-{:<4.1} {:>7.2}+-{:<4.2} {:>7.2}+-{:<4.2}\n",
            report.dataset,
            method,
            agg.bacc.mean * 100.0,
            agg.bacc.std * 100.0,
            agg.acc.mean * 100.0,
            agg.acc.std * 100.0,
            agg.nmi.mean,
            agg.nmi.std,
            agg.ari.mean,
            agg.ari.std,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_matches_hand_values() {
        let ms = mean_std(&[1.0, 2.0, 3.0]);
        assert!((ms.mean - 2.0).abs() < 1e-12);
        assert!((ms.std - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_sample_has_zero_std() {
        let ms = mean_std(&[0.5]);
        assert_eq!(ms.std, 0.0);
    }
}
