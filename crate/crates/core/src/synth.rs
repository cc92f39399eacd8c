//! Synthetic Gaussian-blob datasets for sanity checks and end-to-end tests.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::{ClassMap, ColumnSchema, EvalSplit, NcdDataset, TrainSplit};
use crate::matrix::Matrix;
use crate::rng::seeded;
use crate::scalar::Float;

/// One isotropic Gaussian blob per class.
#[derive(Clone, Debug)]
pub struct BlobSpec {
    pub center: Vec<f64>,
    pub sigma: f64,
    pub n: usize,
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Builds an NCD dataset of Gaussian blobs: the first `n_known` blobs are
/// known classes, the rest unknown. Rows are split 70/30 per class, scaled
/// to [0, 1] with training-split min-max, exactly like the CSV path.
pub fn blob_dataset<F: Float>(
    blobs: &[BlobSpec],
    n_known: usize,
    seed: u64,
) -> NcdDataset<F> {
    assert!(n_known >= 1 && n_known < blobs.len());
    let dim = blobs[0].center.len();
    let mut rng = seeded(seed, "blobs");

    let mut train_rows: Vec<Vec<f64>> = Vec::new();
    let mut train_y: Vec<usize> = Vec::new();
    let mut test_rows: Vec<Vec<f64>> = Vec::new();
    let mut test_y: Vec<usize> = Vec::new();
    for (class, blob) in blobs.iter().enumerate() {
        assert_eq!(blob.center.len(), dim);
        let n_train = ((blob.n as f64) * 0.7).round() as usize;
        for i in 0..blob.n {
            let row: Vec<f64> = blob
                .center
                .iter()
                .map(|&c| c + blob.sigma * gauss(&mut rng))
                .collect();
            if i < n_train {
                train_rows.push(row);
                train_y.push(class);
            } else {
                test_rows.push(row);
                test_y.push(class);
            }
        }
    }

    // min-max scale on training rows only
    let mut mins = vec![f64::INFINITY; dim];
    let mut maxs = vec![f64::NEG_INFINITY; dim];
    for row in &train_rows {
        for (c, &v) in row.iter().enumerate() {
            mins[c] = mins[c].min(v);
            maxs[c] = maxs[c].max(v);
        }
    }
    let scale = |rows: &[Vec<f64>], clamp: bool| -> Matrix<F> {
        let scaled: Vec<Vec<F>> = rows
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(c, &v)| {
                        let s = if maxs[c] > mins[c] {
                            (v - mins[c]) / (maxs[c] - mins[c])
                        } else {
                            0.0
                        };
                        F::c(if clamp { s.clamp(-0.05, 1.05) } else { s })
                    })
                    .collect()
            })
            .collect();
        Matrix::from_rows(&scaled).unwrap()
    };

    let labels: Vec<Option<usize>> = train_y
        .iter()
        .map(|&y| if y < n_known { Some(y) } else { None })
        .collect();
    let known: Vec<String> = (0..n_known).map(|i| format!("class{i}")).collect();
    let unknown: Vec<String> = (n_known..blobs.len()).map(|i| format!("class{i}")).collect();

    NcdDataset {
        name: "blobs".to_string(),
        schema: ColumnSchema::all_continuous(dim),
        classes: ClassMap::new(&known, &unknown),
        train: TrainSplit {
            x: scale(&train_rows, false),
            labels,
        },
        train_truth: train_y,
        test: EvalSplit {
            x: scale(&test_rows, true),
            y: test_y,
        },
        dropped_rows: 0,
        unseen_category_cells: 0,
    }
}

/// The three-Gaussian sanity set: one known class, two well-separated
/// unknown classes.
pub fn three_blob_sanity<F: Float>(n_per_class: usize, seed: u64) -> NcdDataset<F> {
    let blobs = vec![
        BlobSpec {
            center: vec![0.0, 0.0, 6.0, 0.0],
            sigma: 0.5,
            n: n_per_class,
        },
        BlobSpec {
            center: vec![6.0, 6.0, 0.0, 0.0],
            sigma: 0.5,
            n: n_per_class,
        },
        BlobSpec {
            center: vec![-6.0, 6.0, -6.0, 0.0],
            sigma: 0.5,
            n: n_per_class,
        },
    ];
    blob_dataset(&blobs, 1, seed)
}
