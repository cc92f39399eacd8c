//! Behavioral contrasts for the supervised-projection baseline: it loses
//! unknown-class structure that the known classes never needed, and it
//! amplifies structure the classes share.

use rand::Rng;
use tabncd_core::baselines::{kmeans_best, projection_baseline};
use tabncd_core::data::TrainSplit;
use tabncd_core::joint::Architecture;
use tabncd_core::matrix::Matrix;
use tabncd_core::metrics::clustering_accuracy;
use tabncd_core::rng::seeded;

struct Fixture {
    train: TrainSplit<f64>,
    test_x: Matrix<f64>,
    test_y: Vec<usize>,
}

/// Known classes 0/1 split along dim 0. Unknown classes differ only along
/// dim 1, which carries no information about the known classes; the
/// remaining dims are shared noise.
fn unknowns_on_irrelevant_feature(seed: u64) -> Fixture {
    let mut rng = seeded(seed, "fixture-irrelevant");
    let d = 6;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for class in 0..2usize {
        for _ in 0..150 {
            let mut row = vec![0.0; d];
            row[0] = class as f64 + rng.gen_range(-0.2..0.2);
            row[1] = 0.5 + rng.gen_range(-0.2..0.2);
            for v in row.iter_mut().skip(2) {
                *v = rng.gen_range(0.0..1.0);
            }
            rows.push(row);
            labels.push(Some(class));
        }
    }
    // unlabeled training rows from the unknown classes (unused by the
    // baseline, present for protocol fidelity)
    let mut test_rows = Vec::new();
    let mut test_y = Vec::new();
    for cluster in 0..2usize {
        for i in 0..150 {
            let mut row = vec![0.0; d];
            row[0] = 0.5 + rng.gen_range(-0.2..0.2);
            row[1] = cluster as f64 + rng.gen_range(-0.05..0.05);
            for v in row.iter_mut().skip(2) {
                *v = rng.gen_range(0.0..1.0);
            }
            if i < 75 {
                rows.push(row);
                labels.push(None);
            } else {
                test_rows.push(row);
                test_y.push(cluster);
            }
        }
    }
    Fixture {
        train: TrainSplit {
            x: Matrix::from_rows(&rows).unwrap(),
            labels,
        },
        test_x: Matrix::from_rows(&test_rows).unwrap(),
        test_y,
    }
}

/// Unknown classes are copies of the known-class geometry along the shared
/// discriminative dim 0, while a stronger decoy direction (dim 1, bimodal,
/// class-independent) dominates raw-space distances and pulls k-means the
/// wrong way.
fn unknowns_share_discriminative_feature(seed: u64) -> Fixture {
    let mut rng = seeded(seed, "fixture-shared");
    let d = 8;
    let make_row = |cluster: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        let mut row = vec![0.0; d];
        row[0] = cluster as f64 * 0.8 + rng.gen_range(-0.15..0.15);
        // decoy: bigger separation than the signal, independent of class
        row[1] = if rng.gen::<bool>() { 0.0 } else { 1.5 } + rng.gen_range(-0.1..0.1);
        for v in row.iter_mut().skip(2) {
            *v = rng.gen_range(0.0..1.0);
        }
        row
    };
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for class in 0..2usize {
        for _ in 0..200 {
            rows.push(make_row(class, &mut rng));
            labels.push(Some(class));
        }
    }
    let mut test_rows = Vec::new();
    let mut test_y = Vec::new();
    for cluster in 0..2usize {
        for i in 0..200 {
            let row = make_row(cluster, &mut rng);
            if i < 100 {
                rows.push(row);
                labels.push(None);
            } else {
                test_rows.push(row);
                test_y.push(cluster);
            }
        }
    }
    Fixture {
        train: TrainSplit {
            x: Matrix::from_rows(&rows).unwrap(),
            labels,
        },
        test_x: Matrix::from_rows(&test_rows).unwrap(),
        test_y,
    }
}

fn run_baseline(fixture: &Fixture, seed: u64) -> f64 {
    let labels = projection_baseline(
        &fixture.train,
        2,
        &fixture.test_x,
        2,
        &Architecture {
            hidden: Some(16),
            latent: Some(8),
        },
        30,
        1e-3,
        64,
        seed,
    )
    .unwrap();
    clustering_accuracy(&fixture.test_y, &labels).unwrap()
}

fn run_raw_kmeans(fixture: &Fixture, seed: u64) -> f64 {
    let result = kmeans_best(&fixture.test_x, 2, seed, 300, 10).unwrap();
    clustering_accuracy(&fixture.test_y, &result.labels).unwrap()
}

#[test]
fn projection_loses_unknown_only_features() {
    let fixture = unknowns_on_irrelevant_feature(1);
    let raw = run_raw_kmeans(&fixture, 2);
    let projected = run_baseline(&fixture, 3);
    // raw space separates the unknowns trivially (dim 1 dominates)
    assert!(raw >= 0.95, "raw k-means ACC {raw}");
    assert!(
        projected < raw,
        "projection ACC {projected} not below raw k-means {raw}"
    );
}

#[test]
fn projection_amplifies_shared_features() {
    let fixture = unknowns_share_discriminative_feature(4);
    let raw = run_raw_kmeans(&fixture, 5);
    let projected = run_baseline(&fixture, 6);
    assert!(
        projected > raw,
        "projection ACC {projected} not above raw k-means {raw}"
    );
}

#[test]
fn baseline_ignores_unlabeled_training_rows() {
    // scrambling the unlabeled rows must not change the baseline's output
    let fixture = unknowns_on_irrelevant_feature(7);
    let mut scrambled = fixture.train.clone();
    let mut rng = seeded(8, "scramble");
    for (i, label) in scrambled.labels.iter().enumerate() {
        if label.is_none() {
            let row = scrambled.x.row_mut(i);
            for v in row {
                *v = rng.gen_range(-5.0..5.0);
            }
        }
    }
    let a = projection_baseline(
        &fixture.train,
        2,
        &fixture.test_x,
        2,
        &Architecture::default(),
        10,
        1e-3,
        64,
        9,
    )
    .unwrap();
    let b = projection_baseline(
        &scrambled,
        2,
        &fixture.test_x,
        2,
        &Architecture::default(),
        10,
        1e-3,
        64,
        9,
    )
    .unwrap();
    assert_eq!(a, b);
}
