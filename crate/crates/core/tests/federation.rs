use fedhdc::datasets::{synthetic_dataset, Dataset, PartitionScheme};
use fedhdc::federation::{encode_data, rounds_to_accuracy, run_encoded, run_training, EncoderConfig, FederationConfig};
use fedhdc::privacy::{rho_max, PrivacySpec};

/// Train on the first 40 samples of every class, test on the last 10.
fn split(noise: f64) -> (Dataset, Dataset) {
    let all = synthetic_dataset(21, 4, 50, 8, 8, noise).unwrap();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, s) in all.samples.into_iter().enumerate() {
        if i % 50 < 40 {
            train.push(s);
        } else {
            test.push(s);
        }
    }
    (Dataset::new(train, 8, 8, 4).unwrap(), Dataset::new(test, 8, 8, 4).unwrap())
}

fn config(privacy: Option<f64>) -> FederationConfig {
    let dim = 1024;
    FederationConfig {
        users: 8,
        max_rounds: 5,
        privacy: privacy.map(|epsilon| PrivacySpec { epsilon, delta: 1e-5, kappa: (dim as f64).sqrt(), rounds: 5 }),
        encoder: EncoderConfig { dim, levels: 8, seed: 2 },
        seed: 3,
        ..Default::default()
    }
}

#[test]
fn runs_are_reproducible() {
    let (train, test) = split(0.5);
    let cfg = config(Some(5.0));
    let a = run_training(&cfg, &train, &test).unwrap();
    let b = run_training(&cfg, &train, &test).unwrap();
    assert_eq!(a.logs, b.logs);
    assert_eq!(a.global, b.global);
}

#[test]
fn thread_count_does_not_change_results() {
    let (train, test) = split(0.5);
    let cfg = config(Some(5.0));
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_training(&cfg, &train, &test).unwrap())
    };
    let (one, many) = (run(1), run(4));
    assert_eq!(one.logs, many.logs);
    assert_eq!(one.global, many.global);
}

#[test]
fn budget_is_spent_exactly_over_the_planned_rounds() {
    let (train, test) = split(0.5);
    let run = run_training(&config(Some(5.0)), &train, &test).unwrap();
    let target = rho_max(5.0, 1e-5).unwrap();
    let spent = run.logs.last().unwrap().rho_spent;
    assert!((spent - target).abs() < 1e-9 * target);
    for (j, l) in run.logs.iter().enumerate() {
        assert!((l.rho_spent - target * (j + 1) as f64 / 5.0).abs() < 1e-9 * target);
        assert!((0.0..=1.0).contains(&l.accuracy));
    }
    assert_eq!(run.logs[0].mismatches, vec![0; 8]);
}

#[test]
fn negligible_noise_matches_the_noise_free_run() {
    let (train, test) = split(0.5);
    let clean = run_training(&config(None), &train, &test).unwrap();
    let faint = run_training(&config(Some(1e9)), &train, &test).unwrap();
    for (a, b) in clean.logs.iter().zip(&faint.logs) {
        assert!((a.accuracy - b.accuracy).abs() <= 0.05, "round {}: {} vs {}", a.round, a.accuracy, b.accuracy);
    }
    assert!(clean.logs.iter().all(|l| l.rho_spent == 0.0));
}

#[test]
fn heavy_noise_hurts() {
    let (train, test) = split(0.5);
    let clean = run_training(&config(None), &train, &test).unwrap();
    let loud = run_training(&config(Some(0.01)), &train, &test).unwrap();
    let last = |r: &fedhdc::federation::TrainingRun| r.logs.last().unwrap().accuracy;
    assert!(last(&loud) < last(&clean));
}

#[test]
fn rounds_to_accuracy_records_first_hit_and_sentinel() {
    let (train, test) = split(0.3);
    let mut data = encode_data(&config(None).encoder, &train, &test).unwrap();
    let easy = FederationConfig { target_accuracy: Some(0.0), ..config(None) };
    let r = rounds_to_accuracy(&easy, &train, &mut data, &[0, 1, 2]).unwrap();
    assert_eq!(r.rounds, vec![1, 1, 1]);
    assert_eq!(r.mean, 1.0);
    assert!(r.converged.iter().all(|&c| c));

    let impossible = FederationConfig {
        target_accuracy: Some(1.0),
        privacy: Some(PrivacySpec { epsilon: 0.01, delta: 1e-5, kappa: 32.0, rounds: 5 }),
        ..config(None)
    };
    let r = rounds_to_accuracy(&impossible, &train, &mut data, &[0, 1]).unwrap();
    assert_eq!(r.rounds, vec![6, 6]);
    assert_eq!(r.converged, vec![false, false]);

    let run = run_encoded(&easy, &train, &mut data).unwrap();
    assert_eq!(run.logs.len(), 1);
    assert_eq!(run.reached_round, Some(1));
}

#[test]
fn non_iid_partition_trains() {
    let (train, test) = split(0.3);
    let cfg = FederationConfig { partition: PartitionScheme::NonIid { shards_per_user: 2 }, ..config(None) };
    let run = run_training(&cfg, &train, &test).unwrap();
    assert!(run.logs.last().unwrap().accuracy > 0.5);
}

#[test]
fn mismatched_encoder_is_rejected() {
    let (train, test) = split(0.3);
    let mut data = encode_data(&config(None).encoder, &train, &test).unwrap();
    let other = FederationConfig { encoder: EncoderConfig { seed: 99, ..config(None).encoder }, ..config(None) };
    assert!(run_encoded(&other, &train, &mut data).is_err());
}

#[test]
fn retraining_noise_scales_with_the_learning_rate() {
    // eta = 0 makes retraining a no-op, so rounds after the first must add
    // no noise either and the global memory stays put
    let (train, test) = split(0.5);
    let cfg = FederationConfig {
        trainer: fedhdc::hdc::TrainerConfig { eta: 0.0, ..Default::default() },
        ..config(Some(5.0))
    };
    let run = run_training(&cfg, &train, &test).unwrap();
    let acc: Vec<f64> = run.logs.iter().map(|l| l.accuracy).collect();
    assert!(acc.windows(2).all(|w| w[0] == w[1]), "{acc:?}");
}
