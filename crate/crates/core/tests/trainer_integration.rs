use autodrop_core::trainer::{train, BlobSpec, MlpModel, Scheduler, TrainConfig};
use autodrop_core::*;
use rand::Rng;

fn blobs(seed: u64) -> trainer::SyntheticDataset {
    BlobSpec {
        classes: 3,
        dim: 8,
        samples: 300,
        separation: 2.0,
        noise_scale: 1.0,
    }
    .generate(seed)
    .unwrap()
}

fn base_config(scheduler: Scheduler) -> TrainConfig {
    TrainConfig {
        epochs: 20,
        batch_size: 25,
        seed: 4,
        optimizer: UmConfig::heavy_ball(0.9).unwrap(),
        scheduler,
        keep_snapshots: false,
    }
}

fn central_difference(model: &MlpModel, data: &trainer::SyntheticDataset, batch: &[usize], params: &ParamVector, j: usize) -> f64 {
    let h = 1e-5;
    let mut plus = params.clone();
    plus[j] += h;
    let mut minus = params.clone();
    minus[j] -= h;
    let up = model.forward_loss(&plus, data, batch).unwrap().0;
    let down = model.forward_loss(&minus, data, batch).unwrap().0;
    (up - down) / (2.0 * h)
}

fn assert_close(fd: f64, analytic: f64, what: &str) {
    let scale = fd.abs().max(analytic.abs()).max(1e-6);
    assert!(
        (fd - analytic).abs() / scale <= 1e-4,
        "{what}: finite difference {fd} vs analytic {analytic}"
    );
}

#[test]
fn gradient_matches_finite_differences_on_every_layer() {
    let data = blobs(1);
    let model = MlpModel::two_layer(8, 6, 3);
    let (h, d, c) = (6, 8, 3);
    let blocks = [
        ("w1", 0, h * d),
        ("b1", h * d, h * d + h),
        ("w2", h * d + h, h * d + h + c * h),
        ("b2", h * d + h + c * h, model.param_count()),
    ];
    let mut rng = seeded_rng(3);
    for _ in 0..10 {
        let mut params = model.init(&mut rng);
        // Non-zero biases so every block has a generic gradient.
        for v in params.iter_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
        let batch: Vec<usize> = (0..16).map(|_| rng.random_range(0..data.len())).collect();
        let (_, grad) = model.forward_loss(&params, &data, &batch).unwrap();
        for (name, lo, hi) in blocks {
            for _ in 0..8 {
                let j = rng.random_range(lo..hi);
                let fd = central_difference(&model, &data, &batch, &params, j);
                assert_close(fd, grad[j], name);
            }
        }
    }
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    let data = blobs(2);
    let model = MlpModel::logistic(8, 3);
    let mut rng = seeded_rng(5);
    for _ in 0..10 {
        let params = model.init(&mut rng);
        let batch: Vec<usize> = (0..32).map(|_| rng.random_range(0..data.len())).collect();
        let (_, grad) = model.forward_loss(&params, &data, &batch).unwrap();
        for _ in 0..32 {
            let j = rng.random_range(0..params.dim());
            assert_close(central_difference(&model, &data, &batch, &params, j), grad[j], "logistic");
        }
    }
}

#[test]
fn zero_hidden_weights_gradient_follows_rectifier_pattern() {
    let data = blobs(3);
    let model = MlpModel::two_layer(8, 4, 3);
    let mut rng = seeded_rng(8);
    let mut params = model.init(&mut rng);
    // Zero first-layer weights; biases pick active (positive) and dead units.
    for v in params[..32].iter_mut() {
        *v = 0.0;
    }
    params[32..36].copy_from_slice(&[0.5, -0.5, 0.3, -0.3]);
    let batch: Vec<usize> = (0..20).collect();
    let (_, grad) = model.forward_loss(&params, &data, &batch).unwrap();
    for j in 0..params.dim() {
        assert_close(central_difference(&model, &data, &batch, &params, j), grad[j], "zero-weight net");
    }
    // Dead units receive no first-layer gradient.
    for unit in [1usize, 3] {
        assert!(grad[unit * 8..(unit + 1) * 8].iter().all(|&g| g == 0.0));
        assert_eq!(grad[32 + unit], 0.0);
    }
}

#[test]
fn same_seed_gives_identical_records() {
    let data = blobs(1);
    let eval = blobs(2);
    let model = MlpModel::two_layer(8, 6, 3);
    let mut ad = AutoDropConfig::recommended(0.05, 0.5).unwrap();
    ad.n_d = 3;
    ad.theta0 = 2.0;
    ad.theta_max = 20.0;
    let cfg = base_config(Scheduler::AutoDrop { config: ad });
    let a = train(&model, &data, &eval, &cfg).unwrap();
    let b = train(&model, &data, &eval, &cfg).unwrap();
    assert_eq!(format!("{:?}", a.records), format!("{:?}", b.records));
    assert_eq!(a.final_params, b.final_params);
}

#[test]
fn omega_column_matches_tracker_on_snapshots() {
    let data = blobs(1);
    let eval = blobs(2);
    let model = MlpModel::logistic(8, 3);
    for scheduler in [
        Scheduler::Constant { alpha: 0.05 },
        Scheduler::AutoDrop {
            config: AutoDropConfig {
                n_d: 2,
                theta0: 1e9,
                theta_max: 1e9,
                ..AutoDropConfig::recommended(0.05, 0.5).unwrap()
            },
        },
    ] {
        let cfg = TrainConfig {
            keep_snapshots: true,
            ..base_config(scheduler)
        };
        let out = train(&model, &data, &eval, &cfg).unwrap();
        let mut tracker = VelocityTracker::new(1).unwrap();
        for (record, (start, end)) in out.records.iter().zip(&out.snapshots) {
            let omega = tracker.observe(end, start).unwrap().map(|a| a.value());
            assert_eq!(record.omega, omega, "epoch {}", record.epoch);
        }
    }
}

#[test]
fn always_saturated_threshold_changes_rate_at_epoch_three_plus_delay() {
    let data = blobs(1);
    let eval = blobs(2);
    let model = MlpModel::logistic(8, 3);
    for n_d in [1usize, 2, 5] {
        let config = AutoDropConfig {
            n_d,
            theta0: 1e9,
            theta_max: 1e9,
            ..AutoDropConfig::recommended(0.1, 0.5).unwrap()
        };
        let out = train(&model, &data, &eval, &base_config(Scheduler::AutoDrop { config })).unwrap();
        let first_change = out
            .records
            .iter()
            .find(|r| r.learning_rate != 0.1)
            .map(|r| r.epoch);
        assert_eq!(first_change, Some(3 + n_d));
        let first_drop = out.records.iter().find(|r| r.dropped).map(|r| r.epoch);
        assert_eq!(first_drop, Some(2 + n_d));
        assert_eq!(out.records[2 + n_d].learning_rate, 0.05);
    }
}

#[test]
fn rate_at_floor_stays_constant() {
    let data = blobs(1);
    let eval = blobs(2);
    let model = MlpModel::logistic(8, 3);
    let config = AutoDropConfig {
        alpha0: 0.02,
        alpha_min: 0.02,
        n_d: 2,
        theta0: 1e9,
        theta_max: 1e9,
        ..AutoDropConfig::recommended(0.02, 0.5).unwrap()
    };
    let out = train(&model, &data, &eval, &base_config(Scheduler::AutoDrop { config })).unwrap();
    assert!(out.records.iter().any(|r| r.dropped));
    assert!(out.records.iter().all(|r| r.learning_rate == 0.02));
}

#[test]
fn piecewise_schedule_sets_epoch_rates() {
    let data = blobs(1);
    let eval = blobs(2);
    let model = MlpModel::logistic(8, 3);
    let schedule = PiecewiseSchedule::new(vec![0.1, 0.05, 0.01], vec![5, 5, 5]).unwrap();
    let out = train(&model, &data, &eval, &base_config(Scheduler::Piecewise { schedule })).unwrap();
    let rates: Vec<f64> = out.records.iter().map(|r| r.learning_rate).collect();
    assert!(rates[..5].iter().all(|&a| a == 0.1));
    assert!(rates[5..10].iter().all(|&a| a == 0.05));
    assert!(rates[10..].iter().all(|&a| a == 0.01));
}

#[test]
fn training_reduces_loss_and_learns() {
    let data = blobs(1);
    let eval = blobs(2);
    let model = MlpModel::two_layer(8, 6, 3);
    let out = train(&model, &data, &eval, &base_config(Scheduler::Constant { alpha: 0.02 })).unwrap();
    let first = out.records[0].train_loss;
    assert!(out.final_train_loss() < first);
    assert!(out.records.last().unwrap().eval_accuracy > 0.6);
}

#[test]
fn divergence_is_reported() {
    let data = blobs(1);
    let eval = blobs(2);
    let model = MlpModel::two_layer(8, 6, 3);
    let cfg = TrainConfig {
        optimizer: UmConfig::heavy_ball(0.99).unwrap(),
        ..base_config(Scheduler::Constant { alpha: 1e6 })
    };
    assert!(matches!(
        train(&model, &data, &eval, &cfg),
        Err(LabError::NonFinite(_))
    ));
}

#[test]
fn short_runs_are_rejected() {
    let data = blobs(1);
    let model = MlpModel::logistic(8, 3);
    let cfg = TrainConfig {
        epochs: 2,
        ..base_config(Scheduler::Constant { alpha: 0.1 })
    };
    assert!(train(&model, &data, &data, &cfg).is_err());
}
