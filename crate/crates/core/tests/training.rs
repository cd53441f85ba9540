mod common;

use std::fs;

use funkan::checkpoint;
use funkan::dataset::{self, generate_samples, SynthOptions, Task};
use funkan::models::ModelSpec;
use funkan::nn::Module;
use funkan::training::{self, AugmentConfig, TrainConfig, Trainer};
use funkan::Image;

fn small_enhance() -> ModelSpec {
    ModelSpec {
        channels: vec![4, 8],
        blocks: 1,
        ..ModelSpec::enhance()
    }
}

fn small_ufunkan() -> ModelSpec {
    ModelSpec::ufunkan([4, 8, 8])
}

#[test]
fn one_epoch_over_eight_pairs_is_one_step() {
    let data = generate_samples(Task::Enhance, 8, 23, 1).unwrap();
    let mut t = Trainer::<f32>::new(Task::Enhance, &small_enhance(), 0).unwrap();
    t.train_epoch(&data, 1e-3).unwrap();
    assert_eq!(t.step_losses.len(), 1);
    let nine = generate_samples(Task::Enhance, 9, 23, 1).unwrap();
    t.train_epoch(&nine, 1e-3).unwrap();
    assert_eq!(t.step_losses.len(), 3, "a ninth pair makes a second, partial batch");
}

#[test]
fn short_overfit_cuts_the_loss_tenfold() {
    let data = generate_samples(Task::Enhance, 2, 23, 2).unwrap();
    let mut t = Trainer::<f32>::new(Task::Enhance, &small_enhance(), 0).unwrap();
    t.augment = AugmentConfig::off();
    for _ in 0..200 {
        t.train_epoch(&data, 1e-2).unwrap();
    }
    let first = t.step_losses[0];
    let last = *t.step_losses.last().unwrap();
    assert!(last * 10.0 <= first, "loss went {first} -> {last}");
}

#[test]
fn segmentation_trainer_reduces_loss() {
    let data = generate_samples(Task::Segment, 4, 32, 3).unwrap();
    let mut t = Trainer::<f32>::new(Task::Segment, &small_ufunkan(), 0).unwrap();
    for _ in 0..30 {
        t.train_epoch(&data, 3e-3).unwrap();
    }
    let first = t.step_losses[0];
    let last = *t.step_losses.last().unwrap();
    assert!(last < 0.7 * first, "loss went {first} -> {last}");
    let ev = t.evaluate(&data).unwrap();
    assert_eq!(ev.per_image.len(), 4);
    for (iou, f1) in ev.per_image.iter().zip(&ev.per_image_f1) {
        assert!((f1 - 2.0 * iou / (1.0 + iou)).abs() <= 1e-12);
    }
    let mean = ev.per_image.iter().sum::<f64>() / 4.0;
    assert!((ev.metric - mean).abs() < 1e-15);
}

#[test]
fn identical_seeds_give_identical_runs() {
    let data = generate_samples(Task::Segment, 6, 32, 4).unwrap();
    let run = || {
        let mut t = Trainer::<f32>::new(Task::Segment, &small_ufunkan(), 9).unwrap();
        t.batch_size = 4;
        for _ in 0..3 {
            t.train_epoch(&data, 1e-3).unwrap();
        }
        let weights: Vec<Vec<f32>> = t.params.iter().map(|(_, p)| p.to_vec()).collect();
        (t.step_losses.clone(), weights)
    };
    let (la, wa) = run();
    let (lb, wb) = run();
    assert_eq!(
        la.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        lb.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    assert_eq!(wa, wb);
}

#[test]
fn different_seeds_diverge() {
    let data = generate_samples(Task::Enhance, 4, 23, 5).unwrap();
    let losses = |seed| {
        let mut t = Trainer::<f32>::new(Task::Enhance, &small_enhance(), seed).unwrap();
        t.train_epoch(&data, 1e-3).unwrap();
        t.step_losses.clone()
    };
    assert_ne!(losses(1), losses(2));
}

fn write_config(dir: &std::path::Path, task: Task, count: usize, size: usize, epochs: usize) -> TrainConfig {
    let data_dir = dir.join("data");
    fs::create_dir_all(&data_dir).unwrap();
    let mut opts = SynthOptions::new(task, count, size, 17);
    opts.val_count = 2;
    opts.test_count = 0;
    let summary = dataset::write_dataset(&data_dir, &opts).unwrap();
    let mut cfg = TrainConfig::new(task, 21, summary.splits, dir.join("run"));
    cfg.model = Some(match task {
        Task::Enhance => small_enhance(),
        Task::Segment => small_ufunkan(),
    });
    cfg.epochs = epochs;
    cfg.batch_size = 4;
    cfg.lr_stages = vec![1e-3, 5e-4];
    cfg
}

#[test]
fn train_writes_metrics_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), Task::Enhance, 10, 23, 3);
    fs::create_dir_all(&cfg.out_dir).unwrap();
    let report = training::train(&cfg).unwrap();
    assert_eq!(report.epochs.len(), 3);
    assert_eq!(report.step_losses.len(), 3 * 2);
    let csv = fs::read_to_string(&report.metrics_csv).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "epoch,stage_lr,train_loss,val_metric");
    assert_eq!(lines.count(), 3);
    // stage boundary at ceil(3/2) = 2
    assert_eq!(report.epochs.iter().map(|e| e.stage_lr).collect::<Vec<_>>(), [1e-3, 1e-3, 5e-4]);
    assert!(report.epochs.iter().all(|e| e.val_metric.is_some()));
    assert!(report.best_checkpoint.is_file() && report.last_checkpoint.is_file());

    // the last checkpoint reproduces the trained model exactly
    let (model, manifest) = checkpoint::load::<f32>(&report.last_checkpoint).unwrap();
    assert_eq!(manifest.seed, 21);
    let splits = dataset::load_splits(&cfg.splits).unwrap();
    let inputs: Vec<&Image> = splits.val.iter().map(|s| &s.input).collect();
    let a = training::predict(&model, &inputs, 4).unwrap();
    let (again, _) = checkpoint::load::<f32>(&report.last_checkpoint).unwrap();
    let b = training::predict(&again, &inputs, 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(model.named_parameters().len(), again.named_parameters().len());
}

#[test]
fn train_is_bitwise_reproducible_through_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), Task::Segment, 6, 32, 2);
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let mut c = cfg.clone();
        c.out_dir = dir.path().join(name);
        fs::create_dir_all(&c.out_dir).unwrap();
        let report = training::train(&c).unwrap();
        runs.push((
            fs::read(&report.metrics_csv).unwrap(),
            fs::read(report.last_checkpoint.with_extension("bin")).ok(),
            report.step_losses,
        ));
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn yaml_config_round_trips_and_rejects_unknown_keys() {
    let cfg = TrainConfig::new(Task::Enhance, 3, "splits.csv".into(), "out".into());
    let text = cfg.to_yaml().unwrap();
    assert_eq!(TrainConfig::from_yaml_str(&text).unwrap(), cfg);
    let err = TrainConfig::from_yaml_str(&format!("{text}\nlearning_rate: 0.1\n")).unwrap_err();
    assert_eq!(err.class().exit_code(), 2);
    let bad = TrainConfig {
        lr_stages: vec![1e-4, 1e-3],
        ..cfg
    };
    assert!(bad.validate().is_err());
}

#[test]
fn empty_training_split_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut opts = SynthOptions::new(Task::Enhance, 2, 23, 1);
    opts.val_count = 0;
    opts.test_count = 2;
    let summary = dataset::write_dataset(dir.path(), &opts).unwrap();
    let cfg = TrainConfig::new(Task::Enhance, 0, summary.splits, dir.path().join("run"));
    let err = training::train(&cfg).unwrap_err();
    assert_eq!(err.class().exit_code(), 3);
}
