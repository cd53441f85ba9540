//! Losses, optimizer, learning-rate schedule, augmentation and the training loop.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::dataset::{self, Sample, Task};
use crate::error::{Error, Result};
use crate::metrics::{self, Overlap};
use crate::models::{build, Model, ModelSpec};
use crate::nn::Module;
use crate::raster::Image;
use crate::tensor::{no_grad, Mode, Scalar, Tensor};

fn check_pair<T: Scalar>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<usize> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, a.shape(), b.shape()));
    }
    match a.shape().first() {
        Some(&n) if n > 0 => Ok(n),
        _ => Err(Error::invalid(op, "batch is empty")),
    }
}

/// `(1/N)·Σ_i ‖pred_i − target_i‖²`, or the per-pixel mean when `pixel_mean`.
pub fn loss_enhance<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>, pixel_mean: bool) -> Result<Tensor<T>> {
    let n = check_pair("loss_enhance", pred, target)?;
    let denom = if pixel_mean { pred.numel() } else { n };
    Ok(pred.sub(target)?.square().sum().mul_scalar(T::of(1.0 / denom as f64)))
}

/// Soft Dice smoothing in numerator and denominator.
pub const DICE_SMOOTH: f64 = 1.0;
/// Weight of the cross-entropy term.
pub const CE_WEIGHT: f64 = 0.1;

/// Batch mean of `0.1·BCE + Dice` on sigmoid probabilities; BCE is a pixel mean.
pub fn loss_segment<T: Scalar>(logits: &Tensor<T>, mask: &Tensor<T>) -> Result<Tensor<T>> {
    let n = check_pair("loss_segment", logits, mask)?;
    let pixels = logits.numel() / n;
    let ce = logits
        .bce_with_logits(mask)?
        .sum_per_sample()?
        .mul_scalar(T::of(CE_WEIGHT / pixels as f64));
    let p = logits.sigmoid();
    let inter = p.mul(mask)?.sum_per_sample()?;
    let denom = p.sum_per_sample()?.add(&mask.sum_per_sample()?)?.add_scalar(T::of(DICE_SMOOTH));
    let ratio = inter.mul_scalar(T::of(2.0)).add_scalar(T::of(DICE_SMOOTH)).div(&denom)?;
    let dice = ratio.neg().add_scalar(T::one());
    Ok(ce.add(&dice)?.mean())
}

/// Bias-corrected Adam with one moment pair per named parameter.
#[derive(Debug, Clone)]
pub struct Adam<T: Scalar> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &[(String, Tensor<T>)]) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: params.iter().map(|(_, p)| vec![T::zero(); p.numel()]).collect(),
            v: params.iter().map(|(_, p)| vec![T::zero(); p.numel()]).collect(),
        }
    }

    /// Applies one update from the gradients stored on `params`.
    ///
    /// Parameters without a gradient are left alone. If any gradient holds a
    /// non-finite value nothing is updated and the parameter is named.
    pub fn step(&mut self, params: &[(String, Tensor<T>)], lr: f64) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::invalid(
                "adam",
                format!("optimizer tracks {} parameters, got {}", self.m.len(), params.len()),
            ));
        }
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::invalid("adam", format!("learning rate must be positive, got {lr}")));
        }
        for ((name, p), m) in params.iter().zip(&self.m) {
            if p.numel() != m.len() {
                return Err(Error::shape("adam", p.shape(), &[m.len()]));
            }
            let finite = p.with_grad(|g| g.is_none_or(|g| g.iter().all(|v| v.is_finite())));
            if !finite {
                return Err(Error::Gradient(format!("non-finite gradient in '{name}'")));
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let (c1, c2) = (T::of(1.0 - self.beta1), T::of(1.0 - self.beta2));
        let step = T::of(lr / (1.0 - self.beta1.powi(t)));
        let v_corr = T::of(1.0 / (1.0 - self.beta2.powi(t)));
        let eps = T::of(self.eps);
        for (((_, p), m), v) in params.iter().zip(&mut self.m).zip(&mut self.v) {
            let Some(g) = p.grad() else { continue };
            p.update_data(|w| {
                for i in 0..w.len() {
                    m[i] = b1 * m[i] + c1 * g[i];
                    v[i] = b2 * v[i] + c2 * g[i] * g[i];
                    w[i] -= step * m[i] / ((v[i] * v_corr).sqrt() + eps);
                }
            });
        }
        Ok(())
    }
}

/// Piecewise-constant learning rate over epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    pub stages: Vec<f64>,
    /// `boundaries[k]` is the first epoch of stage `k + 1`.
    pub boundaries: Vec<usize>,
}

impl LrSchedule {
    /// Equal shares of `epochs` when `boundaries` is `None`.
    pub fn new(stages: &[f64], boundaries: Option<&[usize]>, epochs: usize) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::Config("at least one learning-rate stage is required".into()));
        }
        if stages.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Config(format!("learning rates must be positive: {stages:?}")));
        }
        if stages.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(format!("learning-rate stages must strictly decrease: {stages:?}")));
        }
        let s = stages.len();
        let boundaries = match boundaries {
            Some(b) => b.to_vec(),
            None => (1..s).map(|k| (k * epochs).div_ceil(s)).collect(),
        };
        if boundaries.len() != s - 1 || boundaries.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!(
                "{s} stages need {} strictly increasing epoch boundaries, got {boundaries:?}",
                s - 1
            )));
        }
        Ok(LrSchedule {
            stages: stages.to_vec(),
            boundaries,
        })
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        let stage = self.boundaries.iter().take_while(|&&b| epoch >= b).count();
        self.stages[stage]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub enabled: bool,
    /// Standard deviation of additive input noise (enhancement).
    pub noise_sigma: f64,
    pub hflip: f64,
    pub vflip: f64,
    /// Counter-clockwise quarter turn; square images only.
    pub rot90: f64,
    /// Square images only.
    pub transpose: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            enabled: true,
            noise_sigma: 0.01,
            hflip: 0.5,
            vflip: 0.5,
            rot90: 0.5,
            transpose: 0.5,
        }
    }
}

impl AugmentConfig {
    pub fn off() -> Self {
        AugmentConfig {
            enabled: false,
            noise_sigma: 0.0,
            hflip: 0.0,
            vflip: 0.0,
            rot90: 0.0,
            transpose: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("hflip", self.hflip),
            ("vflip", self.vflip),
            ("rot90", self.rot90),
            ("transpose", self.transpose),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("augment.{name} must be a probability, got {p}")));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("augment.noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        Ok(())
    }
}

/// Enhancement: Gaussian noise on the input only. Segmentation: flips, quarter
/// turns and transposition applied identically to image and mask. Results are
/// clamped to `[0, 1]`.
pub fn augment(sample: &Sample, task: Task, cfg: &AugmentConfig, rng: &mut impl Rng) -> Sample {
    if !cfg.enabled {
        return sample.clone();
    }
    match task {
        Task::Enhance => {
            if cfg.noise_sigma == 0.0 {
                return sample.clone();
            }
            let noise = Normal::new(0.0, cfg.noise_sigma).expect("sigma validated non-negative");
            let mut input = sample.input.clone();
            for v in &mut input.data {
                *v = (*v + noise.sample(rng)).clamp(0.0, 1.0);
            }
            Sample {
                name: sample.name.clone(),
                input,
                target: sample.target.clone(),
            }
        }
        Task::Segment => {
            let (mut x, mut y) = (sample.input.clone(), sample.target.clone());
            let square = x.height == x.width;
            let ops: [(f64, fn(&Image) -> Image, bool); 4] = [
                (cfg.hflip, Image::flip_horizontal, true),
                (cfg.vflip, Image::flip_vertical, true),
                (cfg.rot90, Image::rot90, square),
                (cfg.transpose, Image::transpose, square),
            ];
            for (p, op, allowed) in ops {
                // the draw happens regardless so the stream does not depend on shape
                let hit = rng.random::<f64>() < p;
                if hit && allowed {
                    x = op(&x);
                    y = op(&y);
                }
            }
            Sample {
                name: sample.name.clone(),
                input: x.map(|v| v.clamp(0.0, 1.0)),
                target: y,
            }
        }
    }
}

fn default_batch_size() -> usize {
    8
}

fn default_lr_stages() -> Vec<f64> {
    vec![1e-4, 5e-5, 1e-5]
}

fn default_epochs() -> usize {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
    /// Defaults to the standard network for the task.
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr_stages")]
    pub lr_stages: Vec<f64>,
    /// First epoch of each stage after the first; equal shares when absent.
    #[serde(default)]
    pub stage_boundaries: Option<Vec<usize>>,
    #[serde(default)]
    pub augment: AugmentConfig,
    /// Normalize the enhancement loss per pixel instead of per image.
    #[serde(default)]
    pub pixel_mean_loss: bool,
    pub seed: u64,
    /// `path,role` CSV. Relative paths in a config file resolve against the file.
    pub splits: PathBuf,
    pub out_dir: PathBuf,
    /// Extra checkpoint every this many epochs; 0 keeps only `best` and `last`.
    #[serde(default)]
    pub checkpoint_every: usize,
}

impl TrainConfig {
    pub fn new(task: Task, seed: u64, splits: PathBuf, out_dir: PathBuf) -> Self {
        TrainConfig {
            task,
            model: None,
            batch_size: default_batch_size(),
            epochs: default_epochs(),
            lr_stages: default_lr_stages(),
            stage_boundaries: None,
            augment: AugmentConfig::default(),
            pixel_mean_loss: false,
            seed,
            splits,
            out_dir,
            checkpoint_every: 0,
        }
    }

    pub fn from_yaml_str(text: &str) -> Result<Self> {
        let cfg: TrainConfig = serde_yaml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_yaml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_yaml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.splits, &mut cfg.out_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_yaml(&self) -> Result<String> {
        serde_yaml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        match &self.model {
            Some(spec) => spec.resolved(),
            None => ModelSpec::named(match self.task {
                Task::Enhance => "enhance",
                Task::Segment => "ufunkan",
            }),
        }
    }

    pub fn schedule(&self) -> Result<LrSchedule> {
        LrSchedule::new(&self.lr_stages, self.stage_boundaries.as_deref(), self.epochs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        self.schedule()?;
        self.augment.validate()?;
        self.model_spec()?;
        Ok(())
    }
}

/// Stacks same-sized images into `[N, 1, H, W]`.
pub fn stack<T: Scalar>(images: &[&Image]) -> Result<Tensor<T>> {
    let Some(first) = images.first() else {
        return Err(Error::invalid("stack", "no images"));
    };
    let (h, w) = first.dims();
    let mut data = Vec::with_capacity(images.len() * h * w);
    for img in images {
        if img.dims() != (h, w) {
            return Err(Error::shape("stack", &[h, w], &[img.height, img.width]));
        }
        data.extend(img.data.iter().map(|&v| T::of(v)));
    }
    Tensor::new(data, &[images.len(), 1, h, w])
}

/// Splits `[N, 1, H, W]` back into images.
pub fn unstack<T: Scalar>(t: &Tensor<T>) -> Result<Vec<Image>> {
    let (n, c, h, w) = crate::tensor::dims4("unstack", t.shape())?;
    if c != 1 {
        return Err(Error::invalid("unstack", format!("expected one channel, got {c}")));
    }
    let d = t.data();
    (0..n)
        .map(|b| Image::new(h, w, d[b * h * w..(b + 1) * h * w].iter().map(|v| v.as_f64()).collect()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub loss: f64,
    /// Mean PSNR (enhancement) or mean IoU (segmentation).
    pub metric: f64,
    /// Mean F1 for segmentation.
    pub f1: Option<f64>,
    /// Per-image PSNR or IoU, in input order.
    pub per_image: Vec<f64>,
    /// Per-image F1 for segmentation, from the same overlap counts as the IoU.
    pub per_image_f1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub stage_lr: f64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_metric: Option<f64>,
}

/// Model, optimizer and data stream of one training run.
pub struct Trainer<T: Scalar = f32> {
    pub task: Task,
    pub spec: ModelSpec,
    pub seed: u64,
    pub model: Model<T>,
    pub params: Vec<(String, Tensor<T>)>,
    pub adam: Adam<T>,
    pub augment: AugmentConfig,
    pub batch_size: usize,
    pub pixel_mean_loss: bool,
    rng: ChaCha8Rng,
    /// Loss of every optimizer step so far.
    pub step_losses: Vec<f64>,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(task: Task, spec: &ModelSpec, seed: u64) -> Result<Self> {
        let spec = spec.resolved()?;
        let model = build::<T>(&spec, seed)?;
        let params = model.named_parameters();
        let adam = Adam::new(&params);
        Ok(Trainer {
            task,
            spec,
            seed,
            model,
            params,
            adam,
            augment: AugmentConfig::default(),
            batch_size: default_batch_size(),
            pixel_mean_loss: false,
            // a separate stream from the one that initialized the weights
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0xd1b5_4a32_d192_ed03),
            step_losses: Vec::new(),
        })
    }

    pub fn from_config(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut t = Self::new(cfg.task, &cfg.model_spec()?, cfg.seed)?;
        t.augment = cfg.augment.clone();
        t.batch_size = cfg.batch_size;
        t.pixel_mean_loss = cfg.pixel_mean_loss;
        Ok(t)
    }

    pub fn loss(&self, out: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
        match self.task {
            Task::Enhance => loss_enhance(out, target, self.pixel_mean_loss),
            Task::Segment => loss_segment(out, target),
        }
    }

    /// One optimizer step on `batch`; returns the loss before the update.
    pub fn step(&mut self, batch: &[Sample], lr: f64) -> Result<f64> {
        let inputs: Vec<&Image> = batch.iter().map(|s| &s.input).collect();
        let targets: Vec<&Image> = batch.iter().map(|s| &s.target).collect();
        let x = stack::<T>(&inputs)?;
        let y = stack::<T>(&targets)?;
        let out = self.model.forward(&x, Mode::Train)?;
        let loss = self.loss(&out, &y)?;
        let value = loss.item()?.as_f64();
        if !value.is_finite() {
            return Err(Error::NonFinite {
                context: format!("training loss at step {}", self.step_losses.len() + 1),
            });
        }
        self.model.zero_grad();
        loss.backward()?;
        self.adam.step(&self.params, lr)?;
        self.step_losses.push(value);
        Ok(value)
    }

    /// Shuffles, augments and steps through `data` once; returns the mean step loss.
    pub fn train_epoch(&mut self, data: &[Sample], lr: f64) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Data("training split is empty".into()));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        let mut steps = 0;
        for chunk in order.chunks(self.batch_size) {
            let batch: Vec<Sample> = chunk
                .iter()
                .map(|&i| augment(&data[i], self.task, &self.augment, &mut self.rng))
                .collect();
            total += self.step(&batch, lr)?;
            steps += 1;
        }
        Ok(total / steps as f64)
    }

    /// Inference in evaluation mode, `batch_size` images at a time.
    pub fn predict(&self, inputs: &[&Image]) -> Result<Vec<Image>> {
        predict(&self.model, inputs, self.batch_size)
    }

    pub fn evaluate(&self, data: &[Sample]) -> Result<Evaluation> {
        evaluate(&self.model, self.task, data, self.batch_size, self.pixel_mean_loss)
    }
}

pub fn predict<T: Scalar>(model: &Model<T>, inputs: &[&Image], batch_size: usize) -> Result<Vec<Image>> {
    let _guard = no_grad();
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(batch_size.max(1)) {
        let x = stack::<T>(chunk)?;
        out.extend(unstack(&model.forward(&x, Mode::Eval)?)?);
    }
    Ok(out)
}

/// Mean loss and task metric over `data`.
pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    task: Task,
    data: &[Sample],
    batch_size: usize,
    pixel_mean_loss: bool,
) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::Data("evaluation split is empty".into()));
    }
    let inputs: Vec<&Image> = data.iter().map(|s| &s.input).collect();
    let preds = predict(model, &inputs, batch_size)?;
    let mut loss = 0.0;
    let mut metric = Vec::with_capacity(data.len());
    let mut f1 = Vec::new();
    for (p, s) in preds.iter().zip(data) {
        let pt = stack::<f64>(&[p])?;
        let tt = stack::<f64>(&[&s.target])?;
        match task {
            Task::Enhance => {
                loss += loss_enhance(&pt, &tt, pixel_mean_loss)?.item()?;
                metric.push(metrics::psnr(p, &s.target, 1.0)?);
            }
            Task::Segment => {
                loss += loss_segment(&pt, &tt)?.item()?;
                let o = Overlap::of(&metrics::binarize_logits(p, 0.5), &metrics::binarize_mask(&s.target));
                metric.push(o.iou());
                f1.push(o.f1());
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(Evaluation {
        loss: loss / data.len() as f64,
        metric: mean(&metric),
        f1: (!f1.is_empty()).then(|| mean(&f1)),
        per_image: metric,
        per_image_f1: f1,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub step_losses: Vec<f64>,
    pub best_epoch: usize,
    pub best_checkpoint: PathBuf,
    pub last_checkpoint: PathBuf,
    pub metrics_csv: PathBuf,
}

#[derive(Serialize)]
struct MetricsRow {
    epoch: usize,
    stage_lr: f64,
    train_loss: f64,
    val_metric: Option<f64>,
}

pub const BEST_CHECKPOINT: &str = "best.json";
pub const LAST_CHECKPOINT: &str = "last.json";
pub const METRICS_CSV: &str = "metrics.csv";

/// Full run from a config: loads splits, trains, writes the metrics log and
/// the `best` (lowest validation loss, train loss without a validation split)
/// and `last` checkpoints into `out_dir`, which must exist.
pub fn train(cfg: &TrainConfig) -> Result<TrainReport> {
    let splits = dataset::load_splits(&cfg.splits)?;
    if splits.train.is_empty() {
        return Err(Error::Data(format!("{} lists no training pairs", cfg.splits.display())));
    }
    train_on(cfg, &splits.train, &splits.val)
}

pub fn train_on(cfg: &TrainConfig, train: &[Sample], val: &[Sample]) -> Result<TrainReport> {
    let mut trainer = Trainer::<f32>::from_config(cfg)?;
    let schedule = cfg.schedule()?;
    let out = &cfg.out_dir;
    let best_path = out.join(BEST_CHECKPOINT);
    let last_path = out.join(LAST_CHECKPOINT);
    let csv_path = out.join(METRICS_CSV);
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize)> = None;
    for epoch in 0..cfg.epochs {
        let lr = schedule.lr(epoch);
        let train_loss = trainer.train_epoch(train, lr)?;
        let eval = if val.is_empty() { None } else { Some(trainer.evaluate(val)?) };
        let score = eval.as_ref().map_or(train_loss, |e| e.loss);
        let meta = |kind: &str| {
            BTreeMap::from([
                ("epoch".to_string(), serde_json::json!(epoch)),
                ("kind".to_string(), serde_json::json!(kind)),
                ("task".to_string(), serde_json::json!(cfg.task)),
                ("train_loss".to_string(), serde_json::json!(train_loss)),
            ])
        };
        if best.is_none_or(|(b, _)| score < b) {
            best = Some((score, epoch));
            checkpoint::save(&trainer.model, &trainer.spec, cfg.seed, &best_path, meta("best"))?;
        }
        if cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 {
            let p = out.join(format!("epoch_{:04}.json", epoch + 1));
            checkpoint::save(&trainer.model, &trainer.spec, cfg.seed, &p, meta("periodic"))?;
        }
        records.push(EpochRecord {
            epoch,
            stage_lr: lr,
            train_loss,
            val_loss: eval.as_ref().map(|e| e.loss),
            val_metric: eval.as_ref().map(|e| e.metric),
        });
        log::info!(
            "epoch {epoch} lr {lr:e} train_loss {train_loss:.6} val {:?}",
            eval.as_ref().map(|e| (e.loss, e.metric))
        );
        let rows: Vec<MetricsRow> = records
            .iter()
            .map(|r| MetricsRow {
                epoch: r.epoch,
                stage_lr: r.stage_lr,
                train_loss: r.train_loss,
                val_metric: r.val_metric,
            })
            .collect();
        dataset::write_csv(&csv_path, &rows)?;
    }
    let last_meta = BTreeMap::from([("kind".to_string(), serde_json::json!("last"))]);
    checkpoint::save(&trainer.model, &trainer.spec, cfg.seed, &last_path, last_meta)?;
    Ok(TrainReport {
        epochs: records,
        step_losses: trainer.step_losses,
        best_epoch: best.map_or(0, |(_, e)| e),
        best_checkpoint: best_path,
        last_checkpoint: last_path,
        metrics_csv: csv_path,
    })
}
