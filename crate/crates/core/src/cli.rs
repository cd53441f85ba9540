//! The `funkan` command line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::checkpoint;
use crate::dataset::{self, SynthOptions, Task};
use crate::error::{Error, Result};
use crate::hermite::{HermiteBasis, ReferenceGrid, DEFAULT_BASIS_SIZE, DEFAULT_GRID_EXTENT};
use crate::io;
use crate::metrics::{self, MetricReport, Overlap};
use crate::models::{self, Architecture, ModelSpec, REFERENCE_PARAMS_ENHANCE_M, REFERENCE_PARAMS_UFUNKAN_M};
use crate::raster::Image;
use crate::training::{self, TrainConfig};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "funkan", version, about = "Functional KAN image enhancement and segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic paired dataset.
    Synth(SynthArgs),
    /// Train a model from a YAML config.
    Train(TrainArgs),
    /// Score predictions against targets.
    Eval(EvalArgs),
    /// Run a checkpoint over images.
    Infer(InferArgs),
    /// Inspect learned quantities.
    Inspect {
        #[command(subcommand)]
        what: InspectCommand,
    },
    /// Hermite basis utilities.
    Basis {
        #[command(subcommand)]
        what: BasisCommand,
    },
    /// Per-layer parameter and FLOP table.
    Summary(SummaryArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Replace existing output instead of refusing.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub task: Task,
    #[arg(long)]
    pub count: usize,
    /// Canvas side; enhancement inputs are cropped in k-space from it.
    #[arg(long, default_value_t = 55)]
    pub size: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Pairs marked `val` in splits.csv (default: count / 8).
    #[arg(long)]
    pub val_count: Option<usize>,
    /// Pairs marked `test` in splits.csv (default: count / 8).
    #[arg(long)]
    pub test_count: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// YAML config; its values take precedence over flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub task: Option<Task>,
    #[arg(long)]
    pub splits: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Comma-separated subset of psnr, tv, iou, f1.
    #[arg(long, value_delimiter = ',', default_value = "psnr,tv")]
    pub metrics: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// An image or a directory of `*_input.png` / `*.png` files.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Subcommand)]
pub enum InspectCommand {
    /// Dump every block's attention matrix as CSV and heat map.
    Attention {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum BasisCommand {
    /// Render the 2-D basis maps and 1-D curves.
    Dump {
        #[arg(long, default_value_t = DEFAULT_BASIS_SIZE)]
        r: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = DEFAULT_GRID_EXTENT)]
        extent: f64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
pub struct SummaryArgs {
    /// `enhance` or `ufunkan`; ignored when a checkpoint is given.
    #[arg(long, default_value = "enhance")]
    pub model: String,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Input `C,H,W`.
    #[arg(long, value_delimiter = ',')]
    pub input: Option<Vec<usize>>,
    /// Also write the table as JSON here.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Serialize)]
struct RunManifest<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    format_version: u32,
    config: C,
}

/// Output directory written in a sibling staging directory and swapped in at the end.
struct Staged {
    target: PathBuf,
    staging: PathBuf,
}

impl Staged {
    fn begin(target: &Path, force: bool) -> Result<Self> {
        if target.exists() {
            let non_empty = fs::read_dir(target)
                .map_err(|e| Error::io(target, e))?
                .next()
                .is_some();
            if non_empty && !force {
                return Err(Error::Config(format!(
                    "{} already exists; pass --force to replace it",
                    target.display()
                )));
            }
        }
        let name = target
            .file_name()
            .ok_or_else(|| Error::Config(format!("bad output path {}", target.display())))?
            .to_string_lossy()
            .into_owned();
        let staging = target.with_file_name(format!(".{name}.staging-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        io::ensure_dir(&staging)?;
        Ok(Staged {
            target: target.to_path_buf(),
            staging,
        })
    }

    fn path(&self) -> &Path {
        &self.staging
    }

    fn commit<C: Serialize>(self, command: &str, config: C) -> Result<PathBuf> {
        write_manifest(&self.staging, command, config)?;
        if self.target.exists() {
            fs::remove_dir_all(&self.target).map_err(|e| Error::io(&self.target, e))?;
        }
        fs::rename(&self.staging, &self.target).map_err(|e| Error::io(&self.target, e))?;
        Ok(self.target.clone())
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        if self.staging.exists() {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

fn write_manifest<C: Serialize>(dir: &Path, command: &str, config: C) -> Result<()> {
    let m = RunManifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        format_version: checkpoint::VERSION,
        config,
    };
    let json = serde_json::to_vec_pretty(&m).map_err(|e| Error::Data(e.to_string()))?;
    io::write_atomic(&dir.join(MANIFEST_FILE), &json)
}

/// Parses `args` (including the program name) and runs the command; returns the exit status.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.class().exit_code()
        }
    }
}

pub fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Infer(a) => infer(a),
        Command::Inspect {
            what: InspectCommand::Attention { checkpoint, out, output },
        } => inspect_attention(&checkpoint, &out, output.force),
        Command::Basis {
            what: BasisCommand::Dump {
                r,
                size,
                extent,
                out,
                output,
            },
        } => basis_dump(r, size, extent, &out, output.force),
        Command::Summary(a) => summary(a),
    }
}

#[derive(Serialize)]
struct SynthRecord {
    task: Task,
    count: usize,
    size: usize,
    seed: u64,
    val_count: usize,
    test_count: usize,
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut opts = SynthOptions::new(a.task, a.count, a.size, a.seed);
    opts.val_count = a.val_count.unwrap_or(opts.val_count);
    opts.test_count = a.test_count.unwrap_or(opts.test_count);
    let staged = Staged::begin(&a.out, a.output.force)?;
    let summary = dataset::write_dataset(staged.path(), &opts)?;
    let record = SynthRecord {
        task: opts.task,
        count: opts.count,
        size: opts.size,
        seed: opts.seed,
        val_count: opts.val_count,
        test_count: opts.test_count,
    };
    let out = staged.commit("synth", record)?;
    println!("wrote {} images to {}", summary.images.len(), out.display());
    Ok(())
}

/// Flags fill whatever the config file leaves out.
pub fn resolve_train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut map = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            match serde_yaml::from_str::<serde_yaml::Value>(&text).map_err(|e| Error::Config(e.to_string()))? {
                serde_yaml::Value::Mapping(m) => m,
                serde_yaml::Value::Null => serde_yaml::Mapping::new(),
                _ => return Err(Error::Config(format!("{} is not a YAML mapping", p.display()))),
            }
        }
        None => serde_yaml::Mapping::new(),
    };
    // relative paths in the file are relative to the file, flags to the working directory
    if let Some(p) = &a.config {
        let base = p.parent().unwrap_or(Path::new("."));
        for key in ["splits", "out_dir"] {
            let k = serde_yaml::Value::String(key.into());
            if let Some(serde_yaml::Value::String(v)) = map.get(&k) {
                if Path::new(v).is_relative() {
                    let joined = base.join(v).to_string_lossy().into_owned();
                    map.insert(k, joined.into());
                }
            }
        }
    }
    let s = |p: &PathBuf| serde_yaml::Value::String(p.to_string_lossy().into_owned());
    let flags: [(&str, Option<serde_yaml::Value>); 6] = [
        ("seed", Some(a.seed.into())),
        ("task", a.task.map(|t| t.to_string().into())),
        ("splits", a.splits.as_ref().map(s)),
        ("out_dir", a.out.as_ref().map(s)),
        ("epochs", a.epochs.map(|e| (e as u64).into())),
        ("batch_size", a.batch_size.map(|b| (b as u64).into())),
    ];
    for (key, v) in flags {
        if let Some(v) = v {
            map.entry(serde_yaml::Value::String(key.into())).or_insert(v);
        }
    }
    let cfg: TrainConfig =
        serde_yaml::from_value(serde_yaml::Value::Mapping(map)).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = resolve_train_config(&a)?;
    let staged = Staged::begin(&cfg.out_dir, a.output.force)?;
    let mut run_cfg = cfg.clone();
    run_cfg.out_dir = staged.path().to_path_buf();
    let report = training::train(&run_cfg)?;
    io::write_atomic(
        &staged.path().join("config.yaml"),
        cfg.to_yaml()?.as_bytes(),
    )?;
    let out = staged.commit("train", &cfg)?;
    let last = report.epochs.last();
    println!(
        "trained {} epochs ({} steps); best epoch {}; final train loss {:.6}; outputs in {}",
        report.epochs.len(),
        report.step_losses.len(),
        report.best_epoch,
        last.map_or(f64::NAN, |r| r.train_loss),
        out.display()
    );
    Ok(())
}

/// Lists `*.png` files in a directory, sorted.
fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "png"))
        .collect();
    files.sort();
    Ok(files)
}

/// Target for a prediction: same file name, or `S_target.png` for `S_pred.png`.
fn matching_target(target_dir: &Path, pred: &Path) -> Option<PathBuf> {
    let name = pred.file_name()?.to_str()?;
    let same = target_dir.join(name);
    if same.is_file() {
        return Some(same);
    }
    let stem = name.strip_suffix("_pred.png")?;
    let t = target_dir.join(format!("{stem}_target.png"));
    t.is_file().then_some(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MetricKind {
    Psnr,
    Tv,
    Iou,
    F1,
}

impl MetricKind {
    fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "psnr" => Ok(MetricKind::Psnr),
            "tv" => Ok(MetricKind::Tv),
            "iou" => Ok(MetricKind::Iou),
            "f1" => Ok(MetricKind::F1),
            other => Err(Error::Config(format!("unknown metric '{other}'"))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            MetricKind::Psnr => "psnr",
            MetricKind::Tv => "tv",
            MetricKind::Iou => "iou",
            MetricKind::F1 => "f1",
        }
    }

    /// Prediction maps are probabilities (or plain intensities), thresholded at 0.5.
    fn score(self, pred: &Image, target: &Image) -> Result<f64> {
        if pred.dims() != target.dims() {
            return Err(Error::Data(format!(
                "prediction {:?} and target {:?} differ in size",
                pred.dims(),
                target.dims()
            )));
        }
        let overlap = || Overlap::of(&metrics::binarize_mask(pred), &metrics::binarize_mask(target));
        Ok(match self {
            MetricKind::Psnr => metrics::psnr(pred, target, 1.0)?,
            MetricKind::Tv => metrics::total_variation(pred),
            MetricKind::Iou => overlap().iou(),
            MetricKind::F1 => overlap().f1(),
        })
    }
}

fn fmt_value(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.6}")
    }
}

/// Scores every prediction and writes one row per image followed by `mean` and `std` rows.
pub fn eval_dirs(pred_dir: &Path, target_dir: &Path, metric_names: &[String]) -> Result<(Vec<String>, Vec<MetricReport>, String)> {
    let kinds: Vec<MetricKind> = metric_names.iter().map(|m| MetricKind::parse(m)).collect::<Result<_>>()?;
    if kinds.is_empty() {
        return Err(Error::Config("no metrics requested".into()));
    }
    let mut names = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); kinds.len()];
    for pred_path in png_files(pred_dir)? {
        let Some(target_path) = matching_target(target_dir, &pred_path) else {
            continue;
        };
        let pred = io::read_image(&pred_path)?;
        let target = io::read_image(&target_path)?;
        for (k, v) in kinds.iter().zip(&mut values) {
            v.push(k.score(&pred, &target)?);
        }
        names.push(pred_path.file_name().unwrap_or_default().to_string_lossy().into_owned());
    }
    if names.is_empty() {
        return Err(Error::Data(format!(
            "no predictions in {} have a matching target in {}",
            pred_dir.display(),
            target_dir.display()
        )));
    }
    let reports: Vec<MetricReport> = kinds
        .iter()
        .zip(values)
        .map(|(k, v)| MetricReport::new(k.name(), v))
        .collect();
    let mut csv = String::from("file");
    for k in &kinds {
        csv.push(',');
        csv.push_str(k.name());
    }
    csv.push('\n');
    for (i, n) in names.iter().enumerate() {
        csv.push_str(n);
        for r in &reports {
            csv.push(',');
            csv.push_str(&fmt_value(r.values[i]));
        }
        csv.push('\n');
    }
    for (label, pick) in [("mean", 0), ("std", 1)] {
        csv.push_str(label);
        for r in &reports {
            csv.push(',');
            csv.push_str(&fmt_value(if pick == 0 { r.mean } else { r.std }));
        }
        csv.push('\n');
    }
    Ok((names, reports, csv))
}

fn eval(a: EvalArgs) -> Result<()> {
    if a.out.exists() && !a.output.force {
        return Err(Error::Config(format!(
            "{} already exists; pass --force to replace it",
            a.out.display()
        )));
    }
    let (names, reports, csv) = eval_dirs(&a.pred, &a.target, &a.metrics)?;
    io::write_atomic(&a.out, csv.as_bytes())?;
    #[derive(Serialize)]
    struct EvalRecord<'a> {
        pred: &'a Path,
        target: &'a Path,
        metrics: &'a [String],
        images: usize,
    }
    let manifest_path = a.out.with_extension("manifest.json");
    let m = RunManifest {
        command: "eval",
        version: env!("CARGO_PKG_VERSION"),
        format_version: checkpoint::VERSION,
        config: EvalRecord {
            pred: &a.pred,
            target: &a.target,
            metrics: &a.metrics,
            images: names.len(),
        },
    };
    let json = serde_json::to_vec_pretty(&m).map_err(|e| Error::Data(e.to_string()))?;
    io::write_atomic(&manifest_path, &json)?;
    for r in &reports {
        println!("{}: {} ± {} over {} images", r.name, fmt_value(r.mean), fmt_value(r.std), r.count);
    }
    Ok(())
}

fn infer(a: InferArgs) -> Result<()> {
    let (model, manifest) = checkpoint::load::<f32>(&a.checkpoint)?;
    let inputs: Vec<PathBuf> = if a.input.is_dir() {
        let all = png_files(&a.input)?;
        let tagged: Vec<PathBuf> = all
            .iter()
            .filter(|p| p.to_string_lossy().ends_with("_input.png"))
            .cloned()
            .collect();
        if tagged.is_empty() { all } else { tagged }
    } else {
        vec![a.input.clone()]
    };
    if inputs.is_empty() {
        return Err(Error::Data(format!("no PNG inputs in {}", a.input.display())));
    }
    let images: Vec<Image> = inputs.iter().map(|p| io::read_image(p)).collect::<Result<_>>()?;
    let refs: Vec<&Image> = images.iter().collect();
    let preds = training::predict(&model, &refs, a.batch_size)?;
    let staged = Staged::begin(&a.out, a.output.force)?;
    for (p, pred) in inputs.iter().zip(preds) {
        let name = p.file_stem().unwrap_or_default().to_string_lossy();
        let stem = name.strip_suffix("_input").unwrap_or(&name);
        let out = match manifest.spec.arch {
            Architecture::Enhance => pred,
            Architecture::Ufunkan => pred.map(crate::tensor::elementwise::sigmoid),
        };
        io::write_image_pair(&staged.path().join(format!("{stem}_pred")), &out)?;
    }
    #[derive(Serialize)]
    struct InferRecord<'a> {
        checkpoint: &'a Path,
        input: &'a Path,
        spec: &'a ModelSpec,
        seed: u64,
        images: usize,
    }
    let n = inputs.len();
    let out = staged.commit(
        "infer",
        InferRecord {
            checkpoint: &a.checkpoint,
            input: &a.input,
            spec: &manifest.spec,
            seed: manifest.seed,
            images: n,
        },
    )?;
    println!("wrote {n} predictions to {}", out.display());
    Ok(())
}

fn inspect_attention(ckpt: &Path, out: &Path, force: bool) -> Result<()> {
    let (model, manifest) = checkpoint::load::<f32>(ckpt)?;
    let staged = Staged::begin(out, force)?;
    let blocks = model.funkan_blocks();
    for block in &blocks {
        let a = block.attention_matrix()?;
        let label = block.label().replace('.', "_");
        let mut csv = String::new();
        for row in &a {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.8}")).collect();
            csv.push_str(&cells.join(","));
            csv.push('\n');
        }
        io::write_atomic(&staged.path().join(format!("{label}.csv")), csv.as_bytes())?;
        io::write_heatmap(&staged.path().join(format!("{label}.png")), &a, 8)?;
        println!("{}: attention {}x{}", block.label(), a.len(), a.first().map_or(0, |r| r.len()));
    }
    #[derive(Serialize)]
    struct Record<'a> {
        checkpoint: &'a Path,
        spec: &'a ModelSpec,
        blocks: usize,
    }
    staged.commit(
        "inspect attention",
        Record {
            checkpoint: ckpt,
            spec: &manifest.spec,
            blocks: blocks.len(),
        },
    )?;
    Ok(())
}

fn basis_dump(r: usize, size: usize, extent: f64, out: &Path, force: bool) -> Result<()> {
    let basis = HermiteBasis::new(r)?;
    let grid = ReferenceGrid::new(size, size, extent)?;
    let staged = Staged::begin(out, force)?;
    let axis: Vec<f64> = grid.qx[..size].to_vec();
    let mut curves = String::from("x");
    for k in 0..r {
        curves.push_str(&format!(",psi_{k}"));
    }
    curves.push('\n');
    let mut table = vec![vec![0.0; r]; size];
    for (i, &x) in axis.iter().enumerate() {
        curves.push_str(&format!("{x:.8}"));
        for (k, cell) in table[i].iter_mut().enumerate() {
            *cell = basis.eval_scalar(k, x)?;
            curves.push_str(&format!(",{:.10}", *cell));
        }
        curves.push('\n');
    }
    io::write_atomic(&staged.path().join("curves.csv"), curves.as_bytes())?;
    for k in 0..r {
        // qx varies along columns, qy along rows
        let map = Image::from_fn(size, size, |y, x| table[x][k] * table[y][k]);
        let stem = staged.path().join(format!("psi_{k}"));
        io::write_f32(&stem.with_extension("f32"), &map)?;
        io::write_png8_normalized(&stem.with_extension("png"), &map)?;
    }
    #[derive(Serialize)]
    struct Record {
        r: usize,
        size: usize,
        extent: f64,
    }
    staged.commit("basis dump", Record { r, size, extent })?;
    Ok(())
}

fn summary(a: SummaryArgs) -> Result<()> {
    let (model, spec) = match &a.checkpoint {
        Some(p) => {
            let (m, manifest) = checkpoint::load::<f32>(p)?;
            (m, manifest.spec)
        }
        None => {
            let spec = ModelSpec::named(&a.model)?;
            (models::build::<f32>(&spec, 0)?, spec)
        }
    };
    let input = match a.input.as_deref() {
        Some([c, h, w]) => [*c, *h, *w],
        Some(other) => return Err(Error::Config(format!("--input needs C,H,W, got {other:?}"))),
        None => match spec.arch {
            Architecture::Enhance => [spec.in_channels, 145, 145],
            Architecture::Ufunkan => [spec.in_channels, 256, 256],
        },
    };
    let sheet = model.cost_sheet(input);
    println!("{:<44} {:<18} {:>16} {:>10} {:>14}", "layer", "kind", "output", "params", "flops");
    for row in &sheet.rows {
        let shape = format!("{}x{}x{}", row.output[0], row.output[1], row.output[2]);
        println!("{:<44} {:<18} {:>16} {:>10} {:>14}", row.name, row.kind, shape, row.params, row.flops);
    }
    let total = sheet.total_params();
    let reference = match spec.arch {
        Architecture::Enhance => REFERENCE_PARAMS_ENHANCE_M,
        Architecture::Ufunkan => REFERENCE_PARAMS_UFUNKAN_M,
    };
    println!(
        "total params {total} ({:.3} M; published configuration {reference} M)",
        total as f64 / 1e6
    );
    println!("total flops {} ({:.3} G) at input {:?}", sheet.total_flops(), sheet.total_flops() as f64 / 1e9, input);
    if let Some(path) = &a.json {
        let json = serde_json::to_vec_pretty(&sheet.rows).map_err(|e| Error::Data(e.to_string()))?;
        io::write_atomic(path, &json)?;
    }
    Ok(())
}
