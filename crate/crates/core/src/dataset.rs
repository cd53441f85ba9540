//! Paired samples on disk: generation, index and split files.
//!
//! A pair with stem `S` is stored as `S_input.png` / `S_target.png`, each with
//! a lossless `.f32` sidecar. `index.csv` lists every image (`file,seed,role`
//! with role `input` or `target`); `splits.csv` lists stems relative to its
//! own directory (`path,role` with role `train`, `val` or `test`).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{make_mask_pair, make_pair, PhantomSpec};
use crate::io;
use crate::raster::Image;

pub const INDEX_FILE: &str = "index.csv";
pub const SPLITS_FILE: &str = "splits.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Enhance,
    Segment,
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "enhance" => Ok(Task::Enhance),
            "segment" => Ok(Task::Segment),
            other => Err(Error::Config(format!(
                "unknown task '{other}' (expected 'enhance' or 'segment')"
            ))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Enhance => "enhance",
            Task::Segment => "segment",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Val,
    Test,
}

/// An input image with its supervision (clean image or binary mask).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub name: String,
    pub input: Image,
    pub target: Image,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub path: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub file: String,
    pub seed: u64,
    pub role: String,
}

#[derive(Debug, Clone, Default)]
pub struct Splits {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Phantom recipe used for a task at canvas `size`.
pub fn phantom_spec(task: Task, size: usize, seed: u64) -> PhantomSpec {
    match task {
        Task::Enhance => PhantomSpec::enhance(size, seed),
        Task::Segment => PhantomSpec::segment(size, seed),
    }
}

/// Per-pair seeds drawn from one stream so that neighbouring base seeds do not overlap.
pub fn pair_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.next_u64()).collect()
}

pub fn generate_sample(task: Task, size: usize, seed: u64, name: String) -> Result<Sample> {
    let spec = phantom_spec(task, size, seed);
    let pair = match task {
        Task::Enhance => make_pair(&spec)?,
        Task::Segment => make_mask_pair(&spec)?,
    };
    Ok(Sample {
        name,
        input: pair.input,
        target: pair.target,
    })
}

/// `count` samples named `pair_0000…`, reproducible from `seed`.
pub fn generate_samples(task: Task, count: usize, size: usize, seed: u64) -> Result<Vec<Sample>> {
    pair_seeds(seed, count)
        .into_iter()
        .enumerate()
        .map(|(i, s)| generate_sample(task, size, s, stem(i)))
        .collect()
}

fn stem(i: usize) -> String {
    format!("pair_{i:04}")
}

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub task: Task,
    pub count: usize,
    pub size: usize,
    pub seed: u64,
    pub val_count: usize,
    pub test_count: usize,
}

impl SynthOptions {
    /// One eighth of the pairs each for validation and test.
    pub fn new(task: Task, count: usize, size: usize, seed: u64) -> Self {
        SynthOptions {
            task,
            count,
            size,
            seed,
            val_count: count / 8,
            test_count: count / 8,
        }
    }

    fn role(&self, i: usize) -> Role {
        if i >= self.count - self.test_count {
            Role::Test
        } else if i >= self.count - self.test_count - self.val_count {
            Role::Val
        } else {
            Role::Train
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthSummary {
    pub images: Vec<PathBuf>,
    pub index: PathBuf,
    pub splits: PathBuf,
}

/// Writes a dataset into `out`, which must exist.
pub fn write_dataset(out: &Path, opts: &SynthOptions) -> Result<SynthSummary> {
    if opts.count == 0 {
        return Err(Error::Config("synth needs --count of at least 1".into()));
    }
    if opts.val_count + opts.test_count > opts.count {
        return Err(Error::Config(format!(
            "{} validation + {} test pairs exceed the {} generated",
            opts.val_count, opts.test_count, opts.count
        )));
    }
    let mut images = Vec::new();
    let mut index = Vec::new();
    let mut splits = Vec::new();
    for (i, seed) in pair_seeds(opts.seed, opts.count).into_iter().enumerate() {
        let sample = generate_sample(opts.task, opts.size, seed, stem(i))?;
        for (role, img) in [("input", &sample.input), ("target", &sample.target)] {
            let name = format!("{}_{role}", sample.name);
            io::write_image_pair(&out.join(&name), img)?;
            images.push(out.join(format!("{name}.png")));
            index.push(IndexEntry {
                file: format!("{name}.png"),
                seed,
                role: role.into(),
            });
        }
        splits.push(SplitEntry {
            path: sample.name.clone(),
            role: opts.role(i),
        });
    }
    let index_path = out.join(INDEX_FILE);
    let splits_path = out.join(SPLITS_FILE);
    write_csv(&index_path, &index)?;
    write_csv(&splits_path, &splits)?;
    Ok(SynthSummary {
        images,
        index: index_path,
        splits: splits_path,
    })
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    io::write_atomic(path, &bytes)
}

pub fn read_csv<R: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<R>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::Data(format!("{}: {e}", path.display()))))
        .collect()
}

pub fn read_split_entries(csv_path: &Path) -> Result<Vec<SplitEntry>> {
    if !csv_path.is_file() {
        return Err(Error::Data(format!("split file {} not found", csv_path.display())));
    }
    read_csv(csv_path)
}

/// Loads the pair stored under `stem` (inputs and targets, sidecars preferred).
pub fn load_sample(dir: &Path, stem: &str) -> Result<Sample> {
    let input = io::read_image(&dir.join(format!("{stem}_input.png")))?;
    let target = io::read_image(&dir.join(format!("{stem}_target.png")))?;
    if input.dims() != target.dims() {
        return Err(Error::Data(format!(
            "pair '{stem}': input {:?} and target {:?} differ in size",
            input.dims(),
            target.dims()
        )));
    }
    Ok(Sample {
        name: stem.to_string(),
        input,
        target,
    })
}

pub fn load_splits(csv_path: &Path) -> Result<Splits> {
    let dir = csv_path.parent().unwrap_or(Path::new("."));
    let mut splits = Splits::default();
    for e in read_split_entries(csv_path)? {
        let sample = load_sample(dir, &e.path)?;
        match e.role {
            Role::Train => splits.train.push(sample),
            Role::Val => splits.val.push(sample),
            Role::Test => splits.test.push(sample),
        }
    }
    Ok(splits)
}
