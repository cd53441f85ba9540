//! Checkpoints: a JSON manifest beside a little-endian `f32` blob.
//!
//! The manifest records the model spec and seed, then one entry per stored
//! tensor (parameters and batch-norm running statistics) with its shape and
//! byte offset into the blob. Loading rebuilds the model from `(spec, seed)`
//! and overwrites every listed tensor.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{build, Model, ModelSpec};
use crate::nn::{Entry, Module};
use crate::tensor::{RunningStats, Scalar};

pub const FORMAT: &str = "funkan-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    Param,
    RunningMean,
    RunningVar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub kind: TensorKind,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
    /// Element count.
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub spec: ModelSpec,
    pub seed: u64,
    pub dtype: String,
    /// Blob file name, relative to the manifest.
    pub blob: String,
    pub blob_bytes: usize,
    pub tensors: Vec<TensorEntry>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn entry(&self, name: &str, kind: TensorKind) -> Option<&TensorEntry> {
        self.tensors.iter().find(|e| e.name == name && e.kind == kind)
    }
}

/// Flattens the model state into manifest entries and blob bytes.
pub fn serialize<T: Scalar>(
    model: &Model<T>,
    spec: &ModelSpec,
    seed: u64,
    blob_name: &str,
    metadata: BTreeMap<String, serde_json::Value>,
) -> (Manifest, Vec<u8>) {
    let mut blob = Vec::new();
    let mut tensors = Vec::new();
    let mut push = |name: String, kind: TensorKind, shape: Vec<usize>, values: &[T]| {
        tensors.push(TensorEntry {
            name,
            kind,
            shape,
            offset: blob.len(),
            len: values.len(),
        });
        for v in values {
            blob.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    };
    model.visit("", &mut |name, entry| match entry {
        Entry::Param(t) => push(name, TensorKind::Param, t.shape().to_vec(), &t.data()),
        Entry::Norm(bn) => {
            let stats = bn.running_stats();
            let c = stats.channels();
            push(name.clone(), TensorKind::RunningMean, vec![c], &stats.mean);
            push(name, TensorKind::RunningVar, vec![c], &stats.var);
        }
    });
    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        spec: spec.clone(),
        seed,
        dtype: "f32le".into(),
        blob: blob_name.into(),
        blob_bytes: blob.len(),
        tensors,
        metadata,
    };
    (manifest, blob)
}

fn blob_path(manifest_path: &Path) -> PathBuf {
    manifest_path.with_extension("bin")
}

/// Writes `path` (manifest) and `path` with extension `.bin` (blob).
///
/// Both files are written to temporaries first and renamed into place.
pub fn save<T: Scalar>(
    model: &Model<T>,
    spec: &ModelSpec,
    seed: u64,
    path: &Path,
    metadata: BTreeMap<String, serde_json::Value>,
) -> Result<Manifest> {
    let blob_file = blob_path(path);
    let blob_name = blob_file
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Data(format!("bad checkpoint path {}", path.display())))?
        .to_string();
    let (manifest, blob) = serialize(model, spec, seed, &blob_name, metadata);
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Data(e.to_string()))?;
    crate::io::write_atomic(&blob_file, &blob)?;
    crate::io::write_atomic(path, &json)?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_slice(&text)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    if manifest.format != FORMAT || manifest.version != VERSION {
        return Err(Error::Data(format!(
            "{}: unsupported checkpoint {} v{}",
            path.display(),
            manifest.format,
            manifest.version
        )));
    }
    Ok(manifest)
}

/// Restores a model saved by [`save`].
pub fn load<T: Scalar>(path: &Path) -> Result<(Model<T>, Manifest)> {
    let manifest = read_manifest(path)?;
    let blob_file = path.with_file_name(&manifest.blob);
    let blob = fs::read(&blob_file).map_err(|e| Error::io(&blob_file, e))?;
    if blob.len() != manifest.blob_bytes {
        return Err(Error::Data(format!(
            "{}: expected {} bytes, found {}",
            blob_file.display(),
            manifest.blob_bytes,
            blob.len()
        )));
    }
    let model = build::<T>(&manifest.spec, manifest.seed)?;
    apply(&model, &manifest, &blob)?;
    Ok((model, manifest))
}

fn read_values<T: Scalar>(blob: &[u8], e: &TensorEntry) -> Result<Vec<T>> {
    let end = e.offset + 4 * e.len;
    let bytes = blob
        .get(e.offset..end)
        .ok_or_else(|| Error::Data(format!("tensor '{}' lies outside the blob", e.name)))?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect())
}

/// Copies stored tensors into a freshly built model.
pub fn apply<T: Scalar>(model: &Model<T>, manifest: &Manifest, blob: &[u8]) -> Result<()> {
    let mut result = Ok(());
    model.visit("", &mut |name, entry| {
        if result.is_err() {
            return;
        }
        result = (|| -> Result<()> {
            match entry {
                Entry::Param(t) => {
                    let e = manifest
                        .entry(&name, TensorKind::Param)
                        .ok_or_else(|| Error::Data(format!("checkpoint lacks parameter '{name}'")))?;
                    if e.shape != t.shape() {
                        return Err(Error::Data(format!(
                            "parameter '{name}': stored shape {:?}, model shape {:?}",
                            e.shape,
                            t.shape()
                        )));
                    }
                    let values = read_values::<T>(blob, e)?;
                    t.update_data(|d| d.copy_from_slice(&values));
                }
                Entry::Norm(bn) => {
                    let find = |kind| {
                        manifest
                            .entry(&name, kind)
                            .ok_or_else(|| Error::Data(format!("checkpoint lacks running stats of '{name}'")))
                    };
                    let mean = read_values::<T>(blob, find(TensorKind::RunningMean)?)?;
                    let var = read_values::<T>(blob, find(TensorKind::RunningVar)?)?;
                    if mean.len() != bn.channels() || var.len() != bn.channels() {
                        return Err(Error::Data(format!("running stats of '{name}' have wrong length")));
                    }
                    bn.set_running_stats(RunningStats {
                        mean,
                        var,
                        initialized: true,
                    });
                }
            }
            Ok(())
        })();
    });
    result
}
