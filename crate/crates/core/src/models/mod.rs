//! Host architectures around the FunKAN backbone.
//!
//! * [`EnhancementNet`]: resolution-preserving image restoration network.
//! * [`UFunKanNet`]: U-shaped segmentation network with FunKAN blocks at the bottleneck.

mod blocks;
mod enhance;
mod ufunkan;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use blocks::{Backbone, DecoderBlock, EncoderBlock};
pub use enhance::EnhancementNet;
pub use ufunkan::UFunKanNet;

use crate::error::{Error, Result};
use crate::funkan::{FunKanBlock, FunKanConfig};
use crate::nn::{CostSheet, Entry, Module};
use crate::tensor::{Mode, Scalar, Tensor};

/// Parameter counts of the published configurations, in millions.
pub const REFERENCE_PARAMS_ENHANCE_M: f64 = 2.2;
pub const REFERENCE_PARAMS_UFUNKAN_M: f64 = 3.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Enhance,
    Ufunkan,
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "enhance" => Ok(Architecture::Enhance),
            "ufunkan" => Ok(Architecture::Ufunkan),
            other => Err(Error::Config(format!(
                "unknown model '{other}' (expected 'enhance' or 'ufunkan')"
            ))),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::Enhance => "enhance",
            Architecture::Ufunkan => "ufunkan",
        })
    }
}

/// What sits between lifting and projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackboneKind {
    #[default]
    Funkan,
    /// Stages pass activations through unchanged (architecture self-test).
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Architecture,
    #[serde(default = "one")]
    pub in_channels: usize,
    #[serde(default = "one")]
    pub out_channels: usize,
    /// `enhance`: `[embed, width]`, default `[16, 32]`.
    /// `ufunkan`: `[C1, C2, C3]`, default `[32, 64, 128]`.
    #[serde(default)]
    pub channels: Vec<usize>,
    #[serde(default = "three")]
    pub blocks: usize,
    #[serde(default)]
    pub backbone: BackboneKind,
    #[serde(default)]
    pub funkan: FunKanConfig,
}

fn one() -> usize {
    1
}

fn three() -> usize {
    3
}

impl ModelSpec {
    pub fn enhance() -> Self {
        ModelSpec {
            arch: Architecture::Enhance,
            in_channels: 1,
            out_channels: 1,
            channels: vec![16, 32],
            blocks: 3,
            backbone: BackboneKind::Funkan,
            funkan: FunKanConfig::default(),
        }
    }

    pub fn ufunkan(c: [usize; 3]) -> Self {
        ModelSpec {
            arch: Architecture::Ufunkan,
            channels: c.to_vec(),
            ..Self::enhance()
        }
    }

    pub fn named(name: &str) -> Result<Self> {
        Ok(match name.parse::<Architecture>()? {
            Architecture::Enhance => Self::enhance(),
            Architecture::Ufunkan => Self::ufunkan([32, 64, 128]),
        })
    }

    /// Fills defaults for an empty channel list and checks the rest.
    pub fn resolved(&self) -> Result<ModelSpec> {
        let mut spec = self.clone();
        let expected = match spec.arch {
            Architecture::Enhance => 2,
            Architecture::Ufunkan => 3,
        };
        if spec.channels.is_empty() {
            spec.channels = match spec.arch {
                Architecture::Enhance => vec![16, 32],
                Architecture::Ufunkan => vec![32, 64, 128],
            };
        }
        if spec.channels.len() != expected {
            return Err(Error::Config(format!(
                "{} expects {expected} channel counts, got {:?}",
                spec.arch, spec.channels
            )));
        }
        if spec.channels.iter().any(|&c| c == 0) || spec.in_channels == 0 || spec.out_channels == 0 {
            return Err(Error::Config(format!(
                "channel counts must be strictly positive, got {:?}",
                spec.channels
            )));
        }
        if spec.funkan.basis_size == 0 || !(spec.funkan.grid_extent > 0.0) {
            return Err(Error::Config("basis size and grid extent must be positive".into()));
        }
        Ok(spec)
    }

    /// Spatial divisor the input must satisfy.
    pub fn spatial_divisor(&self) -> usize {
        match self.arch {
            Architecture::Enhance => 1,
            Architecture::Ufunkan => 16,
        }
    }
}

pub enum Model<T: Scalar = f32> {
    Enhance(EnhancementNet<T>),
    UFunKan(UFunKanNet<T>),
}

/// Deterministic construction: identical `(spec, seed)` yield bitwise-identical parameters.
pub fn build<T: Scalar>(spec: &ModelSpec, seed: u64) -> Result<Model<T>> {
    let spec = spec.resolved()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match spec.arch {
        Architecture::Enhance => Model::Enhance(EnhancementNet::new(&spec, &mut rng)?),
        Architecture::Ufunkan => Model::UFunKan(UFunKanNet::new(&spec, &mut rng)?),
    })
}

impl<T: Scalar> Model<T> {
    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        match self {
            Model::Enhance(m) => m.forward(x, mode),
            Model::UFunKan(m) => m.forward(x, mode),
        }
    }

    pub fn arch(&self) -> Architecture {
        match self {
            Model::Enhance(_) => Architecture::Enhance,
            Model::UFunKan(_) => Architecture::Ufunkan,
        }
    }

    pub fn funkan_blocks(&self) -> Vec<&FunKanBlock<T>> {
        match self {
            Model::Enhance(m) => m.backbone.funkan_blocks(),
            Model::UFunKan(m) => m.backbone.funkan_blocks(),
        }
    }

    /// Per-layer parameter and FLOP table for one `[C, H, W]` input.
    pub fn cost_sheet(&self, input: [usize; 3]) -> CostSheet {
        let mut sheet = CostSheet::default();
        match self {
            Model::Enhance(m) => m.cost(input, &mut sheet),
            Model::UFunKan(m) => m.cost(input, &mut sheet),
        };
        sheet
    }
}

impl<T: Scalar> Module<T> for Model<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, Entry<'_, T>)) {
        match self {
            Model::Enhance(m) => m.visit(prefix, f),
            Model::UFunKan(m) => m.visit(prefix, f),
        }
    }
}

pub fn count_params<T: Scalar>(model: &Model<T>) -> usize {
    model.param_count()
}

/// FLOPs of a forward pass on `[N, C, H, W]` (or `[C, H, W]`, one image).
///
/// Convolutions count `2·k·k·Cin·Cout` per output pixel, batch norm 2 per
/// element, additive skips 1 per element, Hermite expansion
/// [`hermite_flops_per_point`](crate::funkan::hermite_flops_per_point) per
/// channel and pixel; activations and resampling are free.
pub fn count_flops<T: Scalar>(model: &Model<T>, input_shape: &[usize]) -> Result<u64> {
    let (n, chw) = match *input_shape {
        [n, c, h, w] => (n as u64, [c, h, w]),
        [c, h, w] => (1, [c, h, w]),
        _ => return Err(Error::invalid("count_flops", format!("bad input shape {input_shape:?}"))),
    };
    Ok(n * model.cost_sheet(chw).total_flops())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_name_rejected() {
        assert!(matches!(ModelSpec::named("unet"), Err(Error::Config(_))));
        assert!(ModelSpec::named("enhance").is_ok());
    }

    #[test]
    fn nonpositive_channels_rejected() {
        let spec = ModelSpec::ufunkan([32, 0, 128]);
        assert!(build::<f32>(&spec, 1).is_err());
        let mut spec = ModelSpec::enhance();
        spec.channels = vec![16, 32, 64];
        assert!(build::<f32>(&spec, 1).is_err());
    }

    #[test]
    fn spec_roundtrips_through_json() {
        let spec = ModelSpec::ufunkan([64, 96, 128]);
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<ModelSpec>(&text).unwrap(), spec);
        let minimal: ModelSpec = serde_json::from_str(r#"{"arch":"ufunkan"}"#).unwrap();
        assert_eq!(minimal.resolved().unwrap().channels, vec![32, 64, 128]);
    }
}
