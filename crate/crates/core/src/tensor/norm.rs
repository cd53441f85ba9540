use serde::{Deserialize, Serialize};

use super::{dims4, Scalar, Tensor};
use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// Per-channel running mean and (unbiased) variance.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub initialized: bool,
}

impl<T: Scalar> RunningStats<T> {
    /// Mean 0, variance 1: usable in eval mode immediately.
    pub fn new(channels: usize) -> Self {
        RunningStats {
            mean: vec![T::zero(); channels],
            var: vec![T::one(); channels],
            initialized: true,
        }
    }

    /// Stats that must be filled by a train-mode pass (or loaded) before eval use.
    pub fn uninitialized(channels: usize) -> Self {
        RunningStats {
            initialized: false,
            ..Self::new(channels)
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }
}

/// Batch normalization over `(N, H, W)` for each channel of `[N, C, H, W]`.
///
/// Train mode normalizes with the batch statistics and folds them into
/// `stats` with momentum [`BN_MOMENTUM`]; eval mode uses `stats` as-is.
pub fn batch_norm<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    stats: &mut RunningStats<T>,
    mode: Mode,
) -> Result<Tensor<T>> {
    let (n, c, h, w) = dims4("batch_norm", x.shape())?;
    if gamma.shape() != [c] || beta.shape() != [c] || stats.channels() != c {
        return Err(Error::shape("batch_norm", x.shape(), gamma.shape()));
    }
    let plane = h * w;
    let count = n * plane;
    let eps = T::of(BN_EPS);

    let (mean, inv_std) = match mode {
        Mode::Train => {
            if count < 2 {
                return Err(Error::invalid(
                    "batch_norm",
                    format!("train mode needs N·H·W ≥ 2, got {count}"),
                ));
            }
            let xd = x.data();
            let mut mean = vec![T::zero(); c];
            let mut var = vec![T::zero(); c];
            for ch in 0..c {
                let mut s = 0.0f64;
                for b in 0..n {
                    let base = (b * c + ch) * plane;
                    s += xd[base..base + plane].iter().map(|v| v.as_f64()).sum::<f64>();
                }
                let mu = s / count as f64;
                let mut ss = 0.0f64;
                for b in 0..n {
                    let base = (b * c + ch) * plane;
                    ss += xd[base..base + plane]
                        .iter()
                        .map(|v| (v.as_f64() - mu).powi(2))
                        .sum::<f64>();
                }
                mean[ch] = T::of(mu);
                var[ch] = T::of(ss / count as f64);
            }
            let m = T::of(BN_MOMENTUM);
            let unbias = T::of(count as f64 / (count - 1) as f64);
            for ch in 0..c {
                stats.mean[ch] = (T::one() - m) * stats.mean[ch] + m * mean[ch];
                stats.var[ch] = (T::one() - m) * stats.var[ch] + m * var[ch] * unbias;
            }
            stats.initialized = true;
            let inv_std = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect::<Vec<_>>();
            (mean, inv_std)
        }
        Mode::Eval => {
            if !stats.initialized {
                return Err(Error::invalid(
                    "batch_norm",
                    "eval mode requires initialized running statistics",
                ));
            }
            let inv_std = stats.var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
            (stats.mean.clone(), inv_std)
        }
    };

    let mut xhat = vec![T::zero(); n * c * plane];
    let mut out = vec![T::zero(); n * c * plane];
    {
        let xd = x.data();
        let gd = gamma.data();
        let bd = beta.data();
        for b in 0..n {
            for ch in 0..c {
                let base = (b * c + ch) * plane;
                for i in base..base + plane {
                    let xh = (xd[i] - mean[ch]) * inv_std[ch];
                    xhat[i] = xh;
                    out[i] = gd[ch] * xh + bd[ch];
                }
            }
        }
    }

    let gamma_c = gamma.clone();
    let (want_x, want_g, want_b) = (x.requires_grad(), gamma.requires_grad(), beta.requires_grad());
    Ok(Tensor::from_op(
        out,
        x.shape().to_vec(),
        "batch_norm",
        vec![x.clone(), gamma.clone(), beta.clone()],
        move |g| {
            let gd = gamma_c.data();
            let mut dgamma = vec![T::zero(); c];
            let mut dbeta = vec![T::zero(); c];
            for b in 0..n {
                for ch in 0..c {
                    let base = (b * c + ch) * plane;
                    for i in base..base + plane {
                        dgamma[ch] += g[i] * xhat[i];
                        dbeta[ch] += g[i];
                    }
                }
            }
            let dx = want_x.then(|| {
                let mut dx = vec![T::zero(); n * c * plane];
                let inv_count = T::one() / T::of(count as f64);
                for ch in 0..c {
                    let scale = gd[ch] * inv_std[ch];
                    // batch statistics depend on x in train mode; running ones do not
                    let (mg, mgx) = match mode {
                        Mode::Train => (dbeta[ch] * inv_count, dgamma[ch] * inv_count),
                        Mode::Eval => (T::zero(), T::zero()),
                    };
                    for b in 0..n {
                        let base = (b * c + ch) * plane;
                        for i in base..base + plane {
                            dx[i] = scale * (g[i] - mg - xhat[i] * mgx);
                        }
                    }
                }
                dx
            });
            vec![dx, want_g.then_some(dgamma), want_b.then_some(dbeta)]
        },
    ))
}
