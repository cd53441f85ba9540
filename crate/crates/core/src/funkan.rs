//! The FunKAN block.
//!
//! Each input channel `χ_i` is treated as a function on the `h × w` grid. A
//! pre-activation residual network predicts per-channel coordinate offsets
//! `(Δqx_i, Δqy_i)` that deform a uniform reference grid; the inner function
//! of channel `i` is the Hermite expansion `φ_i = Σ_k a_ik·ψ_k(qx + Δqx_i)·ψ_k(qy + Δqy_i)`
//! whose coefficients are the rows of the (normalized) attention matrix; a 1×1
//! convolution mixes the `n` inner functions into `m` output channels.
//!
//! ```text
//! Δq = W0∘BN(χ) + W2∘ReLU(BN(W1∘ReLU(BN(χ))))      [N, 2n, h, w]
//! Δqx, Δqy = Δq[:, :n], Δq[:, n:]
//! χ' = θ ⋆ φ                                         [N, m, h, w]
//! ```

use std::sync::Arc;

use parking_lot::Mutex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{HermiteBasis, ReferenceGrid, DEFAULT_BASIS_SIZE, DEFAULT_GRID_EXTENT};
use crate::nn::{join, BatchNorm2d, Conv2d, CostSheet, Entry, Module};
use crate::tensor::{dims4, Mode, Scalar, Tensor};

/// How raw attention logits become expansion coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientNorm {
    /// Row-wise softmax over the basis axis.
    #[default]
    Softmax,
    /// Raw coefficients, no normalization.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FunKanConfig {
    pub basis_size: usize,
    pub grid_extent: f64,
    pub coefficient_norm: CoefficientNorm,
    pub mixing_bias: bool,
}

impl Default for FunKanConfig {
    fn default() -> Self {
        FunKanConfig {
            basis_size: DEFAULT_BASIS_SIZE,
            grid_extent: DEFAULT_GRID_EXTENT,
            coefficient_norm: CoefficientNorm::Softmax,
            mixing_bias: true,
        }
    }
}

/// Hermite evaluation cost per channel and pixel: grid add (2), two
/// coordinate recurrences (exp prologue 3 + 3 per further order each) and the
/// weighted product sum (3 per order).
pub fn hermite_flops_per_point(r: usize) -> u64 {
    let r = r as u64;
    2 + 2 * (3 + 3 * r.saturating_sub(1)) + 3 * r
}

/// Residual network producing `[N, 2n, h, w]` grid offsets.
pub struct OffsetPredictor<T: Scalar> {
    pub bn_shortcut: BatchNorm2d<T>,
    pub w0: Conv2d<T>,
    pub bn_in: BatchNorm2d<T>,
    pub w1: Conv2d<T>,
    pub bn_mid: BatchNorm2d<T>,
    pub w2: Conv2d<T>,
}

impl<T: Scalar> OffsetPredictor<T> {
    pub fn new(n: usize, rng: &mut impl Rng) -> Self {
        OffsetPredictor {
            bn_shortcut: BatchNorm2d::new(n),
            w0: Conv2d::new(n, 2 * n, 3, 1, false, rng),
            bn_in: BatchNorm2d::new(n),
            w1: Conv2d::new(n, n, 3, 1, true, rng),
            bn_mid: BatchNorm2d::new(n),
            w2: Conv2d::new(n, 2 * n, 3, 1, true, rng),
        }
    }

    /// All kernels and biases zero.
    pub fn zeros(n: usize) -> Self {
        OffsetPredictor {
            bn_shortcut: BatchNorm2d::new(n),
            w0: Conv2d::zeros(n, 2 * n, 3, 1, false),
            bn_in: BatchNorm2d::new(n),
            w1: Conv2d::zeros(n, n, 3, 1, true),
            bn_mid: BatchNorm2d::new(n),
            w2: Conv2d::zeros(n, 2 * n, 3, 1, true),
        }
    }

    pub fn channels(&self) -> usize {
        self.bn_in.channels()
    }

    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let shortcut = self.w0.forward(&self.bn_shortcut.forward(x, mode)?)?;
        let h = self.bn_in.forward(x, mode)?.relu();
        let h = self.w1.forward(&h)?;
        let h = self.bn_mid.forward(&h, mode)?.relu();
        let h = self.w2.forward(&h)?;
        shortcut.add(&h)
    }

    /// `(Δqx, Δqy)`, each `[N, n, h, w]`.
    pub fn predict(&self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, Tensor<T>)> {
        let (_, c, _, _) = dims4("predict_offsets", x.shape())?;
        let n = self.channels();
        if c != n {
            return Err(Error::shape("predict_offsets", x.shape(), &[n]));
        }
        let dq = self.forward(x, mode)?;
        Ok((dq.slice_channels(0, n)?, dq.slice_channels(n, n)?))
    }

    fn cost(&self, prefix: &str, input: [usize; 3], sheet: &mut CostSheet) -> [usize; 3] {
        self.bn_shortcut.cost(join(prefix, "bn_shortcut"), input, sheet);
        let out = self.w0.cost(join(prefix, "w0"), input, sheet);
        self.bn_in.cost(join(prefix, "bn_in"), input, sheet);
        let mid = self.w1.cost(join(prefix, "w1"), input, sheet);
        self.bn_mid.cost(join(prefix, "bn_mid"), mid, sheet);
        self.w2.cost(join(prefix, "w2"), mid, sheet);
        let adds = (out[0] * out[1] * out[2]) as u64;
        sheet.push(join(prefix, "residual_add"), "add", out, 0, adds);
        out
    }
}

impl<T: Scalar> Module<T> for OffsetPredictor<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, Entry<'_, T>)) {
        self.bn_shortcut.visit(&join(prefix, "bn_shortcut"), f);
        self.w0.visit(&join(prefix, "w0"), f);
        self.bn_in.visit(&join(prefix, "bn_in"), f);
        self.w1.visit(&join(prefix, "w1"), f);
        self.bn_mid.visit(&join(prefix, "bn_mid"), f);
        self.w2.visit(&join(prefix, "w2"), f);
    }
}

pub struct FunKanBlock<T: Scalar> {
    label: String,
    config: FunKanConfig,
    basis: HermiteBasis,
    pub offsets: OffsetPredictor<T>,
    /// Raw coefficient logits `[n, r]`.
    pub attention: Tensor<T>,
    /// 1×1 mixing `n → m`.
    pub mixing: Conv2d<T>,
    grid: Mutex<Option<Arc<ReferenceGrid>>>,
}

impl<T: Scalar> FunKanBlock<T> {
    pub fn new(
        label: impl Into<String>,
        n: usize,
        m: usize,
        config: FunKanConfig,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let offsets = OffsetPredictor::new(n, rng);
        let mixing = Conv2d::new(n, m, 1, 1, config.mixing_bias, rng);
        Self::assemble(label.into(), n, config, offsets, mixing)
    }

    pub(crate) fn assemble(
        label: String,
        n: usize,
        config: FunKanConfig,
        offsets: OffsetPredictor<T>,
        mixing: Conv2d<T>,
    ) -> Result<Self> {
        if n == 0 || mixing.out_channels() == 0 {
            return Err(Error::invalid("funkan block", "channel counts must be positive"));
        }
        if !(config.grid_extent > 0.0) {
            return Err(Error::invalid("funkan block", "grid extent must be positive"));
        }
        let basis = HermiteBasis::new(config.basis_size)?;
        let r = basis.len();
        Ok(FunKanBlock {
            label,
            config,
            basis,
            offsets,
            attention: Tensor::param(vec![T::zero(); n * r], &[n, r])?,
            mixing,
            grid: Mutex::new(None),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn config(&self) -> &FunKanConfig {
        &self.config
    }

    pub fn in_channels(&self) -> usize {
        self.offsets.channels()
    }

    pub fn out_channels(&self) -> usize {
        self.mixing.out_channels()
    }

    pub fn basis(&self) -> &HermiteBasis {
        &self.basis
    }

    fn grid(&self, h: usize, w: usize) -> Result<Arc<ReferenceGrid>> {
        let mut cached = self.grid.lock();
        if let Some(g) = cached.as_ref().filter(|g| g.h == h && g.w == w) {
            return Ok(Arc::clone(g));
        }
        let g = Arc::new(ReferenceGrid::new(h, w, self.config.grid_extent)?);
        *cached = Some(Arc::clone(&g));
        Ok(g)
    }

    /// Expansion coefficients as a differentiable `[n, r]` tensor.
    fn coefficients(&self) -> Result<Tensor<T>> {
        match self.config.coefficient_norm {
            CoefficientNorm::Softmax => self.attention.softmax(1),
            CoefficientNorm::Raw => Ok(self.attention.clone()),
        }
    }

    /// Normalized attention matrix `[n, r]`, row-major.
    pub fn attention_matrix(&self) -> Result<Vec<Vec<f64>>> {
        let coeffs = {
            let _g = crate::tensor::no_grad();
            self.coefficients()?
        };
        let r = self.basis.len();
        Ok(coeffs.to_f64_vec().chunks(r).map(|row| row.to_vec()).collect())
    }

    pub fn predict_offsets(&self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, Tensor<T>)> {
        self.offsets.predict(x, mode)
    }

    /// Per-channel inner functions `φ_i`, `[N, n, h, w]`.
    pub fn inner_functions(&self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (_, _, h, w) = dims4("funkan block", x.shape())?;
        let (dqx, dqy) = self.predict_offsets(x, mode)?;
        let grid = self.grid(h, w)?;
        self.basis.expansion(&grid, &dqx, &dqy, &self.coefficients()?)
    }

    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let phi = self.inner_functions(x, mode)?;
        let out = self.mixing.forward(&phi)?;
        if !out.all_finite() {
            return Err(Error::NonFinite {
                context: format!("funkan block '{}'", self.label),
            });
        }
        Ok(out)
    }

    pub fn cost(&self, prefix: &str, input: [usize; 3], sheet: &mut CostSheet) -> [usize; 3] {
        let [n, h, w] = input;
        let r = self.basis.len();
        self.offsets.cost(&join(prefix, "offsets"), input, sheet);
        let softmax = match self.config.coefficient_norm {
            CoefficientNorm::Softmax => 3 * (n * r) as u64,
            CoefficientNorm::Raw => 0,
        };
        let flops = hermite_flops_per_point(r) * (n * h * w) as u64 + softmax;
        sheet.push(join(prefix, "hermite"), "hermite_expansion", input, n * r, flops);
        self.mixing.cost(join(prefix, "mixing"), input, sheet)
    }
}

impl<T: Scalar> Module<T> for FunKanBlock<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, Entry<'_, T>)) {
        self.offsets.visit(&join(prefix, "offsets"), f);
        f(join(prefix, "attention"), Entry::Param(&self.attention));
        self.mixing.visit(&join(prefix, "mixing"), f);
    }
}
