//! Parameterized layers, parameter traversal and per-layer cost accounting.

use parking_lot::Mutex;
use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::tensor::{batch_norm, conv2d, Mode, Padding, RunningStats, Scalar, Tensor};

/// One entry of a module's state.
pub enum Entry<'a, T: Scalar> {
    Param(&'a Tensor<T>),
    Norm(&'a BatchNorm2d<T>),
}

pub trait Module<T: Scalar> {
    /// Visits every parameter and normalization layer in a fixed order under dotted names.
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, Entry<'_, T>));

    fn named_parameters(&self) -> Vec<(String, Tensor<T>)> {
        let mut out = Vec::new();
        self.visit("", &mut |name, e| {
            if let Entry::Param(t) = e {
                out.push((name, t.clone()));
            }
        });
        out
    }

    fn param_count(&self) -> usize {
        self.named_parameters().iter().map(|(_, t)| t.numel()).sum()
    }

    fn zero_grad(&self) {
        self.visit("", &mut |_, e| {
            if let Entry::Param(t) = e {
                t.zero_grad();
            }
        });
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// A row of a model summary.
#[derive(Debug, Clone, Serialize)]
pub struct LayerCost {
    pub name: String,
    pub kind: &'static str,
    /// `[C, H, W]` of the layer output.
    pub output: [usize; 3],
    pub params: usize,
    pub flops: u64,
}

/// Accumulates [`LayerCost`] rows while walking a model with a symbolic input shape.
#[derive(Debug, Default, Clone)]
pub struct CostSheet {
    pub rows: Vec<LayerCost>,
}

impl CostSheet {
    pub fn push(&mut self, name: String, kind: &'static str, output: [usize; 3], params: usize, flops: u64) {
        self.rows.push(LayerCost {
            name,
            kind,
            output,
            params,
            flops,
        });
    }

    pub fn total_params(&self) -> usize {
        self.rows.iter().map(|r| r.params).sum()
    }

    pub fn total_flops(&self) -> u64 {
        self.rows.iter().map(|r| r.flops).sum()
    }
}

/// Kernel `[k, k, cin, cout]`, optional bias `[cout]`.
pub struct Conv2d<T: Scalar> {
    pub kernel: Tensor<T>,
    pub bias: Option<Tensor<T>>,
    pub stride: usize,
    pub padding: Padding,
}

impl<T: Scalar> Conv2d<T> {
    /// Kernel drawn from `U(-s, s)` with `s = sqrt(1 / (k·k·cin))`; bias zero.
    pub fn new(cin: usize, cout: usize, k: usize, stride: usize, bias: bool, rng: &mut impl Rng) -> Self {
        let s = (1.0 / (k * k * cin) as f64).sqrt();
        let data = (0..k * k * cin * cout).map(|_| T::of(rng.random_range(-s..s))).collect();
        Self::from_parts(data, cin, cout, k, stride, bias)
    }

    pub fn zeros(cin: usize, cout: usize, k: usize, stride: usize, bias: bool) -> Self {
        Self::from_parts(vec![T::zero(); k * k * cin * cout], cin, cout, k, stride, bias)
    }

    fn from_parts(data: Vec<T>, cin: usize, cout: usize, k: usize, stride: usize, bias: bool) -> Self {
        Conv2d {
            kernel: Tensor::param(data, &[k, k, cin, cout]).expect("kernel length matches shape"),
            bias: bias.then(|| Tensor::param(vec![T::zero(); cout], &[cout]).expect("bias shape")),
            stride,
            padding: Padding::Same,
        }
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape()[2]
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[3]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        conv2d(x, &self.kernel, self.bias.as_ref(), self.stride, self.padding)
    }

    pub fn output_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (h.div_ceil(self.stride), w.div_ceil(self.stride))
    }

    /// `2·k·k·cin·cout` per output pixel; bias additions are not counted.
    pub fn cost(&self, name: String, input: [usize; 3], sheet: &mut CostSheet) -> [usize; 3] {
        let k = self.kernel_size();
        let (oh, ow) = self.output_hw(input[1], input[2]);
        let flops = 2 * (k * k * self.in_channels() * self.out_channels() * oh * ow) as u64;
        let params = self.kernel.numel() + self.bias.as_ref().map_or(0, |b| b.numel());
        let out = [self.out_channels(), oh, ow];
        sheet.push(name, "conv2d", out, params, flops);
        out
    }
}

impl<T: Scalar> Module<T> for Conv2d<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, Entry<'_, T>)) {
        f(join(prefix, "kernel"), Entry::Param(&self.kernel));
        if let Some(b) = &self.bias {
            f(join(prefix, "bias"), Entry::Param(b));
        }
    }
}

pub struct BatchNorm2d<T: Scalar> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    stats: Mutex<RunningStats<T>>,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            gamma: Tensor::param(vec![T::one(); channels], &[channels]).expect("gamma shape"),
            beta: Tensor::param(vec![T::zero(); channels], &[channels]).expect("beta shape"),
            stats: Mutex::new(RunningStats::new(channels)),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.numel()
    }

    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        batch_norm(x, &self.gamma, &self.beta, &mut self.stats.lock(), mode)
    }

    pub fn running_stats(&self) -> RunningStats<T> {
        self.stats.lock().clone()
    }

    pub fn set_running_stats(&self, stats: RunningStats<T>) {
        *self.stats.lock() = stats;
    }

    /// Affine form at inference: one multiply and one add per element.
    pub fn cost(&self, name: String, input: [usize; 3], sheet: &mut CostSheet) -> [usize; 3] {
        let flops = 2 * (input[0] * input[1] * input[2]) as u64;
        sheet.push(name, "batch_norm", input, 2 * self.channels(), flops);
        input
    }
}

impl<T: Scalar> Module<T> for BatchNorm2d<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, Entry<'_, T>)) {
        f(join(prefix, "gamma"), Entry::Param(&self.gamma));
        f(join(prefix, "beta"), Entry::Param(&self.beta));
        f(prefix.to_string(), Entry::Norm(self));
    }
}
