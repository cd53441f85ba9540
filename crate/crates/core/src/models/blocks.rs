use rand::Rng;

use super::BackboneKind;
use crate::error::Result;
use crate::funkan::{FunKanBlock, FunKanConfig};
use crate::nn::{join, BatchNorm2d, Conv2d, CostSheet, Entry, Module};
use crate::tensor::{Mode, Scalar, Tensor};

/// A chain of FunKAN blocks, each wrapped in an additive identity skip: `x + block(x)`.
pub struct Backbone<T: Scalar> {
    kind: BackboneKind,
    channels: usize,
    pub blocks: Vec<FunKanBlock<T>>,
}

impl<T: Scalar> Backbone<T> {
    pub fn new(
        prefix: &str,
        kind: BackboneKind,
        depth: usize,
        channels: usize,
        config: FunKanConfig,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let blocks = match kind {
            BackboneKind::Funkan => (0..depth)
                .map(|i| FunKanBlock::new(join(prefix, &i.to_string()), channels, channels, config, rng))
                .collect::<Result<Vec<_>>>()?,
            BackboneKind::Identity => Vec::new(),
        };
        Ok(Backbone {
            kind,
            channels,
            blocks,
        })
    }

    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut h = x.clone();
        for block in &self.blocks {
            h = h.add(&block.forward(&h, mode)?)?;
        }
        Ok(h)
    }

    pub fn funkan_blocks(&self) -> Vec<&FunKanBlock<T>> {
        self.blocks.iter().collect()
    }

    pub fn cost(&self, prefix: &str, input: [usize; 3], sheet: &mut CostSheet) -> [usize; 3] {
        debug_assert_eq!(input[0], self.channels);
        if self.kind == BackboneKind::Identity {
            return input;
        }
        for (i, block) in self.blocks.iter().enumerate() {
            let name = join(prefix, &i.to_string());
            let out = block.cost(&name, input, sheet);
            sheet.push(join(&name, "skip_add"), "add", out, 0, (out[0] * out[1] * out[2]) as u64);
        }
        input
    }
}

impl<T: Scalar> Module<T> for Backbone<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, Entry<'_, T>)) {
        for (i, block) in self.blocks.iter().enumerate() {
            block.visit(&join(prefix, &i.to_string()), f);
        }
    }
}

/// Pre-activation residual unit `conv2(ReLU(BN(conv1(ReLU(BN(x))))))` plus a shortcut.
struct PreActPair<T: Scalar> {
    bn1: BatchNorm2d<T>,
    conv1: Conv2d<T>,
    bn2: BatchNorm2d<T>,
    conv2: Conv2d<T>,
}

impl<T: Scalar> PreActPair<T> {
    fn new(cin: usize, cout: usize, stride: usize, rng: &mut impl Rng) -> Self {
        PreActPair {
            bn1: BatchNorm2d::new(cin),
            conv1: Conv2d::new(cin, cout, 3, stride, true, rng),
            bn2: BatchNorm2d::new(cout),
            conv2: Conv2d::new(cout, cout, 3, 1, true, rng),
        }
    }

    fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let h = self.conv1.forward(&self.bn1.forward(x, mode)?.relu())?;
        self.conv2.forward(&self.bn2.forward(&h, mode)?.relu())
    }

    fn cost(&self, prefix: &str, input: [usize; 3], sheet: &mut CostSheet) -> [usize; 3] {
        self.bn1.cost(join(prefix, "bn1"), input, sheet);
        let mid = self.conv1.cost(join(prefix, "conv1"), input, sheet);
        self.bn2.cost(join(prefix, "bn2"), mid, sheet);
        self.conv2.cost(join(prefix, "conv2"), mid, sheet)
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, Entry<'_, T>)) {
        self.bn1.visit(&join(prefix, "bn1"), f);
        self.conv1.visit(&join(prefix, "conv1"), f);
        self.bn2.visit(&join(prefix, "bn2"), f);
        self.conv2.visit(&join(prefix, "conv2"), f);
    }
}

/// Downsampling residual block: strided first convolution, 1×1 strided projection shortcut.
pub struct EncoderBlock<T: Scalar> {
    body: PreActPair<T>,
    shortcut: Conv2d<T>,
}

impl<T: Scalar> EncoderBlock<T> {
    pub fn new(cin: usize, cout: usize, rng: &mut impl Rng) -> Self {
        EncoderBlock {
            body: PreActPair::new(cin, cout, 2, rng),
            shortcut: Conv2d::new(cin, cout, 1, 2, true, rng),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.shortcut.out_channels()
    }

    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.body.forward(x, mode)?.add(&self.shortcut.forward(x)?)
    }

    pub fn cost(&self, prefix: &str, input: [usize; 3], sheet: &mut CostSheet) -> [usize; 3] {
        let out = self.body.cost(prefix, input, sheet);
        self.shortcut.cost(join(prefix, "shortcut"), input, sheet);
        sheet.push(join(prefix, "residual_add"), "add", out, 0, (out[0] * out[1] * out[2]) as u64);
        out
    }
}

impl<T: Scalar> Module<T> for EncoderBlock<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, Entry<'_, T>)) {
        self.body.visit(prefix, f);
        self.shortcut.visit(&join(prefix, "shortcut"), f);
    }
}

/// Upsampling residual block with an additive skip from the matching encoder stage.
///
/// `out = body(up(x)) + shortcut(up(x)) + skip_proj(skip)`, where the shortcut and
/// skip projections are 1×1 convolutions present only when channel counts differ.
pub struct DecoderBlock<T: Scalar> {
    body: PreActPair<T>,
    shortcut: Option<Conv2d<T>>,
    skip_proj: Option<Conv2d<T>>,
}

impl<T: Scalar> DecoderBlock<T> {
    pub fn new(cin: usize, cout: usize, skip_channels: usize, rng: &mut impl Rng) -> Self {
        DecoderBlock {
            body: PreActPair::new(cin, cout, 1, rng),
            shortcut: (cin != cout).then(|| Conv2d::new(cin, cout, 1, 1, true, rng)),
            skip_proj: (skip_channels != cout).then(|| Conv2d::new(skip_channels, cout, 1, 1, true, rng)),
        }
    }

    pub fn forward(&self, x: &Tensor<T>, skip: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let up = x.upsample_nearest2x()?;
        let body = self.body.forward(&up, mode)?;
        let shortcut = match &self.shortcut {
            Some(c) => c.forward(&up)?,
            None => up,
        };
        let skip = match &self.skip_proj {
            Some(c) => c.forward(skip)?,
            None => skip.clone(),
        };
        body.add(&shortcut)?.add(&skip)
    }

    pub fn cost(
        &self,
        prefix: &str,
        input: [usize; 3],
        skip: [usize; 3],
        sheet: &mut CostSheet,
    ) -> [usize; 3] {
        let up = [input[0], 2 * input[1], 2 * input[2]];
        sheet.push(join(prefix, "upsample"), "upsample_nearest2x", up, 0, 0);
        let out = self.body.cost(prefix, up, sheet);
        if let Some(c) = &self.shortcut {
            c.cost(join(prefix, "shortcut"), up, sheet);
        }
        if let Some(c) = &self.skip_proj {
            c.cost(join(prefix, "skip_proj"), skip, sheet);
        }
        sheet.push(join(prefix, "merge_add"), "add", out, 0, 2 * (out[0] * out[1] * out[2]) as u64);
        out
    }
}

impl<T: Scalar> Module<T> for DecoderBlock<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, Entry<'_, T>)) {
        self.body.visit(prefix, f);
        if let Some(c) = &self.shortcut {
            c.visit(&join(prefix, "shortcut"), f);
        }
        if let Some(c) = &self.skip_proj {
            c.visit(&join(prefix, "skip_proj"), f);
        }
    }
}
