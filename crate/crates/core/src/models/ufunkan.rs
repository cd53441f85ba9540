use rand::Rng;

use super::blocks::{Backbone, DecoderBlock, EncoderBlock};
use super::ModelSpec;
use crate::error::{Error, Result};
use crate::nn::{join, Conv2d, CostSheet, Entry, Module};
use crate::tensor::{dims4, Mode, Scalar, Tensor};

const EMBED_CHANNELS: usize = 16;

/// U-shaped segmentation network.
///
/// Encoder stage outputs are `[C1, C2, C3, C3]` at `1/2 … 1/16` resolution; the
/// decoder mirrors them back to `[C3, C2, C1, 16]`, fusing each stage with the
/// encoder feature of matching resolution (the embedding for the last one).
pub struct UFunKanNet<T: Scalar> {
    pub embed: Conv2d<T>,
    pub encoder: Vec<EncoderBlock<T>>,
    pub backbone: Backbone<T>,
    pub decoder: Vec<DecoderBlock<T>>,
    pub head: Conv2d<T>,
}

impl<T: Scalar> UFunKanNet<T> {
    pub(super) fn new(spec: &ModelSpec, rng: &mut impl Rng) -> Result<Self> {
        let [c1, c2, c3] = [spec.channels[0], spec.channels[1], spec.channels[2]];
        let embed = Conv2d::new(spec.in_channels, EMBED_CHANNELS, 3, 1, true, rng);
        let enc_channels = [c1, c2, c3, c3];
        let mut encoder = Vec::with_capacity(4);
        let mut cin = EMBED_CHANNELS;
        for &c in &enc_channels {
            encoder.push(EncoderBlock::new(cin, c, rng));
            cin = c;
        }
        let backbone = Backbone::new("backbone", spec.backbone, spec.blocks, c3, spec.funkan, rng)?;
        // decoder stage s fuses with the encoder output one level up
        let skips = [c3, c2, c1, EMBED_CHANNELS];
        let dec_channels = [c3, c2, c1, EMBED_CHANNELS];
        let mut decoder = Vec::with_capacity(4);
        let mut cin = c3;
        for (&c, &s) in dec_channels.iter().zip(&skips) {
            decoder.push(DecoderBlock::new(cin, c, s, rng));
            cin = c;
        }
        let head = Conv2d::new(EMBED_CHANNELS, spec.out_channels, 1, 1, true, rng);
        Ok(UFunKanNet {
            embed,
            encoder,
            backbone,
            decoder,
            head,
        })
    }

    pub fn encoder_channels(&self) -> Vec<usize> {
        self.encoder.iter().map(|e| e.out_channels()).collect()
    }

    /// Returns per-pixel logits.
    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (_, _, h, w) = dims4("ufunkan", x.shape())?;
        if h % 16 != 0 || w % 16 != 0 || h == 0 || w == 0 {
            return Err(Error::invalid(
                "ufunkan",
                format!("spatial size {h}x{w} must be a positive multiple of 16"),
            ));
        }
        let mut features = vec![self.embed.forward(x)?];
        for stage in &self.encoder {
            let next = stage.forward(features.last().expect("non-empty"), mode)?;
            features.push(next);
        }
        let mut h = self.backbone.forward(features.last().expect("non-empty"), mode)?;
        for (i, stage) in self.decoder.iter().enumerate() {
            // features: [embed, e1, e2, e3, e4]; stage 0 pairs with e3
            let skip = &features[features.len() - 2 - i];
            h = stage.forward(&h, skip, mode)?;
        }
        self.head.forward(&h.relu())
    }

    pub(super) fn cost(&self, input: [usize; 3], sheet: &mut CostSheet) -> [usize; 3] {
        let mut shapes = vec![self.embed.cost("embed".into(), input, sheet)];
        for (i, stage) in self.encoder.iter().enumerate() {
            let out = stage.cost(&format!("encoder.{i}"), *shapes.last().expect("non-empty"), sheet);
            shapes.push(out);
        }
        let mut h = self.backbone.cost("backbone", *shapes.last().expect("non-empty"), sheet);
        for (i, stage) in self.decoder.iter().enumerate() {
            h = stage.cost(&format!("decoder.{i}"), h, shapes[shapes.len() - 2 - i], sheet);
        }
        self.head.cost("head".into(), h, sheet)
    }
}

impl<T: Scalar> Module<T> for UFunKanNet<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, Entry<'_, T>)) {
        self.embed.visit(&join(prefix, "embed"), f);
        for (i, e) in self.encoder.iter().enumerate() {
            e.visit(&join(prefix, &format!("encoder.{i}")), f);
        }
        self.backbone.visit(&join(prefix, "backbone"), f);
        for (i, d) in self.decoder.iter().enumerate() {
            d.visit(&join(prefix, &format!("decoder.{i}")), f);
        }
        self.head.visit(&join(prefix, "head"), f);
    }
}
