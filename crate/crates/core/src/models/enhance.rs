use rand::Rng;

use super::blocks::Backbone;
use super::ModelSpec;
use crate::error::Result;
use crate::nn::{Conv2d, CostSheet, Entry, Module};
use crate::tensor::{Mode, Scalar, Tensor};

/// Embed (5×5) → lift (3×3) → FunKAN backbone → project (3×3) → restore (1×1).
/// Every convolution after the embedding consumes ReLU pre-activated features.
pub struct EnhancementNet<T: Scalar> {
    pub embed: Conv2d<T>,
    pub lift: Conv2d<T>,
    pub backbone: Backbone<T>,
    pub project: Conv2d<T>,
    pub restore: Conv2d<T>,
}

impl<T: Scalar> EnhancementNet<T> {
    pub(super) fn new(spec: &ModelSpec, rng: &mut impl Rng) -> Result<Self> {
        let (embed_c, width) = (spec.channels[0], spec.channels[1]);
        Ok(EnhancementNet {
            embed: Conv2d::new(spec.in_channels, embed_c, 5, 1, true, rng),
            lift: Conv2d::new(embed_c, width, 3, 1, true, rng),
            backbone: Backbone::new("backbone", spec.backbone, spec.blocks, width, spec.funkan, rng)?,
            project: Conv2d::new(width, embed_c, 3, 1, true, rng),
            restore: Conv2d::new(embed_c, spec.out_channels, 1, 1, true, rng),
        })
    }

    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let h = self.embed.forward(x)?;
        let h = self.lift.forward(&h.relu())?;
        let h = self.backbone.forward(&h, mode)?;
        let h = self.project.forward(&h.relu())?;
        self.restore.forward(&h.relu())
    }

    pub(super) fn cost(&self, input: [usize; 3], sheet: &mut CostSheet) -> [usize; 3] {
        let h = self.embed.cost("embed".into(), input, sheet);
        let h = self.lift.cost("lift".into(), h, sheet);
        let h = self.backbone.cost("backbone", h, sheet);
        let h = self.project.cost("project".into(), h, sheet);
        self.restore.cost("restore".into(), h, sheet)
    }
}

impl<T: Scalar> Module<T> for EnhancementNet<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, Entry<'_, T>)) {
        use crate::nn::join;
        self.embed.visit(&join(prefix, "embed"), f);
        self.lift.visit(&join(prefix, "lift"), f);
        self.backbone.visit(&join(prefix, "backbone"), f);
        self.project.visit(&join(prefix, "project"), f);
        self.restore.visit(&join(prefix, "restore"), f);
    }
}
