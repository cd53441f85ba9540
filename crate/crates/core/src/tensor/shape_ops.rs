use super::{dims4, numel, Scalar, Tensor};
use crate::error::{Error, Result};

impl<T: Scalar> Tensor<T> {
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor<T>> {
        if numel(shape) != self.numel() {
            return Err(Error::shape("reshape", self.shape(), shape));
        }
        Ok(Tensor::from_op(self.to_vec(), shape.to_vec(), "reshape", vec![self.clone()], |g| {
            vec![Some(g.to_vec())]
        }))
    }

    /// Nearest-neighbour ×2 upsampling of `[N, C, H, W]`: every pixel becomes a 2×2 block.
    pub fn upsample_nearest2x(&self) -> Result<Tensor<T>> {
        let (n, c, h, w) = dims4("upsample_nearest2x", self.shape())?;
        let (h2, w2) = (2 * h, 2 * w);
        let planes = n * c;
        let mut out = vec![T::zero(); planes * h2 * w2];
        {
            let x = self.data();
            for p in 0..planes {
                let src = &x[p * h * w..(p + 1) * h * w];
                let dst = &mut out[p * h2 * w2..(p + 1) * h2 * w2];
                for y in 0..h2 {
                    for xx in 0..w2 {
                        dst[y * w2 + xx] = src[(y / 2) * w + xx / 2];
                    }
                }
            }
        }
        Ok(Tensor::from_op(
            out,
            vec![n, c, h2, w2],
            "upsample_nearest2x",
            vec![self.clone()],
            move |g| {
                let mut dx = vec![T::zero(); planes * h * w];
                for p in 0..planes {
                    let gp = &g[p * h2 * w2..(p + 1) * h2 * w2];
                    let dp = &mut dx[p * h * w..(p + 1) * h * w];
                    for y in 0..h2 {
                        for xx in 0..w2 {
                            dp[(y / 2) * w + xx / 2] += gp[y * w2 + xx];
                        }
                    }
                }
                vec![Some(dx)]
            },
        ))
    }

    /// Channels `start..start + len` of `[N, C, H, W]`.
    pub fn slice_channels(&self, start: usize, len: usize) -> Result<Tensor<T>> {
        let (n, c, h, w) = dims4("slice_channels", self.shape())?;
        if start + len > c {
            return Err(Error::invalid(
                "slice_channels",
                format!("channels {start}..{} out of range for {c}", start + len),
            ));
        }
        let plane = h * w;
        let mut out = Vec::with_capacity(n * len * plane);
        {
            let x = self.data();
            for b in 0..n {
                let base = (b * c + start) * plane;
                out.extend_from_slice(&x[base..base + len * plane]);
            }
        }
        Ok(Tensor::from_op(
            out,
            vec![n, len, h, w],
            "slice_channels",
            vec![self.clone()],
            move |g| {
                let mut dx = vec![T::zero(); n * c * plane];
                for b in 0..n {
                    let base = (b * c + start) * plane;
                    dx[base..base + len * plane]
                        .copy_from_slice(&g[b * len * plane..(b + 1) * len * plane]);
                }
                vec![Some(dx)]
            },
        ))
    }
}
