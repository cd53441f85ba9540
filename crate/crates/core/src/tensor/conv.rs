//! 2-D cross-correlation on `[N, C, H, W]` activations.
//!
//! Kernels are stored `[kH, kW, Cin, Cout]`, which is exactly the row-major
//! layout of the `[kH·kW·Cin, Cout]` matrix multiplied against the im2col
//! patch matrix of each sample.

use super::{dims4, Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Zero padding of `(k - 1) / 2`; output extent is `ceil(h / stride)`.
    Same,
    Valid,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeometry {
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad_y: usize,
    pub pad_x: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeometry {
    pub fn new(
        cin: usize,
        h: usize,
        w: usize,
        kh: usize,
        kw: usize,
        stride: usize,
        padding: Padding,
    ) -> Result<Self> {
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::invalid("conv2d", format!("kernel {kh}x{kw} must have odd extents")));
        }
        if stride == 0 {
            return Err(Error::invalid("conv2d", "stride must be at least 1"));
        }
        let (pad_y, pad_x) = match padding {
            Padding::Same => ((kh - 1) / 2, (kw - 1) / 2),
            Padding::Valid => (0, 0),
        };
        if h + 2 * pad_y < kh || w + 2 * pad_x < kw {
            return Err(Error::invalid(
                "conv2d",
                format!("input {h}x{w} smaller than kernel {kh}x{kw}"),
            ));
        }
        let oh = (h + 2 * pad_y - kh) / stride + 1;
        let ow = (w + 2 * pad_x - kw) / stride + 1;
        Ok(ConvGeometry {
            cin,
            h,
            w,
            kh,
            kw,
            stride,
            pad_y,
            pad_x,
            oh,
            ow,
        })
    }

    pub fn rows(&self) -> usize {
        self.kh * self.kw * self.cin
    }

    pub fn pixels(&self) -> usize {
        self.oh * self.ow
    }

    /// Patches become contiguous input planes for 1×1 stride-1 kernels.
    pub fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1
    }

    /// Input row index for output row `oy` and kernel row `ky`, if inside the image.
    #[inline]
    fn src_y(&self, oy: usize, ky: usize) -> Option<usize> {
        (oy * self.stride + ky).checked_sub(self.pad_y).filter(|&y| y < self.h)
    }

    #[cfg(test)]
    fn src_x(&self, ox: usize, kx: usize) -> Option<usize> {
        (ox * self.stride + kx).checked_sub(self.pad_x).filter(|&x| x < self.w)
    }

    /// Output columns `[lo, hi)` whose tap `kx` lands inside the input row.
    fn valid_ox(&self, kx: usize) -> (usize, usize) {
        let s = self.stride;
        let lo = self.pad_x.saturating_sub(kx).div_ceil(s).min(self.ow);
        let hi = (self.w + self.pad_x).saturating_sub(kx).div_ceil(s).min(self.ow);
        (lo, hi.max(lo))
    }

    /// Fills `cols` (`[rows, pixels]`) from one sample `x` (`[cin, h, w]`).
    pub fn im2col<T: Scalar>(&self, x: &[T], cols: &mut [T]) {
        let p = self.pixels();
        for ky in 0..self.kh {
            for kx in 0..self.kw {
                let (lo, hi) = self.valid_ox(kx);
                for ci in 0..self.cin {
                    let row = ((ky * self.kw + kx) * self.cin + ci) * p;
                    let plane = &x[ci * self.h * self.w..(ci + 1) * self.h * self.w];
                    for oy in 0..self.oh {
                        let dst = &mut cols[row + oy * self.ow..row + (oy + 1) * self.ow];
                        let Some(iy) = self.src_y(oy, ky) else {
                            dst.fill(T::zero());
                            continue;
                        };
                        let src = &plane[iy * self.w..(iy + 1) * self.w];
                        dst[..lo].fill(T::zero());
                        dst[hi..].fill(T::zero());
                        if lo < hi {
                            let start = lo * self.stride + kx - self.pad_x;
                            if self.stride == 1 {
                                dst[lo..hi].copy_from_slice(&src[start..start + hi - lo]);
                            } else {
                                for (d, ix) in dst[lo..hi].iter_mut().zip((start..).step_by(self.stride)) {
                                    *d = src[ix];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Scatter-adds `cols` back into one sample's input gradient.
    pub fn col2im<T: Scalar>(&self, cols: &[T], dx: &mut [T]) {
        let p = self.pixels();
        for ky in 0..self.kh {
            for kx in 0..self.kw {
                let (lo, hi) = self.valid_ox(kx);
                if lo >= hi {
                    continue;
                }
                let start = lo * self.stride + kx - self.pad_x;
                for ci in 0..self.cin {
                    let row = ((ky * self.kw + kx) * self.cin + ci) * p;
                    let plane = &mut dx[ci * self.h * self.w..(ci + 1) * self.h * self.w];
                    for oy in 0..self.oh {
                        let Some(iy) = self.src_y(oy, ky) else { continue };
                        let src = &cols[row + oy * self.ow + lo..row + oy * self.ow + hi];
                        let dst = &mut plane[iy * self.w..(iy + 1) * self.w];
                        if self.stride == 1 {
                            for (d, &v) in dst[start..start + hi - lo].iter_mut().zip(src) {
                                *d += v;
                            }
                        } else {
                            for (&v, ix) in src.iter().zip((start..).step_by(self.stride)) {
                                dst[ix] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation (no kernel flip) of `x: [N, Cin, H, W]` with `kernel: [kH, kW, Cin, Cout]`.
pub fn conv2d<T: Scalar>(
    x: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    padding: Padding,
) -> Result<Tensor<T>> {
    let (n, cin, h, w) = dims4("conv2d", x.shape())?;
    let (kh, kw, kcin, cout) = match *kernel.shape() {
        [a, b, c, d] => (a, b, c, d),
        _ => return Err(Error::invalid("conv2d", format!("kernel shape {:?} is not 4-D", kernel.shape()))),
    };
    if kcin != cin {
        return Err(Error::shape("conv2d", x.shape(), kernel.shape()));
    }
    if let Some(b) = bias {
        if b.shape() != [cout] {
            return Err(Error::shape("conv2d bias", b.shape(), &[cout]));
        }
    }
    let geo = ConvGeometry::new(cin, h, w, kh, kw, stride, padding)?;
    let (rows, p) = (geo.rows(), geo.pixels());
    let in_len = cin * h * w;

    let mut out = vec![T::zero(); n * cout * p];
    {
        let xd = x.data();
        let kd = kernel.data();
        let mut cols = if geo.is_pointwise() { Vec::new() } else { vec![T::zero(); rows * p] };
        for b in 0..n {
            let xb = &xd[b * in_len..(b + 1) * in_len];
            let patches: &[T] = if geo.is_pointwise() {
                xb
            } else {
                geo.im2col(xb, &mut cols);
                &cols
            };
            let yb = &mut out[b * cout * p..(b + 1) * cout * p];
            // Y[cout, p] = Kᵀ[cout, rows] · patches[rows, p]
            T::gemm(cout, rows, p, T::one(), &kd, (1, cout), patches, (p, 1), T::zero(), yb, (p, 1));
            if let Some(bias) = bias {
                let bd = bias.data();
                for (co, chunk) in yb.chunks_mut(p).enumerate() {
                    chunk.iter_mut().for_each(|v| *v += bd[co]);
                }
            }
        }
    }

    let mut parents = vec![x.clone(), kernel.clone()];
    if let Some(b) = bias {
        parents.push(b.clone());
    }
    let has_bias = bias.is_some();
    let (xs, ks) = (x.clone(), kernel.clone());
    let bias_grad = bias.map(|b| b.requires_grad()).unwrap_or(false);
    Ok(Tensor::from_op(out, vec![n, cout, geo.oh, geo.ow], "conv2d", parents, move |g| {
        let xd = xs.data();
        let kd = ks.data();
        let want_dx = xs.requires_grad();
        let want_dk = ks.requires_grad();
        let mut dx = want_dx.then(|| vec![T::zero(); n * in_len]);
        let mut dk = want_dk.then(|| vec![T::zero(); rows * cout]);
        let mut cols = if geo.is_pointwise() { Vec::new() } else { vec![T::zero(); rows * p] };
        let mut dcols = if want_dx && !geo.is_pointwise() { vec![T::zero(); rows * p] } else { Vec::new() };
        for b in 0..n {
            let gb = &g[b * cout * p..(b + 1) * cout * p];
            if let Some(dk) = dk.as_mut() {
                let xb = &xd[b * in_len..(b + 1) * in_len];
                let patches: &[T] = if geo.is_pointwise() {
                    xb
                } else {
                    geo.im2col(xb, &mut cols);
                    &cols
                };
                // dK[rows, cout] += patches[rows, p] · Gᵀ[p, cout]
                T::gemm(rows, p, cout, T::one(), patches, (p, 1), gb, (1, p), T::one(), dk, (cout, 1));
            }
            if let Some(dx) = dx.as_mut() {
                let dxb = &mut dx[b * in_len..(b + 1) * in_len];
                if geo.is_pointwise() {
                    // dX[cin, p] = K[cin, cout] · G[cout, p]
                    T::gemm(rows, cout, p, T::one(), &kd, (cout, 1), gb, (p, 1), T::zero(), dxb, (p, 1));
                } else {
                    T::gemm(rows, cout, p, T::one(), &kd, (cout, 1), gb, (p, 1), T::zero(), &mut dcols, (p, 1));
                    geo.col2im(&dcols, dxb);
                }
            }
        }
        let mut grads = vec![dx, dk];
        if has_bias {
            grads.push(bias_grad.then(|| {
                let mut db = vec![T::zero(); cout];
                for b in 0..n {
                    for (co, chunk) in g[b * cout * p..(b + 1) * cout * p].chunks(p).enumerate() {
                        db[co] += chunk.iter().fold(T::zero(), |a, &v| a + v);
                    }
                }
                db
            }));
        }
        grads
    }))
}

impl<T: Scalar> Tensor<T> {
    pub fn conv2d(
        &self,
        kernel: &Tensor<T>,
        bias: Option<&Tensor<T>>,
        stride: usize,
        padding: Padding,
    ) -> Result<Tensor<T>> {
        conv2d(self, kernel, bias, stride, padding)
    }
}
