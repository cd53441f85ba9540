//! Orthonormal Hermite functions `ψ_k(x) = c_k·H_k(x)·exp(-x²/2)`.
//!
//! Values are produced by the normalized three-term recurrence
//!
//! ```text
//! ψ_0(x)     = π^(-1/4)·exp(-x²/2)
//! ψ_1(x)     = √2·x·ψ_0(x)
//! ψ_{k+1}(x) = x·√(2/(k+1))·ψ_k(x) − √(k/(k+1))·ψ_{k-1}(x)
//! ```
//!
//! which never forms `H_k` or `k!` and so cannot overflow. Derivatives use
//! `ψ_k'(x) = √(k/2)·ψ_{k-1}(x) − √((k+1)/2)·ψ_{k+1}(x)`.
//!
//! A 2-D basis map is the separable product `ψ_k(qx)·ψ_k(qy)` evaluated on a
//! (possibly deformed) coordinate grid.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub const DEFAULT_BASIS_SIZE: usize = 6;
pub const DEFAULT_GRID_EXTENT: f64 = 3.0;

/// Fills `out[k] = ψ_k(x)` for `k < out.len()`.
pub fn hermite_functions<T: Scalar>(x: T, out: &mut [T]) {
    if out.is_empty() {
        return;
    }
    let half = T::of(0.5);
    out[0] = T::of(PI.powf(-0.25)) * (-(x * x) * half).exp();
    if out.len() > 1 {
        out[1] = T::of(2f64.sqrt()) * x * out[0];
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        let a = T::of((2.0 / (kf + 1.0)).sqrt());
        let b = T::of((kf / (kf + 1.0)).sqrt());
        out[k + 1] = x * a * out[k] - b * out[k - 1];
    }
}

/// `ψ_k'(x)` from a table holding `ψ_0..=ψ_{k+1}`.
#[inline]
fn derivative<T: Scalar>(values: &[T], k: usize) -> T {
    let up = T::of(((k + 1) as f64 / 2.0).sqrt()) * values[k + 1];
    if k == 0 {
        -up
    } else {
        T::of((k as f64 / 2.0).sqrt()) * values[k - 1] - up
    }
}

/// The first `r` Hermite functions.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteBasis {
    r: usize,
    norms: Vec<f64>,
}

impl Default for HermiteBasis {
    fn default() -> Self {
        Self::new(DEFAULT_BASIS_SIZE).expect("default basis size is positive")
    }
}

impl HermiteBasis {
    pub fn new(r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::invalid("hermite_basis", "basis size must be at least 1"));
        }
        // c_0 = π^(-1/4), c_k = c_{k-1} / √(2k)
        let mut norms = Vec::with_capacity(r);
        let mut c = PI.powf(-0.25);
        for k in 0..r {
            if k > 0 {
                c /= (2.0 * k as f64).sqrt();
            }
            norms.push(c);
        }
        Ok(HermiteBasis { r, norms })
    }

    pub fn len(&self) -> usize {
        self.r
    }

    pub fn is_empty(&self) -> bool {
        self.r == 0
    }

    /// `c_k = (2^k·k!·√π)^(-1/2)`.
    pub fn normalization(&self, k: usize) -> Option<f64> {
        self.norms.get(k).copied()
    }

    fn check_order(&self, op: &'static str, k: usize) -> Result<()> {
        if k >= self.r {
            return Err(Error::invalid(op, format!("order {k} outside basis of size {}", self.r)));
        }
        Ok(())
    }

    pub fn eval_scalar(&self, k: usize, x: f64) -> Result<f64> {
        self.check_order("hermite eval", k)?;
        let mut v = vec![0.0; k + 1];
        hermite_functions(x, &mut v);
        Ok(v[k])
    }

    /// Elementwise `ψ_k(x)`, differentiable in `x`.
    pub fn eval<T: Scalar>(&self, k: usize, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_order("hermite eval", k)?;
        let mut table = vec![T::zero(); k + 2];
        let out: Vec<T> = x
            .data()
            .iter()
            .map(|&v| {
                hermite_functions(v, &mut table[..k + 1]);
                table[k]
            })
            .collect();
        let xs = x.clone();
        Ok(Tensor::from_op(out, x.shape().to_vec(), "hermite_eval", vec![x.clone()], move |g| {
            let mut table = vec![T::zero(); k + 2];
            let dx = g
                .iter()
                .zip(xs.data().iter())
                .map(|(&g, &v)| {
                    hermite_functions(v, &mut table);
                    g * derivative(&table, k)
                })
                .collect();
            vec![Some(dx)]
        }))
    }

    /// Elementwise `ψ_k(qx)·ψ_k(qy)`, differentiable in both coordinates.
    pub fn eval_separable_2d<T: Scalar>(
        &self,
        k: usize,
        qx: &Tensor<T>,
        qy: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        self.check_order("hermite eval_separable_2d", k)?;
        if qx.shape() != qy.shape() {
            return Err(Error::shape("hermite eval_separable_2d", qx.shape(), qy.shape()));
        }
        let px = self.eval(k, qx)?;
        let py = self.eval(k, qy)?;
        px.mul(&py)
    }

    /// Fused inner-function evaluation of a FunKAN block.
    ///
    /// For every sample `b`, channel `i` and pixel `p` this computes
    /// `Σ_k coeffs[i, k]·ψ_k(qx[p] + dqx[b,i,p])·ψ_k(qy[p] + dqy[b,i,p])`,
    /// differentiable in `dqx`, `dqy` and `coeffs`.
    pub fn expansion<T: Scalar>(
        &self,
        grid: &ReferenceGrid,
        dqx: &Tensor<T>,
        dqy: &Tensor<T>,
        coeffs: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        let op = "hermite expansion";
        let (n, c, h, w) = crate::tensor::dims4(op, dqx.shape())?;
        if dqx.shape() != dqy.shape() {
            return Err(Error::shape(op, dqx.shape(), dqy.shape()));
        }
        if coeffs.shape() != [c, self.r] {
            return Err(Error::shape(op, coeffs.shape(), &[c, self.r]));
        }
        if (grid.h, grid.w) != (h, w) {
            return Err(Error::shape(op, &[grid.h, grid.w], &[h, w]));
        }
        let r = self.r;
        let plane = h * w;
        let qx: Vec<T> = grid.qx.iter().map(|&v| T::of(v)).collect();
        let qy: Vec<T> = grid.qy.iter().map(|&v| T::of(v)).collect();
        let rec = Recurrence::<T>::new(r + 1);
        // ψ_0..=ψ_r per point; the extra order feeds the derivative in backward
        let stride = r + 1;
        let total = n * c * plane;
        let mut tx = vec![T::zero(); total * stride];
        let mut ty = vec![T::zero(); total * stride];
        let mut out = vec![T::zero(); total];
        {
            let dx = dqx.data();
            let dy = dqy.data();
            let cf = coeffs.data();
            let planes = tx
                .chunks_exact_mut(plane * stride)
                .zip(ty.chunks_exact_mut(plane * stride))
                .zip(out.chunks_exact_mut(plane))
                .zip(dx.chunks_exact(plane).zip(dy.chunks_exact(plane)));
            for (bi, (((txp, typ), outp), (dxp, dyp))) in planes.enumerate() {
                let row = &cf[(bi % c) * r..(bi % c + 1) * r];
                let points = txp
                    .chunks_exact_mut(stride)
                    .zip(typ.chunks_exact_mut(stride))
                    .zip(outp.iter_mut())
                    .zip(qx.iter().zip(&qy).zip(dxp.iter().zip(dyp)));
                for (((px, py), o), ((&x0, &y0), (&ddx, &ddy))) in points {
                    rec.fill(x0 + ddx, px);
                    rec.fill(y0 + ddy, py);
                    *o = row
                        .iter()
                        .zip(px.iter().zip(py.iter()))
                        .fold(T::zero(), |acc, (&a, (&u, &v))| acc + a * u * v);
                }
            }
        }

        let (dqx_c, dqy_c, cf_c) = (dqx.clone(), dqy.clone(), coeffs.clone());
        Ok(Tensor::from_op(
            out,
            vec![n, c, h, w],
            "hermite_expansion",
            vec![dqx.clone(), dqy.clone(), coeffs.clone()],
            move |g| {
                let cf = cf_c.data();
                let want_offsets = dqx_c.requires_grad() || dqy_c.requires_grad();
                let mut gx = vec![T::zero(); total];
                let mut gy = vec![T::zero(); total];
                let mut gc = vec![T::zero(); c * r];
                for b in 0..n {
                    for i in 0..c {
                        let row = &cf[i * r..(i + 1) * r];
                        let base = (b * c + i) * plane;
                        for p in 0..plane {
                            let j = base + p;
                            let gp = g[j];
                            let px = &tx[j * stride..(j + 1) * stride];
                            let py = &ty[j * stride..(j + 1) * stride];
                            let (mut sx, mut sy) = (T::zero(), T::zero());
                            for k in 0..r {
                                gc[i * r + k] += gp * px[k] * py[k];
                                if want_offsets {
                                    sx += row[k] * rec.derivative(px, k) * py[k];
                                    sy += row[k] * px[k] * rec.derivative(py, k);
                                }
                            }
                            gx[j] = gp * sx;
                            gy[j] = gp * sy;
                        }
                    }
                }
                vec![
                    dqx_c.requires_grad().then_some(gx),
                    dqy_c.requires_grad().then_some(gy),
                    cf_c.requires_grad().then_some(gc),
                ]
            },
        ))
    }
}

/// Recurrence and derivative coefficients, converted to `T` once.
struct Recurrence<T> {
    c0: T,
    a: Vec<T>,
    b: Vec<T>,
    up: Vec<T>,
    down: Vec<T>,
}

impl<T: Scalar> Recurrence<T> {
    fn new(len: usize) -> Self {
        let a = (0..len).map(|k| T::of((2.0 / (k as f64 + 1.0)).sqrt())).collect();
        let b = (0..len).map(|k| T::of((k as f64 / (k as f64 + 1.0)).sqrt())).collect();
        let up = (0..len).map(|k| T::of(((k + 1) as f64 / 2.0).sqrt())).collect();
        let down = (0..len).map(|k| T::of((k as f64 / 2.0).sqrt())).collect();
        Recurrence {
            c0: T::of(PI.powf(-0.25)),
            a,
            b,
            up,
            down,
        }
    }

    #[inline]
    fn fill(&self, x: T, out: &mut [T]) {
        out[0] = self.c0 * (-(x * x) * T::of(0.5)).exp();
        if out.len() > 1 {
            out[1] = self.a[0] * x * out[0];
        }
        for k in 1..out.len().saturating_sub(1) {
            out[k + 1] = x * self.a[k] * out[k] - self.b[k] * out[k - 1];
        }
    }

    #[inline]
    fn derivative(&self, values: &[T], k: usize) -> T {
        let up = self.up[k] * values[k + 1];
        if k == 0 {
            -up
        } else {
            self.down[k] * values[k - 1] - up
        }
    }
}

/// Uniform reference coordinates on an `h × w` grid, flattened row-major.
/// `qx` varies along the width, `qy` along the height.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceGrid {
    pub h: usize,
    pub w: usize,
    pub extent: f64,
    pub qx: Vec<f64>,
    pub qy: Vec<f64>,
}

fn axis(len: usize, extent: f64) -> Vec<f64> {
    // a single sample sits at the centre of the interval
    if len == 1 {
        return vec![0.0];
    }
    let step = 2.0 * extent / (len - 1) as f64;
    (0..len).map(|i| -extent + step * i as f64).collect()
}

impl ReferenceGrid {
    pub fn new(h: usize, w: usize, extent: f64) -> Result<Self> {
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::invalid("uniform_grid", format!("extent must be positive, got {extent}")));
        }
        if h == 0 || w == 0 {
            return Err(Error::invalid("uniform_grid", format!("empty grid {h}x{w}")));
        }
        let xs = axis(w, extent);
        let ys = axis(h, extent);
        let mut qx = Vec::with_capacity(h * w);
        let mut qy = Vec::with_capacity(h * w);
        for &y in &ys {
            for &x in &xs {
                qx.push(x);
                qy.push(y);
            }
        }
        Ok(ReferenceGrid { h, w, extent, qx, qy })
    }
}

/// Coordinates linearly spaced over `[-extent, extent]` (inclusive) as `[h, w]` tensors.
pub fn uniform_grid<T: Scalar>(h: usize, w: usize, extent: f64) -> Result<(Tensor<T>, Tensor<T>)> {
    let grid = ReferenceGrid::new(h, w, extent)?;
    Ok((
        Tensor::from_f64(&grid.qx, &[h, w])?,
        Tensor::from_f64(&grid.qy, &[h, w])?,
    ))
}
