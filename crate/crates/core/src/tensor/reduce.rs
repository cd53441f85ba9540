use super::{Scalar, Tensor};
use crate::error::{Error, Result};

impl<T: Scalar> Tensor<T> {
    pub fn sum(&self) -> Tensor<T> {
        let total = self.data().iter().fold(T::zero(), |acc, &v| acc + v);
        let n = self.numel();
        Tensor::from_op(vec![total], vec![], "sum", vec![self.clone()], move |g| {
            vec![Some(vec![g[0]; n])]
        })
    }

    pub fn mean(&self) -> Tensor<T> {
        let n = self.numel().max(1);
        self.sum().mul_scalar(T::one() / T::of(n as f64))
    }

    /// Sums over every axis except the leading (batch) one: `[N, ...] -> [N]`.
    pub fn sum_per_sample(&self) -> Result<Tensor<T>> {
        let Some(&n) = self.shape().first() else {
            return Err(Error::invalid("sum_per_sample", "tensor has no batch axis"));
        };
        let per = if n == 0 { 0 } else { self.numel() / n };
        let out: Vec<T> = {
            let d = self.data();
            (0..n)
                .map(|b| d[b * per..(b + 1) * per].iter().fold(T::zero(), |a, &v| a + v))
                .collect()
        };
        Ok(Tensor::from_op(out, vec![n], "sum_per_sample", vec![self.clone()], move |g| {
            let mut dx = Vec::with_capacity(n * per);
            for &gb in g {
                dx.extend(std::iter::repeat(gb).take(per));
            }
            vec![Some(dx)]
        }))
    }

    /// Softmax along `axis`.
    pub fn softmax(&self, axis: usize) -> Result<Tensor<T>> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() {
            return Err(Error::invalid(
                "softmax",
                format!("axis {axis} out of range for shape {shape:?}"),
            ));
        }
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let mut out = self.to_vec();
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let idx = |k: usize| base + k * inner;
                let max = (0..len).map(|k| out[idx(k)]).fold(T::neg_infinity(), T::max);
                let mut denom = T::zero();
                for k in 0..len {
                    let e = (out[idx(k)] - max).exp();
                    out[idx(k)] = e;
                    denom += e;
                }
                for k in 0..len {
                    out[idx(k)] = out[idx(k)] / denom;
                }
            }
        }
        let y = out.clone();
        Ok(Tensor::from_op(out, shape, "softmax", vec![self.clone()], move |g| {
            let mut dx = vec![T::zero(); y.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let base = o * len * inner + i;
                    let dot = (0..len)
                        .map(|k| g[base + k * inner] * y[base + k * inner])
                        .fold(T::zero(), |a, b| a + b);
                    for k in 0..len {
                        let j = base + k * inner;
                        dx[j] = y[j] * (g[j] - dot);
                    }
                }
            }
            vec![Some(dx)]
        }))
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let (m, k, n) = match (self.shape(), other.shape()) {
            (&[m, k], &[k2, n]) if k == k2 => (m, k, n),
            _ => return Err(Error::shape("matmul", self.shape(), other.shape())),
        };
        let mut out = vec![T::zero(); m * n];
        T::gemm(
            m,
            k,
            n,
            T::one(),
            &self.data(),
            (k, 1),
            &other.data(),
            (n, 1),
            T::zero(),
            &mut out,
            (n, 1),
        );
        let (a, b) = (self.clone(), other.clone());
        Ok(Tensor::from_op(
            out,
            vec![m, n],
            "matmul",
            vec![self.clone(), other.clone()],
            move |g| {
                // dA = G·Bᵀ, dB = Aᵀ·G
                let da = a.requires_grad().then(|| {
                    let mut da = vec![T::zero(); m * k];
                    T::gemm(m, n, k, T::one(), g, (n, 1), &b.data(), (1, n), T::zero(), &mut da, (k, 1));
                    da
                });
                let db = b.requires_grad().then(|| {
                    let mut db = vec![T::zero(); k * n];
                    T::gemm(k, m, n, T::one(), &a.data(), (1, k), g, (n, 1), T::zero(), &mut db, (n, 1));
                    db
                });
                vec![da, db]
            },
        ))
    }
}
