use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
}

/// Right-hand side of [`elementwise`].
pub enum Operand<'a, T: Scalar> {
    Tensor(&'a Tensor<T>),
    Scalar(T),
}

impl<'a, T: Scalar> From<&'a Tensor<T>> for Operand<'a, T> {
    fn from(t: &'a Tensor<T>) -> Self {
        Operand::Tensor(t)
    }
}

pub fn elementwise<'a, T: Scalar>(
    a: &Tensor<T>,
    b: impl Into<Operand<'a, T>>,
    kind: BinaryOp,
) -> Result<Tensor<T>> {
    match (b.into(), kind) {
        (Operand::Tensor(b), BinaryOp::Add) => a.add(b),
        (Operand::Tensor(b), BinaryOp::Sub) => a.sub(b),
        (Operand::Tensor(b), BinaryOp::Mul) => a.mul(b),
        (Operand::Scalar(s), BinaryOp::Add) => Ok(a.add_scalar(s)),
        (Operand::Scalar(s), BinaryOp::Sub) => Ok(a.add_scalar(-s)),
        (Operand::Scalar(s), BinaryOp::Mul) => Ok(a.mul_scalar(s)),
    }
}

impl<T: Scalar> Tensor<T> {
    fn check_same(&self, other: &Tensor<T>, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(op, self.shape(), other.shape()));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Tensor<T>, f: impl Fn(T, T) -> T) -> Vec<T> {
        let a = self.data();
        let b = other.data();
        a.iter().zip(b.iter()).map(|(&x, &y)| f(x, y)).collect()
    }

    /// Unary op whose derivative is a function of the input value and the output value.
    fn unary(
        &self,
        op: &'static str,
        f: impl Fn(T) -> T,
        df: impl Fn(T, T) -> T + Send + Sync + 'static,
    ) -> Tensor<T> {
        let out: Vec<T> = self.data().iter().map(|&v| f(v)).collect();
        let saved_out = out.clone();
        let x = self.clone();
        Tensor::from_op(out, self.shape().to_vec(), op, vec![self.clone()], move |g| {
            let xd = x.data();
            let dx = g
                .iter()
                .zip(xd.iter().zip(&saved_out))
                .map(|(&g, (&x, &y))| g * df(x, y))
                .collect();
            vec![Some(dx)]
        })
    }

    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_same(other, "add")?;
        let out = self.zip_with(other, |a, b| a + b);
        Ok(Tensor::from_op(
            out,
            self.shape().to_vec(),
            "add",
            vec![self.clone(), other.clone()],
            |g| vec![Some(g.to_vec()), Some(g.to_vec())],
        ))
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_same(other, "sub")?;
        let out = self.zip_with(other, |a, b| a - b);
        Ok(Tensor::from_op(
            out,
            self.shape().to_vec(),
            "sub",
            vec![self.clone(), other.clone()],
            |g| vec![Some(g.to_vec()), Some(g.iter().map(|&v| -v).collect())],
        ))
    }

    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_same(other, "mul")?;
        let out = self.zip_with(other, |a, b| a * b);
        let (a, b) = (self.clone(), other.clone());
        Ok(Tensor::from_op(
            out,
            self.shape().to_vec(),
            "mul",
            vec![self.clone(), other.clone()],
            move |g| {
                let ad = a.data();
                let bd = b.data();
                let da = a
                    .requires_grad()
                    .then(|| g.iter().zip(bd.iter()).map(|(&g, &b)| g * b).collect());
                let db = b
                    .requires_grad()
                    .then(|| g.iter().zip(ad.iter()).map(|(&g, &a)| g * a).collect());
                vec![da, db]
            },
        ))
    }

    pub fn div(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_same(other, "div")?;
        let out = self.zip_with(other, |a, b| a / b);
        let (a, b) = (self.clone(), other.clone());
        Ok(Tensor::from_op(
            out,
            self.shape().to_vec(),
            "div",
            vec![self.clone(), other.clone()],
            move |g| {
                let ad = a.data();
                let bd = b.data();
                let da = a
                    .requires_grad()
                    .then(|| g.iter().zip(bd.iter()).map(|(&g, &b)| g / b).collect());
                let db = b.requires_grad().then(|| {
                    g.iter()
                        .zip(ad.iter().zip(bd.iter()))
                        .map(|(&g, (&a, &b))| -g * a / (b * b))
                        .collect()
                });
                vec![da, db]
            },
        ))
    }

    pub fn add_scalar(&self, s: T) -> Tensor<T> {
        let out = self.data().iter().map(|&v| v + s).collect();
        Tensor::from_op(out, self.shape().to_vec(), "add_scalar", vec![self.clone()], |g| {
            vec![Some(g.to_vec())]
        })
    }

    pub fn mul_scalar(&self, s: T) -> Tensor<T> {
        let out = self.data().iter().map(|&v| v * s).collect();
        Tensor::from_op(out, self.shape().to_vec(), "mul_scalar", vec![self.clone()], move |g| {
            vec![Some(g.iter().map(|&v| v * s).collect())]
        })
    }

    pub fn neg(&self) -> Tensor<T> {
        self.mul_scalar(-T::one())
    }

    /// Subgradient 0 at 0.
    pub fn relu(&self) -> Tensor<T> {
        self.unary(
            "relu",
            |v| if v > T::zero() { v } else { T::zero() },
            |x, _| if x > T::zero() { T::one() } else { T::zero() },
        )
    }

    pub fn sigmoid(&self) -> Tensor<T> {
        self.unary("sigmoid", sigmoid, |_, y| y * (T::one() - y))
    }

    pub fn exp(&self) -> Tensor<T> {
        self.unary("exp", |v| v.exp(), |_, y| y)
    }

    pub fn ln(&self) -> Tensor<T> {
        self.unary("ln", |v| v.ln(), |x, _| T::one() / x)
    }

    pub fn square(&self) -> Tensor<T> {
        self.unary("square", |v| v * v, |x, _| x + x)
    }

    /// Per-element binary cross-entropy between `sigmoid(self)` and `target`,
    /// evaluated in the overflow-free logit form.
    pub fn bce_with_logits(&self, target: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_same(target, "bce_with_logits")?;
        let out = self.zip_with(target, |x, t| {
            x.max(T::zero()) - x * t + (-x.abs()).exp().ln_1p()
        });
        let (x, t) = (self.clone(), target.clone());
        Ok(Tensor::from_op(
            out,
            self.shape().to_vec(),
            "bce_with_logits",
            vec![self.clone()],
            move |g| {
                let xd = x.data();
                let td = t.data();
                let dx = g
                    .iter()
                    .zip(xd.iter().zip(td.iter()))
                    .map(|(&g, (&x, &t))| g * (sigmoid(x) - t))
                    .collect();
                vec![Some(dx)]
            },
        ))
    }
}

pub(crate) fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(v, &[v.len()]).unwrap()
    }

    #[test]
    fn add_matches_arithmetic() {
        let out = elementwise(&t(&[1.0, 2.0]), &t(&[3.0, 4.0]), BinaryOp::Add).unwrap();
        assert_eq!(out.to_vec(), vec![4.0, 6.0]);
    }

    #[test]
    fn mul_by_one_is_exact_identity() {
        let x = Tensor::<f32>::new(vec![0.1, -3.7, 1e-20, 5.5e10], &[4]).unwrap();
        let y = elementwise(&x, Operand::Scalar(1.0), BinaryOp::Mul).unwrap();
        assert_eq!(x.to_vec(), y.to_vec());
    }

    #[test]
    fn shape_mismatch_reports_both_shapes() {
        let err = t(&[1.0, 2.0]).add(&t(&[1.0, 2.0, 3.0])).unwrap_err();
        match err {
            Error::Shape { lhs, rhs, .. } => {
                assert_eq!(lhs, vec![2]);
                assert_eq!(rhs, vec![3]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn relu_clamps_negatives() {
        assert_eq!(t(&[-1.0, 0.0, 2.0]).relu().to_vec(), vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let x = Tensor::<f64>::param(vec![-1.0, 0.0, 2.0], &[3]).unwrap();
        x.relu().sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn bce_with_logits_is_stable_for_large_logits() {
        let x = t(&[-800.0, 800.0, 0.0]);
        let target = t(&[0.0, 1.0, 1.0]);
        let out = x.bce_with_logits(&target).unwrap().to_vec();
        assert!(out[0].abs() < 1e-12 && out[1].abs() < 1e-12);
        assert!((out[2] - std::f64::consts::LN_2).abs() < 1e-12);
    }
}
