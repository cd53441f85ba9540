//! Dense tensors with reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is a cheap, clonable handle. Operations on tensors that
//! require gradients record a node holding the parents and a backward rule;
//! [`Tensor::backward`] walks the recorded graph in reverse topological order.
//! Gradients accumulate into every reachable tensor that requires them and must
//! be cleared explicitly with [`Tensor::zero_grad`] before the next backward pass.

mod scalar;

pub mod conv;
pub mod elementwise;
pub mod norm;
pub mod reduce;
pub mod shape_ops;

use std::cell::Cell;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock, RwLockReadGuard};

use crate::error::{Error, Result};

pub use conv::{conv2d, Padding};
pub use elementwise::{elementwise, BinaryOp, Operand};
pub use norm::{batch_norm, Mode, RunningStats, BN_EPS, BN_MOMENTUM};
pub use scalar::Scalar;

static NEXT_ID: AtomicUsize = AtomicUsize::new(0);

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Disables graph recording on the current thread until dropped.
pub struct NoGradGuard {
    prev: bool,
}

impl Drop for NoGradGuard {
    fn drop(&mut self) {
        GRAD_ENABLED.with(|g| g.set(self.prev));
    }
}

pub fn no_grad() -> NoGradGuard {
    let prev = GRAD_ENABLED.with(|g| g.replace(false));
    NoGradGuard { prev }
}

pub fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

/// Maps the upstream gradient to one optional gradient per parent.
pub(crate) type BackwardFn<T> = Box<dyn Fn(&[T]) -> Vec<Option<Vec<T>>> + Send + Sync>;

pub(crate) struct Node<T: Scalar> {
    op: &'static str,
    parents: Vec<Tensor<T>>,
    backward: BackwardFn<T>,
}

struct Inner<T: Scalar> {
    id: usize,
    shape: Vec<usize>,
    data: RwLock<Vec<T>>,
    grad: Mutex<Option<Vec<T>>>,
    requires_grad: bool,
    node: Option<Node<T>>,
}

pub struct Tensor<T: Scalar = f32> {
    inner: Arc<Inner<T>>,
}

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Arc::clone(&self.inner),
        }
    }
}

impl<T: Scalar> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .field("op", &self.inner.node.as_ref().map(|n| n.op))
            .finish()
    }
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<T: Scalar> Tensor<T> {
    fn from_parts(data: Vec<T>, shape: Vec<usize>, requires_grad: bool, node: Option<Node<T>>) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        Tensor {
            inner: Arc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RwLock::new(data),
                grad: Mutex::new(None),
                requires_grad,
                node,
            }),
        }
    }

    pub fn new(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        if numel(shape) != data.len() {
            return Err(Error::invalid(
                "tensor",
                format!("shape {shape:?} needs {} elements, got {}", numel(shape), data.len()),
            ));
        }
        Ok(Self::from_parts(data, shape.to_vec(), false, None))
    }

    /// A leaf that accumulates gradients.
    pub fn param(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        if numel(shape) != data.len() {
            return Err(Error::invalid(
                "param",
                format!("shape {shape:?} needs {} elements, got {}", numel(shape), data.len()),
            ));
        }
        Ok(Self::from_parts(data, shape.to_vec(), true, None))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Self::from_parts(vec![value; numel(shape)], shape.to_vec(), false, None)
    }

    pub fn scalar(value: T) -> Self {
        Self::from_parts(vec![value], vec![], false, None)
    }

    pub fn from_f64(data: &[f64], shape: &[usize]) -> Result<Self> {
        Self::new(data.iter().map(|&v| T::of(v)).collect(), shape)
    }

    /// Result of a differentiable operation. A graph node is recorded only when
    /// recording is enabled and some parent requires gradients.
    pub(crate) fn from_op(
        data: Vec<T>,
        shape: Vec<usize>,
        op: &'static str,
        parents: Vec<Tensor<T>>,
        backward: impl Fn(&[T]) -> Vec<Option<Vec<T>>> + Send + Sync + 'static,
    ) -> Self {
        let track = grad_enabled() && parents.iter().any(|p| p.requires_grad());
        if track {
            let node = Node {
                op,
                parents,
                backward: Box::new(backward),
            };
            Self::from_parts(data, shape, true, Some(node))
        } else {
            Self::from_parts(data, shape, false, None)
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn ndim(&self) -> usize {
        self.inner.shape.len()
    }

    pub fn numel(&self) -> usize {
        numel(&self.inner.shape)
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.inner.node.is_none()
    }

    pub fn op_name(&self) -> Option<&'static str> {
        self.inner.node.as_ref().map(|n| n.op)
    }

    pub fn data(&self) -> RwLockReadGuard<'_, Vec<T>> {
        self.inner.data.read()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.inner.data.read().clone()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.inner.data.read().iter().map(|v| v.as_f64()).collect()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<T> {
        let data = self.inner.data.read();
        if data.len() != 1 {
            return Err(Error::invalid("item", format!("tensor has {} elements", data.len())));
        }
        Ok(data[0])
    }

    /// Overwrites the values of a leaf in place (optimizer updates, checkpoint loads).
    pub fn update_data(&self, f: impl FnOnce(&mut [T])) {
        debug_assert!(self.is_leaf(), "update_data on a non-leaf tensor");
        f(&mut self.inner.data.write());
    }

    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.grad.lock().clone()
    }

    pub fn with_grad<R>(&self, f: impl FnOnce(Option<&[T]>) -> R) -> R {
        f(self.inner.grad.lock().as_deref())
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.lock() = None;
    }

    /// Same values, cut from the graph.
    pub fn detach(&self) -> Self {
        Self::from_parts(self.to_vec(), self.shape().to_vec(), false, None)
    }

    pub fn all_finite(&self) -> bool {
        self.inner.data.read().iter().all(|v| v.is_finite())
    }

    fn id(&self) -> usize {
        self.inner.id
    }

    /// Reverse topological order is the reverse of this post-order listing.
    fn post_order(&self) -> Vec<Tensor<T>> {
        let mut order = Vec::new();
        let mut seen = HashSet::new();
        let mut stack: Vec<(Tensor<T>, bool)> = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !seen.insert(t.id()) {
                continue;
            }
            stack.push((t.clone(), true));
            if let Some(node) = &t.inner.node {
                for p in node.parents.iter().rev() {
                    if p.requires_grad() && !seen.contains(&p.id()) {
                        stack.push((p.clone(), false));
                    }
                }
            }
        }
        order
    }

    /// Back-propagates from a single-element tensor.
    ///
    /// Fails if any reachable tensor still holds a gradient from a previous pass.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::Gradient(format!(
                "loss must have a single element, got shape {:?}",
                self.shape()
            )));
        }
        if !self.requires_grad() {
            return Err(Error::Gradient("loss does not depend on any parameter".into()));
        }
        let order = self.post_order();
        if order.iter().any(|t| t.inner.grad.lock().is_some()) {
            return Err(Error::Gradient(
                "gradients from a previous pass are still present; call zero_grad first".into(),
            ));
        }

        let mut pending: HashMap<usize, Vec<T>> = HashMap::new();
        pending.insert(self.id(), vec![T::one()]);
        for t in order.iter().rev() {
            let Some(g) = pending.remove(&t.id()) else {
                continue;
            };
            if let Some(node) = &t.inner.node {
                let parent_grads = (node.backward)(&g);
                debug_assert_eq!(parent_grads.len(), node.parents.len(), "{}", node.op);
                for (p, pg) in node.parents.iter().zip(parent_grads) {
                    let Some(pg) = pg else { continue };
                    if !p.requires_grad() {
                        continue;
                    }
                    debug_assert_eq!(pg.len(), p.numel(), "{} grad size", node.op);
                    match pending.get_mut(&p.id()) {
                        Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, b)| *a += *b),
                        None => {
                            pending.insert(p.id(), pg);
                        }
                    }
                }
            }
            *t.inner.grad.lock() = Some(g);
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        let data = self.inner.data.read().iter().map(|v| U::of(v.as_f64())).collect();
        Tensor::from_parts(data, self.shape().to_vec(), false, None)
    }
}

/// Shape helpers for 4-D `[N, C, H, W]` activations.
pub(crate) fn dims4(op: &'static str, shape: &[usize]) -> Result<(usize, usize, usize, usize)> {
    match *shape {
        [n, c, h, w] => Ok((n, c, h, w)),
        _ => Err(Error::invalid(op, format!("expected a 4-D tensor, got shape {shape:?}"))),
    }
}
