#![allow(dead_code)]

use funkan::nn::Module;
use funkan::tensor::{no_grad, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_param(shape: &[usize], lo: f64, hi: f64, rng: &mut impl Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::param(data, shape).unwrap()
}

/// Fixed random weights so that `Σ w·f(x)` exercises every output element differently.
pub fn projection(n: usize, seed: u64) -> Tensor<f64> {
    let mut r = rng(seed);
    Tensor::new((0..n).map(|_| r.random_range(-1.0..1.0)).collect(), &[n]).unwrap()
}

/// Reduces any tensor to a scalar via a fixed random projection.
pub fn project(t: &Tensor<f64>, seed: u64) -> Tensor<f64> {
    let flat = t.reshape(&[t.numel()]).unwrap();
    flat.mul(&projection(t.numel(), seed)).unwrap().sum()
}

/// Overwrites every parameter of a module with random values; scale
/// parameters (`gamma`) stay near 1 so normalisation remains well conditioned.
pub fn randomize<M: Module<f64>>(module: &M, seed: u64) {
    let mut r = rng(seed);
    for (name, p) in module.named_parameters() {
        let gamma = name.ends_with("gamma");
        p.update_data(|d| {
            for v in d.iter_mut() {
                *v = if gamma { r.random_range(0.5..1.5) } else { r.random_range(-0.5..0.5) };
            }
        });
    }
}

#[derive(Debug)]
pub struct GradReport {
    pub worst_relative: f64,
    pub checked: usize,
}

/// Compares reverse-mode gradients of the scalar `f` against central
/// differences for every element of every tensor in `params`.
///
/// The error per tensor is `‖g_ad − g_fd‖₂ / max(‖g_ad‖₂, ‖g_fd‖₂, floor)`.
/// Central differences carry absolute noise of order `1e-10·|f|`, so the
/// floor `1e-5·max(1, |f|)` keeps structurally zero gradients (a bias in
/// front of a train-mode batch norm, say) from turning noise into a ratio.
pub fn gradcheck(params: &[&Tensor<f64>], f: impl Fn() -> Tensor<f64>) -> GradReport {
    for p in params {
        p.zero_grad();
    }
    let out = f();
    assert_eq!(out.numel(), 1, "gradcheck needs a scalar objective");
    let floor = 1e-5 * out.item().unwrap().abs().max(1.0);
    out.backward().unwrap();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for p in params {
        let analytic = p.grad().unwrap_or_else(|| vec![0.0; p.numel()]);
        let mut numeric = vec![0.0; p.numel()];
        {
            let _g = no_grad();
            for (i, slot) in numeric.iter_mut().enumerate() {
                let orig = p.data()[i];
                p.update_data(|d| d[i] = orig + FD_STEP);
                let plus = f().item().unwrap();
                p.update_data(|d| d[i] = orig - FD_STEP);
                let minus = f().item().unwrap();
                p.update_data(|d| d[i] = orig);
                *slot = (plus - minus) / (2.0 * FD_STEP);
            }
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        let rel = diff / na.max(nn).max(floor);
        worst = worst.max(rel);
        checked += p.numel();
    }
    GradReport {
        worst_relative: worst,
        checked,
    }
}
