//! Image-quality and overlap metrics, plus the subvoxel-shift deringing baseline.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::phase_shift;
use crate::raster::Image;
use crate::tensor::elementwise::sigmoid;

fn same_dims(op: &'static str, a: &Image, b: &Image) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::shape(op, &[a.height, a.width], &[b.height, b.width]));
    }
    Ok(())
}

/// `10·log10(peak² / MSE)` after clamping both images to `[0, peak]`.
/// Identical images give `+∞`.
pub fn psnr(pred: &Image, target: &Image, peak: f64) -> Result<f64> {
    same_dims("psnr", pred, target)?;
    if !(peak > 0.0) {
        return Err(Error::invalid("psnr", format!("peak must be positive, got {peak}")));
    }
    let n = pred.data.len().max(1) as f64;
    let mse = pred
        .data
        .iter()
        .zip(&target.data)
        .map(|(&p, &t)| {
            let d = p.clamp(0.0, peak) - t.clamp(0.0, peak);
            d * d
        })
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Isotropic total variation with forward differences and a replicated border.
pub fn total_variation(img: &Image) -> f64 {
    let (h, w) = img.dims();
    let mut tv = 0.0;
    for y in 0..h {
        for x in 0..w {
            let v = img.get(y, x);
            let dx = if x + 1 < w { img.get(y, x + 1) - v } else { 0.0 };
            let dy = if y + 1 < h { img.get(y + 1, x) - v } else { 0.0 };
            tv += (dx * dx + dy * dy).sqrt();
        }
    }
    tv
}

/// Pixel counts behind IoU and F1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overlap {
    pub intersection: usize,
    pub predicted: usize,
    pub actual: usize,
}

impl Overlap {
    pub fn of(pred: &[bool], truth: &[bool]) -> Self {
        let mut o = Overlap {
            intersection: 0,
            predicted: 0,
            actual: 0,
        };
        for (&p, &g) in pred.iter().zip(truth) {
            o.predicted += p as usize;
            o.actual += g as usize;
            o.intersection += (p && g) as usize;
        }
        o
    }

    pub fn iou(&self) -> f64 {
        let union = self.predicted + self.actual - self.intersection;
        if union == 0 {
            1.0
        } else {
            self.intersection as f64 / union as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let total = self.predicted + self.actual;
        if total == 0 {
            1.0
        } else {
            2.0 * self.intersection as f64 / total as f64
        }
    }
}

/// `sigmoid(logit) > threshold`.
pub fn binarize_logits(logits: &Image, threshold: f64) -> Vec<bool> {
    logits.data.iter().map(|&l| sigmoid(l) > threshold).collect()
}

pub fn binarize_mask(mask: &Image) -> Vec<bool> {
    mask.data.iter().map(|&v| v >= 0.5).collect()
}

fn overlap(pred_logits: &Image, mask: &Image, threshold: f64) -> Result<Overlap> {
    same_dims("overlap", pred_logits, mask)?;
    Ok(Overlap::of(
        &binarize_logits(pred_logits, threshold),
        &binarize_mask(mask),
    ))
}

/// Intersection over union; two empty masks score 1.
pub fn iou(pred_logits: &Image, mask: &Image, threshold: f64) -> Result<f64> {
    Ok(overlap(pred_logits, mask, threshold)?.iou())
}

/// Dice / F1 overlap; two empty masks score 1.
pub fn f1(pred_logits: &Image, mask: &Image, threshold: f64) -> Result<f64> {
    Ok(overlap(pred_logits, mask, threshold)?.f1())
}

/// Per-image values of one metric with their summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub name: String,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
}

impl MetricReport {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        let count = values.len();
        let (mean, std) = mean_std(&values);
        MetricReport {
            name: name.into(),
            values,
            mean,
            std,
            count,
        }
    }
}

/// Mean and population standard deviation. A list of identical values
/// (including all `+∞`) has zero spread.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.iter().all(|&v| v == values[0]) {
        return (values[0], 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KellnerParams {
    /// Shifts are `s / (2M)` pixels for `s ∈ [−M, M]`.
    pub shifts: usize,
    /// Nearest neighbour distance in the local TV window.
    pub min_window: usize,
    /// Farthest neighbour distance in the local TV window.
    pub max_window: usize,
}

impl Default for KellnerParams {
    fn default() -> Self {
        KellnerParams {
            shifts: 20,
            min_window: 1,
            max_window: 3,
        }
    }
}

/// Local subvoxel-shift deringing applied along rows and along columns; the
/// two passes are averaged.
pub fn kellner_dering(img: &Image, params: KellnerParams) -> Result<Image> {
    if img.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "kellner_dering input".into(),
        });
    }
    if params.shifts == 0 || params.min_window == 0 || params.min_window > params.max_window {
        return Err(Error::invalid("kellner_dering", format!("bad parameters {params:?}")));
    }
    let mut planner = FftPlanner::new();
    let rows = unring_rows(img, params, &mut planner);
    let cols = unring_rows(&img.transpose(), params, &mut planner).transpose();
    Ok(Image {
        height: img.height,
        width: img.width,
        data: rows.data.iter().zip(&cols.data).map(|(a, b)| 0.5 * (a + b)).collect(),
    })
}

fn unring_rows(img: &Image, params: KellnerParams, planner: &mut FftPlanner<f64>) -> Image {
    let mut out = img.clone();
    for y in 0..img.height {
        let row = &img.data[y * img.width..(y + 1) * img.width];
        let fixed = unring_line(row, params, planner);
        out.data[y * img.width..(y + 1) * img.width].copy_from_slice(&fixed);
    }
    out
}

/// Shifted copies sample the signal at `l + δ`; each sample takes the copy
/// whose one-sided local variation is smallest, then is interpolated back by `−δ`.
pub fn unring_line(line: &[f64], params: KellnerParams, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = line.len();
    if n < 3 {
        return line.to_vec();
    }
    let m = params.shifts as isize;
    let at = |v: &[f64], i: isize| v[i.rem_euclid(n as isize) as usize];
    let mut best_tv = vec![f64::INFINITY; n];
    let mut best_shift = vec![0.0; n];
    let mut best_vals = vec![[0.0; 3]; n];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for s in -m..=m {
        let delta = s as f64 / (2 * m) as f64;
        for (b, &v) in buf.iter_mut().zip(line) {
            *b = Complex::new(v, 0.0);
        }
        if s != 0 {
            phase_shift(&mut buf, delta, planner);
        }
        let g: Vec<f64> = buf.iter().map(|c| c.re).collect();
        for l in 0..n as isize {
            let (mut left, mut right) = (0.0, 0.0);
            for t in params.min_window as isize..=params.max_window as isize {
                left += (at(&g, l - t + 1) - at(&g, l - t)).abs();
                right += (at(&g, l + t - 1) - at(&g, l + t)).abs();
            }
            let tv = left.min(right);
            let li = l as usize;
            if tv < best_tv[li] {
                best_tv[li] = tv;
                best_shift[li] = delta;
                best_vals[li] = [at(&g, l - 1), g[li], at(&g, l + 1)];
            }
        }
    }
    (0..n)
        .map(|l| {
            let d = best_shift[l];
            let [prev, here, next] = best_vals[l];
            if d > 0.0 {
                (1.0 - d) * here + d * prev
            } else {
                (1.0 + d) * here - d * next
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_closed_forms() {
        let t = Image::filled(4, 4, 0.5);
        assert_eq!(psnr(&t, &t, 1.0).unwrap(), f64::INFINITY);
        let p = Image::filled(4, 4, 0.6);
        assert!((psnr(&p, &t, 1.0).unwrap() - 20.0).abs() < 1e-9);
        let zero = Image::zeros(4, 4);
        let one = Image::filled(4, 4, 1.0);
        assert!(psnr(&zero, &one, 1.0).unwrap().abs() < 1e-12);
        assert!(psnr(&zero, &Image::zeros(3, 4), 1.0).is_err());
    }

    #[test]
    fn tv_hand_evaluated() {
        let img = Image::new(2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(total_variation(&img), 2.0);
        assert_eq!(total_variation(&Image::filled(5, 3, 0.3)), 0.0);
    }

    #[test]
    fn overlap_half_versus_full() {
        let pred = Image::from_fn(8, 8, |_, x| if x < 4 { 10.0 } else { -10.0 });
        let full = Image::filled(8, 8, 1.0);
        assert!((iou(&pred, &full, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((f1(&pred, &full, 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let empty = Image::zeros(8, 8);
        let none = Image::filled(8, 8, -5.0);
        assert_eq!(iou(&none, &empty, 0.5).unwrap(), 1.0);
        assert_eq!(f1(&none, &empty, 0.5).unwrap(), 1.0);
        assert_eq!(iou(&pred, &empty, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn report_summary() {
        let r = MetricReport::new("psnr", vec![1.0, 2.0, 3.0]);
        assert_eq!(r.count, 3);
        assert!((r.mean - 2.0).abs() < 1e-15);
        assert!((r.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let inf = MetricReport::new("psnr", vec![f64::INFINITY; 2]);
        assert_eq!((inf.mean, inf.std), (f64::INFINITY, 0.0));
    }

    #[test]
    fn kellner_keeps_constants() {
        let img = Image::filled(9, 12, 0.37);
        let out = kellner_dering(&img, KellnerParams::default()).unwrap();
        for v in out.data {
            assert!((v - 0.37).abs() < 1e-12);
        }
        let mut bad = img.clone();
        bad.data[3] = f64::NAN;
        assert!(kellner_dering(&bad, KellnerParams::default()).is_err());
    }
}
