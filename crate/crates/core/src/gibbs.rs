//! Truncation-artifact synthesis: 2-D Fourier transforms, centered k-space
//! cropping, and seedable geometric phantoms.
//!
//! Phantoms live on the unit square. A grid of `N` pixels samples position
//! `i / N` along an axis, each pixel being the box average of its footprint.
//! That is the sampling lattice trigonometric interpolation preserves, so a
//! k-space crop of a fine render lines up with a direct coarse render.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Image;

/// Complex 2-D array in natural (DC at index 0) layout unless stated otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    pub height: usize,
    pub width: usize,
    pub real: Vec<f64>,
    pub imag: Vec<f64>,
}

impl ComplexImage {
    pub fn from_real(img: &Image) -> Self {
        ComplexImage {
            height: img.height,
            width: img.width,
            real: img.data.clone(),
            imag: vec![0.0; img.data.len()],
        }
    }

    fn from_buffer(height: usize, width: usize, buf: &[Complex<f64>]) -> Self {
        ComplexImage {
            height,
            width,
            real: buf.iter().map(|c| c.re).collect(),
            imag: buf.iter().map(|c| c.im).collect(),
        }
    }

    fn buffer(&self) -> Vec<Complex<f64>> {
        self.real
            .iter()
            .zip(&self.imag)
            .map(|(&re, &im)| Complex::new(re, im))
            .collect()
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.real[i], self.imag[i])
    }

    pub fn real_part(&self) -> Image {
        Image {
            height: self.height,
            width: self.width,
            data: self.real.clone(),
        }
    }

    /// Moves DC to `(h/2, w/2)` (integer division); frequency `f` lands at `f + h/2`.
    pub fn centered(&self) -> Self {
        self.roll(self.height / 2, self.width / 2)
    }

    /// Inverse of [`ComplexImage::centered`].
    pub fn uncentered(&self) -> Self {
        self.roll(self.height - self.height / 2, self.width - self.width / 2)
    }

    fn roll(&self, dy: usize, dx: usize) -> Self {
        let (h, w) = (self.height, self.width);
        let mut out = ComplexImage {
            height: h,
            width: w,
            real: vec![0.0; h * w],
            imag: vec![0.0; h * w],
        };
        for y in 0..h {
            for x in 0..w {
                let src = y * w + x;
                let dst = ((y + dy) % h) * w + (x + dx) % w;
                out.real[dst] = self.real[src];
                out.imag[dst] = self.imag[src];
            }
        }
        out
    }
}

fn fft2_in_place(buf: &mut [Complex<f64>], h: usize, w: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    row_fft.process(buf);
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = buf[y * w + x];
        }
        col_fft.process(&mut column);
        for y in 0..h {
            buf[y * w + x] = column[y];
        }
    }
}

/// Unnormalized forward transform: `X[k,l] = Σ x[m,n] e^{-2πi(km/h + ln/w)}`.
pub fn dft2(img: &Image) -> ComplexImage {
    dft2_complex(&ComplexImage::from_real(img))
}

pub fn dft2_complex(x: &ComplexImage) -> ComplexImage {
    let mut buf = x.buffer();
    fft2_in_place(&mut buf, x.height, x.width, false);
    ComplexImage::from_buffer(x.height, x.width, &buf)
}

/// Inverse transform carrying the `1/(hw)` factor.
pub fn idft2(spectrum: &ComplexImage) -> ComplexImage {
    let (h, w) = (spectrum.height, spectrum.width);
    let mut buf = spectrum.buffer();
    fft2_in_place(&mut buf, h, w, true);
    let scale = 1.0 / (h * w) as f64;
    for c in &mut buf {
        *c *= scale;
    }
    ComplexImage::from_buffer(h, w, &buf)
}

/// Keeps the central `h × w` block of the spectrum and returns the real part of
/// its inverse, rescaled so that mean intensity is preserved.
///
/// When the parities of the two sizes differ the kept band includes an
/// unpaired Nyquist bin; the small imaginary residue it creates is discarded.
pub fn kspace_crop(img: &Image, h: usize, w: usize) -> Result<Image> {
    let (big_h, big_w) = img.dims();
    if h == 0 || w == 0 || h > big_h || w > big_w {
        return Err(Error::invalid(
            "kspace_crop",
            format!("cannot crop {big_h}x{big_w} spectrum to {h}x{w}"),
        ));
    }
    let spectrum = dft2(img).centered();
    let (y0, x0) = (big_h / 2 - h / 2, big_w / 2 - w / 2);
    let scale = (h * w) as f64 / (big_h * big_w) as f64;
    let mut cropped = ComplexImage {
        height: h,
        width: w,
        real: Vec::with_capacity(h * w),
        imag: Vec::with_capacity(h * w),
    };
    for y in 0..h {
        for x in 0..w {
            let (re, im) = spectrum.get(y0 + y, x0 + x);
            cropped.real.push(re * scale);
            cropped.imag.push(im * scale);
        }
    }
    Ok(idft2(&cropped.uncentered()).real_part())
}

/// Crop size for a canvas of `size`: 145 at 255, the same ratio elsewhere,
/// with parity matched to the canvas so the band stays symmetric.
pub fn default_crop(size: usize) -> usize {
    let mut c = (size as f64 * 145.0 / 255.0).round() as usize;
    if c % 2 != size % 2 {
        c += 1;
    }
    c.clamp(1, size)
}

/// Applies a sub-pixel translation along a 1-D complex signal with the shift
/// theorem: the result samples the trigonometric interpolant at `n + delta`.
pub fn phase_shift(signal: &mut [Complex<f64>], delta: f64, planner: &mut FftPlanner<f64>) {
    let n = signal.len();
    if n == 0 {
        return;
    }
    planner.plan_fft_forward(n).process(signal);
    for (k, c) in signal.iter_mut().enumerate() {
        // signed frequency; the Nyquist bin of an even length counts as negative
        let f = if 2 * k < n { k as f64 } else { k as f64 - n as f64 };
        let phase = 2.0 * std::f64::consts::PI * f * delta / n as f64;
        *c *= Complex::from_polar(1.0 / n as f64, phase);
    }
    planner.plan_fft_inverse(n).process(signal);
}

/// One primitive of a phantom, in unit-square coordinates (`x` across, `y` down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Ellipse {
        cx: f64,
        cy: f64,
        rx: f64,
        ry: f64,
        angle: f64,
        value: f64,
    },
    Rect {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
        value: f64,
    },
}

impl Shape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Ellipse {
                cx, cy, rx, ry, angle, ..
            } => {
                let (s, c) = angle.sin_cos();
                let (dx, dy) = (x - cx, y - cy);
                let u = (c * dx + s * dy) / rx;
                let v = (-s * dx + c * dy) / ry;
                u * u + v * v <= 1.0
            }
            Shape::Rect { x0, y0, x1, y1, .. } => x >= x0 && x < x1 && y >= y0 && y < y1,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Shape::Ellipse { value, .. } | Shape::Rect { value, .. } => value,
        }
    }
}

/// Shapes painted in order over a constant background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phantom {
    pub background: f64,
    pub shapes: Vec<Shape>,
}

impl Phantom {
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        self.shapes
            .iter()
            .rev()
            .find(|s| s.contains(x, y))
            .map_or(self.background, Shape::value)
    }

    /// Box-filtered render with `ss × ss` samples per pixel.
    ///
    /// Samples follow an n-rooks pattern: every sample has its own row and
    /// column offset, so axis-aligned edges are resolved to `1/ss²` of a pixel
    /// instead of `1/ss`.
    pub fn render(&self, height: usize, width: usize, ss: usize) -> Image {
        let ss = ss.max(1);
        let n = ss as f64;
        let norm = 1.0 / (ss * ss) as f64;
        Image::from_fn(height, width, |i, j| {
            let mut acc = 0.0;
            for a in 0..ss {
                for b in 0..ss {
                    let dy = (a as f64 + (b as f64 + 0.5) / n) / n - 0.5;
                    let dx = (b as f64 + (a as f64 + 0.5) / n) / n - 0.5;
                    let y = (i as f64 + dy) / height as f64;
                    let x = (j as f64 + dx) / width as f64;
                    acc += self.value_at(x, y);
                }
            }
            acc * norm
        })
    }

    /// Union of all shapes, tested at pixel centres.
    pub fn mask(&self, height: usize, width: usize) -> Image {
        Image::from_fn(height, width, |i, j| {
            let (y, x) = (i as f64 / height as f64, j as f64 / width as f64);
            if self.shapes.iter().any(|s| s.contains(x, y)) {
                1.0
            } else {
                0.0
            }
        })
    }
}

pub const MIN_SUPERSAMPLE: usize = 4;

/// Samples per pixel side: at least [`MIN_SUPERSAMPLE`] and enough for 512
/// samples across the axis, so area quadrature stays accurate on small canvases.
pub fn supersample_for(pixels: usize) -> usize {
    MIN_SUPERSAMPLE.max(512usize.div_ceil(pixels.max(1)))
}

/// Recipe for random phantoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    /// Full-resolution canvas `[H, W]`.
    pub size: [usize; 2],
    /// Reduced resolution `[h', w']` after the k-space crop.
    pub crop: [usize; 2],
    /// Inclusive range of ellipse counts.
    pub ellipses: [usize; 2],
    /// Inclusive range of rectangle counts.
    pub rects: [usize; 2],
    /// Shape intensities are drawn from this range.
    pub intensity: [f64; 2],
    pub background: f64,
    /// Additive Gaussian noise on segmentation images.
    pub noise: f64,
    pub seed: u64,
}

impl PhantomSpec {
    /// Enhancement phantoms on an `S × S` canvas cropped to [`default_crop`].
    pub fn enhance(size: usize, seed: u64) -> Self {
        let c = default_crop(size);
        PhantomSpec {
            size: [size, size],
            crop: [c, c],
            ellipses: [1, 3],
            rects: [1, 2],
            intensity: [0.3, 1.0],
            background: 0.0,
            noise: 0.0,
            seed,
        }
    }

    /// Segmentation blobs on an `S × S` canvas; `crop` is unused.
    pub fn segment(size: usize, seed: u64) -> Self {
        PhantomSpec {
            size: [size, size],
            crop: [size, size],
            ellipses: [1, 3],
            rects: [0, 1],
            intensity: [0.55, 0.9],
            background: 0.2,
            noise: 0.05,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        PhantomSpec { seed, ..self.clone() }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.ellipses[0] <= self.ellipses[1]
            && self.rects[0] <= self.rects[1]
            && self.intensity[0] <= self.intensity[1]
            && (0.0..=1.0).contains(&self.intensity[0])
            && (0.0..=1.0).contains(&self.intensity[1])
            && (0.0..=1.0).contains(&self.background)
            && self.noise >= 0.0
            && self.size.iter().all(|&s| s >= 2)
            && self.crop.iter().all(|&c| c >= 1);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("phantom", format!("inconsistent spec {self:?}")))
        }
    }

    /// Draws shapes inside the central `[0.1, 0.9]²` square, clear of the
    /// periodic boundary.
    pub fn sample(&self) -> Result<Phantom> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n_ell = rng.random_range(self.ellipses[0]..=self.ellipses[1]);
        let n_rect = rng.random_range(self.rects[0]..=self.rects[1]);
        let value = |rng: &mut ChaCha8Rng| {
            if self.intensity[0] == self.intensity[1] {
                self.intensity[0]
            } else {
                rng.random_range(self.intensity[0]..=self.intensity[1])
            }
        };
        let mut shapes = Vec::with_capacity(n_ell + n_rect);
        for _ in 0..n_rect {
            let (hw, hh) = (rng.random_range(0.08..0.2), rng.random_range(0.08..0.2));
            let cx = rng.random_range(0.1 + hw..0.9 - hw);
            let cy = rng.random_range(0.1 + hh..0.9 - hh);
            shapes.push(Shape::Rect {
                x0: cx - hw,
                y0: cy - hh,
                x1: cx + hw,
                y1: cy + hh,
                value: value(&mut rng),
            });
        }
        for _ in 0..n_ell {
            let (rx, ry): (f64, f64) = (rng.random_range(0.07..0.22), rng.random_range(0.07..0.22));
            let r = rx.max(ry);
            let cx = rng.random_range(0.1 + r..0.9 - r);
            let cy = rng.random_range(0.1 + r..0.9 - r);
            shapes.push(Shape::Ellipse {
                cx,
                cy,
                rx,
                ry,
                angle: rng.random_range(0.0..std::f64::consts::PI),
                value: value(&mut rng),
            });
        }
        Ok(Phantom {
            background: self.background,
            shapes,
        })
    }
}

/// Degraded input and its reference, plus the phantom they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    pub input: Image,
    pub target: Image,
    pub phantom: Phantom,
}

/// `input` is the k-space crop of the full-size render; `target` is a
/// supersampled render made directly at the reduced size.
pub fn make_pair(spec: &PhantomSpec) -> Result<SamplePair> {
    let phantom = spec.sample()?;
    make_pair_from(&phantom, spec.size, spec.crop)
}

pub fn make_pair_from(phantom: &Phantom, size: [usize; 2], crop: [usize; 2]) -> Result<SamplePair> {
    let ss = |n: [usize; 2]| supersample_for(n[0].min(n[1]));
    let full = phantom.render(size[0], size[1], ss(size));
    let input = kspace_crop(&full, crop[0], crop[1])?;
    let target = phantom.render(crop[0], crop[1], ss(crop));
    Ok(SamplePair {
        input,
        target,
        phantom: phantom.clone(),
    })
}

/// `input` is a noisy point-sampled render clamped to `[0, 1]`; `target` is the
/// binary union mask. Both sides must be multiples of 16.
pub fn make_mask_pair(spec: &PhantomSpec) -> Result<SamplePair> {
    let phantom = spec.sample()?;
    make_mask_pair_from(&phantom, spec.size, spec.noise, spec.seed)
}

pub fn make_mask_pair_from(phantom: &Phantom, size: [usize; 2], noise: f64, seed: u64) -> Result<SamplePair> {
    let [h, w] = size;
    if h == 0 || w == 0 || h % 16 != 0 || w % 16 != 0 {
        return Err(Error::invalid(
            "make_mask_pair",
            format!("size {h}x{w} must be a positive multiple of 16"),
        ));
    }
    let mut input = phantom.render(h, w, 1);
    if noise > 0.0 {
        // decorrelate from the shape stream, which used the same seed
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let dist = Normal::new(0.0, noise).map_err(|e| Error::invalid("make_mask_pair", e.to_string()))?;
        for v in &mut input.data {
            *v = (*v + dist.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    Ok(SamplePair {
        input,
        target: phantom.mask(h, w),
        phantom: phantom.clone(),
    })
}
