//! File formats: 16-bit grayscale PNG, raw `f32` sidecars, heat maps, atomic writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::raster::Image;

/// Writes via a temporary sibling and a rename so readers never see partial files.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_path(path);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

fn image_err(path: &Path, e: image::ImageError) -> Error {
    Error::Data(format!("{}: {e}", path.display()))
}

/// Values in `[0, 1]` map linearly onto `0..=65535` (clamped).
pub fn write_png16(path: &Path, img: &Image) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_fn(img.width as u32, img.height as u32, |x, y| {
            let v = img.get(y as usize, x as usize).clamp(0.0, 1.0);
            Luma([(v * 65535.0).round() as u16])
        });
    let tmp = tmp_path(path);
    buf.save_with_format(&tmp, image::ImageFormat::Png)
        .map_err(|e| image_err(path, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_png(path: &Path) -> Result<Image> {
    let dynimg = image::open(path).map_err(|e| image_err(path, e))?;
    let gray = dynimg.to_luma16();
    let (w, h) = gray.dimensions();
    let data = gray.pixels().map(|p| p.0[0] as f64 / 65535.0).collect();
    Image::new(h as usize, w as usize, data)
}

pub fn png_dimensions(path: &Path) -> Result<(usize, usize)> {
    let (w, h) = image::image_dimensions(path).map_err(|e| image_err(path, e))?;
    Ok((h as usize, w as usize))
}

/// Raw little-endian `f32` samples, row-major, no header.
pub fn write_f32(path: &Path, img: &Image) -> Result<()> {
    let bytes: Vec<u8> = img.data.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    write_atomic(path, &bytes)
}

pub fn read_f32(path: &Path, height: usize, width: usize) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != 4 * height * width {
        return Err(Error::Data(format!(
            "{}: expected {} bytes for {height}x{width}, found {}",
            path.display(),
            4 * height * width,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Image::new(height, width, data)
}

/// Prefers the lossless `.f32` sidecar beside a PNG, falling back to the PNG itself.
pub fn read_image(png: &Path) -> Result<Image> {
    let sidecar = png.with_extension("f32");
    if sidecar.exists() {
        let (h, w) = png_dimensions(png)?;
        read_f32(&sidecar, h, w)
    } else {
        read_png(png)
    }
}

/// Writes `<stem>.png` and `<stem>.f32`.
pub fn write_image_pair(stem: &Path, img: &Image) -> Result<()> {
    write_png16(&stem.with_extension("png"), img)?;
    write_f32(&stem.with_extension("f32"), img)
}

/// Min-max normalized 8-bit grayscale.
pub fn write_png8_normalized(path: &Path, img: &Image) -> Result<()> {
    let (lo, hi) = img
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_fn(img.width as u32, img.height as u32, |x, y| {
            Luma([(((img.get(y as usize, x as usize) - lo) / span) * 255.0).round() as u8])
        });
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| image_err(path, e))
}

/// Heat map of a matrix, `cell`-pixel squares, blue (low) to red (high).
pub fn write_heatmap(path: &Path, rows: &[Vec<f64>], cell: u32) -> Result<()> {
    let h = rows.len();
    let w = rows.first().map_or(0, |r| r.len());
    let (lo, hi) = rows
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_fn(w as u32 * cell, h as u32 * cell, |x, y| {
            let t = (rows[(y / cell) as usize][(x / cell) as usize] - lo) / span;
            let r = (255.0 * t).round() as u8;
            let b = (255.0 * (1.0 - t)).round() as u8;
            let g = (255.0 * (1.0 - (2.0 * t - 1.0).abs())).round() as u8;
            Rgb([r, g, b])
        });
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| image_err(path, e))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}
