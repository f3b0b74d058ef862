//! PNG import/export. Linear values map to/from [0,1] by dividing by the
//! maximum code value of the bit depth.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use ndarray::Array3;

use crate::error::{PolarError, Result};

/// Raw integer codes from a PNG, axes `(C, H, W)`, plus the source bit depth.
pub fn load_png_raw(path: impl AsRef<Path>) -> Result<(Array3<f64>, u32)> {
    let img = image::open(path)?;
    match img {
        DynamicImage::ImageLuma8(b) => {
            let (w, h) = b.dimensions();
            let a = Array3::from_shape_fn((1, h as usize, w as usize), |(_, i, j)| {
                b.get_pixel(j as u32, i as u32)[0] as f64
            });
            Ok((a, 8))
        }
        DynamicImage::ImageRgb8(b) => {
            let (w, h) = b.dimensions();
            let a = Array3::from_shape_fn((3, h as usize, w as usize), |(c, i, j)| {
                b.get_pixel(j as u32, i as u32)[c] as f64
            });
            Ok((a, 8))
        }
        DynamicImage::ImageLuma16(b) => {
            let (w, h) = b.dimensions();
            let a = Array3::from_shape_fn((1, h as usize, w as usize), |(_, i, j)| {
                b.get_pixel(j as u32, i as u32)[0] as f64
            });
            Ok((a, 16))
        }
        DynamicImage::ImageRgb16(b) => {
            let (w, h) = b.dimensions();
            let a = Array3::from_shape_fn((3, h as usize, w as usize), |(c, i, j)| {
                b.get_pixel(j as u32, i as u32)[c] as f64
            });
            Ok((a, 16))
        }
        _ => Err(PolarError::Parse("unsupported PNG pixel format".into())),
    }
}

/// Load a PNG and normalize to [0,1], axes `(C, H, W)`.
pub fn load_png(path: impl AsRef<Path>) -> Result<Array3<f64>> {
    let (raw, depth) = load_png_raw(path)?;
    let max = ((1u32 << depth) - 1) as f64;
    Ok(raw / max)
}

fn quantize(v: f64, max: f64) -> f64 {
    (v.clamp(0.0, 1.0) * max).round()
}

/// Write an image in [0,1], axes `(C, H, W)` with C in {1,3}, at the given
/// bit depth (8 or 16).
pub fn save_png(img: &Array3<f64>, bit_depth: u32, path: impl AsRef<Path>) -> Result<()> {
    let (c, h, w) = img.dim();
    let (h32, w32) = (h as u32, w as u32);
    match (c, bit_depth) {
        (1, 8) => {
            let buf = ImageBuffer::from_fn(w32, h32, |x, y| {
                Luma([quantize(img[(0, y as usize, x as usize)], 255.0) as u8])
            });
            buf.save(path)?;
        }
        (3, 8) => {
            let buf = ImageBuffer::from_fn(w32, h32, |x, y| {
                Rgb([0, 1, 2].map(|ch| quantize(img[(ch, y as usize, x as usize)], 255.0) as u8))
            });
            buf.save(path)?;
        }
        (1, 16) => {
            let buf = ImageBuffer::from_fn(w32, h32, |x, y| {
                Luma([quantize(img[(0, y as usize, x as usize)], 65535.0) as u16])
            });
            buf.save(path)?;
        }
        (3, 16) => {
            let buf = ImageBuffer::from_fn(w32, h32, |x, y| {
                Rgb([0, 1, 2].map(|ch| quantize(img[(ch, y as usize, x as usize)], 65535.0) as u16))
            });
            buf.save(path)?;
        }
        _ => {
            return Err(PolarError::InvalidDims(format!(
                "cannot write {c}-channel PNG at depth {bit_depth}"
            )))
        }
    }
    Ok(())
}
