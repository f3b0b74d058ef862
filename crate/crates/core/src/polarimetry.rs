//! Stokes components, DoLP and AoLP from four-angle intensity stacks, and
//! the 0/45/90 RGB-composite visualization.

use std::path::Path;

use ndarray::Array3;

use crate::error::{PolarError, Result};
use crate::png_io::save_png;
use crate::tensor::{PolarizationStack, ANGLES4};

/// Pixels with s0 at or below this are flagged degenerate (dolp = aolp = 0).
pub const S0_EPSILON: f64 = 1e-8;

/// Linear Stokes description per channel, axes `(C, H, W)`.
#[derive(Debug, Clone)]
pub struct StokesMap {
    pub s0: Array3<f64>,
    pub s1: Array3<f64>,
    pub s2: Array3<f64>,
    /// Degree of linear polarization in [0, 1].
    pub dolp: Array3<f64>,
    /// Angle of linear polarization in degrees, wrapped to [-90, 90).
    pub aolp: Array3<f64>,
    /// 1 where s0 <= epsilon and dolp/aolp are meaningless.
    pub degenerate: Array3<u8>,
}

/// s0 = (I0 + I45 + I90 + I135)/2, s1 = I0 - I90, s2 = I45 - I135.
pub fn stokes_from_intensities(x: &PolarizationStack) -> Result<StokesMap> {
    if x.angles() != 4 || x.angle_labels() != ANGLES4 {
        return Err(PolarError::InvalidDims("Stokes derivation requires angles (0,45,90,135)".into()));
    }
    let (_, c, h, w) = x.dims();
    let d = x.data();
    let mut s0 = Array3::zeros((c, h, w));
    let mut s1 = Array3::zeros((c, h, w));
    let mut s2 = Array3::zeros((c, h, w));
    let mut dolp = Array3::zeros((c, h, w));
    let mut aolp = Array3::zeros((c, h, w));
    let mut degenerate = Array3::zeros((c, h, w));
    for ci in 0..c {
        for i in 0..h {
            for j in 0..w {
                let (i0, i45, i90, i135) =
                    (d[(0, ci, i, j)], d[(1, ci, i, j)], d[(2, ci, i, j)], d[(3, ci, i, j)]);
                let v0 = 0.5 * (i0 + i45 + i90 + i135);
                let v1 = i0 - i90;
                let v2 = i45 - i135;
                s0[(ci, i, j)] = v0;
                s1[(ci, i, j)] = v1;
                s2[(ci, i, j)] = v2;
                if v0 <= S0_EPSILON {
                    degenerate[(ci, i, j)] = 1;
                } else {
                    dolp[(ci, i, j)] = ((v1 * v1 + v2 * v2).sqrt() / v0).min(1.0);
                    let mut a = 0.5 * v2.atan2(v1).to_degrees();
                    if a >= 90.0 {
                        a -= 180.0;
                    }
                    aolp[(ci, i, j)] = a;
                }
            }
        }
    }
    Ok(StokesMap { s0, s1, s2, dolp, aolp, degenerate })
}

/// Map the 0/45/90-degree planes of a grayscale stack to the R/G/B channels
/// of an 8-bit PNG, values clamped to [0,1].
pub fn composite_rgb_viz(x: &PolarizationStack, out: impl AsRef<Path>) -> Result<()> {
    if x.channels() != 1 {
        return Err(PolarError::InvalidDims("composite expects a grayscale stack".into()));
    }
    let planes: Vec<usize> = [0u32, 45, 90]
        .iter()
        .map(|&a| x.angle_index(a).ok_or(PolarError::MissingAngle(a)))
        .collect::<Result<_>>()?;
    let (_, _, h, w) = x.dims();
    let img = Array3::from_shape_fn((3, h, w), |(c, i, j)| x.data()[(planes[c], 0, i, j)]);
    save_png(&img, 8, out)
}
