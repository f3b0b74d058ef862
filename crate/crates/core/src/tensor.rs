//! Core tensor types shared by the forward model, solvers and tooling.
//!
//! Layout convention: stacks are `(angle, channel, row, column)` row-major so
//! that each per-(angle, channel) 2-D plane is contiguous for FFT work.
//! On-disk payloads are single precision; in-memory arithmetic is double.

use ndarray::{Array2, Array3, Array4, ArrayView2};

use crate::error::{PolarError, Result};

/// Angle labels for a three-angle configuration.
pub const ANGLES3: [u32; 3] = [0, 45, 90];
/// Angle labels for a four-angle configuration.
pub const ANGLES4: [u32; 4] = [0, 45, 90, 135];

fn check_finite<'a>(mut it: impl Iterator<Item = &'a f64>) -> Result<()> {
    if it.any(|v| !v.is_finite()) {
        Err(PolarError::NonFinite)
    } else {
        Ok(())
    }
}

/// Multi-angle polarization intensity stack `x`, axes `(P, C, H, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationStack {
    data: Array4<f64>,
    angle_labels: Vec<u32>,
}

impl PolarizationStack {
    pub fn new(data: Array4<f64>, angle_labels: Vec<u32>) -> Result<Self> {
        let (p, c, h, w) = data.dim();
        if h == 0 || w == 0 {
            return Err(PolarError::InvalidDims("empty spatial dims".into()));
        }
        if c != 1 && c != 3 {
            return Err(PolarError::InvalidDims(format!("channels must be 1 or 3, got {c}")));
        }
        if p != 3 && p != 4 {
            return Err(PolarError::InvalidDims(format!("angles must be 3 or 4, got {p}")));
        }
        if angle_labels.len() != p {
            return Err(PolarError::InvalidDims("angle label count != angle planes".into()));
        }
        if !angle_labels.windows(2).all(|w| w[0] < w[1]) {
            return Err(PolarError::InvalidDims("angle labels not strictly increasing".into()));
        }
        let allowed: &[u32] = if p == 3 { &ANGLES3 } else { &ANGLES4 };
        if angle_labels != allowed {
            return Err(PolarError::InvalidDims(format!("unsupported angle labels {angle_labels:?}")));
        }
        check_finite(data.iter())?;
        Ok(Self { data, angle_labels })
    }

    /// Zero stack with the standard labels for the given angle count.
    pub fn zeros(angles: usize, channels: usize, height: usize, width: usize) -> Result<Self> {
        let labels = match angles {
            3 => ANGLES3.to_vec(),
            4 => ANGLES4.to_vec(),
            _ => return Err(PolarError::InvalidDims(format!("angles must be 3 or 4, got {angles}"))),
        };
        Self::new(Array4::zeros((angles, channels, height, width)), labels)
    }

    pub fn data(&self) -> &Array4<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array4<f64> {
        self.data
    }

    pub fn angle_labels(&self) -> &[u32] {
        &self.angle_labels
    }

    pub fn angles(&self) -> usize {
        self.data.dim().0
    }

    pub fn channels(&self) -> usize {
        self.data.dim().1
    }

    pub fn height(&self) -> usize {
        self.data.dim().2
    }

    pub fn width(&self) -> usize {
        self.data.dim().3
    }

    /// `(P, C, H, W)`
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        self.data.dim()
    }

    pub fn plane(&self, angle: usize, channel: usize) -> ArrayView2<'_, f64> {
        self.data.slice(ndarray::s![angle, channel, .., ..])
    }

    /// Index of the plane carrying the given angle label, if present.
    pub fn angle_index(&self, degrees: u32) -> Option<usize> {
        self.angle_labels.iter().position(|&a| a == degrees)
    }

    /// Clamp all values to `>= 0` (used for ground-truth and final estimates
    /// flagged non-negative).
    pub fn clamp_nonneg(mut self) -> Self {
        self.data.mapv_inplace(|v| v.max(0.0));
        self
    }
}

/// Per-channel diffuser point-spread function `k_c`, axes `(C, H, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Psf {
    data: Array3<f64>,
}

impl Psf {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        let (c, h, w) = data.dim();
        if h == 0 || w == 0 {
            return Err(PolarError::InvalidDims("empty PSF dims".into()));
        }
        if c != 1 && c != 3 {
            return Err(PolarError::InvalidDims(format!("PSF channels must be 1 or 3, got {c}")));
        }
        check_finite(data.iter())?;
        if data.iter().any(|&v| v < 0.0) {
            return Err(PolarError::InvalidDims("PSF values must be >= 0".into()));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn channels(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }

    pub fn channel(&self, c: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(ndarray::Axis(0), c)
    }

    /// Collapse an RGB PSF to grayscale by channel mean.
    pub fn to_grayscale(&self) -> Psf {
        let (c, h, w) = self.data.dim();
        let mut out = Array2::<f64>::zeros((h, w));
        for ch in 0..c {
            out += &self.channel(ch);
        }
        out /= c as f64;
        Psf { data: out.insert_axis(ndarray::Axis(0)) }
    }

    /// True if every channel sums to 1 within `tol`.
    pub fn is_normalized(&self, tol: f64) -> bool {
        (0..self.channels()).all(|c| (self.channel(c).sum() - 1.0).abs() <= tol)
    }
}

/// L1-normalize each PSF channel to unit sum.
pub fn normalize_psf(psf: &Psf) -> Result<Psf> {
    let mut data = psf.data.clone();
    for c in 0..psf.channels() {
        let mut plane = data.index_axis_mut(ndarray::Axis(0), c);
        let s = plane.sum();
        if s <= 0.0 {
            return Err(PolarError::DegeneratePsf);
        }
        plane.mapv_inplace(|v| v / s);
    }
    Ok(Psf { data })
}

/// Binary angle selector `S_p`, axes `(P, H, W)`. Per pixel exactly one angle
/// is selected.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationMask {
    data: Array3<f64>,
}

impl PolarizationMask {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        let (p, h, w) = data.dim();
        if h == 0 || w == 0 {
            return Err(PolarError::InvalidDims("empty mask dims".into()));
        }
        if p != 3 && p != 4 {
            return Err(PolarError::InvalidDims(format!("mask angles must be 3 or 4, got {p}")));
        }
        if data.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(PolarError::MaskPartition);
        }
        for i in 0..h {
            for j in 0..w {
                let s: f64 = (0..p).map(|a| data[(a, i, j)]).sum();
                if s != 1.0 {
                    return Err(PolarError::MaskPartition);
                }
            }
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn angles(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }

    pub fn plane(&self, angle: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(ndarray::Axis(0), angle)
    }
}

/// Captured or simulated sensor image `y`, axes `(C, H, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    data: Array3<f64>,
    noise_sigma: f64,
}

impl Measurement {
    pub fn new(data: Array3<f64>, noise_sigma: f64) -> Result<Self> {
        let (_, h, w) = data.dim();
        if h == 0 || w == 0 {
            return Err(PolarError::InvalidDims("empty measurement dims".into()));
        }
        if !noise_sigma.is_finite() || noise_sigma < 0.0 {
            return Err(PolarError::InvalidDims("noise_sigma must be finite and >= 0".into()));
        }
        check_finite(data.iter())?;
        Ok(Self { data, noise_sigma })
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array3<f64> {
        self.data
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn channels(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }

    pub fn channel(&self, c: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(ndarray::Axis(0), c)
    }
}
