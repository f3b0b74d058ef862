//! The linear forward operator: per-channel 2-D convolution with the diffuser
//! PSF, centered crop back to sensor size, and binary angle masking summed
//! over polarization planes. The adjoint reverses the chain: mask, zero-pad
//! at the same centered offset, correlate with the PSF, crop to scene size.
//!
//! Convolution is zero-padded linear convolution evaluated in the Fourier
//! domain on a grid of at least (H + Hk - 1, W + Wk - 1), rounded up to a
//! 5-smooth size.

use ndarray::{Array2, Array3, Array4, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;

use crate::error::{PolarError, Result};
use crate::fft::{good_fft_size, Fft2d};
use crate::tensor::{Measurement, PolarizationMask, PolarizationStack, Psf, ANGLES3, ANGLES4};

pub struct ForwardOperator {
    psf: Psf,
    mask: PolarizationMask,
    fft: Fft2d,
    /// Frequency-domain PSF per channel on the padded grid.
    psf_spec: Vec<Array2<Complex<f64>>>,
    crop_row: usize,
    crop_col: usize,
}

impl ForwardOperator {
    pub fn new(psf: Psf, mask: PolarizationMask) -> Result<Self> {
        let (h, w) = (mask.height(), mask.width());
        let (hk, wk) = (psf.height(), psf.width());
        let pad_h = good_fft_size(h + hk - 1);
        let pad_w = good_fft_size(w + wk - 1);
        let fft = Fft2d::new(pad_h, pad_w);
        let mut psf_spec = Vec::with_capacity(psf.channels());
        for c in 0..psf.channels() {
            let mut buf = Array2::<Complex<f64>>::zeros((pad_h, pad_w));
            for i in 0..hk {
                for j in 0..wk {
                    buf[(i, j)] = Complex::new(psf.channel(c)[(i, j)], 0.0);
                }
            }
            fft.forward(&mut buf);
            psf_spec.push(buf);
        }
        Ok(Self {
            psf,
            mask,
            fft,
            psf_spec,
            crop_row: (hk - 1) / 2,
            crop_col: (wk - 1) / 2,
        })
    }

    /// `(H, W, C, P)` of the scene the operator acts on.
    pub fn scene_dims(&self) -> (usize, usize, usize, usize) {
        (self.mask.height(), self.mask.width(), self.psf.channels(), self.mask.angles())
    }

    pub fn mask(&self) -> &PolarizationMask {
        &self.mask
    }

    pub fn psf(&self) -> &Psf {
        &self.psf
    }

    fn angle_labels(&self) -> Vec<u32> {
        if self.mask.angles() == 3 {
            ANGLES3.to_vec()
        } else {
            ANGLES4.to_vec()
        }
    }

    /// Convolve one scene plane with the channel PSF and take the centered
    /// H x W window of the full linear convolution.
    fn conv_crop(&self, plane: ArrayView2<'_, f64>, c: usize) -> Array2<f64> {
        let (h, w) = (self.mask.height(), self.mask.width());
        let mut buf = Array2::<Complex<f64>>::zeros((self.fft.rows(), self.fft.cols()));
        for i in 0..h {
            for j in 0..w {
                buf[(i, j)] = Complex::new(plane[(i, j)], 0.0);
            }
        }
        self.fft.forward(&mut buf);
        buf.zip_mut_with(&self.psf_spec[c], |a, b| *a *= b);
        self.fft.inverse(&mut buf);
        Array2::from_shape_fn((h, w), |(i, j)| buf[(i + self.crop_row, j + self.crop_col)].re)
    }

    /// Adjoint of `conv_crop`: embed at the centered crop offset and
    /// correlate with the channel PSF (valid window at the origin).
    fn corr_pad(&self, plane: &Array2<f64>, c: usize) -> Array2<f64> {
        let (h, w) = (self.mask.height(), self.mask.width());
        let mut buf = Array2::<Complex<f64>>::zeros((self.fft.rows(), self.fft.cols()));
        for i in 0..h {
            for j in 0..w {
                buf[(i + self.crop_row, j + self.crop_col)] = Complex::new(plane[(i, j)], 0.0);
            }
        }
        self.fft.forward(&mut buf);
        buf.zip_mut_with(&self.psf_spec[c], |a, b| *a *= b.conj());
        self.fft.inverse(&mut buf);
        Array2::from_shape_fn((h, w), |(i, j)| buf[(i, j)].re)
    }

    /// Forward model on raw data, axes `(P, C, H, W)` -> `(C, H, W)`.
    pub fn apply_raw(&self, x: &Array4<f64>) -> Array3<f64> {
        let (p, c, h, w) = x.dim();
        debug_assert_eq!((h, w, c, p), {
            let (sh, sw, sc, sp) = self.scene_dims();
            (sh, sw, sc, sp)
        });
        // plane convolutions in parallel, combined in fixed (c, p) order
        let planes: Vec<Array2<f64>> = (0..c * p)
            .into_par_iter()
            .map(|idx| {
                let (ci, pi) = (idx / p, idx % p);
                self.conv_crop(x.index_axis(Axis(0), pi).index_axis(Axis(0), ci), ci)
            })
            .collect();
        let mut y = Array3::<f64>::zeros((c, h, w));
        for ci in 0..c {
            let mut out = y.index_axis_mut(Axis(0), ci);
            for pi in 0..p {
                let conv = &planes[ci * p + pi];
                let m = self.mask.plane(pi);
                out.zip_mut_with(&(&m * conv), |a, b| *a += b);
            }
        }
        y
    }

    /// Adjoint on raw data, axes `(C, H, W)` -> `(P, C, H, W)`.
    pub fn adjoint_raw(&self, y: &Array3<f64>) -> Array4<f64> {
        let (_, _, c, p) = {
            let d = self.scene_dims();
            (d.0, d.1, d.2, d.3)
        };
        let (h, w) = (self.mask.height(), self.mask.width());
        let planes: Vec<Array2<f64>> = (0..c * p)
            .into_par_iter()
            .map(|idx| {
                let (ci, pi) = (idx / p, idx % p);
                let masked = &self.mask.plane(pi) * &y.index_axis(Axis(0), ci);
                self.corr_pad(&masked, ci)
            })
            .collect();
        let mut x = Array4::<f64>::zeros((p, c, h, w));
        for ci in 0..c {
            for pi in 0..p {
                x.index_axis_mut(Axis(0), pi)
                    .index_axis_mut(Axis(0), ci)
                    .assign(&planes[ci * p + pi]);
            }
        }
        x
    }

    fn check_scene(&self, x: &PolarizationStack) -> Result<()> {
        let (sh, sw, sc, sp) = self.scene_dims();
        let (p, c, h, w) = x.dims();
        if (h, w, c, p) != (sh, sw, sc, sp) {
            return Err(PolarError::DimensionMismatch(format!(
                "scene {:?} vs operator {:?}",
                (h, w, c, p),
                (sh, sw, sc, sp)
            )));
        }
        Ok(())
    }

    fn check_measurement(&self, y: &Measurement) -> Result<()> {
        let (sh, sw, sc, _) = self.scene_dims();
        if (y.channels(), y.height(), y.width()) != (sc, sh, sw) {
            return Err(PolarError::DimensionMismatch(format!(
                "measurement {:?} vs operator {:?}",
                (y.channels(), y.height(), y.width()),
                (sc, sh, sw)
            )));
        }
        Ok(())
    }
}

pub fn forward_apply(op: &ForwardOperator, x: &PolarizationStack) -> Result<Measurement> {
    op.check_scene(x)?;
    Measurement::new(op.apply_raw(x.data()), 0.0)
}

pub fn adjoint_apply(op: &ForwardOperator, y: &Measurement) -> Result<PolarizationStack> {
    op.check_measurement(y)?;
    PolarizationStack::new(op.adjoint_raw(y.data()), op.angle_labels())
}

/// Explicit dense matrix of the forward map, `(H*W*C) x (H*W*C*P)`. Column j
/// is the forward image of the j-th standard basis stack (row-major
/// `(P, C, H, W)` order); measurement rows are row-major `(C, H, W)`.
pub fn build_dense_operator(op: &ForwardOperator) -> Result<Array2<f64>> {
    let (h, w, c, p) = op.scene_dims();
    let n = h * w * c * p;
    if n > 65536 {
        return Err(PolarError::SizeGuard(n));
    }
    let m = h * w * c;
    let mut dense = Array2::<f64>::zeros((m, n));
    let mut basis = Array4::<f64>::zeros((p, c, h, w));
    for j in 0..n {
        *basis.as_slice_mut().unwrap().get_mut(j).unwrap() = 1.0;
        let y = op.apply_raw(&basis);
        for (i, v) in y.iter().enumerate() {
            dense[(i, j)] = *v;
        }
        *basis.as_slice_mut().unwrap().get_mut(j).unwrap() = 0.0;
    }
    Ok(dense)
}

fn l2_norm(x: &Array4<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Power iteration on A^T A from a seeded uniform start. Returns the largest
/// eigenvalue estimate of A^T A, i.e. the Lipschitz constant of the gradient
/// of the least-squares data term.
pub fn estimate_lipschitz(op: &ForwardOperator, iters: usize, seed: u64) -> f64 {
    let (h, w, c, p) = op.scene_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array4::from_shape_fn((p, c, h, w), |_| rng.gen::<f64>());
    let mut lambda = 0.0;
    for _ in 0..iters.max(1) {
        let mut n = l2_norm(&x);
        if n == 0.0 {
            // start (or iterate) fell in the null space; restart
            x = Array4::from_shape_fn((p, c, h, w), |_| rng.gen::<f64>());
            n = l2_norm(&x);
        }
        x.mapv_inplace(|v| v / n);
        x = op.adjoint_raw(&op.apply_raw(&x));
        lambda = l2_norm(&x);
    }
    lambda
}
