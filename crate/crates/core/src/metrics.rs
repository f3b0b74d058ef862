//! PSNR and SSIM with per-plane aggregation by arithmetic mean over the
//! (channel, angle) planes.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{PolarError, Result};
use crate::tensor::PolarizationStack;

/// PSNR values above this are reported as the cap (zero-MSE sentinel).
pub const PSNR_CAP_DB: f64 = 100.0;

pub fn psnr(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, peak: f64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(PolarError::DimensionMismatch(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    if peak <= 0.0 {
        return Err(PolarError::InvalidDims("peak must be positive".into()));
    }
    let n = a.len() as f64;
    let mse = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in w.iter_mut().enumerate() {
        *v = (-(i as f64 - c).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// Symmetric boundary index (edge values repeated under reflection).
fn sym(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Separable Gaussian filtering with symmetric padding.
fn gauss_filter(img: ArrayView2<'_, f64>) -> Array2<f64> {
    let (h, w) = img.dim();
    let win = gaussian_window();
    let r = (SSIM_WINDOW / 2) as isize;
    let mut rows = Array2::<f64>::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for (k, &wk) in win.iter().enumerate() {
                acc += wk * img[(i, sym(j as isize + k as isize - r, w))];
            }
            rows[(i, j)] = acc;
        }
    }
    let mut out = Array2::<f64>::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for (k, &wk) in win.iter().enumerate() {
                acc += wk * rows[(sym(i as isize + k as isize - r, h), j)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03 and symmetric boundary handling.
pub fn ssim(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, peak: f64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(PolarError::DimensionMismatch(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    let (h, w) = a.dim();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(PolarError::ImageTooSmall);
    }
    let c1 = (SSIM_K1 * peak).powi(2);
    let c2 = (SSIM_K2 * peak).powi(2);
    let mu_a = gauss_filter(a);
    let mu_b = gauss_filter(b);
    let aa = gauss_filter((&a * &a).view());
    let bb = gauss_filter((&b * &b).view());
    let ab = gauss_filter((&a.to_owned() * &b).view());
    let mut total = 0.0;
    for i in 0..h {
        for j in 0..w {
            let (ma, mb) = (mu_a[(i, j)], mu_b[(i, j)]);
            let va = aa[(i, j)] - ma * ma;
            let vb = bb[(i, j)] - mb * mb;
            let cov = ab[(i, j)] - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    Ok(total / (h * w) as f64)
}

#[derive(Debug, Clone)]
pub struct MetricReport {
    /// (plane label, PSNR in dB capped at 100, SSIM).
    pub planes: Vec<(String, f64, f64)>,
    pub aggregate_psnr: f64,
    pub aggregate_ssim: f64,
    pub peak: f64,
}

impl MetricReport {
    /// CSV with header `plane,psnr_db,ssim` and a final aggregate row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("plane,psnr_db,ssim\n");
        for (label, p, s) in &self.planes {
            out.push_str(&format!("{label},{p},{s}\n"));
        }
        out.push_str(&format!("aggregate,{},{}\n", self.aggregate_psnr, self.aggregate_ssim));
        out
    }
}

/// Per-(channel, angle)-plane PSNR/SSIM, aggregated by arithmetic mean:
/// 3 planes in the grayscale three-angle configuration, 12 in the RGB
/// four-angle configuration.
pub fn evaluate_stack(pred: &PolarizationStack, gt: &PolarizationStack, peak: f64) -> Result<MetricReport> {
    if pred.dims() != gt.dims() {
        return Err(PolarError::DimensionMismatch(format!("{:?} vs {:?}", pred.dims(), gt.dims())));
    }
    let (p, c, _, _) = pred.dims();
    let mut planes = Vec::with_capacity(p * c);
    for ci in 0..c {
        for pi in 0..p {
            let a = pred.data().index_axis(Axis(0), pi);
            let a = a.index_axis(Axis(0), ci);
            let b = gt.data().index_axis(Axis(0), pi);
            let b = b.index_axis(Axis(0), ci);
            let psnr_db = psnr(a, b, peak)?.min(PSNR_CAP_DB);
            let ssim_v = ssim(a, b, peak)?;
            let label = format!("c{ci}_a{}", gt.angle_labels()[pi]);
            planes.push((label, psnr_db, ssim_v));
        }
    }
    let n = planes.len() as f64;
    Ok(MetricReport {
        aggregate_psnr: planes.iter().map(|(_, p, _)| p).sum::<f64>() / n,
        aggregate_ssim: planes.iter().map(|(_, _, s)| s).sum::<f64>() / n,
        planes,
        peak,
    })
}
