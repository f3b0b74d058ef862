//! Homography estimation from manual correspondences (normalized DLT) and
//! inverse-mapped bilinear image warping.

use std::path::Path;

use nalgebra::{DMatrix, Matrix3, Vector3};
use ndarray::{Array2, Array3};

use crate::error::{PolarError, Result};

/// 3x3 projective transform, normalized so the bottom-right entry is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if m.determinant().abs() <= 1e-12 {
            return Err(PolarError::SingularHomography);
        }
        if m[(2, 2)].abs() <= 1e-12 {
            return Err(PolarError::SingularHomography);
        }
        Ok(Self(m / m[(2, 2)]))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Result<Homography> {
        let inv = self.0.try_inverse().ok_or(PolarError::SingularHomography)?;
        Homography::from_matrix(inv)
    }

    /// Map a point (x, y) through the transform.
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let v = self.0 * Vector3::new(x, y, 1.0);
        (v[0] / v[2], v[1] / v[2])
    }
}

/// Hartley normalization: translate the centroid to the origin and scale the
/// mean distance to sqrt(2).
fn normalizing_transform(pts: &[(f64, f64)]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mean_dist = pts
        .iter()
        .map(|p| ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    let s = if mean_dist > 0.0 { std::f64::consts::SQRT_2 / mean_dist } else { 1.0 };
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

/// Normalized DLT from at least four correspondences.
pub fn estimate_homography(src: &[(f64, f64)], dst: &[(f64, f64)]) -> Result<Homography> {
    if src.len() != dst.len() {
        return Err(PolarError::DimensionMismatch("point list lengths differ".into()));
    }
    if src.len() < 4 {
        return Err(PolarError::NotEnoughPoints(src.len()));
    }
    let t_src = normalizing_transform(src);
    let t_dst = normalizing_transform(dst);
    let norm = |t: &Matrix3<f64>, p: &(f64, f64)| {
        let v = t * Vector3::new(p.0, p.1, 1.0);
        (v[0], v[1])
    };
    let n = src.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 9);
    for (i, (ps, pd)) in src.iter().zip(dst.iter()).enumerate() {
        let (x, y) = norm(&t_src, ps);
        let (u, v) = norm(&t_dst, pd);
        let r = 2 * i;
        a[(r, 0)] = -x;
        a[(r, 1)] = -y;
        a[(r, 2)] = -1.0;
        a[(r, 6)] = u * x;
        a[(r, 7)] = u * y;
        a[(r, 8)] = u;
        a[(r + 1, 3)] = -x;
        a[(r + 1, 4)] = -y;
        a[(r + 1, 5)] = -1.0;
        a[(r + 1, 6)] = v * x;
        a[(r + 1, 7)] = v * y;
        a[(r + 1, 8)] = v;
    }
    // smallest-eigenvalue direction of A^T A (the 9-dim normal matrix always
    // carries the full right singular basis, unlike a thin SVD of A)
    let ata = a.transpose() * &a;
    let eig = nalgebra::SymmetricEigen::new(ata);
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let (smallest, second, largest) = (order[0], order[1], order[8]);
    // rank of A must be 8: a unique null direction, everything else well away
    // from zero
    if eig.eigenvalues[second].max(0.0) <= 1e-14 * eig.eigenvalues[largest].abs() {
        return Err(PolarError::DegenerateConfiguration);
    }
    let h_vec = eig.eigenvectors.column(smallest);
    let h_norm = Matrix3::new(
        h_vec[0], h_vec[1], h_vec[2], h_vec[3], h_vec[4], h_vec[5], h_vec[6], h_vec[7], h_vec[8],
    );
    let t_dst_inv = t_dst.try_inverse().ok_or(PolarError::DegenerateConfiguration)?;
    Homography::from_matrix(t_dst_inv * h_norm * t_src)
}

/// Inverse-mapped bilinear warp. Output pixel centers (x, y) map through the
/// inverse into the source; samples outside the source yield 0 and a false
/// coverage flag.
pub fn warp_image(
    img: &Array3<f64>,
    h: &Homography,
    out_dims: (usize, usize),
) -> Result<(Array3<f64>, Array2<bool>)> {
    let inv = h.inverse()?;
    let (c, src_h, src_w) = img.dim();
    let (out_h, out_w) = out_dims;
    let mut out = Array3::<f64>::zeros((c, out_h, out_w));
    let mut coverage = Array2::<bool>::from_elem((out_h, out_w), false);
    for i in 0..out_h {
        for j in 0..out_w {
            let (mut sx, mut sy) = inv.apply(j as f64, i as f64);
            // snap coordinates a rounding error outside the domain back onto
            // the border so a numerically-estimated identity stays lossless
            const EPS: f64 = 1e-9;
            if sx > -EPS && sx < src_w as f64 - 1.0 + EPS {
                sx = sx.clamp(0.0, src_w as f64 - 1.0);
            }
            if sy > -EPS && sy < src_h as f64 - 1.0 + EPS {
                sy = sy.clamp(0.0, src_h as f64 - 1.0);
            }
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let (x0, y0) = (x0 as isize, y0 as isize);
            let x1 = if fx == 0.0 { x0 } else { x0 + 1 };
            let y1 = if fy == 0.0 { y0 } else { y0 + 1 };
            let inside = x0 >= 0
                && y0 >= 0
                && (x1 as usize) < src_w
                && (y1 as usize) < src_h
                && x1 >= 0
                && y1 >= 0;
            if !inside {
                continue;
            }
            coverage[(i, j)] = true;
            let (x0, y0, x1, y1) = (x0 as usize, y0 as usize, x1 as usize, y1 as usize);
            for ch in 0..c {
                let v00 = img[(ch, y0, x0)];
                let v01 = img[(ch, y0, x1)];
                let v10 = img[(ch, y1, x0)];
                let v11 = img[(ch, y1, x1)];
                out[(ch, i, j)] = v00 * (1.0 - fx) * (1.0 - fy)
                    + v01 * fx * (1.0 - fy)
                    + v10 * (1.0 - fx) * fy
                    + v11 * fx * fy;
            }
        }
    }
    Ok((out, coverage))
}

/// Parse a correspondence file: one `sx sy dx dy` quadruple per line, `#`
/// starts a comment, blank lines ignored.
pub fn parse_correspondences(text: &str) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    let mut src = Vec::new();
    let mut dst = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| PolarError::Parse(format!("line {}: bad number {t:?}", lineno + 1))))
            .collect::<Result<_>>()?;
        if vals.len() != 4 {
            return Err(PolarError::Parse(format!("line {}: expected 4 values, got {}", lineno + 1, vals.len())));
        }
        src.push((vals[0], vals[1]));
        dst.push((vals[2], vals[3]));
    }
    Ok((src, dst))
}

pub fn load_correspondences(path: impl AsRef<Path>) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    parse_correspondences(&std::fs::read_to_string(path)?)
}
