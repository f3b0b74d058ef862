//! PTF on-disk tensor format.
//!
//! Layout: 4-byte magic `PTF1`, `ndim` as u32 LE, `ndim` dimension sizes as
//! u32 LE, then the payload as IEEE-754 f32 LE in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use crate::error::{PolarError, Result};
use crate::tensor::{Measurement, PolarizationMask, PolarizationStack, Psf, ANGLES3, ANGLES4};

const MAGIC: [u8; 4] = *b"PTF1";

pub fn save_tensor(t: &ArrayD<f64>, path: impl AsRef<Path>) -> Result<()> {
    if t.ndim() == 0 {
        return Err(PolarError::ZeroDimensionalTensor);
    }
    for &d in t.shape() {
        if d > u32::MAX as usize {
            return Err(PolarError::DimOverflow(d));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&(t.ndim() as u32).to_le_bytes())?;
    for &d in t.shape() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for &v in t.iter() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<ArrayD<f64>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| PolarError::TruncatedPayload)?;
    if magic != MAGIC {
        return Err(PolarError::BadMagic);
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4).map_err(|_| PolarError::TruncatedPayload)?;
    let ndim = u32::from_le_bytes(buf4) as usize;
    if ndim == 0 {
        return Err(PolarError::ZeroDimensionalTensor);
    }
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        r.read_exact(&mut buf4).map_err(|_| PolarError::TruncatedPayload)?;
        dims.push(u32::from_le_bytes(buf4) as usize);
    }
    let len: usize = dims.iter().product();
    let mut payload = vec![0u8; len * 4];
    r.read_exact(&mut payload).map_err(|_| PolarError::TruncatedPayload)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(PolarError::Parse("trailing bytes after payload".into()));
    }
    let mut data = Vec::with_capacity(len);
    for chunk in payload.chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        if !v.is_finite() {
            return Err(PolarError::NonFinite);
        }
        data.push(v);
    }
    ArrayD::from_shape_vec(IxDyn(&dims), data)
        .map_err(|e| PolarError::Parse(e.to_string()))
}

// Typed wrappers: PTF carries only dims, so the caller supplies the tensor
// kind and angle labels follow the standard 3/4-angle convention.

pub fn save_stack(s: &PolarizationStack, path: impl AsRef<Path>) -> Result<()> {
    save_tensor(&s.data().clone().into_dyn(), path)
}

pub fn load_stack(path: impl AsRef<Path>) -> Result<PolarizationStack> {
    let t = load_tensor(path)?;
    let t4 = t
        .into_dimensionality::<ndarray::Ix4>()
        .map_err(|_| PolarError::InvalidDims("stack PTF must be 4-dimensional".into()))?;
    let labels = match t4.dim().0 {
        3 => ANGLES3.to_vec(),
        4 => ANGLES4.to_vec(),
        p => return Err(PolarError::InvalidDims(format!("stack angle count {p}"))),
    };
    PolarizationStack::new(t4, labels)
}

pub fn save_psf(p: &Psf, path: impl AsRef<Path>) -> Result<()> {
    save_tensor(&p.data().clone().into_dyn(), path)
}

pub fn load_psf(path: impl AsRef<Path>) -> Result<Psf> {
    let t = load_tensor(path)?;
    let t3 = t
        .into_dimensionality::<ndarray::Ix3>()
        .map_err(|_| PolarError::InvalidDims("PSF PTF must be 3-dimensional".into()))?;
    Psf::new(t3)
}

pub fn save_mask(m: &PolarizationMask, path: impl AsRef<Path>) -> Result<()> {
    save_tensor(&m.data().clone().into_dyn(), path)
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<PolarizationMask> {
    let t = load_tensor(path)?;
    let t3 = t
        .into_dimensionality::<ndarray::Ix3>()
        .map_err(|_| PolarError::InvalidDims("mask PTF must be 3-dimensional".into()))?;
    PolarizationMask::new(t3)
}

pub fn save_measurement(m: &Measurement, path: impl AsRef<Path>) -> Result<()> {
    save_tensor(&m.data().clone().into_dyn(), path)
}

pub fn load_measurement(path: impl AsRef<Path>) -> Result<Measurement> {
    let t = load_tensor(path)?;
    let t3 = t
        .into_dimensionality::<ndarray::Ix3>()
        .map_err(|_| PolarError::InvalidDims("measurement PTF must be 3-dimensional".into()))?;
    Measurement::new(t3, 0.0)
}
