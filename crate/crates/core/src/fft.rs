//! Small 2-D FFT helper on top of rustfft, double precision.

use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Next size >= n whose prime factors are all in {2, 3, 5}.
pub fn good_fft_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut k = m;
        for f in [2usize, 3, 5] {
            while k % f == 0 {
                k /= f;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}

/// Cached forward/inverse plans for a fixed (rows, cols) complex 2-D FFT.
pub struct Fft2d {
    rows: usize,
    cols: usize,
    fwd_row: Arc<dyn Fft<f64>>,
    inv_row: Arc<dyn Fft<f64>>,
    fwd_col: Arc<dyn Fft<f64>>,
    inv_col: Arc<dyn Fft<f64>>,
}

impl Fft2d {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            fwd_row: planner.plan_fft_forward(cols),
            inv_row: planner.plan_fft_inverse(cols),
            fwd_col: planner.plan_fft_forward(rows),
            inv_col: planner.plan_fft_inverse(rows),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn transform(&self, buf: &mut Array2<Complex<f64>>, row_plan: &Arc<dyn Fft<f64>>, col_plan: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(buf.dim(), (self.rows, self.cols));
        for mut row in buf.rows_mut() {
            let s = row.as_slice_mut().expect("row-major buffer");
            row_plan.process(s);
        }
        let mut col = vec![Complex::default(); self.rows];
        for j in 0..self.cols {
            for i in 0..self.rows {
                col[i] = buf[(i, j)];
            }
            col_plan.process(&mut col);
            for i in 0..self.rows {
                buf[(i, j)] = col[i];
            }
        }
    }

    pub fn forward(&self, buf: &mut Array2<Complex<f64>>) {
        self.transform(buf, &self.fwd_row, &self.fwd_col);
    }

    /// Inverse transform including the 1/(rows*cols) scale.
    pub fn inverse(&self, buf: &mut Array2<Complex<f64>>) {
        self.transform(buf, &self.inv_row, &self.inv_col);
        let scale = 1.0 / (self.rows * self.cols) as f64;
        buf.mapv_inplace(|v| v * scale);
    }
}
