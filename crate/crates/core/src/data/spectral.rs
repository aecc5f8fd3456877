//! Thin FFT wrappers for the pseudo-spectral solvers and random-field
//! synthesis. The operator blocks deliberately do not use these; they have
//! their own explicit transform matrices. Here speed matters (fine solver
//! grids), so rustfft does the work.
//!
//! Conventions: forward transforms are unnormalized; inverse transforms are
//! unnormalized too (callers divide by the grid size when they need the
//! analysis/synthesis pair). Signed integer frequencies follow the usual
//! wrap: index `i` maps to `i` for `i <= n/2`, else `i - n`.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Signed frequency of bin `i` on an `n`-point axis.
pub fn signed_freq(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Forward/inverse FFT pair for one length, with scratch reused across calls.
pub struct FftAxis {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl FftAxis {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        FftAxis {
            n,
            fwd,
            inv,
            scratch: vec![Complex::default(); scratch_len],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    /// In-place unnormalized forward transform of one line.
    pub fn forward(&mut self, line: &mut [Complex<f64>]) {
        debug_assert_eq!(line.len(), self.n);
        self.fwd.process_with_scratch(line, &mut self.scratch);
    }

    /// In-place unnormalized inverse transform of one line.
    pub fn inverse(&mut self, line: &mut [Complex<f64>]) {
        debug_assert_eq!(line.len(), self.n);
        self.inv.process_with_scratch(line, &mut self.scratch);
    }
}

/// FFT over both axes of a row-major `m x m` complex grid.
pub struct Fft2 {
    m: usize,
    axis: FftAxis,
    column: Vec<Complex<f64>>,
}

impl Fft2 {
    pub fn new(m: usize) -> Self {
        Fft2 {
            m,
            axis: FftAxis::new(m),
            column: vec![Complex::default(); m],
        }
    }

    pub fn len(&self) -> usize {
        self.m
    }

    fn transform(&mut self, grid: &mut [Complex<f64>], inverse: bool) {
        let m = self.m;
        debug_assert_eq!(grid.len(), m * m);
        for row in grid.chunks_exact_mut(m) {
            if inverse {
                self.axis.inverse(row);
            } else {
                self.axis.forward(row);
            }
        }
        for c in 0..m {
            for r in 0..m {
                self.column[r] = grid[r * m + c];
            }
            if inverse {
                self.axis.inverse(&mut self.column);
            } else {
                self.axis.forward(&mut self.column);
            }
            for r in 0..m {
                grid[r * m + c] = self.column[r];
            }
        }
    }

    /// Unnormalized forward transform over rows then columns.
    pub fn forward(&mut self, grid: &mut [Complex<f64>]) {
        self.transform(grid, false);
    }

    /// Unnormalized inverse transform; divide by `m*m` for synthesis.
    pub fn inverse(&mut self, grid: &mut [Complex<f64>]) {
        self.transform(grid, true);
    }
}

/// Zeroes every coefficient whose signed frequency magnitude exceeds
/// `n/3` on a 1D spectrum (the 2/3 dealiasing rule).
pub fn dealias_1d(spec: &mut [Complex<f64>]) {
    let n = spec.len();
    let cutoff = n as i64 / 3;
    for (i, v) in spec.iter_mut().enumerate() {
        if signed_freq(i, n).abs() > cutoff {
            *v = Complex::default();
        }
    }
}

/// 2/3-rule dealiasing on an `m x m` spectrum (either axis over cutoff).
pub fn dealias_2d(spec: &mut [Complex<f64>], m: usize) {
    let cutoff = m as i64 / 3;
    for r in 0..m {
        let fr = signed_freq(r, m).abs();
        for c in 0..m {
            if fr > cutoff || signed_freq(c, m).abs() > cutoff {
                spec[r * m + c] = Complex::default();
            }
        }
    }
}
