//! Centered, orthonormal 2-D Fourier transforms (DC at `(h/2, w/2)`).

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

use crate::complex::ComplexTensor;

#[inline]
fn fftshift_src(i: usize, n: usize) -> usize {
    (i + n - n / 2) % n
}

#[inline]
fn ifftshift_src(i: usize, n: usize) -> usize {
    (i + n / 2) % n
}

struct Plan2 {
    rows: Arc<dyn Fft<f64>>,
    cols: Arc<dyn Fft<f64>>,
}

fn plan(h: usize, w: usize, dir: FftDirection) -> Plan2 {
    let mut planner = FftPlanner::new();
    Plan2 {
        rows: planner.plan_fft(w, dir),
        cols: planner.plan_fft(h, dir),
    }
}

fn transform_plane(src: &[Complex64], dst: &mut [Complex64], h: usize, w: usize, p: &Plan2, scratch: &mut Vec<Complex64>) {
    let mut buf: Vec<Complex64> = (0..h * w)
        .map(|i| {
            let (y, x) = (i / w, i % w);
            src[ifftshift_src(y, h) * w + ifftshift_src(x, w)]
        })
        .collect();
    scratch.resize(p.rows.get_inplace_scratch_len().max(p.cols.get_inplace_scratch_len()), Complex64::default());
    for row in buf.chunks_mut(w) {
        p.rows.process_with_scratch(row, scratch);
    }
    let mut col = vec![Complex64::default(); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = buf[y * w + x];
        }
        p.cols.process_with_scratch(&mut col, scratch);
        for y in 0..h {
            buf[y * w + x] = col[y];
        }
    }
    let norm = 1.0 / ((h * w) as f64).sqrt();
    for y in 0..h {
        for x in 0..w {
            dst[y * w + x] = buf[fftshift_src(y, h) * w + fftshift_src(x, w)] * norm;
        }
    }
}

fn transform(x: &ComplexTensor, dir: FftDirection) -> ComplexTensor {
    let (c, h, w) = x.dims();
    let mut out = ComplexTensor::zeros(c, h, w);
    if h == 0 || w == 0 {
        return out;
    }
    let p = plan(h, w, dir);
    let mut scratch = Vec::new();
    for i in 0..c {
        transform_plane(x.plane(i), out.plane_mut(i), h, w, &p, &mut scratch);
    }
    out
}

/// Centered orthonormal forward transform, applied to every plane.
pub fn fft2c(x: &ComplexTensor) -> ComplexTensor {
    transform(x, FftDirection::Forward)
}

/// Inverse of [`fft2c`].
pub fn ifft2c(x: &ComplexTensor) -> ComplexTensor {
    transform(x, FftDirection::Inverse)
}

/// Centered integer frequency of array index `i` along an axis of length `n`:
/// values in `[-n/2, n/2)` (for even `n`) with 0 at index `n/2`.
pub fn centered_freq(i: usize, n: usize) -> i64 {
    i as i64 - (n / 2) as i64
}
