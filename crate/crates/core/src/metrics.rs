//! PSNR and SSIM on real magnitude images.

use serde::{Deserialize, Serialize};

use crate::complex::RealImage;
use crate::error::{Error, Result};

/// Value returned by [`psnr`] for identical images.
pub const PSNR_CAP_DB: f64 = 200.0;

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub ssim: f64,
    pub data_range: f64,
}

impl MetricReport {
    /// Single-line `key=value` record.
    pub fn to_record(&self) -> String {
        format!(
            "psnr_db={:.6} ssim={:.8} data_range={:.6}",
            self.psnr_db, self.ssim, self.data_range
        )
    }
}

fn check(x: &RealImage, reference: &RealImage, data_range: f64) -> Result<()> {
    x.check_same_dims(reference)?;
    if !(data_range > 0.0) {
        return Err(Error::Parameter(format!("data range must be > 0, got {data_range}")));
    }
    Ok(())
}

/// `10 log10(range^2 / MSE)`, capped at [`PSNR_CAP_DB`].
pub fn psnr(x: &RealImage, reference: &RealImage, data_range: f64) -> Result<f64> {
    check(x, reference, data_range)?;
    let n = x.data().len().max(1) as f64;
    let mse = x
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (data_range * data_range / mse).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window() -> Vec<f64> {
    let c = (WINDOW / 2) as f64;
    let g: Vec<f64> = (0..WINDOW)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SIGMA * SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian filtering over valid 11x11 windows.
fn filter_valid(img: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let (ho, wo) = (h - WINDOW + 1, w - WINDOW + 1);
    let mut rows = vec![0.0; h * wo];
    for y in 0..h {
        for x in 0..wo {
            rows[y * wo + x] = (0..WINDOW).map(|k| g[k] * img[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; ho * wo];
    for y in 0..ho {
        for x in 0..wo {
            out[y * wo + x] = (0..WINDOW).map(|k| g[k] * rows[(y + k) * wo + x]).sum();
        }
    }
    out
}

/// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5,
/// K1 = 0.01, K2 = 0.03), averaged over all fully contained windows.
pub fn ssim(x: &RealImage, reference: &RealImage, data_range: f64) -> Result<f64> {
    check(x, reference, data_range)?;
    let (h, w) = (x.height(), x.width());
    if h < WINDOW || w < WINDOW {
        return Err(Error::Parameter(format!(
            "SSIM needs at least {WINDOW}x{WINDOW} pixels, image is {h}x{w}"
        )));
    }
    let g = gaussian_window();
    let a = x.data();
    let b = reference.data();
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(p, q)| p * q).collect();
    let mu_a = filter_valid(a, h, w, &g);
    let mu_b = filter_valid(b, h, w, &g);
    let e_aa = filter_valid(&aa, h, w, &g);
    let e_bb = filter_valid(&bb, h, w, &g);
    let e_ab = filter_valid(&ab, h, w, &g);
    let c1 = (K1 * data_range).powi(2);
    let c2 = (K2 * data_range).powi(2);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / mu_a.len() as f64)
}

/// PSNR and SSIM with `data_range = max(reference)`.
pub fn evaluate(x: &RealImage, reference: &RealImage) -> Result<MetricReport> {
    let data_range = reference.max();
    if !(data_range > 0.0) {
        return Err(Error::Parameter("reference image has no positive intensity".into()));
    }
    Ok(MetricReport {
        psnr_db: psnr(x, reference, data_range)?,
        ssim: ssim(x, reference, data_range)?,
        data_range,
    })
}
