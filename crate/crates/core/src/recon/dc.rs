//! Closed-form data-consistency updates.

use num_complex::Complex64;

use crate::complex::CoilStack;
use crate::error::{Error, Result};
use crate::mri::{fft2c, ifft2c, SamplingMask};

/// k-space update: unsampled locations keep `k`, sampled ones become
/// `(f + lambda k) / (1 + lambda)`; `lambda = 0` copies `f` exactly.
pub fn dc_kspace(k: &CoilStack, f: &CoilStack, mask: &SamplingMask, lambda: f64) -> Result<CoilStack> {
    k.check_same_dims(f)?;
    mask.check_dims(k.height(), k.width())?;
    if !(lambda >= 0.0) {
        return Err(Error::Parameter(format!("data-consistency weight must be >= 0, got {lambda}")));
    }
    let n = k.plane_len();
    let inv = 1.0 / (1.0 + lambda);
    let mut out = k.clone();
    for (i, (z, &m)) in out.data_mut().iter_mut().zip(f.data()).enumerate() {
        if mask.is_sampled(i % n) {
            *z = if lambda == 0.0 {
                m
            } else {
                (m + *z * lambda) * Complex64::new(inv, 0.0)
            };
        }
    }
    Ok(out)
}

/// Image-space update: transform, apply [`dc_kspace`], transform back.
/// Returns the images and the consistent k-space they came from.
pub fn dc_image_with_kspace(
    images: &CoilStack,
    f: &CoilStack,
    mask: &SamplingMask,
    lambda: f64,
) -> Result<(CoilStack, CoilStack)> {
    let k = dc_kspace(&fft2c(images), f, mask, lambda)?;
    Ok((ifft2c(&k), k))
}

pub fn dc_image(images: &CoilStack, f: &CoilStack, mask: &SamplingMask, lambda: f64) -> Result<CoilStack> {
    Ok(dc_image_with_kspace(images, f, mask, lambda)?.0)
}
