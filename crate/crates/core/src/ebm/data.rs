//! Conversion of single-coil complex images into network training samples.

use kiebm_grad::{RealTensor, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::complex::ComplexTensor;
use crate::ebm::model::Domain;
use crate::error::{shape_err, Error, Result};
use crate::mri::{fft2c, WeightMatrix};

/// Image-domain samples: each plane as a 2-channel item divided by `scale`.
pub fn image_samples<T: Scalar>(images: &[ComplexTensor], scale: f64) -> Result<RealTensor<T>> {
    stack(images, |img| img.to_channels(scale))
}

/// Weighted-k-space samples: `w * fft2c(image)`, each scaled to unit peak
/// magnitude.
pub fn kspace_samples<T: Scalar>(images: &[ComplexTensor], weight: &WeightMatrix) -> Result<RealTensor<T>> {
    stack(images, |img| {
        let kw = weight.apply(&fft2c(img))?;
        let peak = kw.max_abs();
        if !(peak > 0.0) {
            return Err(Error::Numerical("weighted k-space sample is identically zero".into()));
        }
        kw.to_channels(peak)
    })
}

/// Samples for `domain`; `weight` is required for the k-space domain.
pub fn domain_samples<T: Scalar>(
    domain: Domain,
    images: &[ComplexTensor],
    weight: Option<&WeightMatrix>,
    image_scale: f64,
) -> Result<RealTensor<T>> {
    match domain {
        Domain::Image => image_samples(images, image_scale),
        Domain::WeightedKspace => {
            let w = weight.ok_or_else(|| Error::Config("k-space samples need a weight matrix".into()))?;
            kspace_samples(images, w)
        }
    }
}

fn stack<T: Scalar>(
    images: &[ComplexTensor],
    f: impl Fn(&ComplexTensor) -> Result<RealTensor<T>>,
) -> Result<RealTensor<T>> {
    if images.is_empty() {
        return Err(Error::Parameter("no training images".into()));
    }
    let mut parts = Vec::new();
    for img in images {
        if img.planes() != 1 {
            return shape_err(format!("training images must be single planes, got {}", img.planes()));
        }
        parts.push(f(img)?);
    }
    let refs: Vec<&RealTensor<T>> = parts.iter().collect();
    Ok(RealTensor::concat_batch(&refs)?)
}

/// Toy two-mode dataset of 8x8 2-channel items: two Gaussian blobs on the
/// real channel, on one diagonal or the other, with random brightness.
pub fn two_blob_images<T: Scalar>(count: usize, seed: u64) -> RealTensor<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(count * 128);
    for _ in 0..count {
        let centres = if rng.gen_bool(0.5) { [(2.0, 2.0), (5.0, 5.0)] } else { [(2.0, 5.0), (5.0, 2.0)] };
        let amp: f64 = rng.gen_range(0.6..0.9);
        for i in 0..64 {
            let (y, x) = ((i / 8) as f64, (i % 8) as f64);
            let s: f64 = centres
                .iter()
                .map(|(cy, cx): &(f64, f64)| (-((y - cy).powi(2) + (x - cx).powi(2)) / 1.5).exp())
                .sum();
            data.push(T::from_f64_lossy(amp * s));
        }
        data.extend(std::iter::repeat(T::zero()).take(64));
    }
    RealTensor::new([count, 2, 8, 8], data).expect("length matches shape")
}
