//! Synthetic phantoms and multi-coil acquisition simulation.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

use crate::complex::{CoilStack, ComplexTensor, RealImage};
use crate::error::{Error, Result};
use crate::mri::coils::{apply_sensitivities, synth_sensitivities_rotated, SensitivityMaps};
use crate::mri::fft::{fft2c, ifft2c};
use crate::mri::mask::SamplingMask;

/// Ellipse `(intensity, semi-axis a, semi-axis b, x0, y0, angle in degrees)`.
type Ellipse = (f64, f64, f64, f64, f64, f64);

/// Modified (high-contrast) Shepp-Logan head.
const SHEPP_LOGAN: [Ellipse; 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

fn render(ellipses: &[Ellipse], height: usize, width: usize) -> Result<RealImage> {
    let mut img = RealImage::zeros(height, width);
    for &(a, ea, eb, x0, y0, deg) in ellipses {
        let (s, c) = deg.to_radians().sin_cos();
        for y in 0..height {
            let v = 1.0 - (2 * y + 1) as f64 / height as f64;
            for x in 0..width {
                let u = (2 * x + 1) as f64 / width as f64 - 1.0;
                let (du, dv) = (u - x0, v - y0);
                let xr = du * c + dv * s;
                let yr = -du * s + dv * c;
                if (xr / ea).powi(2) + (yr / eb).powi(2) <= 1.0 {
                    img.data_mut()[y * width + x] += a;
                }
            }
        }
    }
    for v in img.data_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(img)
}

/// Shepp-Logan phantom with intensities in `[0, 1]`.
pub fn shepp_logan(height: usize, width: usize) -> Result<RealImage> {
    render(&SHEPP_LOGAN, height, width)
}

/// Randomly perturbed Shepp-Logan variant (ellipse geometry and contrast
/// jittered, plus a few extra small features), intensities in `[0, 1]`.
pub fn random_phantom<R: Rng + ?Sized>(height: usize, width: usize, rng: &mut R) -> Result<RealImage> {
    let scale = rng.gen_range(0.8..1.0);
    let rot = rng.gen_range(-15.0f64..15.0);
    let (rs, rc) = rot.to_radians().sin_cos();
    let mut ellipses: Vec<Ellipse> = SHEPP_LOGAN
        .iter()
        .enumerate()
        .map(|(i, &(a, ea, eb, x0, y0, deg))| {
            let jitter = if i < 2 { 0.02 } else { 0.06 };
            let a = if i < 2 { a } else { a * rng.gen_range(0.5..1.5) };
            let x0 = x0 + rng.gen_range(-jitter..jitter);
            let y0 = y0 + rng.gen_range(-jitter..jitter);
            let ax = if i < 2 { 1.0 } else { rng.gen_range(0.8..1.2) };
            let bx = if i < 2 { 1.0 } else { rng.gen_range(0.8..1.2) };
            (
                a,
                ea * ax * scale,
                eb * bx * scale,
                (x0 * rc - y0 * rs) * scale,
                (x0 * rs + y0 * rc) * scale,
                deg + rot + if i < 2 { 0.0 } else { rng.gen_range(-10.0..10.0) },
            )
        })
        .collect();
    for _ in 0..rng.gen_range(0..4) {
        let r = rng.gen_range(0.03..0.1);
        ellipses.push((
            rng.gen_range(0.05..0.3),
            r * rng.gen_range(0.6..1.4),
            r,
            rng.gen_range(-0.35..0.35) * scale,
            rng.gen_range(-0.5..0.5) * scale,
            rng.gen_range(0.0..180.0),
        ));
    }
    render(&ellipses, height, width)
}

/// Single-coil training images: random phantoms modulated by one coil of a
/// randomly rotated synthetic coil array.
pub fn coil_image_dataset(count: usize, height: usize, width: usize, coils: usize, seed: u64) -> Result<Vec<ComplexTensor>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let img = random_phantom(height, width, &mut rng)?;
            let maps = synth_sensitivities_rotated(coils, height, width, rng.gen_range(0.0..2.0 * PI))?;
            let c = rng.gen_range(0..coils);
            let coil = apply_sensitivities(&ComplexTensor::from_real(&img), &maps)?;
            Ok(coil.plane_tensor(c))
        })
        .collect()
}

/// `f_c = M (F(S_c I) + n_c)` with circular complex Gaussian noise of
/// standard deviation `noise_sigma`; zero off the sampled set.
pub fn simulate_acquisition(
    image: &ComplexTensor,
    maps: &SensitivityMaps,
    mask: &SamplingMask,
    noise_sigma: f64,
    seed: u64,
) -> Result<CoilStack> {
    if !(noise_sigma >= 0.0) {
        return Err(Error::Parameter(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    mask.check_dims(image.height(), image.width())?;
    let mut k = fft2c(&apply_sensitivities(image, maps)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comp = noise_sigma / 2f64.sqrt();
    let n = k.plane_len();
    for (i, z) in k.data_mut().iter_mut().enumerate() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        if mask.is_sampled(i % n) {
            if noise_sigma > 0.0 {
                *z += Complex64::new(re * comp, im * comp);
            }
        } else {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    Ok(k)
}

/// Zeroes every unsampled location of every plane.
pub fn apply_mask(k: &CoilStack, mask: &SamplingMask) -> Result<CoilStack> {
    mask.check_dims(k.height(), k.width())?;
    let mut out = k.clone();
    let n = out.plane_len();
    for (i, z) in out.data_mut().iter_mut().enumerate() {
        if !mask.is_sampled(i % n) {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    Ok(out)
}

/// Per-coil zero-filled images `F^H f_c`.
pub fn zero_filled(k: &CoilStack) -> CoilStack {
    ifft2c(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mri::coils::{sos_combine, synth_sensitivities};
    use crate::mri::mask::{generate_mask, MaskKind, MaskSpec};

    #[test]
    fn shepp_logan_range_and_structure() {
        let p = shepp_logan(64, 64).unwrap();
        assert!(p.min() >= 0.0 && p.max() <= 1.0);
        assert_eq!(p.max(), 1.0);
        // corners lie outside the skull
        assert_eq!(p.get(0, 0), 0.0);
        // centre is brain tissue (1.0 - 0.8)
        assert!((p.get(32, 32) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn random_phantoms_vary_and_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_phantom(32, 32, &mut rng).unwrap();
        let b = random_phantom(32, 32, &mut rng).unwrap();
        assert_ne!(a, b);
        assert!(a.min() >= 0.0 && a.max() <= 1.0);
    }

    #[test]
    fn noiseless_full_sampling_single_unit_coil() {
        let img = ComplexTensor::from_real(&shepp_logan(16, 16).unwrap());
        let maps = SensitivityMaps::new(ComplexTensor::new(1, 16, 16, vec![Complex64::new(1.0, 0.0); 256]).unwrap()).unwrap();
        let f = simulate_acquisition(&img, &maps, &SamplingMask::full(16, 16), 0.0, 3).unwrap();
        assert_eq!(f, fft2c(&img));
    }

    #[test]
    fn measurements_vanish_off_the_mask() {
        let img = ComplexTensor::from_real(&shepp_logan(32, 32).unwrap());
        let maps = synth_sensitivities(4, 32, 32).unwrap();
        let mask = generate_mask(&MaskSpec {
            kind: MaskKind::Random2d,
            accel: 4,
            height: 32,
            width: 32,
            seed: 2,
            acs_lines: 0,
        })
        .unwrap();
        let f = simulate_acquisition(&img, &maps, &mask, 0.01, 5).unwrap();
        let n = 32 * 32;
        for (i, z) in f.data().iter().enumerate() {
            if !mask.is_sampled(i % n) {
                assert_eq!(*z, Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn dataset_is_deterministic() {
        let a = coil_image_dataset(3, 16, 16, 4, 9).unwrap();
        let b = coil_image_dataset(3, 16, 16, 4, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|x| x.max_abs() <= 1.0 + 1e-12));
        let sos = sos_combine(&a[0]).unwrap();
        assert!(sos.max() > 0.0);
    }
}
