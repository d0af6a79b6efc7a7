use kiebm_core::metrics::psnr;
use kiebm_core::mri::*;
use kiebm_core::ComplexTensor;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spread(k: &ComplexTensor) -> f64 {
    let mut mags: Vec<f64> = k.data().iter().map(|z| z.norm()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    mags[mags.len() - 1] / mags[mags.len() / 2]
}

#[test]
fn weighting_flattens_phantom_spectrum() {
    let img = shepp_logan(128, 128).unwrap();
    let k = fft2c(&ComplexTensor::from_real(&img));
    let w = weight_matrix(0.1, 0.5, 128, 128, 1e-3).unwrap();
    let raw = spread(&k);
    let weighted = spread(&w.apply(&k).unwrap());
    assert!(raw >= 10.0 * weighted, "raw {raw} weighted {weighted}");
}

#[test]
fn weight_round_trip_random_kspace() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let data = (0..3 * 32 * 32)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let k = ComplexTensor::new(3, 32, 32, data).unwrap();
    let w = weight_matrix(0.1, 0.5, 32, 32, 1e-3).unwrap();
    let back = w.unapply(&w.apply(&k).unwrap()).unwrap();
    assert!(back.sub(&k).unwrap().norm() / k.norm() < 1e-12);
}

#[test]
fn undersampling_lowers_zero_filled_quality() {
    let truth = shepp_logan(64, 64).unwrap();
    let maps = synth_sensitivities(4, 64, 64).unwrap();
    let img = ComplexTensor::from_real(&truth);
    let spec = |accel| MaskSpec {
        kind: MaskKind::Random2d,
        accel,
        height: 64,
        width: 64,
        seed: 3,
        acs_lines: 0,
    };
    let full = simulate_acquisition(&img, &maps, &generate_mask(&spec(1)).unwrap(), 0.0, 1).unwrap();
    let under = simulate_acquisition(&img, &maps, &generate_mask(&spec(4)).unwrap(), 0.0, 1).unwrap();
    let p1 = psnr(&sos_combine(&ifft2c(&full)).unwrap(), &truth, 1.0).unwrap();
    let p4 = psnr(&sos_combine(&ifft2c(&under)).unwrap(), &truth, 1.0).unwrap();
    assert!(p4 < p1, "R=4 {p4} vs R=1 {p1}");
    assert!(p1 > 100.0);
}

#[test]
fn large_random_mask_density() {
    for seed in 0..3 {
        let m = generate_mask(&MaskSpec {
            kind: MaskKind::Random2d,
            accel: 4,
            height: 256,
            width: 256,
            seed,
            acs_lines: 0,
        })
        .unwrap();
        assert!((0.2375..=0.2625).contains(&m.density()));
    }
}
