use kiebm_core::io::*;
use proptest::prelude::*;

fn round_trip(t: &TensorFile) {
    let bytes = t.to_bytes();
    let back = TensorFile::from_bytes(&bytes).unwrap();
    assert_eq!(back.dims(), t.dims());
    assert_eq!(back.to_bytes(), bytes);
}

proptest! {
    #[test]
    fn every_dtype_round_trips_bit_exactly(
        bits in prop::collection::vec(any::<u64>(), 1..64),
        extra in 1usize..4,
    ) {
        let n = bits.len();
        let dims = vec![n, extra];
        let r32: Vec<f32> = bits.iter().cycle().take(n * extra).map(|b| f32::from_bits(*b as u32)).collect();
        let r64: Vec<f64> = bits.iter().cycle().take(n * extra).map(|b| f64::from_bits(*b)).collect();
        round_trip(&TensorFile::new(dims.clone(), TensorData::Real32(r32)).unwrap());
        round_trip(&TensorFile::new(dims.clone(), TensorData::Real64(r64)).unwrap());
        let c64: Vec<_> = bits.iter().cycle().take(n * extra)
            .map(|b| num_complex::Complex32::new(f32::from_bits(*b as u32), f32::from_bits((*b >> 32) as u32)))
            .collect();
        round_trip(&TensorFile::new(dims.clone(), TensorData::Complex64(c64)).unwrap());
        let c128: Vec<_> = bits.iter().cycle().take(n * extra)
            .map(|b| num_complex::Complex64::new(f64::from_bits(*b), f64::from_bits(b.rotate_left(17))))
            .collect();
        round_trip(&TensorFile::new(dims, TensorData::Complex128(c128)).unwrap());
    }
}

#[test]
fn files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.kieb");
    let t = TensorFile::new(vec![2, 3], TensorData::Real64(vec![0.5, -1.0, 2.0, 1e-300, -0.0, 7.25])).unwrap();
    t.write(&path).unwrap();
    assert_eq!(TensorFile::read(&path).unwrap().to_bytes(), t.to_bytes());
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 1);
}
