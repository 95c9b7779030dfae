use std::path::PathBuf;

use huber_mm::denoise::{
    add_impulsive_noise, denoise_image, pgm, psnr, Dictionary, DictionaryKind, PatchGrid,
};
use huber_mm::SolverConfig;

fn image_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/test_image.pgm")
}

#[test]
fn checked_in_image_round_trips_bit_exactly() {
    let bytes = std::fs::read(image_path()).unwrap();
    let img = pgm::decode(&bytes).unwrap();
    assert_eq!((img.width(), img.height()), (64, 64));
    assert_eq!(pgm::encode(&img), bytes);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("copy.pgm");
    pgm::write(&img, &out).unwrap();
    assert_eq!(std::fs::read(&out).unwrap(), bytes);
}

#[test]
fn sparsity_sweep() {
    let clean = pgm::read(&image_path()).unwrap();
    let noisy = add_impulsive_noise(&clean, 0.05, 7).unwrap();
    let dict = Dictionary::build(8, DictionaryKind::DctHaarSpike).unwrap();
    let base = psnr(&noisy, &clean).unwrap();
    let mut best = f64::NEG_INFINITY;
    eprintln!("noisy: {base:.2} dB");
    for k in [2, 6, 10, 20] {
        let out = denoise_image(
            &noisy,
            &dict,
            &PatchGrid::default(),
            k,
            &SolverConfig::default(),
        )
        .unwrap();
        let p = psnr(&out, &clean).unwrap();
        eprintln!("K = {k:>2}: {p:.2} dB");
        best = best.max(p);
    }
    assert!(best > base);
}
