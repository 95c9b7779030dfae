#![no_main]

use huber_mm::denoise::pgm;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = pgm::decode(data) {
        assert_eq!(img.pixels().len(), img.width() * img.height());
        assert!(img.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
        // re-encoding at 8 bits must decode to the same dimensions
        let again = pgm::decode(&pgm::encode(&img)).unwrap();
        assert_eq!((again.width(), again.height()), (img.width(), img.height()));
    }
});
