#![no_main]

use huber_mm::denoise::Dictionary;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(dict) = Dictionary::parse(text) {
        for n in dict.atoms().column_norms() {
            assert!((n - 1.0).abs() <= 1e-10, "norm {n}");
        }
    }
});
