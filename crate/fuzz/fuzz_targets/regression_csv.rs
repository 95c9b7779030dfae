#![no_main]

use huber_mm::dataset::parse_csv;
use huber_mm::{fit, RegressionProblem, SolverConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(ds) = parse_csv(data) else {
        return;
    };
    assert_eq!(ds.y.len(), ds.x.rows());
    if ds.x.rows() <= 64 {
        if let Ok(prob) = RegressionProblem::new(ds.y, ds.x, false) {
            let cfg = SolverConfig {
                max_iter: 50,
                ..SolverConfig::default()
            };
            let _ = fit(&prob, &cfg, None);
        }
    }
});
