//! Small robust-statistics helpers shared by the solvers.

/// Normal-consistency constant for the median absolute deviation.
pub const MAD_CONSISTENCY: f64 = 1.4826;

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    let n = v.len();
    let mid = n / 2;
    let (lower, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let m = *m;
    if n % 2 == 1 {
        m
    } else {
        let lo = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + m)
    }
}

/// `1.4826 * median(|v - median(v)|)`.
pub fn mad_scale(values: &[f64]) -> f64 {
    let med = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    MAD_CONSISTENCY * median(&dev)
}

/// MAD scale, falling back to the RMS deviation from the median when more
/// than half the values coincide, then to the plain RMS. Zero only for an
/// all-zero input.
pub fn robust_scale(values: &[f64]) -> f64 {
    let s = mad_scale(values);
    if s > 0.0 {
        return s;
    }
    let n = values.len() as f64;
    let med = median(values);
    let dev = (values.iter().map(|v| (v - med).powi(2)).sum::<f64>() / n).sqrt();
    if dev > 0.0 {
        return dev;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / n).sqrt()
}
