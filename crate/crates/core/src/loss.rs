//! Huber's loss family and the Fisher-consistency factor of the joint
//! regression/scale criterion.
//!
//! All kernels act on *standardized* residuals `x = r / sigma`.

use crate::error::{Error, Result};

/// Threshold giving 95% asymptotic relative efficiency under Gaussian errors.
pub const C_95: f64 = 1.345;
/// Threshold giving 85% asymptotic relative efficiency under Gaussian errors.
pub const C_85: f64 = 0.7317;
/// Threshold used to express the least-squares limit with a finite kernel.
pub const C_LEAST_SQUARES: f64 = 1e6;

/// Huber kernel with threshold `c` and its cached consistency factor `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuberKernel {
    c: f64,
    alpha: f64,
}

impl HuberKernel {
    pub fn new(c: f64) -> Result<Self> {
        let alpha = consistency_factor(c)?;
        Ok(Self { c, alpha })
    }

    pub fn efficient_95() -> Self {
        Self::new(C_95).expect("valid preset")
    }

    pub fn efficient_85() -> Self {
        Self::new(C_85).expect("valid preset")
    }

    /// Kernel whose quadratic zone covers any realistic standardized residual.
    pub fn least_squares() -> Self {
        Self::new(C_LEAST_SQUARES).expect("valid preset")
    }

    #[inline]
    pub fn c(&self) -> f64 {
        self.c
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Huber loss: `x²/2` inside the threshold, `c|x| - c²/2` outside.
    #[inline]
    pub fn rho(&self, x: f64) -> f64 {
        let a = x.abs();
        if a <= self.c {
            0.5 * x * x
        } else {
            0.5 * (2.0 * self.c * a - self.c * self.c)
        }
    }

    /// Score function, the derivative of [`rho`](Self::rho): winsorizes at `±c`.
    #[inline]
    pub fn psi(&self, x: f64) -> f64 {
        x.clamp(-self.c, self.c)
    }

    /// `psi(x) x - rho(x)`, which equals `psi(x)² / 2`.
    #[inline]
    pub fn chi(&self, x: f64) -> f64 {
        let p = self.psi(x);
        0.5 * p * p
    }

    /// IRWLS weight `psi(x) / x`, with the limit value 1 at the origin.
    #[inline]
    pub fn weight(&self, x: f64) -> f64 {
        let a = x.abs();
        if a <= self.c {
            1.0
        } else {
            self.c / a
        }
    }

    pub fn rho_vec(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.rho(x)).collect()
    }

    pub fn psi_vec(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.psi(x)).collect()
    }

    pub fn chi_vec(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.chi(x)).collect()
    }

    pub fn weight_vec(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.weight(x)).collect()
    }
}

/// Consistency factor `alpha = E[chi_c(e)]` for `e ~ N(0, 1)`:
///
/// `alpha = c²/2 (1 - F₁(c²)) + F₃(c²)/2`
///
/// where `F_k` is the chi-squared CDF with `k` degrees of freedom.
pub fn consistency_factor(c: f64) -> Result<f64> {
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::Domain(format!(
            "threshold c must be positive and finite, got {c}"
        )));
    }
    let c2 = c * c;
    let f1 = chi2_cdf(c2, 1)?;
    let f3 = chi2_cdf(c2, 3)?;
    Ok(0.5 * c2 * (1.0 - f1) + 0.5 * f3)
}

/// Chi-squared CDF for one or three degrees of freedom.
pub fn chi2_cdf(x: f64, dof: u32) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!(
            "chi-squared CDF needs x >= 0, got {x}"
        )));
    }
    if x == 0.0 && (dof == 1 || dof == 3) {
        return Ok(0.0);
    }
    let f1 = erf((0.5 * x).sqrt());
    match dof {
        1 => Ok(f1),
        3 => {
            let tail = (2.0 * x / std::f64::consts::PI).sqrt() * (-0.5 * x).exp();
            // the approximation error of erf can push tiny values below zero
            Ok((f1 - tail).clamp(0.0, 1.0))
        }
        _ => Err(Error::Domain(format!(
            "chi-squared CDF supports 1 or 3 degrees of freedom, got {dof}"
        ))),
    }
}

/// Error function, Abramowitz & Stegun 7.1.26 (|error| <= 1.5e-7).
pub fn erf(x: f64) -> f64 {
    const P: f64 = 0.327_591_1;
    const A: [f64; 5] = [
        0.254_829_592,
        -0.284_496_736,
        1.421_413_741,
        -1.453_152_027,
        1.061_405_429,
    ];
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + P * x);
    let poly = t * (A[0] + t * (A[1] + t * (A[2] + t * (A[3] + t * A[4]))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}
