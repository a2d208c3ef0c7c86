//! Closed-form heat-kernel quantities and Gaussian moment formulas.
//!
//! These are the exact ground truths the rest of the crate is checked
//! against: the free-space kernel `p_t(z) = (2πκt)^{-1/2} exp(-z²/(2κt))`,
//! its L² norm, the time integral of that norm, and even moments of
//! centered Gaussians.

use crate::error::{Error, Result};

/// Viscosity and time for a heat-kernel evaluation. Both must be positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    kappa: f64,
    t: f64,
}

impl KernelParams {
    pub fn new(kappa: f64, t: f64) -> Result<Self> {
        if !kappa.is_finite() || kappa <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "kernel viscosity kappa must be positive and finite, got {kappa}"
            )));
        }
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "kernel time t must be positive and finite, got {t}"
            )));
        }
        Ok(Self { kappa, t })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn t(&self) -> f64 {
        self.t
    }
}

/// Free-space heat kernel `(2πκt)^{-1/2} exp(-z²/(2κt))`.
///
/// Symmetric in `z`, strictly positive, integrates to one.
pub fn kernel_value(params: KernelParams, z: f64) -> f64 {
    let var = params.kappa * params.t;
    (2.0 * std::f64::consts::PI * var).sqrt().recip() * (-z * z / (2.0 * var)).exp()
}

/// Squared L²(ℝ) norm of the kernel at time `t`: `(4πκt)^{-1/2}`.
pub fn kernel_l2_norm_sq(params: KernelParams) -> f64 {
    (4.0 * std::f64::consts::PI * params.kappa * params.t).sqrt().recip()
}

/// `∫₀ᵗ (4πκs)^{-1/2} ds = √(t/(πκ))`.
///
/// Unlike the pointwise kernel quantities this is well defined at `t = 0`
/// (the empty integral), so it takes raw arguments rather than
/// [`KernelParams`].
pub fn kernel_l2_time_integral(kappa: f64, t: f64) -> Result<f64> {
    if !kappa.is_finite() || kappa <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "kappa must be positive and finite, got {kappa}"
        )));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidInput(format!(
            "t must be nonnegative and finite, got {t}"
        )));
    }
    Ok((t / (std::f64::consts::PI * kappa)).sqrt())
}

/// `E ζ^{2k}` for `ζ ~ N(0, variance)`: `variance^k (2k)!/(k! 2^k)`.
///
/// The combinatorial factor is the double factorial `(2k-1)!!`, computed
/// as a running product so the result stays exact in f64 for the small
/// `k` used here.
pub fn gaussian_even_moment(variance: f64, k: u32) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidInput(format!(
            "moment order k must be >= 1, got {k}"
        )));
    }
    if !variance.is_finite() || variance < 0.0 {
        return Err(Error::InvalidInput(format!(
            "variance must be nonnegative and finite, got {variance}"
        )));
    }
    let mut double_factorial = 1.0f64;
    for j in 1..=k {
        double_factorial *= (2 * j - 1) as f64;
    }
    Ok(variance.powi(k as i32) * double_factorial)
}

/// Scale factor `(2/e)·ε₀²·√(t/(πκ))` that governs the growth of even
/// moments of the Gaussian comparison field with noise floor `ε₀`.
pub fn gaussian_moment_scale(eps0: f64, params: KernelParams) -> Result<f64> {
    if !eps0.is_finite() || eps0 <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "eps0 must be positive and finite, got {eps0}"
        )));
    }
    Ok(2.0 / std::f64::consts::E
        * eps0
        * eps0
        * (params.t / (std::f64::consts::PI * params.kappa)).sqrt())
}
