//! Gaussian expectations of products of `σ(x) = erf(x/√2)` and its
//! derivative, in closed form.

use std::f64::consts::{FRAC_2_PI, PI};

use crate::error::{Error, Result};

/// Slack allowed on arcsin arguments before reporting a domain error.
const ARCSIN_SLACK: f64 = 1e-9;

pub fn sigma(x: f64) -> f64 {
    libm::erf(x * std::f64::consts::FRAC_1_SQRT_2)
}

pub fn sigma_prime(x: f64) -> f64 {
    (FRAC_2_PI).sqrt() * (-0.5 * x * x).exp()
}

fn checked_asin(arg: f64, what: &str) -> Result<f64> {
    if !arg.is_finite() || arg.abs() > 1.0 + ARCSIN_SLACK {
        return Err(Error::NumericalDomain {
            what: format!("arcsin argument in {what}"),
            value: arg,
        });
    }
    Ok(arg.clamp(-1.0, 1.0).asin())
}

fn positive(value: f64, what: &str) -> Result<f64> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::NumericalDomain {
            what: what.to_string(),
            value,
        });
    }
    Ok(value)
}

/// `E[σ(λ₁) σ(λ₂)]` for fields with covariance `o`.
pub fn i2(o: &[[f64; 2]; 2]) -> Result<f64> {
    let denom = positive((1.0 + o[0][0]) * (1.0 + o[1][1]), "i2 normalization")?;
    Ok(FRAC_2_PI * checked_asin(o[0][1] / denom.sqrt(), "i2")?)
}

/// `E[σ′(λ₁) λ₂ σ(λ₃)]`.
pub fn i3(o: &[[f64; 3]; 3]) -> Result<f64> {
    let a11 = 1.0 + o[0][0];
    let radicand = positive(a11 * (1.0 + o[2][2]) - o[0][2] * o[0][2], "i3 radicand")?;
    Ok(FRAC_2_PI * (o[1][2] * a11 - o[0][1] * o[0][2]) / (a11 * radicand.sqrt()))
}

/// `E[σ′(λ₁) σ′(λ₂) σ(λ₃) σ(λ₄)]`.
pub fn i4(o: &[[f64; 4]; 4]) -> Result<f64> {
    let a11 = 1.0 + o[0][0];
    let a22 = 1.0 + o[1][1];
    let a44 = 1.0 + o[3][3];
    let a33 = 1.0 + o[2][2];
    let (o12, o13, o14, o23, o24, o34) = (o[0][1], o[0][2], o[0][3], o[1][2], o[1][3], o[2][3]);
    let bar0 = positive(a11 * a22 - o12 * o12, "i4 bar-omega-0")?;
    let bar1 = bar0 * o34 - o23 * o24 * a11 - o13 * o14 * a22 + o12 * o13 * o24 + o12 * o14 * o23;
    let bar2 = bar0 * a33 - o23 * o23 * a11 - o13 * o13 * a22 + 2.0 * o12 * o13 * o23;
    let bar3 = bar0 * a44 - o24 * o24 * a11 - o14 * o14 * a22 + 2.0 * o12 * o14 * o24;
    let prod = positive(bar2 * bar3, "i4 bar-omega-2 times bar-omega-3")?;
    Ok(4.0 / (PI * PI) / bar0.sqrt() * checked_asin(bar1 / prod.sqrt(), "i4")?)
}
