//! Gaussian tail and incomplete gamma functions.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use libm::erfc;
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};

const MAX_ITER: usize = 10_000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Gaussian tail probability `Q(z) = P(N(0,1) > z)`.
pub fn q_function(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Inverse of [`q_function`] on `(0, 1)`.
///
/// Starts from the rational approximation behind `erfc_inv` and applies one
/// Newton step on `Q(z) - p`.
pub fn inv_q_function(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("p", format!("must lie in (0, 1), got {p}")));
    }
    let z = SQRT_2 * erfc_inv(2.0 * p);
    let density = normal_pdf(z);
    if density > 0.0 {
        Ok(z + (q_function(z) - p) / density)
    } else {
        Ok(z)
    }
}

/// Regularized incomplete gamma pair `(P(a, z), Q(a, z))`.
///
/// Series for `z < a + 1`, Lentz continued fraction otherwise; the smaller
/// of the two is computed directly so neither loses relative accuracy.
pub fn regularized_gamma(a: f64, z: f64) -> Result<(f64, f64)> {
    check_gamma_args(a, z)?;
    if z == 0.0 {
        return Ok((0.0, 1.0));
    }
    if z.is_infinite() {
        return Ok((1.0, 0.0));
    }
    let log_prefix = a * z.ln() - z - ln_gamma(a);
    if z < a + 1.0 {
        let p = (log_prefix.exp() * gamma_series(a, z)?).min(1.0);
        Ok((p, 1.0 - p))
    } else {
        let q = (log_prefix.exp() * gamma_continued_fraction(a, z)?).min(1.0);
        Ok((1.0 - q, q))
    }
}

/// Lower incomplete gamma `∫₀^z e^{-t} t^{a-1} dt` (not regularized).
pub fn lower_incomplete_gamma(a: f64, z: f64) -> Result<f64> {
    check_gamma_args(a, z)?;
    if z == 0.0 {
        return Ok(0.0);
    }
    if z.is_infinite() {
        return Ok(gamma(a));
    }
    if z < a + 1.0 {
        // z^a e^{-z} Σ z^n / (a (a+1) ... (a+n))
        let log_prefix = a * z.ln() - z;
        Ok(log_prefix.exp() * gamma_series(a, z)?)
    } else {
        let upper = (a * z.ln() - z).exp() * gamma_continued_fraction(a, z)?;
        Ok(gamma(a) - upper)
    }
}

fn check_gamma_args(a: f64, z: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::domain("a", format!("must be finite and positive, got {a}")));
    }
    if !(z >= 0.0) {
        return Err(Error::domain("z", format!("must be non-negative, got {z}")));
    }
    Ok(())
}

/// `Σ_{n≥0} z^n / (a (a+1) ... (a+n))`.
fn gamma_series(a: f64, z: f64) -> Result<f64> {
    let mut denom = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        denom += 1.0;
        term *= z / denom;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            return Ok(sum);
        }
    }
    Err(Error::range(
        "incomplete gamma series",
        format!("no convergence for a={a}, z={z}"),
    ))
}

/// Continued fraction for `Γ(a, z) e^{z} z^{-a}` (modified Lentz).
fn gamma_continued_fraction(a: f64, z: f64) -> Result<f64> {
    let mut b = z + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::range(
        "incomplete gamma continued fraction",
        format!("no convergence for a={a}, z={z}"),
    ))
}
