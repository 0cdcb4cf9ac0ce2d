//! Special functions: complete elliptic integrals, the principal Lambert W
//! branch and the zeroth-order Bessel function.
//!
//! Elliptic integrals take the *parameter* `x = k²` as argument:
//!
//! ```text
//! K(x) = ∫₀^{π/2} [1 − x sin²φ]^{-1/2} dφ
//! E(x) = ∫₀^{π/2} [1 − x sin²φ]^{+1/2} dφ
//! ```

use std::f64::consts::{E, FRAC_PI_2, PI};

use crate::error::{Error, Result};

const AGM_MAX_ITER: usize = 60;
const AGM_EPS: f64 = 1e-16;

/// Complete elliptic integral of the first kind, `x < 1`.
pub fn elliptic_k(x: f64) -> Result<f64> {
    if !(x < 1.0) {
        return Err(Error::Domain(format!(
            "elliptic K requires parameter x < 1, got {x}"
        )));
    }
    Ok(elliptic_k_complement(1.0 - x))
}

/// K evaluated from the complementary parameter `mc = 1 − x`.
///
/// Passing `mc` directly avoids the cancellation in `1 − x` close to the
/// logarithmic singularity at `x → 1`.
pub fn elliptic_k_complement(mc: f64) -> f64 {
    if mc <= 0.0 {
        return f64::INFINITY;
    }
    let mut a = 1.0;
    let mut b = mc.sqrt();
    for _ in 0..AGM_MAX_ITER {
        let a_next = 0.5 * (a + b);
        let b_next = (a * b).sqrt();
        a = a_next;
        b = b_next;
        if (a - b).abs() <= AGM_EPS * a {
            break;
        }
    }
    PI / (a + b)
}

/// Complete elliptic integral of the second kind, `x ≤ 1`.
pub fn elliptic_e(x: f64) -> Result<f64> {
    if !(x <= 1.0) {
        return Err(Error::Domain(format!(
            "elliptic E requires parameter x <= 1, got {x}"
        )));
    }
    Ok(elliptic_e_complement(1.0 - x))
}

/// E evaluated from the complementary parameter `mc = 1 − x`.
pub fn elliptic_e_complement(mc: f64) -> f64 {
    if mc <= 0.0 {
        return 1.0;
    }
    // AGM with the c_n² series: E = K [1 − Σ 2^{n−1} c_n²], c_0² = x.
    let mut a = 1.0;
    let mut b = mc.sqrt();
    let mut sum = 0.5 * (1.0 - mc);
    let mut weight = 0.5;
    for _ in 0..AGM_MAX_ITER {
        let c = 0.5 * (a - b);
        let a_next = 0.5 * (a + b);
        let b_next = (a * b).sqrt();
        weight *= 2.0;
        sum += weight * c * c;
        a = a_next;
        b = b_next;
        if c.abs() <= AGM_EPS * a {
            break;
        }
    }
    PI / (a + b) * (1.0 - sum)
}

/// Principal branch `W₀` of the Lambert W function, `z ≥ −1/e`.
pub fn lambert_w(z: f64) -> Result<f64> {
    let branch_point = -1.0 / E;
    if !(z >= branch_point) || !z.is_finite() {
        return Err(Error::Domain(format!(
            "Lambert W principal branch requires z >= -1/e, got {z}"
        )));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z == branch_point {
        return Ok(-1.0);
    }

    let mut w = if z < -0.25 {
        // series about the branch point
        let p = (2.0 * (E * z + 1.0)).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if z < 3.0 {
        0.5 * (1.0 + z).ln() + 0.25 * z / (1.0 + z)
    } else {
        let l = z.ln();
        l - l.ln()
    };

    // Halley iteration
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let denom = ew * wp1 - 0.5 * (w + 2.0) * f / wp1;
        let step = f / denom;
        w -= step;
        if step.abs() <= 1e-15 * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w)
}

/// Bessel function of the first kind, order zero.
#[inline]
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

/// `K(0) = π/2`; exposed for asymptotic checks.
pub const K_AT_ZERO: f64 = FRAC_PI_2;
