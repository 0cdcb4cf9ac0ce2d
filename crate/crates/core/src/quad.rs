//! One-dimensional quadrature and maximization helpers.

/// Double-exponential (tanh-sinh) quadrature of `f` over `[a, b]`.
///
/// Integrable endpoint singularities (logarithmic, inverse square root) are
/// handled without special treatment. The closure receives the abscissa and
/// is never evaluated at the endpoints themselves.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let half = 0.5 * (hi - lo);
    let t_max = 3.5;

    // Node at parameter t: distance to the nearer endpoint is computed from
    // the complement 1 − tanh(u) to keep relative precision near the ends.
    let eval = |t: f64| -> f64 {
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        let cosh_u = u.cosh();
        let w = std::f64::consts::FRAC_PI_2 * t.cosh() / (cosh_u * cosh_u);
        if w == 0.0 {
            return 0.0;
        }
        // 1 - tanh|u| = 2 / (exp(2|u|) + 1)
        let comp = 2.0 / ((2.0 * u.abs()).exp() + 1.0);
        let dist = half * comp;
        if dist <= 0.0 {
            return 0.0;
        }
        let x = if u >= 0.0 { hi - dist } else { lo + dist };
        if x <= lo || x >= hi {
            return 0.0;
        }
        f(x) * w
    };

    let mut step = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    loop {
        let t = k as f64 * step;
        if t > t_max {
            break;
        }
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = sum * step * half;

    for _level in 0..12 {
        step *= 0.5;
        let mut extra = 0.0;
        let mut k = 1;
        loop {
            let t = k as f64 * step;
            if t > t_max {
                break;
            }
            extra += eval(t) + eval(-t);
            k += 2;
        }
        sum += extra;
        let next = sum * step * half;
        let converged = (next - estimate).abs() <= rel_tol * next.abs().max(1e-300);
        estimate = next;
        if converged && _level >= 2 {
            break;
        }
    }
    sign * estimate
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
/// Returns `(x*, f(x*))`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol * (1.0 + a.abs() + b.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn smooth_and_singular_integrands() {
        assert_relative_eq!(tanh_sinh(|x| x * x, 0.0, 3.0, 1e-14), 9.0, max_relative = 1e-13);
        // ∫₀¹ ln x dx = −1
        assert_relative_eq!(tanh_sinh(|x: f64| x.ln(), 0.0, 1.0, 1e-14), -1.0, max_relative = 1e-12);
        // ∫₀¹ x^{-1/2} dx = 2
        assert_relative_eq!(tanh_sinh(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-14), 2.0, max_relative = 1e-10);
        assert_relative_eq!(tanh_sinh(|x: f64| x.cos(), 1.0, 0.0, 1e-14), -(1f64).sin(), max_relative = 1e-13);
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 1.3) * (x - 1.3) + 2.0, 0.0, 5.0, 1e-12);
        assert!((x - 1.3).abs() < 1e-6);
        assert!((fx - 2.0).abs() < 1e-12);
    }
}
