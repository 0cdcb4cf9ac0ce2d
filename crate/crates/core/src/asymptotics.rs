//! Closed-form long-time and Markovian QFI results.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::floquet::FloquetBoundState;
use crate::special::lambert_w;

/// `y_N(x) = 2x^N / [1 + x^N + (1−x)^N]`.
pub fn y_n(x: f64, n: u32) -> f64 {
    let x = x.clamp(0.0, 1.0);
    let nf = n as f64;
    // powers through exp/ln so large N underflows gracefully
    let pow = |v: f64| if v == 0.0 { 0.0 } else { (nf * v.ln()).exp() };
    let xn = pow(x);
    2.0 * xn / (1.0 + xn + pow(1.0 - x))
}

/// Steady-state `F⁽²⁾` at finite N for a single bound state:
/// `N(∂Z²)²/(2Z²) [(1 − N Z²(1−Z²)^{N−1})/(1−Z²) − N Z^{2(N−1)}]`.
pub fn steady_f2(z2: f64, dz2: f64, n: u32) -> f64 {
    if !(z2 > 0.0 && z2 < 1.0) {
        return 0.0;
    }
    let nf = n as f64;
    let q = 1.0 - z2;
    let bracket = (1.0 - nf * z2 * q.powi(n as i32 - 1)) / q - nf * z2.powi(n as i32 - 1);
    (nf * dz2 * dz2 / (2.0 * z2) * bracket).max(0.0)
}

/// The two terms of the long-time QFI `y_N(Z²)(N t ∂ε)² + offset`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AsymptoticQfi {
    /// `y_N(Z²)`.
    pub prefactor: f64,
    /// `(N ∂ε/∂ω₀)²`, the coefficient of `y_N t²`.
    pub slope_sq: f64,
    /// Time-independent steady `F⁽²⁾` at finite N.
    pub offset: f64,
    /// Large-N limit of the offset, `N(∂Z²)²/[2Z²(1−Z²)]`.
    pub offset_large_n: f64,
    /// Set when `Z = 1`, where the offset is reported as zero.
    pub saturated: bool,
}

impl AsymptoticQfi {
    pub fn at(&self, t: f64) -> f64 {
        self.prefactor * self.slope_sq * t * t + self.offset
    }

    /// Coefficient of `t²`.
    pub fn t2_coefficient(&self) -> f64 {
        self.prefactor * self.slope_sq
    }
}

pub fn asymptotic_qfi(fbs: &FloquetBoundState, n: u32) -> Result<AsymptoticQfi> {
    let (Some(d_eps), Some(dz2)) = (fbs.d_epsilon_domega0, fbs.d_z2_domega0) else {
        return Err(Error::Config("bound state carries no omega0-derivatives".into()));
    };
    let z2 = fbs.z2();
    let nf = n as f64;
    let saturated = z2 >= 1.0;
    let (offset, offset_large_n) = if saturated || z2 <= 0.0 {
        (0.0, 0.0)
    } else {
        (steady_f2(z2, dz2, n), nf * dz2 * dz2 / (2.0 * z2 * (1.0 - z2)))
    };
    Ok(AsymptoticQfi {
        prefactor: y_n(z2, n),
        slope_sq: (nf * d_eps).powi(2),
        offset,
        offset_large_n,
        saturated,
    })
}

/// Long-time QFI of a single bound state at time `t`.
pub fn long_time_qfi(fbs: &FloquetBoundState, n: u32, t: f64) -> Result<f64> {
    Ok(asymptotic_qfi(fbs, n)?.at(t))
}

/// `F(t) = 2N²t² / [1 + (e^{2κt}−1)^N + e^{2Nκt}]`.
pub fn markovian_qfi(kappa: f64, n: u32, t: f64) -> f64 {
    let nf = n as f64;
    // divide through by e^{2Nκt} to keep every term bounded
    let decay = (-2.0 * nf * kappa * t).exp();
    let loss = -(-2.0 * kappa * t).exp_m1();
    2.0 * nf * nf * t * t * decay / (decay + loss.powi(n as i32) + 1.0)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MarkovianOptimum {
    /// `q = [W(2/e²) + 2]/(2κ)`.
    pub q: f64,
    pub t_opt: f64,
    pub f_max: f64,
    /// Large-N limit `2q²/(1 + e^{2qκ})`.
    pub f_inf: f64,
    pub delta_omega_min: f64,
}

/// Optimal encoding time and best precision under Markovian decay.
pub fn markovian_optimum(kappa: f64, n: u32, t_r: f64) -> Result<MarkovianOptimum> {
    if !(kappa > 0.0) || !(t_r > 0.0) || n < 1 {
        return Err(Error::Domain(format!(
            "Markovian optimum needs kappa > 0, T_R > 0, N >= 1 (got {kappa}, {t_r}, {n})"
        )));
    }
    let w = lambert_w(2.0 * (-2.0f64).exp())?;
    let q = (w + 2.0) / (2.0 * kappa);
    let t_opt = q / n as f64;
    let f_max = markovian_qfi(kappa, n, t_opt);
    let f_inf = 2.0 * q * q / (1.0 + (2.0 * q * kappa).exp());
    let delta_omega_min = cramer_rao_precision(f_max, t_r / t_opt)?;
    Ok(MarkovianOptimum { q, t_opt, f_max, f_inf, delta_omega_min })
}

/// `δ = (υF)^{−1/2}`.
pub fn cramer_rao_precision(f: f64, repetitions: f64) -> Result<f64> {
    if !(f > 0.0) {
        return Err(Error::Domain(format!("Fisher information must be positive, got {f}")));
    }
    if !(repetitions > 0.0) {
        return Err(Error::Domain(format!("repetition count must be positive, got {repetitions}")));
    }
    Ok((repetitions * f).powf(-0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qfi::{qfi_f1, qfi_f2};
    use crate::quad::golden_section_max;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    #[test]
    fn y_n_values() {
        for n in [1u32, 3, 20, 500] {
            assert_relative_eq!(y_n(1.0, n), 1.0, max_relative = 1e-15);
            assert_eq!(y_n(0.0, n), 0.0);
        }
        for &x in &[0.1, 0.5, 0.93] {
            assert_relative_eq!(y_n(x, 1), x, max_relative = 1e-14);
        }
        for n in [5u32, 10, 20] {
            let y = y_n((-1.1 / n as f64).exp(), n);
            assert!((y / 0.5 - 1.0).abs() < 0.02, "N={n}: {y}");
        }
    }

    #[test]
    fn y_n_is_the_long_time_f1_prefactor() {
        // F⁽¹⁾ for c = Z e^{−iεt} grows as y_N(Z²)(N t ∂ε)² at long times
        let (z, d_eps, dz) = (0.9f64, 0.8, 0.05);
        for n in [2u32, 5, 12] {
            let t = 1e5;
            let c = Complex64::from_polar(z, -0.3 * t);
            let dc = Complex64::from_polar(dz, -0.3 * t) - Complex64::new(0.0, t * d_eps) * c;
            let ratio = qfi_f1(c, dc, n) / (n as f64 * t * d_eps).powi(2);
            assert_relative_eq!(ratio, y_n(z * z, n), max_relative = 1e-4);
        }
    }

    #[test]
    fn steady_f2_matches_qfi_f2() {
        let (z2, dz2) = (0.7, 0.13);
        for n in [2u32, 3, 7, 20] {
            assert_relative_eq!(steady_f2(z2, dz2, n), qfi_f2(z2, dz2, n), max_relative = 1e-10);
        }
    }

    fn decoupled_state() -> FloquetBoundState {
        FloquetBoundState {
            epsilon_b: 1.0,
            coeffs: vec![1.0],
            z: 1.0,
            d_epsilon_domega0: Some(1.0),
            d_z2_domega0: Some(0.0),
            n_max: 0,
        }
    }

    #[test]
    fn ideal_recovery_in_decoupled_limit() {
        let st = decoupled_state();
        let a = asymptotic_qfi(&st, 7).unwrap();
        assert!(a.saturated);
        assert_relative_eq!(a.at(3.0), 49.0 * 9.0, max_relative = 1e-14);
        let bare = FloquetBoundState { d_epsilon_domega0: None, ..st };
        assert!(asymptotic_qfi(&bare, 7).is_err());
    }

    #[test]
    fn markovian_qfi_closed_forms() {
        for n in [1u32, 4, 9] {
            assert_relative_eq!(markovian_qfi(0.0, n, 2.5), (n as f64 * 2.5).powi(2), max_relative = 1e-14);
        }
        let (k, t) = (0.1, 3.0);
        assert_relative_eq!(markovian_qfi(k, 1, t), t * t * (-2.0 * k * t).exp(), max_relative = 1e-14);
        let literal = 2.0 * 16.0 * t * t
            / (1.0 + ((2.0 * k * t).exp() - 1.0).powi(4) + (8.0 * k * t).exp());
        assert_relative_eq!(markovian_qfi(k, 4, t), literal, max_relative = 1e-13);
        let t_long = 20.0 / k;
        assert!(markovian_qfi(k, 10, t_long) < 1e-10 * 100.0 * t_long * t_long);
    }

    #[test]
    fn markovian_optimum_constants() {
        let kappa = 0.1;
        let opt = markovian_optimum(kappa, 10_000, 1.0).unwrap();
        assert!((opt.q * kappa / 1.11 - 1.0).abs() < 0.005);
        assert!((opt.f_inf * kappa * kappa / 0.24 - 1.0).abs() < 0.02);
        assert_relative_eq!(opt.f_max, opt.f_inf, max_relative = 1e-3);
    }

    #[test]
    fn optimum_matches_golden_section() {
        let (kappa, n) = (0.1, 50u32);
        let opt = markovian_optimum(kappa, n, 1.0).unwrap();
        let (t_star, f_star) = golden_section_max(|t| markovian_qfi(kappa, n, t), 1e-3, 10.0, 1e-10);
        assert!((t_star / opt.t_opt - 1.0).abs() < 0.01);
        assert!((f_star / opt.f_max - 1.0).abs() < 0.01);
    }

    #[test]
    fn precision_values() {
        assert_relative_eq!(cramer_rao_precision(1.0, 1.0).unwrap(), 1.0);
        let (n, t) = (10.0, 3.0);
        assert_relative_eq!(cramer_rao_precision(n * n * t * t, 1.0).unwrap(), 1.0 / (n * t), max_relative = 1e-14);
        assert_relative_eq!(
            cramer_rao_precision(2.0, 4.0).unwrap(),
            0.5 * cramer_rao_precision(2.0, 1.0).unwrap(),
            max_relative = 1e-14
        );
        assert!(matches!(cramer_rao_precision(0.0, 1.0), Err(Error::Domain(_))));
        assert!(markovian_optimum(0.0, 3, 1.0).is_err());
    }
}
