//! Exact single-excitation amplitude dynamics.
//!
//! The excited-state amplitude obeys the Volterra integro-differential
//! equation
//!
//! ```text
//! ċ(t) + i[ω₀ + f(t)] c(t) + ∫₀ᵗ ν(t−τ) c(τ) dτ = 0,   c(0) = 1,
//! ```
//!
//! and its ω₀-sensitivity `x = ∂c/∂ω₀` the forced equation
//!
//! ```text
//! ẋ(t) + i[ω₀ + f(t)] x(t) + i c(t) + ∫₀ᵗ ν(t−τ) x(τ) dτ = 0,   x(0) = 0.
//! ```
//!
//! The local phase `φ(t) = ω₀t + ∫₀ᵗ f` is removed exactly by writing
//! `c = e^{−iφ} u`, which leaves `u̇ = −e^{iφ} ∫ν c`. The history integral is
//! discretized with the trapezoidal rule and `u` (and its ω₀-derivative) is
//! advanced with the trapezoidal rule. Because the equation is linear in the
//! unknown, the implicit step is solved in closed form.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{correlation_function, drive_phase, spectral_density, MarkovianModel, ModelParams};
use crate::quad::tanh_sinh;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Excess of `|c|` over one tolerated before the solver reports instability.
pub const NORM_GUARD: f64 = 1e-3;

/// Amplitude `c(t)` and sensitivity `∂c/∂ω₀` on a uniform grid.
#[derive(Debug, Clone, Serialize)]
pub struct AmplitudeTrajectory {
    pub times: Vec<f64>,
    pub c: Vec<Complex64>,
    pub dc_domega0: Vec<Complex64>,
    pub dt: f64,
    /// Grid steps per drive period; stroboscopic samples sit at multiples.
    pub steps_per_period: usize,
}

/// One stroboscopic sample `t = nT`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StroboscopicSample {
    pub period: usize,
    pub t: f64,
    pub c: Complex64,
    pub dc_domega0: Complex64,
}

impl AmplitudeTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Excited-state population `p_t = |c|²`, clamped into `[0, 1]`.
    pub fn population(&self, i: usize) -> f64 {
        self.c[i].norm_sqr().clamp(0.0, 1.0)
    }

    pub fn stroboscopic(&self) -> Vec<StroboscopicSample> {
        (0..self.len())
            .step_by(self.steps_per_period.max(1))
            .map(|i| StroboscopicSample {
                period: i / self.steps_per_period.max(1),
                t: self.times[i],
                c: self.c[i],
                dc_domega0: self.dc_domega0[i],
            })
            .collect()
    }

    /// Sample at exactly `n` drive periods, if on the grid.
    pub fn at_period(&self, n: usize) -> Option<StroboscopicSample> {
        let i = n * self.steps_per_period;
        (i < self.len()).then(|| StroboscopicSample {
            period: n,
            t: self.times[i],
            c: self.c[i],
            dc_domega0: self.dc_domega0[i],
        })
    }
}

/// Time step adjusted down so that an integer number of steps spans one
/// drive period. Returns `(dt, steps_per_period)`.
pub fn commensurate_step(p: &ModelParams, dt: f64) -> (f64, usize) {
    let period = p.period();
    let steps = (period / dt - 1e-9).ceil().max(1.0) as usize;
    (period / steps as f64, steps)
}

fn check_step(p: &ModelParams, t_max: f64, dt: f64, driven: bool) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if !(t_max >= dt) {
        return Err(Error::Config(format!("t_max ({t_max}) must be >= dt ({dt})")));
    }
    if driven && dt > p.period() / 40.0 {
        return Err(Error::Config(format!(
            "dt = {dt} does not resolve the drive: need dt <= T/40 = {}",
            p.period() / 40.0
        )));
    }
    if dt > 0.05 / p.h {
        return Err(Error::Config(format!(
            "dt = {dt} does not resolve the band: need dt <= 0.05/h = {}",
            0.05 / p.h
        )));
    }
    Ok(())
}

/// Solve the amplitude equation and its ω₀-sensitivity up to `t_max`.
///
/// `dt` is reduced to divide the drive period exactly. With `driven = false`
/// the drive term is dropped regardless of `A`.
pub fn solve_amplitude(p: &ModelParams, t_max: f64, dt: f64, driven: bool) -> Result<AmplitudeTrajectory> {
    p.validate()?;
    check_step(p, t_max, dt, driven)?;
    let (dt, steps_per_period) = commensurate_step(p, dt);
    let n_steps = (t_max / dt - 1e-9).ceil() as usize;

    let times: Vec<f64> = (0..=n_steps).map(|i| i as f64 * dt).collect();
    let kernel: Vec<Complex64> = times.iter().map(|&t| correlation_function(t, p)).collect();
    // φ(t) = ω₀t + ∫f, handled exactly through c = e^{−iφ} u
    let rotor: Vec<Complex64> = times
        .iter()
        .map(|&t| Complex64::from_polar(1.0, p.omega0 * t + if driven { drive_phase(t, p) } else { 0.0 }))
        .collect();

    let zero = Complex64::new(0.0, 0.0);
    let mut c = vec![zero; n_steps + 1];
    let mut x = vec![zero; n_steps + 1];
    c[0] = Complex64::new(1.0, 0.0);

    let a = 0.5 * dt;
    let nu0 = kernel[0];
    let denom = 1.0 + a * a * nu0;
    // u = e^{iφ}c and v = ∂u/∂ω₀ with their derivatives at the current step
    let (mut u, mut v) = (c[0], zero);
    let (mut u_dot, mut v_dot) = (zero, zero);

    for k in 0..n_steps {
        // Known part of the history integral at t_{k+1}:
        // dt [½ ν_{k+1} c_0 + Σ_{j=1}^{k} ν_{k+1−j} c_j]
        let mut hist_c = 0.5 * kernel[k + 1] * c[0];
        let mut hist_x = 0.5 * kernel[k + 1] * x[0];
        for j in 1..=k {
            let nu = kernel[k + 1 - j];
            hist_c += nu * c[j];
            hist_x += nu * x[j];
        }
        hist_c *= dt;
        hist_x *= dt;

        let t = times[k + 1];
        let r = rotor[k + 1];
        let u_next = (u + a * u_dot - a * r * hist_c) / denom;
        let c_next = r.conj() * u_next;
        if c_next.norm() > 1.0 + NORM_GUARD || !c_next.is_finite() {
            return Err(Error::Instability(format!(
                "|c| = {} at t = {t} exceeds 1 + {NORM_GUARD}",
                c_next.norm()
            )));
        }
        let memory = hist_c + a * nu0 * c_next;
        let forcing = I * t * memory + hist_x;
        let v_next = (v + a * v_dot - a * r * forcing + a * a * nu0 * I * t * u_next) / denom;
        let x_next = r.conj() * (v_next - I * t * u_next);

        u_dot = -r * memory;
        v_dot = -r * (forcing + a * nu0 * x_next);
        u = u_next;
        v = v_next;
        c[k + 1] = c_next;
        x[k + 1] = x_next;
    }

    Ok(AmplitudeTrajectory { times, c, dc_domega0: x, dt, steps_per_period })
}

/// `c_MA(t) = exp{−κt − i[ω₀ + Δ]t}`.
pub fn markovian_amplitude(m: &MarkovianModel, omega0: f64, t: f64) -> Complex64 {
    Complex64::new(-m.kappa * t, -(omega0 + m.delta) * t).exp()
}

/// Principal value `P∫ J(ω)/(ω₀ − ω) dω` with a symmetric excision
/// `(ω₀ − ε, ω₀ + ε)` around the pole.
pub fn renormalized_shift(p: &ModelParams, excision: f64) -> f64 {
    let lo = p.band_bottom();
    let hi = p.band_top();
    let w0 = p.omega0;
    let mut cuts = vec![lo, hi, p.omega_c];
    let window = (w0 - excision, w0 + excision);
    for v in [window.0, window.1] {
        if v > lo && v < hi {
            cuts.push(v);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();

    let integrand = |w: f64| spectral_density(w, p) / (w0 - w);
    cuts.windows(2)
        .filter(|seg| {
            let mid = 0.5 * (seg[0] + seg[1]);
            !(mid > window.0 && mid < window.1)
        })
        .map(|seg| tanh_sinh(integrand, seg[0], seg[1], 1e-13))
        .sum()
}

/// Markovian decay rate `κ = πJ(ω₀)` and shift `Δ(ω₀)`.
///
/// `t_r` is left at one unit of time; set it before computing repetition
/// counts.
pub fn markovian_params(p: &ModelParams) -> Result<MarkovianModel> {
    p.validate()?;
    let j = spectral_density(p.omega0, p);
    if !j.is_finite() {
        return Err(Error::Domain(format!(
            "omega0 = {} sits on the van Hove singularity at the band center",
            p.omega0
        )));
    }
    Ok(MarkovianModel {
        kappa: std::f64::consts::PI * j,
        delta: renormalized_shift(p, 1e-6 * p.h),
        t_r: 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> ModelParams {
        ModelParams { omega0: 1.0, g: 1.0, h: 1.0, omega_c: 0.0, amplitude: 11.0, omega_t: 12.0, n_atoms: 1 }
    }

    #[test]
    fn decoupled_atom_is_a_pure_phase() {
        let p = ModelParams { g: 0.0, ..reference() };
        for driven in [false, true] {
            let traj = solve_amplitude(&p, 10.0, 0.01, driven).unwrap();
            assert_eq!(traj.c[0], Complex64::new(1.0, 0.0));
            assert_eq!(traj.dc_domega0[0], Complex64::new(0.0, 0.0));
            for (i, &t) in traj.times.iter().enumerate().step_by(37) {
                let phase = p.omega0 * t + if driven { drive_phase(t, &p) } else { 0.0 };
                let exact = Complex64::from_polar(1.0, -phase);
                let tol = 1e-10;
                assert!((traj.c[i] - exact).norm() < tol, "driven={driven} t={t}");
                assert!((traj.c[i].norm() - 1.0).abs() < 1e-12);
                assert!((traj.dc_domega0[i] - (-I * t * exact)).norm() < tol * (1.0 + t));
            }
        }
    }

    #[test]
    fn undriven_phase_is_exact_to_tolerance_at_small_step() {
        let p = ModelParams { g: 0.0, ..reference() };
        let traj = solve_amplitude(&p, 10.0, 1e-3, false).unwrap();
        let last = traj.len() - 1;
        let exact = Complex64::from_polar(1.0, -p.omega0 * traj.times[last]);
        assert!((traj.c[last] - exact).norm() < 1e-5);
    }

    #[test]
    fn step_size_violations_are_config_errors() {
        let p = reference();
        assert!(matches!(solve_amplitude(&p, 1.0, 0.1, false), Err(Error::Config(_))));
        assert!(matches!(solve_amplitude(&p, 1.0, 0.04, true), Err(Error::Config(_))));
        assert!(matches!(solve_amplitude(&p, 0.001, 0.01, true), Err(Error::Config(_))));
        assert!(matches!(solve_amplitude(&p, 1.0, -0.01, true), Err(Error::Config(_))));
    }

    #[test]
    fn grid_is_commensurate_with_period() {
        let p = reference();
        let traj = solve_amplitude(&p, 3.0, 0.01, true).unwrap();
        let n = traj.steps_per_period;
        assert!((traj.dt * n as f64 - p.period()).abs() < 1e-14);
        let samples = traj.stroboscopic();
        assert!((samples[3].t - 3.0 * p.period()).abs() < 1e-12);
    }

    #[test]
    fn second_order_convergence() {
        let p = reference();
        let t_max = 4.0 * p.period();
        let end = |dt: f64| {
            let tr = solve_amplitude(&p, t_max, dt, true).unwrap();
            *tr.c.last().unwrap()
        };
        let base = p.period() / 40.0;
        let c1 = end(base);
        let c2 = end(base / 2.0);
        let c3 = end(base / 4.0);
        let order = ((c1 - c2).norm() / (c2 - c3).norm()).log2();
        assert!((order - 2.0).abs() < 0.2, "observed order {order}");
    }

    #[test]
    fn sensitivity_matches_finite_differences() {
        let p = reference();
        let dt = p.period() / 60.0;
        let t_end = 10.0;
        let delta = 1e-4;
        let at_end = |q: &ModelParams| solve_amplitude(q, t_end, dt, true).unwrap();
        let base = at_end(&p);
        let plus = at_end(&p.with_omega0(p.omega0 + delta));
        let minus = at_end(&p.with_omega0(p.omega0 - delta));
        let i = base.len() - 1;
        let fd = (plus.c[i] - minus.c[i]) / (2.0 * delta);
        let rel = (fd - base.dc_domega0[i]).norm() / base.dc_domega0[i].norm();
        assert!(rel < 1e-5, "relative mismatch {rel}");
    }

    #[test]
    fn weak_coupling_tracks_markovian_decay() {
        let p = ModelParams { g: 0.05, amplitude: 0.0, ..reference() };
        let m = markovian_params(&p).unwrap();
        let t_max = 1.0 / m.kappa;
        let traj = solve_amplitude(&p, t_max, 0.05, false).unwrap();
        for (i, &t) in traj.times.iter().enumerate() {
            let markov = (-2.0 * m.kappa * t).exp();
            let rel = (traj.population(i) - markov).abs() / markov;
            assert!(rel < 0.02, "t={t}: {} vs {markov}", traj.population(i));
        }
    }

    #[test]
    fn markovian_amplitude_closed_form() {
        let m = MarkovianModel { kappa: 0.1, delta: 0.3, t_r: 1.0 };
        assert_eq!(markovian_amplitude(&m, 1.0, 0.0), Complex64::new(1.0, 0.0));
        let c = markovian_amplitude(&m, 1.0, 5.0);
        assert!((c.norm_sqr() - (-1.0f64).exp()).abs() < 1e-15);
        let free = MarkovianModel { kappa: 0.0, ..m };
        assert!((markovian_amplitude(&free, 1.0, 123.0).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn markovian_params_edge_cases() {
        let outside = ModelParams { omega0: 6.0, ..reference() };
        assert_eq!(markovian_params(&outside).unwrap().kappa, 0.0);

        let center = ModelParams { omega0: 0.0, omega_c: 0.0, ..reference() };
        assert!(renormalized_shift(&center, 1e-6).abs() < 1e-10);
        assert!(matches!(markovian_params(&center), Err(Error::Domain(_))));
    }

    #[test]
    fn shift_converges_under_excision_halving() {
        let p = reference();
        let eps = 1e-3;
        let d1 = renormalized_shift(&p, eps);
        let d2 = renormalized_shift(&p, eps / 2.0);
        assert!((d1 - d2).abs() < 1e-4, "{d1} vs {d2}");
    }

    #[test]
    fn shift_outside_band_equals_self_energy() {
        // Off the band the principal value is an ordinary integral, which the
        // elliptic closed form of the self-energy evaluates independently.
        let p = ModelParams { omega0: 5.0, ..reference() };
        let quad = renormalized_shift(&p, 1e-6);
        let closed = crate::floquet::self_energy(5.0, 0, &p).unwrap();
        assert!((quad - closed).abs() < 1e-10, "{quad} vs {closed}");
    }
}
