//! Physical parameters and the square-lattice reservoir.
//!
//! The reservoir is a 2D square lattice with dispersion
//! `ω_k = ω_c − 2h (cos kx + cos ky)` and uniform coupling magnitude `g/L`,
//! so that `Σ_k |g_k|² = g²`. All energies are in units of the hopping `h`
//! (default 1) and times in `1/h`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{bessel_j0, elliptic_k_complement};

/// Model parameters of a driven atom coupled to the lattice reservoir.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Atomic transition frequency.
    pub omega0: f64,
    /// Atom–reservoir coupling strength.
    pub g: f64,
    /// Lattice hopping rate.
    pub h: f64,
    /// Band-center frequency.
    pub omega_c: f64,
    /// Drive amplitude.
    #[serde(rename = "A")]
    pub amplitude: f64,
    /// Drive angular frequency.
    #[serde(rename = "omega_T")]
    pub omega_t: f64,
    /// Number of atoms in the GHZ probe.
    #[serde(rename = "N")]
    pub n_atoms: u32,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            omega0: 1.0,
            g: 1.0,
            h: 1.0,
            omega_c: 0.0,
            amplitude: 11.0,
            omega_t: 12.0,
            n_atoms: 20,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.omega0, self.g, self.h, self.omega_c, self.amplitude, self.omega_t]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("all parameters must be finite".into()));
        }
        if self.g < 0.0 {
            return Err(Error::Config(format!("g must be >= 0, got {}", self.g)));
        }
        if self.h <= 0.0 {
            return Err(Error::Config(format!("h must be > 0, got {}", self.h)));
        }
        if self.omega_t <= 0.0 {
            return Err(Error::Config(format!("omega_T must be > 0, got {}", self.omega_t)));
        }
        if self.amplitude < 0.0 {
            return Err(Error::Config(format!("A must be >= 0, got {}", self.amplitude)));
        }
        if self.n_atoms < 1 {
            return Err(Error::Config("N must be >= 1".into()));
        }
        Ok(())
    }

    /// Drive period `T = 2π/ω_T`.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega_t
    }

    pub fn band_bottom(&self) -> f64 {
        self.omega_c - 4.0 * self.h
    }

    pub fn band_top(&self) -> f64 {
        self.omega_c + 4.0 * self.h
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_omega0(mut self, omega0: f64) -> Self {
        self.omega0 = omega0;
        self
    }

    /// `(key, value)` pairs in config-file order, used for file headers.
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("omega0", fmt_f64(self.omega0)),
            ("g", fmt_f64(self.g)),
            ("h", fmt_f64(self.h)),
            ("omega_c", fmt_f64(self.omega_c)),
            ("A", fmt_f64(self.amplitude)),
            ("omega_T", fmt_f64(self.omega_t)),
            ("N", self.n_atoms.to_string()),
        ]
    }
}

fn fmt_f64(v: f64) -> String {
    // Debug formatting keeps the shortest round-trip representation and a
    // trailing ".0" so the value reads back as a float.
    format!("{v:?}")
}

/// Decay rate and frequency shift of the Markovian (Weisskopf–Wigner) limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovianModel {
    /// κ = π J(ω₀)
    pub kappa: f64,
    /// Principal-value shift Δ(ω₀).
    pub delta: f64,
    /// Total duration available for repeated measurements.
    pub t_r: f64,
}

/// `f(t) = (A/2)[1 − cos(ω_T t)]`.
pub fn drive_field(t: f64, p: &ModelParams) -> f64 {
    0.5 * p.amplitude * (1.0 - (p.omega_t * t).cos())
}

/// `∫₀ᵗ f(s) ds`, the phase accumulated from the drive.
pub fn drive_phase(t: f64, p: &ModelParams) -> f64 {
    0.5 * p.amplitude * (t - (p.omega_t * t).sin() / p.omega_t)
}

/// Normalized density of states of the square lattice, `∫ρ = 1`.
///
/// `ρ(ω) = K(1 − ((ω − ω_c)/4h)²) / (2π² h)` inside the band, zero outside.
/// Diverges logarithmically at the band center.
pub fn lattice_dos(omega: f64, p: &ModelParams) -> f64 {
    let e = (omega - p.omega_c) / (4.0 * p.h);
    if e.abs() > 1.0 {
        return 0.0;
    }
    elliptic_k_complement(e * e) / (2.0 * PI * PI * p.h)
}

/// Spectral density `J(ω) = g² ρ(ω)`.
pub fn spectral_density(omega: f64, p: &ModelParams) -> f64 {
    p.g * p.g * lattice_dos(omega, p)
}

/// Reservoir correlation function `ν(t) = ∫ J(ω) e^{−iωt} dω
/// = g² e^{−iω_c t} J₀(2ht)²`.
pub fn correlation_function(t: f64, p: &ModelParams) -> Complex64 {
    let b = bessel_j0(2.0 * p.h * t);
    Complex64::from_polar(p.g * p.g * b * b, -p.omega_c * t)
}

/// Lattice mode frequencies `ω_k` on an `L × L` periodic grid.
pub fn lattice_modes(p: &ModelParams, l: usize) -> Vec<f64> {
    let cos_k: Vec<f64> = (0..l)
        .map(|i| (2.0 * PI * i as f64 / l as f64).cos())
        .collect();
    let mut modes = Vec::with_capacity(l * l);
    for cx in &cos_k {
        for cy in &cos_k {
            modes.push(p.omega_c - 2.0 * p.h * (cx + cy));
        }
    }
    modes
}
