//! Floquet bound states of the driven atom in the lattice reservoir.
//!
//! A bound state with quasienergy ε and Fourier coefficients `c_n` solves the
//! nonlinear eigenproblem `Y(ε) c = ε c` with
//!
//! ```text
//! Y_nm(ε) = [ω₀ + A/2 + nω_T + Σ_n(ε)] δ_nm − (A/4) δ_{|n−m|,1},
//! Σ_n(ε)  = 2g² K[(4h/x)²] / (π x),          x = ε − nω_T − ω_c,
//! ```
//!
//! valid when every `x` lies outside the band `|x| ≤ 4h`. The eigenvector is
//! normalized by `c† G(ε) c = 1`, `G_n = 1 + 2g² E[(4h/x)²] / [π (x² − 16h²)]`,
//! and the residue is `Z = |Σ_n c_n|²`.
//!
//! Roots are located with Sylvester inertia: every eigenvalue of `Y(ε) − ε`
//! strictly decreases with ε inside a gap, so the number of negative
//! eigenvalues (a Sturm count on the tridiagonal matrix) grows by exactly one
//! at each root. Bisection on the count brackets every root, including pairs
//! closer than any fixed grid.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::special::{elliptic_e_complement, elliptic_k_complement};

/// Closest approach to a band edge, in units of h.
pub const EDGE_MARGIN: f64 = 1e-4;

/// Relative Richardson gate for the ω₀-derivatives.
pub const RICHARDSON_TOL: f64 = 1e-4;

/// Default ω₀ step for the finite-difference derivatives.
pub const DEFAULT_DERIVATIVE_STEP: f64 = 1e-3;

/// Default truncation `ceil(A/ω_T) + 10`.
pub fn default_n_max(p: &ModelParams) -> usize {
    (p.amplitude / p.omega_t).ceil() as usize + 10
}

fn band_offset(epsilon: f64, m: i64, p: &ModelParams) -> f64 {
    epsilon - m as f64 * p.omega_t - p.omega_c
}

/// Real self-energy of Brillouin copy `m`.
pub fn self_energy(epsilon: f64, m: i64, p: &ModelParams) -> Result<f64> {
    let x = band_offset(epsilon, m, p);
    let w = 4.0 * p.h;
    if !(x.abs() > w) {
        return Err(Error::Domain(format!(
            "self-energy argument {x} lies inside the band [-{w}, {w}]"
        )));
    }
    // 1 − (4h/x)² written as a product to keep precision next to the edge
    let mc = (x - w) * (x + w) / (x * x);
    Ok(2.0 * p.g * p.g * elliptic_k_complement(mc) / (PI * x))
}

/// Diagonal normalization weight `G_m(ε) = 1 − ∂Σ_m/∂ε`.
pub fn normalization_weight(epsilon: f64, m: i64, p: &ModelParams) -> Result<f64> {
    let x = band_offset(epsilon, m, p);
    let w = 4.0 * p.h;
    if !(x.abs() > w) {
        return Err(Error::Domain(format!(
            "normalization argument {x} lies inside the band [-{w}, {w}]"
        )));
    }
    let gap = (x - w) * (x + w);
    Ok(1.0 + 2.0 * p.g * p.g * elliptic_e_complement(gap / (x * x)) / (PI * gap))
}

/// Diagonal of `Y(ε)` for `n ∈ [−n_max, n_max]`.
fn floquet_diagonal(epsilon: f64, p: &ModelParams, n_max: usize) -> Result<Vec<f64>> {
    let n_max = n_max as i64;
    (-n_max..=n_max)
        .map(|n| Ok(p.omega0 + 0.5 * p.amplitude + n as f64 * p.omega_t + self_energy(epsilon, n, p)?))
        .collect()
}

/// The truncated Floquet matrix `Y(ε)`, dimension `2 n_max + 1`.
pub fn floquet_matrix(epsilon: f64, p: &ModelParams, n_max: usize) -> Result<DMatrix<f64>> {
    let diag = floquet_diagonal(epsilon, p, n_max)?;
    let dim = diag.len();
    let off = -0.25 * p.amplitude;
    Ok(DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            diag[i]
        } else if i.abs_diff(j) == 1 {
            off
        } else {
            0.0
        }
    }))
}

/// Number of negative eigenvalues of `Y(ε) − ε`.
fn inertia(epsilon: f64, p: &ModelParams, n_max: usize) -> Result<usize> {
    let diag = floquet_diagonal(epsilon, p, n_max)?;
    let b2 = (0.25 * p.amplitude).powi(2);
    let mut count = 0;
    let mut d = 1.0;
    for (i, a) in diag.iter().enumerate() {
        d = a - epsilon - if i == 0 { 0.0 } else { b2 / d };
        if d == 0.0 {
            d = -f64::EPSILON * (a.abs() + epsilon.abs() + 1.0);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    Ok(count)
}

#[derive(Debug, Clone, Serialize)]
pub struct FloquetBoundState {
    /// Quasienergy folded into the solver's Brillouin zone.
    pub epsilon_b: f64,
    /// Fourier coefficients `c_n`, index `n + n_max`; real for this drive.
    pub coeffs: Vec<f64>,
    /// Residue `Z = |Σ c_n|²`, the stroboscopic modulus of `c(nT)`.
    pub z: f64,
    pub d_epsilon_domega0: Option<f64>,
    pub d_z2_domega0: Option<f64>,
    pub n_max: usize,
}

impl FloquetBoundState {
    pub fn z2(&self) -> f64 {
        self.z * self.z
    }

    /// `c†G(ε)c − 1` at the stored quasienergy.
    pub fn normalization_residual(&self, p: &ModelParams) -> Result<f64> {
        let n_max = self.n_max as i64;
        let mut q = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            q += normalization_weight(self.epsilon_b, i as i64 - n_max, p)? * c * c;
        }
        Ok(q - 1.0)
    }
}

/// Bound-state search settings.
#[derive(Debug, Clone, Copy)]
pub struct FbsSolver {
    /// Fourier truncation; `None` selects [`default_n_max`].
    pub n_max: Option<usize>,
    pub edge_margin: f64,
    /// Brillouin zone index: quasienergies are folded into
    /// `[zω_T − ω_T/2, zω_T + ω_T/2]`.
    pub zone: i64,
}

impl Default for FbsSolver {
    fn default() -> Self {
        Self { n_max: None, edge_margin: EDGE_MARGIN, zone: 0 }
    }
}

/// Bound states found in one zone plus roots too close to a band edge.
#[derive(Debug, Clone, Serialize)]
pub struct FbsSearch {
    pub states: Vec<FloquetBoundState>,
    pub edge_unresolved: usize,
}

impl FbsSolver {
    pub fn with_n_max(n_max: usize) -> Self {
        Self { n_max: Some(n_max), ..Self::default() }
    }

    pub fn resolved_n_max(&self, p: &ModelParams) -> usize {
        self.n_max.unwrap_or_else(|| default_n_max(p))
    }

    pub fn solve(&self, p: &ModelParams) -> Result<FbsSearch> {
        p.validate()?;
        let n_max = self.resolved_n_max(p);
        let empty = FbsSearch { states: Vec::new(), edge_unresolved: 0 };
        let gap_width = p.omega_t - 8.0 * p.h;
        if gap_width <= 2.0 * self.edge_margin {
            return Ok(empty);
        }

        // The gap above band copy z spans one full period of quasienergies.
        let shift = self.zone as f64 * p.omega_t;
        let edge_lo = p.omega_c + 4.0 * p.h + shift;
        let edge_hi = p.omega_c + p.omega_t - 4.0 * p.h + shift;
        let lo = edge_lo + self.edge_margin;
        let hi = edge_hi - self.edge_margin;

        let count = |e: f64| inertia(e, p, n_max);
        let (c_lo, c_hi) = (count(lo)?, count(hi)?);
        let mut roots = Vec::new();
        isolate_roots(&count, lo, c_lo, hi, c_hi, &mut roots)?;

        // roots hiding between the edges and the margin
        let tiny = 1e-12 * (1.0 + edge_lo.abs());
        let edge_unresolved =
            c_lo.saturating_sub(count(edge_lo + tiny)?) + count(edge_hi - tiny)?.saturating_sub(c_hi);

        let states = roots
            .into_iter()
            .map(|e| self.bound_state(e, p, n_max))
            .collect::<Result<Vec<_>>>()?;
        Ok(FbsSearch { states, edge_unresolved })
    }

    fn bound_state(&self, epsilon: f64, p: &ModelParams, n_max: usize) -> Result<FloquetBoundState> {
        let y = floquet_matrix(epsilon, p, n_max)?;
        let eig = y.symmetric_eigen();
        let k = (0..eig.eigenvalues.len())
            .min_by(|&a, &b| {
                (eig.eigenvalues[a] - epsilon).abs().total_cmp(&(eig.eigenvalues[b] - epsilon).abs())
            })
            .expect("nonempty matrix");
        let mut c: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();

        let nm = n_max as i64;
        let mut q = 0.0;
        for (i, ci) in c.iter().enumerate() {
            q += normalization_weight(epsilon, i as i64 - nm, p)? * ci * ci;
        }
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::Numerical(format!(
                "normalization form c'Gc = {q} is not positive at epsilon = {epsilon}"
            )));
        }
        let scale = q.sqrt();
        let sum: f64 = c.iter().sum();
        let sign = if sum < 0.0 { -1.0 } else { 1.0 };
        for ci in &mut c {
            *ci *= sign / scale;
        }

        // fold into the target zone; ε − jω_T carries coefficients c_{n+j}
        let zone_lo = (self.zone as f64 - 0.5) * p.omega_t;
        let j = ((epsilon - zone_lo) / p.omega_t).floor() as i64;
        let folded = epsilon - j as f64 * p.omega_t;
        let dim = c.len() as i64;
        let shifted: Vec<f64> = (0..dim)
            .map(|i| {
                let src = i + j;
                if (0..dim).contains(&src) { c[src as usize] } else { 0.0 }
            })
            .collect();
        let z = shifted.iter().sum::<f64>().powi(2);

        Ok(FloquetBoundState {
            epsilon_b: folded,
            coeffs: shifted,
            z,
            d_epsilon_domega0: None,
            d_z2_domega0: None,
            n_max,
        })
    }
}

fn isolate_roots(
    count: &impl Fn(f64) -> Result<usize>,
    lo: f64,
    c_lo: usize,
    hi: f64,
    c_hi: usize,
    out: &mut Vec<f64>,
) -> Result<()> {
    if c_hi == c_lo {
        return Ok(());
    }
    let mid = 0.5 * (lo + hi);
    if mid <= lo || mid >= hi {
        // interval exhausted: several roots coincide to rounding
        for _ in c_lo..c_hi {
            out.push(mid);
        }
        return Ok(());
    }
    if c_hi == c_lo + 1 {
        let (mut a, mut b) = (lo, hi);
        loop {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if count(m)? == c_lo {
                a = m;
            } else {
                b = m;
            }
        }
        out.push(0.5 * (a + b));
        return Ok(());
    }
    let c_mid = count(mid)?;
    isolate_roots(count, lo, c_lo, mid, c_mid, out)?;
    isolate_roots(count, mid, c_mid, hi, c_hi, out)
}

/// All bound states in the first Brillouin zone.
pub fn solve_fbs(p: &ModelParams, n_max: usize) -> Result<Vec<FloquetBoundState>> {
    Ok(FbsSolver::with_n_max(n_max).solve(p)?.states)
}

/// Quasienergy difference reduced to `(−ω_T/2, ω_T/2]`.
fn wrapped_difference(a: f64, b: f64, omega_t: f64) -> f64 {
    let d = a - b;
    d - omega_t * (d / omega_t).round()
}

fn matching_state<'a>(
    base: &FloquetBoundState,
    candidates: &'a [FloquetBoundState],
    p: &ModelParams,
    window: f64,
) -> Option<&'a FloquetBoundState> {
    candidates
        .iter()
        .map(|s| (wrapped_difference(s.epsilon_b, base.epsilon_b, p.omega_t).abs(), s))
        .filter(|(d, _)| *d <= window)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, s)| s)
}

/// Bound states with `∂ε/∂ω₀` and `∂Z²/∂ω₀` filled in.
///
/// Central differences at steps `delta` and `delta/2` must agree within
/// [`RICHARDSON_TOL`]; the Richardson-extrapolated value is returned.
pub fn fbs_derivatives(p: &ModelParams, solver: &FbsSolver, delta: f64) -> Result<Vec<FloquetBoundState>> {
    if !(delta > 0.0) {
        return Err(Error::Config(format!("derivative step must be positive, got {delta}")));
    }
    // keep the truncation fixed across the stencil
    let solver = FbsSolver { n_max: Some(solver.resolved_n_max(p)), ..*solver };
    let base = solver.solve(p)?.states;
    if base.is_empty() {
        return Ok(base);
    }
    let shifted = |s: f64| -> Result<Vec<FloquetBoundState>> {
        Ok(solver.solve(&p.with_omega0(p.omega0 + s))?.states)
    };
    let stencil = [shifted(delta)?, shifted(-delta)?, shifted(0.5 * delta)?, shifted(-0.5 * delta)?];
    // quasienergies move at most by the ω₀ shift when 0 < ∂ε/∂ω₀ ≤ 1
    let window = 4.0 * delta;

    base.into_iter()
        .map(|mut st| {
            let pick = |set: &[FloquetBoundState]| {
                matching_state(&st, set, p, window).cloned().ok_or_else(|| {
                    Error::Stencil(format!(
                        "bound state at epsilon = {} vanishes within omega0 +- {delta}",
                        st.epsilon_b
                    ))
                })
            };
            let plus = pick(&stencil[0])?;
            let minus = pick(&stencil[1])?;
            let plus_h = pick(&stencil[2])?;
            let minus_h = pick(&stencil[3])?;

            let d_eps = |a: &FloquetBoundState, b: &FloquetBoundState, h: f64| {
                wrapped_difference(a.epsilon_b, b.epsilon_b, p.omega_t) / (2.0 * h)
            };
            let d_z2 = |a: &FloquetBoundState, b: &FloquetBoundState, h: f64| (a.z2() - b.z2()) / (2.0 * h);

            let eps = richardson(d_eps(&plus, &minus, delta), d_eps(&plus_h, &minus_h, 0.5 * delta), 1e-10)
                .map_err(|e| Error::Numerical(format!("d epsilon/d omega0: {e}")))?;
            let z2 = richardson(d_z2(&plus, &minus, delta), d_z2(&plus_h, &minus_h, 0.5 * delta), 1e-8)
                .map_err(|e| Error::Numerical(format!("d Z^2/d omega0: {e}")))?;
            st.d_epsilon_domega0 = Some(eps);
            st.d_z2_domega0 = Some(z2);
            Ok(st)
        })
        .collect()
}

fn richardson(coarse: f64, fine: f64, floor: f64) -> std::result::Result<f64, String> {
    let scale = fine.abs().max(floor);
    if (coarse - fine).abs() > RICHARDSON_TOL * scale {
        return Err(format!("Richardson check failed: step h gives {coarse}, h/2 gives {fine}"));
    }
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Band copies `[mω_T + ω_c − 4h, mω_T + ω_c + 4h]` clipped to the first zone.
pub fn band_intervals(p: &ModelParams) -> Vec<(i64, f64, f64)> {
    let half = 0.5 * p.omega_t;
    let reach = ((half + p.omega_c.abs() + 4.0 * p.h) / p.omega_t).ceil() as i64 + 1;
    (-reach..=reach)
        .filter_map(|m| {
            let centre = m as f64 * p.omega_t + p.omega_c;
            let lo = (centre - 4.0 * p.h).max(-half);
            let hi = (centre + 4.0 * p.h).min(half);
            (lo < hi).then_some((m, lo, hi))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScanAxis {
    #[serde(rename = "A")]
    Amplitude,
    #[serde(rename = "omega_T")]
    DriveFrequency,
}

impl ScanAxis {
    pub fn name(&self) -> &'static str {
        match self {
            ScanAxis::Amplitude => "A",
            ScanAxis::DriveFrequency => "omega_T",
        }
    }

    pub fn apply(&self, p: &ModelParams, value: f64) -> ModelParams {
        match self {
            ScanAxis::Amplitude => ModelParams { amplitude: value, ..*p },
            ScanAxis::DriveFrequency => ModelParams { omega_t: value, ..*p },
        }
    }
}

impl std::str::FromStr for ScanAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(ScanAxis::Amplitude),
            "omega_T" => Ok(ScanAxis::DriveFrequency),
            other => Err(Error::Config(format!("unknown scan axis '{other}', expected A or omega_T"))),
        }
    }
}

/// One axis value of a spectrum scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    pub value: f64,
    pub band_edges: Vec<(i64, f64, f64)>,
    /// `(ε_b, Z)` for each bound state, ascending in ε_b.
    pub branches: Vec<(f64, f64)>,
    pub edge_unresolved: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumScan {
    pub axis: ScanAxis,
    pub points: Vec<ScanPoint>,
}

/// Band intervals and bound states over a sweep of `A` or `ω_T`.
pub fn scan_spectrum(p: &ModelParams, axis: ScanAxis, values: &[f64], solver: &FbsSolver) -> Result<SpectrumScan> {
    if let Some(v) = values.iter().find(|v| !(**v > 0.0) && !(axis == ScanAxis::Amplitude && **v == 0.0)) {
        return Err(Error::Config(format!("scan values must be positive, got {v}")));
    }
    let points = values
        .par_iter()
        .map(|&value| {
            let q = axis.apply(p, value);
            let search = solver.solve(&q)?;
            let mut branches: Vec<(f64, f64)> = search.states.iter().map(|s| (s.epsilon_b, s.z)).collect();
            branches.sort_by(|a, b| a.0.total_cmp(&b.0));
            Ok(ScanPoint {
                value,
                band_edges: band_intervals(&q),
                branches,
                edge_unresolved: search.edge_unresolved,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumScan { axis, points })
}
