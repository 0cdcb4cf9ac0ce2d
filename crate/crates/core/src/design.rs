//! Inverse design of the drive amplitude.
//!
//! For a target `Z² = e^{−a/N}` the long-time prefactor `y_N(Z²)` is close to
//! `2/(e^a + 1)` for every N, which restores `N²` scaling of the long-time
//! QFI. The amplitude is found by tabulating `Z²(A)` and bisecting inside the
//! bracketing cell.

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{asymptotic_qfi, y_n};
use crate::error::{Error, Result};
use crate::floquet::{fbs_derivatives, FbsSolver, FloquetBoundState, DEFAULT_DERIVATIVE_STEP};
use crate::model::ModelParams;

/// Default exponent of the target residue.
pub const DEFAULT_A: f64 = 1.1;

/// `(A, Z²)`; `z2` is `None` where no bound state exists.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResiduePoint {
    pub amplitude: f64,
    pub z2: Option<f64>,
}

/// Dominant bound state: the one with the largest residue.
fn dominant(states: Vec<FloquetBoundState>) -> Option<FloquetBoundState> {
    states.into_iter().max_by(|a, b| a.z.total_cmp(&b.z))
}

fn residue_at(p: &ModelParams, amplitude: f64, solver: &FbsSolver) -> Result<Option<f64>> {
    let states = solver.solve(&p.with_amplitude(amplitude))?.states;
    Ok(dominant(states).map(|s| s.z2()))
}

/// `Z²(A)` of the dominant bound state at each amplitude.
pub fn residue_curve(p: &ModelParams, amplitudes: &[f64], solver: &FbsSolver) -> Result<Vec<ResiduePoint>> {
    amplitudes
        .par_iter()
        .map(|&a| Ok(ResiduePoint { amplitude: a, z2: residue_at(p, a, solver)? }))
        .collect()
}

/// Which bound-state region of the A axis to design in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// First region in increasing A.
    Lower,
    /// Second region in increasing A.
    Upper,
    /// Region by zero-based index.
    Index(usize),
}

impl Branch {
    fn index(&self) -> usize {
        match self {
            Branch::Lower => 0,
            Branch::Upper => 1,
            Branch::Index(i) => *i,
        }
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lower" => Ok(Branch::Lower),
            "upper" => Ok(Branch::Upper),
            other => other
                .parse::<usize>()
                .map(Branch::Index)
                .map_err(|_| Error::Config(format!("unknown branch '{other}', expected lower, upper or an index"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DesignOptions {
    pub branch: Branch,
    /// Tabulation range and resolution of `Z²(A)`.
    pub a_min: f64,
    pub a_max: f64,
    pub a_step: f64,
    /// Tolerance on `|Z² − e^{−a/N}|`.
    pub tol: f64,
    pub solver: FbsSolver,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            branch: Branch::Lower,
            a_min: 0.05,
            a_max: 40.0,
            a_step: 0.05,
            tol: 1e-4,
            solver: FbsSolver::default(),
        }
    }
}

impl DesignOptions {
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.a_max - self.a_min) / self.a_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.a_min + i as f64 * self.a_step).collect()
    }
}

/// Maximal runs of consecutive grid points that carry a bound state.
pub fn fbs_regions(curve: &[ResiduePoint]) -> Vec<Vec<(f64, f64)>> {
    let mut regions = Vec::new();
    let mut current: Vec<(f64, f64)> = Vec::new();
    for pt in curve {
        match pt.z2 {
            Some(z2) => current.push((pt.amplitude, z2)),
            None if !current.is_empty() => regions.push(std::mem::take(&mut current)),
            None => {}
        }
    }
    if !current.is_empty() {
        regions.push(current);
    }
    regions
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignResult {
    #[serde(rename = "N")]
    pub n_atoms: u32,
    pub a: f64,
    #[serde(rename = "A_opt")]
    pub a_opt: f64,
    pub z2_target: f64,
    pub z2_achieved: f64,
    pub y_value: f64,
    /// `2/(e^a + 1)`.
    pub predicted_prefactor: f64,
    /// Number of grid cells in the region that cross the target.
    pub multiplicity: usize,
    pub branch: Branch,
    pub epsilon_b: f64,
    pub d_epsilon_domega0: f64,
    pub d_z2_domega0: f64,
    /// Coefficient of `t²` in the long-time QFI.
    pub f_slope: f64,
}

/// A tabulated residue curve reused across several designs.
#[derive(Debug, Clone)]
pub struct ResidueTable {
    pub curve: Vec<ResiduePoint>,
}

impl ResidueTable {
    pub fn new(p: &ModelParams, opts: &DesignOptions) -> Result<Self> {
        Ok(Self { curve: residue_curve(p, &opts.grid(), &opts.solver)? })
    }
}

/// Smallest amplitude in the selected region with `Z²(A) = e^{−a/N}`.
pub fn design_optimal_a(p: &ModelParams, n: u32, a: f64, opts: &DesignOptions) -> Result<DesignResult> {
    let table = ResidueTable::new(p, opts)?;
    design_with_table(p, n, a, opts, &table)
}

pub fn design_with_table(
    p: &ModelParams,
    n: u32,
    a: f64,
    opts: &DesignOptions,
    table: &ResidueTable,
) -> Result<DesignResult> {
    if !(a > 0.0) || n < 1 {
        return Err(Error::Config(format!("design needs a > 0 and N >= 1, got a = {a}, N = {n}")));
    }
    let target = (-a / n as f64).exp();
    let regions = fbs_regions(&table.curve);
    let Some(region) = regions.get(opts.branch.index()) else {
        return Err(Error::Infeasible { target, min: f64::NAN, max: f64::NAN });
    };

    let (min, max) = region
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, z2)| (lo.min(z2), hi.max(z2)));
    let cells: Vec<usize> = (0..region.len().saturating_sub(1))
        .filter(|&i| (region[i].1 - target) * (region[i + 1].1 - target) <= 0.0)
        .collect();
    let Some(&first) = cells.first() else {
        return Err(Error::Infeasible { target, min, max });
    };

    let (mut lo, mut hi) = (region[first], region[first + 1]);
    let mut best = if (lo.1 - target).abs() < (hi.1 - target).abs() { lo } else { hi };
    for _ in 0..100 {
        if (best.1 - target).abs() < opts.tol {
            break;
        }
        let mid = 0.5 * (lo.0 + hi.0);
        let Some(z2) = residue_at(p, mid, &opts.solver)? else {
            return Err(Error::Numerical(format!("bound state vanished inside the design cell at A = {mid}")));
        };
        let point = (mid, z2);
        if (lo.1 - target) * (z2 - target) <= 0.0 {
            hi = point;
        } else {
            lo = point;
        }
        best = point;
    }
    if (best.1 - target).abs() >= opts.tol {
        return Err(Error::Numerical(format!(
            "design bisection stalled at A = {} with Z^2 = {}, target {target}",
            best.0, best.1
        )));
    }

    let q = p.with_amplitude(best.0);
    let states = fbs_derivatives(&q, &opts.solver, DEFAULT_DERIVATIVE_STEP)?;
    let st = dominant(states).ok_or_else(|| Error::Numerical(format!("no bound state at A = {}", best.0)))?;
    let asym = asymptotic_qfi(&st, n)?;

    Ok(DesignResult {
        n_atoms: n,
        a,
        a_opt: best.0,
        z2_target: target,
        z2_achieved: st.z2(),
        y_value: y_n(st.z2(), n),
        predicted_prefactor: 2.0 / (a.exp() + 1.0),
        multiplicity: cells.len(),
        branch: opts.branch,
        epsilon_b: st.epsilon_b,
        d_epsilon_domega0: st.d_epsilon_domega0.unwrap_or(f64::NAN),
        d_z2_domega0: st.d_z2_domega0.unwrap_or(f64::NAN),
        f_slope: asym.t2_coefficient(),
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_exponent(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> ModelParams {
        ModelParams { n_atoms: 20, ..ModelParams::default() }
    }

    fn coarse() -> DesignOptions {
        DesignOptions { a_max: 16.0, ..DesignOptions::default() }
    }

    #[test]
    fn decoupled_residue_is_one() {
        let p = ModelParams { g: 1e-6, ..reference() };
        let curve = residue_curve(&p, &[7.0, 11.0, 31.0], &FbsSolver::default()).unwrap();
        for pt in curve {
            assert!((pt.z2.unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn undriven_point_has_no_state() {
        let curve = residue_curve(&reference(), &[0.0], &FbsSolver::default()).unwrap();
        assert!(curve[0].z2.is_none());
    }

    #[test]
    fn design_hits_target() {
        let p = reference();
        let r = design_optimal_a(&p, 20, DEFAULT_A, &coarse()).unwrap();
        assert!((r.z2_achieved - (-1.1f64 / 20.0).exp()).abs() < 1e-4);
        assert!((r.y_value / 0.5 - 1.0).abs() < 0.02, "y = {}", r.y_value);
        assert!(r.multiplicity >= 1);
        // leading term equals 2/(e^a + 1)(N ∂ε)² within 3%
        let predicted = r.predicted_prefactor * (20.0 * r.d_epsilon_domega0).powi(2);
        assert!((r.f_slope / predicted - 1.0).abs() < 0.03);
    }

    #[test]
    fn infeasible_target_reports_range() {
        let p = reference();
        let err = design_optimal_a(&p, 20, 1e-6, &coarse()).unwrap_err();
        match err {
            Error::Infeasible { target, min, max } => {
                assert!(target > max);
                assert!(min < max);
            }
            other => panic!("unexpected error {other}"),
        }
        assert!(design_optimal_a(&p, 20, -1.0, &coarse()).is_err());
    }

    #[test]
    fn regions_split_on_gaps() {
        let pts = [
            ResiduePoint { amplitude: 1.0, z2: None },
            ResiduePoint { amplitude: 2.0, z2: Some(0.5) },
            ResiduePoint { amplitude: 3.0, z2: Some(0.6) },
            ResiduePoint { amplitude: 4.0, z2: None },
            ResiduePoint { amplitude: 5.0, z2: Some(0.1) },
        ];
        let regions = fbs_regions(&pts);
        assert_eq!(regions.len(), 2);
        assert_eq!(regions[0], vec![(2.0, 0.5), (3.0, 0.6)]);
    }

    #[test]
    fn exponent_fit_recovers_power_law() {
        let x = [4.0, 8.0, 12.0, 20.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(2.0)).collect();
        assert!((fit_exponent(&x, &y) - 2.0).abs() < 1e-12);
    }
}
