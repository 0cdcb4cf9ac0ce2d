//! Quantum Fisher information of the N-atom GHZ probe.
//!
//! Under local amplitude damping the GHZ state evolves into a direct sum
//! `ρ = ρ₁ ⊕ ρ₂`: a 2×2 block on `{|e⟩^⊗N, |g⟩^⊗N}` and a diagonal block
//! holding the mixed-excitation populations. The QFI with respect to ω₀ is
//! additive over the blocks, `F = F⁽¹⁾ + F⁽²⁾`, and depends only on the
//! amplitude `c` and its sensitivity `∂c/∂ω₀`.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::AmplitudeTrajectory;
use crate::error::{Error, Result};

/// Eigenvalues at or below this fraction of the block trace count as zero.
pub const RANK_THRESHOLD: f64 = 1e-14;

/// Population clamp applied before evaluating `F⁽²⁾`.
pub const POPULATION_CLAMP: f64 = 1e-12;

/// Largest atom number accepted by the brute-force density-matrix oracle.
pub const BRUTE_FORCE_MAX_ATOMS: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QfiResult {
    pub t: f64,
    pub total: f64,
    pub f1: f64,
    pub f2: f64,
}

/// `p′ = ∂|c|²/∂ω₀ = 2 Re(c̄ ∂c)`.
///
/// Values below the rounding floor of the product carry no significant
/// digits and are returned as zero; ρ₂ amplifies them by `p^{1−N}` once
/// the population has decayed.
pub fn population_derivative(c: Complex64, dc: Complex64) -> f64 {
    let dp = 2.0 * (c.conj() * dc).re;
    if dp.abs() <= 4.0 * f64::EPSILON * c.norm() * dc.norm() {
        0.0
    } else {
        dp
    }
}

/// QFI of the diagonal block ρ₂.
///
/// Closed form of the binomial sum
/// `½ Σ_{m=1}^{N−1} C(N,m) {[p^m(1−p)^{N−m}]′}² / [p^m(1−p)^{N−m}]`, written as
/// `(p′²/2)[N/(p(1−p)) − N²(1−p)^{N−2} − N² p^{N−2}]`. For `N > 30` the sum is
/// accumulated term by term in log space.
pub fn qfi_f2(p: f64, dp: f64, n: u32) -> f64 {
    if n <= 1 || dp == 0.0 || !(p > 0.0 && p < 1.0) {
        return 0.0;
    }
    let p = p.clamp(POPULATION_CLAMP, 1.0 - POPULATION_CLAMP);
    let nf = n as f64;
    let value = if n > 30 {
        f2_log_sum(p, dp, n)
    } else {
        let bracket = nf / (p * (1.0 - p))
            - nf * nf * (1.0 - p).powi(n as i32 - 2)
            - nf * nf * p.powi(n as i32 - 2);
        0.5 * dp * dp * bracket
    };
    value.max(0.0)
}

fn ln_binomial(n: u32, m: u32) -> f64 {
    // ln C(n, m) by summing logs; n is a modest atom count
    let m = m.min(n - m);
    (0..m).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

fn f2_log_sum(p: f64, dp: f64, n: u32) -> f64 {
    let nf = n as f64;
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let terms: Vec<(f64, f64)> = (1..n)
        .map(|m| {
            let mf = m as f64;
            let log_weight = ln_binomial(n, m) + mf * lp + (nf - mf) * lq;
            let score = mf / p - (nf - mf) / (1.0 - p);
            (log_weight, score * score)
        })
        .collect();
    let max_log = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    let scaled: f64 = terms.iter().map(|(lw, s)| (lw - max_log).exp() * s).sum();
    0.5 * dp * dp * scaled * max_log.exp()
}

/// The 2×2 block ρ₁ and its ω₀-derivative, basis `{|e⟩^⊗N, |g⟩^⊗N}`.
pub fn block_one(c: Complex64, dc: Complex64, n: u32) -> (Matrix2<Complex64>, Matrix2<Complex64>) {
    let nf = n as f64;
    let p = c.norm_sqr().clamp(0.0, 1.0);
    let dp = population_derivative(c, dc);
    let q = 1.0 - p;
    let cn = c.powu(n);
    let dcn = nf * c.powu(n - 1) * dc;
    let rho = Matrix2::new(
        Complex64::from(0.5 * p.powi(n as i32)),
        0.5 * cn,
        0.5 * cn.conj(),
        Complex64::from(0.5 * (1.0 + q.powi(n as i32))),
    );
    let drho = Matrix2::new(
        Complex64::from(0.5 * nf * p.powi(n as i32 - 1) * dp),
        0.5 * dcn,
        0.5 * dcn.conj(),
        Complex64::from(-0.5 * nf * q.powi(n as i32 - 1) * dp),
    );
    (rho, drho)
}

/// Eigen-system of ρ₁ with its ω₀-derivatives.
struct BlockEigen {
    /// `[λ₊, λ₋]`
    lambda: [f64; 2],
    dlambda: [f64; 2],
    vecs: [[Complex64; 2]; 2],
    drho: Matrix2<Complex64>,
    trace: f64,
}

/// Eigen-decomposition of ρ₁ in a smooth gauge.
///
/// With `ρ₁ = [[a, b], [b̄, d]]`, `b = |b| e^{iφ}` and `tan 2θ = 2|b|/(a − d)`,
/// the eigenvectors are `(cos θ e^{iφ}, sin θ)` and `(−sin θ e^{iφ}, cos θ)`.
/// The small eigenvalue is taken from the exact determinant
/// `det ρ₁ = p^N (1−p)^N / 4` as `λ₋ = det/λ₊`, and its derivative from
/// `det′ = λ₊′λ₋ + λ₊λ₋′`, so neither suffers cancellation when ρ₁ is close
/// to rank one.
fn block_eigen(c: Complex64, dc: Complex64, n: u32) -> BlockEigen {
    let (rho, drho) = block_one(c, dc, n);
    let a = rho[(0, 0)].re;
    let d = rho[(1, 1)].re;
    let b = rho[(0, 1)];
    let half_gap = 0.5 * (a - d);
    let r = (half_gap * half_gap + b.norm_sqr()).sqrt();
    let lambda_plus = 0.5 * (a + d) + r;
    let theta = 0.5 * b.norm().atan2(half_gap);
    let phase = if b.norm() > 0.0 { b / b.norm() } else { Complex64::new(1.0, 0.0) };
    let (sn, cs) = theta.sin_cos();
    let vecs = [[phase * cs, Complex64::from(sn)], [-phase * sn, Complex64::from(cs)]];

    let nf = n as f64;
    let p = c.norm_sqr().clamp(0.0, 1.0);
    let q = 1.0 - p;
    let dp = population_derivative(c, dc);
    let det = 0.25 * p.powi(n as i32) * q.powi(n as i32);
    let ddet = 0.25 * nf * dp * (p.powi(n as i32 - 1) * q.powi(n as i32) - p.powi(n as i32) * q.powi(n as i32 - 1));
    let lambda_minus = det / lambda_plus;
    let dlambda_plus = inner(&vecs[0], &apply(&drho, &vecs[0])).re;
    let dlambda_minus = (ddet - dlambda_plus * lambda_minus) / lambda_plus;

    BlockEigen {
        lambda: [lambda_plus, lambda_minus],
        dlambda: [dlambda_plus, dlambda_minus],
        vecs,
        drho,
        trace: a + d,
    }
}

fn inner(u: &[Complex64; 2], v: &[Complex64; 2]) -> Complex64 {
    u[0].conj() * v[0] + u[1].conj() * v[1]
}

fn apply(m: &Matrix2<Complex64>, v: &[Complex64; 2]) -> [Complex64; 2] {
    [m[(0, 0)] * v[0] + m[(0, 1)] * v[1], m[(1, 0)] * v[0] + m[(1, 1)] * v[1]]
}

/// QFI of the 2×2 block ρ₁.
///
/// Eigenvalue derivatives are `λᵢ′ = ⟨λᵢ|∂ρ|λᵢ⟩`; eigenvector derivatives
/// follow from first-order perturbation theory in the parallel-transport
/// gauge, `|λᵢ′⟩ = Σ_{j≠i} ⟨λⱼ|∂ρ|λᵢ⟩/(λᵢ − λⱼ) |λⱼ⟩`. The QFI is then
///
/// ```text
/// Σᵢ [λᵢ′²/λᵢ + 4λᵢ⟨λᵢ′|λᵢ′⟩] − Σᵢⱼ 8λᵢλⱼ/(λᵢ+λⱼ) |⟨λᵢ|λⱼ′⟩|²
/// ```
///
/// An eigenvalue at or below the rank threshold keeps only its `λ′²/λ`
/// term, evaluated from the stable `λ` and `λ′` (its other terms are
/// `O(λ)`); an exactly vanishing eigenvalue is dropped.
pub fn qfi_f1(c: Complex64, dc: Complex64, n: u32) -> f64 {
    let BlockEigen { lambda, dlambda, vecs, drho, trace } = block_eigen(c, dc, n);
    let cutoff = RANK_THRESHOLD * trace;

    let dvecs: Vec<[Complex64; 2]> = (0..2)
        .map(|i| {
            let j = 1 - i;
            let coupling = inner(&vecs[j], &apply(&drho, &vecs[i]));
            let coeff = coupling / (lambda[i] - lambda[j]);
            [coeff * vecs[j][0], coeff * vecs[j][1]]
        })
        .collect();

    let mut f = 0.0;
    for i in 0..2 {
        if lambda[i] > 0.0 {
            f += dlambda[i] * dlambda[i] / lambda[i];
        }
    }
    let support: Vec<usize> = (0..2).filter(|&i| lambda[i] > cutoff).collect();
    for &i in &support {
        f += 4.0 * lambda[i] * inner(&dvecs[i], &dvecs[i]).re;
    }
    for &i in &support {
        for &j in &support {
            let overlap = inner(&vecs[i], &dvecs[j]).norm_sqr();
            f -= 8.0 * lambda[i] * lambda[j] / (lambda[i] + lambda[j]) * overlap;
        }
    }
    f.max(0.0)
}

/// QFI of ρ₁ from the eigenbasis form `Σᵢⱼ 2|⟨λᵢ|∂ρ|λⱼ⟩|²/(λᵢ+λⱼ)`.
///
/// Algebraically identical to [`qfi_f1`] but needs no eigenvector
/// derivatives; kept as a cross-check.
pub fn qfi_f1_eigenbasis(c: Complex64, dc: Complex64, n: u32) -> f64 {
    let BlockEigen { lambda, dlambda, vecs, drho, .. } = block_eigen(c, dc, n);
    let mut f = 0.0;
    for i in 0..2 {
        if lambda[i] > 0.0 {
            f += dlambda[i] * dlambda[i] / lambda[i];
        }
    }
    let off = inner(&vecs[0], &apply(&drho, &vecs[1])).norm_sqr();
    f + 4.0 * off / (lambda[0] + lambda[1])
}

/// `F⁽¹⁾`, `F⁽²⁾` and their sum at one time.
pub fn qfi_point(t: f64, c: Complex64, dc: Complex64, n: u32) -> QfiResult {
    let p = c.norm_sqr().clamp(0.0, 1.0);
    let dp = population_derivative(c, dc);
    let f1 = qfi_f1(c, dc, n);
    let f2 = qfi_f2(p, dp, n);
    QfiResult { t, total: f1 + f2, f1, f2 }
}

/// QFI at every grid point of a trajectory.
pub fn qfi_series(traj: &AmplitudeTrajectory, n: u32) -> Result<Vec<QfiResult>> {
    if traj.dc_domega0.len() != traj.c.len() {
        return Err(Error::Config("trajectory carries no sensitivities".into()));
    }
    if n < 1 {
        return Err(Error::Config("N must be >= 1".into()));
    }
    Ok((0..traj.len())
        .into_par_iter()
        .map(|i| qfi_point(traj.times[i], traj.c[i], traj.dc_domega0[i], n))
        .collect())
}

/// Full `2^N × 2^N` GHZ density matrix for amplitude `c`.
///
/// Built literally as `½[p|e⟩⟨e| + (1−p)|g⟩⟨g|]^⊗N + ½[|g⟩⟨g|^⊗N + (c^N |e⟩⟨g|^⊗N + h.c.)]`.
/// Basis index bit `j` set means atom `j` excited; index 0 is `|g⟩^⊗N`.
pub fn ghz_density_matrix(c: Complex64, n: u32) -> DMatrix<Complex64> {
    let p = c.norm_sqr();
    let zero = Complex64::new(0.0, 0.0);
    // single-atom basis order (|g⟩, |e⟩) so that bit 1 = excited
    let single = DMatrix::from_row_slice(2, 2, &[Complex64::from(1.0 - p), zero, zero, Complex64::from(p)]);
    let mut product = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    for _ in 0..n {
        product = product.kronecker(&single);
    }
    let dim = 1usize << n;
    let mut rho = product * Complex64::from(0.5);
    let all_excited = dim - 1;
    rho[(0, 0)] += 0.5;
    let cn = c.powu(n);
    rho[(all_excited, 0)] += 0.5 * cn;
    rho[(0, all_excited)] += 0.5 * cn.conj();
    rho
}

/// Result of the brute-force QFI evaluation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BruteForceQfi {
    pub qfi: f64,
    /// Relative disagreement between the step-δ and step-δ/2 derivatives.
    pub richardson_discrepancy: f64,
}

/// Finite-difference step (energy units) used by the brute-force oracle.
pub const BRUTE_FORCE_STEP: f64 = 1e-4;

/// QFI from the full density matrix, independent of the block closed forms.
///
/// ω₀ enters through `c(ω₀ + δ) = c + δ ∂c`. The derivative `∂ρ` is taken
/// by central differences with Richardson extrapolation between δ and δ/2,
/// `ρ` is diagonalized numerically, and the QFI is summed in the eigenbasis
/// form `Σᵢⱼ 2|⟨λᵢ|∂ρ|λⱼ⟩|²/(λᵢ+λⱼ)`.
pub fn brute_force_qfi(c: Complex64, dc: Complex64, n: u32) -> Result<BruteForceQfi> {
    if n < 1 || n > BRUTE_FORCE_MAX_ATOMS {
        return Err(Error::Size(format!(
            "brute-force QFI supports 1 <= N <= {BRUTE_FORCE_MAX_ATOMS}, got {n}"
        )));
    }
    let rho_at = |shift: f64| ghz_density_matrix(c + dc * shift, n);
    let central = |delta: f64| (rho_at(delta) - rho_at(-delta)) / Complex64::from(2.0 * delta);

    let d_coarse = central(BRUTE_FORCE_STEP);
    let d_fine = central(0.5 * BRUTE_FORCE_STEP);
    let drho = (d_fine.clone() * Complex64::from(4.0) - d_coarse.clone()) / Complex64::from(3.0);
    let scale = d_fine.norm().max(1e-300);
    let discrepancy = (d_fine - d_coarse).norm() / scale;

    let rho = rho_at(0.0);
    let eig = rho.symmetric_eigen();
    let basis = &eig.eigenvectors;
    let projected = basis.adjoint() * drho * basis;
    let cutoff = RANK_THRESHOLD;
    let dim = eig.eigenvalues.len();
    let mut f = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            let s = eig.eigenvalues[i] + eig.eigenvalues[j];
            if s > cutoff {
                f += 2.0 * projected[(i, j)].norm_sqr() / s;
            }
        }
    }
    Ok(BruteForceQfi { qfi: f, richardson_discrepancy: discrepancy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn binomial(n: u32, m: u32) -> f64 {
        (0..m).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    /// Direct binomial-sum definition of F⁽²⁾.
    fn f2_oracle(p: f64, dp: f64, n: u32) -> f64 {
        let nf = n as f64;
        (1..n)
            .map(|m| {
                let mf = m as f64;
                let w = p.powf(mf) * (1.0 - p).powf(nf - mf);
                let dw = dp * (mf * p.powf(mf - 1.0) * (1.0 - p).powf(nf - mf)
                    - (nf - mf) * p.powf(mf) * (1.0 - p).powf(nf - mf - 1.0));
                binomial(n, m) * dw * dw / (2.0 * w)
            })
            .sum()
    }

    #[test]
    fn f2_single_atom_and_constant_population_vanish() {
        for &p in &[0.1, 0.5, 0.93] {
            assert_eq!(qfi_f2(p, 0.7, 1), 0.0);
            assert_eq!(qfi_f2(p, 0.0, 5), 0.0);
        }
        assert_eq!(qfi_f2(0.0, 1.0, 4), 0.0);
        assert_eq!(qfi_f2(1.0, 1.0, 4), 0.0);
    }

    #[test]
    fn f2_matches_binomial_sum() {
        assert_relative_eq!(qfi_f2(0.6, 0.2, 3), f2_oracle(0.6, 0.2, 3), max_relative = 1e-10);
        for n in 2..=30 {
            for &p in &[0.05, 0.3, 0.77, 0.99] {
                assert_relative_eq!(qfi_f2(p, 1.3, n), f2_oracle(p, 1.3, n), max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn f2_log_space_branch_is_continuous() {
        let closed = |p: f64, dp: f64, n: u32| {
            let nf = n as f64;
            0.5 * dp * dp
                * (nf / (p * (1.0 - p)) - nf * nf * (1.0 - p).powi(n as i32 - 2) - nf * nf * p.powi(n as i32 - 2))
        };
        for &p in &[0.2, 0.6, 0.95] {
            assert_relative_eq!(qfi_f2(p, 0.4, 31), closed(p, 0.4, 31), max_relative = 1e-9);
            assert_relative_eq!(qfi_f2(p, 0.4, 200), closed(p, 0.4, 200), max_relative = 1e-9);
        }
    }

    #[test]
    fn ideal_evolution_gives_heisenberg_scaling() {
        let omega0 = 1.0;
        for n in [1u32, 2, 5, 20] {
            for &t in &[0.5, 3.0, 40.0] {
                let c = Complex64::from_polar(1.0, -omega0 * t);
                let dc = Complex64::new(0.0, -t) * c;
                let r = qfi_point(t, c, dc, n);
                let ideal = (n as f64 * t).powi(2);
                assert_relative_eq!(r.f1, ideal, max_relative = 1e-10);
                assert!(r.f2 <= 1e-12 * ideal);
            }
        }
    }

    fn markov_closed(kappa: f64, n: u32, t: f64) -> f64 {
        let nf = n as f64;
        2.0 * nf * nf * t * t
            / (1.0 + ((2.0 * kappa * t).exp() - 1.0).powi(n as i32) + (2.0 * nf * kappa * t).exp())
    }

    #[test]
    fn markovian_amplitude_reproduces_closed_form() {
        let kappa = 0.1;
        for n in 1..=10u32 {
            for &t in &[1e-3, 0.3, 2.0, 9.0, 50.0] {
                let c = Complex64::new(-kappa * t, -1.2 * t).exp();
                let dc = Complex64::new(0.0, -t) * c;
                let r = qfi_point(t, c, dc, n);
                assert_relative_eq!(r.total, markov_closed(kappa, n, t), max_relative = 1e-10);
            }
        }
        // N = 1 reduces to t² e^{−2κt}
        let t: f64 = 4.0;
        let c = Complex64::new(-kappa * t, -t).exp();
        let r = qfi_point(t, c, Complex64::new(0.0, -t) * c, 1);
        assert_relative_eq!(r.total, t * t * (-2.0 * kappa * t).exp(), max_relative = 1e-12);
    }

    #[test]
    fn rounding_noise_in_population_derivative_is_dropped() {
        let t = 50.0;
        let c = Complex64::new(-0.1 * t, -1.37 * t).exp();
        assert_eq!(population_derivative(c, Complex64::new(0.0, -t) * c), 0.0);
        let dc = Complex64::new(1e-3, 0.0) * c;
        assert!(population_derivative(c, dc) > 0.0);
    }

    #[test]
    fn perturbative_and_eigenbasis_forms_agree() {
        for &(re, im, dre, dim) in &[(0.7, 0.2, -0.1, 0.3), (0.1, -0.5, 2.0, -1.0), (0.95, 0.0, 0.0, 3.0)] {
            let c = Complex64::new(re, im);
            let dc = Complex64::new(dre, dim);
            for n in 1..=8 {
                assert_relative_eq!(qfi_f1(c, dc, n), qfi_f1_eigenbasis(c, dc, n), max_relative = 1e-10, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn brute_force_matches_blocks_reference_point() {
        let c = Complex64::from_polar(0.7, 0.3);
        let dc = Complex64::new(-0.1, 0.2);
        let bf = brute_force_qfi(c, dc, 3).unwrap();
        let blocks = qfi_point(0.0, c, dc, 3).total;
        assert_relative_eq!(bf.qfi, blocks, max_relative = 1e-6);
        assert!(bf.richardson_discrepancy < 1e-5);
    }

    #[test]
    fn brute_force_rejects_large_n() {
        let c = Complex64::new(0.5, 0.0);
        assert!(matches!(brute_force_qfi(c, c, 7), Err(Error::Size(_))));
        assert!(matches!(brute_force_qfi(c, c, 0), Err(Error::Size(_))));
    }

    #[test]
    fn density_matrix_is_a_state_with_block_structure() {
        let c = Complex64::new(0.6, 0.0);
        let rho = ghz_density_matrix(c, 2);
        let tr: Complex64 = (0..4).map(|i| rho[(i, i)]).sum();
        assert_relative_eq!(tr.re, 1.0, max_relative = 1e-14);
        // ρ₂ lives on |ge⟩, |eg⟩ (indices 1, 2) and is diagonal
        assert_eq!(rho[(1, 2)], Complex64::new(0.0, 0.0));
        for k in [0usize, 3] {
            assert_eq!(rho[(1, k)], Complex64::new(0.0, 0.0));
            assert_eq!(rho[(2, k)], Complex64::new(0.0, 0.0));
        }
        let p = c.norm_sqr();
        assert_relative_eq!(rho[(1, 1)].re, 0.5 * p * (1.0 - p), max_relative = 1e-14);
        assert_relative_eq!(rho[(3, 0)].re, 0.5 * c.re * c.re, max_relative = 1e-14);
        let eig = rho.symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l > -1e-14));
    }
}
