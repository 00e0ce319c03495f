//! Optimal cycles for states with coherence in the energy basis.
//!
//! Work is described by the quasiprobability family `p_q`. At `q = 1/2` the
//! optimum is `𝒰 = (1 - Σ_k u_k e^{rε_k}) / r`, with `u_k` the decreasing
//! eigenvalues of the Hermitian `A_{1/2} = e^{-rH/2} ρ e^{-rH/2}`, attained by
//! the unitary `U_u = Σ_k |ε_k⟩⟨u_k|`. For other `q` the same unitary gives
//! `(1 - Σ_jk u_j x_jk e^{rε_k}) / r` with `x` doubly stochastic; `x` is an
//! affine combination of permutation matrices with `θ_I ≥ 1` and every other
//! coefficient non-positive.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::incoherent::{majorizes_with_tolerance, optimal_exponential, Permutation};
use crate::linalg::{eig_hermitian, ComplexMatrix, RealMatrix};
use crate::model::{DensityState, Hamiltonian};
use crate::tolerance::Tolerances;
use crate::utility::exp_certainty_equivalent;

fn effective_r(r: f64) -> f64 {
    if r.abs() < Tolerances::current().near_zero_r {
        0.0
    } else {
        r
    }
}

/// `(e^{rx} - 1) / r`, equal to `x` at `r = 0`.
fn expm1_over_r(r: f64, x: f64) -> f64 {
    if r == 0.0 {
        x
    } else {
        (r * x).exp_m1() / r
    }
}

fn check_dims(rho: &DensityState, h: &Hamiltonian) -> Result<()> {
    h.ensure_dim(rho.dim())
}

/// `A_q = e^{-qrH} ρ e^{-(1-q)rH}`.
#[derive(Debug, Clone)]
pub struct AqOperator {
    pub matrix: ComplexMatrix,
    pub r: f64,
    pub q: f64,
}

impl AqOperator {
    pub fn new(rho: &DensityState, h: &Hamiltonian, r: f64, q: f64) -> Result<Self> {
        check_dims(rho, h)?;
        let left = h.exp_diag(-q * r);
        let right = h.exp_diag(-(1.0 - q) * r);
        Ok(Self {
            matrix: rho.matrix().diag_sandwich(&left, &right),
            r,
            q,
        })
    }

    pub fn is_hermitian(&self) -> bool {
        self.matrix.is_hermitian(Tolerances::current().hermitian)
    }

    /// `A_q = S A_{1/2} S^{-1}` with `S = e^{(1/2-q)rH}`, so the spectrum is
    /// that of the Hermitian `A_{1/2}`.
    pub fn eigenvalues(&self, rho: &DensityState, h: &Hamiltonian) -> Result<Vec<f64>> {
        Ok(sorted_u_spectrum(rho, h, self.r)?.values)
    }

    /// `max_n |Tr(A_q^n) - Σ_k u_k^n|` relative to `(Σ|u_k|)^n`, `n = 1..=d`:
    /// an independent check that `values` is the spectrum of `A_q`.
    pub fn power_trace_defect(&self, values: &[f64]) -> f64 {
        let d = self.matrix.dim();
        let norm: f64 = values.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
        let mut power = ComplexMatrix::identity(d);
        let mut worst: f64 = 0.0;
        for n in 1..=d as i32 {
            power = &power * &self.matrix;
            let tr = power.trace();
            let expected: f64 = values.iter().map(|v| v.powi(n)).sum();
            let defect = ((tr.re - expected).abs() + tr.im.abs()) / norm.powi(n);
            worst = worst.max(defect);
        }
        worst
    }

    /// `max_k |A_q w_k - u_k w_k|` for the right eigenvectors `w_k = S|u_k⟩`.
    pub fn eigenvector_residual(&self, h: &Hamiltonian, spectrum: &USpectrum) -> f64 {
        let d = self.matrix.dim();
        let s = h.exp_diag((0.5 - self.q) * self.r);
        let mut worst: f64 = 0.0;
        for k in 0..d {
            let w: Vec<Complex64> = (0..d).map(|m| spectrum.vectors[(m, k)] * s[m]).collect();
            let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let aw = self.matrix.apply(&w);
            let res = aw
                .iter()
                .zip(&w)
                .map(|(a, b)| (a - b * spectrum.values[k]).norm())
                .fold(0.0, f64::max);
            worst = worst.max(res / norm.max(f64::MIN_POSITIVE));
        }
        worst
    }
}

/// Decreasing eigenvalues `u_k` of `A_{1/2}` and eigenvectors `|u_k⟩` as columns.
#[derive(Debug, Clone)]
pub struct USpectrum {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl USpectrum {
    /// `U_u = Σ_k |ε_k⟩⟨u_k|`.
    pub fn certifying_unitary(&self) -> ComplexMatrix {
        self.vectors.adjoint()
    }
}

/// Spectrum of `A_{1/2} = e^{-rH/2} ρ e^{-rH/2}`.
pub fn sorted_u_spectrum(rho: &DensityState, h: &Hamiltonian, r: f64) -> Result<USpectrum> {
    check_dims(rho, h)?;
    let d = rho.dim();
    let half = h.exp_diag(-0.5 * effective_r(r));
    let m = rho.matrix();
    let mut a = ComplexMatrix::zeros(d);
    for i in 0..d {
        a[(i, i)] = Complex64::new(m[(i, i)].re * half[i] * half[i], 0.0);
        for j in (i + 1)..d {
            let v = m[(i, j)] * (half[i] * half[j]);
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
    // normalise so the eigensolver tolerances are scale-free
    let scale = (0..d).map(|i| a[(i, i)].re).sum::<f64>();
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    let eig = eig_hermitian(&a.scale(Complex64::new(1.0 / scale, 0.0)))?;
    Ok(USpectrum {
        values: eig.values.iter().map(|v| v * scale).collect(),
        vectors: eig.vectors,
    })
}

/// Optimum in the `q = 1/2` representation with its certifying unitary.
#[derive(Debug, Clone, Serialize)]
pub struct CoherentOutcome {
    pub utility: f64,
    pub certainty_equivalent: f64,
    pub sorted_u: Vec<f64>,
    pub unitary: ComplexMatrix,
}

/// `Σ_j |V_jk|² E_j` with `E_j = e^{rε_ref}(e^{r(ε_j - ε_ref)} - 1)/r`.
fn weighted_shift(v: &ComplexMatrix, k: usize, e: &[f64], r: f64, reference: f64) -> f64 {
    (0..e.len())
        .map(|j| v[(j, k)].norm_sqr() * expm1_over_r(r, e[j] - reference))
        .sum()
}

pub fn optimal_coherent(rho: &DensityState, h: &Hamiltonian, r: f64) -> Result<CoherentOutcome> {
    check_dims(rho, h)?;
    let r = effective_r(r);
    let spec = sorted_u_spectrum(rho, h, r)?;
    let e = h.energies();
    // 𝒰 = Σ_k u_k e^{rε_k} Σ_j |V_jk|² (e^{r(ε_j-ε_k)} - 1)/r
    let utility: f64 = (0..e.len())
        .map(|k| spec.values[k] * (r * e[k]).exp() * weighted_shift(&spec.vectors, k, e, r, e[k]))
        .sum();
    let certainty_equivalent = if utility == 0.0 {
        0.0
    } else {
        exp_certainty_equivalent(r, utility)?
    };
    Ok(CoherentOutcome {
        utility,
        certainty_equivalent,
        unitary: spec.certifying_unitary(),
        sorted_u: spec.values,
    })
}

/// `x_jk = Re ⟨ε_k|S_q|u_j⟩⟨u_j|S_q^{-1}|ε_k⟩` with `S_q = U e^{-qrH} e^{rH/2}`.
pub fn xjk_matrix(rho: &DensityState, h: &Hamiltonian, r: f64, q: f64, u: &ComplexMatrix) -> Result<RealMatrix> {
    check_dims(rho, h)?;
    if u.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: u.dim(),
        });
    }
    u.ensure_unitary()?;
    let r = effective_r(r);
    let spec = sorted_u_spectrum(rho, h, r)?;
    xjk_from_spectrum(&spec, h, r, q, u)
}

fn xjk_from_spectrum(spec: &USpectrum, h: &Hamiltonian, r: f64, q: f64, u: &ComplexMatrix) -> Result<RealMatrix> {
    let d = h.dim();
    let s = h.exp_diag((0.5 - q) * r);
    if s.iter().any(|x| *x == 0.0 || !x.is_finite()) {
        return Err(Error::SingularSq);
    }
    let v = &spec.vectors;
    Ok(RealMatrix::from_fn(d, |j, k| {
        let mut fwd = Complex64::new(0.0, 0.0);
        let mut inv = Complex64::new(0.0, 0.0);
        for m in 0..d {
            fwd += u[(k, m)] * s[m] * v[(m, j)];
            inv += v[(m, j)].conj() * u[(k, m)].conj() / s[m];
        }
        (fwd * inv).re
    }))
}

/// One term `θ P` of an affine decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineTerm {
    pub permutation: Permutation,
    pub theta: f64,
}

/// `x = Σ_α θ_α P^(α)` with `P_jk = [π_j = k]`; identity first.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct AffineDecomposition {
    pub terms: Vec<AffineTerm>,
}

impl AffineDecomposition {
    pub fn theta_identity(&self) -> f64 {
        self.terms
            .iter()
            .find(|t| t.permutation.is_identity())
            .map_or(0.0, |t| t.theta)
    }

    /// Smallest coefficient among non-identity terms (0 if there are none).
    pub fn min_offdiag_theta(&self) -> f64 {
        self.offdiag().fold(0.0, f64::min)
    }

    /// Largest coefficient among non-identity terms (0 if there are none).
    pub fn max_offdiag_theta(&self) -> f64 {
        self.offdiag().reduce(f64::max).unwrap_or(0.0)
    }

    fn offdiag(&self) -> impl Iterator<Item = f64> + '_ {
        self.terms
            .iter()
            .filter(|t| !t.permutation.is_identity())
            .map(|t| t.theta)
    }

    pub fn theta_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.theta).sum()
    }

    pub fn reconstruct(&self, d: usize) -> RealMatrix {
        let mut x = RealMatrix::zeros(d);
        for t in &self.terms {
            for (j, &k) in t.permutation.as_slice().iter().enumerate() {
                x[(j, k)] += t.theta;
            }
        }
        x
    }

    fn from_terms(mut raw: Vec<(Permutation, f64)>) -> Self {
        raw.sort_by(|a, b| {
            b.0.is_identity()
                .cmp(&a.0.is_identity())
                .then_with(|| a.0.cmp(&b.0))
        });
        let mut terms: Vec<AffineTerm> = Vec::new();
        for (permutation, theta) in raw {
            match terms.last_mut() {
                Some(t) if t.permutation == permutation => t.theta += theta,
                _ => terms.push(AffineTerm { permutation, theta }),
            }
        }
        terms.retain(|t| t.permutation.is_identity() || t.theta.abs() > 1e-15);
        AffineDecomposition { terms }
    }
}

fn check_affine_shape(x: &RealMatrix) -> Result<()> {
    let d = x.dim();
    let sums_ok = x
        .row_sums()
        .iter()
        .chain(x.column_sums().iter())
        .all(|s| (s - 1.0).abs() <= 1e-9);
    if !sums_ok {
        return Err(Error::NotDecomposable("row or column sums differ from 1".into()));
    }
    for j in 0..d {
        for k in 0..d {
            let v = x[(j, k)];
            if j == k && v < 1.0 - 1e-10 {
                return Err(Error::NotDecomposable(format!("x[{0}][{0}] = {v} < 1", j + 1)));
            }
            if j != k && v > 1e-10 {
                return Err(Error::NotDecomposable(format!(
                    "x[{}][{}] = {v:e} > 0",
                    j + 1,
                    k + 1
                )));
            }
        }
    }
    Ok(())
}

/// Affine decomposition with `θ_I = max_k x_kk`: closed forms for `d ≤ 3`,
/// Birkhoff reduction of the rescaled residual otherwise.
pub fn affine_decompose(x: &RealMatrix) -> Result<AffineDecomposition> {
    check_affine_shape(x)?;
    match x.dim() {
        1 => Ok(AffineDecomposition::from_terms(vec![(Permutation::identity(1), 1.0)])),
        2 => Ok(AffineDecomposition::from_terms(vec![
            (Permutation::identity(2), x[(0, 0)]),
            (Permutation::from_zero_based(vec![1, 0])?, x[(0, 1)]),
        ])),
        3 => affine_decompose_d3(x),
        _ => affine_decompose_birkhoff(x),
    }
}

/// Qutrit closed form with `θ_I = max_k x_kk`; permutations
/// `2:(1,3,2) 3:(2,1,3) 4:(2,3,1) 5:(3,1,2) 6:(3,2,1)`.
pub fn affine_decompose_d3(x: &RealMatrix) -> Result<AffineDecomposition> {
    if x.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: x.dim(),
        });
    }
    let t = x[(0, 0)].max(x[(1, 1)]).max(x[(2, 2)]);
    let p = |s: &str| s.parse::<Permutation>();
    Ok(AffineDecomposition::from_terms(vec![
        (p("(1,2,3)")?, t),
        (p("(1,3,2)")?, x[(0, 0)] - t),
        (p("(2,1,3)")?, x[(2, 2)] - t),
        (p("(3,2,1)")?, x[(1, 1)] - t),
        (p("(2,3,1)")?, x[(0, 1)] - x[(2, 2)] + t),
        (p("(3,1,2)")?, x[(0, 2)] - x[(1, 1)] + t),
    ]))
}

/// General route: `x̃ = (x - θ_I I)/(1 - θ_I)` is doubly stochastic and is
/// peeled into permutation matrices by repeated perfect matchings on its
/// support.
pub fn affine_decompose_birkhoff(x: &RealMatrix) -> Result<AffineDecomposition> {
    check_affine_shape(x)?;
    let d = x.dim();
    let theta_i = (0..d).map(|k| x[(k, k)]).fold(f64::NEG_INFINITY, f64::max);
    if theta_i - 1.0 <= 1e-14 {
        return Ok(AffineDecomposition::from_terms(vec![(Permutation::identity(d), 1.0)]));
    }
    let residual = RealMatrix::from_fn(d, |j, k| {
        let id = if j == k { theta_i } else { 0.0 };
        ((x[(j, k)] - id) / (1.0 - theta_i)).max(0.0)
    });
    // entries of x within tolerance of the wrong sign are clipped above, so
    // the residual is only doubly stochastic up to that clipping; accept a
    // leftover whose effect on x stays below the reconstruction tolerance
    let (convex, leftover) = birkhoff_partial(&residual, 1e-12)?;
    if leftover * (theta_i - 1.0) > 1e-10 {
        return Err(Error::MatchingFailure);
    }
    let mut raw = vec![(Permutation::identity(d), theta_i)];
    raw.extend(convex.into_iter().map(|(p, lambda)| (p, (1.0 - theta_i) * lambda)));
    Ok(AffineDecomposition::from_terms(raw))
}

/// Convex decomposition of a doubly stochastic matrix.
pub fn birkhoff(m: &RealMatrix, support: f64) -> Result<Vec<(Permutation, f64)>> {
    let (terms, leftover) = birkhoff_partial(m, support)?;
    if leftover <= support {
        Ok(terms)
    } else {
        Err(Error::MatchingFailure)
    }
}

/// Peels permutations off `m` until no perfect matching remains; returns the
/// terms and the mass left over.
fn birkhoff_partial(m: &RealMatrix, support: f64) -> Result<(Vec<(Permutation, f64)>, f64)> {
    let d = m.dim();
    let mut rest = m.clone();
    let mut mass = 1.0;
    let mut out = Vec::new();
    for _ in 0..(d * d + 2) {
        if mass <= support {
            break;
        }
        let Some(matching) = perfect_matching(&rest, support) else {
            break;
        };
        let lambda = matching
            .iter()
            .enumerate()
            .map(|(j, &k)| rest[(j, k)])
            .fold(f64::INFINITY, f64::min);
        for (j, &k) in matching.iter().enumerate() {
            rest[(j, k)] -= lambda;
            if rest[(j, k)] <= support {
                rest[(j, k)] = 0.0;
            }
        }
        mass -= lambda;
        out.push((Permutation::from_zero_based(matching)?, lambda));
    }
    Ok((out, mass.max(0.0)))
}

/// Row-to-column perfect matching on entries above `support` (Kuhn's
/// augmenting paths, columns tried in ascending order).
fn perfect_matching(m: &RealMatrix, support: f64) -> Option<Vec<usize>> {
    let d = m.dim();
    let mut col_owner: Vec<Option<usize>> = vec![None; d];

    fn augment(
        row: usize,
        m: &RealMatrix,
        support: f64,
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for col in 0..m.dim() {
            if m[(row, col)] > support && !seen[col] {
                seen[col] = true;
                if owner[col].is_none_or(|other| augment(other, m, support, seen, owner)) {
                    owner[col] = Some(row);
                    return true;
                }
            }
        }
        false
    }

    for row in 0..d {
        let mut seen = vec![false; d];
        if !augment(row, m, support, &mut seen, &mut col_owner) {
            return None;
        }
    }
    let mut matching = vec![0; d];
    for (col, owner) in col_owner.iter().enumerate() {
        matching[owner.expect("perfect matching")] = col;
    }
    Some(matching)
}

/// Value of the certifying unitary `U_u` under the `q` representation:
/// `(1 - Σ_jk u_j x_jk e^{rε_k}) / r`, evaluated on a grid of `q`.
pub fn utility_q_profile(rho: &DensityState, h: &Hamiltonian, r: f64, q_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_dims(rho, h)?;
    if let Some(&q) = q_grid.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(Error::QOutOfRange(q));
    }
    let r = effective_r(r);
    let spec = sorted_u_spectrum(rho, h, r)?;
    let u = spec.certifying_unitary();
    q_grid
        .iter()
        .map(|&q| {
            let x = xjk_from_spectrum(&spec, h, r, q, &u)?;
            Ok((q, profile_value(&spec, &x, h, r)))
        })
        .collect()
}

/// `Σ_j u_j [Σ_m |V_mj|² E_m - Σ_k x_jk E_k]` with `E_m = (e^{rε_m} - e^{rε_1})/r`,
/// which equals `(1 - Σ_jk u_j x_jk e^{rε_k}) / r` because `x` and `|V|²`
/// are stochastic.
fn profile_value(spec: &USpectrum, x: &RealMatrix, h: &Hamiltonian, r: f64) -> f64 {
    let e = h.energies();
    let d = e.len();
    let e0 = e[0];
    let big_e: Vec<f64> = e.iter().map(|&em| (r * e0).exp() * expm1_over_r(r, em - e0)).collect();
    (0..d)
        .map(|j| {
            let before = weighted_shift(&spec.vectors, j, e, r, e0) * (r * e0).exp();
            let after: f64 = (0..d).map(|k| x[(j, k)] * big_e[k]).sum();
            spec.values[j] * (before - after)
        })
        .sum()
}

/// `𝒰_c = 𝒰(ρ) - 𝒰(Δ(ρ))` and whether `u_k` majorizes the dephased `u'_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherentContribution {
    pub value: f64,
    pub majorizes: bool,
}

pub fn coherent_contribution(rho: &DensityState, h: &Hamiltonian, r: f64) -> Result<f64> {
    Ok(coherent_contribution_checked(rho, h, r)?.value)
}

pub fn coherent_contribution_checked(rho: &DensityState, h: &Hamiltonian, r: f64) -> Result<CoherentContribution> {
    let full = optimal_coherent(rho, h, r)?;
    let dephased = optimal_exponential(&rho.populations(), h, r)?;
    let scale: f64 = full.sorted_u.iter().sum::<f64>().abs().max(1.0);
    let majorizes = majorizes_with_tolerance(&full.sorted_u, &dephased.sorted_u, 1e-10 * scale)?;
    Ok(CoherentContribution {
        value: full.utility - dephased.utility,
        majorizes,
    })
}

/// Coherent contribution of the qubit `[[p, c], [c*, 1 - p]]` with gap `ε`:
/// `(|η| - sqrt(η² + 4|c|² e^{rε})) (e^{-rε} - 1) / (2r)`, `η = p(1 + e^{rε}) - 1`.
pub fn qubit_coherent_closed_form(p: f64, c: Complex64, eps: f64, r: f64) -> Result<f64> {
    let abs_c = c.norm();
    let bound = (p * (1.0 - p)).max(0.0).sqrt();
    if !(0.0..=1.0).contains(&p) || abs_c > bound + 1e-12 {
        return Err(Error::CoherenceBoundViolated { abs_c, bound });
    }
    if abs_c == 0.0 {
        return Ok(0.0);
    }
    let r = effective_r(r);
    if r == 0.0 {
        let m = 2.0 * p - 1.0;
        let x = 4.0 * abs_c * abs_c;
        return Ok(0.5 * eps * x / ((m * m + x).sqrt() + m.abs()));
    }
    let eta = p * (1.0 + (r * eps).exp()) - 1.0;
    let x = 4.0 * abs_c * abs_c * (r * eps).exp();
    // |η| - sqrt(η² + X) without cancellation
    let diff = -x / (eta.abs() + (eta * eta + x).sqrt());
    Ok(diff * (-r * eps).exp_m1() / (2.0 * r))
}
