//! Brute-force maximisation of expected utility over the unitary group.
//!
//! Independent of the closed forms: each restart draws a Haar unitary and
//! climbs by two-level rotations `(a, b)` with real and imaginary generators,
//! each angle chosen by a coarse grid followed by golden-section refinement.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::model::{DensityState, Hamiltonian};
use crate::sampling;
use crate::utility::UtilitySpec;

const GRID_POINTS: usize = 12;
const GOLDEN_TOL: f64 = 1e-10;
const SWEEP_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 2000;

/// Seeded Haar unitary.
pub fn random_unitary(d: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sampling::random_unitary(&mut rng, d)
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub best_value: f64,
    pub best_unitary: ComplexMatrix,
    /// Total number of rotation sweeps over all restarts.
    pub iterations: usize,
    pub seed: u64,
}

/// Expected utility of the cycle `U`, split by final level `k`:
/// `Σ_k Re Σ_ij g_kij U_ki conj(U_kj)` with `g_kij = ρ_ij u(qε_i + (1-q)ε_j - ε_k)`.
struct Objective {
    d: usize,
    g: Vec<Complex64>,
}

impl Objective {
    fn new(rho: &DensityState, h: &Hamiltonian, u: &UtilitySpec, q: f64) -> Result<Self> {
        let d = rho.dim();
        let e = h.energies();
        let m = rho.matrix();
        let mut g = vec![Complex64::new(0.0, 0.0); d * d * d];
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let rij = m[(i, j)];
                    if rij.norm() != 0.0 {
                        let w = q * e[i] + (1.0 - q) * e[j] - e[k];
                        g[(k * d + i) * d + j] = rij * u.value(w)?;
                    }
                }
            }
        }
        Ok(Self { d, g })
    }

    fn row(&self, k: usize, row: &[Complex64]) -> f64 {
        let d = self.d;
        let g = &self.g[k * d * d..(k + 1) * d * d];
        let mut total = Complex64::new(0.0, 0.0);
        for i in 0..d {
            let t: Complex64 = (0..d).map(|j| g[i * d + j] * row[j].conj()).sum();
            total += row[i] * t;
        }
        total.re
    }

    fn value(&self, u: &ComplexMatrix) -> f64 {
        (0..self.d).map(|k| self.row(k, u.row(k))).sum()
    }
}

fn rotate(ra: &[Complex64], rb: &[Complex64], theta: f64, phase: Complex64) -> (Vec<Complex64>, Vec<Complex64>) {
    let (s, c) = theta.sin_cos();
    let na = ra.iter().zip(rb).map(|(a, b)| a * c + b * phase * s).collect();
    let nb = ra.iter().zip(rb).map(|(a, b)| -a * phase.conj() * s + b * c).collect();
    (na, nb)
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > GOLDEN_TOL {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// One full pass over all pairs and both generators; returns the gain.
fn sweep(obj: &Objective, u: &mut ComplexMatrix) -> f64 {
    let d = obj.d;
    let step = PI / GRID_POINTS as f64;
    let mut gain = 0.0;
    for a in 0..d {
        for b in (a + 1)..d {
            for phase in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                let ra = u.row(a).to_vec();
                let rb = u.row(b).to_vec();
                let f = |theta: f64| {
                    let (na, nb) = rotate(&ra, &rb, theta, phase);
                    obj.row(a, &na) + obj.row(b, &nb)
                };
                let current = f(0.0);
                let (mut best_theta, mut best) = (0.0, current);
                for m in 0..GRID_POINTS {
                    let theta = -FRAC_PI_2 + m as f64 * step;
                    let v = f(theta);
                    if v > best {
                        best = v;
                        best_theta = theta;
                    }
                }
                let (t, v) = golden_max(f, best_theta - step, best_theta + step);
                if v > best {
                    best = v;
                    best_theta = t;
                }
                if best > current {
                    let (na, nb) = rotate(&ra, &rb, best_theta, phase);
                    u.row_mut(a).copy_from_slice(&na);
                    u.row_mut(b).copy_from_slice(&nb);
                    gain += best - current;
                }
            }
        }
    }
    gain
}

fn restart(obj: &Objective, d: usize, seed: u64, index: u64) -> (f64, ComplexMatrix, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut u = sampling::random_unitary(&mut rng, d);
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        if sweep(obj, &mut u) < SWEEP_TOL {
            break;
        }
    }
    (obj.value(&u), u, sweeps)
}

/// Best expected utility found over `budget` restarts. Incoherent states use
/// the two-point-measurement statistics; coherent ones the quasiprobability
/// family at `q` (default 1/2).
pub fn maximize_over_unitaries(
    rho: &DensityState,
    h: &Hamiltonian,
    u: &UtilitySpec,
    q: Option<f64>,
    budget: usize,
    seed: u64,
) -> Result<OracleReport> {
    h.ensure_dim(rho.dim())?;
    u.validate()?;
    if budget == 0 {
        return Err(Error::InvalidRange("budget must be at least 1".into()));
    }
    let q = q.unwrap_or(0.5);
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::QOutOfRange(q));
    }
    let obj = Objective::new(rho, h, u, q)?;
    let d = rho.dim();
    let runs: Vec<(f64, ComplexMatrix, usize)> = (0..budget as u64)
        .into_par_iter()
        .map(|i| restart(&obj, d, seed, i))
        .collect();
    let iterations = runs.iter().map(|r| r.2).sum();
    // first index wins ties, independent of scheduling
    let (best_value, best_unitary, _) = runs
        .into_iter()
        .reduce(|best, next| if next.0 > best.0 { next } else { best })
        .expect("budget >= 1");
    Ok(OracleReport {
        best_value,
        best_unitary,
        iterations,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherent::optimal_coherent;
    use crate::incoherent::optimal_exponential;
    use crate::utility::expected_utility;
    use crate::work::quasiprob_distribution_extended;

    fn h(e: &[f64]) -> Hamiltonian {
        Hamiltonian::new(e.to_vec()).unwrap()
    }

    #[test]
    fn random_unitary_basics() {
        let one = random_unitary(1, 3);
        assert!((one[(0, 0)].norm() - 1.0).abs() < 1e-15);
        assert_eq!(random_unitary(4, 9), random_unitary(4, 9));
        let n = 1000;
        let d = 3;
        let mean: f64 = (0..n).map(|s| random_unitary(d, s)[(0, 0)].norm_sqr()).sum::<f64>() / n as f64;
        // Var |U_11|² = (d-1)/(d²(d+1))
        let sigma = ((d as f64 - 1.0) / ((d * d) as f64 * (d as f64 + 1.0)) / n as f64).sqrt();
        assert!((mean - 1.0 / d as f64).abs() < 3.0 * sigma);
    }

    #[test]
    fn objective_matches_distribution() {
        let rho = crate::sampling::random_density(&mut ChaCha8Rng::seed_from_u64(4), 3);
        let e = h(&[0.0, 1.0, 1.7]);
        let spec = UtilitySpec::Exponential { r: -0.6 };
        let u = random_unitary(3, 8);
        let obj = Objective::new(&rho, &e, &spec, 0.3).unwrap();
        let dist = quasiprob_distribution_extended(&rho, &e, &u, 0.3).unwrap();
        assert!((obj.value(&u) - expected_utility(&dist, &spec).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn qubit_example() {
        let rho = DensityState::from_populations(&[0.25, 0.75]).unwrap();
        let e = h(&[0.0, 1.0]);
        let report = maximize_over_unitaries(&rho, &e, &UtilitySpec::Exponential { r: 0.5 }, None, 200, 1).unwrap();
        let exact = optimal_exponential(&[0.25, 0.75], &e, 0.5).unwrap().utility;
        assert!((report.best_value - exact).abs() < 1e-8);
        assert!(report.best_unitary.is_unitary(1e-9));
        assert_eq!(report.seed, 1);
    }

    #[test]
    fn qutrit_never_beats_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = crate::sampling::random_populations(&mut rng, 3);
        let rho = DensityState::from_populations(&p).unwrap();
        let e = h(&[0.0, 0.8, 2.0]);
        let report = maximize_over_unitaries(&rho, &e, &UtilitySpec::Exponential { r: -1.0 }, None, 30, 2).unwrap();
        let exact = optimal_exponential(&p, &e, -1.0).unwrap().utility;
        assert!(report.best_value <= exact + 1e-8);
        assert!(report.best_value >= exact - 1e-6);
        // converged cycle permutes levels
        for j in 0..3 {
            for k in 0..3 {
                let m = report.best_unitary[(j, k)].norm();
                assert!(m < 1e-4 || (m - 1.0).abs() < 1e-4, "|U| = {m}");
            }
        }
    }

    #[test]
    fn coherent_qubit_matches() {
        let rho = DensityState::qubit(0.4, Complex64::new(0.2, 0.3)).unwrap();
        let e = h(&[0.0, 1.0]);
        for r in [-1.2, 0.9] {
            let report = maximize_over_unitaries(&rho, &e, &UtilitySpec::Exponential { r }, Some(0.5), 20, 5).unwrap();
            let exact = optimal_coherent(&rho, &e, r).unwrap().utility;
            assert!((report.best_value - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn deterministic() {
        let rho = DensityState::from_populations(&[0.2, 0.5, 0.3]).unwrap();
        let e = h(&[0.0, 1.0, 2.0]);
        let spec = UtilitySpec::Linear;
        let a = maximize_over_unitaries(&rho, &e, &spec, None, 8, 42).unwrap();
        let b = maximize_over_unitaries(&rho, &e, &spec, None, 8, 42).unwrap();
        assert_eq!(a.best_value.to_bits(), b.best_value.to_bits());
        assert_eq!(a.best_unitary, b.best_unitary);
        assert_eq!(a.iterations, b.iterations);
        assert!(maximize_over_unitaries(&rho, &e, &spec, None, 0, 42).is_err());
    }
}
