//! Work statistics of a unitary cycle: two-projective-measurement
//! distributions and their quasiprobability extension to coherent states.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::model::{DensityState, Hamiltonian};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionKind {
    Probability,
    Quasiprobability,
}

impl DistributionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DistributionKind::Probability => "probability",
            DistributionKind::Quasiprobability => "quasiprobability",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub w: f64,
    pub weight: f64,
}

/// Finitely supported (quasi)distribution of work, atoms sorted by `w`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkDistribution {
    atoms: Vec<Atom>,
    kind: DistributionKind,
}

impl WorkDistribution {
    /// Sorts, merges atoms closer than the merge tolerance, drops
    /// negligible weights and validates normalisation.
    pub fn from_atoms(raw: impl IntoIterator<Item = (f64, f64)>, kind: DistributionKind) -> Result<Self> {
        let tol = Tolerances::current();
        let mut raw: Vec<(f64, f64)> = raw.into_iter().collect();
        if let Some(a) = raw.iter().find(|a| !a.0.is_finite() || !a.1.is_finite()) {
            return Err(Error::InvalidProbabilities(format!(
                "atom ({}, {}) is not finite",
                a.0, a.1
            )));
        }
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut atoms: Vec<Atom> = Vec::new();
        let mut anchor = f64::NEG_INFINITY;
        for (w, weight) in raw {
            match atoms.last_mut() {
                Some(last) if w - anchor < tol.merge => last.weight += weight,
                _ => {
                    anchor = w;
                    atoms.push(Atom { w, weight });
                }
            }
        }
        atoms.retain(|a| a.weight.abs() > tol.zero_weight);

        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > tol.trace {
            return Err(Error::InvalidProbabilities(format!("weights sum to {total}")));
        }
        if kind == DistributionKind::Probability {
            if let Some(a) = atoms.iter().find(|a| a.weight < -tol.negative_weight) {
                return Err(Error::InvalidProbabilities(format!(
                    "negative weight {} at w = {}",
                    a.weight, a.w
                )));
            }
        }
        Ok(Self { atoms, kind })
    }

    /// A single deterministic outcome.
    pub fn point(w: f64) -> Self {
        Self {
            atoms: vec![Atom { w, weight: 1.0 }],
            kind: DistributionKind::Probability,
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn moment(&self, n: i32) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.w.powi(n)).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms.iter().map(|a| a.weight * (a.w - m).powi(2)).sum()
    }

    /// `Σ weight·f(w)`.
    pub fn expectation(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.weight * f(a.w)).sum()
    }

    /// Rows `w,weight,kind` with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("w,weight,kind\n");
        for a in &self.atoms {
            let _ = writeln!(out, "{:.16e},{:.16e},{}", a.w, a.weight, self.kind.as_str());
        }
        out
    }
}

fn check_cycle(rho: &DensityState, h: &Hamiltonian, u: &ComplexMatrix) -> Result<()> {
    h.ensure_dim(rho.dim())?;
    if u.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: u.dim(),
        });
    }
    u.ensure_unitary()
}

/// Two-projective-measurement work distribution of an incoherent state:
/// atoms `ε_k - ε_n` with weight `p_k |⟨ε_n|U|ε_k⟩|²`.
pub fn tpm_distribution(rho: &DensityState, h: &Hamiltonian, u: &ComplexMatrix) -> Result<WorkDistribution> {
    if !rho.is_incoherent() {
        return Err(Error::NotIncoherent);
    }
    check_cycle(rho, h, u)?;
    let p = rho.populations();
    let e = h.energies();
    let d = rho.dim();
    let atoms = (0..d).flat_map(|k| {
        let (p, e) = (&p, &e);
        (0..d).map(move |n| (e[k] - e[n], p[k] * u[(n, k)].norm_sqr()))
    });
    WorkDistribution::from_atoms(atoms, DistributionKind::Probability)
}

/// Quasiprobability distribution of work for `q ∈ [0, 1]`.
pub fn quasiprob_distribution(
    rho: &DensityState,
    h: &Hamiltonian,
    u: &ComplexMatrix,
    q: f64,
) -> Result<WorkDistribution> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::QOutOfRange(q));
    }
    quasiprob_distribution_extended(rho, h, u, q)
}

/// As [`quasiprob_distribution`] but accepts any real `q`.
///
/// Atoms sit at `qε_i + (1-q)ε_j - ε_k` with weight
/// `Re ρ_ij ⟨ε_j|U†|ε_k⟩⟨ε_k|U|ε_i⟩`. Incoherent input yields the
/// two-measurement distribution.
pub fn quasiprob_distribution_extended(
    rho: &DensityState,
    h: &Hamiltonian,
    u: &ComplexMatrix,
    q: f64,
) -> Result<WorkDistribution> {
    if !q.is_finite() {
        return Err(Error::QOutOfRange(q));
    }
    check_cycle(rho, h, u)?;
    if rho.is_incoherent() {
        return tpm_distribution(rho, h, u);
    }
    let e = h.energies();
    let m = rho.matrix();
    let d = rho.dim();
    let mut atoms = Vec::with_capacity(d * d * d);
    for i in 0..d {
        for j in 0..d {
            let rij = m[(i, j)];
            if rij.norm() == 0.0 {
                continue;
            }
            for k in 0..d {
                let weight = (rij * u[(k, j)].conj() * u[(k, i)]).re;
                atoms.push((q * e[i] + (1.0 - q) * e[j] - e[k], weight));
            }
        }
    }
    WorkDistribution::from_atoms(atoms, DistributionKind::Quasiprobability)
}

/// `χ(x) = Σ weight·e^{ixw}`.
pub fn characteristic_function(dist: &WorkDistribution, x: Complex64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    dist.atoms
        .iter()
        .map(|a| (i * x * a.w).exp() * a.weight)
        .sum()
}

/// Principal-branch `ln χ(x)`.
pub fn cumulant_generating(dist: &WorkDistribution, x: Complex64) -> Result<Complex64> {
    let chi = characteristic_function(dist, x);
    if chi.norm() == 0.0 {
        return Err(Error::LogOfZero);
    }
    Ok(chi.ln())
}

/// `E(ρ) - E(UρU†)`.
pub fn average_work(rho: &DensityState, h: &Hamiltonian, u: &ComplexMatrix) -> Result<f64> {
    check_cycle(rho, h, u)?;
    let after = u.conjugate(rho.matrix());
    Ok(h
        .energies()
        .iter()
        .enumerate()
        .map(|(k, e)| e * (rho.matrix()[(k, k)].re - after[(k, k)].re))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn not() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    fn qubit_h() -> Hamiltonian {
        Hamiltonian::new(vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn identity_gives_zero_work() {
        let rho = DensityState::from_populations(&[0.2, 0.5, 0.3]).unwrap();
        let h = Hamiltonian::new(vec![0.0, 1.0, 2.5]).unwrap();
        let dist = tpm_distribution(&rho, &h, &ComplexMatrix::identity(3)).unwrap();
        assert_eq!(dist.atoms(), &[Atom { w: 0.0, weight: 1.0 }]);
    }

    #[test]
    fn not_gate_on_active_qubit() {
        let rho = DensityState::from_populations(&[0.25, 0.75]).unwrap();
        let dist = tpm_distribution(&rho, &qubit_h(), &not()).unwrap();
        // oracle: transitions 1→2 (w = -1, p_1) and 2→1 (w = +1, p_2)
        assert_eq!(
            dist.atoms(),
            &[Atom { w: -1.0, weight: 0.25 }, Atom { w: 1.0, weight: 0.75 }]
        );
        assert_eq!(dist.kind(), DistributionKind::Probability);
    }

    #[test]
    fn excited_state_extracts_deterministically() {
        let rho = DensityState::from_populations(&[0.0, 1.0]).unwrap();
        let dist = tpm_distribution(&rho, &qubit_h(), &not()).unwrap();
        assert_eq!(dist.atoms(), &[Atom { w: 1.0, weight: 1.0 }]);
    }

    #[test]
    fn tpm_rejects_coherent_and_non_unitary() {
        let plus = DensityState::qubit(0.5, Complex64::new(0.5, 0.0)).unwrap();
        assert_eq!(
            tpm_distribution(&plus, &qubit_h(), &not()).unwrap_err(),
            Error::NotIncoherent
        );
        let rho = DensityState::from_populations(&[0.5, 0.5]).unwrap();
        let bad = ComplexMatrix::from_real_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            tpm_distribution(&rho, &qubit_h(), &bad),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn quasiprob_equals_tpm_for_incoherent_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = sampling::random_incoherent(&mut rng, 3);
        let h = Hamiltonian::new(vec![0.0, 0.7, 2.0]).unwrap();
        let u = sampling::random_unitary(&mut rng, 3);
        let tpm = tpm_distribution(&rho, &h, &u).unwrap();
        for q in [0.0, 0.3, 0.5, 1.0] {
            assert_eq!(quasiprob_distribution(&rho, &h, &u, q).unwrap(), tpm);
        }
    }

    #[test]
    fn quasiprob_plus_state_identity() {
        let eps = 1.0;
        let plus = DensityState::qubit(0.5, Complex64::new(0.5, 0.0)).unwrap();
        let h = Hamiltonian::new(vec![0.0, eps]).unwrap();
        let dist = quasiprob_distribution(&plus, &h, &ComplexMatrix::identity(2), 0.5).unwrap();
        // oracle: enumerate the 8 (i, j, k) triples with U = I, so only k = i = j
        // or cross terms with k ∈ {i, j} survive, each with weight Re ρ_ij δ_ki δ_kj
        let mut oracle: Vec<(f64, f64)> = Vec::new();
        let rho = [[0.5, 0.5], [0.5, 0.5]];
        let e = [0.0, eps];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let u = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                    let weight = rho[i][j] * u(k, j) * u(k, i);
                    oracle.push((0.5 * e[i] + 0.5 * e[j] - e[k], weight));
                }
            }
        }
        let oracle = WorkDistribution::from_atoms(oracle, DistributionKind::Quasiprobability).unwrap();
        assert_eq!(dist, oracle);
        assert!((dist.total_weight() - 1.0).abs() < 1e-15);
        assert!(dist.mean().abs() < 1e-15);
    }

    #[test]
    fn quasiprob_cross_terms_with_hadamard() {
        let plus = DensityState::qubit(0.5, Complex64::new(0.5, 0.0)).unwrap();
        let h = Hamiltonian::new(vec![0.0, 1.0]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let had = ComplexMatrix::from_real_rows(&[vec![s, s], vec![s, -s]]).unwrap();
        let dist = quasiprob_distribution(&plus, &h, &had, 0.5).unwrap();
        let ws: Vec<f64> = dist.atoms().iter().map(|a| a.w).collect();
        assert!(ws.contains(&0.5) && ws.contains(&-0.5));
        assert!((dist.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn q_out_of_range_rejected() {
        let rho = DensityState::from_populations(&[0.5, 0.5]).unwrap();
        let u = ComplexMatrix::identity(2);
        assert_eq!(
            quasiprob_distribution(&rho, &qubit_h(), &u, 1.5).unwrap_err(),
            Error::QOutOfRange(1.5)
        );
        assert!(quasiprob_distribution_extended(&rho, &qubit_h(), &u, 1.5).is_ok());
    }

    #[test]
    fn characteristic_function_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = sampling::random_incoherent(&mut rng, 3);
        let h = Hamiltonian::new(vec![0.0, 1.0, 3.0]).unwrap();
        let dist = tpm_distribution(&rho, &h, &sampling::random_unitary(&mut rng, 3)).unwrap();
        let chi0 = characteristic_function(&dist, Complex64::new(0.0, 0.0));
        assert!((chi0 - 1.0).norm() < 1e-12);
        assert!(cumulant_generating(&dist, Complex64::new(0.0, 0.0)).unwrap().norm() < 1e-12);

        let point = WorkDistribution::point(0.7);
        let x = Complex64::new(1.3, 0.2);
        let expected = (Complex64::new(0.0, 1.0) * x * 0.7).exp();
        assert!((characteristic_function(&point, x) - expected).norm() < 1e-15);
    }

    #[test]
    fn log_of_zero_detected() {
        let coin =
            WorkDistribution::from_atoms([(-1.0, 0.5), (1.0, 0.5)], DistributionKind::Probability).unwrap();
        let chi = characteristic_function(&coin, Complex64::new(std::f64::consts::FRAC_PI_2, 0.0));
        assert!(chi.norm() < 1e-15);
        // e^{-800} underflows to an exact zero
        let point = WorkDistribution::point(1.0);
        assert_eq!(
            cumulant_generating(&point, Complex64::new(0.0, 800.0)).unwrap_err(),
            Error::LogOfZero
        );
    }

    #[test]
    fn average_work_examples() {
        let rho = DensityState::from_populations(&[0.25, 0.75]).unwrap();
        assert_eq!(
            average_work(&rho, &qubit_h(), &ComplexMatrix::identity(2)).unwrap(),
            0.0
        );
        let w = average_work(&rho, &qubit_h(), &not()).unwrap();
        assert!((w - (0.75 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn merging_and_validation() {
        let dist = WorkDistribution::from_atoms(
            [(1.0, 0.25), (1.0 + 1e-12, 0.25), (0.0, 0.5), (2.0, 1e-16)],
            DistributionKind::Probability,
        )
        .unwrap();
        assert_eq!(dist.atoms().len(), 2);
        assert!(WorkDistribution::from_atoms([(0.0, 0.5)], DistributionKind::Probability).is_err());
        assert!(WorkDistribution::from_atoms(
            [(0.0, 1.5), (1.0, -0.5)],
            DistributionKind::Probability
        )
        .is_err());
        assert!(WorkDistribution::from_atoms(
            [(0.0, 1.5), (1.0, -0.5)],
            DistributionKind::Quasiprobability
        )
        .is_ok());
    }

    #[test]
    fn csv_layout() {
        let dist = WorkDistribution::point(1.0);
        assert_eq!(dist.to_csv(), "w,weight,kind\n1.0000000000000000e0,1.0000000000000000e0,probability\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn quasiprob_mean_is_q_independent(seed in any::<u64>(), d in 2usize..=4, q in 0.0f64..=1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = sampling::random_density(&mut rng, d);
            let e: Vec<f64> = (0..d).map(|k| k as f64 + 0.1 * k as f64 * k as f64).collect();
            let h = Hamiltonian::new(e).unwrap();
            let u = sampling::random_unitary(&mut rng, d);
            let dist = quasiprob_distribution(&rho, &h, &u, q).unwrap();
            prop_assert!((dist.total_weight() - 1.0).abs() < 1e-10);
            prop_assert!((dist.mean() - average_work(&rho, &h, &u).unwrap()).abs() < 1e-10);
        }

        #[test]
        fn tpm_mean_matches_average_work(seed in any::<u64>(), d in 2usize..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = sampling::random_incoherent(&mut rng, d);
            let h = Hamiltonian::new((0..d).map(|k| k as f64).collect()).unwrap();
            let u = sampling::random_unitary(&mut rng, d);
            let dist = tpm_distribution(&rho, &h, &u).unwrap();
            prop_assert!((dist.total_weight() - 1.0).abs() < 1e-10);
            prop_assert!((dist.mean() - average_work(&rho, &h, &u).unwrap()).abs() < 1e-10);
        }

        #[test]
        fn work_is_additive_under_composition(seed in any::<u64>(), d in 2usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = sampling::random_density(&mut rng, d);
            let h = Hamiltonian::new((0..d).map(|k| k as f64).collect()).unwrap();
            let ui = sampling::random_unitary(&mut rng, d);
            let uc = sampling::random_unitary(&mut rng, d);
            let total = average_work(&rho, &h, &(&uc * &ui)).unwrap();
            let mid = rho.evolve(&ui).unwrap();
            let parts = average_work(&mid, &h, &uc).unwrap() + average_work(&rho, &h, &ui).unwrap();
            prop_assert!((total - parts).abs() < 1e-12);
        }
    }
}
