//! Random instances for tests, sweeps and the oracle.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::linalg::ComplexMatrix;
use crate::model::DensityState;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

/// Haar-distributed unitary: Gram–Schmidt on complex Gaussian columns.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    let mut columns: Vec<Vec<Complex64>> = Vec::with_capacity(d);
    while columns.len() < d {
        let mut v: Vec<Complex64> = (0..d).map(|_| gaussian(rng)).collect();
        // two passes keep orthogonality at machine precision
        for _ in 0..2 {
            for c in &columns {
                let overlap: Complex64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(c) {
                    *x -= overlap * y;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        for z in &mut v {
            *z /= norm;
        }
        columns.push(v);
    }
    ComplexMatrix::from_columns(&columns).expect("square by construction")
}

/// Hermitian matrix with independent Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(d, |_, _| gaussian(rng));
    let gh = g.adjoint();
    (&g + &gh).scale(Complex64::new(0.5, 0.0))
}

/// `V diag(λ) V†` for Haar `V` and uniform `λ ∈ [-5, 5]`; returns the planted `λ`.
pub fn planted_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> (ComplexMatrix, Vec<f64>) {
    let lambda: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let v = random_unitary(rng, d);
    (v.conjugate(&ComplexMatrix::from_diagonal(&lambda)), lambda)
}

/// Uniform point on the probability simplex.
pub fn random_populations<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    let x: Vec<f64> = (0..d).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = x.iter().sum();
    x.into_iter().map(|v| v / total).collect()
}

/// Full-rank random state `G G† / Tr(G G†)` with Ginibre `G`.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityState {
    let g = ComplexMatrix::from_fn(d, |_, _| gaussian(rng));
    let gg = &g * &g.adjoint();
    let tr = gg.trace().re;
    let mut m = gg.scale(Complex64::new(1.0 / tr, 0.0));
    // remove round-off so the Hermitian check is exact
    for i in 0..d {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..d {
            m[(j, i)] = m[(i, j)].conj();
        }
    }
    DensityState::new(m).expect("Ginibre states are valid")
}

/// Diagonal state with uniform populations.
pub fn random_incoherent<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityState {
    DensityState::from_populations(&random_populations(rng, d)).expect("valid simplex point")
}
