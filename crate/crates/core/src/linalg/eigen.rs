use std::cmp::Ordering;

use num_complex::Complex64;

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

/// Cap on full cyclic sweeps before reporting [`Error::NoConvergence`].
pub const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a Hermitian matrix, values sorted descending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: ComplexMatrix,
}

impl EigenDecomposition {
    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        self.vectors.column(k)
    }

    /// `V diag(values) V†`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let d = self.values.len();
        let v = &self.vectors;
        ComplexMatrix::from_fn(d, |i, j| {
            (0..d)
                .map(|k| v[(i, k)] * v[(j, k)].conj() * self.values[k])
                .sum()
        })
    }
}

/// Cyclic Jacobi diagonalisation of a Hermitian matrix.
///
/// Each rotation first removes the phase of the pivot `a_pq` and then applies
/// a real Givens rotation, so the iteration is the classical real Jacobi
/// method in disguise and inherits its quadratic convergence. Eigenvectors
/// are phase-normalised so their first non-negligible component is real and
/// positive; eigenvectors of a degenerate eigenvalue are ordered
/// lexicographically (descending) to make the output reproducible.
pub fn eig_hermitian(m: &ComplexMatrix) -> Result<EigenDecomposition> {
    let tol = Tolerances::current();
    let deviation = m.hermitian_deviation();
    if deviation > tol.hermitian {
        return Err(Error::NotHermitian { deviation });
    }
    let d = m.dim();
    // symmetrise so round-off in the input cannot leak into the rotation
    let mut a = ComplexMatrix::from_fn(d, |i, j| {
        if i == j {
            Complex64::new(m[(i, i)].re, 0.0)
        } else {
            (m[(i, j)] + m[(j, i)].conj()) * 0.5
        }
    });
    let mut v = ComplexMatrix::identity(d);

    let frob2: f64 = a.as_slice().iter().map(|z| z.norm_sqr()).sum();
    let target = frob2 * 1e-32;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm2(&a) <= target {
            converged = true;
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm2(&a) > target {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut pairs: Vec<(f64, Vec<Complex64>)> = (0..d)
        .map(|k| (a[(k, k)].re, normalize_phase(v.column(k))))
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));

    let scale = pairs.iter().map(|p| p.0.abs()).fold(0.0, f64::max).max(1.0);
    let tie = 1e-12 * scale;
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && (pairs[end - 1].0 - pairs[end].0).abs() <= tie {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by(|x, y| lexicographic_desc(&x.1, &y.1));
        }
        start = end;
    }

    let values = pairs.iter().map(|p| p.0).collect();
    let columns: Vec<Vec<Complex64>> = pairs.into_iter().map(|p| p.1).collect();
    let vectors = ComplexMatrix::from_columns(&columns)?;
    Ok(EigenDecomposition { values, vectors })
}

fn off_diagonal_norm2(a: &ComplexMatrix) -> f64 {
    let d = a.dim();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s
}

fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let g = a[(p, q)];
    let mag = g.norm();
    if mag <= f64::MIN_POSITIVE {
        return;
    }
    let phase = (g / mag).conj();
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let theta = (aqq - app) / (2.0 * mag);
    let t = if theta >= 0.0 {
        1.0 / (theta + (theta * theta + 1.0).sqrt())
    } else {
        -1.0 / (-theta + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // J restricted to (p, q): [[c, s], [-s·e^{-iφ}, c·e^{-iφ}]]
    let j_pp = Complex64::new(c, 0.0);
    let j_pq = Complex64::new(s, 0.0);
    let j_qp = phase * (-s);
    let j_qq = phase * c;

    let d = a.dim();
    for k in 0..d {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * j_pp + akq * j_qp;
        a[(k, q)] = akp * j_pq + akq * j_qq;
    }
    for k in 0..d {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = j_pp.conj() * apk + j_qp.conj() * aqk;
        a[(q, k)] = j_pq.conj() * apk + j_qq.conj() * aqk;
    }
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);

    for k in 0..d {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * j_pp + vkq * j_qp;
        v[(k, q)] = vkp * j_pq + vkq * j_qq;
    }
}

fn normalize_phase(mut col: Vec<Complex64>) -> Vec<Complex64> {
    if let Some(first) = col.iter().copied().find(|z| z.norm() > 1e-12) {
        let phase = (first / first.norm()).conj();
        for z in &mut col {
            *z *= phase;
        }
        // the pivot component is real by construction
        if let Some(z) = col.iter_mut().find(|z| z.norm() > 1e-12) {
            z.im = 0.0;
        }
    }
    col
}

fn lexicographic_desc(x: &[Complex64], y: &[Complex64]) -> Ordering {
    for (a, b) in x.iter().zip(y) {
        match b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn real(rows: &[Vec<f64>]) -> ComplexMatrix {
        ComplexMatrix::from_real_rows(rows).unwrap()
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let e = eig_hermitian(&ComplexMatrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        assert!(e.vectors.is_unitary(1e-12));
        assert!(e.reconstruct().max_abs_diff(&ComplexMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn diagonal_input_sorted_descending() {
        let e = eig_hermitian(&ComplexMatrix::from_diagonal(&[1.0, 3.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn pauli_x_eigenpairs() {
        let e = eig_hermitian(&real(&[vec![0.0, 1.0], vec![1.0, 0.0]])).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-15);
        assert!((e.values[1] + 1.0).abs() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = e.vector(0);
        let v1 = e.vector(1);
        // phase-normalised: first component real positive
        assert!((v0[0].re - h).abs() < 1e-14 && (v0[1].re - h).abs() < 1e-14);
        assert!((v1[0].re - h).abs() < 1e-14 && (v1[1].re + h).abs() < 1e-14);
    }

    #[test]
    fn complex_hermitian_qubit() {
        let m = ComplexMatrix::from_rows(&[
            vec![Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.5)],
            vec![Complex64::new(0.0, -0.5), Complex64::new(0.5, 0.0)],
        ])
        .unwrap();
        let e = eig_hermitian(&m).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!(e.values[1].abs() < 1e-14);
        assert!(e.reconstruct().max_abs_diff(&m) < 1e-14);
    }

    #[test]
    fn not_hermitian_rejected() {
        let m = real(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert!(matches!(eig_hermitian(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn deterministic_on_repeat() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = sampling::random_hermitian(&mut rng, 6);
        let a = eig_hermitian(&m).unwrap();
        let b = eig_hermitian(&m).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.vectors, b.vectors);
    }

    #[test]
    fn degenerate_block_ordering_is_lexicographic() {
        let e = eig_hermitian(&ComplexMatrix::from_diagonal(&[2.0, 2.0, 1.0])).unwrap();
        assert_eq!(e.vectors, ComplexMatrix::identity(3));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn reconstruction_and_trace(seed in any::<u64>(), d in 2usize..=8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = sampling::random_hermitian(&mut rng, d);
            let e = eig_hermitian(&m).unwrap();
            prop_assert!(e.reconstruct().max_abs_diff(&m) < 1e-9);
            prop_assert!(e.vectors.is_unitary(1e-10));
            let sum: f64 = e.values.iter().sum();
            prop_assert!((sum - m.trace().re).abs() < 1e-10);
            prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn recovers_planted_spectrum(seed in any::<u64>(), d in 2usize..=8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (m, mut planted) = sampling::planted_hermitian(&mut rng, d);
            let e = eig_hermitian(&m).unwrap();
            planted.sort_by(|a, b| b.total_cmp(a));
            for (x, y) in e.values.iter().zip(&planted) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
