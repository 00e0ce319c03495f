//! Hamiltonians, density states and bipartite composition.
//!
//! Levels are indexed from 0 internally and always sorted by energy; the
//! standard basis of a [`DensityState`] is the energy eigenbasis of the
//! accompanying [`Hamiltonian`].

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, ComplexMatrix};
use crate::tolerance::Tolerances;

/// Records how the levels of a composite Hamiltonian map to product states.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductLabels {
    pub dims: (usize, usize),
    /// `kron_index[k] = a * d_B + b` for the product level `|a⟩⊗|b⟩` sorted to position `k`.
    pub kron_index: Vec<usize>,
}

impl ProductLabels {
    /// `(a, b)` for sorted level `k`.
    pub fn local(&self, k: usize) -> (usize, usize) {
        let i = self.kron_index[k];
        (i / self.dims.1, i % self.dims.1)
    }

    /// Sorted level holding the product state `|a⟩⊗|b⟩`.
    pub fn level_of(&self, a: usize, b: usize) -> usize {
        let target = a * self.dims.1 + b;
        self.kron_index
            .iter()
            .position(|&i| i == target)
            .expect("kron_index is a bijection")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    energies: Vec<f64>,
    strict: bool,
    product: Option<ProductLabels>,
}

impl Hamiltonian {
    /// Strictly ascending levels.
    pub fn new(energies: Vec<f64>) -> Result<Self> {
        Self::build(energies, true)
    }

    /// Non-decreasing levels; degenerate levels are allowed.
    pub fn weak(energies: Vec<f64>) -> Result<Self> {
        Self::build(energies, false)
    }

    /// Strict if possible, weak otherwise.
    pub fn from_levels(energies: Vec<f64>) -> Result<Self> {
        let strict = energies.windows(2).all(|w| w[0] < w[1]);
        Self::build(energies, strict)
    }

    fn build(energies: Vec<f64>, strict: bool) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::InvalidHamiltonian {
                invariant: "dimension",
                detail: "no energy levels".into(),
            });
        }
        if let Some(e) = energies.iter().find(|e| !e.is_finite()) {
            return Err(Error::InvalidHamiltonian {
                invariant: "finite",
                detail: format!("energy {e} is not finite"),
            });
        }
        for (k, w) in energies.windows(2).enumerate() {
            let ok = if strict { w[0] < w[1] } else { w[0] <= w[1] };
            if !ok {
                let invariant = if strict {
                    "strictly_ascending"
                } else {
                    "ascending"
                };
                return Err(Error::InvalidHamiltonian {
                    invariant,
                    detail: format!("level {} = {} follows {}", k + 2, w[1], w[0]),
                });
            }
        }
        Ok(Self {
            energies,
            strict,
            product: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn product(&self) -> Option<&ProductLabels> {
        self.product.as_ref()
    }

    /// `e^{s ε_k}` for every level.
    pub fn exp_diag(&self, s: f64) -> Vec<f64> {
        self.energies.iter().map(|e| (s * e).exp()).collect()
    }

    /// `H_A ⊗ I + I ⊗ H_B`, levels re-sorted ascending. Coincident levels are
    /// ordered by Kronecker index and the result is in weak mode.
    pub fn tensor(&self, other: &Hamiltonian) -> Hamiltonian {
        let (da, db) = (self.dim(), other.dim());
        let mut levels: Vec<(f64, usize)> = (0..da * db)
            .map(|i| (self.energies[i / db] + other.energies[i % db], i))
            .collect();
        levels.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let energies: Vec<f64> = levels.iter().map(|l| l.0).collect();
        let strict = energies.windows(2).all(|w| w[0] < w[1]);
        Hamiltonian {
            energies,
            strict,
            product: Some(ProductLabels {
                dims: (da, db),
                kron_index: levels.iter().map(|l| l.1).collect(),
            }),
        }
    }

    pub fn ensure_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: d,
            });
        }
        Ok(())
    }
}

/// Which factor of a bipartite system to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    matrix: ComplexMatrix,
    incoherent: bool,
}

impl DensityState {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let tol = Tolerances::current();
        let deviation = matrix.hermitian_deviation();
        if deviation > tol.hermitian {
            return Err(Error::InvalidState {
                invariant: "hermitian",
                detail: format!("max |M - M†| = {deviation:e}"),
            });
        }
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > tol.trace {
            return Err(Error::InvalidState {
                invariant: "unit_trace",
                detail: format!("trace = {trace}"),
            });
        }
        let incoherent = matrix.max_off_diagonal() < tol.incoherent;
        let lowest = if incoherent {
            matrix
                .diagonal()
                .iter()
                .map(|z| z.re)
                .fold(f64::INFINITY, f64::min)
        } else {
            let e = eig_hermitian(&matrix)?;
            *e.values.last().expect("dim >= 1")
        };
        if lowest < -tol.psd {
            return Err(Error::InvalidState {
                invariant: "positive_semidefinite",
                detail: format!("eigenvalue {lowest:e}"),
            });
        }
        Ok(Self { matrix, incoherent })
    }

    /// Diagonal state with the given level populations.
    pub fn from_populations(p: &[f64]) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidState {
                invariant: "dimension",
                detail: "no populations".into(),
            });
        }
        Self::new(ComplexMatrix::from_diagonal(p))
    }

    pub fn from_parts(re: &[Vec<f64>], im: Option<&[Vec<f64>]>) -> Result<Self> {
        let d = re.len();
        let shape_err = || Error::InvalidState {
            invariant: "dimension",
            detail: "matrix_re and matrix_im must be square and of equal size".into(),
        };
        if d == 0 || re.iter().any(|row| row.len() != d) {
            return Err(shape_err());
        }
        if let Some(im) = im {
            if im.len() != d || im.iter().any(|row| row.len() != d) {
                return Err(shape_err());
            }
        }
        let m = ComplexMatrix::from_fn(d, |i, j| {
            Complex64::new(re[i][j], im.map_or(0.0, |im| im[i][j]))
        });
        Self::new(m)
    }

    /// Qubit state `[[p, c], [c*, 1 - p]]` with `p` the ground population.
    pub fn qubit(p: f64, c: Complex64) -> Result<Self> {
        Self::new(ComplexMatrix::from_rows(&[
            vec![Complex64::new(p, 0.0), c],
            vec![c.conj(), Complex64::new(1.0 - p, 0.0)],
        ])?)
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn is_incoherent(&self) -> bool {
        self.incoherent
    }

    /// Diagonal in the energy basis.
    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn dephase(&self) -> DensityState {
        let d = self.dim();
        let m = ComplexMatrix::from_fn(d, |i, j| {
            if i == j {
                self.matrix[(i, i)]
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        DensityState {
            matrix: m,
            incoherent: true,
        }
    }

    pub fn average_energy(&self, h: &Hamiltonian) -> Result<f64> {
        h.ensure_dim(self.dim())?;
        Ok(self
            .populations()
            .iter()
            .zip(h.energies())
            .map(|(p, e)| p * e)
            .sum())
    }

    /// Kronecker product, `self` as the first factor.
    pub fn tensor(&self, other: &DensityState) -> DensityState {
        DensityState {
            matrix: self.matrix.kron(&other.matrix),
            incoherent: self.incoherent && other.incoherent,
        }
    }

    /// Reduced state of a Kronecker-ordered bipartite state.
    pub fn partial_trace(&self, dims: (usize, usize), keep: Subsystem) -> Result<DensityState> {
        let (da, db) = dims;
        if da * db != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: da * db,
            });
        }
        let m = &self.matrix;
        let reduced = match keep {
            Subsystem::A => ComplexMatrix::from_fn(da, |a, a2| {
                (0..db).map(|b| m[(a * db + b, a2 * db + b)]).sum()
            }),
            Subsystem::B => ComplexMatrix::from_fn(db, |b, b2| {
                (0..da).map(|a| m[(a * db + b, a * db + b2)]).sum()
            }),
        };
        let incoherent = reduced.max_off_diagonal() < Tolerances::current().incoherent;
        Ok(DensityState {
            matrix: reduced,
            incoherent,
        })
    }

    /// Relabels the basis: `result[i][j] = ρ[order[i]][order[j]]`.
    pub fn permuted(&self, order: &[usize]) -> Result<DensityState> {
        if order.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: order.len(),
            });
        }
        let m = ComplexMatrix::from_fn(self.dim(), |i, j| self.matrix[(order[i], order[j])]);
        Ok(DensityState {
            matrix: m,
            incoherent: self.incoherent,
        })
    }

    /// `U ρ U†`.
    pub fn evolve(&self, u: &ComplexMatrix) -> Result<DensityState> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.dim(),
            });
        }
        u.ensure_unitary()?;
        let m = u.conjugate(&self.matrix);
        let incoherent = m.max_off_diagonal() < Tolerances::current().incoherent;
        Ok(DensityState {
            matrix: m,
            incoherent,
        })
    }

    /// Eigenvalues, descending.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        if self.incoherent {
            let mut p = self.populations();
            p.sort_by(|a, b| b.total_cmp(a));
            return Ok(p);
        }
        Ok(eig_hermitian(&self.matrix)?.values)
    }

    /// Von Neumann entropy in nats.
    pub fn entropy(&self) -> Result<f64> {
        Ok(shannon(&self.spectrum()?))
    }

    /// `S(ρ_A) + S(ρ_B) - S(ρ)`.
    pub fn mutual_information(&self, dims: (usize, usize)) -> Result<f64> {
        let a = self.partial_trace(dims, Subsystem::A)?;
        let b = self.partial_trace(dims, Subsystem::B)?;
        Ok(a.entropy()? + b.entropy()? - self.entropy()?)
    }
}

fn shannon(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// Checks a population vector against dimension `d`.
pub fn validate_populations(p: &[f64], d: usize) -> Result<()> {
    if p.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: p.len(),
        });
    }
    let tol = Tolerances::current();
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < -tol.psd) {
        return Err(Error::InvalidProbabilities(format!(
            "entry {x} is negative or not finite"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > tol.trace {
        return Err(Error::InvalidProbabilities(format!("entries sum to {total}")));
    }
    Ok(())
}

/// True iff no energy-raising-to-lowering exchange increases the expected
/// exponential utility: `p_n e^{-rε_n} ≥ p_k e^{-rε_k}` whenever `ε_n < ε_k`.
///
/// For strictly ascending levels this is the adjacent test
/// `p_k e^{-rε_k} ≥ p_{k+1} e^{-rε_{k+1}}`; within a degenerate block the
/// populations may appear in any order.
pub fn is_generalized_passive(p: &[f64], h: &Hamiltonian, r: f64) -> bool {
    let e = h.energies();
    // log-domain weights avoid overflow for large |r|
    let a: Vec<f64> = p
        .iter()
        .zip(e)
        .map(|(&pk, &ek)| {
            if pk > 0.0 {
                pk.ln() - r * ek
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let mut start = 0;
    let mut prev_min = f64::INFINITY;
    while start < e.len() {
        let mut end = start + 1;
        while end < e.len() && e[end] == e[start] {
            end += 1;
        }
        let block_max = a[start..end].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if block_max > prev_min + 1e-12 {
            return false;
        }
        let block_min = a[start..end].iter().copied().fold(f64::INFINITY, f64::min);
        prev_min = prev_min.min(block_min);
        start = end;
    }
    true
}

/// On-disk state description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub energies: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub populations: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_re: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_im: Option<Vec<Vec<f64>>>,
    /// `[d_A, d_B]` when the levels are listed in Kronecker order of a bipartite system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsystems: Option<[usize; 2]>,
}

/// A state together with its Hamiltonian, as read from a [`StateFile`].
#[derive(Debug, Clone)]
pub struct System {
    pub hamiltonian: Hamiltonian,
    pub state: DensityState,
    pub subsystems: Option<(usize, usize)>,
}

impl StateFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn into_system(self) -> Result<System> {
        let hamiltonian = Hamiltonian::from_levels(self.energies)?;
        let state = match (self.populations, self.matrix_re) {
            (Some(p), None) => {
                validate_populations(&p, hamiltonian.dim()).map_err(|e| match e {
                    Error::InvalidProbabilities(detail) => Error::InvalidState {
                        invariant: "populations",
                        detail,
                    },
                    other => other,
                })?;
                DensityState::from_populations(&p)?
            }
            (None, Some(re)) => DensityState::from_parts(&re, self.matrix_im.as_deref())?,
            _ => {
                return Err(Error::Parse(
                    "exactly one of `populations` or `matrix_re` is required".into(),
                ))
            }
        };
        hamiltonian.ensure_dim(state.dim())?;
        let subsystems = match self.subsystems {
            Some([da, db]) if da * db == state.dim() => Some((da, db)),
            Some([da, db]) => {
                return Err(Error::DimensionMismatch {
                    expected: state.dim(),
                    found: da * db,
                })
            }
            None => None,
        };
        Ok(System {
            hamiltonian,
            state,
            subsystems,
        })
    }
}
