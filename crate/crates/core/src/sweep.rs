//! Parameter sweeps behind the command-line front end.
//!
//! Grid points are evaluated in parallel and assembled in row-major order,
//! so output is byte-identical across runs. Numbers are written with 17
//! significant digits.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherent::{affine_decompose, optimal_coherent, utility_q_profile, xjk_matrix};
use crate::error::{Error, Result};
use crate::incoherent::{assemble_comparison, find_crossing, optimal_exponential, Comparison, Permutation};
use crate::model::{Hamiltonian, System};

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `steps` equally spaced points from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRange {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl GridRange {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self> {
        let g = Self { min, max, steps };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::InvalidRange(format!("non-finite bounds [{}, {}]", self.min, self.max)));
        }
        if self.min >= self.max {
            return Err(Error::InvalidRange(format!("empty range [{}, {}]", self.min, self.max)));
        }
        if self.steps < 2 {
            return Err(Error::InvalidRange(format!("resolution {} < 2", self.steps)));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let n = self.steps - 1;
        (0..=n)
            .map(|i| {
                if i == n {
                    self.max
                } else {
                    self.min + (self.max - self.min) * i as f64 / n as f64
                }
            })
            .collect()
    }

    pub fn cell(&self) -> f64 {
        (self.max - self.min) / (self.steps - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    PhaseD2,
    PhaseD3,
    Qsweep,
    Optimize,
    Compare,
    Oracle,
}

/// Description of one front-end job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepJob {
    pub kind: SweepKind,
    pub p_range: Option<GridRange>,
    pub r_range: Option<GridRange>,
    pub resolution: Option<usize>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: u64,
}

impl SweepJob {
    pub fn new(kind: SweepKind) -> Self {
        Self {
            kind,
            p_range: None,
            r_range: None,
            resolution: None,
            input: None,
            output: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for g in self.p_range.iter().chain(self.r_range.iter()) {
            g.validate()?;
        }
        if let Some(n) = self.resolution {
            if n < 2 {
                return Err(Error::InvalidRange(format!("resolution {n} < 2")));
            }
        }
        let needs_input = matches!(
            self.kind,
            SweepKind::Qsweep | SweepKind::Optimize | SweepKind::Compare | SweepKind::Oracle
        );
        if needs_input && self.input.is_none() {
            return Err(Error::InvalidRange("an input state file is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseD2Row {
    pub p: f64,
    pub r: f64,
    pub permutation: Permutation,
    pub utility: f64,
}

/// Optimal cycle for the qubit `(p, 1 - p)` with gap `ε` over a `(p, r)` grid,
/// `p` outer, `r` inner.
pub fn phase_d2(p: &GridRange, r: &GridRange, eps: f64) -> Result<Vec<PhaseD2Row>> {
    p.validate()?;
    r.validate()?;
    if p.min <= 0.0 || p.max >= 1.0 {
        return Err(Error::InvalidRange(format!("p range [{}, {}] must lie inside (0, 1)", p.min, p.max)));
    }
    let h = Hamiltonian::new(vec![0.0, eps])?;
    let rs = r.points();
    let points: Vec<(f64, f64)> = p
        .points()
        .into_iter()
        .flat_map(|p| rs.iter().map(move |&r| (p, r)))
        .collect();
    points
        .into_par_iter()
        .map(|(p, r)| {
            let out = optimal_exponential(&[p, 1.0 - p], &h, r)?;
            Ok(PhaseD2Row {
                p,
                r,
                permutation: out.permutation,
                utility: out.utility,
            })
        })
        .collect()
}

pub fn phase_d2_csv(rows: &[PhaseD2Row]) -> String {
    let mut s = String::from("p,r,permutation,utility\n");
    for row in rows {
        let _ = writeln!(s, "{},{},\"{}\",{}", num(row.p), num(row.r), row.permutation, num(row.utility));
    }
    s
}

pub fn run_phase_d2(p: &GridRange, r: &GridRange, eps: f64) -> Result<String> {
    Ok(phase_d2_csv(&phase_d2(p, r, eps)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseD3Row {
    pub r: f64,
    pub p: [f64; 3],
    pub permutation: Permutation,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionFrequency {
    pub r: f64,
    pub permutation: Permutation,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseD3 {
    pub rows: Vec<PhaseD3Row>,
    pub frequencies: Vec<RegionFrequency>,
}

impl PhaseD3 {
    pub fn map_csv(&self) -> String {
        let mut s = String::from("r,p1,p2,p3,permutation,utility\n");
        for row in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},\"{}\",{}",
                num(row.r),
                num(row.p[0]),
                num(row.p[1]),
                num(row.p[2]),
                row.permutation,
                num(row.utility)
            );
        }
        s
    }

    pub fn frequency_csv(&self) -> String {
        let mut s = String::from("r,permutation,frequency\n");
        for f in &self.frequencies {
            let _ = writeln!(s, "{},\"{}\",{}", num(f.r), f.permutation, num(f.frequency));
        }
        s
    }

    pub fn frequency(&self, r: f64, label: &str) -> Option<f64> {
        self.frequencies
            .iter()
            .find(|f| f.r == r && f.permutation.label() == label)
            .map(|f| f.frequency)
    }
}

/// Interior simplex lattice `p = (i, j, k)/n`, `i, j, k ≥ 1`.
pub fn simplex_lattice(n: usize) -> Result<Vec<[f64; 3]>> {
    if n < 3 {
        return Err(Error::InvalidRange(format!("simplex resolution {n} < 3")));
    }
    let mut out = Vec::new();
    for i in 1..n {
        for j in 1..(n - i) {
            let k = n - i - j;
            let nf = n as f64;
            out.push([i as f64 / nf, j as f64 / nf, k as f64 / nf]);
        }
    }
    Ok(out)
}

/// Qutrit region maps over the simplex lattice for each `r`, with the
/// fraction of lattice points assigned to each of the six permutations.
pub fn run_phase_d3(resolution: usize, r_list: &[f64], energies: [f64; 3]) -> Result<PhaseD3> {
    if r_list.is_empty() || r_list.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidRange("r list must be non-empty and finite".into()));
    }
    let h = Hamiltonian::new(energies.to_vec())?;
    let lattice = simplex_lattice(resolution)?;
    let points: Vec<(f64, [f64; 3])> = r_list
        .iter()
        .flat_map(|&r| lattice.iter().map(move |&p| (r, p)))
        .collect();
    let rows: Vec<PhaseD3Row> = points
        .into_par_iter()
        .map(|(r, p)| {
            let out = optimal_exponential(&p, &h, r)?;
            Ok(PhaseD3Row {
                r,
                p,
                permutation: out.permutation,
                utility: out.utility,
            })
        })
        .collect::<Result<_>>()?;
    let all: Vec<Permutation> = Permutation::all(3).collect();
    let mut frequencies = Vec::new();
    for (chunk, &r) in rows.chunks(lattice.len()).zip(r_list) {
        for perm in &all {
            let count = chunk.iter().filter(|row| &row.permutation == perm).count();
            frequencies.push(RegionFrequency {
                r,
                permutation: perm.clone(),
                frequency: count as f64 / lattice.len() as f64,
            });
        }
    }
    Ok(PhaseD3 { rows, frequencies })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QSweepRow {
    pub q: f64,
    pub utility: f64,
    pub theta_identity: f64,
    pub min_theta_offdiag: f64,
}

/// Value of the certifying cycle and its affine decomposition on `q_steps`
/// equally spaced points of `[0, 1]`.
pub fn qsweep(system: &System, r: f64, q_steps: usize) -> Result<Vec<QSweepRow>> {
    let grid = GridRange::new(0.0, 1.0, q_steps)?.points();
    let (rho, h) = (&system.state, &system.hamiltonian);
    let profile = utility_q_profile(rho, h, r, &grid)?;
    let u = optimal_coherent(rho, h, r)?.unitary;
    profile
        .into_par_iter()
        .map(|(q, utility)| {
            let a = affine_decompose(&xjk_matrix(rho, h, r, q, &u)?)?;
            Ok(QSweepRow {
                q,
                utility,
                theta_identity: a.theta_identity(),
                min_theta_offdiag: a.min_offdiag_theta(),
            })
        })
        .collect()
}

pub fn qsweep_csv(rows: &[QSweepRow]) -> String {
    let mut s = String::from("q,utility,theta_I,min_theta_offdiag\n");
    for row in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            num(row.q),
            num(row.utility),
            num(row.theta_identity),
            num(row.min_theta_offdiag)
        );
    }
    s
}

pub fn run_qsweep(system: &System, r: f64, q_steps: usize) -> Result<String> {
    Ok(qsweep_csv(&qsweep(system, r, q_steps)?))
}

/// Risk parameters for a comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RSelection {
    Single(f64),
    Range(GridRange),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareEntry {
    pub r: f64,
    #[serde(flatten)]
    pub comparison: Comparison,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub energies: Vec<f64>,
    pub entries: Vec<CompareEntry>,
    /// Sign change of `𝒰(first) - 𝒰(second)` inside the range, if any.
    pub crossing: Option<f64>,
}

fn same_hamiltonian(a: &Hamiltonian, b: &Hamiltonian) -> bool {
    a.dim() == b.dim()
        && a.energies()
            .iter()
            .zip(b.energies())
            .all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0))
}

/// Compares two states (coherent ones in the `q = 1/2` representation).
pub fn compare_systems(a: &System, b: &System, r: f64) -> Result<Comparison> {
    if !same_hamiltonian(&a.hamiltonian, &b.hamiltonian) {
        return Err(Error::HamiltonianMismatch);
    }
    let h = &a.hamiltonian;
    let oa = optimal_coherent(&a.state, h, r)?;
    let ob = optimal_coherent(&b.state, h, r)?;
    assemble_comparison(
        (oa.utility, &oa.sorted_u, a.state.average_energy(h)?),
        (ob.utility, &ob.sorted_u, b.state.average_energy(h)?),
        r,
    )
}

pub fn run_compare(a: &System, b: &System, r: RSelection) -> Result<CompareReport> {
    if !same_hamiltonian(&a.hamiltonian, &b.hamiltonian) {
        return Err(Error::HamiltonianMismatch);
    }
    let energies = a.hamiltonian.energies().to_vec();
    match r {
        RSelection::Single(r) => Ok(CompareReport {
            energies,
            entries: vec![CompareEntry {
                r,
                comparison: compare_systems(a, b, r)?,
            }],
            crossing: None,
        }),
        RSelection::Range(g) => {
            g.validate()?;
            let entries = g
                .points()
                .into_par_iter()
                .map(|r| {
                    Ok(CompareEntry {
                        r,
                        comparison: compare_systems(a, b, r)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let diff = |r: f64| -> Result<f64> {
                let c = compare_systems(a, b, r)?;
                Ok(c.utility_first - c.utility_second)
            };
            let crossing = match find_crossing(diff, g.min, g.max, g.steps - 1) {
                Ok(r) => Some(r),
                Err(Error::NoCrossing { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(CompareReport {
                energies,
                entries,
                crossing,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DensityState, StateFile};
    use crate::utility::Preference;
    use num_complex::Complex64;

    fn label_at(rows: &[PhaseD2Row], p: f64, r: f64) -> String {
        rows.iter()
            .find(|row| (row.p - p).abs() < 1e-12 && (row.r - r).abs() < 1e-12)
            .unwrap()
            .permutation
            .label()
    }

    #[test]
    fn grid_range_validation() {
        assert_eq!(GridRange::new(0.0, 1.0, 3).unwrap().points(), vec![0.0, 0.5, 1.0]);
        assert!(GridRange::new(0.0, 1.0, 1).is_err());
        assert!(GridRange::new(1.0, 0.0, 5).is_err());
        assert!(GridRange::new(0.0, f64::INFINITY, 5).is_err());
        let mut job = SweepJob::new(SweepKind::Qsweep);
        assert!(job.validate().is_err());
        job.input = Some("state.json".into());
        job.resolution = Some(1);
        assert!(job.validate().is_err());
    }

    #[test]
    fn phase_d2_examples() {
        let p = GridRange::new(0.25, 0.75, 3).unwrap();
        let r = GridRange::new(-1.0, 1.0, 5).unwrap();
        let rows = phase_d2(&p, &r, 1.0).unwrap();
        assert_eq!(rows.len(), 15);
        for &rv in &[0.5, 1.0] {
            assert_eq!(label_at(&rows, 0.5, rv), "(1,2)");
        }
        for &rv in &[-1.0, -0.5] {
            assert_eq!(label_at(&rows, 0.5, rv), "(2,1)");
        }
        assert_eq!(label_at(&rows, 0.25, 1.0), "(2,1)");
        assert_eq!(label_at(&rows, 0.75, -1.0), "(1,2)");
        assert!(phase_d2(&GridRange::new(0.0, 0.5, 3).unwrap(), &r, 1.0).is_err());
    }

    #[test]
    fn phase_d2_boundary_within_one_cell() {
        let p = GridRange::new(0.05, 0.95, 19).unwrap();
        let r = GridRange::new(-3.0, 3.0, 61).unwrap();
        let rows = phase_d2(&p, &r, 1.0).unwrap();
        for chunk in rows.chunks(r.steps) {
            let p = chunk[0].p;
            let r_star = ((1.0 - p) / p).ln();
            // last r still labelled NOT
            let last_not = chunk.iter().filter(|row| row.permutation.label() == "(2,1)").map(|row| row.r).fold(f64::NEG_INFINITY, f64::max);
            if r_star > r.min && r_star < r.max {
                assert!((last_not - r_star).abs() <= r.cell() + 1e-12, "p = {p}");
            }
        }
        let csv = run_phase_d2(&p, &r, 1.0).unwrap();
        assert_eq!(csv, run_phase_d2(&p, &r, 1.0).unwrap());
        assert!(csv.starts_with("p,r,permutation,utility\n5.0000000000000003e-2,-3.0000000000000000e0,\"(2,1)\","));
    }

    #[test]
    fn phase_d3_examples() {
        let out = run_phase_d3(10, &[0.0, -20.0, 20.0], [1.0, 2.0, 3.0]).unwrap();
        let find = |r: f64, p: [f64; 3]| {
            out.rows
                .iter()
                .find(|row| row.r == r && row.p.iter().zip(&p).all(|(a, b)| (a - b).abs() < 1e-12))
                .unwrap()
                .permutation
                .label()
        };
        assert_eq!(find(0.0, [0.1, 0.3, 0.6]), "(3,2,1)");
        assert_eq!(find(-20.0, [0.1, 0.3, 0.6]), "(3,1,2)");
        assert_eq!(out.frequency(20.0, "(1,2,3)"), Some(1.0));
        for r in [0.0, -20.0, 20.0] {
            let total: f64 = out.frequencies.iter().filter(|f| f.r == r).map(|f| f.frequency).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        assert!(out.map_csv().starts_with("r,p1,p2,p3,permutation,utility\n"));
        assert_eq!(out.frequency_csv().lines().count(), 1 + 18);
        assert!(run_phase_d3(2, &[0.0], [1.0, 2.0, 3.0]).is_err());
    }

    fn system(rho: DensityState, e: &[f64]) -> System {
        System {
            hamiltonian: Hamiltonian::new(e.to_vec()).unwrap(),
            state: rho,
            subsystems: None,
        }
    }

    #[test]
    fn qsweep_examples() {
        let flat = system(DensityState::from_populations(&[0.3, 0.7]).unwrap(), &[0.0, 1.0]);
        let rows = qsweep(&flat, 0.5, 5).unwrap();
        assert!(rows.iter().all(|row| (row.utility - rows[0].utility).abs() < 1e-14));

        let qubit = system(DensityState::qubit(0.35, Complex64::new(0.2, 0.15)).unwrap(), &[0.0, 1.0]);
        let rows = qsweep(&qubit, -0.8, 11).unwrap();
        let min = rows.iter().map(|row| row.utility).fold(f64::INFINITY, f64::min);
        assert_eq!(min, rows[5].utility);
        for i in 0..11 {
            assert!((rows[i].utility - rows[10 - i].utility).abs() < 1e-12);
            assert!(rows[i].theta_identity >= 1.0 - 1e-10);
            assert!(rows[i].min_theta_offdiag <= 1e-10);
        }
        assert!(qsweep_csv(&rows).starts_with("q,utility,theta_I,min_theta_offdiag\n0.0000000000000000e0,"));
    }

    #[test]
    fn compare_examples() {
        let e = [0.0, 1.0];
        let a = system(DensityState::from_populations(&[0.3, 0.7]).unwrap(), &e);
        let report = run_compare(&a, &a, RSelection::Single(0.4)).unwrap();
        assert_eq!(report.entries[0].comparison.preference, Preference::Indifferent);

        let coherent = system(DensityState::qubit(0.4, Complex64::new(0.3, 0.1)).unwrap(), &e);
        let dephased = system(coherent.state.dephase(), &e);
        let c = compare_systems(&coherent, &dephased, 0.7).unwrap();
        assert_eq!(c.preference, Preference::First);

        let other = system(DensityState::from_populations(&[0.3, 0.7]).unwrap(), &[0.0, 2.0]);
        assert_eq!(run_compare(&a, &other, RSelection::Single(0.0)), Err(Error::HamiltonianMismatch));
    }

    #[test]
    fn correlated_pair_crossing() {
        let load = |p: &[f64]| {
            StateFile {
                energies: vec![0.0, 1.0, 1.0, 2.0],
                populations: Some(p.to_vec()),
                matrix_re: None,
                matrix_im: None,
                subsystems: Some([2, 2]),
            }
            .into_system()
            .unwrap()
        };
        let p = [0.33, 0.34, 0.22, 0.11];
        let h = Hamiltonian::weak(vec![0.0, 1.0, 1.0, 2.0]).unwrap();
        let product = crate::incoherent::product_of_marginals(&p, (2, 2), &h).unwrap();
        let report = run_compare(
            &load(&p),
            &load(&product),
            RSelection::Range(GridRange::new(-3.0, 1.0, 81).unwrap()),
        )
        .unwrap();
        let r = report.crossing.unwrap();
        assert!((r + 0.8).abs() < 0.05, "r = {r}");
        assert_eq!(report.entries.len(), 81);
    }
}
