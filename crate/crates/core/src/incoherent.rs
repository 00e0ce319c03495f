//! Optimal cycles for incoherent states.
//!
//! For an incoherent state the optimal cycle permutes energy levels. With
//! exponential utility the optimum sorts `a_k = p_k e^{-rε_k}` in decreasing
//! order against ascending energies; for any other strictly increasing
//! utility the optimum is found by exhaustive search over permutations.
//!
//! Values are always evaluated as `Σ_k p_{π_k} u(ε_{π_k} - ε_k)`, which stays
//! accurate for large `|r|` and as `r → 0`.
//!
//! Tied optima: candidates within a relative tolerance of the best value are
//! treated as equal. Among them a product permutation `σ_A ⊗ σ_B` is
//! preferred when the Hamiltonian carries product labels, and otherwise (or
//! among those) the lexicographically smallest permutation is reported.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::model::{is_generalized_passive, validate_populations, Hamiltonian};
use crate::tolerance::Tolerances;
use crate::utility::{
    certainty_equivalent, exp_certainty_equivalent, exp_utility, utility_value, Preference,
    UtilitySpec,
};

/// Largest dimension accepted by the exhaustive search.
pub const MAX_EXHAUSTIVE_DIM: usize = 8;

/// `π_k` is the source level moved to level `k`; stored 0-based, displayed
/// 1-based as `(π_1,…,π_d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(d: usize) -> Self {
        Permutation((0..d).collect())
    }

    pub fn from_zero_based(map: Vec<usize>) -> Result<Self> {
        let d = map.len();
        let mut seen = vec![false; d];
        for &i in &map {
            if i >= d || seen[i] {
                return Err(Error::Parse(format!("{map:?} is not a permutation")));
            }
            seen[i] = true;
        }
        Ok(Permutation(map))
    }

    pub fn from_one_based(map: &[usize]) -> Result<Self> {
        if map.contains(&0) {
            return Err(Error::Parse("permutation entries start at 1".into()));
        }
        Self::from_zero_based(map.iter().map(|i| i - 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(k, &i)| k == i)
    }

    /// Tuple notation, e.g. `(3,1,2)`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.one_based().iter().map(|i| i.to_string()).collect();
        format!("({})", parts.join(","))
    }

    /// `U = Σ_k |ε_k⟩⟨ε_{π_k}|`.
    pub fn unitary(&self) -> ComplexMatrix {
        self.unitary_with_phases(&vec![0.0; self.len()])
    }

    /// `U = Σ_k e^{iφ_k} |ε_k⟩⟨ε_{π_k}|`.
    pub fn unitary_with_phases(&self, phases: &[f64]) -> ComplexMatrix {
        let d = self.len();
        let mut u = ComplexMatrix::zeros(d);
        for (k, &src) in self.0.iter().enumerate() {
            u[(k, src)] = Complex64::from_polar(1.0, phases[k]);
        }
        u
    }

    /// Real permutation matrix `P_jk = [π_j = k]`.
    pub fn matrix(&self) -> crate::linalg::RealMatrix {
        crate::linalg::RealMatrix::from_fn(self.len(), |j, k| if self.0[j] == k { 1.0 } else { 0.0 })
    }

    /// Populations after the cycle: `p'_k = p_{π_k}`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        self.0.iter().map(|&src| p[src]).collect()
    }

    /// All permutations of `d` elements in lexicographic order.
    pub fn all(d: usize) -> impl Iterator<Item = Permutation> {
        let mut current: Option<Vec<usize>> = Some((0..d).collect());
        std::iter::from_fn(move || {
            let out = current.clone()?;
            let mut next = out.clone();
            current = if next_lexicographic(&mut next) {
                Some(next)
            } else {
                None
            };
            Some(Permutation(out))
        })
    }
}

/// Advances to the next permutation in lexicographic order; false at the last one.
pub fn next_lexicographic(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Permutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let map = inner
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad permutation `{s}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Permutation::from_one_based(&map)
    }
}

impl Serialize for Permutation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationOutcome {
    pub utility: f64,
    pub certainty_equivalent: f64,
    pub permutation: Permutation,
    pub sorted_u: Vec<f64>,
    /// Activation threshold `r_max`; `None` for fewer than two occupied levels.
    #[serde(serialize_with = "serialize_threshold")]
    pub threshold: Option<f64>,
}

fn serialize_threshold<S: Serializer>(t: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match t {
        Some(v) if v.is_infinite() && *v > 0.0 => s.serialize_str("inf"),
        Some(v) if v.is_infinite() => s.serialize_str("-inf"),
        Some(v) => s.serialize_f64(*v),
        None => s.serialize_none(),
    }
}

/// `table[s * d + k] = u(ε_s - ε_k)`: utility of moving source `s` to level `k`.
struct Problem<'a> {
    p: &'a [f64],
    h: &'a Hamiltonian,
    table: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(p: &'a [f64], h: &'a Hamiltonian, mut u: impl FnMut(f64) -> Result<f64>) -> Result<Self> {
        let e = h.energies();
        let d = e.len();
        let mut table = vec![0.0; d * d];
        for s in 0..d {
            if p[s] == 0.0 {
                continue;
            }
            for k in 0..d {
                table[s * d + k] = u(e[s] - e[k])?;
            }
        }
        Ok(Self { p, h, table })
    }

    fn dim(&self) -> usize {
        self.p.len()
    }

    fn value(&self, perm: &[usize]) -> f64 {
        let d = self.dim();
        perm.iter()
            .enumerate()
            .map(|(k, &s)| self.p[s] * self.table[s * d + k])
            .sum()
    }

    /// Absolute tie tolerance: relative tolerance times the largest possible
    /// magnitude of any term.
    fn tie_tolerance(&self) -> f64 {
        let d = self.dim();
        let scale: f64 = (0..d)
            .map(|s| {
                let m = self.table[s * d..(s + 1) * d]
                    .iter()
                    .fold(0.0f64, |a, b| a.max(b.abs()));
                self.p[s] * m
            })
            .sum();
        Tolerances::current().value_tie * scale.max(f64::MIN_POSITIVE)
    }

    /// Lexicographically smallest product permutation within the threshold.
    fn product_candidate(&self, threshold: f64) -> Option<Permutation> {
        let labels = self.h.product()?;
        let (da, db) = labels.dims;
        if factorial(da).saturating_mul(factorial(db)) > 40_320 {
            return None;
        }
        let d = self.dim();
        let mut best: Option<Vec<usize>> = None;
        for sa in Permutation::all(da) {
            for sb in Permutation::all(db) {
                let perm: Vec<usize> = (0..d)
                    .map(|k| {
                        let (a, b) = labels.local(k);
                        labels.level_of(sa.0[a], sb.0[b])
                    })
                    .collect();
                if self.value(&perm) >= threshold && best.as_ref().is_none_or(|b| perm < *b) {
                    best = Some(perm);
                }
            }
        }
        best.map(Permutation)
    }

    /// Canonical optimum given the best value and a routine that extends a
    /// prefix by its best completion.
    fn canonical_greedy(&self, best: f64, completion: impl Fn(&[usize]) -> Vec<usize>) -> Permutation {
        let threshold = best - self.tie_tolerance();
        if let Some(p) = self.product_candidate(threshold) {
            return p;
        }
        let d = self.dim();
        let mut prefix: Vec<usize> = Vec::with_capacity(d);
        for _ in 0..d {
            let chosen = (0..d)
                .filter(|s| !prefix.contains(s))
                .find(|&s| {
                    let mut trial = prefix.clone();
                    trial.push(s);
                    self.value(&completion(&trial)) >= threshold
                })
                .or_else(|| (0..d).find(|s| !prefix.contains(s)))
                .expect("unused source exists");
            prefix.push(chosen);
        }
        Permutation(prefix)
    }
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Sources ordered by `ln p_s - rε_s` descending, ties by index.
fn sort_key_order(p: &[f64], e: &[f64], r: f64) -> Vec<usize> {
    let key: Vec<f64> = p
        .iter()
        .zip(e)
        .map(|(&ps, &es)| if ps > 0.0 { ps.ln() - r * es } else { f64::NEG_INFINITY })
        .collect();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| key[b].total_cmp(&key[a]).then(a.cmp(&b)));
    order
}

fn rearrangement_optimum(p: &[f64], h: &Hamiltonian, r: f64) -> Result<(f64, Permutation)> {
    let problem = if r == 0.0 {
        Problem::new(p, h, Ok)?
    } else {
        Problem::new(p, h, |w| Ok(exp_utility(r, w)))?
    };
    let order = sort_key_order(p, h.energies(), r);
    let best = problem.value(&order);
    if is_generalized_passive(p, h, r) {
        return Ok((0.0, Permutation::identity(p.len())));
    }
    let complete = |prefix: &[usize]| -> Vec<usize> {
        let mut full = prefix.to_vec();
        full.extend(order.iter().filter(|s| !prefix.contains(s)));
        full
    };
    let perm = problem.canonical_greedy(best, complete);
    Ok((best.max(0.0), perm))
}

fn effective_r(r: f64) -> f64 {
    if r.abs() < Tolerances::current().near_zero_r {
        0.0
    } else {
        r
    }
}

/// Maximum average work extractable by a permutation, and the permutation.
pub fn ergotropy(p: &[f64], h: &Hamiltonian) -> Result<(f64, Permutation)> {
    validate_populations(p, h.dim()).map_err(into_probabilities)?;
    let (value, perm) = rearrangement_optimum(p, h, 0.0)?;
    Ok((value, perm))
}

fn into_probabilities(e: Error) -> Error {
    match e {
        Error::DimensionMismatch { expected, found } => {
            Error::InvalidProbabilities(format!("expected {expected} populations, found {found}"))
        }
        other => other,
    }
}

/// Optimal expected exponential utility over all cycles.
pub fn optimal_exponential(p: &[f64], h: &Hamiltonian, r: f64) -> Result<OptimizationOutcome> {
    validate_populations(p, h.dim()).map_err(into_probabilities)?;
    if !r.is_finite() {
        return Err(Error::InvalidUtility(format!("r = {r} is not finite")));
    }
    let r = effective_r(r);
    let (utility, permutation) = rearrangement_optimum(p, h, r)?;
    let certainty_equivalent = if utility == 0.0 {
        0.0
    } else {
        exp_certainty_equivalent(r, utility)?
    };
    Ok(OptimizationOutcome {
        utility,
        certainty_equivalent,
        permutation,
        sorted_u: sorted_u(p, h, r),
        threshold: activation_threshold(p, h).ok(),
    })
}

/// `p_k e^{-rε_k}` sorted descending.
pub fn sorted_u(p: &[f64], h: &Hamiltonian, r: f64) -> Vec<f64> {
    let mut u: Vec<f64> = p
        .iter()
        .zip(h.energies())
        .map(|(pk, ek)| pk * (-r * ek).exp())
        .collect();
    u.sort_by(|a, b| b.total_cmp(a));
    u
}

/// `Σ_k p_{π_k} u(ε_{π_k} - ε_k)` for exponential utility.
pub fn permutation_utility(p: &[f64], h: &Hamiltonian, perm: &Permutation, r: f64) -> f64 {
    let e = h.energies();
    let r = effective_r(r);
    perm.as_slice()
        .iter()
        .enumerate()
        .map(|(k, &s)| p[s] * exp_utility(r, e[s] - e[k]))
        .sum()
}

/// Exhaustive maximum over all `d!` permutations for any utility.
///
/// Optimality over the full unitary group holds for strictly increasing
/// utilities, which every [`UtilitySpec`] is by construction.
pub fn optimal_general(p: &[f64], h: &Hamiltonian, u: &UtilitySpec) -> Result<OptimizationOutcome> {
    validate_populations(p, h.dim()).map_err(into_probabilities)?;
    u.validate()?;
    let d = p.len();
    if d > MAX_EXHAUSTIVE_DIM {
        return Err(Error::DimensionTooLarge {
            dim: d,
            limit: MAX_EXHAUSTIVE_DIM,
        });
    }
    let spec = match u {
        UtilitySpec::Exponential { r } => UtilitySpec::Exponential { r: effective_r(*r) },
        other => other.clone(),
    };
    let problem = Problem::new(p, h, |w| utility_value(&spec, w))?;

    let mut best = f64::NEG_INFINITY;
    for perm in Permutation::all(d) {
        best = best.max(problem.value(perm.as_slice()));
    }
    let threshold = best - problem.tie_tolerance();
    let permutation = problem.product_candidate(threshold).unwrap_or_else(|| {
        Permutation::all(d)
            .find(|perm| problem.value(perm.as_slice()) >= threshold)
            .expect("the maximiser itself qualifies")
    });
    let identity_value = problem.value(Permutation::identity(d).as_slice());
    let (utility, permutation) = if best - identity_value <= problem.tie_tolerance() {
        (identity_value, Permutation::identity(d))
    } else {
        (best, permutation)
    };

    let r = match spec {
        UtilitySpec::Exponential { r } => r,
        _ => 0.0,
    };
    Ok(OptimizationOutcome {
        utility,
        certainty_equivalent: certainty_equivalent(utility, &spec)?,
        permutation,
        sorted_u: sorted_u(p, h, r),
        threshold: activation_threshold(p, h).ok(),
    })
}

/// `r_max = max_{ε_k > ε_n} ln(p_k/p_n) / (ε_k - ε_n)`: some permutation beats
/// doing nothing exactly when `r < r_max`.
///
/// An occupied level above an empty one gives `+inf`. A state with a single
/// occupied level and nothing empty below it is [`Error::DegenerateState`].
pub fn activation_threshold(p: &[f64], h: &Hamiltonian) -> Result<f64> {
    validate_populations(p, h.dim()).map_err(into_probabilities)?;
    let e = h.energies();
    let mut best = f64::NEG_INFINITY;
    for n in 0..p.len() {
        for k in (n + 1)..p.len() {
            if e[k] <= e[n] || p[k] <= 0.0 {
                continue;
            }
            if p[n] <= 0.0 {
                return Ok(f64::INFINITY);
            }
            best = best.max((p[k] / p[n]).ln() / (e[k] - e[n]));
        }
    }
    // a single occupied excited level was caught above as +inf
    if p.iter().filter(|&&x| x > 0.0).count() < 2 {
        return Err(Error::DegenerateState);
    }
    Ok(best)
}

/// Ergotropy and second moment of work under the ergotropic permutation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallRExpansion {
    pub ergotropy: f64,
    pub second_moment: f64,
}

impl SmallRExpansion {
    /// `ℰ - (r/2)⟨w²⟩`.
    pub fn utility_approx(&self, r: f64) -> f64 {
        self.ergotropy - 0.5 * r * self.second_moment
    }

    /// `ℰ - (r/2)(⟨w²⟩ - ℰ²)`.
    pub fn ce_approx(&self, r: f64) -> f64 {
        self.ergotropy - 0.5 * r * (self.second_moment - self.ergotropy * self.ergotropy)
    }
}

pub fn small_r_expansion(p: &[f64], h: &Hamiltonian) -> Result<SmallRExpansion> {
    let (ergotropy, perm) = self::ergotropy(p, h)?;
    let e = h.energies();
    let second_moment = perm
        .as_slice()
        .iter()
        .enumerate()
        .map(|(k, &s)| p[s] * (e[s] - e[k]).powi(2))
        .sum();
    Ok(SmallRExpansion {
        ergotropy,
        second_moment,
    })
}

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn prefix_dominates(a: &[f64], b: &[f64], upto: usize, tol: f64) -> bool {
    let (mut sa, mut sb) = (0.0, 0.0);
    for k in 0..upto {
        sa += a[k];
        sb += b[k];
        if sa < sb - tol {
            return false;
        }
    }
    true
}

fn prefix_tolerance(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(0.0f64, |m, x| m.max(x.abs()));
    1e-14 * scale.max(1.0) * a.len() as f64
}

/// `a ≻_w b`: every prefix sum of the decreasing rearrangement of `a` is at
/// least that of `b`, including the full sum.
pub fn weak_majorizes(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (a, b) = (sorted_desc(a), sorted_desc(b));
    Ok(prefix_dominates(&a, &b, a.len(), prefix_tolerance(&a, &b)))
}

/// `a ≻ b`: prefix sums dominate up to `d - 1` and the totals agree.
pub fn majorizes(a: &[f64], b: &[f64]) -> Result<bool> {
    majorizes_with_tolerance(a, b, Tolerances::current().majorization_total)
}

pub fn majorizes_with_tolerance(a: &[f64], b: &[f64], total_tol: f64) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (a, b) = (sorted_desc(a), sorted_desc(b));
    let d = a.len();
    let totals_equal = (a.iter().sum::<f64>() - b.iter().sum::<f64>()).abs() <= total_tol;
    Ok(totals_equal && prefix_dominates(&a, &b, d.saturating_sub(1), prefix_tolerance(&a, &b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonDiagnostics {
    /// `u ≻_w u'` together with `r < 0` or equal totals.
    pub weak_majorization_applies: bool,
    pub majorization_applies: bool,
    pub equal_energy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub preference: Preference,
    pub utility_first: f64,
    pub utility_second: f64,
    pub diagnostics: ComparisonDiagnostics,
}

/// Ranks two incoherent states by optimal expected utility and reports
/// which sufficient ordering conditions hold for `first ≥ second`.
pub fn compare_states(p: &[f64], p2: &[f64], h: &Hamiltonian, r: f64) -> Result<Comparison> {
    let a = optimal_exponential(p, h, r)?;
    let b = optimal_exponential(p2, h, r)?;
    let energy = |p: &[f64]| -> f64 { p.iter().zip(h.energies()).map(|(x, e)| x * e).sum() };
    assemble_comparison(
        (a.utility, &a.sorted_u, energy(p)),
        (b.utility, &b.sorted_u, energy(p2)),
        r,
    )
}

/// Verdict and diagnostics from `(utility, sorted u_k, average energy)` of two states.
pub(crate) fn assemble_comparison(first: (f64, &[f64], f64), second: (f64, &[f64], f64), r: f64) -> Result<Comparison> {
    let (ua, sa, ea) = first;
    let (ub, sb, eb) = second;
    let tol = Tolerances::current().majorization_total;
    let equal_energy = (ea - eb).abs() <= tol;
    let r_eff = effective_r(r);
    let equal_totals = if r_eff == 0.0 {
        equal_energy
    } else {
        (sa.iter().sum::<f64>() - sb.iter().sum::<f64>()).abs() <= tol
    };
    let diagnostics = ComparisonDiagnostics {
        weak_majorization_applies: weak_majorizes(sa, sb)? && (r_eff < 0.0 || equal_totals),
        majorization_applies: majorizes(sa, sb)?,
        equal_energy,
    };
    Ok(Comparison {
        preference: Preference::from_difference(ua - ub),
        utility_first: ua,
        utility_second: ub,
        diagnostics,
    })
}

/// Level populations of `ρ_A ⊗ ρ_B` built from the marginals of `p`.
///
/// Levels are matched to product states through the Hamiltonian's product
/// labels when present, otherwise the level order is taken to be the
/// Kronecker order.
pub fn product_of_marginals(p: &[f64], dims: (usize, usize), h: &Hamiltonian) -> Result<Vec<f64>> {
    let (da, db) = dims;
    if da * db != p.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: da * db,
        });
    }
    let kron_of = |k: usize| -> usize {
        match h.product() {
            Some(l) if l.dims == dims => l.kron_index[k],
            _ => k,
        }
    };
    let mut pa = vec![0.0; da];
    let mut pb = vec![0.0; db];
    for (k, &pk) in p.iter().enumerate() {
        let i = kron_of(k);
        pa[i / db] += pk;
        pb[i % db] += pk;
    }
    Ok((0..p.len())
        .map(|k| {
            let i = kron_of(k);
            pa[i / db] * pb[i % db]
        })
        .collect())
}

/// Scan range and resolution used by [`find_r_i`].
pub const CROSSING_SCAN: (f64, f64, usize) = (-10.0, 10.0, 2000);

/// Risk parameter at which a correlated state and the product of its
/// marginals are equally valuable.
pub fn find_r_i(p: &[f64], dims: (usize, usize), h: &Hamiltonian) -> Result<f64> {
    validate_populations(p, h.dim()).map_err(into_probabilities)?;
    let product = product_of_marginals(p, dims, h)?;
    let (lo, hi, steps) = CROSSING_SCAN;
    find_crossing(
        |r| Ok(optimal_exponential(p, h, r)?.utility - optimal_exponential(&product, h, r)?.utility),
        lo,
        hi,
        steps,
    )
}

/// Leftmost sign change of `f` on a uniform scan of `[lo, hi]`, refined by
/// bisection. Values within `1e-12` of zero carry no sign.
pub fn find_crossing(
    mut f: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    steps: usize,
) -> Result<f64> {
    if !(lo < hi) || steps < 1 {
        return Err(Error::InvalidRange(format!("[{lo}, {hi}] with {steps} steps")));
    }
    const ZERO: f64 = 1e-12;
    let sign = |v: f64| -> i8 {
        if v > ZERO {
            1
        } else if v < -ZERO {
            -1
        } else {
            0
        }
    };
    let at = |i: usize| lo + (hi - lo) * i as f64 / steps as f64;
    let mut last: Option<(f64, i8)> = None;
    for i in 0..=steps {
        let r = at(i);
        let s = sign(f(r)?);
        if s == 0 {
            continue;
        }
        if let Some((r0, s0)) = last {
            if s != s0 {
                let (mut a, mut b) = (r0, r);
                while b - a > 1e-12 {
                    let m = 0.5 * (a + b);
                    let sm = sign(f(m)?);
                    if sm == s0 {
                        a = m;
                    } else if sm == s {
                        b = m;
                    } else {
                        return Ok(m);
                    }
                }
                return Ok(0.5 * (a + b));
            }
        }
        last = Some((r, s));
    }
    Err(Error::NoCrossing { r_min: lo, r_max: hi })
}
