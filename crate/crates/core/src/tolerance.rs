//! Numerical tolerances shared by every module.
//!
//! Library code reads [`Tolerances::current`]. A front end may install a
//! scaled profile once at start-up with [`install`]; otherwise the defaults
//! apply.

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max entrywise |M - M†| for a matrix to count as Hermitian.
    pub hermitian: f64,
    /// Max entrywise |U†U - I| for unitarity and orthonormality.
    pub unitary: f64,
    /// Max entrywise eigendecomposition reconstruction error.
    pub reconstruction: f64,
    /// |Tr ρ - 1| and |Σ p - 1|.
    pub trace: f64,
    /// Most negative eigenvalue accepted for a density state.
    pub psd: f64,
    /// Max off-diagonal magnitude of an incoherent state.
    pub incoherent: f64,
    /// Most negative weight accepted in a probability distribution.
    pub negative_weight: f64,
    /// Work atoms closer than this are merged.
    pub merge: f64,
    /// Atoms with |weight| at or below this are dropped.
    pub zero_weight: f64,
    /// Expected utilities closer than this are indifferent.
    pub indifference: f64,
    /// |r| below this is treated as the risk-neutral limit.
    pub near_zero_r: f64,
    /// Relative tolerance under which two candidate optima are tied.
    pub value_tie: f64,
    /// Equality of totals required by majorization.
    pub majorization_total: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian: 1e-10,
            unitary: 1e-10,
            reconstruction: 1e-9,
            trace: 1e-10,
            psd: 1e-10,
            incoherent: 1e-12,
            negative_weight: 1e-12,
            merge: 1e-9,
            zero_weight: 1e-14,
            indifference: 1e-12,
            near_zero_r: 1e-9,
            value_tie: 1e-13,
            majorization_total: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            hermitian: self.hermitian * factor,
            unitary: self.unitary * factor,
            reconstruction: self.reconstruction * factor,
            trace: self.trace * factor,
            psd: self.psd * factor,
            incoherent: self.incoherent * factor,
            negative_weight: self.negative_weight * factor,
            merge: self.merge * factor,
            zero_weight: self.zero_weight * factor,
            indifference: self.indifference * factor,
            near_zero_r: self.near_zero_r * factor,
            value_tie: self.value_tie * factor,
            majorization_total: self.majorization_total * factor,
        }
    }

    /// The installed profile, or the defaults when none was installed.
    pub fn current() -> &'static Tolerances {
        static DEFAULT: OnceLock<Tolerances> = OnceLock::new();
        INSTALLED
            .get()
            .unwrap_or_else(|| DEFAULT.get_or_init(Tolerances::default))
    }
}

static INSTALLED: OnceLock<Tolerances> = OnceLock::new();

/// Installs a process-wide profile. Fails if one is already installed.
pub fn install(tol: Tolerances) -> Result<(), Tolerances> {
    INSTALLED.set(tol)
}

/// Named tolerance profiles: `strict` keeps the defaults, `default` relaxes
/// every tolerance by a factor of ten.
pub fn profile(name: &str) -> Option<Tolerances> {
    match name {
        "strict" => Some(Tolerances::default()),
        "default" => Some(Tolerances::default().scaled(10.0)),
        _ => None,
    }
}
