//! Coupling operators F mapping a density to the HJB right-hand side, with
//! declared growth/monotonicity/Lipschitz constants and an empirical
//! monotonicity probe.
//!
//! Four kinds: the zero coupling, the identity (strongly monotone, the
//! uniqueness workhorse), a scaled local coupling kappa*m, and a built-in
//! nonmonotone operator on (-1,1) constructed so that the coupled system has
//! two distinct classical solutions. The exact solution pairs of that
//! benchmark are exposed here so solvers and experiments can be checked
//! against them.

use crate::fem::{l2_error, load_of, load_vector, FeFunction, Mesh1d};
use crate::quadrature::{gauss_legendre, integrate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CouplingError {
    #[error("density mesh does not match the coupling's domain")]
    MeshMismatch,
    #[error("unknown coupling id {0:?} (want zero | identity | scaled:<kappa> | nonmono33)")]
    UnknownName(String),
    #[error("bad scale factor in {0:?}")]
    BadScale(String),
    #[error("monotonicity probe needs at least one trial")]
    NoTrials,
}

/// Value function and density of the first exact pair of the nonmonotone
/// benchmark on (-1,1), nu = 1: u = (1-x^2)/2 with the pointwise smaller
/// density.
pub fn exact_pair_lower() -> (fn(f64) -> f64, fn(f64) -> f64) {
    (
        |x| 0.5 * (1.0 - x * x),
        |x| 1.0 - (0.5 * (x * x - 1.0)).exp(),
    )
}

/// Second exact pair: u = (x^2-1)/2 with the pointwise larger density.
pub fn exact_pair_upper() -> (fn(f64) -> f64, fn(f64) -> f64) {
    (
        |x| 0.5 * (x * x - 1.0),
        |x| (0.5 * (1.0 - x * x)).exp() - 1.0,
    )
}

/// L2(-1,1) distance between the two exact densities. Frozen from high-order
/// quadrature of the closed forms; the unit tests recompute it.
pub const PAIR_SEPARATION: f64 = 0.229_345_161_681_584_6;

/// Which coupling operator to apply.
#[derive(Clone, Debug, PartialEq)]
pub enum CouplingKind {
    Zero,
    Identity,
    ScaledLocal(f64),
    NonmonotonePair,
}

/// A coupling operator together with its declared constants: growth C_F in
/// ||F[m]|| <= C_F (||m|| + 1), strong monotonicity c_F (when it holds), and
/// Lipschitz constant L_F (when finite).
#[derive(Clone, Debug)]
pub struct CouplingSpec {
    kind: CouplingKind,
    pub growth: f64,
    pub strong_mono: Option<f64>,
    pub lipschitz: Option<f64>,
}

/// Outcome of the empirical monotonicity probe.
#[derive(Clone, Copy, Debug)]
pub struct MonotonicityReport {
    /// Minimum observed <F[m1]-F[m2], m1-m2> / ||m1-m2||^2.
    pub min_quotient: f64,
    pub trials: usize,
}

// L2(-1,1) norms of the two spatial profiles of the nonmonotone coupling:
// ||x^2/2 + 1||^2 = 83/30, ||x^2/2 - 1||^2 = 43/30.
fn profile_norms() -> (f64, f64) {
    ((83.0 / 30.0f64).sqrt(), (43.0 / 30.0f64).sqrt())
}

impl CouplingSpec {
    pub fn zero() -> Self {
        CouplingSpec {
            kind: CouplingKind::Zero,
            growth: 0.0,
            strong_mono: None,
            lipschitz: Some(0.0),
        }
    }

    pub fn identity() -> Self {
        CouplingSpec {
            kind: CouplingKind::Identity,
            growth: 1.0,
            strong_mono: Some(1.0),
            lipschitz: Some(1.0),
        }
    }

    pub fn scaled(kappa: f64) -> Self {
        CouplingSpec {
            kind: CouplingKind::ScaledLocal(kappa),
            growth: kappa.abs(),
            strong_mono: (kappa > 0.0).then_some(kappa),
            lipschitz: Some(kappa.abs()),
        }
    }

    /// The two-solution benchmark operator
    /// F[m] = (x^2/2 + 1) ||m - m_hi|| / D + (x^2/2 - 1) ||m - m_lo|| / D
    /// with D the separation of the exact densities. Not monotone: pairing
    /// F at the two exact densities against their difference is negative.
    pub fn nonmonotone_pair() -> Self {
        let (gp, gm) = profile_norms();
        let lip = (gp + gm) / PAIR_SEPARATION;
        // growth from ||m - m_i|| <= ||m|| + ||m_i||, taking the larger density norm
        let rule = gauss_legendre(64);
        let (_, m_hi) = exact_pair_upper();
        let hi_norm = integrate(&|x| m_hi(x) * m_hi(x), -1.0, 1.0, &rule).sqrt();
        CouplingSpec {
            kind: CouplingKind::NonmonotonePair,
            growth: lip * (1.0 + hi_norm),
            strong_mono: None,
            lipschitz: Some(lip),
        }
    }

    /// Resolve a CLI id: "zero", "identity", "scaled:<kappa>", "nonmono33".
    pub fn by_name(name: &str) -> Result<Self, CouplingError> {
        match name {
            "zero" => Ok(Self::zero()),
            "identity" => Ok(Self::identity()),
            "nonmono33" => Ok(Self::nonmonotone_pair()),
            other => {
                if let Some(k) = other.strip_prefix("scaled:") {
                    let kappa: f64 = k
                        .parse()
                        .map_err(|_| CouplingError::BadScale(other.to_string()))?;
                    if !kappa.is_finite() {
                        return Err(CouplingError::BadScale(other.to_string()));
                    }
                    Ok(Self::scaled(kappa))
                } else {
                    Err(CouplingError::UnknownName(other.to_string()))
                }
            }
        }
    }

    pub fn kind(&self) -> &CouplingKind {
        &self.kind
    }

    fn check_domain(&self, m: &FeFunction) -> Result<(), CouplingError> {
        if self.kind == CouplingKind::NonmonotonePair {
            let (a, b) = m.mesh().domain();
            if (a + 1.0).abs() > 1e-12 || (b - 1.0).abs() > 1e-12 {
                return Err(CouplingError::MeshMismatch);
            }
        }
        Ok(())
    }

    /// Assembled load vector of F[m] over the interior nodes of m's mesh.
    pub fn apply(&self, m: &FeFunction) -> Result<Vec<f64>, CouplingError> {
        self.check_domain(m)?;
        Ok(match &self.kind {
            CouplingKind::Zero => vec![0.0; m.mesh().n_interior()],
            CouplingKind::Identity => load_of(m),
            CouplingKind::ScaledLocal(k) => {
                let mut v = load_of(m);
                for x in &mut v {
                    *x *= k;
                }
                v
            }
            CouplingKind::NonmonotonePair => {
                let (_, m_lo) = exact_pair_lower();
                let (_, m_hi) = exact_pair_upper();
                let a = l2_error(m, &m_hi) / PAIR_SEPARATION;
                let b = l2_error(m, &m_lo) / PAIR_SEPARATION;
                load_vector(m.mesh(), &|x| {
                    (0.5 * x * x + 1.0) * a + (0.5 * x * x - 1.0) * b
                })
            }
        })
    }

    /// Pointwise value of F[m] at x (same formula the load vector integrates).
    pub fn value(&self, m: &FeFunction, x: f64) -> Result<f64, CouplingError> {
        self.check_domain(m)?;
        Ok(match &self.kind {
            CouplingKind::Zero => 0.0,
            CouplingKind::Identity => m.eval(x),
            CouplingKind::ScaledLocal(k) => k * m.eval(x),
            CouplingKind::NonmonotonePair => {
                let (_, m_lo) = exact_pair_lower();
                let (_, m_hi) = exact_pair_upper();
                let a = l2_error(m, &m_hi) / PAIR_SEPARATION;
                let b = l2_error(m, &m_lo) / PAIR_SEPARATION;
                (0.5 * x * x + 1.0) * a + (0.5 * x * x - 1.0) * b
            }
        })
    }

    /// Sample random density pairs on the mesh and report the minimum
    /// Rayleigh quotient of the coupling against the L2 pairing. For the
    /// nonmonotone kind the first pair is the interpolated exact densities,
    /// which certifies a negative quotient deterministically.
    pub fn test_monotonicity(
        &self,
        mesh: &Mesh1d,
        trials: usize,
        seed: u64,
    ) -> Result<MonotonicityReport, CouplingError> {
        if trials == 0 {
            return Err(CouplingError::NoTrials);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut min_q = f64::INFINITY;
        for t in 0..trials {
            let (m1, m2) = if self.kind == CouplingKind::NonmonotonePair && t == 0 {
                let (_, lo) = exact_pair_lower();
                let (_, hi) = exact_pair_upper();
                (
                    FeFunction::interpolate(mesh, &lo, crate::fem::Bc::Dirichlet0),
                    FeFunction::interpolate(mesh, &hi, crate::fem::Bc::Dirichlet0),
                )
            } else {
                (random_density(mesh, &mut rng), random_density(mesh, &mut rng))
            };
            let f1 = self.apply(&m1)?;
            let f2 = self.apply(&m2)?;
            let mut diff = m1.clone();
            for (d, v) in diff.values_mut().iter_mut().zip(m2.values()) {
                *d -= v;
            }
            let denom = diff.l2_norm().powi(2);
            if denom == 0.0 {
                continue;
            }
            let mut num = 0.0;
            for i in 0..f1.len() {
                num += (f1[i] - f2[i]) * diff.interior()[i];
            }
            min_q = min_q.min(num / denom);
        }
        Ok(MonotonicityReport {
            min_quotient: min_q,
            trials,
        })
    }
}

fn random_density(mesh: &Mesh1d, rng: &mut ChaCha8Rng) -> FeFunction {
    let mut f = FeFunction::zero(mesh, crate::fem::Bc::Dirichlet0);
    let n = f.values().len();
    for v in &mut f.values_mut()[1..n - 1] {
        *v = rng.random_range(-1.0..1.0);
    }
    f
}
