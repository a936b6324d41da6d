//! Numerical laboratory for stationary mean-field games whose Hamiltonian is
//! convex and Lipschitz in the momentum but possibly nondifferentiable.
//!
//! The system on a bounded interval couples a viscous Hamilton-Jacobi-Bellman
//! equation for the value `u` with a Kolmogorov-Fokker-Planck equation for the
//! density `m`,
//!
//! ```text
//!   -nu u'' + H(x, u') = F[m],       -nu m'' - (m b)' = G,       b in dH/dp(x, u'),
//! ```
//!
//! with homogeneous Dirichlet conditions. Where `H` has kinks the transport
//! field `b` is only constrained to a subdifferential, which turns the density
//! equation into a differential inclusion. The crate provides
//!
//! * convex Hamiltonians and their subdifferential selections ([`hamiltonian`]),
//! * four C¹ regularizations with certified uniform gaps ([`regularization`]),
//! * P1 finite elements, tridiagonal operators, two-point Gauss assembly ([`fem`]),
//! * a damped semismooth Newton solver for the discrete HJB equation ([`hjb`]),
//! * the adjoint-consistent transport-diffusion solve ([`kfp`]),
//! * mean-field couplings, including a nonmonotone one with two classical
//!   solutions ([`coupling`]),
//! * the damped Picard driver, inclusion-defect reporting, and a
//!   regularization-error rate harness ([`driver`]).

pub mod coupling;
pub mod driver;
pub mod expr;
pub mod fem;
pub mod hamiltonian;
pub mod hjb;
pub mod kfp;
pub mod quadrature;
pub mod regularization;

pub use coupling::{CouplingError, CouplingKind, CouplingSpec, MonotonicityReport};
pub use driver::{
    hjb_residual_norm, kfp_residual_norm, pdi_inclusion_defect, rate_study, solve_mfg, Drift,
    InitialDensity, MfgConfig, MfgDiagnostics, MfgError, MfgSolution, RateFamily, RateReport,
    RateRow,
};
pub use fem::{
    assemble_advection, assemble_diffusion, assemble_hjb_nonlinearity, load_of, load_vector,
    Bc, FeFunction, FemError, Mesh1d, TriDiag,
};
pub use hamiltonian::{
    ControlSet, Hamiltonian, HamiltonianError, HamiltonianKind, Interval,
    LinearizableHamiltonian, SelectionRule,
};
pub use hjb::{solve_hjb, HjbConfig, HjbError, HjbSolution};
pub use kfp::{solve_kfp, KfpSolution};
pub use regularization::{
    mollify, moreau_yosida, prox, prox_objective, prox_search, shifted_abs, shifted_xabs,
    MollifierSpec, RegError, RegFamily, RegularizedHamiltonian,
};
