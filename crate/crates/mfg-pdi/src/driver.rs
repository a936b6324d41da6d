//! Damped Picard iteration for the coupled system: freeze the density,
//! solve the HJB equation, extract the drift from the envelope derivative
//! along the new value function, solve the KFP equation at that drift, and
//! blend. After the loop exits, one consistency sweep recomputes the
//! returned triple (u, m, drift) from the last density so the reported
//! residuals measure the returned objects, not stale iterates.
//!
//! Also home of the inclusion defect (how far the drift strays from the
//! subdifferential of the nonsmooth Hamiltonian along the returned value
//! function) and the regularization rate study.

use crate::coupling::{CouplingError, CouplingSpec};
use crate::fem::{
    assemble_advection, assemble_diffusion, assemble_hjb_nonlinearity, load_vector, Bc,
    FeFunction, FemError, Mesh1d,
};
use crate::hamiltonian::{Hamiltonian, LinearizableHamiltonian};
use crate::hjb::{solve_hjb, HjbConfig, HjbError};
use crate::kfp::{solve_kfp, stabilization_matrix};
use crate::quadrature::GAUSS2;
use crate::regularization::{
    mollify, moreau_yosida, MollifierSpec, RegError, RegularizedHamiltonian,
};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MfgError {
    #[error(transparent)]
    Hjb(#[from] HjbError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Regularization(#[from] RegError),
    #[error("outer iteration {iter} diverged: increment {increment} grew 10x over 5 iterations")]
    Diverged { iter: usize, increment: f64 },
    #[error("bad solver config: {0}")]
    BadConfig(String),
}

/// How to seed the density before the first outer iteration.
#[derive(Clone, Debug, Default)]
pub enum InitialDensity {
    Zero,
    /// Solve the KFP equation once with the drift switched off.
    #[default]
    KfpOfZeroDrift,
    Given(FeFunction),
}

#[derive(Clone, Debug)]
pub struct MfgConfig {
    /// Blend weight in (0, 1]: m_next = (1-theta) m + theta KFP(m).
    pub theta: f64,
    /// Stop when the L2 norm of the density increment drops below this.
    pub outer_tol: f64,
    pub max_outer: usize,
    pub initial_m: InitialDensity,
    pub hjb: HjbConfig,
    /// Add artificial diffusion to under-resolved KFP solves.
    pub stabilize_kfp: bool,
}

impl Default for MfgConfig {
    fn default() -> Self {
        MfgConfig {
            theta: 0.5,
            outer_tol: 1e-10,
            max_outer: 200,
            initial_m: InitialDensity::default(),
            hjb: HjbConfig::default(),
            stabilize_kfp: false,
        }
    }
}

/// The drift field b(x) = H_p(x, u'(x)) carried with the value function it
/// was extracted from, so it can be re-evaluated at any point.
pub struct Drift {
    u: FeFunction,
    slope: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl Drift {
    pub fn eval(&self, x: f64) -> f64 {
        (self.slope)(x, self.u.grad_at(x))
    }

    pub fn as_fn(&self) -> impl Fn(f64) -> f64 + '_ {
        move |x| self.eval(x)
    }
}

impl std::fmt::Debug for Drift {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Drift").finish_non_exhaustive()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MfgDiagnostics {
    /// l2 norm of the assembled HJB defect of the returned (u, m) pair.
    pub hjb_residual: f64,
    /// l2 norm of the assembled KFP defect of the returned (m, drift) pair.
    pub kfp_residual: f64,
    /// Worst-case distance of the drift from the subdifferential of the
    /// nonsmooth Hamiltonian along the returned value function.
    pub inclusion_defect: f64,
    pub outer_iters: usize,
    pub converged: bool,
    /// Density increment norms, one per outer iteration.
    pub increments: Vec<f64>,
    pub min_density: f64,
    pub peclet: f64,
}

#[derive(Debug)]
pub struct MfgSolution {
    pub u: FeFunction,
    pub m: FeFunction,
    pub drift: Drift,
    /// Regularization parameter of the Hamiltonian that was solved, if any.
    pub lambda: Option<f64>,
    pub diagnostics: MfgDiagnostics,
}

fn l2_vec(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean norm of the discrete HJB residual of a candidate value
/// function against the given interior load.
pub fn hjb_residual_norm(
    mesh: &Mesh1d,
    nu: f64,
    ham: &dyn LinearizableHamiltonian,
    u: &FeFunction,
    rhs: &[f64],
) -> f64 {
    let a = assemble_diffusion(mesh, nu);
    let (nl, _) = assemble_hjb_nonlinearity(mesh, ham, u);
    let au = a.matvec(u.interior());
    let r: Vec<f64> = (0..rhs.len()).map(|i| au[i] + nl[i] - rhs[i]).collect();
    l2_vec(&r)
}

/// Euclidean norm of the discrete transport-diffusion residual of a
/// candidate density for the given drift and interior source load.
pub fn kfp_residual_norm(
    mesh: &Mesh1d,
    nu: f64,
    drift: &dyn Fn(f64) -> f64,
    m: &FeFunction,
    source: &[f64],
    stabilized: bool,
) -> f64 {
    let mut sys = assemble_diffusion(mesh, nu);
    sys.add_scaled(&assemble_advection(mesh, drift), 1.0);
    if stabilized {
        if let Some(extra) = stabilization_matrix(mesh, nu, drift) {
            sys.add_scaled(&extra, 1.0);
        }
    }
    let am = sys.matvec(m.interior());
    let r: Vec<f64> = (0..source.len()).map(|i| am[i] - source[i]).collect();
    l2_vec(&r)
}

/// Max over element Gauss points of the distance from drift(x) to the
/// subdifferential of ham at (x, u'(x)). Zero certifies that the drift is an
/// admissible selection for the inclusion.
pub fn pdi_inclusion_defect(
    u: &FeFunction,
    drift: &dyn Fn(f64) -> f64,
    ham: &Hamiltonian,
) -> f64 {
    let mesh = u.mesh();
    let mut worst = 0.0f64;
    for e in 0..mesh.n_elements() {
        let (x0, x1) = (mesh.nodes()[e], mesh.nodes()[e + 1]);
        let mid = 0.5 * (x0 + x1);
        let half = 0.5 * (x1 - x0);
        let du = u.grad_on(e);
        for (xi, _) in GAUSS2 {
            let x = mid + half * xi;
            worst = worst.max(ham.subdiff(x, du).distance(drift(x)));
        }
    }
    worst
}

fn validate(cfg: &MfgConfig) -> Result<(), MfgError> {
    if !(cfg.theta > 0.0 && cfg.theta <= 1.0) {
        return Err(MfgError::BadConfig(format!(
            "theta must lie in (0, 1], got {}",
            cfg.theta
        )));
    }
    if !(cfg.outer_tol > 0.0 && cfg.outer_tol.is_finite()) {
        return Err(MfgError::BadConfig(format!(
            "outer_tol must be positive, got {}",
            cfg.outer_tol
        )));
    }
    if cfg.max_outer == 0 {
        return Err(MfgError::BadConfig("max_outer must be at least 1".into()));
    }
    Ok(())
}

/// Run the damped Picard iteration for the coupled system on the given mesh.
/// The Hamiltonian is anything that can report a value and a linearization
/// slope: a regularized envelope or the nonsmooth operator itself (which
/// linearizes along its minimum-norm subgradient selection).
pub fn solve_mfg<H>(
    mesh: &Mesh1d,
    nu: f64,
    ham: &H,
    coupling: &CouplingSpec,
    g: &dyn Fn(f64) -> f64,
    cfg: &MfgConfig,
) -> Result<MfgSolution, MfgError>
where
    H: LinearizableHamiltonian + Clone + 'static,
{
    validate(cfg)?;
    let g_load = load_vector(mesh, g);

    let mut m = match &cfg.initial_m {
        InitialDensity::Zero => FeFunction::zero(mesh, Bc::Dirichlet0),
        InitialDensity::KfpOfZeroDrift => {
            solve_kfp(mesh, nu, &|_| 0.0, &g_load, cfg.stabilize_kfp)?.m
        }
        InitialDensity::Given(f) => {
            if f.mesh() != mesh {
                return Err(MfgError::BadConfig(
                    "initial density lives on a different mesh".into(),
                ));
            }
            f.clone()
        }
    };

    let mut increments: Vec<f64> = Vec::new();
    let mut outer_iters = 0;
    let mut outer_converged = false;

    for k in 0..cfg.max_outer {
        let rhs = coupling.apply(&m)?;
        let hjb_sol = solve_hjb(mesh, nu, ham, &rhs, &cfg.hjb)?;
        let u = hjb_sol.u;
        let drift = |x: f64| ham.slope(x, u.grad_at(x));
        let kfp_sol = solve_kfp(mesh, nu, &drift, &g_load, cfg.stabilize_kfp)?;

        let mut m_next = m.clone();
        for (a, b) in m_next.values_mut().iter_mut().zip(kfp_sol.m.values()) {
            *a = (1.0 - cfg.theta) * *a + cfg.theta * b;
        }
        let mut diff = m_next.clone();
        for (d, old) in diff.values_mut().iter_mut().zip(m.values()) {
            *d -= old;
        }
        let inc = diff.l2_norm();
        increments.push(inc);
        outer_iters = k + 1;
        m = m_next;

        if inc <= cfg.outer_tol {
            outer_converged = true;
            break;
        }
        if k >= 5 && inc > 10.0 * increments[k - 5] {
            return Err(MfgError::Diverged {
                iter: k + 1,
                increment: inc,
            });
        }
    }

    // consistency sweep: recompute the triple from the final density
    let rhs = coupling.apply(&m)?;
    let hjb_sol = solve_hjb(mesh, nu, ham, &rhs, &cfg.hjb)?;
    let u = hjb_sol.u;
    let ham_owned = ham.clone();
    let drift = Drift {
        u: u.clone(),
        slope: Box::new(move |x, p| ham_owned.slope(x, p)),
    };
    let drift_fn = drift.as_fn();
    let kfp_sol = solve_kfp(mesh, nu, &drift_fn, &g_load, cfg.stabilize_kfp)?;
    let m_star = kfp_sol.m.clone();

    let rhs_star = coupling.apply(&m_star)?;
    let diagnostics = MfgDiagnostics {
        hjb_residual: hjb_residual_norm(mesh, nu, ham, &u, &rhs_star),
        kfp_residual: kfp_residual_norm(mesh, nu, &drift_fn, &m_star, &g_load, kfp_sol.stabilized),
        inclusion_defect: pdi_inclusion_defect(&u, &drift_fn, ham.base()),
        outer_iters,
        converged: outer_converged && hjb_sol.converged,
        increments,
        min_density: kfp_sol.min_nodal,
        peclet: kfp_sol.peclet,
    };
    drop(drift_fn);

    Ok(MfgSolution {
        u,
        m: m_star,
        drift,
        lambda: ham.lambda(),
        diagnostics,
    })
}

/// Which regularization family a rate study sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RateFamily {
    MoreauYosida,
    Mollified,
}

impl RateFamily {
    pub fn build(
        &self,
        base: &Hamiltonian,
        lambda: f64,
    ) -> Result<RegularizedHamiltonian, RegError> {
        match self {
            RateFamily::MoreauYosida => moreau_yosida(base.clone(), lambda),
            RateFamily::Mollified => mollify(base.clone(), lambda, MollifierSpec::default()),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            RateFamily::MoreauYosida => "my",
            RateFamily::Mollified => "mollify",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RateRow {
    pub lambda: f64,
    pub omega: f64,
    /// Full H1 distance of the value function from the reference solve.
    pub err_u_h1: f64,
    /// L2 distance of the density from the reference solve.
    pub err_m_l2: f64,
    /// Rows from non-converged or failed solves keep NaN errors and are
    /// excluded from the fit.
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    pub family: RateFamily,
    pub rows: Vec<RateRow>,
    /// Least-squares slope of log total error against log omega over the
    /// converged rows.
    pub slope: f64,
    /// Smallest C with total error <= C sqrt(omega) across converged rows.
    pub c_half: f64,
}

impl RateReport {
    pub fn csv_string(&self) -> String {
        let mut out = String::from("lambda,omega,err_u_h1,err_m_l2,slope\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.lambda, r.omega, r.err_u_h1, r.err_m_l2, self.slope
            ));
        }
        out
    }
}

fn h1_distance(a: &FeFunction, b: &FeFunction) -> f64 {
    let mut d = a.clone();
    for (x, y) in d.values_mut().iter_mut().zip(b.values()) {
        *x -= y;
    }
    (d.l2_norm().powi(2) + d.h1_seminorm().powi(2)).sqrt()
}

fn l2_distance(a: &FeFunction, b: &FeFunction) -> f64 {
    let mut d = a.clone();
    for (x, y) in d.values_mut().iter_mut().zip(b.values()) {
        *x -= y;
    }
    d.l2_norm()
}

/// Sweep the regularization parameter and measure the distance of each
/// regularized solve from a reference solution on the same mesh, fitting the
/// observed convergence order in the gap bound omega.
#[allow(clippy::too_many_arguments)]
pub fn rate_study(
    mesh: &Mesh1d,
    nu: f64,
    base: &Hamiltonian,
    family: RateFamily,
    coupling: &CouplingSpec,
    g: &dyn Fn(f64) -> f64,
    lambdas: &[f64],
    reference: &MfgSolution,
    cfg: &MfgConfig,
) -> Result<RateReport, MfgError> {
    if reference.u.mesh() != mesh {
        return Err(MfgError::BadConfig(
            "reference solution lives on a different mesh".into(),
        ));
    }
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let reg = family.build(base, lambda)?;
        let omega = reg.omega();
        match solve_mfg(mesh, nu, &reg, coupling, g, cfg) {
            Ok(sol) => rows.push(RateRow {
                lambda,
                omega,
                err_u_h1: h1_distance(&sol.u, &reference.u),
                err_m_l2: l2_distance(&sol.m, &reference.m),
                converged: sol.diagnostics.converged,
            }),
            Err(MfgError::BadConfig(e)) => return Err(MfgError::BadConfig(e)),
            Err(_) => rows.push(RateRow {
                lambda,
                omega,
                err_u_h1: f64::NAN,
                err_m_l2: f64::NAN,
                converged: false,
            }),
        }
    }

    // log-log least squares over usable rows
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.converged && (r.err_u_h1 + r.err_m_l2) > 0.0)
        .map(|r| (r.omega.ln(), (r.err_u_h1 + r.err_m_l2).ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    } else {
        f64::NAN
    };
    let c_half = rows
        .iter()
        .filter(|r| r.converged)
        .map(|r| (r.err_u_h1 + r.err_m_l2) / r.omega.sqrt())
        .fold(0.0f64, f64::max);

    Ok(RateReport {
        family,
        rows,
        slope,
        c_half,
    })
}
