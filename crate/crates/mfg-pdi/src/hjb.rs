//! Damped Newton solver for the discrete HJB equation
//! nu (u', psi') + (H(x, u'), psi) = <rhs, psi> on the interior nodes.
//!
//! The tangent operator reuses the slope field of the supplied Hamiltonian
//! view: the classical derivative for a regularized family, the min-norm
//! subgradient for a raw nonsmooth one. Steps that increase the Euclidean
//! residual norm are retried with a halved step length, so accepted iterates
//! have monotonically non-increasing residuals.

use crate::fem::{assemble_diffusion, assemble_hjb_nonlinearity, FeFunction, FemError, Mesh1d};
use crate::hamiltonian::LinearizableHamiltonian;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HjbError {
    #[error("tangent system is singular: {0}")]
    SingularTangent(#[from] FemError),
    #[error("nonlinear residual is not finite at iteration {0}")]
    NonFinite(usize),
    #[error("rhs length {got} does not match the {expected} interior nodes")]
    RhsMismatch { expected: usize, got: usize },
    #[error("initial guess does not live on the target mesh")]
    BadInitialGuess,
}

#[derive(Clone, Debug)]
pub struct HjbConfig {
    /// Euclidean norm of the nonlinear residual vector at which to stop.
    pub tol_residual: f64,
    pub max_iter: usize,
    /// Initial Newton step length; halved on residual increase (at most 30 times).
    pub damping: f64,
    /// Starting iterate; defaults to the diffusion-only solve of the same rhs.
    pub initial: Option<FeFunction>,
}

impl Default for HjbConfig {
    fn default() -> Self {
        HjbConfig {
            tol_residual: 1e-10,
            max_iter: 100,
            damping: 1.0,
            initial: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HjbSolution {
    pub u: FeFunction,
    pub residual_norm: f64,
    pub iterations: usize,
    /// False when max_iter ran out or the line search stalled; the returned
    /// iterate is still the best one seen.
    pub converged: bool,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

const MAX_HALVINGS: usize = 30;

/// Solve the discrete HJB equation for the given Hamiltonian view and
/// interior load vector.
pub fn solve_hjb(
    mesh: &Mesh1d,
    nu: f64,
    ham: &dyn LinearizableHamiltonian,
    rhs: &[f64],
    cfg: &HjbConfig,
) -> Result<HjbSolution, HjbError> {
    let n = mesh.n_interior();
    if rhs.len() != n {
        return Err(HjbError::RhsMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    let a = assemble_diffusion(mesh, nu);
    let mut u_int = match &cfg.initial {
        Some(f) => {
            if f.mesh() != mesh {
                return Err(HjbError::BadInitialGuess);
            }
            f.interior().to_vec()
        }
        None => a.solve(rhs)?,
    };
    let mut u = FeFunction::from_interior(mesh, &u_int).expect("interior length matches");

    let full_residual = |nl: &[f64], uv: &[f64]| -> Vec<f64> {
        let au = a.matvec(uv);
        (0..n).map(|i| au[i] + nl[i] - rhs[i]).collect()
    };

    let (nl, mut tangent) = assemble_hjb_nonlinearity(mesh, ham, &u);
    let mut fvec = full_residual(&nl, &u_int);
    let mut fnorm = norm2(&fvec);
    let mut iters = 0;
    let mut converged = fnorm <= cfg.tol_residual;

    while !converged && iters < cfg.max_iter {
        if !fnorm.is_finite() {
            return Err(HjbError::NonFinite(iters));
        }
        let mut jac = a.clone();
        jac.add_scaled(&tangent, 1.0);
        let neg_f: Vec<f64> = fvec.iter().map(|v| -v).collect();
        let delta = jac.solve(&neg_f)?;

        let mut theta = cfg.damping;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = (0..n).map(|i| u_int[i] + theta * delta[i]).collect();
            let tf = FeFunction::from_interior(mesh, &trial).expect("interior length matches");
            let (tnl, ttan) = assemble_hjb_nonlinearity(mesh, ham, &tf);
            let tfvec = full_residual(&tnl, &trial);
            let tnorm = norm2(&tfvec);
            if tnorm.is_finite() && tnorm <= fnorm {
                u_int = trial;
                u = tf;
                fvec = tfvec;
                fnorm = tnorm;
                tangent = ttan;
                accepted = true;
                break;
            }
            theta *= 0.5;
        }
        iters += 1;
        if !accepted {
            // line search stalled; current iterate is the best seen
            break;
        }
        converged = fnorm <= cfg.tol_residual;
    }

    Ok(HjbSolution {
        u,
        residual_norm: fnorm,
        iterations: iters,
        converged,
    })
}
