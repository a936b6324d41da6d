//! C^1 regularizations H_lambda of a nonsmooth Hamiltonian, each carrying a
//! certified uniform gap omega(lambda) = sup |H_lambda - H|.
//!
//! Four families:
//! - Moreau-Yosida envelope, omega = L^2 lambda / 2,
//! - mollification by a compactly supported bump, omega = C_rho L lambda,
//! - a shifted envelope of x|p| whose drift at p = 0 oscillates in x,
//! - a shifted envelope of |p| whose drift at p = 0 flips sign along
//!   lambda_j = 1/(pi j).
//!
//! The two shifted families keep omega = 2 lambda yet their minimizing drifts
//! do not converge pointwise as lambda -> 0, which is exactly what makes them
//! useful as stress tests for the coupled solver.

use crate::hamiltonian::{Form, Hamiltonian, LinearizableHamiltonian};
use crate::quadrature::{gauss_legendre, integrate, integrate_split};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegError {
    #[error("lambda = {0} outside (0, 1]")]
    BadLambda(f64),
    #[error("mollifier needs at least 3 quadrature nodes, got {0}")]
    QuadratureNodes(usize),
    #[error("prox search failed to contract at x={x}, p={p}, lambda={lambda} (non-convex base?)")]
    ProxNonConvergence { x: f64, p: f64, lambda: f64 },
}

/// Which regularization produced an H_lambda.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegFamily {
    MoreauYosida,
    Mollified,
    ShiftedXAbs,
    ShiftedAbs,
}

impl RegFamily {
    /// Stable id used in CLI flags and report columns.
    pub fn tag(self) -> &'static str {
        match self {
            RegFamily::MoreauYosida => "my",
            RegFamily::Mollified => "mollify",
            RegFamily::ShiftedXAbs => "shift71",
            RegFamily::ShiftedAbs => "shift72",
        }
    }
}

/// Bump profile rho(s) = cos^2(pi s / 2) on [-1, 1], extended by zero.
/// Unit mass in exact arithmetic; the constructor also stores the mass under
/// the configured quadrature rule so discrete convolutions preserve constants.
#[derive(Clone, Debug)]
pub struct MollifierSpec {
    nodes: usize,
    rule: Vec<(f64, f64)>,
    inv_mass: f64,
}

impl MollifierSpec {
    pub fn cos2(nodes: usize) -> Result<Self, RegError> {
        if nodes < 3 {
            return Err(RegError::QuadratureNodes(nodes));
        }
        let rule = gauss_legendre(nodes);
        let mass = integrate(&Self::shape, -1.0, 1.0, &rule);
        Ok(MollifierSpec {
            nodes,
            rule,
            inv_mass: 1.0 / mass,
        })
    }

    fn shape(s: f64) -> f64 {
        if s.abs() >= 1.0 {
            0.0
        } else {
            let c = (0.5 * std::f64::consts::PI * s).cos();
            c * c
        }
    }

    fn shape_deriv(s: f64) -> f64 {
        if s.abs() >= 1.0 {
            0.0
        } else {
            -0.5 * std::f64::consts::PI * (std::f64::consts::PI * s).sin()
        }
    }

    /// Normalized profile value.
    pub fn profile(&self, s: f64) -> f64 {
        Self::shape(s) * self.inv_mass
    }

    pub fn profile_deriv(&self, s: f64) -> f64 {
        Self::shape_deriv(s) * self.inv_mass
    }

    /// First absolute moment of the profile: int |q| rho(q) dq = 1/2 - 2/pi^2.
    pub fn c_rho(&self) -> f64 {
        0.5 - 2.0 / (std::f64::consts::PI * std::f64::consts::PI)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }
}

impl Default for MollifierSpec {
    fn default() -> Self {
        Self::cos2(64).expect("64 >= 3")
    }
}

/// The quantity the proximal map minimizes: H(x,q) + (q-p)^2 / (2 lambda).
pub fn prox_objective(base: &Hamiltonian, x: f64, lambda: f64, p: f64, q: f64) -> f64 {
    base.eval(x, q) + (q - p) * (q - p) / (2.0 * lambda)
}

/// Minimizer of q -> H(x,q) + (q-p)^2 / (2 lambda). Soft-threshold closed
/// forms for the |p| and x|p| bases, golden-section search otherwise.
pub fn prox(base: &Hamiltonian, x: f64, lambda: f64, p: f64) -> Result<f64, RegError> {
    if !(lambda > 0.0) {
        return Err(RegError::BadLambda(lambda));
    }
    match &base.form {
        Form::Abs => Ok(p.signum() * (p.abs() - lambda).max(0.0)),
        Form::XAbs => Ok(p.signum() * (p.abs() - lambda * x).max(0.0)),
        _ => prox_search(base, x, lambda, p),
    }
}

/// Golden-section minimization of the prox objective over the certified
/// bracket [p - lambda L, p + lambda L]. Convexity of the base makes the
/// objective unimodal, so the bracket contracts geometrically.
pub fn prox_search(base: &Hamiltonian, x: f64, lambda: f64, p: f64) -> Result<f64, RegError> {
    if !(lambda > 0.0) {
        return Err(RegError::BadLambda(lambda));
    }
    const TOL: f64 = 1e-12;
    const MAX_ITER: usize = 256;
    let g = |q: f64| base.eval(x, q) + (q - p) * (q - p) / (2.0 * lambda);
    let radius = lambda * base.lipschitz();
    let (mut a, mut b) = (p - radius, p + radius);
    if b - a <= TOL {
        return Ok(p);
    }
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    for _ in 0..MAX_ITER {
        if !gc.is_finite() || !gd.is_finite() {
            return Err(RegError::ProxNonConvergence { x, p, lambda });
        }
        if b - a <= TOL {
            break;
        }
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - gr * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + gr * (b - a);
            gd = g(d);
        }
    }
    if b - a > TOL {
        return Err(RegError::ProxNonConvergence { x, p, lambda });
    }
    Ok(0.5 * (a + b))
}

/// A C^1-in-p surrogate for a nonsmooth Hamiltonian, with its certified gap.
#[derive(Clone, Debug)]
pub struct RegularizedHamiltonian {
    base: Hamiltonian,
    lambda: f64,
    omega: f64,
    family: RegFamily,
    moll: Option<MollifierSpec>,
}

fn check_lambda(lambda: f64) -> Result<(), RegError> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(RegError::BadLambda(lambda))
    }
}

/// Moreau-Yosida envelope inf_q { H(x,q) + (q-p)^2 / (2 lambda) }.
pub fn moreau_yosida(base: Hamiltonian, lambda: f64) -> Result<RegularizedHamiltonian, RegError> {
    check_lambda(lambda)?;
    // probe the prox once per representative point so construction, not a
    // deep eval call, reports a base the search cannot handle
    for &(x, p) in &[(0.0, 0.0), (0.5, 1.0), (1.0, -2.0), (0.25, 3.0)] {
        prox(&base, x, lambda, p)?;
    }
    let l = base.lipschitz();
    Ok(RegularizedHamiltonian {
        base,
        lambda,
        omega: 0.5 * l * l * lambda,
        family: RegFamily::MoreauYosida,
        moll: None,
    })
}

/// Convolution (H(x, .) * rho_lambda)(p) with rho_lambda(s) = rho(s/lambda)/lambda.
pub fn mollify(
    base: Hamiltonian,
    lambda: f64,
    moll: MollifierSpec,
) -> Result<RegularizedHamiltonian, RegError> {
    check_lambda(lambda)?;
    let omega = moll.c_rho() * base.lipschitz() * lambda;
    Ok(RegularizedHamiltonian {
        base,
        lambda,
        omega,
        family: RegFamily::Mollified,
        moll: Some(moll),
    })
}

/// Envelope of x|p| composed with the shift p -> p - x cos(x/lambda) lambda,
/// recentered so H_lambda(x, 0) = 0. Gap bound 2 lambda; the drift at p = 0
/// equals -x cos(x/lambda), which oscillates in x ever faster as lambda -> 0.
pub fn shifted_xabs(lambda: f64) -> Result<RegularizedHamiltonian, RegError> {
    check_lambda(lambda)?;
    let base = Hamiltonian::xabs((0.0, 1.0)).expect("unit interval is admissible");
    Ok(RegularizedHamiltonian {
        base,
        lambda,
        omega: 2.0 * lambda,
        family: RegFamily::ShiftedXAbs,
        moll: None,
    })
}

/// Envelope of |p| composed with the constant shift q_lambda = cos(1/lambda) lambda,
/// recentered so H_lambda(0) = 0. Gap bound 2 lambda; at lambda_j = 1/(pi j)
/// the drift at p = 0 equals (-1)^(j+1), so it has no limit along j.
pub fn shifted_abs(lambda: f64) -> Result<RegularizedHamiltonian, RegError> {
    check_lambda(lambda)?;
    Ok(RegularizedHamiltonian {
        base: Hamiltonian::abs(),
        lambda,
        omega: 2.0 * lambda,
        family: RegFamily::ShiftedAbs,
        moll: None,
    })
}

/// Envelope of |p|: value and derivative.
fn my_abs(lambda: f64, r: f64) -> (f64, f64) {
    if r.abs() >= lambda {
        (r.abs() - 0.5 * lambda, r.signum())
    } else {
        (r * r / (2.0 * lambda), r / lambda)
    }
}

/// Envelope of x|p| (x >= 0): value and derivative.
fn my_xabs(lambda: f64, x: f64, r: f64) -> (f64, f64) {
    if r.abs() >= lambda * x {
        (x * r.abs() - 0.5 * lambda * x * x, x * r.signum())
    } else {
        (r * r / (2.0 * lambda), r / lambda)
    }
}

impl RegularizedHamiltonian {
    pub fn eval(&self, x: f64, p: f64) -> f64 {
        match self.family {
            RegFamily::MoreauYosida => match prox(&self.base, x, self.lambda, p) {
                Ok(q) => {
                    self.base.eval(x, q) + (q - p) * (q - p) / (2.0 * self.lambda)
                }
                Err(_) => f64::NAN,
            },
            RegFamily::Mollified => {
                let moll = self.moll.as_ref().expect("mollified family carries a spec");
                let lam = self.lambda;
                let f = |q: f64| self.base.eval(x, q) * moll.profile((p - q) / lam) / lam;
                let kinks = self.base.breakpoints(x);
                integrate_split(&f, p - lam, p + lam, &kinks, &moll.rule)
            }
            RegFamily::ShiftedXAbs => {
                let c = (x / self.lambda).cos();
                let r = p - x * c * self.lambda;
                my_xabs(self.lambda, x, r).0 - 0.5 * x * x * c * c * self.lambda
            }
            RegFamily::ShiftedAbs => {
                let c = (1.0 / self.lambda).cos();
                let r = p - c * self.lambda;
                my_abs(self.lambda, r).0 - 0.5 * c * c * self.lambda
            }
        }
    }

    /// Classical derivative of H_lambda in p.
    pub fn dp(&self, x: f64, p: f64) -> f64 {
        match self.family {
            RegFamily::MoreauYosida => match prox(&self.base, x, self.lambda, p) {
                // the exact quotient lies in the subdifferential at the prox
                // point, so the slope bound holds; clamping removes the noise
                // a searched prox leaves behind
                Ok(q) => {
                    let l = self.base.lipschitz();
                    ((p - q) / self.lambda).clamp(-l, l)
                }
                Err(_) => f64::NAN,
            },
            RegFamily::Mollified => {
                let moll = self.moll.as_ref().expect("mollified family carries a spec");
                let lam = self.lambda;
                let f =
                    |q: f64| self.base.eval(x, q) * moll.profile_deriv((p - q) / lam) / (lam * lam);
                let kinks = self.base.breakpoints(x);
                integrate_split(&f, p - lam, p + lam, &kinks, &moll.rule)
            }
            RegFamily::ShiftedXAbs => {
                let c = (x / self.lambda).cos();
                my_xabs(self.lambda, x, p - x * c * self.lambda).1
            }
            RegFamily::ShiftedAbs => {
                let c = (1.0 / self.lambda).cos();
                my_abs(self.lambda, p - c * self.lambda).1
            }
        }
    }

    /// Certified uniform gap sup_(x,p) |H_lambda - H|.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn family(&self) -> RegFamily {
        self.family
    }

    pub fn base(&self) -> &Hamiltonian {
        &self.base
    }
}

impl LinearizableHamiltonian for RegularizedHamiltonian {
    fn value(&self, x: f64, p: f64) -> f64 {
        self.eval(x, p)
    }

    fn slope(&self, x: f64, p: f64) -> f64 {
        self.dp(x, p)
    }

    fn lipschitz(&self) -> f64 {
        self.base.lipschitz()
    }

    fn base(&self) -> &Hamiltonian {
        &self.base
    }

    fn lambda(&self) -> Option<f64> {
        Some(self.lambda)
    }
}
