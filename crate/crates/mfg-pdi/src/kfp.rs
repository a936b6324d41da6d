//! Direct solver for the discrete KFP equation
//! nu (m', phi') + (m b, phi') = <source, phi> at a frozen drift b.
//!
//! The advection form is assembled exactly as the transpose of the HJB
//! tangent at the same drift, which keeps the discrete duality between the
//! two equations sharp. Plain Galerkin is the default; an optional
//! element-wise artificial diffusion covers meshes that under-resolve the
//! drift (mesh Peclet >= 1), at the price of breaking that duality.

use crate::fem::{assemble_advection, assemble_diffusion, FeFunction, FemError, Mesh1d, TriDiag};

#[derive(Clone, Debug)]
pub struct KfpSolution {
    pub m: FeFunction,
    /// Smallest nodal value; negative values flag a broken discrete
    /// maximum principle.
    pub min_nodal: f64,
    /// max over elements of |b| h / (2 nu), evaluated at element midpoints.
    pub peclet: f64,
    pub stabilized: bool,
}

/// Element-wise artificial diffusion nu_e = max(0, |b| h/2 - nu), the full
/// upwinding threshold, added as extra stiffness on the flagged elements.
pub(crate) fn stabilization_matrix(
    mesh: &Mesh1d,
    nu: f64,
    drift: &dyn Fn(f64) -> f64,
) -> Option<TriDiag> {
    let n = mesh.n_interior();
    let mut extra = TriDiag::zeros(n);
    let mut any = false;
    for e in 0..mesh.n_elements() {
        let (x0, x1) = (mesh.nodes()[e], mesh.nodes()[e + 1]);
        let h = x1 - x0;
        let nu_e = (drift(0.5 * (x0 + x1)).abs() * h / 2.0 - nu).max(0.0);
        if nu_e == 0.0 {
            continue;
        }
        any = true;
        let k = nu_e / h;
        for (li, lj, v) in [(0, 0, k), (0, 1, -k), (1, 0, -k), (1, 1, k)] {
            let (gi, gj) = (e + li, e + lj);
            if gi >= 1 && gi <= n && gj >= 1 && gj <= n {
                extra.add_at(gi - 1, gj - 1, v);
            }
        }
    }
    any.then_some(extra)
}

/// Solve the KFP system for a frozen drift field and interior source vector.
pub fn solve_kfp(
    mesh: &Mesh1d,
    nu: f64,
    drift: &dyn Fn(f64) -> f64,
    source: &[f64],
    stabilize: bool,
) -> Result<KfpSolution, FemError> {
    let n = mesh.n_interior();
    if source.len() != n {
        return Err(FemError::LengthMismatch {
            expected: n,
            got: source.len(),
        });
    }
    let mut sys = assemble_diffusion(mesh, nu);
    sys.add_scaled(&assemble_advection(mesh, drift), 1.0);

    let mut peclet = 0.0f64;
    for e in 0..mesh.n_elements() {
        let (x0, x1) = (mesh.nodes()[e], mesh.nodes()[e + 1]);
        let h = x1 - x0;
        peclet = peclet.max(drift(0.5 * (x0 + x1)).abs() * h / (2.0 * nu));
    }

    let mut stabilized = false;
    if stabilize {
        if let Some(extra) = stabilization_matrix(mesh, nu, drift) {
            sys.add_scaled(&extra, 1.0);
            stabilized = true;
        }
    }

    let interior = sys.solve(source)?;
    let m = FeFunction::from_interior(mesh, &interior).expect("interior length matches");
    let min_nodal = m.values().iter().copied().fold(f64::INFINITY, f64::min);
    Ok(KfpSolution {
        m,
        min_nodal,
        peclet,
        stabilized,
    })
}
