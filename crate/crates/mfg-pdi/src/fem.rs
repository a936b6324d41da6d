//! P1 finite elements on an interval: meshes, nodal functions, tridiagonal
//! operators, assembly of the diffusion/advection/nonlinearity forms, norms,
//! and a direct solver.
//!
//! Homogeneous Dirichlet systems are reduced to the interior nodes, so an
//! assembled operator on a mesh with nodes x_0 < ... < x_N acts on vectors of
//! length N-1 indexed by the interior nodes x_1..x_{N-1}.

use std::io::Write;
use std::path::Path;
use thiserror::Error;

use crate::hamiltonian::LinearizableHamiltonian;
use crate::quadrature::{GAUSS2, GAUSS4};

#[derive(Debug, Error)]
pub enum FemError {
    #[error("bad mesh: {0}")]
    BadMesh(String),
    #[error("matrix pivot below 1e-14 at row {row}")]
    SingularMatrix { row: usize },
    #[error("value array length {got} does not match mesh ({expected} nodes)")]
    LengthMismatch { expected: usize, got: usize },
    #[error("dirichlet function has nonzero boundary values")]
    BoundaryViolation,
}

/// Strictly increasing node coordinates on a closed interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh1d {
    nodes: Vec<f64>,
}

impl Mesh1d {
    /// n equal elements on [a, b].
    pub fn uniform(a: f64, b: f64, n: usize) -> Self {
        assert!(n >= 2, "need at least 2 elements");
        assert!(a < b, "empty interval");
        let nodes = (0..=n)
            .map(|i| a + (b - a) * i as f64 / n as f64)
            .collect();
        Mesh1d { nodes }
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self, FemError> {
        if nodes.len() < 3 {
            return Err(FemError::BadMesh("need at least 2 elements".into()));
        }
        if !nodes.windows(2).all(|w| w[1] > w[0]) {
            return Err(FemError::BadMesh("nodes must strictly increase".into()));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(FemError::BadMesh("non-finite node".into()));
        }
        Ok(Mesh1d { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn n_interior(&self) -> usize {
        self.nodes.len() - 2
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().unwrap())
    }

    pub fn h_max(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Element index whose closed interval contains x (clamped at the ends).
    pub fn element_of(&self, x: f64) -> usize {
        let n = self.n_elements();
        let k = self.nodes.partition_point(|&v| v <= x);
        k.saturating_sub(1).min(n - 1)
    }
}

/// Boundary treatment of a nodal function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bc {
    Dirichlet0,
    Free,
}

/// Piecewise-linear nodal function on a mesh.
#[derive(Clone, Debug)]
pub struct FeFunction {
    mesh: Mesh1d,
    values: Vec<f64>,
    bc: Bc,
}

impl FeFunction {
    pub fn zero(mesh: &Mesh1d, bc: Bc) -> Self {
        FeFunction {
            mesh: mesh.clone(),
            values: vec![0.0; mesh.nodes().len()],
            bc,
        }
    }

    pub fn from_values(mesh: &Mesh1d, values: Vec<f64>, bc: Bc) -> Result<Self, FemError> {
        if values.len() != mesh.nodes().len() {
            return Err(FemError::LengthMismatch {
                expected: mesh.nodes().len(),
                got: values.len(),
            });
        }
        if bc == Bc::Dirichlet0 && (values[0] != 0.0 || *values.last().unwrap() != 0.0) {
            return Err(FemError::BoundaryViolation);
        }
        Ok(FeFunction {
            mesh: mesh.clone(),
            values,
            bc,
        })
    }

    /// Interior coefficients padded with the zero boundary values.
    pub fn from_interior(mesh: &Mesh1d, interior: &[f64]) -> Result<Self, FemError> {
        if interior.len() != mesh.n_interior() {
            return Err(FemError::LengthMismatch {
                expected: mesh.n_interior(),
                got: interior.len(),
            });
        }
        let mut values = Vec::with_capacity(mesh.nodes().len());
        values.push(0.0);
        values.extend_from_slice(interior);
        values.push(0.0);
        Ok(FeFunction {
            mesh: mesh.clone(),
            values,
            bc: Bc::Dirichlet0,
        })
    }

    /// Nodal interpolant of f. Dirichlet boundary values are pinned to zero,
    /// so pass Free to sample f at the endpoints too.
    pub fn interpolate(mesh: &Mesh1d, f: &dyn Fn(f64) -> f64, bc: Bc) -> Self {
        let mut values: Vec<f64> = mesh.nodes().iter().map(|&x| f(x)).collect();
        if bc == Bc::Dirichlet0 {
            values[0] = 0.0;
            *values.last_mut().unwrap() = 0.0;
        }
        FeFunction {
            mesh: mesh.clone(),
            values,
            bc,
        }
    }

    pub fn mesh(&self) -> &Mesh1d {
        &self.mesh
    }

    pub fn bc(&self) -> Bc {
        self.bc
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn interior(&self) -> &[f64] {
        &self.values[1..self.values.len() - 1]
    }

    /// Point evaluation of the piecewise-linear interpolant.
    pub fn eval(&self, x: f64) -> f64 {
        let e = self.mesh.element_of(x);
        let (x0, x1) = (self.mesh.nodes()[e], self.mesh.nodes()[e + 1]);
        let t = (x - x0) / (x1 - x0);
        self.values[e] * (1.0 - t) + self.values[e + 1] * t
    }

    /// Constant gradient on element e.
    pub fn grad_on(&self, e: usize) -> f64 {
        let h = self.mesh.nodes()[e + 1] - self.mesh.nodes()[e];
        (self.values[e + 1] - self.values[e]) / h
    }

    /// Gradient of the element containing x.
    pub fn grad_at(&self, x: f64) -> f64 {
        self.grad_on(self.mesh.element_of(x))
    }

    /// Exact L2 norm of the piecewise-linear function itself.
    pub fn l2_norm(&self) -> f64 {
        let mut acc = 0.0;
        for e in 0..self.mesh.n_elements() {
            let h = self.mesh.nodes()[e + 1] - self.mesh.nodes()[e];
            let (a, b) = (self.values[e], self.values[e + 1]);
            acc += h * (a * a + a * b + b * b) / 3.0;
        }
        acc.sqrt()
    }

    /// Exact H1 seminorm (L2 norm of the broken gradient).
    pub fn h1_seminorm(&self) -> f64 {
        let mut acc = 0.0;
        for e in 0..self.mesh.n_elements() {
            let h = self.mesh.nodes()[e + 1] - self.mesh.nodes()[e];
            let d = self.values[e + 1] - self.values[e];
            acc += d * d / h;
        }
        acc.sqrt()
    }

    /// Two columns x,value with full roundtrip precision.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "x,value")?;
        for (x, v) in self.mesh.nodes().iter().zip(&self.values) {
            writeln!(w, "{x},{v}")?;
        }
        w.flush()
    }
}

/// L2 distance between a nodal function and a closed form, by 4-point Gauss
/// per element (the closed form is smooth, the error integrand is not P1).
pub fn l2_error(f: &FeFunction, exact: &dyn Fn(f64) -> f64) -> f64 {
    let mut acc = 0.0;
    for e in 0..f.mesh().n_elements() {
        let (x0, x1) = (f.mesh().nodes()[e], f.mesh().nodes()[e + 1]);
        let mid = 0.5 * (x0 + x1);
        let half = 0.5 * (x1 - x0);
        for &(xi, wi) in &GAUSS4 {
            let x = mid + half * xi;
            let d = f.eval(x) - exact(x);
            acc += wi * half * d * d;
        }
    }
    acc.sqrt()
}

/// H1-seminorm distance to a closed form with known derivative.
pub fn h1_seminorm_error(f: &FeFunction, dexact: &dyn Fn(f64) -> f64) -> f64 {
    let mut acc = 0.0;
    for e in 0..f.mesh().n_elements() {
        let (x0, x1) = (f.mesh().nodes()[e], f.mesh().nodes()[e + 1]);
        let mid = 0.5 * (x0 + x1);
        let half = 0.5 * (x1 - x0);
        let g = f.grad_on(e);
        for &(xi, wi) in &GAUSS4 {
            let x = mid + half * xi;
            let d = g - dexact(x);
            acc += wi * half * d * d;
        }
    }
    acc.sqrt()
}

/// Tridiagonal operator on the interior nodes of a Dirichlet problem.
#[derive(Clone, Debug, PartialEq)]
pub struct TriDiag {
    sub: Vec<f64>,  // entry i holds A[i][i-1], sub[0] unused
    diag: Vec<f64>, // A[i][i]
    sup: Vec<f64>,  // entry i holds A[i][i+1], last unused
}

impl TriDiag {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1);
        TriDiag {
            sub: vec![0.0; n],
            diag: vec![0.0; n],
            sup: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if j + 1 == i {
            self.sub[i]
        } else if j == i + 1 {
            self.sup[i]
        } else {
            0.0
        }
    }

    /// Accumulate into a band entry; off-band indices are an assembly bug.
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        if i == j {
            self.diag[i] += v;
        } else if j + 1 == i {
            self.sub[i] += v;
        } else if j == i + 1 {
            self.sup[i] += v;
        } else {
            panic!("entry ({i},{j}) outside the tridiagonal band");
        }
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(v.len(), n);
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.sub[i] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.sup[i] * v[i + 1];
            }
            out[i] = acc;
        }
        out
    }

    /// self += c * other.
    pub fn add_scaled(&mut self, other: &TriDiag, c: f64) {
        assert_eq!(self.n(), other.n());
        for i in 0..self.n() {
            self.sub[i] += c * other.sub[i];
            self.diag[i] += c * other.diag[i];
            self.sup[i] += c * other.sup[i];
        }
    }

    pub fn transpose(&self) -> TriDiag {
        let n = self.n();
        let mut t = TriDiag::zeros(n);
        t.diag.copy_from_slice(&self.diag);
        for i in 0..n - 1 {
            t.sub[i + 1] = self.sup[i];
            t.sup[i] = self.sub[i + 1];
        }
        t
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (1..self.n()).all(|i| (self.sub[i] - self.sup[i - 1]).abs() <= tol)
    }

    /// Thomas elimination. No pivoting: the assembled operators here are
    /// either SPD or diffusion-dominated perturbations, so a vanishing pivot
    /// signals a genuinely singular system.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, FemError> {
        let n = self.n();
        assert_eq!(rhs.len(), n);
        let mut c = vec![0.0; n]; // modified superdiagonal
        let mut d = vec![0.0; n]; // modified rhs
        let mut piv = self.diag[0];
        if piv.abs() < 1e-14 || !piv.is_finite() {
            return Err(FemError::SingularMatrix { row: 0 });
        }
        c[0] = self.sup[0] / piv;
        d[0] = rhs[0] / piv;
        for i in 1..n {
            piv = self.diag[i] - self.sub[i] * c[i - 1];
            if piv.abs() < 1e-14 || !piv.is_finite() {
                return Err(FemError::SingularMatrix { row: i });
            }
            c[i] = self.sup[i] / piv;
            d[i] = (rhs[i] - self.sub[i] * d[i - 1]) / piv;
        }
        let mut x = d;
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        Ok(x)
    }
}

/// Stiffness form nu * int u' v' over interior nodes. Exact for P1.
pub fn assemble_diffusion(mesh: &Mesh1d, nu: f64) -> TriDiag {
    assert!(nu > 0.0, "diffusion needs nu > 0");
    let n = mesh.n_interior();
    let mut a = TriDiag::zeros(n);
    for e in 0..mesh.n_elements() {
        let h = mesh.nodes()[e + 1] - mesh.nodes()[e];
        let k = nu / h;
        // element nodes e, e+1 map to interior rows e-1, e
        for (loc_i, loc_j, v) in [(0, 0, k), (0, 1, -k), (1, 0, -k), (1, 1, k)] {
            let gi = e + loc_i;
            let gj = e + loc_j;
            if gi >= 1 && gi <= n && gj >= 1 && gj <= n {
                a.add_at(gi - 1, gj - 1, v);
            }
        }
    }
    a
}

/// Advection form (m, phi) -> int m(x) b(x) phi'(x) dx over interior nodes,
/// 2-point Gauss per element. Row index is the test function phi_i.
pub fn assemble_advection(mesh: &Mesh1d, drift: &dyn Fn(f64) -> f64) -> TriDiag {
    let n = mesh.n_interior();
    let mut a = TriDiag::zeros(n);
    for e in 0..mesh.n_elements() {
        let (x0, x1) = (mesh.nodes()[e], mesh.nodes()[e + 1]);
        let h = x1 - x0;
        let mid = 0.5 * (x0 + x1);
        let half = 0.5 * h;
        for &(xi, wi) in &GAUSS2 {
            let x = mid + half * xi;
            let wb = wi * half * drift(x);
            // local basis values and derivatives at x
            let t = (x - x0) / h;
            let val = [1.0 - t, t];
            let dval = [-1.0 / h, 1.0 / h];
            for loc_i in 0..2 {
                let gi = e + loc_i;
                if gi < 1 || gi > n {
                    continue;
                }
                for loc_j in 0..2 {
                    let gj = e + loc_j;
                    if gj < 1 || gj > n {
                        continue;
                    }
                    a.add_at(gi - 1, gj - 1, wb * (val[loc_j] * dval[loc_i]));
                }
            }
        }
    }
    a
}

/// Nonlinear HJB term at the current iterate u: residual entries
/// int H(x, u') psi_i dx and tangent entries int H_p(x, u') w' psi_i dx,
/// both by 2-point Gauss. The tangent is the transpose of the advection
/// operator with drift H_p(x, u'(x)), down to the last bit: the same products
/// are formed with the roles of value and derivative swapped.
pub fn assemble_hjb_nonlinearity(
    mesh: &Mesh1d,
    ham: &dyn LinearizableHamiltonian,
    u: &FeFunction,
) -> (Vec<f64>, TriDiag) {
    let n = mesh.n_interior();
    let mut residual = vec![0.0; n];
    let mut tangent = TriDiag::zeros(n);
    for e in 0..mesh.n_elements() {
        let (x0, x1) = (mesh.nodes()[e], mesh.nodes()[e + 1]);
        let h = x1 - x0;
        let mid = 0.5 * (x0 + x1);
        let half = 0.5 * h;
        let grad = u.grad_on(e);
        for &(xi, wi) in &GAUSS2 {
            let x = mid + half * xi;
            let t = (x - x0) / h;
            let val = [1.0 - t, t];
            let dval = [-1.0 / h, 1.0 / h];
            let hval = wi * half * ham.value(x, grad);
            let wb = wi * half * ham.slope(x, grad);
            for loc_i in 0..2 {
                let gi = e + loc_i;
                if gi < 1 || gi > n {
                    continue;
                }
                residual[gi - 1] += hval * val[loc_i];
                for loc_j in 0..2 {
                    let gj = e + loc_j;
                    if gj < 1 || gj > n {
                        continue;
                    }
                    tangent.add_at(gi - 1, gj - 1, wb * (dval[loc_j] * val[loc_i]));
                }
            }
        }
    }
    (residual, tangent)
}

/// Load entries int g psi_i dx over interior nodes, 2-point Gauss.
pub fn load_vector(mesh: &Mesh1d, g: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let n = mesh.n_interior();
    let mut load = vec![0.0; n];
    for e in 0..mesh.n_elements() {
        let (x0, x1) = (mesh.nodes()[e], mesh.nodes()[e + 1]);
        let h = x1 - x0;
        let mid = 0.5 * (x0 + x1);
        let half = 0.5 * h;
        for &(xi, wi) in &GAUSS2 {
            let x = mid + half * xi;
            let t = (x - x0) / h;
            let val = [1.0 - t, t];
            for loc_i in 0..2 {
                let gi = e + loc_i;
                if gi >= 1 && gi <= n {
                    load[gi - 1] += wi * half * g(x) * val[loc_i];
                }
            }
        }
    }
    load
}

/// Exact load entries int f_h psi_i dx for a P1 function f_h (mass-matrix
/// action on the nodal values, including the boundary columns).
pub fn load_of(f: &FeFunction) -> Vec<f64> {
    let mesh = f.mesh();
    let n = mesh.n_interior();
    let v = f.values();
    let mut load = vec![0.0; n];
    for i in 1..=n {
        let hl = mesh.nodes()[i] - mesh.nodes()[i - 1];
        let hr = mesh.nodes()[i + 1] - mesh.nodes()[i];
        load[i - 1] = hl * (v[i - 1] + 2.0 * v[i]) / 6.0 + hr * (2.0 * v[i] + v[i + 1]) / 6.0;
    }
    load
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Hamiltonian;
    use crate::regularization::{moreau_yosida, shifted_xabs};

    #[test]
    fn mesh_construction_and_queries() {
        let m = Mesh1d::uniform(0.0, 1.0, 4);
        assert_eq!(m.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(m.n_elements(), 4);
        assert_eq!(m.n_interior(), 3);
        assert_eq!(m.domain(), (0.0, 1.0));
        assert_eq!(m.h_max(), 0.25);
        assert_eq!(m.h_min(), 0.25);
        assert_eq!(m.element_of(0.1), 0);
        assert_eq!(m.element_of(0.25), 1);
        assert_eq!(m.element_of(1.0), 3);
        assert_eq!(m.element_of(-5.0), 0);

        assert!(Mesh1d::from_nodes(vec![0.0, 1.0]).is_err());
        assert!(Mesh1d::from_nodes(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Mesh1d::from_nodes(vec![0.0, 0.7, 1.0]).is_ok());
    }

    #[test]
    fn uniform_stiffness_stencil() {
        let m = Mesh1d::uniform(0.0, 1.0, 4);
        let a = assemble_diffusion(&m, 1.0);
        assert_eq!(a.n(), 3);
        for i in 0..3 {
            assert_eq!(a.at(i, i), 8.0);
        }
        assert_eq!(a.at(1, 0), -4.0);
        assert_eq!(a.at(1, 2), -4.0);
        assert_eq!(a.at(0, 2), 0.0);
        assert!(a.is_symmetric(0.0));

        let a2 = assemble_diffusion(&m, 2.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a2.at(i, j), 2.0 * a.at(i, j));
            }
        }

        let nonuni = Mesh1d::from_nodes(vec![0.0, 0.5, 1.0]).unwrap();
        let a3 = assemble_diffusion(&nonuni, 1.0);
        assert_eq!(a3.n(), 1);
        assert_eq!(a3.at(0, 0), 4.0);
    }

    #[test]
    fn advection_stencils() {
        let m = Mesh1d::uniform(0.0, 1.0, 8);
        let zero = assemble_advection(&m, &|_| 0.0);
        for i in 0..zero.n() {
            for j in 0..zero.n() {
                assert_eq!(zero.at(i, j), 0.0);
            }
        }
        let one = assemble_advection(&m, &|_| 1.0);
        // interior rows: diagonal 0, neighbours +-1/2, rows sum to zero
        for i in 1..one.n() - 1 {
            assert!(one.at(i, i).abs() < 1e-15);
            assert!((one.at(i, i - 1) - 0.5).abs() < 1e-15);
            assert!((one.at(i, i + 1) + 0.5).abs() < 1e-15);
            let sum = one.at(i, i - 1) + one.at(i, i) + one.at(i, i + 1);
            assert!(sum.abs() < 1e-15);
        }
        let scaled = assemble_advection(&m, &|_| -3.0);
        for i in 0..one.n() {
            for j in i.saturating_sub(1)..=(i + 1).min(one.n() - 1) {
                assert!((scaled.at(i, j) + 3.0 * one.at(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn hjb_nonlinearity_values() {
        let m = Mesh1d::uniform(0.0, 1.0, 8);
        // a family vanishing at p = 0 gives a zero residual for u = 0
        let reg = shifted_xabs(0.125).unwrap();
        let u0 = FeFunction::zero(&m, Bc::Dirichlet0);
        let (res, _) = assemble_hjb_nonlinearity(&m, &reg, &u0);
        for r in &res {
            assert!(r.abs() < 1e-15);
        }

        // constant slope 2 >= lambda: value is 2 - lambda/2, residual = value * h
        let lam = 0.25;
        let my = moreau_yosida(Hamiltonian::abs(), lam).unwrap();
        let u = FeFunction::interpolate(&m, &|x| 2.0 * x, Bc::Free);
        let (res, tan) = assemble_hjb_nonlinearity(&m, &my, &u);
        let h = 0.125;
        for r in &res {
            assert!((r - (2.0 - lam / 2.0) * h).abs() < 1e-15);
        }
        // dp = 1 everywhere: tangent rows hold -1/2, 0, +1/2
        for i in 1..tan.n() - 1 {
            assert!((tan.at(i, i - 1) + 0.5).abs() < 1e-15);
            assert!(tan.at(i, i).abs() < 1e-15);
            assert!((tan.at(i, i + 1) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn tangent_is_bitwise_transpose_of_advection() {
        let m = Mesh1d::uniform(0.0, 1.0, 16);
        let my = moreau_yosida(Hamiltonian::abs(), 0.3).unwrap();
        let u = FeFunction::interpolate(&m, &|x| (3.1 * x).sin() * 0.4, Bc::Free);
        let (_, tan) = assemble_hjb_nonlinearity(&m, &my, &u);
        let adv = assemble_advection(&m, &|x| my.dp(x, u.grad_at(x)));
        let advt = adv.transpose();
        for i in 0..tan.n() {
            for j in i.saturating_sub(1)..=(i + 1).min(tan.n() - 1) {
                assert_eq!(
                    tan.at(i, j).to_bits(),
                    advt.at(i, j).to_bits(),
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn load_vectors() {
        let m = Mesh1d::uniform(0.0, 1.0, 8);
        let load = load_vector(&m, &|_| 1.0);
        for l in &load {
            assert!((l - 0.125).abs() < 1e-15);
        }
        // load_of agrees with load_vector for functions both treat exactly
        let f = FeFunction::interpolate(&m, &|x| x, Bc::Free);
        let la = load_of(&f);
        let lb = load_vector(&m, &|x| x);
        for (a, b) in la.iter().zip(&lb) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn norms_and_interpolation() {
        let m = Mesh1d::uniform(0.0, 1.0, 512);
        let f = FeFunction::interpolate(&m, &|x| 0.5 * x * (1.0 - x), Bc::Dirichlet0);
        let exact = 1.0 / 120f64.sqrt();
        assert!((f.l2_norm() - exact).abs() < 1e-4);

        let lin = FeFunction::interpolate(&m, &|x| x, Bc::Free);
        assert!((lin.h1_seminorm() - 1.0).abs() < 1e-13);

        // interpolation is the identity on nodal values
        for (i, &x) in m.nodes().iter().enumerate().step_by(64) {
            assert_eq!(f.values()[i], f.eval(x));
        }
        // midpoint evaluation is the nodal average
        let v = f.eval(0.5 * (m.nodes()[3] + m.nodes()[4]));
        assert!((v - 0.5 * (f.values()[3] + f.values()[4])).abs() < 1e-15);
    }

    #[test]
    fn error_norms_against_closed_forms() {
        let m = Mesh1d::uniform(0.0, 1.0, 64);
        let f = FeFunction::interpolate(&m, &|x| 0.5 * x * (1.0 - x), Bc::Dirichlet0);
        // interpolation error of a quadratic with u'' = -1: L2 = h^2/(2 sqrt(30))
        let e_l2 = l2_error(&f, &|x| 0.5 * x * (1.0 - x));
        let h: f64 = 1.0 / 64.0;
        assert!((e_l2 - h * h / (2.0 * 30f64.sqrt())).abs() < 1e-9);
        let e_h1 = h1_seminorm_error(&f, &|x| 0.5 - x);
        // gradient error of the same interpolant: h/(2 sqrt(3))
        assert!((e_h1 - h / (2.0 * 3f64.sqrt())).abs() < 1e-9);
        // the FE function reproduces itself
        let self_err = l2_error(&f, &|x| f.eval(x));
        assert!(self_err < 1e-15);
    }

    #[test]
    fn thomas_solver_and_singularity() {
        // Poisson sanity: -u'' = 1 on (0,1), u = x(1-x)/2; P1 is nodally exact
        let m = Mesh1d::uniform(0.0, 1.0, 16);
        let a = assemble_diffusion(&m, 1.0);
        let rhs = load_vector(&m, &|_| 1.0);
        let sol = a.solve(&rhs).unwrap();
        for (i, &v) in sol.iter().enumerate() {
            let x = m.nodes()[i + 1];
            assert!((v - 0.5 * x * (1.0 - x)).abs() < 1e-13);
        }
        // residual check well below the advertised tolerance
        let r = a.matvec(&sol);
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..r.len() {
            worst = worst.max((r[i] - rhs[i]).abs());
            scale = scale.max(rhs[i].abs());
        }
        assert!(worst <= 1e-12 * scale.max(1.0));

        let mut sing = TriDiag::zeros(3);
        sing.add_at(0, 0, 1.0);
        sing.add_at(2, 2, 1.0);
        assert!(matches!(
            sing.solve(&[1.0, 1.0, 1.0]),
            Err(FemError::SingularMatrix { row: 1 })
        ));
    }

    #[test]
    fn tridiag_algebra() {
        let mut a = TriDiag::zeros(3);
        a.add_at(0, 0, 2.0);
        a.add_at(0, 1, -1.0);
        a.add_at(1, 0, 3.0);
        a.add_at(1, 1, 5.0);
        a.add_at(1, 2, 0.5);
        a.add_at(2, 1, -2.0);
        a.add_at(2, 2, 4.0);
        let v = a.matvec(&[1.0, 2.0, 3.0]);
        assert_eq!(v, vec![0.0, 14.5, 8.0]);
        let t = a.transpose();
        assert_eq!(t.at(0, 1), 3.0);
        assert_eq!(t.at(1, 0), -1.0);
        assert_eq!(t.at(1, 2), -2.0);
        assert_eq!(t.at(2, 1), 0.5);
        let mut b = TriDiag::zeros(3);
        b.add_at(0, 0, 1.0);
        b.add_scaled(&a, 2.0);
        assert_eq!(b.at(0, 0), 5.0);
        assert_eq!(b.at(1, 0), 6.0);
        assert!(!a.is_symmetric(1e-12));
        let d = assemble_diffusion(&Mesh1d::uniform(0.0, 1.0, 5), 0.7);
        assert!(d.is_symmetric(0.0));
    }

    #[test]
    fn fe_function_validation_and_io() {
        let m = Mesh1d::uniform(0.0, 1.0, 4);
        assert!(matches!(
            FeFunction::from_values(&m, vec![0.0; 3], Bc::Free),
            Err(FemError::LengthMismatch { .. })
        ));
        assert!(matches!(
            FeFunction::from_values(&m, vec![1.0, 0.0, 0.0, 0.0, 0.0], Bc::Dirichlet0),
            Err(FemError::BoundaryViolation)
        ));
        let f = FeFunction::from_interior(&m, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(f.values(), &[0.0, 1.0, 2.0, 3.0, 0.0]);
        assert_eq!(f.interior(), &[1.0, 2.0, 3.0]);
        assert_eq!(f.bc(), Bc::Dirichlet0);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        f.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,value");
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1], "0,0");
        assert_eq!(lines[2], "0.25,1");
    }
}
