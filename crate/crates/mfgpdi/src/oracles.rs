//! Closed-form and semi-analytic reference solutions the canned experiments
//! measure against. Everything here is independent of the finite element
//! solvers: plain formulas, or an integrating-factor quadrature for the
//! oscillatory transport equation.

/// The two exact solution pairs of the nonmonotone model problem on (-1,1)
/// with nu = 1, as ((u1, m1), (u2, m2)). The operators there are -u'' and
/// -m''; the pairs do not solve the system for any other viscosity.
#[allow(clippy::type_complexity)]
pub fn oracle_ex33() -> (
    (fn(f64) -> f64, fn(f64) -> f64),
    (fn(f64) -> f64, fn(f64) -> f64),
) {
    (
        mfg_pdi::coupling::exact_pair_lower(),
        mfg_pdi::coupling::exact_pair_upper(),
    )
}

/// Solution of -nu m'' - (b m)' = 1 on (0,1), m(0) = m(1) = 0, for a
/// constant drift b != 0.
pub fn constant_drift_density(b: f64, nu: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| -x / b + (1.0 - (-b * x / nu).exp()) / (b * (1.0 - (-b / nu).exp()))
}

/// Density limit x(1-x)/(2 nu) of the oscillatory family on (0,1).
pub fn oscillatory_limit_density(nu: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| x * (1.0 - x) / (2.0 * nu)
}

/// Derivative of [`oscillatory_limit_density`].
pub fn oscillatory_limit_density_deriv(nu: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| (1.0 - 2.0 * x) / (2.0 * nu)
}

/// The value the squared H1 seminorm distance between the oscillatory
/// densities and their limit approaches as j grows:
/// integral of x^2 m(x)^2 / (2 nu^2) = 1/(840 nu^4).
pub fn oscillatory_h1_gap_limit(nu: f64) -> f64 {
    1.0 / (840.0 * nu.powi(4))
}

/// Solution of -nu m'' - (b_j m)' = 1 on (0,1), m(0) = m(1) = 0, for the
/// oscillatory drift b_j(x) = -x cos(jx), by integrating factor:
///
///   mu(x) = exp(-(1/nu) (x sin(jx)/j + (cos(jx) - 1)/j^2)),
///   m(x)  = -(I1(x) + C I0(x)) / (nu mu(x)),   C = -I1(1)/I0(1),
///
/// with I0, I1 the running integrals of mu and of s mu(s). The integrals are
/// cumulative trapezoid sums on a uniform grid of 400 j intervals, enough to
/// keep the quadrature error well below the O(h^2) of the solvers it serves
/// as a reference for. Returns a linear interpolant of the table.
pub fn oscillatory_drift_density(j: usize, nu: f64) -> impl Fn(f64) -> f64 {
    assert!(j >= 1, "oscillation index must be positive");
    assert!(nu > 0.0, "viscosity must be positive");
    let jf = j as f64;
    let n = 400 * j;
    let h = 1.0 / n as f64;
    let mu = |x: f64| {
        (-(x * (jf * x).sin() / jf + ((jf * x).cos() - 1.0) / (jf * jf)) / nu).exp()
    };

    let mut i0 = vec![0.0f64; n + 1];
    let mut i1 = vec![0.0f64; n + 1];
    let mut prev_mu = mu(0.0);
    let mut prev_smu = 0.0;
    for k in 1..=n {
        let s = k as f64 * h;
        let mk = mu(s);
        i0[k] = i0[k - 1] + 0.5 * h * (prev_mu + mk);
        i1[k] = i1[k - 1] + 0.5 * h * (prev_smu + s * mk);
        prev_mu = mk;
        prev_smu = s * mk;
    }
    let c = -i1[n] / i0[n];
    let table: Vec<f64> = (0..=n)
        .map(|k| {
            let s = k as f64 * h;
            -(i1[k] + c * i0[k]) / (nu * mu(s))
        })
        .collect();

    move |x: f64| {
        let t = (x.clamp(0.0, 1.0) / h).floor();
        let k = (t as usize).min(n - 1);
        let w = x / h - k as f64;
        table[k] * (1.0 - w) + table[k + 1] * w
    }
}
