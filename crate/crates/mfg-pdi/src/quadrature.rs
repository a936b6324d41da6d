//! Gauss-Legendre quadrature on intervals, with optional panel splitting at
//! known integrand kinks.
//!
//! Two fixed rules cover the finite element work: the 2-point rule is exact
//! through cubics (enough for P1 mass/advection entries), the 4-point rule is
//! used when measuring errors against smooth closed forms. Arbitrary node
//! counts are generated on demand for the mollifier convolutions.

/// 2-point rule on [-1, 1]: nodes ±1/sqrt(3), unit weights. Exact to degree 3.
pub const GAUSS2: [(f64, f64); 2] = [
    (-0.577_350_269_189_625_8, 1.0),
    (0.577_350_269_189_625_8, 1.0),
];

/// 4-point rule on [-1, 1]. Exact to degree 7.
pub const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_86),
    (-0.339_981_043_584_856_26, 0.652_145_154_862_546_2),
    (0.339_981_043_584_856_26, 0.652_145_154_862_546_2),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_86),
];

/// Legendre polynomial value and derivative at `x` via the three-term
/// recurrence; derivative from the standard identity (valid for |x| != 1,
/// and all quadrature roots lie strictly inside).
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1], ascending.
///
/// Roots are found by Newton iteration from the Chebyshev-like initial guess;
/// for n <= 128 each root converges in a handful of steps to machine accuracy.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "quadrature rule needs at least one node");
    if n == 1 {
        return vec![(0.0, 2.0)];
    }
    let mut rule = vec![(0.0, 0.0); n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..64 {
            let (p, dp) = legendre_pair(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // initial guesses descend from +1, so index i holds the i-th largest root
        rule[n - 1 - i] = (x, w);
        rule[i] = (-x, w);
    }
    // odd n: the middle node is an exact zero of the odd polynomial
    if n % 2 == 1 {
        rule[n / 2].0 = 0.0;
    }
    rule
}

/// Integral of `f` over [a, b] with the given reference rule.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rule: &[(f64, f64)]) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for &(xi, wi) in rule {
        acc += wi * f(mid + half * xi);
    }
    acc * half
}

/// Integral of `f` over [a, b], splitting the interval at every breakpoint in
/// `kinks` that falls strictly inside. Each panel gets the full rule, so a
/// piecewise-smooth integrand with known kinks is integrated at spectral
/// accuracy.
pub fn integrate_split(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    kinks: &[f64],
    rule: &[(f64, f64)],
) -> f64 {
    let mut cuts: Vec<f64> = kinks.iter().copied().filter(|&k| k > a && k < b).collect();
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cuts.dedup();
    let mut acc = 0.0;
    let mut left = a;
    for &c in &cuts {
        acc += integrate(f, left, c, rule);
        left = c;
    }
    acc + integrate(f, left, b, rule)
}
