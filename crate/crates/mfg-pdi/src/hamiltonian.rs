//! Convex, Lipschitz-in-momentum Hamiltonians and their subdifferentials.
//!
//! Everything downstream (regularization, the HJB nonlinearity, the KFP drift)
//! consumes a Hamiltonian only through `eval`, `subdiff`, and the Lipschitz
//! constant, so the four built-in forms and user control grids share one type.
//! Subdifferentials are closed intervals: in one space dimension the convex
//! subdifferential of a Lipschitz function is exactly an interval contained in
//! [-L, L].

use crate::expr::Expr;
use serde::Deserialize;
use std::path::Path;
use thiserror::Error;

/// Absolute tie tolerance when collecting argmax controls for the hull.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum HamiltonianError {
    #[error("unknown Hamiltonian id {0:?} (want abs | xabs | quad | control:<file>)")]
    UnknownName(String),
    #[error("control grid is empty")]
    EmptyControls,
    #[error("control file {path}: {msg}")]
    ControlFile { path: String, msg: String },
    #[error("drift/cost not finite at x={x}, alpha={alpha}")]
    NonFinite { x: f64, alpha: f64 },
    #[error("{0}")]
    NonConvex(String),
}

/// Closed interval [lo, hi], the 1D subdifferential representation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval endpoints out of order: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn width(self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    /// Element of smallest absolute value (0 if the interval straddles 0).
    pub fn min_norm(self) -> f64 {
        if self.lo > 0.0 {
            self.lo
        } else if self.hi < 0.0 {
            self.hi
        } else {
            0.0
        }
    }

    /// Distance from `v` to the interval; 0 when contained.
    pub fn distance(self, v: f64) -> f64 {
        (self.lo - v).max(v - self.hi).max(0.0)
    }
}

/// Which subgradient a solver extracts at a kink.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionRule {
    MinNorm,
    Left,
    Right,
}

/// Coarse tag distinguishing closed-form Hamiltonians from control grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HamiltonianKind {
    Analytic,
    ControlSet,
}

/// Finite control grid with drift b(x, alpha) and running cost f(x, alpha),
/// inducing H(x,p) = max_alpha { b(x,alpha) p - f(x,alpha) }.
#[derive(Clone, Debug)]
pub struct ControlSet {
    alphas: Vec<f64>,
    drift: Expr,
    cost: Expr,
    lip: f64,
}

#[derive(Deserialize)]
struct ControlFile {
    alphas: Vec<f64>,
    b: String,
    f: String,
}

impl ControlSet {
    /// Build from a control list and expression strings in the variables
    /// `x` and `alpha`. The Lipschitz constant is max |b| over the control
    /// grid and a fine x sample of `domain`; both expressions must be finite
    /// there.
    pub fn new(
        alphas: Vec<f64>,
        drift_src: &str,
        cost_src: &str,
        domain: (f64, f64),
    ) -> Result<Self, HamiltonianError> {
        if alphas.is_empty() {
            return Err(HamiltonianError::EmptyControls);
        }
        let vars = ["x", "alpha"];
        let drift = Expr::parse(drift_src, &vars).map_err(|e| HamiltonianError::ControlFile {
            path: "<inline>".into(),
            msg: format!("drift expression: {e}"),
        })?;
        let cost = Expr::parse(cost_src, &vars).map_err(|e| HamiltonianError::ControlFile {
            path: "<inline>".into(),
            msg: format!("cost expression: {e}"),
        })?;
        let mut lip = 0.0f64;
        let nx = 513;
        for i in 0..nx {
            let x = domain.0 + (domain.1 - domain.0) * i as f64 / (nx - 1) as f64;
            for &a in &alphas {
                let b = drift.eval(&[x, a]);
                let f = cost.eval(&[x, a]);
                if !b.is_finite() || !f.is_finite() {
                    return Err(HamiltonianError::NonFinite { x, alpha: a });
                }
                lip = lip.max(b.abs());
            }
        }
        Ok(ControlSet {
            alphas,
            drift,
            cost,
            lip,
        })
    }

    pub fn from_json_file(path: &Path, domain: (f64, f64)) -> Result<Self, HamiltonianError> {
        let wrap = |msg: String| HamiltonianError::ControlFile {
            path: path.display().to_string(),
            msg,
        };
        let text = std::fs::read_to_string(path).map_err(|e| wrap(e.to_string()))?;
        let file: ControlFile = serde_json::from_str(&text).map_err(|e| wrap(e.to_string()))?;
        Self::new(file.alphas, &file.b, &file.f, domain).map_err(|e| match e {
            HamiltonianError::ControlFile { msg, .. } => wrap(msg),
            other => other,
        })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn drift_at(&self, x: f64, alpha: f64) -> f64 {
        self.drift.eval(&[x, alpha])
    }

    pub fn cost_at(&self, x: f64, alpha: f64) -> f64 {
        self.cost.eval(&[x, alpha])
    }

    fn eval(&self, x: f64, p: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for &a in &self.alphas {
            let v = self.drift_at(x, a) * p - self.cost_at(x, a);
            if v > best {
                best = v;
            }
        }
        best
    }

    /// Convex hull (= [min, max]) of the drifts of all controls maximizing
    /// within TIE_TOL of the max.
    fn subdiff(&self, x: f64, p: f64) -> Interval {
        let mut best = f64::NEG_INFINITY;
        for &a in &self.alphas {
            best = best.max(self.drift_at(x, a) * p - self.cost_at(x, a));
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &a in &self.alphas {
            let v = self.drift_at(x, a) * p - self.cost_at(x, a);
            if v >= best - TIE_TOL {
                let b = self.drift_at(x, a);
                lo = lo.min(b);
                hi = hi.max(b);
            }
        }
        Interval::new(lo, hi)
    }

    /// Momentum values where the active control switches: the breakpoints of
    /// the upper envelope of the lines p -> b(x,a) p - f(x,a).
    fn breakpoints(&self, x: f64) -> Vec<f64> {
        // collect (slope, intercept), keep the highest intercept per slope
        let mut lines: Vec<(f64, f64)> = self
            .alphas
            .iter()
            .map(|&a| (self.drift_at(x, a), -self.cost_at(x, a)))
            .collect();
        lines.sort_by(|u, v| u.partial_cmp(v).unwrap());
        lines.dedup_by(|next, prev| {
            if (next.0 - prev.0).abs() <= TIE_TOL {
                prev.1 = prev.1.max(next.1);
                true
            } else {
                false
            }
        });
        // upper-hull scan: drop a line if its predecessor/successor crossing
        // order shows it never attains the max
        let mut hull: Vec<(f64, f64)> = Vec::with_capacity(lines.len());
        for l in lines {
            while hull.len() >= 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                // b is dominated iff l overtakes a no later than b does
                let x_ab = (a.1 - b.1) / (b.0 - a.0);
                let x_al = (a.1 - l.1) / (l.0 - a.0);
                if x_al <= x_ab {
                    hull.pop();
                } else {
                    break;
                }
            }
            if hull.len() == 1 {
                let a = hull[0];
                if (l.0 - a.0).abs() <= TIE_TOL {
                    // parallel: keep the higher one
                    if l.1 > a.1 {
                        hull.pop();
                    } else {
                        continue;
                    }
                }
            }
            hull.push(l);
        }
        hull.windows(2)
            .map(|w| (w[0].1 - w[1].1) / (w[1].0 - w[0].0))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Form {
    /// H(p) = |p|
    Abs,
    /// H(x,p) = x |p| (needs x >= 0 for convexity)
    XAbs,
    /// H(p) = p^2/2 clipped to slope 1: |p| - 1/2 for |p| > 1. C^1, not C^2.
    HuberQuad,
    Controls(ControlSet),
}

/// A convex, Lipschitz-in-p Hamiltonian with exact interval subdifferentials.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    pub(crate) form: Form,
    lip: f64,
}

impl Hamiltonian {
    pub fn abs() -> Self {
        Hamiltonian {
            form: Form::Abs,
            lip: 1.0,
        }
    }

    /// H(x,p) = x|p| on a domain with nonnegative x; L_H = max x.
    pub fn xabs(domain: (f64, f64)) -> Result<Self, HamiltonianError> {
        if domain.0 < 0.0 {
            return Err(HamiltonianError::NonConvex(
                "x|p| is convex in p only for x >= 0; domain must not extend below 0".into(),
            ));
        }
        Ok(Hamiltonian {
            form: Form::XAbs,
            lip: domain.1.abs().max(domain.0.abs()),
        })
    }

    /// Quadratic p^2/2 for |p| <= 1, extended with unit slope beyond.
    pub fn huber_quad() -> Self {
        Hamiltonian {
            form: Form::HuberQuad,
            lip: 1.0,
        }
    }

    pub fn control_set(cs: ControlSet) -> Self {
        let lip = cs.lip;
        Hamiltonian {
            form: Form::Controls(cs),
            lip,
        }
    }

    /// Resolve a string id: "abs", "xabs", "quad", or "control:<json-file>".
    pub fn by_name(name: &str, domain: (f64, f64)) -> Result<Self, HamiltonianError> {
        match name {
            "abs" => Ok(Self::abs()),
            "xabs" => Self::xabs(domain),
            "quad" => Ok(Self::huber_quad()),
            other => {
                if let Some(path) = other.strip_prefix("control:") {
                    let cs = ControlSet::from_json_file(Path::new(path), domain)?;
                    Ok(Self::control_set(cs))
                } else {
                    Err(HamiltonianError::UnknownName(other.to_string()))
                }
            }
        }
    }

    pub fn kind(&self) -> HamiltonianKind {
        match self.form {
            Form::Controls(_) => HamiltonianKind::ControlSet,
            _ => HamiltonianKind::Analytic,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        self.lip
    }

    pub fn eval(&self, x: f64, p: f64) -> f64 {
        match &self.form {
            Form::Abs => p.abs(),
            Form::XAbs => x * p.abs(),
            Form::HuberQuad => {
                if p.abs() <= 1.0 {
                    0.5 * p * p
                } else {
                    p.abs() - 0.5
                }
            }
            Form::Controls(cs) => cs.eval(x, p),
        }
    }

    pub fn subdiff(&self, x: f64, p: f64) -> Interval {
        match &self.form {
            Form::Abs => {
                if p > 0.0 {
                    Interval::point(1.0)
                } else if p < 0.0 {
                    Interval::point(-1.0)
                } else {
                    Interval::new(-1.0, 1.0)
                }
            }
            Form::XAbs => {
                if p > 0.0 {
                    Interval::point(x)
                } else if p < 0.0 {
                    Interval::point(-x)
                } else {
                    Interval::new(-x, x)
                }
            }
            Form::HuberQuad => Interval::point(p.clamp(-1.0, 1.0)),
            Form::Controls(cs) => cs.subdiff(x, p),
        }
    }

    pub fn select(&self, x: f64, p: f64, rule: SelectionRule) -> f64 {
        let iv = self.subdiff(x, p);
        match rule {
            SelectionRule::MinNorm => iv.min_norm(),
            SelectionRule::Left => iv.lo,
            SelectionRule::Right => iv.hi,
        }
    }

    /// Momentum values where H(x, .) changes analytic form, for quadrature
    /// panel splitting. Empty means globally smooth enough for one panel.
    pub fn breakpoints(&self, x: f64) -> Vec<f64> {
        match &self.form {
            Form::Abs | Form::XAbs => vec![0.0],
            Form::HuberQuad => vec![-1.0, 1.0],
            Form::Controls(cs) => cs.breakpoints(x),
        }
    }
}

/// What a Newton-type solver needs from a (possibly regularized) Hamiltonian:
/// values, a single tangent slope per point, and the shared Lipschitz bound.
/// Plain Hamiltonians linearize with the min-norm subgradient; regularized
/// ones with their classical derivative.
pub trait LinearizableHamiltonian: Send + Sync {
    fn value(&self, x: f64, p: f64) -> f64;
    fn slope(&self, x: f64, p: f64) -> f64;
    fn lipschitz(&self) -> f64;
    /// The underlying nonsmooth Hamiltonian (self, when nothing was applied).
    fn base(&self) -> &Hamiltonian;
    /// Regularization parameter, if any.
    fn lambda(&self) -> Option<f64>;
}

impl LinearizableHamiltonian for Hamiltonian {
    fn value(&self, x: f64, p: f64) -> f64 {
        self.eval(x, p)
    }

    fn slope(&self, x: f64, p: f64) -> f64 {
        self.select(x, p, SelectionRule::MinNorm)
    }

    fn lipschitz(&self) -> f64 {
        self.lip
    }

    fn base(&self) -> &Hamiltonian {
        self
    }

    fn lambda(&self) -> Option<f64> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const UNIT: (f64, f64) = (0.0, 1.0);

    #[test]
    fn abs_values_and_subdifferential() {
        let h = Hamiltonian::abs();
        assert_eq!(h.eval(0.3, -2.0), 2.0);
        assert_eq!(h.subdiff(0.0, 0.0), Interval::new(-1.0, 1.0));
        assert_eq!(h.subdiff(0.0, 3.0), Interval::point(1.0));
        assert_eq!(h.select(0.0, 0.0, SelectionRule::MinNorm), 0.0);
        assert_eq!(h.select(0.0, 0.0, SelectionRule::Left), -1.0);
        assert_eq!(h.select(0.0, 0.0, SelectionRule::Right), 1.0);
        assert_eq!(h.lipschitz(), 1.0);
        assert_eq!(h.kind(), HamiltonianKind::Analytic);
    }

    #[test]
    fn xabs_values_and_subdifferential() {
        let h = Hamiltonian::xabs(UNIT).unwrap();
        assert_eq!(h.eval(0.5, -2.0), 1.0);
        assert_eq!(h.subdiff(0.5, 2.0), Interval::point(0.5));
        assert_eq!(h.subdiff(0.5, 0.0), Interval::new(-0.5, 0.5));
        for rule in [SelectionRule::MinNorm, SelectionRule::Left, SelectionRule::Right] {
            assert_eq!(h.select(0.25, -3.0, rule), -0.25);
        }
        assert_eq!(h.lipschitz(), 1.0);
        assert!(Hamiltonian::xabs((-0.5, 1.0)).is_err());
    }

    #[test]
    fn huber_quadratic_is_c1_with_clamped_slope() {
        let h = Hamiltonian::huber_quad();
        assert_eq!(h.eval(0.0, 0.5), 0.125);
        assert_eq!(h.eval(0.0, -2.0), 1.5);
        assert_eq!(h.eval(0.0, 1.0), 0.5); // both branches agree at the seam
        assert_eq!(h.subdiff(0.0, 0.7), Interval::point(0.7));
        assert_eq!(h.subdiff(0.0, 42.0), Interval::point(1.0));
        assert_eq!(h.subdiff(0.0, -42.0), Interval::point(-1.0));
        assert_eq!(h.breakpoints(0.0), vec![-1.0, 1.0]);
        assert_eq!(h.lipschitz(), 1.0);
    }

    #[test]
    fn control_grid_matches_brute_force_max() {
        // b = alpha, f = alpha^2/2 over A = {-1, -1/2, 0, 1/2, 1}
        let alphas = vec![-1.0, -0.5, 0.0, 0.5, 1.0];
        let cs = ControlSet::new(alphas.clone(), "alpha", "alpha^2/2", UNIT).unwrap();
        let h = Hamiltonian::control_set(cs);
        assert_eq!(h.kind(), HamiltonianKind::ControlSet);
        assert_eq!(h.lipschitz(), 1.0);
        for i in 0..200 {
            let p = -3.0 + 6.0 * i as f64 / 199.0;
            let brute = alphas
                .iter()
                .map(|a| a * p - a * a / 2.0)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(h.eval(0.5, p), brute);
        }
    }

    #[test]
    fn control_grid_hull_at_ties() {
        let cs = ControlSet::new(vec![-1.0, 0.0, 1.0], "alpha", "0", UNIT).unwrap();
        let h = Hamiltonian::control_set(cs);
        assert_eq!(h.eval(0.2, 3.0), 3.0);
        // at p = 0 every control attains the max; hull spans all drifts
        assert_eq!(h.subdiff(0.2, 0.0), Interval::new(-1.0, 1.0));
        assert_eq!(h.subdiff(0.2, 2.0), Interval::point(1.0));
    }

    #[test]
    fn control_breakpoints_are_envelope_crossings() {
        // lines -p-1/2, 0, p-1/2 cross at -1/2 and 1/2
        let cs = ControlSet::new(vec![-1.0, 0.0, 1.0], "alpha", "alpha^2/2", UNIT).unwrap();
        let bp = cs.breakpoints(0.5);
        assert_eq!(bp.len(), 2);
        assert!((bp[0] + 0.5).abs() < 1e-12 && (bp[1] - 0.5).abs() < 1e-12);

        // a dominated control contributes no breakpoint
        let cs2 = ControlSet::new(vec![-1.0, 0.0, 1.0], "alpha", "abs(alpha)", UNIT).unwrap();
        // lines: -p-1, 0, p-1 ; middle line wins on (-1,1), crossings at +-1
        let bp2 = cs2.breakpoints(0.5);
        assert_eq!(bp2.len(), 2);
        assert!((bp2[0] + 1.0).abs() < 1e-12 && (bp2[1] - 1.0).abs() < 1e-12);

        // x-dependent drift: b = x*alpha halves the slopes, crossings scale by 1/x
        let cs3 = ControlSet::new(vec![-1.0, 0.0, 1.0], "x*alpha", "alpha^2/2", UNIT).unwrap();
        let bp3 = cs3.breakpoints(0.5);
        assert!((bp3[0] + 1.0).abs() < 1e-12 && (bp3[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subgradient_inequality_on_grids() {
        let csh = Hamiltonian::control_set(
            ControlSet::new(vec![-1.0, -0.3, 0.2, 1.0], "alpha", "alpha^2/2", UNIT).unwrap(),
        );
        let hams = [
            Hamiltonian::abs(),
            Hamiltonian::xabs(UNIT).unwrap(),
            Hamiltonian::huber_quad(),
            csh,
        ];
        for h in &hams {
            for ix in 0..5 {
                let x = ix as f64 / 4.0;
                for ip in 0..41 {
                    let p = -2.0 + ip as f64 / 10.0;
                    let iv = h.subdiff(x, p);
                    assert!(iv.lo >= -h.lipschitz() - 1e-12 && iv.hi <= h.lipschitz() + 1e-12);
                    for b in [iv.lo, iv.midpoint(), iv.hi] {
                        for iq in 0..41 {
                            let q = -2.0 + iq as f64 / 10.0;
                            let gap = h.eval(x, q) - h.eval(x, p) - b * (q - p);
                            assert!(gap >= -1e-10, "violation: gap={gap}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn by_name_resolves_builtins_and_files() {
        assert!(Hamiltonian::by_name("abs", UNIT).is_ok());
        assert!(Hamiltonian::by_name("xabs", UNIT).is_ok());
        assert!(Hamiltonian::by_name("quad", UNIT).is_ok());
        assert!(matches!(
            Hamiltonian::by_name("cubic", UNIT),
            Err(HamiltonianError::UnknownName(_))
        ));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("controls.json");
        let mut f = std::fs::File::create(&path).unwrap();
        write!(
            f,
            "{}",
            r#"{"alphas": [-1.0, 0.0, 1.0], "b": "alpha", "f": "alpha^2/2"}"#
        )
        .unwrap();
        let name = format!("control:{}", path.display());
        let h = Hamiltonian::by_name(&name, UNIT).unwrap();
        assert_eq!(h.eval(0.5, 2.0), 1.5);
        assert!(Hamiltonian::by_name("control:/no/such/file.json", UNIT).is_err());
    }

    #[test]
    fn control_file_errors_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let bad_expr = dir.path().join("bad.json");
        std::fs::write(&bad_expr, r#"{"alphas": [0.0], "b": "alpha +", "f": "0"}"#).unwrap();
        assert!(ControlSet::from_json_file(&bad_expr, UNIT).is_err());

        let empty = dir.path().join("empty.json");
        std::fs::write(&empty, r#"{"alphas": [], "b": "alpha", "f": "0"}"#).unwrap();
        assert!(matches!(
            ControlSet::from_json_file(&empty, UNIT),
            Err(HamiltonianError::EmptyControls)
        ));

        let blowup = ControlSet::new(vec![0.0], "1/x", "0", UNIT);
        assert!(matches!(blowup, Err(HamiltonianError::NonFinite { .. })));
    }

    #[test]
    fn min_norm_trait_slope_matches_selection() {
        let h = Hamiltonian::abs();
        let dynh: &dyn LinearizableHamiltonian = &h;
        assert_eq!(dynh.slope(0.0, 0.0), 0.0);
        assert_eq!(dynh.slope(0.0, 2.0), 1.0);
        assert_eq!(dynh.value(0.0, -3.0), 3.0);
        assert!(dynh.lambda().is_none());
        assert_eq!(dynh.base().eval(0.0, -1.0), 1.0);
    }

    #[test]
    fn interval_helpers() {
        let iv = Interval::new(-2.0, 0.5);
        assert_eq!(iv.width(), 2.5);
        assert_eq!(iv.midpoint(), -0.75);
        assert_eq!(iv.min_norm(), 0.0);
        assert_eq!(Interval::new(0.25, 1.0).min_norm(), 0.25);
        assert_eq!(Interval::new(-1.0, -0.25).min_norm(), -0.25);
        assert!(iv.contains(0.5, 0.0) && !iv.contains(0.6, 0.0) && iv.contains(0.6, 0.2));
        assert_eq!(iv.distance(1.5), 1.0);
        assert_eq!(iv.distance(-3.0), 1.0);
        assert_eq!(iv.distance(0.0), 0.0);
    }
}
