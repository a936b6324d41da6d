//! Randomized checks of the convex-analysis contracts: subgradient
//! inequality, prox optimality, envelope gap certificates, slope bounds,
//! and convexity of every regularized family.

use mfg_pdi::regularization::prox_objective;
use mfg_pdi::{
    mollify, moreau_yosida, prox, shifted_abs, shifted_xabs, ControlSet, Hamiltonian,
    MollifierSpec, RegularizedHamiltonian, SelectionRule,
};
use proptest::prelude::*;
use std::sync::OnceLock;

fn bases() -> &'static Vec<Hamiltonian> {
    static BASES: OnceLock<Vec<Hamiltonian>> = OnceLock::new();
    BASES.get_or_init(|| {
        let controls = ControlSet::new(
            vec![-2.0, -0.5, 0.0, 1.0, 1.5],
            "alpha",
            "alpha^2/2 + 0.1*abs(alpha)*x",
            (0.0, 1.0),
        )
        .unwrap();
        vec![
            Hamiltonian::abs(),
            Hamiltonian::xabs((0.0, 1.0)).unwrap(),
            Hamiltonian::huber_quad(),
            Hamiltonian::control_set(controls),
        ]
    })
}

fn families(lambda: f64) -> Vec<RegularizedHamiltonian> {
    vec![
        moreau_yosida(Hamiltonian::abs(), lambda).unwrap(),
        moreau_yosida(Hamiltonian::xabs((0.0, 1.0)).unwrap(), lambda).unwrap(),
        mollify(Hamiltonian::abs(), lambda, MollifierSpec::default()).unwrap(),
        shifted_xabs(lambda).unwrap(),
        shifted_abs(lambda).unwrap(),
    ]
}

proptest! {
    /// Every reported subgradient supports the graph from below.
    #[test]
    fn subgradient_inequality_holds(
        which in 0usize..4,
        x in 0.0f64..1.0,
        p in -5.0f64..5.0,
        q in -5.0f64..5.0,
    ) {
        let h = &bases()[which];
        let sub = h.subdiff(x, p);
        let hp = h.eval(x, p);
        let hq = h.eval(x, q);
        for b in [sub.lo, sub.hi, h.select(x, p, SelectionRule::MinNorm)] {
            prop_assert!(
                hq >= hp + b * (q - p) - 1e-10,
                "base {which}: H({q}) = {hq} < {} with b = {b}",
                hp + b * (q - p)
            );
        }
    }

    /// The subdifferential interval stays inside the Lipschitz ball and is
    /// monotone along p (convexity).
    #[test]
    fn subdifferential_is_bounded_and_monotone(
        which in 0usize..4,
        x in 0.0f64..1.0,
        p1 in -5.0f64..5.0,
        dp in 1e-6f64..5.0,
    ) {
        let h = &bases()[which];
        let p2 = p1 + dp;
        let s1 = h.subdiff(x, p1);
        let s2 = h.subdiff(x, p2);
        let l = h.lipschitz();
        prop_assert!(s1.lo >= -l - 1e-12 && s1.hi <= l + 1e-12);
        prop_assert!(s1.hi <= s2.lo + 1e-10, "slopes must not decrease");
    }

    /// The proximal point beats every candidate on a bracket-wide grid.
    #[test]
    fn prox_minimizes_its_objective(
        which in 0usize..4,
        x in 0.0f64..1.0,
        p in -5.0f64..5.0,
        lambda in 0.01f64..1.0,
    ) {
        let h = &bases()[which];
        let q = prox(h, x, lambda, p).unwrap();
        let at_qstar = prox_objective(h, x, lambda, p, q);
        let l = h.lipschitz();
        for i in 0..=200 {
            let cand = p - lambda * l + 2.0 * lambda * l * i as f64 / 200.0;
            let val = prox_objective(h, x, lambda, p, cand);
            prop_assert!(
                at_qstar <= val + 1e-10,
                "candidate {cand} beats prox {q}: {val} < {at_qstar}"
            );
        }
    }

    /// Closed-form prox maps are nonexpansive in p.
    #[test]
    fn prox_is_nonexpansive(
        p1 in -5.0f64..5.0,
        p2 in -5.0f64..5.0,
        x in 0.0f64..1.0,
        lambda in 0.01f64..1.0,
    ) {
        for h in &bases()[..2] {
            let q1 = prox(h, x, lambda, p1).unwrap();
            let q2 = prox(h, x, lambda, p2).unwrap();
            prop_assert!((q1 - q2).abs() <= (p1 - p2).abs() + 1e-12);
        }
    }

    /// |H_lambda - H| stays within the certified gap for all four families,
    /// and the Moreau-Yosida envelope approximates from below.
    #[test]
    fn gap_certificates_hold(
        p in -4.0f64..4.0,
        x in 0.0f64..1.0,
        k in 1u32..8,
    ) {
        let lambda = 0.5f64.powi(k as i32);
        for reg in families(lambda) {
            let approx = reg.eval(x, p);
            let exact = reg.base().eval(x, p);
            prop_assert!(
                (approx - exact).abs() <= reg.omega() + 1e-12,
                "family {:?} gap {} > omega {}",
                reg.family(),
                (approx - exact).abs(),
                reg.omega()
            );
        }
        let my = moreau_yosida(Hamiltonian::abs(), lambda).unwrap();
        prop_assert!(my.eval(x, p) <= my.base().eval(x, p) + 1e-12);
    }

    /// Envelope slopes respect the Lipschitz bound and increase with p.
    #[test]
    fn envelope_slopes_bounded_and_monotone(
        p in -4.0f64..4.0,
        dp in 1e-4f64..2.0,
        x in 0.0f64..1.0,
        k in 1u32..8,
    ) {
        let lambda = 0.5f64.powi(k as i32);
        for reg in families(lambda) {
            let l = reg.base().lipschitz();
            let d1 = reg.dp(x, p);
            let d2 = reg.dp(x, p + dp);
            prop_assert!(d1.abs() <= l + 1e-10, "family {:?}", reg.family());
            prop_assert!(d1 <= d2 + 1e-10, "family {:?} slope decreased", reg.family());
        }
    }

    /// Midpoint convexity of every regularized value in p.
    #[test]
    fn envelopes_are_midpoint_convex(
        p in -4.0f64..4.0,
        q in -4.0f64..4.0,
        x in 0.0f64..1.0,
        k in 1u32..8,
    ) {
        let lambda = 0.5f64.powi(k as i32);
        for reg in families(lambda) {
            let mid = reg.eval(x, 0.5 * (p + q));
            let avg = 0.5 * (reg.eval(x, p) + reg.eval(x, q));
            prop_assert!(
                mid <= avg + 1e-12,
                "family {:?}: {mid} > {avg}",
                reg.family()
            );
        }
    }

    /// Shrinking lambda tightens the certified gap monotonically.
    #[test]
    fn omega_shrinks_with_lambda(k in 1u32..10) {
        let big = 0.5f64.powi(k as i32);
        let small = 0.5 * big;
        for (a, b) in families(big).into_iter().zip(families(small)) {
            prop_assert!(b.omega() < a.omega());
            prop_assert!(a.omega() > 0.0);
        }
    }
}

#[test]
fn certified_gap_formulas() {
    let lam = 0.125;
    let my = moreau_yosida(Hamiltonian::abs(), lam).unwrap();
    assert_eq!(my.omega(), 0.5 * lam);
    let mo = mollify(Hamiltonian::abs(), lam, MollifierSpec::default()).unwrap();
    let c_rho = 0.5 - 2.0 / (std::f64::consts::PI * std::f64::consts::PI);
    assert!((mo.omega() - c_rho * lam).abs() < 1e-15);
    assert_eq!(shifted_abs(lam).unwrap().omega(), 2.0 * lam);
    assert_eq!(shifted_xabs(lam).unwrap().omega(), 2.0 * lam);
}
