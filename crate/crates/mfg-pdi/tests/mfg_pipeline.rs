//! End-to-end checks of the coupled solve: an oscillatory drift family whose
//! value function vanishes identically, fixed-point consistency of the
//! returned triple under one extra Picard sweep, and a nonmonotone coupling
//! with two competing equilibria that the solver must keep apart.

use mfg_pdi::coupling::{exact_pair_lower, exact_pair_upper, PAIR_SEPARATION};
use mfg_pdi::fem::{h1_seminorm_error, l2_error};
use mfg_pdi::{
    load_vector, moreau_yosida, shifted_xabs, solve_hjb, solve_kfp, solve_mfg, Bc, CouplingSpec,
    FeFunction, Hamiltonian, InitialDensity, MfgConfig, Mesh1d,
};

fn l2_diff(a: &FeFunction, b: &FeFunction) -> f64 {
    let mut d = a.clone();
    for (v, w) in d.values_mut().iter_mut().zip(b.values()) {
        *v -= w;
    }
    d.l2_norm()
}

/// With no coupling the value function solves a pure HJB problem whose right
/// side vanishes, so u = 0 and the transport stage sees exactly the drift
/// -x cos(x/lambda). The densities approach x(1-x)/(2 nu) as lambda shrinks.
#[test]
fn oscillatory_shift_family_transports_the_exact_drift() {
    let nu = 1.0;
    let mut dist_to_limit = Vec::new();
    for j in [16usize, 64] {
        let lambda = 1.0 / (std::f64::consts::PI * j as f64);
        let mesh = Mesh1d::uniform(0.0, 1.0, 20 * j);
        let ham = shifted_xabs(lambda).unwrap();
        let cfg = MfgConfig {
            theta: 1.0,
            initial_m: InitialDensity::Zero,
            ..MfgConfig::default()
        };
        let sol = solve_mfg(&mesh, nu, &ham, &CouplingSpec::zero(), &|_| 1.0, &cfg).unwrap();

        assert!(sol.diagnostics.converged);
        assert!(sol.diagnostics.outer_iters <= 2, "outers {}", sol.diagnostics.outer_iters);
        assert!(sol.u.values().iter().all(|v| *v == 0.0), "u is identically zero");
        assert_eq!(sol.lambda, Some(lambda));

        for e in 0..mesh.n_elements() {
            let x = 0.5 * (mesh.nodes()[e] + mesh.nodes()[e + 1]);
            let expected = -x * (x / lambda).cos();
            assert!(
                (sol.drift.eval(x) - expected).abs() <= 1e-15,
                "drift at {x}: {} vs {expected}",
                sol.drift.eval(x)
            );
        }
        // the drift stays inside [-x, x], the subdifferential of the base
        // at the vanishing gradient, up to roundoff
        assert!(sol.diagnostics.inclusion_defect <= 1e-15);
        assert!(sol.diagnostics.kfp_residual <= 1e-12);
        dist_to_limit.push(l2_error(&sol.m, &|x| x * (1.0 - x) / (2.0 * nu)));
    }
    assert!(dist_to_limit[1] < dist_to_limit[0], "{dist_to_limit:?}");
    assert!(dist_to_limit[0] < 0.1);
}

/// The returned triple is recomputed from the final density, so running one
/// more full Picard sweep by hand must move the density by no more than twice
/// the outer tolerance, and the reported residuals must be solver-exact.
#[test]
fn returned_triple_is_consistent_under_an_extra_sweep() {
    let nu = 1.0;
    let mesh = Mesh1d::uniform(0.0, 1.0, 96);
    let ham = moreau_yosida(Hamiltonian::abs(), 0.1).unwrap();
    let coupling = CouplingSpec::identity();
    let outer_tol = 1e-11;
    let cfg = MfgConfig {
        outer_tol,
        ..MfgConfig::default()
    };
    let sol = solve_mfg(&mesh, nu, &ham, &coupling, &|_| 1.0, &cfg).unwrap();
    assert!(sol.diagnostics.converged);
    assert!(sol.diagnostics.hjb_residual <= 10.0 * cfg.hjb.tol_residual);
    assert!(sol.diagnostics.kfp_residual <= 1e-10);
    assert!(sol.diagnostics.min_density >= 0.0);

    let rhs = coupling.apply(&sol.m).unwrap();
    let hjb = solve_hjb(&mesh, nu, &ham, &rhs, &cfg.hjb).unwrap();
    let u = hjb.u;
    let drift = |x: f64| {
        use mfg_pdi::LinearizableHamiltonian;
        ham.slope(x, u.grad_at(x))
    };
    let g_load = load_vector(&mesh, &|_| 1.0);
    let swept = solve_kfp(&mesh, nu, &drift, &g_load, false).unwrap();
    let moved = l2_diff(&swept.m, &sol.m);
    assert!(moved <= 2.0 * outer_tol, "extra sweep moved the density by {moved}");
}

/// The nonmonotone coupling admits two exact equilibria. Started inside each
/// basin the damped iteration must stay there: both runs converge, each lands
/// near its own pair, and the two densities remain well separated.
#[test]
fn competing_equilibria_keep_their_basins() {
    let n = 128usize;
    let mesh = Mesh1d::uniform(-1.0, 1.0, n);
    let h = 2.0 / n as f64;
    let ham = Hamiltonian::huber_quad();
    let coupling = CouplingSpec::nonmonotone_pair();
    let (u_lo, m_lo) = exact_pair_lower();
    let (u_hi, m_hi) = exact_pair_upper();

    let solve_from = |m0: fn(f64) -> f64| {
        let cfg = MfgConfig {
            theta: 0.5,
            outer_tol: h * h,
            max_outer: 400,
            initial_m: InitialDensity::Given(FeFunction::interpolate(&mesh, &m0, Bc::Dirichlet0)),
            ..MfgConfig::default()
        };
        solve_mfg(&mesh, 1.0, &ham, &coupling, &|_| 1.0, &cfg).unwrap()
    };
    let sol_lo = solve_from(m_lo);
    let sol_hi = solve_from(m_hi);

    assert!(sol_lo.diagnostics.converged);
    assert!(sol_hi.diagnostics.converged);
    assert!(l2_error(&sol_lo.m, &m_lo) < 0.05, "{}", l2_error(&sol_lo.m, &m_lo));
    assert!(l2_error(&sol_hi.m, &m_hi) < 0.05, "{}", l2_error(&sol_hi.m, &m_hi));
    assert!(h1_seminorm_error(&sol_lo.u, &|x| -x) < 0.05);
    assert!(h1_seminorm_error(&sol_hi.u, &|x| x) < 0.05);
    assert!((sol_lo.u.values()[n / 2] - u_lo(0.0)).abs() < 0.01);
    assert!((sol_hi.u.values()[n / 2] - u_hi(0.0)).abs() < 0.01);

    let gap = l2_diff(&sol_lo.m, &sol_hi.m);
    assert!(gap > 0.5 * PAIR_SEPARATION, "equilibria collapsed: gap {gap}");
}
