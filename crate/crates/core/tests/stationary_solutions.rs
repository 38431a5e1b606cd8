//! Stationary solver: a-priori estimates, oracles, and consistency with the
//! time-dependent solver.

use leakypop::grid::GridSpec;
use leakypop::model::{presets, JumpMap, ModelSpec};
use leakypop::pde::{run_frozen, run_nonlinear_from, PdeRecord};
use leakypop::stationary::{
    first_moment_theta, lift_to_density, phi1_apply, solve_stationary, upsilon, BoundaryDensity,
    StationaryOptions,
};

fn opts_on(grid: &GridSpec) -> StationaryOptions {
    StationaryOptions {
        grid: Some(grid.clone()),
        ..StationaryOptions::default()
    }
}

/// A smooth bump of unit mass on the memory nodes.
fn bump(spec: &ModelSpec, centre: f64, width: f64) -> BoundaryDensity {
    let mut u = BoundaryDensity::for_model(spec, 200).unwrap();
    for (v, &m) in u.u_values.iter_mut().zip(&u.m_nodes) {
        *v = (-((m - centre) / width).powi(2)).exp();
    }
    let mass = u.mass();
    for v in &mut u.u_values {
        *v /= mass;
    }
    u
}

#[test]
fn boundary_map_preserves_mass_and_contracts_first_moment() {
    for spec in [presets::asrm0(), presets::depression()] {
        let opts = StationaryOptions::default();
        let g0 = spec.jump.at_zero();
        let theta = first_moment_theta(&spec);
        for centre in [0.3, 0.6, 0.9] {
            let u = bump(&spec, centre * spec.m_max, 0.05 * spec.m_max);
            let out = phi1_apply(&spec, &u, 0.4, &opts).unwrap();
            let rel = (out.mass() / u.mass() - 1.0).abs();
            assert!(rel <= 1e-8, "mass defect {rel}");
            let bound = u.first_moment().max(g0 / (1.0 - theta) * u.mass());
            assert!(out.first_moment() <= bound * (1.0 + 1e-6));
            assert!(out.u_values.iter().all(|&v| v >= 0.0));
        }
    }
}

#[test]
fn constant_hazard_lift_has_exponential_age_law() {
    let c = 2.0;
    let spec = presets::constant_rate(c, JumpMap::additive(0.5));
    let grid = GridSpec::uniform(12.0, 1200, spec.m_max, 50);
    let res = solve_stationary(&spec, &opts_on(&grid)).unwrap();
    assert!(res.converged);
    let da = grid.da();
    let l1: f64 = res
        .rho_inf
        .age_marginal()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let exact = ((-c * grid.a_face(i)).exp() - (-c * grid.a_face(i + 1)).exp()) / da;
            (p - exact).abs() * da
        })
        .sum();
    assert!(l1 <= 1e-3, "L1 = {l1}");
}

#[test]
fn lift_decays_like_the_rate_floor() {
    let spec = presets::asrm0();
    let grid = GridSpec::for_model(&spec, 400, 100);
    let res = solve_stationary(&spec, &opts_on(&grid)).unwrap();
    let (sigma, delta) = (spec.firing.floor(), spec.firing.delta_abs);
    let rho = &res.rho_inf;
    let scaled = |i: usize, j: usize| {
        let a = grid.a_face(i);
        rho.values[rho.idx(i, j)] * rho.m_faces[j + 1] * (sigma * (a - delta)).exp()
    };
    let cut = grid.a_index(delta + 1.0 / sigma).unwrap();
    let c = (0..cut)
        .flat_map(|i| (0..grid.n_m).map(move |j| (i, j)))
        .map(|(i, j)| scaled(i, j))
        .fold(0.0f64, f64::max);
    assert!(c > 0.0);
    for i in cut..grid.n_a {
        for j in 0..grid.n_m {
            assert!(scaled(i, j) <= c * (1.0 + 1e-6), "cell ({i}, {j})");
        }
    }
}

#[test]
fn lift_rejects_models_without_rate_floor() {
    let mut spec = presets::constant_rate(1.0, JumpMap::additive(0.5));
    spec.firing.sigma_floor = 0.0;
    spec.firing.f_max = 0.0;
    let u = bump(
        &presets::constant_rate(1.0, JumpMap::additive(0.5)),
        1.0,
        0.2,
    );
    let grid = GridSpec::uniform(10.0, 10, u.m_nodes[u.m_nodes.len() - 1], 10);
    assert!(lift_to_density(&spec, &u, 0.0, &grid, &StationaryOptions::default()).is_err());
}

/// The lifted stationary state is a fixed point of both the frozen and the
/// nonlinear evolution.
fn check_fixed_point(spec: &ModelSpec, grid: GridSpec) {
    let res = solve_stationary(spec, &opts_on(&grid)).unwrap();
    assert!(res.converged);
    let t_end = 10.0 / spec.lambda;
    let x_tilde = spec.epsilon * res.x_inf;
    let frozen = run_frozen(
        spec,
        x_tilde,
        &res.rho_inf,
        t_end,
        grid.da(),
        &PdeRecord::default(),
    )
    .unwrap();
    let l1 = frozen.density.l1_distance(&res.rho_inf).unwrap();
    assert!(l1 <= 1e-2, "frozen L1 drift {l1}");
    let run = run_nonlinear_from(
        spec,
        &res.rho_inf,
        res.x_inf,
        t_end,
        grid.da(),
        &PdeRecord::default(),
    )
    .unwrap();
    let drift = run
        .trace
        .x_values
        .iter()
        .map(|x| (x - res.x_inf).abs())
        .fold(0.0f64, f64::max);
    assert!(drift <= 1e-3, "x drift {drift}");
}

#[test]
fn depression_stationary_state_is_a_numerical_fixed_point() {
    // the post-spike memory edge needs the diffusion-free memory grid
    let spec = presets::depression();
    check_fixed_point(&spec, GridSpec::aligned(&spec, 800, 200));
}

#[test]
fn time_elapsed_stationary_state_is_a_numerical_fixed_point() {
    let spec = presets::time_elapsed();
    check_fixed_point(&spec, GridSpec::for_model(&spec, 400, 100));
}

#[test]
fn asrm0_stationary_state_is_a_numerical_fixed_point() {
    let spec = presets::asrm0();
    check_fixed_point(&spec, GridSpec::aligned(&spec, 400, 100));
}

#[test]
fn feedback_map_respects_its_bound_and_ignores_input_without_coupling() {
    let opts = StationaryOptions::default();
    let spec = presets::asrm0().with_epsilon(0.0);
    let y0 = upsilon(&spec, 0.0, &opts).unwrap();
    let y1 = upsilon(&spec, 1.0, &opts).unwrap();
    assert!((y0 - y1).abs() <= 1e-10);
    let bound = spec.kernel.hbar_sup() * spec.firing.sup();
    for x in [0.0, 1.0, 5.0] {
        let y = upsilon(&presets::asrm0(), x, &opts).unwrap();
        assert!(y <= bound && y > 0.0, "{y} vs {bound}");
    }
}

#[test]
fn feedback_lipschitz_ratio_scales_with_coupling() {
    let opts = StationaryOptions::default();
    let (x1, x2) = (1.0, 1.2);
    let ratios: Vec<f64> = [0.1, 0.2, 0.4]
        .iter()
        .map(|&eps| {
            let spec = presets::asrm0().with_epsilon(eps);
            let d = upsilon(&spec, x1, &opts).unwrap() - upsilon(&spec, x2, &opts).unwrap();
            d.abs() / (x2 - x1) / eps
        })
        .collect();
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
    assert!(lo > 0.0 && hi / lo < 1.25, "{ratios:?}");
}

#[test]
fn small_coupling_solution_is_unique() {
    let spec = presets::asrm0();
    let bound = spec.kernel.hbar_sup() * spec.firing.sup();
    let solve = |x_start: f64| {
        let opts = StationaryOptions {
            x_start,
            outer_tol: 1e-12,
            ..StationaryOptions::default()
        };
        let res = solve_stationary(&spec, &opts).unwrap();
        assert!(res.converged);
        res.x_inf
    };
    let (a, b) = (solve(0.0), solve(0.8 * bound));
    assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
}

#[test]
fn uncoupled_solve_takes_one_update() {
    let spec = presets::depression().with_epsilon(0.0);
    let opts = StationaryOptions::default();
    let res = solve_stationary(&spec, &opts).unwrap();
    assert!(res.converged);
    assert_eq!(res.iterations, 1);
    assert!((res.x_inf - upsilon(&spec, 0.0, &opts).unwrap()).abs() <= 1e-12);
}
