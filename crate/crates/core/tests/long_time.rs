//! Minoration window, relaxation rates and the weak-coupling experiment.

use leakypop::grid::{GridSpec, InitialDatum};
use leakypop::model::{presets, ModelSpec};
use leakypop::verify::{
    a_star, doeblin_empirical, doeblin_window, harris_rate, psi, psi_derivative_bound,
    weak_coupling_experiment, FitOptions, Regime, SweepOptions,
};

/// Additive jump `m + g` written out independently of the library.
fn additive(g: f64) -> impl Fn(f64) -> f64 {
    move |m| m + g
}

#[test]
fn window_satisfies_the_defining_inequality() {
    let spec = presets::asrm0();
    let (lambda, delta) = (spec.lambda, spec.firing.delta_abs);
    let gamma = additive(spec.jump.gamma_hat);
    let w = doeblin_window(&spec, 2.0).unwrap();
    let lower =
        gamma((-lambda * (w.t - w.a_bar - delta)).exp() * gamma((-lambda * delta).exp() * 2.0));
    let upper = (-lambda * w.a_bar).exp() * gamma((-lambda * delta).exp() * gamma(0.0));
    assert!((lower - w.m_lower).abs() <= 1e-12 * upper);
    assert!((upper - w.m_upper).abs() <= 1e-12 * upper);
    assert!(w.m_lower < w.m_upper);
    assert!(w.t > w.a_bar + delta);
    assert!(w.nu_constant > 0.0);
}

#[test]
fn window_time_grows_with_the_memory_bound() {
    let spec = presets::asrm0();
    let times: Vec<f64> = [1.0, 2.0, 4.0]
        .iter()
        .map(|&r| doeblin_window(&spec, r).unwrap().t)
        .collect();
    assert!(times.windows(2).all(|w| w[1] >= w[0]), "{times:?}");
}

#[test]
fn last_interval_and_backward_memory_obey_the_window_bounds() {
    let spec = presets::asrm0();
    let w = doeblin_window(&spec, 2.0).unwrap();
    let delta = spec.firing.delta_abs;
    let bound = psi_derivative_bound(&spec, &w);
    for k in 0..=8 {
        for l in 0..=8 {
            let a = w.a_bar * k as f64 / 8.0;
            let m = w.m_lower + (w.m_upper - w.m_lower) * l as f64 / 8.0;
            let s = a_star(&spec, a, m);
            assert!(s >= delta * (1.0 - 1e-9), "a* = {s} at ({a}, {m})");
            assert!(s < w.t - a - delta, "a* = {s} at ({a}, {m})");
            // the backward memory grows with the spacing of the last two spikes
            let (lo, hi) = (s.max(delta), w.t - a - delta);
            let h = (hi - lo) / 50.0;
            for q in 0..50 {
                let x = lo + q as f64 * h;
                let slope = (psi(&spec, w.t, a, m, x + h) - psi(&spec, w.t, a, m, x)) / h;
                assert!(slope > 0.0 && slope <= bound, "slope {slope} vs {bound}");
            }
        }
    }
}

#[test]
fn probes_above_the_memory_bound_are_excluded() {
    let spec = presets::asrm0();
    let grid = GridSpec::for_model(&spec, 200, 50);
    let w = doeblin_window(&spec, 2.0).unwrap();
    let report = doeblin_empirical(&spec, &w, 0.0, &[(0.5, 1.0), (0.5, 6.0)], &grid).unwrap();
    assert!(report.probes[0].included);
    assert!(!report.probes[1].included);
    assert_eq!(report.min_infimum, report.probes[0].infimum);
}

fn point_and_bump(grid: &GridSpec) -> (leakypop::grid::DensityGrid, leakypop::grid::DensityGrid) {
    let u0 = InitialDatum::Point { a: 0.5, m: 0.5 }
        .discretize(grid)
        .unwrap();
    let v0 = InitialDatum::Product {
        age_mean: 2.0,
        age_sd: 0.5,
        log_m_mean: -0.5,
        log_m_sd: 0.3,
    }
    .discretize(grid)
    .unwrap();
    (u0, v0)
}

fn harris(spec: &ModelSpec, grid: &GridSpec, t_end: f64, swap: bool) -> f64 {
    let (u0, v0) = point_and_bump(grid);
    let (u0, v0) = if swap { (v0, u0) } else { (u0, v0) };
    let r = harris_rate(
        spec,
        0.0,
        &u0,
        &v0,
        t_end,
        grid.da(),
        200,
        &FitOptions::default(),
    )
    .unwrap();
    assert!(r.fit.r_squared > 0.9, "{:?}", r.fit);
    r.fit.rate
}

#[test]
fn relaxation_rate_is_symmetric_in_the_two_data() {
    for spec in [presets::asrm0(), presets::time_elapsed()] {
        let grid = GridSpec::for_model(&spec, 400, 100);
        let a = harris(&spec, &grid, 20.0, false);
        let b = harris(&spec, &grid, 20.0, true);
        assert!(a > 0.0);
        assert!((a - b).abs() <= 0.2 * a, "{a} vs {b}");
    }
}

#[test]
fn identical_data_give_a_degenerate_fit() {
    let spec = presets::depression();
    let grid = GridSpec::for_model(&spec, 100, 20);
    let (u0, _) = point_and_bump(&grid);
    let r = harris_rate(
        &spec,
        0.0,
        &u0,
        &u0,
        2.0,
        grid.da(),
        20,
        &FitOptions::default(),
    )
    .unwrap();
    assert!(r.fit.degenerate);
    assert!(r.distances.iter().all(|&d| d == 0.0));
}

#[test]
fn uncoupled_sweep_rate_matches_the_frozen_rate() {
    let spec = presets::time_elapsed();
    let grid = GridSpec::for_model(&spec, 400, 100);
    let frozen = harris(&spec, &grid, 40.0, false);
    let u0 = InitialDatum::Point { a: 0.5, m: 0.5 }
        .discretize(&grid)
        .unwrap();
    let reports =
        weak_coupling_experiment(&spec, &[0.0], &u0, &SweepOptions::new(grid, 40.0)).unwrap();
    let r = &reports[0];
    assert_eq!(r.regime, Regime::Decaying);
    let rate = r.fit.unwrap().rate;
    assert!((rate - frozen).abs() <= 0.2 * frozen, "{rate} vs {frozen}");
}

#[test]
fn time_elapsed_model_shows_relaxation_and_oscillation() {
    let spec = presets::time_elapsed();
    let grid = GridSpec::for_model(&spec, 400, 100);
    let u0 = InitialDatum::Product {
        age_mean: 1.0,
        age_sd: 0.5,
        log_m_mean: -0.7,
        log_m_sd: 0.2,
    }
    .discretize(&grid)
    .unwrap();
    let eps = [0.0, 0.05, presets::TIME_ELAPSED_OSCILLATION_EPSILON];
    let reports =
        weak_coupling_experiment(&spec, &eps, &u0, &SweepOptions::new(grid, 40.0)).unwrap();
    let regimes: Vec<Regime> = reports.iter().map(|r| r.regime).collect();
    assert_eq!(
        regimes,
        [Regime::Decaying, Regime::Decaying, Regime::Oscillating]
    );
}
