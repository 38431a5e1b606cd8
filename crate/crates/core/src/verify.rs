//! Numerical checks of the long-time results: the Lyapunov envelope, the
//! Doeblin minoration window and its empirical counterpart, exponential
//! relaxation rates of the frozen semigroup, and the weak-coupling stability
//! experiment.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{DensityGrid, GridSpec, InitialDatum};
use crate::model::{JumpKind, ModelSpec};
use crate::pde::{run_frozen, run_observed, Coupling, PdeRecord, Stepper};
use crate::stationary::{solve_stationary, StationaryOptions};
use crate::trace::Trace;

/// Number of candidate values of `a_bar` in the window search.
const WINDOW_SEARCH_POINTS: usize = 20;
/// Relative gap kept between `m_lower` and `m_upper`.
const WINDOW_MARGIN: f64 = 0.01;

/// `w0 exp(-alpha t) + (b / alpha)(1 - exp(-alpha t))`, the bound on the
/// weighted norm of a solution started with weighted norm `w0`.
pub fn lyapunov_envelope(spec: &ModelSpec, w0: f64, t: f64) -> Result<f64> {
    let (alpha, b) = spec.lyapunov_constants()?;
    let decay = (-alpha * t).exp();
    Ok(w0 * decay + b / alpha * (1.0 - decay))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovReport {
    /// Largest amount by which the weighted norm exceeded the envelope
    /// (negative if it never reached it).
    pub max_excess: f64,
    pub at_time: f64,
}

/// Compares the weighted-norm column of a trace against the envelope
/// started from its first entry.
pub fn lyapunov_check(spec: &ModelSpec, trace: &Trace) -> Result<LyapunovReport> {
    let w0 = *trace
        .weighted_norm
        .first()
        .ok_or_else(|| Error::input("empty trace"))?;
    let t0 = trace.times[0];
    let mut report = LyapunovReport {
        max_excess: f64::NEG_INFINITY,
        at_time: t0,
    };
    for (&t, &w) in trace.times.iter().zip(&trace.weighted_norm) {
        let excess = w - lyapunov_envelope(spec, w0, t - t0)?;
        if excess > report.max_excess {
            report = LyapunovReport {
                max_excess: excess,
                at_time: t,
            };
        }
    }
    Ok(report)
}

/// Time `T` and rectangle `[0, a_bar] x [m_lower, m_upper]` on which the
/// frozen semigroup is bounded below by `nu_constant` times the initial mass
/// with memory in `(0, R]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoeblinWindow {
    pub r: f64,
    pub t: f64,
    pub a_bar: f64,
    pub m_lower: f64,
    pub m_upper: f64,
    pub nu_constant: f64,
}

fn require_positive_jump_origin(spec: &ModelSpec) -> Result<f64> {
    let g0 = spec.jump.at_zero();
    if !(g0 > 0.0) {
        return Err(Error::Unsupported(
            "the minoration window needs gamma(0) > 0; with gamma(0) = 0 the memory carries no \
             information after a spike"
                .into(),
        ));
    }
    Ok(g0)
}

/// `m_lower` for a given `(a_bar, T)`.
pub fn window_lower(spec: &ModelSpec, r: f64, a_bar: f64, t: f64) -> f64 {
    let (lambda, delta) = (spec.lambda, spec.firing.delta_abs);
    let inner = spec.jump.apply((-lambda * delta).exp() * r);
    spec.jump
        .apply((-lambda * (t - a_bar - delta)).exp() * inner)
}

/// `m_upper` for a given `a_bar`.
pub fn window_upper(spec: &ModelSpec, a_bar: f64) -> f64 {
    let (lambda, delta) = (spec.lambda, spec.firing.delta_abs);
    (-lambda * a_bar).exp()
        * spec
            .jump
            .apply((-lambda * delta).exp() * spec.jump.at_zero())
}

/// Searches `a_bar` on a coarse grid and, for each, takes the smallest `T`
/// with `m_lower <= (1 - margin) m_upper`; returns the pair with the
/// smallest `T`.
pub fn doeblin_window(spec: &ModelSpec, r: f64) -> Result<DoeblinWindow> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::input(format!(
            "memory bound R must be positive, got {r}"
        )));
    }
    let g0 = require_positive_jump_origin(spec)?;
    let (lambda, delta) = (spec.lambda, spec.firing.delta_abs);
    let top = spec.jump.apply((-lambda * delta).exp() * g0);
    let a_bar_max = ((1.0 - WINDOW_MARGIN) * top / g0).ln() / lambda;
    if !(a_bar_max > 0.0) {
        return Err(Error::Numerical(format!(
            "no feasible minoration window: gamma(e^(-lambda delta) gamma(0)) = {top} is too close \
             to gamma(0) = {g0}"
        )));
    }
    let inner = spec.jump.apply((-lambda * delta).exp() * r);
    let mut best: Option<DoeblinWindow> = None;
    for k in 1..WINDOW_SEARCH_POINTS {
        let a_bar = a_bar_max * k as f64 / WINDOW_SEARCH_POINTS as f64;
        let m_upper = window_upper(spec, a_bar);
        let target = spec.jump.inverse((1.0 - WINDOW_MARGIN) * m_upper);
        if !(target > 0.0) {
            continue;
        }
        // strictly beyond a_bar + delta, as the lemma requires
        let wait = ((inner / target).ln() / lambda).max(1e-3 * (a_bar + delta));
        let t = a_bar + delta + wait;
        if best.is_some_and(|b| b.t <= t) {
            continue;
        }
        let m_lower = window_lower(spec, r, a_bar, t);
        let nu_constant = (-3.0 * spec.firing.sup() * t).exp()
            * spec.firing.floor().powi(2)
            * spec.jump.c_gamma()
            / (lambda * m_upper);
        best = Some(DoeblinWindow {
            r,
            t,
            a_bar,
            m_lower,
            m_upper,
            nu_constant,
        });
    }
    best.ok_or_else(|| Error::Numerical("no feasible minoration window on the search grid".into()))
}

/// Minimal time between the last two spikes of a trajectory that ends at
/// `(a, m)`: `(log gamma(0) - log gamma^-1(e^(lambda a) m)) / lambda`.
pub fn a_star(spec: &ModelSpec, a: f64, m: f64) -> f64 {
    let prev = spec.jump.inverse((spec.lambda * a).exp() * m);
    (spec.jump.at_zero().ln() - prev.ln()) / spec.lambda
}

/// Memory at time 0 of the two-spike trajectory that ends at `(a, m)` at
/// time `t_end` with the spikes `a_prime` apart.
pub fn psi(spec: &ModelSpec, t_end: f64, a: f64, m: f64, a_prime: f64) -> f64 {
    let lambda = spec.lambda;
    let last = spec.jump.inverse((lambda * a).exp() * m);
    (lambda * (t_end - a - a_prime)).exp() * spec.jump.inverse((lambda * a_prime).exp() * last)
}

/// Derivative of [`psi`] in `a_prime`.
pub fn psi_derivative(spec: &ModelSpec, t_end: f64, a: f64, m: f64, a_prime: f64) -> f64 {
    let lambda = spec.lambda;
    let last = spec.jump.inverse((lambda * a).exp() * m);
    let y = (lambda * a_prime).exp() * last;
    lambda
        * (lambda * (t_end - a - a_prime)).exp()
        * (spec.jump.inverse_derivative(y) * y - spec.jump.inverse(y))
}

/// Upper bound `lambda e^(lambda T) m_upper / C_gamma` on [`psi_derivative`].
pub fn psi_derivative_bound(spec: &ModelSpec, window: &DoeblinWindow) -> f64 {
    spec.lambda * (spec.lambda * window.t).exp() * window.m_upper / spec.jump.c_gamma()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoeblinProbe {
    pub a0: f64,
    pub m0: f64,
    /// False for probes with memory above `R`, which the lemma does not cover.
    pub included: bool,
    /// Smallest density over the cells meeting the rectangle at time `T`.
    pub infimum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoeblinReport {
    pub window: DoeblinWindow,
    pub probes: Vec<DoeblinProbe>,
    /// Minimum of the infima over the included probes.
    pub min_infimum: f64,
    /// `min_infimum / nu_constant`.
    pub ratio: f64,
    pub all_positive: bool,
}

/// `n x n` probe points at the cell-lattice midpoints of `[0, a_max] x (0, R]`.
pub fn probe_lattice(grid: &GridSpec, r: f64, n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            let a = grid.a_max * (k as f64 + 0.5) / n as f64;
            let m = r * (l as f64 + 0.5) / n as f64;
            out.push((a, m));
        }
    }
    out
}

/// Runs the frozen semigroup from a unit mass in the cell of each probe up
/// to time `T` and records the smallest density on the window rectangle.
/// The time step is the largest divisor of `T` not above the age cell width.
pub fn doeblin_empirical(
    spec: &ModelSpec,
    window: &DoeblinWindow,
    x_tilde: f64,
    probes: &[(f64, f64)],
    grid: &GridSpec,
) -> Result<DoeblinReport> {
    grid.validate_for(spec)?;
    let steps = (window.t / grid.da()).ceil().max(1.0);
    let dt = window.t / steps;
    let results: Vec<Result<DoeblinProbe>> = probes
        .par_iter()
        .map(|&(a0, m0)| {
            let u0 = InitialDatum::Point { a: a0, m: m0 }.discretize(grid)?;
            let run = run_frozen(spec, x_tilde, &u0, window.t, dt, &PdeRecord::default())?;
            let infimum = run
                .density
                .min_over((0.0, window.a_bar), (window.m_lower, window.m_upper))
                .ok_or_else(|| Error::input("the minoration rectangle lies outside the grid"))?;
            Ok(DoeblinProbe {
                a0,
                m0,
                included: m0 <= window.r,
                infimum,
            })
        })
        .collect();
    let probes = results.into_iter().collect::<Result<Vec<_>>>()?;
    let min_infimum = probes
        .iter()
        .filter(|p| p.included)
        .map(|p| p.infimum)
        .fold(f64::INFINITY, f64::min);
    Ok(DoeblinReport {
        window: *window,
        all_positive: probes
            .iter()
            .filter(|p| p.included)
            .all(|p| p.infimum > 0.0),
        ratio: min_infimum / window.nu_constant,
        min_infimum,
        probes,
    })
}

/// Least-squares fit of `log d(t) = log prefactor - rate t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub rate: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub points: usize,
    /// Set when too few usable points remained; the other fields are then
    /// placeholders.
    pub degenerate: bool,
}

impl RateFit {
    fn degenerate(window: (f64, f64)) -> Self {
        RateFit {
            rate: 0.0,
            prefactor: 0.0,
            r_squared: 0.0,
            window,
            points: 0,
            degenerate: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Leading fraction of the usable span excluded as transient.
    pub transient_fraction: f64,
    /// When the last tenth of the run has flattened out, the fit stops once
    /// `d` falls below this multiple of the smallest value seen there (the
    /// discretization floor).
    pub floor_factor: f64,
    /// Values below this are never fitted.
    pub absolute_floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            transient_fraction: 0.2,
            floor_factor: 10.0,
            absolute_floor: 1e-12,
        }
    }
}

/// Fits an exponential decay to `values`, skipping the transient and
/// stopping at the floor.
pub fn fit_decay(times: &[f64], values: &[f64], opts: &FitOptions) -> RateFit {
    let n = times.len().min(values.len());
    if n < 3 {
        return RateFit::degenerate((0.0, 0.0));
    }
    let (t_first, t_last) = (times[0], times[n - 1]);
    let tail_start = times.partition_point(|&t| t < t_last - 0.1 * (t_last - t_first));
    let tail_start = tail_start.min(n - 2);
    let tail_min = values[tail_start..n]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    // the tail counts as a floor only if it decays at under half the average
    // rate of the whole run
    let log_rate = |i: usize, j: usize| (values[i] / values[j]).ln() / (times[j] - times[i]);
    let plateau =
        !(log_rate(tail_start, n - 1) >= 0.5 * log_rate(0, n - 1)) || !(log_rate(0, n - 1) > 0.0);
    let floor = if plateau {
        (opts.floor_factor * tail_min).max(opts.absolute_floor)
    } else {
        opts.absolute_floor
    };
    // the usable span ends where d first reaches the floor; the transient
    // is a fraction of that span
    let cut = values[..n]
        .iter()
        .position(|&v| !(v > floor && v.is_finite()))
        .unwrap_or(n);
    if cut < 3 {
        return RateFit::degenerate((t_first, t_first));
    }
    let t_start = t_first + opts.transient_fraction * (times[cut - 1] - t_first);
    let mut pts: Vec<(f64, f64)> = (0..cut)
        .filter(|&k| times[k] >= t_start)
        .map(|k| (times[k], values[k].ln()))
        .collect();
    if pts.len() < 3 {
        pts = (0..cut).map(|k| (times[k], values[k].ln())).collect();
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return RateFit::degenerate((pts[0].0, pts[0].0));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    let r_squared = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    RateFit {
        rate: -slope,
        prefactor: intercept.exp(),
        r_squared,
        window: (pts[0].0, pts[pts.len() - 1].0),
        points: pts.len(),
        degenerate: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarrisReport {
    pub fit: RateFit,
    pub times: Vec<f64>,
    /// Weighted L1 distance between the two solutions.
    pub distances: Vec<f64>,
}

/// Runs the frozen semigroup from `u0` and `v0` side by side and fits the
/// decay of their weighted L1 distance, sampled about `samples` times.
#[allow(clippy::too_many_arguments)]
pub fn harris_rate(
    spec: &ModelSpec,
    x_tilde: f64,
    u0: &DensityGrid,
    v0: &DensityGrid,
    t_end: f64,
    dt: f64,
    samples: usize,
    fit: &FitOptions,
) -> Result<HarrisReport> {
    for (name, u) in [("u0", u0), ("v0", v0)] {
        let mass = u.mass();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!(
                "{name} must have unit mass, got {mass}"
            )));
        }
    }
    let mut stepper = Stepper::new(spec, u0, dt)?;
    stepper.freeze(x_tilde);
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let stride = (steps / samples.max(1)).max(1);
    let (mut u, mut v) = (u0.clone(), v0.clone());
    let mut times = vec![0.0];
    let mut distances = vec![u.weighted_l1_distance(&v)?];
    for k in 1..=steps {
        stepper.step(&mut u, x_tilde)?;
        stepper.step(&mut v, x_tilde)?;
        if k % stride == 0 || k == steps {
            times.push(k as f64 * dt);
            distances.push(u.weighted_l1_distance(&v)?);
        }
    }
    Ok(HarrisReport {
        fit: fit_decay(&times, &distances, fit),
        times,
        distances,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Decaying,
    Oscillating,
    Diverged,
    Unresolved,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Decaying => "decaying",
            Regime::Oscillating => "oscillating",
            Regime::Diverged => "diverged",
            Regime::Unresolved => "unresolved",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub grid: GridSpec,
    pub dt: f64,
    pub t_end: f64,
    /// Approximate number of recorded samples per run.
    pub samples: usize,
    pub stationary: StationaryOptions,
    pub fit: FitOptions,
    /// Fraction of the global `max |x|` the peak-to-peak amplitude over the
    /// last third must reach for the run to count as oscillating.
    pub oscillation_threshold: f64,
    /// Minimum `r^2` of the decay fit for the run to count as decaying.
    pub min_r_squared: f64,
}

impl SweepOptions {
    pub fn new(grid: GridSpec, t_end: f64) -> Self {
        SweepOptions {
            dt: grid.da(),
            grid,
            t_end,
            samples: 400,
            stationary: StationaryOptions::default(),
            fit: FitOptions::default(),
            oscillation_threshold: 0.5,
            min_r_squared: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingReport {
    pub epsilon: f64,
    pub x_inf: Option<f64>,
    pub stationary_converged: bool,
    pub fit: Option<RateFit>,
    /// Peak-to-peak amplitude of `x` over the last third of the run.
    pub x_peak_to_peak: f64,
    pub x_max_abs: f64,
    /// `d(t) = ||rho_t - rho_inf||_{L1(w)} + |x_t - x_inf|` at the end.
    pub final_distance: Option<f64>,
    pub regime: Regime,
    #[serde(skip)]
    pub times: Vec<f64>,
    #[serde(skip)]
    pub x_values: Vec<f64>,
    #[serde(skip)]
    pub distances: Vec<f64>,
}

/// Peak-to-peak amplitude of `x` over the last third of the samples and the
/// global `max |x|`.
pub fn amplitude_last_third(x_values: &[f64]) -> (f64, f64) {
    let n = x_values.len();
    let tail = &x_values[(2 * n) / 3..];
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let max_abs = x_values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    (if tail.is_empty() { 0.0 } else { hi - lo }, max_abs)
}

/// Runs the nonlinear equation from `u0` for every coupling and classifies
/// the long-time behaviour. The oscillation test needs no stationary state,
/// so a coupling whose stationary solve fails is still classified when it
/// oscillates or diverges; otherwise it is reported unresolved.
pub fn weak_coupling_experiment(
    spec: &ModelSpec,
    epsilons: &[f64],
    u0: &DensityGrid,
    opts: &SweepOptions,
) -> Result<Vec<CouplingReport>> {
    let mut stat_opts = opts.stationary.clone();
    stat_opts.grid = Some(opts.grid.clone());
    epsilons
        .par_iter()
        .map(|&eps| coupling_run(&spec.with_epsilon(eps), u0, opts, &stat_opts))
        .collect()
}

fn coupling_run(
    spec: &ModelSpec,
    u0: &DensityGrid,
    opts: &SweepOptions,
    stat_opts: &StationaryOptions,
) -> Result<CouplingReport> {
    let stationary = match solve_stationary(spec, stat_opts) {
        Ok(s) if s.converged => Some(s),
        Ok(_) => None,
        Err(e @ (Error::Input(_) | Error::Config { .. } | Error::Unsupported(_))) => return Err(e),
        Err(e) => {
            log::warn!("stationary solve failed at epsilon = {}: {e}", spec.epsilon);
            None
        }
    };
    let steps = (opts.t_end / opts.dt).ceil().max(1.0) as usize;
    let record = PdeRecord {
        stride: (steps / opts.samples.max(1)).max(1),
        snapshot_times: Vec::new(),
    };
    let mut times = Vec::new();
    let mut x_values = Vec::new();
    let mut distances = Vec::new();
    let run = run_observed(
        spec,
        Coupling::SelfConsistent,
        u0,
        0.0,
        opts.t_end,
        opts.dt,
        &record,
        |t, rho, x| {
            times.push(t);
            x_values.push(x);
            if let Some(s) = &stationary {
                let d = rho
                    .weighted_l1_distance(&s.rho_inf)
                    .map_or(f64::NAN, |d| d + (x - s.x_inf).abs());
                distances.push(d);
            }
        },
    );
    let diverged = match run {
        Ok(_) => x_values.iter().any(|x| !x.is_finite()),
        Err(Error::Numerical(_) | Error::Consistency(_)) => true,
        Err(e) => return Err(e),
    };
    let (x_peak_to_peak, x_max_abs) = amplitude_last_third(&x_values);
    let fit = stationary
        .as_ref()
        .filter(|_| !diverged)
        .map(|_| fit_decay(&times, &distances, &opts.fit));
    let regime = if diverged {
        Regime::Diverged
    } else if x_max_abs > 0.0 && x_peak_to_peak >= opts.oscillation_threshold * x_max_abs {
        Regime::Oscillating
    } else {
        match fit {
            Some(f) if !f.degenerate && f.rate > 0.0 && f.r_squared > opts.min_r_squared => {
                Regime::Decaying
            }
            _ => Regime::Unresolved,
        }
    };
    Ok(CouplingReport {
        epsilon: spec.epsilon,
        x_inf: stationary.as_ref().map(|s| s.x_inf),
        stationary_converged: stationary.is_some(),
        fit,
        x_peak_to_peak,
        x_max_abs,
        final_distance: distances.last().copied(),
        regime,
        times,
        x_values,
        distances,
    })
}

/// Whether the jump map has the structure the minoration lemma uses.
pub fn minoration_applicable(spec: &ModelSpec) -> bool {
    spec.jump.at_zero() > 0.0 && matches!(spec.jump.kind, JumpKind::Additive | JumpKind::Depression)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn fit_recovers_exponential() {
        let times: Vec<f64> = (0..100).map(|k| k as f64 * 0.1).collect();
        let values: Vec<f64> = times.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let fit = fit_decay(&times, &values, &FitOptions::default());
        assert!(!fit.degenerate);
        assert!((fit.rate - 0.7).abs() < 1e-10, "{fit:?}");
        assert!((fit.prefactor - 3.0).abs() < 1e-9);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn fit_stops_at_floor() {
        let times: Vec<f64> = (0..200).map(|k| k as f64 * 0.1).collect();
        let values: Vec<f64> = times.iter().map(|t| (-t).exp() + 1e-4).collect();
        let fit = fit_decay(&times, &values, &FitOptions::default());
        assert!((fit.rate - 1.0).abs() < 0.1, "{fit:?}");
        assert!(fit.window.1 < 9.0);
    }

    #[test]
    fn fit_of_zero_distance_is_degenerate() {
        let times: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let fit = fit_decay(&times, &[0.0; 10], &FitOptions::default());
        assert!(fit.degenerate);
    }

    #[test]
    fn window_rejects_vanishing_jump_origin() {
        assert!(matches!(
            doeblin_window(&presets::time_elapsed(), 2.0),
            Err(Error::Unsupported(_))
        ));
        assert!(!minoration_applicable(&presets::time_elapsed()));
        assert!(minoration_applicable(&presets::asrm0()));
    }

    #[test]
    fn amplitude_of_constant_and_sine() {
        assert_eq!(amplitude_last_third(&[1.0; 9]), (0.0, 1.0));
        let xs: Vec<f64> = (0..300).map(|k| (k as f64 * 0.1).sin()).collect();
        let (ptp, max) = amplitude_last_third(&xs);
        assert!(ptp > 1.9 && max <= 1.0);
    }

    #[test]
    fn lyapunov_envelope_limits() {
        let spec = presets::asrm0();
        let (alpha, b) = spec.lyapunov_constants().unwrap();
        assert_eq!(lyapunov_envelope(&spec, 3.0, 0.0).unwrap(), 3.0);
        let far = lyapunov_envelope(&spec, 3.0, 1e3).unwrap();
        assert!((far - b / alpha).abs() < 1e-12);
    }
}
