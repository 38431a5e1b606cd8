//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use sha2::{Digest, Sha256};

use leakypop::grid::{GridSpec, InitialDatum};
use leakypop::model::{presets, JumpMap, ModelSpec};
use leakypop::particle::{self, ParticleState, RecordConfig};
use leakypop::pde::{run_nonlinear, run_observed, Coupling, PdeRecord};
use leakypop::stationary::{solve_stationary, std_closed_form, StationaryOptions};
use leakypop::verify::{
    doeblin_empirical, doeblin_window, harris_rate, lyapunov_check, probe_lattice,
    weak_coupling_experiment, FitOptions, Regime, SweepOptions,
};

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn default_datum() -> InitialDatum {
    InitialDatum::Product {
        age_mean: 1.0,
        age_sd: 0.5,
        log_m_mean: 0.0,
        log_m_sd: 0.3,
    }
}

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Nonlinear aSRM0 run on the reference grid; mass plus leaked mass stays 1.
fn mass_conservation() -> Outcome {
    let spec = presets::asrm0();
    let grid = GridSpec::for_model(&spec, 400, 100);
    let u0 = default_datum().discretize(&grid).map_err(fail)?;
    let mut worst: f64 = 0.0;
    run_observed(
        &spec,
        Coupling::SelfConsistent,
        &u0,
        0.0,
        20.0,
        grid.da(),
        &PdeRecord::default(),
        |_, rho, _| worst = worst.max((rho.mass() + rho.leaked_mass - 1.0).abs()),
    )
    .map_err(fail)?;
    Ok((
        worst <= 1e-8,
        format!("max |mass + leaked - 1| = {worst:.3e} (tol 1e-8)"),
    ))
}

/// Cell averages of the exponential density `exp(-a)`.
fn exponential_cells(grid: &GridSpec) -> Vec<f64> {
    (0..grid.n_a)
        .map(|i| ((-grid.a_face(i)).exp() - (-grid.a_face(i + 1)).exp()) / grid.da())
        .collect()
}

/// Constant unit hazard without coupling: the age law relaxes to `exp(-a)`.
fn renewal_oracle() -> Outcome {
    let spec = presets::constant_rate(1.0, JumpMap::depression(0.5));
    let grid = GridSpec::for_model(&spec, 400, 50);
    let u0 = default_datum().discretize(&grid).map_err(fail)?;
    let run = run_nonlinear(&spec, &u0, 20.0, grid.da(), &PdeRecord::default()).map_err(fail)?;
    let exact = exponential_cells(&grid);
    let l1: f64 = run
        .density
        .age_marginal()
        .iter()
        .zip(&exact)
        .map(|(p, e)| (p - e).abs() * grid.da())
        .sum::<f64>()
        + (-grid.a_max).exp();

    let dt = 0.002;
    let mut state = ParticleState::sample(&spec, &default_datum(), 100_000, 7).map_err(fail)?;
    particle::run(&spec, &mut state, 20.0, dt, &RecordConfig::default()).map_err(fail)?;
    let mut ages = state.ages.clone();
    ages.sort_by(f64::total_cmp);
    let n = ages.len() as f64;
    let ks = ages
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let cdf = 1.0 - (-a).exp();
            (cdf - k as f64 / n)
                .abs()
                .max((cdf - (k + 1) as f64 / n).abs())
        })
        .fold(0.0f64, f64::max);
    Ok((
        l1 <= 1e-2 && ks <= 1e-2,
        format!("PDE L1 = {l1:.3e}, particle KS = {ks:.3e} (tol 1e-2 each)"),
    ))
}

/// Weighted norm of the additive preset stays under the Lyapunov envelope.
fn lyapunov_bound() -> Outcome {
    let spec = presets::asrm0();
    let grid = GridSpec::for_model(&spec, 400, 100);
    let u0 = default_datum().discretize(&grid).map_err(fail)?;
    let run = run_nonlinear(&spec, &u0, 20.0, grid.da(), &PdeRecord::default()).map_err(fail)?;
    let pde = lyapunov_check(&spec, &run.trace).map_err(fail)?;
    let mut state = ParticleState::sample(&spec, &default_datum(), 20_000, 3).map_err(fail)?;
    let dt = particle::admissible_dt(&spec, 0.005);
    let trace =
        particle::run(&spec, &mut state, 20.0, dt, &RecordConfig::default()).map_err(fail)?;
    let particles = lyapunov_check(&spec, &trace).map_err(fail)?;
    Ok((
        pde.max_excess <= 1e-3 && particles.max_excess <= 1e-3,
        format!(
            "max excess over envelope: PDE {:.3e} at t = {:.2}, particles {:.3e} (tol 1e-3)",
            pde.max_excess, pde.at_time, particles.max_excess
        ),
    ))
}

/// Stationary potential of the depression model with constant hazard `c`:
/// the pre-spike memory mean solves `E = P (1 - u + u E)` with
/// `P = c / (c + lambda)`, and `X = (int hhat) c (1 - E)`.
fn std_oracle(c: f64, lambda: f64, upsilon: f64, kernel_integral: f64) -> f64 {
    let p = c / (c + lambda);
    let e = p * (1.0 - upsilon) / (1.0 - upsilon * p);
    kernel_integral * c * (1.0 - e)
}

fn std_closed_form_check() -> Outcome {
    let spec = presets::constant_rate(1.0, JumpMap::depression(0.5));
    let expected = std_oracle(1.0, spec.lambda, 0.5, spec.kernel.integral());
    let closed = std_closed_form(&spec, 0.0).map_err(fail)?.potential;
    let stat = solve_stationary(&spec, &StationaryOptions::default()).map_err(fail)?;
    let mut state = ParticleState::sample(&spec, &default_datum(), 100_000, 11).map_err(fail)?;
    let trace =
        particle::run(&spec, &mut state, 30.0, 0.01, &RecordConfig::default()).map_err(fail)?;
    let avg = trace.mean_x_after(10.0).ok_or("empty particle trace")?;
    let closed_err = (closed - expected).abs();
    let stat_err = (stat.x_inf - closed).abs();
    let rel = (avg - expected).abs() / expected;
    Ok((
        closed_err <= 1e-8 && stat_err <= 1e-6 && stat.converged && rel <= 0.02,
        format!(
            "closed form {closed:.10} vs {expected:.10} (err {closed_err:.1e}), \
             stationary err {stat_err:.1e}, particle average {avg:.5} (rel {rel:.2e})"
        ),
    ))
}

fn doeblin_check() -> Outcome {
    let spec = presets::asrm0();
    let grid = GridSpec::for_model(&spec, 800, 200);
    let window = doeblin_window(&spec, 2.0).map_err(fail)?;
    let probes = probe_lattice(&grid, 2.0, 5);
    let report = doeblin_empirical(&spec, &window, 0.0, &probes, &grid).map_err(fail)?;
    let included = report.probes.iter().filter(|p| p.included).count();
    Ok((
        report.all_positive && report.min_infimum >= 0.5 * window.nu_constant && included > 0,
        format!(
            "{included} probes, min infimum {:.3e} >= 0.5 nu = {:.3e}, all positive = {}",
            report.min_infimum,
            0.5 * window.nu_constant,
            report.all_positive
        ),
    ))
}

fn harris_at(spec: &ModelSpec, n_a: usize, n_m: usize) -> Result<(f64, f64), String> {
    let grid = GridSpec::for_model(spec, n_a, n_m);
    let u0 = InitialDatum::Point { a: 0.5, m: 0.5 }
        .discretize(&grid)
        .map_err(fail)?;
    let v0 = InitialDatum::Product {
        age_mean: 2.0,
        age_sd: 0.5,
        log_m_mean: 0.0,
        log_m_sd: 0.3,
    }
    .discretize(&grid)
    .map_err(fail)?;
    let r = harris_rate(
        spec,
        0.0,
        &u0,
        &v0,
        10.0,
        grid.da(),
        200,
        &FitOptions::default(),
    )
    .map_err(fail)?;
    Ok((r.fit.rate, r.fit.r_squared))
}

fn harris_check() -> Outcome {
    let spec = presets::asrm0();
    let (coarse, r2c) = harris_at(&spec, 400, 100)?;
    let (fine, r2f) = harris_at(&spec, 800, 200)?;
    let drift = (fine - coarse).abs() / coarse;
    Ok((
        coarse > 0.0 && r2c > 0.9 && r2f > 0.9 && drift <= 0.2,
        format!(
            "rate {coarse:.4} (r2 {r2c:.4}) at 400x100, {fine:.4} (r2 {r2f:.4}) at 800x200, \
             change {:.1}%",
            100.0 * drift
        ),
    ))
}

fn weak_coupling_check() -> Outcome {
    let spec = presets::asrm0();
    let grid = GridSpec::for_model(&spec, 400, 100);
    let u0 = default_datum().discretize(&grid).map_err(fail)?;
    let eps = [0.0, 0.05, presets::ASRM0_BURST_EPSILON];
    let reports =
        weak_coupling_experiment(&spec, &eps, &u0, &SweepOptions::new(grid, 40.0)).map_err(fail)?;
    let regimes: Vec<Regime> = reports.iter().map(|r| r.regime).collect();
    let summary: Vec<String> = reports
        .iter()
        .map(|r| format!("eps {} {}", r.epsilon, r.regime.as_str()))
        .collect();
    Ok((
        regimes == [Regime::Decaying, Regime::Decaying, Regime::Oscillating],
        summary.join(", "),
    ))
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Particle potential approaches the PDE potential as N grows.
fn mean_field_check() -> Outcome {
    let spec = presets::depression();
    let t_end = 5.0;
    let grid = GridSpec::for_model(&spec, 400, 100);
    let u0 = default_datum().discretize(&grid).map_err(fail)?;
    let pde = run_nonlinear(&spec, &u0, t_end, grid.da(), &PdeRecord::default()).map_err(fail)?;
    // The particle scheme is first order in dt; keep its bias below the
    // N = 1e5 sampling error.
    let dt = 0.002;
    let mut stats = Vec::new();
    for (n, reps) in [(1_000usize, 8u64), (10_000, 6), (100_000, 4)] {
        let sups: Vec<f64> = (0..reps)
            .map(|seed| {
                let mut state = ParticleState::sample(&spec, &default_datum(), n, 100 + seed)?;
                let trace = particle::run(&spec, &mut state, t_end, dt, &RecordConfig::default())?;
                Ok(trace.sup_x_distance(&pde.trace).unwrap_or(f64::NAN))
            })
            .collect::<leakypop::Result<_>>()
            .map_err(fail)?;
        let (mean, sd) = mean_sd(&sups);
        stats.push((n, mean, sd / (reps as f64).sqrt()));
    }
    let monotone = stats
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 + 2.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
    let strict = stats[2].1 < stats[0].1;
    let text: Vec<String> = stats
        .iter()
        .map(|(n, m, se)| format!("N={n}: {m:.3e} +- {se:.1e}"))
        .collect();
    Ok((monotone && strict, text.join(", ")))
}

fn hash_outputs(dir: &Path) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(fail)? {
        let path = entry.map_err(fail)?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let bytes = std::fs::read(&path).map_err(fail)?;
            let digest: String = Sha256::digest(&bytes)
                .iter()
                .map(|b| format!("{b:02x}"))
                .collect();
            out.insert(
                path.file_name().unwrap().to_string_lossy().into_owned(),
                digest,
            );
        }
    }
    Ok(out)
}

fn run_cli(config: &Path, out: &Path, seed: u64) -> Result<BTreeMap<String, String>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_leakypop"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--seed", &seed.to_string(), "--threads", "2"])
        .args([
            "simulate-particles",
            "--n",
            "3000",
            "--t-end",
            "2",
            "--raster-neurons",
            "50",
        ])
        .output()
        .map_err(fail)?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    hash_outputs(out)
}

fn determinism_check() -> Outcome {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/asrm0.toml");
    let tmp = tempfile::tempdir().map_err(fail)?;
    let a = run_cli(&config, &tmp.path().join("a"), 5)?;
    let b = run_cli(&config, &tmp.path().join("b"), 5)?;
    let c = run_cli(&config, &tmp.path().join("c"), 6)?;
    let identical = !a.is_empty() && a == b;
    let differs = a.get("trace.csv") != c.get("trace.csv");
    Ok((
        identical && differs,
        format!(
            "{} files byte-identical across repeated runs: {identical}; other seed differs: {differs}",
            a.len()
        ),
    ))
}

fn stationary_bounds_check() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, spec) in [
        ("asrm0", presets::asrm0()),
        ("depression", presets::depression()),
    ] {
        let opts = StationaryOptions::default();
        let res = solve_stationary(&spec, &opts).map_err(fail)?;
        let worst_mass = res
            .bounds
            .iter()
            .map(|b| b.mass_defect)
            .fold(0.0f64, f64::max);
        let worst_point = res
            .bounds
            .iter()
            .map(|b| b.pointwise_ratio)
            .fold(0.0f64, f64::max);
        let holds = res.converged
            && !res.bounds.is_empty()
            && res.bounds_hold(opts.bound_tol)
            && worst_mass <= 1e-8;
        ok &= holds;
        lines.push(format!(
            "{name}: {} iterations checked, mass defect {worst_mass:.1e}, pointwise ratio {worst_point:.4}",
            res.bounds.len()
        ));
    }
    Ok((ok, lines.join("; ")))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("mass conservation", mass_conservation),
        ("renewal oracle", renewal_oracle),
        ("Lyapunov bound", lyapunov_bound),
        ("STD closed form", std_closed_form_check),
        ("Doeblin minoration", doeblin_check),
        ("Harris contraction", harris_check),
        ("weak-coupling stability", weak_coupling_check),
        ("mean-field consistency", mean_field_check),
        ("determinism", determinism_check),
        ("stationary a-priori bounds", stationary_bounds_check),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (passed, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        println!(
            "[{}] {:2}. {name}: {detail} ({:.1} s)",
            if passed { "PASS" } else { "FAIL" },
            k + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
