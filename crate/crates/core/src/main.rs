use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use leakypop::config::{config_hash, load_config, Config};
use leakypop::grid::{GridSpec, InitialDatum, Spacing};
use leakypop::io::{self, RunManifest};
use leakypop::model::FiringKind;
use leakypop::particle::{self, ParticleState, RecordConfig};
use leakypop::pde::{run_frozen, run_nonlinear, PdeRecord};
use leakypop::stationary::{solve_stationary, std_closed_form, StationaryOptions};
use leakypop::verify::{
    doeblin_empirical, doeblin_window, harris_rate, probe_lattice, weak_coupling_experiment,
    FitOptions, SweepOptions,
};

#[derive(Parser, Debug)]
#[command(
    name = "leakypop",
    version,
    about = "Age and leaky-memory neuron population solvers"
)]
struct Cli {
    /// Model and run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Random seed; overrides `run.seed` from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate N interacting neurons.
    SimulateParticles(ParticleArgs),
    /// Solve the mean-field density equation.
    SolvePde(PdeArgs),
    /// Compute the stationary state.
    Stationary(StationaryArgs),
    /// Evaluate the closed-form stationary potential of the depression model.
    VerifyStdFormula(StdArgs),
    /// Compute the minoration window and probe it with the frozen solver.
    DoeblinCheck(DoeblinArgs),
    /// Fit the relaxation rate of the frozen semigroup.
    HarrisRate(HarrisArgs),
    /// Classify the long-time behaviour over a list of couplings.
    StabilitySweep(SweepArgs),
    /// Run particles and the PDE on the same configuration and compare potentials.
    Compare(CompareArgs),
}

#[derive(Args, Debug, Clone)]
struct GridArgs {
    /// Grid size as `<n_a>x<n_m>`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    a_max: Option<f64>,
    #[arg(long)]
    m_max: Option<f64>,
}

#[derive(Args, Debug)]
struct ParticleArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    stride: Option<usize>,
    /// Neurons `0..k` whose spikes go to the raster.
    #[arg(long)]
    raster_neurons: Option<usize>,
}

#[derive(Args, Debug)]
struct PdeArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    stride: Option<usize>,
    /// Hold the rate input at this (already scaled) value.
    #[arg(long)]
    frozen_x: Option<f64>,
    /// Comma-separated snapshot times.
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct StationaryArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Tolerance on the potential fixed point.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 400)]
    nodes: usize,
}

#[derive(Args, Debug)]
struct StdArgs {
    /// Rate input `x~` (already scaled).
    #[arg(long, default_value_t = 0.0)]
    x: f64,
}

#[derive(Args, Debug)]
struct DoeblinArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Memory bound R.
    #[arg(long, default_value_t = 2.0)]
    r: f64,
    /// Probes per axis.
    #[arg(long, default_value_t = 5)]
    probes: usize,
    #[arg(long, default_value_t = 0.0)]
    x_tilde: f64,
}

#[derive(Args, Debug)]
struct HarrisArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 0.0)]
    x_tilde: f64,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Age of the point mass used as the second initial datum.
    #[arg(long, default_value_t = 0.5)]
    v0_a: f64,
    /// Memory of the second initial datum; defaults to half the memory window.
    #[arg(long)]
    v0_m: Option<f64>,
    #[arg(long, default_value_t = 400)]
    samples: usize,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    epsilons: Vec<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
}

/// Applies grid flags on top of the configuration.
fn apply_grid(cfg: &mut Config, args: &GridArgs) -> Result<()> {
    if let Some(g) = &args.grid {
        let (na, nm) = g
            .split_once(['x', 'X'])
            .with_context(|| format!("--grid expects <n_a>x<n_m>, got {g}"))?;
        cfg.grid.n_a = na.trim().parse().context("--grid n_a")?;
        cfg.grid.n_m = nm.trim().parse().context("--grid n_m")?;
    }
    if let Some(a) = args.a_max {
        cfg.grid.a_max = a;
    }
    if let Some(m) = args.m_max {
        cfg.spec.m_max = m;
        cfg.spec.validate()?;
        cfg.grid.m_max = m;
    }
    if cfg.grid.spacing == Spacing::Geometric && cfg.file.grid.m_min.is_none() {
        let g = &cfg.grid;
        cfg.grid.m_min = GridSpec::aligned_m_min(&cfg.spec, g.a_max, g.n_a, g.n_m);
    }
    cfg.grid.validate_for(&cfg.spec)?;
    Ok(())
}

struct Session {
    cli_seed: Option<u64>,
    threads: Option<usize>,
    config_path: Option<PathBuf>,
    config_text: Option<String>,
    out: PathBuf,
}

impl Session {
    fn config(&self) -> Result<Config> {
        let path = self
            .config_path
            .as_ref()
            .context("this subcommand needs --config <file>")?;
        Ok(load_config(path)?)
    }

    fn seed(&self, cfg: &Config) -> u64 {
        self.cli_seed.unwrap_or(cfg.file.run.seed)
    }

    /// Creates the output directory and writes the manifest listing the
    /// files about to be produced.
    fn start(
        &self,
        subcommand: &str,
        cfg: &Config,
        parameters: serde_json::Value,
        outputs: &[&str],
    ) -> Result<()> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            config_path: self.config_path.as_ref().map(|p| p.display().to_string()),
            config_hash: self.config_text.as_deref().map(config_hash).transpose()?,
            seed: self.seed(cfg),
            threads: self.threads,
            timestamp: chrono::Utc::now().to_rfc3339(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            parameters: json!({
                "command": parameters,
                "config": cfg.file,
                "grid": cfg.grid,
                "m_max": cfg.spec.m_max,
            }),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        };
        io::write_manifest(&self.out.join("manifest.json"), &manifest)?;
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let config_text = cli
        .config
        .as_ref()
        .map(|p| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let session = Session {
        cli_seed: cli.seed,
        threads: cli.threads,
        config_path: cli.config.clone(),
        config_text,
        out: cli.out.clone(),
    };
    let cfg = session.config()?;
    for note in &cfg.notes {
        log::info!("{note}");
    }
    match &cli.command {
        Command::SimulateParticles(a) => simulate_particles(&session, cfg, a),
        Command::SolvePde(a) => solve_pde(&session, cfg, a),
        Command::Stationary(a) => stationary(&session, cfg, a),
        Command::VerifyStdFormula(a) => verify_std(cfg, a),
        Command::DoeblinCheck(a) => doeblin(&session, cfg, a),
        Command::HarrisRate(a) => harris(&session, cfg, a),
        Command::StabilitySweep(a) => sweep(&session, cfg, a),
        Command::Compare(a) => compare(&session, cfg, a),
    }
}

fn simulate_particles(s: &Session, cfg: Config, a: &ParticleArgs) -> Result<()> {
    let run = &cfg.file.run;
    let n = a.n.unwrap_or(run.particles);
    let t_end = a.t_end.unwrap_or(run.t_end);
    let dt =
        a.dt.unwrap_or_else(|| particle::admissible_dt(&cfg.spec, cfg.dt()));
    let record = RecordConfig {
        stride: a.stride.unwrap_or(run.stride),
        raster_neurons: a.raster_neurons.unwrap_or(run.raster_neurons),
        window: Some(cfg.grid.clone()),
    };
    let seed = s.seed(&cfg);
    s.start(
        "simulate-particles",
        &cfg,
        json!({"n": n, "t_end": t_end, "dt": dt, "stride": record.stride,
               "raster_neurons": record.raster_neurons}),
        &["trace.csv", "raster.csv", "density_final.csv"],
    )?;
    let mut state = ParticleState::sample(&cfg.spec, &cfg.file.initial, n, seed)?;
    let trace = particle::run(&cfg.spec, &mut state, t_end, dt, &record)?;
    io::write_trace(&s.path("trace.csv"), &trace)?;
    io::write_raster(
        &s.path("raster.csv"),
        trace.raster.as_deref().unwrap_or(&[]),
    )?;
    let rho = particle::empirical_density(&state, &cfg.grid)?;
    io::write_density(&s.path("density_final.csv"), &rho)?;
    println!(
        "simulated {n} neurons to t = {t_end}: x = {:.6}, mean rate = {:.6}",
        state.x,
        trace.mean_rate_after(0.5 * t_end).unwrap_or(f64::NAN)
    );
    Ok(())
}

fn snapshot_name(t: f64) -> String {
    format!("density_t{t:.6}.csv")
}

fn solve_pde(s: &Session, mut cfg: Config, a: &PdeArgs) -> Result<()> {
    apply_grid(&mut cfg, &a.grid)?;
    let run = &cfg.file.run;
    let t_end = a.t_end.unwrap_or(run.t_end);
    let dt = a.dt.unwrap_or_else(|| cfg.grid.da());
    let record = PdeRecord {
        stride: a.stride.unwrap_or(run.stride),
        snapshot_times: a
            .snapshots
            .clone()
            .unwrap_or_else(|| run.snapshot_times.clone()),
    };
    if let Some(t) = record
        .snapshot_times
        .iter()
        .find(|&&t| !(0.0..=t_end).contains(&t))
    {
        bail!("snapshot time {t} lies outside [0, {t_end}]");
    }
    let mut outputs: Vec<String> = vec!["trace.csv".into(), "density_final.csv".into()];
    let u0 = cfg.file.initial.discretize(&cfg.grid)?;
    let result = {
        // snapshot names depend on the step-aligned times, known only after
        // the run; the manifest lists the requested ones
        outputs.extend(record.snapshot_times.iter().map(|&t| snapshot_name(t)));
        let names: Vec<&str> = outputs.iter().map(String::as_str).collect();
        s.start(
            "solve-pde",
            &cfg,
            json!({"t_end": t_end, "dt": dt, "stride": record.stride,
                   "frozen_x": a.frozen_x, "snapshots": record.snapshot_times}),
            &names,
        )?;
        match a.frozen_x {
            Some(x) => run_frozen(&cfg.spec, x, &u0, t_end, dt, &record)?,
            None => run_nonlinear(&cfg.spec, &u0, t_end, dt, &record)?,
        }
    };
    io::write_trace(&s.path("trace.csv"), &result.trace)?;
    io::write_density(&s.path("density_final.csv"), &result.density)?;
    let mut requested = record.snapshot_times.clone();
    requested.sort_by(f64::total_cmp);
    for (t_req, (_, rho)) in requested.iter().zip(&result.snapshots) {
        io::write_density(&s.path(&snapshot_name(*t_req)), rho)?;
    }
    println!(
        "solved to t = {t_end}: x = {:.6}, mass = {:.12}, leaked = {:.3e}",
        result.x_end,
        result.density.mass(),
        result.density.leaked_mass
    );
    Ok(())
}

fn stationary(s: &Session, mut cfg: Config, a: &StationaryArgs) -> Result<()> {
    apply_grid(&mut cfg, &a.grid)?;
    let opts = StationaryOptions {
        outer_tol: a.tol,
        n_nodes: a.nodes,
        grid: Some(cfg.grid.clone()),
        ..StationaryOptions::default()
    };
    s.start(
        "stationary",
        &cfg,
        json!({"tol": a.tol, "nodes": a.nodes}),
        &[
            "stationary_u.csv",
            "stationary_density.csv",
            "stationary_report.csv",
            "stationary_iterations.csv",
        ],
    )?;
    let r = solve_stationary(&cfg.spec, &opts)?;
    io::write_boundary(&s.path("stationary_u.csv"), &r.u)?;
    io::write_density(&s.path("stationary_density.csv"), &r.rho_inf)?;
    io::write_stationary_report(&s.path("stationary_report.csv"), &r, opts.bound_tol)?;
    io::write_stationary_iterations(&s.path("stationary_iterations.csv"), &r, opts.bound_tol)?;
    println!(
        "x_inf = {:.12}, rate = {:.12}, iterations = {}, converged = {}, bounds hold = {}",
        r.x_inf,
        r.rate,
        r.iterations,
        r.converged,
        r.bounds_hold(opts.bound_tol)
    );
    if !r.converged {
        bail!("the stationary potential did not converge");
    }
    Ok(())
}

fn verify_std(cfg: Config, a: &StdArgs) -> Result<()> {
    let spec = &cfg.spec;
    let c = std_closed_form(spec, a.x)?;
    println!("I = {:.15e}", c.mean_interval);
    println!("int a f S = {:.15e}", c.first_moment);
    println!("P(lambda) = {:.15e}", c.laplace);
    println!("X = {:.15e}", c.potential);
    println!("tail bound = {:.3e}", c.tail_bound);
    if spec.firing.kind == FiringKind::Constant && spec.firing.delta_abs == 0.0 {
        let (rate, lambda, up) = (spec.firing.f_max, spec.lambda, spec.jump.upsilon);
        let exact = spec.kernel.integral() * rate * lambda / (lambda + rate * (1.0 - up));
        println!(
            "constant rate: analytic X = {exact:.15e}, difference = {:.3e}",
            (c.potential - exact).abs()
        );
    }
    Ok(())
}

fn doeblin(s: &Session, mut cfg: Config, a: &DoeblinArgs) -> Result<()> {
    apply_grid(&mut cfg, &a.grid)?;
    let window = doeblin_window(&cfg.spec, a.r)?;
    s.start(
        "doeblin-check",
        &cfg,
        json!({"r": a.r, "probes": a.probes, "x_tilde": a.x_tilde}),
        &["doeblin_window.csv", "doeblin_probes.csv"],
    )?;
    let probes = probe_lattice(&cfg.grid, a.r, a.probes);
    let report = doeblin_empirical(&cfg.spec, &window, a.x_tilde, &probes, &cfg.grid)?;
    io::write_doeblin(&s.out, &report)?;
    println!(
        "T = {:.6}, a_bar = {:.6}, m in [{:.6}, {:.6}], nu = {:.3e}; min density {:.3e}, ratio {:.3e}, all positive = {}",
        window.t,
        window.a_bar,
        window.m_lower,
        window.m_upper,
        window.nu_constant,
        report.min_infimum,
        report.ratio,
        report.all_positive
    );
    Ok(())
}

fn harris(s: &Session, mut cfg: Config, a: &HarrisArgs) -> Result<()> {
    apply_grid(&mut cfg, &a.grid)?;
    let t_end = a.t_end.unwrap_or(cfg.file.run.t_end);
    let dt = a.dt.unwrap_or_else(|| cfg.grid.da());
    let v0_m = a.v0_m.unwrap_or(0.5 * cfg.grid.m_max);
    s.start(
        "harris-rate",
        &cfg,
        json!({"x_tilde": a.x_tilde, "t_end": t_end, "dt": dt, "v0_a": a.v0_a, "v0_m": v0_m,
               "samples": a.samples}),
        &["harris_rate.csv", "harris_distance.csv"],
    )?;
    let u0 = cfg.file.initial.discretize(&cfg.grid)?;
    let v0 = InitialDatum::Point { a: a.v0_a, m: v0_m }.discretize(&cfg.grid)?;
    let report = harris_rate(
        &cfg.spec,
        a.x_tilde,
        &u0,
        &v0,
        t_end,
        dt,
        a.samples,
        &FitOptions::default(),
    )?;
    io::write_harris(&s.out, &report)?;
    let f = report.fit;
    println!(
        "rate = {:.6}, r^2 = {:.6}, window = [{:.3}, {:.3}], degenerate = {}",
        f.rate, f.r_squared, f.window.0, f.window.1, f.degenerate
    );
    Ok(())
}

fn sweep(s: &Session, mut cfg: Config, a: &SweepArgs) -> Result<()> {
    apply_grid(&mut cfg, &a.grid)?;
    let mut opts = SweepOptions::new(cfg.grid.clone(), a.t_end.unwrap_or(cfg.file.run.t_end));
    if let Some(dt) = a.dt {
        opts.dt = dt;
    }
    let mut outputs = vec!["stability_sweep.csv".to_string()];
    outputs.extend((0..a.epsilons.len()).map(|k| format!("stability_series_{k}.csv")));
    let names: Vec<&str> = outputs.iter().map(String::as_str).collect();
    s.start(
        "stability-sweep",
        &cfg,
        json!({"epsilons": a.epsilons, "t_end": opts.t_end, "dt": opts.dt}),
        &names,
    )?;
    let u0 = cfg.file.initial.discretize(&cfg.grid)?;
    let reports = weak_coupling_experiment(&cfg.spec, &a.epsilons, &u0, &opts)?;
    io::write_sweep(&s.out, &reports)?;
    for r in &reports {
        println!(
            "epsilon = {}: {} (x_inf = {})",
            r.epsilon,
            r.regime.as_str(),
            r.x_inf.map_or("n/a".to_string(), |x| format!("{x:.6}"))
        );
    }
    Ok(())
}

fn compare(s: &Session, mut cfg: Config, a: &CompareArgs) -> Result<()> {
    apply_grid(&mut cfg, &a.grid)?;
    let run = &cfg.file.run;
    let n = a.n.unwrap_or(run.particles);
    let t_end = a.t_end.unwrap_or(run.t_end);
    let dt =
        a.dt.unwrap_or_else(|| particle::admissible_dt(&cfg.spec, cfg.dt()));
    let seed = s.seed(&cfg);
    s.start(
        "compare",
        &cfg,
        json!({"n": n, "t_end": t_end, "dt": dt}),
        &["trace_particles.csv", "trace_pde.csv", "compare.csv"],
    )?;
    let mut state = ParticleState::sample(&cfg.spec, &cfg.file.initial, n, seed)?;
    let record = RecordConfig {
        window: Some(cfg.grid.clone()),
        ..RecordConfig::default()
    };
    let pt = particle::run(&cfg.spec, &mut state, t_end, dt, &record)?;
    let u0 = cfg.file.initial.discretize(&cfg.grid)?;
    let pde = run_nonlinear(&cfg.spec, &u0, t_end, dt, &PdeRecord::default())?;
    io::write_trace(&s.path("trace_particles.csv"), &pt)?;
    io::write_trace(&s.path("trace_pde.csv"), &pde.trace)?;
    write_comparison(&s.path("compare.csv"), &pt, &pde.trace)?;
    let sup = pt.sup_x_distance(&pde.trace).unwrap_or(f64::NAN);
    println!("N = {n}: sup_t |x_particles - x_pde| = {sup:.6e}");
    Ok(())
}

fn write_comparison(
    path: &Path,
    particles: &leakypop::trace::Trace,
    pde: &leakypop::trace::Trace,
) -> Result<()> {
    let mut out = io::CsvOut::create(path, &["t", "x_particles", "x_pde", "abs_diff"])?;
    for (&t, &x) in particles.times.iter().zip(&particles.x_values) {
        let y = pde.x_at(t).unwrap_or(f64::NAN);
        out.row([
            io::fmt_f64(t),
            io::fmt_f64(x),
            io::fmt_f64(y),
            io::fmt_f64((x - y).abs()),
        ])?;
    }
    out.finish()?;
    Ok(())
}
