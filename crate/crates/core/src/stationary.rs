//! Stationary states.
//!
//! For a frozen input `x~`, a stationary density is carried by its boundary
//! profile `u(m) = rho(0, m)`: along the characteristic that leaves the
//! boundary at memory `y`, the memory is `y exp(-lambda a)` and the density is
//! `u(y)` times the survival `S_y(a)`. Neurons spiking at age `a` re-enter at
//! `gamma(y exp(-lambda a))`, which defines the boundary map `u -> Phi1(u)`.
//!
//! The profile is stored as atoms on uniform nodes `y_0 = gamma(0) < ... <
//! y_{K-1} = m_max`, read as a piecewise-linear density (hat functions). Each
//! node's characteristic is integrated on Gauss-Legendre panels; the mass that
//! spikes in a panel is the exact survival drop and is spread over the landing
//! memories with hat weights, which keeps the total mass and the first moment
//! of every row exact. This gives a row-stochastic matrix whose left
//! eigenvector is the stationary profile.

use crate::error::{Error, Result};
use crate::grid::{DensityGrid, GridSpec};
use crate::model::{JumpKind, ModelSpec};
use crate::quadrature::{interval_moments, PanelRule};

/// Numerical settings of the stationary solver.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryOptions {
    pub n_nodes: usize,
    pub panel_order: usize,
    /// Survival level at which a characteristic is abandoned; the rest of its
    /// mass spikes at the last panel.
    pub survival_cutoff: f64,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    pub damping: f64,
    /// Relative slack allowed in the pointwise and moment bound checks.
    pub bound_tol: f64,
    /// Characteristics per node used when lifting to a grid.
    pub lift_lines: usize,
    /// Grid for the lifted density; defaults to the model's minimal window
    /// with 400 x 100 cells.
    pub grid: Option<GridSpec>,
    /// Initial guess for the potential.
    pub x_start: f64,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        StationaryOptions {
            n_nodes: 400,
            panel_order: 8,
            survival_cutoff: 1e-17,
            inner_tol: 1e-13,
            inner_max_iter: 20_000,
            outer_tol: 1e-10,
            outer_max_iter: 200,
            damping: 0.5,
            bound_tol: 1e-6,
            lift_lines: 8,
            grid: None,
            x_start: 0.0,
        }
    }
}

/// Boundary density on uniform nodes; `weights` are the hat integrals, so
/// `sum u_i w_i` is the total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDensity {
    pub m_nodes: Vec<f64>,
    pub u_values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BoundaryDensity {
    /// Uniform nodes on `[lo, hi]` with zero density.
    pub fn zeros(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 3 || !(hi > lo) {
            return Err(Error::input(
                "need at least 3 nodes on a non-empty interval",
            ));
        }
        let h = (hi - lo) / (n - 1) as f64;
        let m_nodes = (0..n).map(|i| lo + h * i as f64).collect();
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        Ok(BoundaryDensity {
            m_nodes,
            u_values: vec![0.0; n],
            weights,
        })
    }

    /// Empty profile on the model's node set.
    pub fn for_model(spec: &ModelSpec, n: usize) -> Result<Self> {
        Self::zeros(spec.jump.at_zero(), spec.m_max, n)
    }

    pub fn spacing(&self) -> f64 {
        self.m_nodes[1] - self.m_nodes[0]
    }

    pub fn atoms(&self) -> Vec<f64> {
        self.u_values
            .iter()
            .zip(&self.weights)
            .map(|(u, w)| u * w)
            .collect()
    }

    pub fn set_atoms(&mut self, atoms: &[f64]) {
        for ((u, a), w) in self.u_values.iter_mut().zip(atoms).zip(&self.weights) {
            *u = a / w;
        }
    }

    pub fn mass(&self) -> f64 {
        self.atoms().iter().sum()
    }

    pub fn first_moment(&self) -> f64 {
        self.atoms()
            .iter()
            .zip(&self.m_nodes)
            .map(|(a, m)| a * m)
            .sum()
    }

    /// Mean of `s^(-p)` against hat `i`, with `s = m - m_nodes[0]`; infinite
    /// when the integral diverges.
    fn hat_power_average(&self, i: usize, p: f64) -> f64 {
        let h = self.spacing();
        let n = self.m_nodes.len();
        // int (c0 + c1 s) s^(-p) ds over [s0, s1]
        let piece = |s0: f64, s1: f64, c0: f64, c1: f64| -> f64 {
            let prim0 = |s: f64| {
                if (p - 1.0).abs() < 1e-15 {
                    s.ln()
                } else {
                    s.powf(1.0 - p) / (1.0 - p)
                }
            };
            let prim1 = |s: f64| {
                if (p - 2.0).abs() < 1e-15 {
                    s.ln()
                } else {
                    s.powf(2.0 - p) / (2.0 - p)
                }
            };
            if s0 == 0.0 && p >= 1.0 && c0 != 0.0 {
                return f64::INFINITY;
            }
            let mut v = c1 * (prim1(s1) - prim1(s0));
            if c0 != 0.0 {
                v += c0 * (prim0(s1) - prim0(s0));
            }
            v
        };
        let si = h * i as f64;
        let mut total = 0.0;
        if i > 0 {
            // rising edge: (s - s_{i-1}) / h
            total += piece(si - h, si, -(si - h) / h, 1.0 / h);
        }
        if i + 1 < n {
            // falling edge: (s_{i+1} - s) / h
            total += piece(si, si + h, (si + h) / h, -1.0 / h);
        }
        total / self.weights[i]
    }
}

/// One row of the transition matrix with its mean interval, spike weight
/// and overflow.
type TransitionRow = (Vec<f64>, f64, f64, f64);

/// Discretized boundary map for one frozen input.
#[derive(Debug, Clone)]
pub struct Transition {
    pub x_tilde: f64,
    /// Row-stochastic matrix, row `i` = landing distribution from node `i`.
    pub matrix: Vec<Vec<f64>>,
    /// Mean inter-spike interval from each node.
    pub mean_interval: Vec<f64>,
    /// Expected kernel weight `kappa` of the spike ending the interval.
    pub spike_weight: Vec<f64>,
    /// Probability of landing above `m_max` (booked on the top node).
    pub overflow: Vec<f64>,
}

struct Characteristic {
    /// `(age, probability)` of spikes, in increasing age.
    spikes: Vec<(f64, f64)>,
    mean_interval: f64,
}

/// Panel width used on characteristics.
fn panel_width(spec: &ModelSpec) -> f64 {
    let f = &spec.firing;
    let mut h = (1.0 / f.sup()).min(0.5 / spec.lambda);
    if f.eta_amplitude != 0.0 {
        h = h.min(0.5 * f.eta_tau);
    }
    h
}

fn breakpoints(spec: &ModelSpec) -> Vec<f64> {
    let mut b = vec![spec.firing.delta_abs];
    b.extend(spec.firing.table_ages.iter().copied());
    b.retain(|&a| a > 0.0);
    b.sort_by(f64::total_cmp);
    b
}

/// Integrates the characteristic leaving the boundary at memory `y`; spikes
/// are returned per Gauss node with the exact survival drop of each panel.
fn march(
    spec: &ModelSpec,
    rule: &PanelRule,
    y: f64,
    x_tilde: f64,
    cutoff: f64,
) -> Result<Characteristic> {
    let lambda = spec.lambda;
    let n = rule.order();
    let h = panel_width(spec);
    let bps = breakpoints(spec);
    let last_bp = bps.last().copied().unwrap_or(0.0);
    let mut vals = vec![0.0; n];
    let mut cum = vec![0.0; n];
    let mut spikes = Vec::new();
    let mut mean = 0.0;
    let mut a0 = 0.0;
    let mut log_s = 0.0f64;
    let mut bp_iter = bps.iter().copied().peekable();
    let max_age = 1e3 / spec.firing.floor().max(1e-300) + last_bp;
    loop {
        let s0 = (-log_s).exp();
        if s0 <= cutoff && a0 >= last_bp {
            if let Some(&(a_last, _)) = spikes.last() {
                spikes.push((a_last, s0));
            } else {
                spikes.push((a0, s0));
            }
            mean += s0 / spec.firing.floor();
            break;
        }
        if a0 > max_age {
            return Err(Error::Numerical(format!(
                "characteristic from m = {y} still has survival {s0:.3e} at age {a0}"
            )));
        }
        while bp_iter.peek().is_some_and(|&b| b <= a0 + 1e-14) {
            bp_iter.next();
        }
        let mut end = a0 + h;
        if let Some(&b) = bp_iter.peek() {
            end = end.min(b);
        }
        let width = end - a0;
        for (v, t) in vals.iter_mut().zip(&rule.nodes) {
            let a = a0 + width * t;
            *v = spec.rate(a, y * (-lambda * a).exp(), x_tilde);
        }
        let panel = rule.accumulate(&vals, width, &mut cum);
        let s1 = (-(log_s + panel)).exp();
        let drop = s0 - s1;
        let mut shape = 0.0;
        for q in 0..n {
            let s = (-(log_s + cum[q])).exp();
            mean += width * rule.weights[q] * s;
            shape += rule.weights[q] * vals[q] * s;
        }
        if drop > 0.0 && shape > 0.0 {
            for q in 0..n {
                let s = (-(log_s + cum[q])).exp();
                let p = drop * rule.weights[q] * vals[q] * s / shape;
                spikes.push((a0 + width * rule.nodes[q], p));
            }
        }
        log_s += panel;
        a0 = end;
    }
    Ok(Characteristic {
        spikes,
        mean_interval: mean,
    })
}

/// Spreads `p` at memory `z` over the node hats; returns the overflow.
fn deposit_hat(row: &mut [f64], lo: f64, spacing: f64, z: f64, p: f64) -> f64 {
    let n = row.len();
    let s = (z - lo) / spacing;
    if s >= (n - 1) as f64 {
        row[n - 1] += p;
        return if s > (n - 1) as f64 + 1e-12 { p } else { 0.0 };
    }
    let s = s.max(0.0);
    let j = s as usize;
    let t = s - j as f64;
    row[j] += (1.0 - t) * p;
    row[j + 1] += t * p;
    0.0
}

impl Transition {
    pub fn build(
        spec: &ModelSpec,
        nodes: &BoundaryDensity,
        x_tilde: f64,
        opts: &StationaryOptions,
    ) -> Result<Self> {
        if !(spec.firing.floor() > 0.0) {
            return Err(Error::Unsupported(
                "the rate needs a positive floor after the refractory period".into(),
            ));
        }
        let rule = PanelRule::new(opts.panel_order)?;
        let k = nodes.m_nodes.len();
        let lo = nodes.m_nodes[0];
        let spacing = nodes.spacing();
        let mut matrix = Vec::with_capacity(k);
        let mut mean_interval = Vec::with_capacity(k);
        let mut spike_weight = Vec::with_capacity(k);
        let mut overflow = Vec::with_capacity(k);
        let rows: Vec<Result<TransitionRow>> = {
            use rayon::prelude::*;
            nodes
                .m_nodes
                .par_iter()
                .map(|&y| {
                    let ch = march(spec, &rule, y, x_tilde, opts.survival_cutoff)?;
                    let mut row = vec![0.0; k];
                    let mut over = 0.0;
                    let mut kappa = 0.0;
                    for &(a, p) in &ch.spikes {
                        let m_pre = y * (-spec.lambda * a).exp();
                        kappa += p * spec.kernel.weight(m_pre);
                        over += deposit_hat(&mut row, lo, spacing, spec.jump.apply(m_pre), p);
                    }
                    Ok((row, ch.mean_interval, kappa, over))
                })
                .collect()
        };
        for r in rows {
            let (row, mean, kappa, over) = r?;
            matrix.push(row);
            mean_interval.push(mean);
            spike_weight.push(kappa);
            overflow.push(over);
        }
        Ok(Transition {
            x_tilde,
            matrix,
            mean_interval,
            spike_weight,
            overflow,
        })
    }

    /// `atoms * matrix`.
    pub fn apply_atoms(&self, atoms: &[f64]) -> Vec<f64> {
        let k = atoms.len();
        let mut out = vec![0.0; k];
        for (row, &p) in self.matrix.iter().zip(atoms) {
            if p == 0.0 {
                continue;
            }
            for (o, r) in out.iter_mut().zip(row) {
                *o += p * r;
            }
        }
        out
    }

    pub fn apply(&self, u: &BoundaryDensity) -> BoundaryDensity {
        let mut out = u.clone();
        out.set_atoms(&self.apply_atoms(&u.atoms()));
        out
    }

    /// Power iteration from `start` (probability atoms); returns the fixed
    /// point, the last L1 change and the iteration count.
    pub fn fixed_point(
        &self,
        start: &[f64],
        tol: f64,
        max_iter: usize,
    ) -> Result<(Vec<f64>, f64, usize)> {
        let total: f64 = start.iter().sum();
        let mut p: Vec<f64> = start.iter().map(|v| v / total).collect();
        let mut change = f64::INFINITY;
        for it in 1..=max_iter {
            let next = self.apply_atoms(&p);
            let norm: f64 = next.iter().sum();
            change = next.iter().zip(&p).map(|(a, b)| (a / norm - b).abs()).sum();
            p = next.into_iter().map(|v| v / norm).collect();
            if change < tol {
                return Ok((p, change, it));
            }
        }
        Err(Error::Numerical(format!(
            "boundary power iteration stalled at change {change:.3e} after {max_iter} steps"
        )))
    }

    /// Population rate of the stationary state with boundary atoms `p`.
    pub fn rate(&self, p: &[f64]) -> f64 {
        1.0 / p
            .iter()
            .zip(&self.mean_interval)
            .map(|(a, i)| a * i)
            .sum::<f64>()
    }
}

/// One application of the boundary map.
pub fn phi1_apply(
    spec: &ModelSpec,
    u: &BoundaryDensity,
    x_tilde: f64,
    opts: &StationaryOptions,
) -> Result<BoundaryDensity> {
    Ok(Transition::build(spec, u, x_tilde, opts)?.apply(u))
}

/// Outcome of the a-priori checks on one application `Phi1(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsCheck {
    /// `| ||Phi1 u|| / ||u|| - 1 |`.
    pub mass_defect: f64,
    /// Largest ratio of node value to the hat-averaged pointwise bound.
    pub pointwise_ratio: f64,
    pub first_moment: f64,
    pub first_moment_bound: f64,
    /// Inverse-power moment and its bound; `None` when the rate floor is 0.
    pub inverse_moment: Option<(f64, f64)>,
    pub upsilon: f64,
    pub upsilon_bound: f64,
}

impl BoundsCheck {
    pub fn passed(&self, tol: f64) -> bool {
        self.mass_defect <= 1e-8
            && self.pointwise_ratio <= 1.0 + tol
            && self.first_moment <= self.first_moment_bound * (1.0 + tol)
            && self
                .inverse_moment
                .is_none_or(|(v, b)| v <= b * (1.0 + tol))
            && self.upsilon <= self.upsilon_bound * (1.0 + tol)
    }
}

/// `theta = 1 - (1 - exp(-lambda)) exp(-f_max)`.
pub fn first_moment_theta(spec: &ModelSpec) -> f64 {
    1.0 - (1.0 - (-spec.lambda).exp()) * (-spec.firing.sup()).exp()
}

/// Smallest rate over all states, 0 when there is a refractory period.
fn rate_minimum(spec: &ModelSpec) -> f64 {
    if spec.firing.delta_abs > 0.0 {
        0.0
    } else {
        spec.firing.floor()
    }
}

/// Checks the a-priori estimates on `out = Phi1(u)`. The pointwise bound is
/// `f_max |(gamma^-1)'(m)| ||u|| / (lambda gamma^-1(m))`, averaged against each
/// node's hat function; the inverse moment uses `beta = min f / (2 lambda)`
/// and the bound `f_max ||u|| / (lambda gamma(0)^beta (min f / lambda - beta))`.
pub fn check_bounds(
    spec: &ModelSpec,
    u: &BoundaryDensity,
    out: &BoundaryDensity,
    upsilon: f64,
) -> BoundsCheck {
    let mass_in = u.mass();
    let mass_out = out.mass();
    let fmax = spec.firing.sup();
    let lambda = spec.lambda;
    let slope = spec.jump.c_gamma();

    let mut pointwise_ratio: f64 = 0.0;
    if spec.jump.jump_sup() > 0.0 {
        for i in 1..out.m_nodes.len() {
            // gamma^-1(m) = s / slope and |(gamma^-1)'| = 1 / slope, so the
            // bound is f_max ||u|| / (lambda s)
            let avg = out.hat_power_average(i, 1.0);
            let bound = fmax * mass_in * avg / lambda;
            if out.u_values[i] > 0.0 {
                pointwise_ratio = pointwise_ratio.max(out.u_values[i] / bound);
            }
        }
    }

    let theta = first_moment_theta(spec);
    let g0 = spec.jump.at_zero();
    let first_moment_bound = u.first_moment().max(g0 / (1.0 - theta) * mass_in);

    let fmin = rate_minimum(spec);
    let inverse_moment = if fmin > 0.0 && g0 > 0.0 {
        let beta = fmin / (2.0 * lambda);
        let value: f64 = out
            .atoms()
            .iter()
            .enumerate()
            .map(|(i, a)| a * slope.powf(beta) * out.hat_power_average(i, beta))
            .sum();
        let bound = fmax / (lambda * g0.powf(beta)) / (fmin / lambda - beta) * mass_in;
        Some((value, bound))
    } else {
        None
    };

    BoundsCheck {
        mass_defect: (mass_out / mass_in - 1.0).abs(),
        pointwise_ratio,
        first_moment: out.first_moment(),
        first_moment_bound,
        inverse_moment,
        upsilon,
        upsilon_bound: spec.kernel.hbar_sup() * fmax,
    }
}

/// Stationary potential for input `epsilon * x` together with the boundary
/// profile that produces it.
#[derive(Debug, Clone)]
pub struct UpsilonEval {
    pub value: f64,
    /// Stationary boundary atoms (probabilities).
    pub atoms: Vec<f64>,
    pub rate: f64,
    pub inner_iterations: usize,
    pub inner_change: f64,
    pub bounds: BoundsCheck,
}

fn degenerate_memory(spec: &ModelSpec) -> bool {
    spec.jump.kind == JumpKind::Additive && spec.jump.gamma_hat == 0.0
}

fn upsilon_with(
    spec: &ModelSpec,
    nodes: &BoundaryDensity,
    x: f64,
    start: &[f64],
    opts: &StationaryOptions,
) -> Result<UpsilonEval> {
    let tr = Transition::build(spec, nodes, spec.epsilon * x, opts)?;
    let (atoms, change, iters) = if degenerate_memory(spec) {
        // without jumps all memory drains to zero
        let mut p = vec![0.0; start.len()];
        p[0] = 1.0;
        (p, 0.0, 0)
    } else {
        tr.fixed_point(start, opts.inner_tol, opts.inner_max_iter)?
    };
    let rate = tr.rate(&atoms);
    let kappa: f64 = atoms.iter().zip(&tr.spike_weight).map(|(a, k)| a * k).sum();
    let value = spec.kernel.integral() * rate * kappa;

    let mut u_in = nodes.clone();
    u_in.set_atoms(start);
    let u_out = tr.apply(&u_in);
    let bounds = check_bounds(spec, &u_in, &u_out, value);
    Ok(UpsilonEval {
        value,
        atoms,
        rate,
        inner_iterations: iters,
        inner_change: change,
        bounds,
    })
}

fn uniform_start(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// `Upsilon(x) = int int hbar f rho_inf` for the stationary density at input
/// `epsilon * x`.
pub fn upsilon(spec: &ModelSpec, x: f64, opts: &StationaryOptions) -> Result<f64> {
    let nodes = BoundaryDensity::for_model(spec, opts.n_nodes)?;
    Ok(upsilon_with(spec, &nodes, x, &uniform_start(opts.n_nodes), opts)?.value)
}

#[derive(Debug, Clone)]
pub struct StationaryResult {
    /// Boundary density with total mass equal to the stationary rate.
    pub u: BoundaryDensity,
    pub rho_inf: DensityGrid,
    /// Mass missing from the lift before renormalization.
    pub lift_mass_defect: f64,
    pub x_inf: f64,
    pub rate: f64,
    pub iterations: usize,
    /// Inner (boundary map) change at the end of each outer iteration.
    pub phi_residuals: Vec<f64>,
    /// `|Upsilon(x) - x|` per outer iteration.
    pub upsilon_residuals: Vec<f64>,
    pub bounds: Vec<BoundsCheck>,
    pub converged: bool,
}

impl StationaryResult {
    pub fn bounds_hold(&self, tol: f64) -> bool {
        self.bounds.iter().all(|b| b.passed(tol))
    }
}

/// Damped fixed-point iteration `x <- (1 - w) x + w Upsilon(x)` with the
/// first update undamped and `w` halved whenever the residual grows. Returns a
/// result flagged `converged = false` if the iteration budget runs out.
pub fn solve_stationary(spec: &ModelSpec, opts: &StationaryOptions) -> Result<StationaryResult> {
    let nodes = BoundaryDensity::for_model(spec, opts.n_nodes)?;
    let x_cap = spec.potential_bound();
    let mut x = opts.x_start;
    let mut atoms = uniform_start(opts.n_nodes);
    let mut omega: f64 = 1.0;
    let mut phi_residuals = Vec::new();
    let mut upsilon_residuals = Vec::new();
    let mut bounds = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut last: Option<UpsilonEval>;
    loop {
        let ev = upsilon_with(spec, &nodes, x, &atoms, opts)?;
        let res = (ev.value - x).abs();
        phi_residuals.push(ev.inner_change);
        bounds.push(ev.bounds.clone());
        if upsilon_residuals.last().is_some_and(|&r| res > r) {
            omega = (omega * 0.5).max(1.0 / 64.0);
        }
        upsilon_residuals.push(res);
        atoms = ev.atoms.clone();
        let value = ev.value;
        last = Some(ev);
        if res <= opts.outer_tol * (1.0 + x.abs()) {
            x = value;
            converged = true;
            break;
        }
        if iterations >= opts.outer_max_iter {
            break;
        }
        x = ((1.0 - omega) * x + omega * value).clamp(-x_cap, x_cap);
        iterations += 1;
        if iterations == 1 {
            omega = opts.damping;
        }
    }
    if !converged {
        log::warn!(
            "stationary potential did not converge: last residual {:.3e}",
            upsilon_residuals.last().unwrap()
        );
    }
    let ev = last.expect("at least one evaluation");
    let mut u = nodes.clone();
    u.set_atoms(&ev.atoms.iter().map(|a| a * ev.rate).collect::<Vec<_>>());
    let grid = opts
        .grid
        .clone()
        .unwrap_or_else(|| GridSpec::for_model(spec, 400, 100));
    let (rho_inf, lift_mass_defect) = lift_to_density(spec, &u, spec.epsilon * x, &grid, opts)?;
    Ok(StationaryResult {
        u,
        rho_inf,
        lift_mass_defect,
        x_inf: x,
        rate: ev.rate,
        iterations,
        phi_residuals,
        upsilon_residuals,
        bounds,
        converged,
    })
}

/// Density generated by the boundary profile `u` under frozen input `x~`:
/// every node's hat is split into `lift_lines` characteristics whose survival
/// is integrated on the age cells of `grid`. Returns the density renormalized
/// to unit mass and the mass that was missing before renormalization.
pub fn lift_to_density(
    spec: &ModelSpec,
    u: &BoundaryDensity,
    x_tilde: f64,
    grid: &GridSpec,
    opts: &StationaryOptions,
) -> Result<(DensityGrid, f64)> {
    if !(spec.firing.floor() > 0.0) {
        return Err(Error::Unsupported(
            "the stationary density is not integrable without a positive rate floor".into(),
        ));
    }
    let rule = PanelRule::new(opts.panel_order)?;
    let mut rho = DensityGrid::zeros(grid.clone())?;
    let spacing = u.spacing();
    let n = u.m_nodes.len();
    let lines = opts.lift_lines.max(1);
    let atoms = u.atoms();
    let mut expected_mass = 0.0;

    // sub-lines at the midpoints of `lines` equal pieces of [-h, h], weighted
    // by the hat; pieces outside the node range fold back onto the node
    let offsets: Vec<(f64, f64)> = (0..lines)
        .map(|k| {
            let s = -1.0 + (2.0 * k as f64 + 1.0) / lines as f64;
            (s * spacing, 1.0 - s.abs())
        })
        .collect();
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        if atoms[i] <= 0.0 {
            continue;
        }
        let y0 = u.m_nodes[i];
        let parts: Vec<(f64, f64)> = offsets
            .iter()
            .map(|&(d, w)| {
                let y = y0 + d;
                if (i == 0 && d < 0.0) || (i == n - 1 && d > 0.0) {
                    (y0 - d, w)
                } else {
                    (y, w)
                }
            })
            .collect();
        let wsum: f64 = parts.iter().map(|p| p.1).sum();
        for (y, w) in parts {
            let y = y.max(f64::MIN_POSITIVE);
            let mass = atoms[i] * w / wsum;
            let ch = march(spec, &rule, y, x_tilde, opts.survival_cutoff)?;
            expected_mass += mass * ch.mean_interval;
            deposit_line(
                spec,
                &rule,
                &mut rho,
                y,
                x_tilde,
                mass,
                opts.survival_cutoff,
            );
        }
    }
    let mass = rho.mass();
    if !(mass > 0.0) {
        return Err(Error::Numerical(
            "the lifted density has no mass in the window".into(),
        ));
    }
    let defect = 1.0 - mass / expected_mass;
    rho.scale(1.0 / mass);
    Ok((rho, defect))
}

/// Adds the survival of one characteristic, times `mass`, to the grid.
fn deposit_line(
    spec: &ModelSpec,
    rule: &PanelRule,
    rho: &mut DensityGrid,
    y: f64,
    x_tilde: f64,
    mass: f64,
    cutoff: f64,
) {
    let grid = rho.grid.clone();
    let n = rule.order();
    let h = panel_width(spec);
    let mut vals = vec![0.0; n];
    let mut cum = vec![0.0; n];
    let mut log_s = 0.0f64;
    let bps = breakpoints(spec);
    for i in 0..grid.n_a {
        let (lo, hi) = (grid.a_face(i), grid.a_face(i + 1));
        let mut cuts = vec![lo];
        for &b in &bps {
            if b > lo && b < hi {
                cuts.push(b);
            }
        }
        cuts.push(hi);
        for w in cuts.windows(2) {
            let pieces = ((w[1] - w[0]) / h).ceil().max(1.0) as usize;
            let width = (w[1] - w[0]) / pieces as f64;
            for k in 0..pieces {
                let a0 = w[0] + width * k as f64;
                for (v, t) in vals.iter_mut().zip(&rule.nodes) {
                    let a = a0 + width * t;
                    *v = spec.rate(a, y * (-spec.lambda * a).exp(), x_tilde);
                }
                let panel = rule.accumulate(&vals, width, &mut cum);
                #[allow(clippy::needless_range_loop)]
                for q in 0..n {
                    let a = a0 + width * rule.nodes[q];
                    let s = (-(log_s + cum[q])).exp();
                    let m = y * (-spec.lambda * a).exp();
                    rho.deposit(a, m, mass * width * rule.weights[q] * s);
                }
                log_s += panel;
            }
        }
        if (-log_s).exp() < cutoff {
            break;
        }
    }
}

/// Quantities entering the stationary potential of the depression model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StdClosedForm {
    /// Mean inter-spike interval `I`.
    pub mean_interval: f64,
    /// `int a f S`, equal to `I`.
    pub first_moment: f64,
    /// Laplace transform `P(lambda)` of the interval distribution.
    pub laplace: f64,
    /// Stationary potential `X`.
    pub potential: f64,
    pub tail_bound: f64,
}

/// `X = (int hhat) (1 - P) / (I (1 - upsilon P))`.
pub fn std_potential(kernel_integral: f64, mean_interval: f64, laplace: f64, upsilon: f64) -> f64 {
    kernel_integral * (1.0 - laplace) / (mean_interval * (1.0 - upsilon * laplace))
}

/// Closed-form stationary potential of the depression model at input `x~`.
pub fn std_closed_form(spec: &ModelSpec, x_tilde: f64) -> Result<StdClosedForm> {
    if spec.jump.kind != JumpKind::Depression {
        return Err(Error::Unsupported(
            "the closed form needs the depression jump map".into(),
        ));
    }
    if !spec.firing.is_memory_independent() {
        return Err(Error::Unsupported(
            "the closed form needs a rate that ignores the memory".into(),
        ));
    }
    let rule = PanelRule::new(10)?;
    let f = |a: f64| spec.rate(a, 0.5, x_tilde);
    let m = interval_moments(
        &rule,
        f,
        spec.lambda,
        spec.firing.floor(),
        &breakpoints(spec),
        panel_width(spec),
        1e-18,
        1e6,
    )?;
    if (m.total - 1.0).abs() > 1e-8 {
        return Err(Error::Numerical(format!(
            "interval distribution integrates to {}",
            m.total
        )));
    }
    Ok(StdClosedForm {
        mean_interval: m.mean,
        first_moment: m.first_moment,
        laplace: m.laplace,
        potential: std_potential(spec.kernel.integral(), m.mean, m.laplace, spec.jump.upsilon),
        tail_bound: m.tail_bound,
    })
}
