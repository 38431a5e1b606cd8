//! Finite-volume solver for the density equation.
//!
//! One step applies, in order:
//! 1. upwind transport in age with Courant number `dt / da` (an exact shift
//!    when `dt = da`), mass leaving through `a_max` is leaked;
//! 2. transport in memory by exact remap: the cell `[lo, hi]` is carried to
//!    `[lo q, hi q]` with `q = exp(-lambda dt)` and its mass is split over the
//!    cells it overlaps;
//! 3. the spiking sink `rho *= exp(-int f)`, with the integral taken by
//!    Gauss-Legendre quadrature along the characteristic each cell followed
//!    during the step, split at `delta_abs`;
//! 4. the removed mass of each memory column is re-injected in the first age
//!    cell. Spikes are placed at mid-step, so the column's memories are taken
//!    back half a step, jumped by `gamma`, and decayed for the remaining half
//!    step; the image interval is spread over the cells it overlaps and
//!    whatever lands above `m_max` is leaked.
//!
//! On a geometric memory grid with cell ratio `exp(lambda dt)` (see
//! [`crate::grid::GridSpec::aligned`]) the remap of step 2 is an exact shift
//! by one cell.
//!
//! Every sub-step moves mass with non-negative weights that sum to one, so the
//! scheme is positive and `mass + leaked_mass` is conserved to rounding.

use gauss_quad::GaussLegendre;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::DensityGrid;
use crate::model::ModelSpec;
use crate::trace::Trace;

/// Result of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Injected boundary density per unit time, one value per memory cell.
    pub boundary_flux: Vec<f64>,
    /// `sum f rho` over the transported state, the instantaneous rate.
    pub rate_integral: f64,
    /// Mass removed by the sink during the step (spikes per neuron).
    pub spiked: f64,
    /// Spiked mass weighted by the kernel factor.
    pub drive: f64,
}

/// Precomputed transfer weights for a fixed grid and time step.
#[derive(Debug, Clone)]
pub struct Stepper {
    spec: ModelSpec,
    dt: f64,
    courant: f64,
    remap: Vec<Vec<(usize, f64)>>,
    inject: Vec<Vec<(usize, f64)>>,
    inject_leak: Vec<f64>,
    frozen: Option<Frozen>,
    /// Per age cell: `(age, memory growth factor, weight)` quadrature nodes
    /// along the characteristic traversed during one step.
    sink_nodes: Vec<Vec<(f64, f64, f64)>>,
    m_centers: Vec<f64>,
    /// `exp(lambda dt / 2)`, taking end-of-step memories back to mid-step.
    half_back: f64,
    areas: Vec<f64>,
    scratch: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Frozen {
    x_in: f64,
    rates: Vec<f64>,
    factors: Vec<f64>,
}

/// `int f` along one cell's characteristic over the step, ending at memory `m`.
#[inline]
fn sink_exponent(spec: &ModelSpec, nodes: &[(f64, f64, f64)], m: f64, x_in: f64) -> f64 {
    nodes
        .iter()
        .map(|&(a, grow, w)| w * spec.firing.eval(a, m * grow, x_in))
        .sum()
}

/// Splits the image interval `[lo, hi]` over cells; returns the fractions per
/// cell and the fraction above the last face.
fn overlaps(faces: &[f64], lo: f64, hi: f64) -> (Vec<(usize, f64)>, f64) {
    let n = faces.len() - 1;
    let width = hi - lo;
    let mut out = Vec::new();
    if width <= 0.0 {
        return (out, 0.0);
    }
    let start = faces.partition_point(|&f| f <= lo).saturating_sub(1);
    let mut covered = 0.0;
    for t in start..n {
        if faces[t] >= hi {
            break;
        }
        let ov = hi.min(faces[t + 1]) - lo.max(faces[t]);
        if ov > 0.0 {
            let frac = ov / width;
            covered += frac;
            out.push((t, frac));
        }
    }
    let above = if hi > faces[n] {
        (hi - lo.max(faces[n])) / width
    } else {
        0.0
    };
    // rounding: make the weights of each source sum to exactly one
    let total = covered + above;
    if total > 0.0 {
        for o in &mut out {
            o.1 /= total;
        }
    }
    (out, above / total.max(f64::MIN_POSITIVE))
}

impl Stepper {
    pub fn new(spec: &ModelSpec, rho: &DensityGrid, dt: f64) -> Result<Self> {
        let grid = &rho.grid;
        let da = grid.da();
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::input(format!(
                "time step must be positive, got {dt}"
            )));
        }
        if dt > da * (1.0 + 1e-12) {
            return Err(Error::input(format!(
                "CFL violated: dt = {dt} exceeds the age cell width {da}"
            )));
        }
        let courant = (dt / da).min(1.0);
        let faces = &rho.m_faces;
        let n_m = grid.n_m;
        let q = (-spec.lambda * dt).exp();

        let remap = (0..n_m)
            .map(|j| {
                let (w, _) = overlaps(faces, faces[j] * q, faces[j + 1] * q);
                w
            })
            .collect();
        let mut inject = Vec::with_capacity(n_m);
        let mut inject_leak = Vec::with_capacity(n_m);
        // spikes happen mid-step on average: jump from the mid-step memory,
        // then decay over the remaining half step
        let (back, fwd) = (
            (0.5 * spec.lambda * dt).exp(),
            (-0.5 * spec.lambda * dt).exp(),
        );
        for j in 0..n_m {
            let (w, above) = overlaps(
                faces,
                spec.jump.apply(faces[j] * back) * fwd,
                spec.jump.apply(faces[j + 1] * back) * fwd,
            );
            inject.push(w);
            inject_leak.push(above);
        }
        let gl = GaussLegendre::new(3)
            .map_err(|e| Error::Numerical(format!("Gauss-Legendre rule: {e}")))?;
        let mut cuts = vec![spec.firing.delta_abs];
        cuts.extend(spec.firing.table_ages.iter().copied());
        let sink_nodes = (0..grid.n_a)
            .map(|i| {
                let end = grid.a_center(i);
                let start = (end - dt).max(0.0);
                let mut edges = vec![start];
                edges.extend(cuts.iter().copied().filter(|&b| b > start && b < end));
                edges.push(end);
                let mut nodes = Vec::new();
                for w in edges.windows(2) {
                    let half = 0.5 * (w[1] - w[0]);
                    for &(t, wt) in gl.as_node_weight_pairs().iter() {
                        let a = w[0] + half * (t + 1.0);
                        nodes.push((a, (spec.lambda * (end - a)).exp(), half * wt));
                    }
                }
                nodes
            })
            .collect();
        let m_centers = (0..n_m).map(|j| rho.m_center(j)).collect();
        let areas = (0..n_m).map(|j| rho.cell_area(j)).collect();
        Ok(Stepper {
            spec: spec.clone(),
            dt,
            courant,
            remap,
            inject,
            inject_leak,
            frozen: None,
            sink_nodes,
            m_centers,
            half_back: back,
            areas,
            scratch: vec![0.0; grid.n_a * n_m],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Precomputes the sink for a fixed input `x_in` (already scaled).
    pub fn freeze(&mut self, x_in: f64) {
        let mut rates = Vec::with_capacity(self.sink_nodes.len() * self.m_centers.len());
        for &m in &self.m_centers {
            for nodes in &self.sink_nodes {
                rates.push(sink_exponent(&self.spec, nodes, m, x_in) / self.dt);
            }
        }
        let factors = rates.iter().map(|f| (-f * self.dt).exp()).collect();
        self.frozen = Some(Frozen {
            x_in,
            rates,
            factors,
        });
    }

    /// One step with input `x_in = epsilon * x` (or the frozen input).
    pub fn step(&mut self, rho: &mut DensityGrid, x_in: f64) -> Result<StepOutput> {
        let n_a = rho.grid.n_a;
        let n_m = rho.grid.n_m;
        let c = self.courant;

        // 1. age transport
        let areas = &self.areas;
        let outflow: f64 = rho
            .values
            .par_chunks_mut(n_a)
            .enumerate()
            .map(|(j, col)| {
                let out = c * col[n_a - 1] * areas[j];
                if c == 1.0 {
                    col.copy_within(0..n_a - 1, 1);
                    col[0] = 0.0;
                } else {
                    for i in (1..n_a).rev() {
                        col[i] = (1.0 - c) * col[i] + c * col[i - 1];
                    }
                    col[0] *= 1.0 - c;
                }
                out
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        rho.leaked_mass += outflow;

        // 2. memory transport, done on masses
        let next = &mut self.scratch;
        next.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n_m {
            let src = &rho.values[j * n_a..(j + 1) * n_a];
            for &(t, frac) in &self.remap[j] {
                let w = frac * areas[j] / areas[t];
                let dst = &mut next[t * n_a..(t + 1) * n_a];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
        std::mem::swap(&mut rho.values, next);

        // 3. sink
        let frozen = self.frozen.as_ref().filter(|f| f.x_in == x_in);
        let spec = &self.spec;
        let dt = self.dt;
        let (sink_nodes, m_centers) = (&self.sink_nodes, &self.m_centers);
        let per_column: Vec<(f64, f64)> = rho
            .values
            .par_chunks_mut(n_a)
            .enumerate()
            .map(|(j, col)| {
                let mut removed = 0.0;
                let mut rate = 0.0;
                match frozen {
                    Some(fr) => {
                        let r = &fr.rates[j * n_a..(j + 1) * n_a];
                        let fac = &fr.factors[j * n_a..(j + 1) * n_a];
                        for i in 0..n_a {
                            let v = col[i];
                            rate += r[i] * v;
                            let kept = v * fac[i];
                            removed += v - kept;
                            col[i] = kept;
                        }
                    }
                    None => {
                        let m = m_centers[j];
                        for i in 0..n_a {
                            let v = col[i];
                            if v == 0.0 {
                                continue;
                            }
                            let f = sink_exponent(spec, &sink_nodes[i], m, x_in) / dt;
                            rate += f * v;
                            let kept = v * (-f * dt).exp();
                            removed += v - kept;
                            col[i] = kept;
                        }
                    }
                }
                (removed * areas[j], rate * areas[j])
            })
            .collect();

        // 4. re-injection at age zero
        let mut boundary = vec![0.0; n_m];
        let mut spiked = 0.0;
        let mut drive = 0.0;
        let mut rate_integral = 0.0;
        for (j, &(removed, rate)) in per_column.iter().enumerate() {
            rate_integral += rate;
            if removed == 0.0 {
                continue;
            }
            spiked += removed;
            drive += removed * spec.kernel.weight(m_centers[j] * self.half_back);
            for &(t, frac) in &self.inject[j] {
                boundary[t] += removed * frac;
            }
            rho.leaked_mass += removed * self.inject_leak[j];
        }
        for (t, b) in boundary.iter_mut().enumerate() {
            if *b > 0.0 {
                let k = t * n_a;
                rho.values[k] += *b / areas[t];
            }
            *b /= dt * (rho.m_faces[t + 1] - rho.m_faces[t]);
        }

        if let Some(k) = rho.values.iter().position(|v| !(*v >= 0.0)) {
            return Err(Error::Consistency(format!(
                "density {} in cell {k} after a step",
                rho.values[k]
            )));
        }
        Ok(StepOutput {
            boundary_flux: boundary,
            rate_integral,
            spiked,
            drive,
        })
    }
}

/// One step of size `dt` at potential `x`; the model's coupling scales `x`.
pub fn pde_step(spec: &ModelSpec, rho: &mut DensityGrid, x: f64, dt: f64) -> Result<StepOutput> {
    if !x.is_finite() {
        return Err(Error::input("potential must be finite"));
    }
    let mut stepper = Stepper::new(spec, rho, dt)?;
    stepper.step(rho, spec.epsilon * x)
}

/// Recording options for the PDE runs.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeRecord {
    pub stride: usize,
    /// Times at which density snapshots are taken (nearest step).
    pub snapshot_times: Vec<f64>,
}

impl Default for PdeRecord {
    fn default() -> Self {
        PdeRecord {
            stride: 1,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PdeRun {
    pub trace: Trace,
    pub density: DensityGrid,
    /// Potential at the end of the run.
    pub x_end: f64,
    pub snapshots: Vec<(f64, DensityGrid)>,
}

fn initial_rate(spec: &ModelSpec, rho: &DensityGrid, x_in: f64) -> f64 {
    let n_a = rho.grid.n_a;
    (0..rho.grid.n_m)
        .map(|j| {
            let m = rho.m_center(j);
            rho.cell_area(j)
                * (0..n_a)
                    .map(|i| spec.rate(rho.grid.a_center(i), m, x_in) * rho.values[rho.idx(i, j)])
                    .sum::<f64>()
        })
        .sum()
}

/// Whether the rate input follows the population's own potential or is held
/// at a fixed (already scaled) value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    SelfConsistent,
    Frozen(f64),
}

/// General run; `observer(t, rho, x)` is called at every recorded step,
/// including the start.
#[allow(clippy::too_many_arguments)]
pub fn run_observed(
    spec: &ModelSpec,
    coupling: Coupling,
    u0: &DensityGrid,
    x0: f64,
    t_end: f64,
    dt: f64,
    record: &PdeRecord,
    mut observer: impl FnMut(f64, &DensityGrid, f64),
) -> Result<PdeRun> {
    let frozen = match coupling {
        Coupling::SelfConsistent => None,
        Coupling::Frozen(x) if x.is_finite() => Some(x),
        Coupling::Frozen(_) => return Err(Error::input("frozen input must be finite")),
    };
    if record.stride == 0 {
        return Err(Error::input("record stride must be positive"));
    }
    let mass0 = u0.mass();
    if (mass0 - 1.0).abs() > 1e-9 {
        return Err(Error::input(format!(
            "initial datum must have unit mass, got {mass0}"
        )));
    }
    let steps = crate::particle::step_count(t_end, dt)?;
    let mut stepper = Stepper::new(spec, u0, dt)?;
    if let Some(x) = frozen {
        stepper.freeze(x);
    }
    let input = |x: f64| frozen.unwrap_or(spec.epsilon * x);

    let mut rho = u0.clone();
    let mut x = x0;
    let mut t = 0.0;
    let mut trace = Trace::default();
    trace.push(
        t,
        x,
        initial_rate(spec, &rho, input(x)),
        rho.mass(),
        rho.weighted_norm(),
    );
    observer(t, &rho, x);
    let mut snapshots = Vec::new();
    let mut pending: Vec<f64> = record.snapshot_times.clone();
    pending.sort_by(f64::total_cmp);
    let mut pending = pending.into_iter().peekable();
    while pending.peek().is_some_and(|&s| s <= 0.5 * dt) {
        pending.next();
        snapshots.push((t, rho.clone()));
    }

    let mut spiked_since = 0.0;
    let mut t_since = 0.0;
    for k in 1..=steps {
        let out = stepper.step(&mut rho, input(x))?;
        x = spec.kernel.advance(x, out.drive, dt);
        t = k as f64 * dt;
        spiked_since += out.spiked;
        if k % record.stride == 0 || k == steps {
            trace.push(
                t,
                x,
                spiked_since / (t - t_since),
                rho.mass(),
                rho.weighted_norm(),
            );
            spiked_since = 0.0;
            t_since = t;
            observer(t, &rho, x);
        }
        while pending.peek().is_some_and(|&s| s <= t + 0.5 * dt) {
            pending.next();
            snapshots.push((t, rho.clone()));
        }
    }
    Ok(PdeRun {
        trace,
        density: rho,
        x_end: x,
        snapshots,
    })
}

/// Joint evolution of the density and the potential, starting from `x = 0`.
pub fn run_nonlinear(
    spec: &ModelSpec,
    u0: &DensityGrid,
    t_end: f64,
    dt: f64,
    record: &PdeRecord,
) -> Result<PdeRun> {
    run_observed(
        spec,
        Coupling::SelfConsistent,
        u0,
        0.0,
        t_end,
        dt,
        record,
        |_, _, _| {},
    )
}

/// As [`run_nonlinear`] but starting from potential `x0`.
pub fn run_nonlinear_from(
    spec: &ModelSpec,
    u0: &DensityGrid,
    x0: f64,
    t_end: f64,
    dt: f64,
    record: &PdeRecord,
) -> Result<PdeRun> {
    run_observed(
        spec,
        Coupling::SelfConsistent,
        u0,
        x0,
        t_end,
        dt,
        record,
        |_, _, _| {},
    )
}

/// Linear evolution with the rate input frozen at `x_tilde` (already
/// scaled, i.e. the third argument of `f`). The recorded potential is the
/// output potential generated by the population, started from 0.
pub fn run_frozen(
    spec: &ModelSpec,
    x_tilde: f64,
    u0: &DensityGrid,
    t_end: f64,
    dt: f64,
    record: &PdeRecord,
) -> Result<PdeRun> {
    run_observed(
        spec,
        Coupling::Frozen(x_tilde),
        u0,
        0.0,
        t_end,
        dt,
        record,
        |_, _, _| {},
    )
}
