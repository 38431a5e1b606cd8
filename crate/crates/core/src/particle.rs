//! Time-stepped simulation of the N-neuron system.
//!
//! Between spikes every neuron ages at unit speed while its memory decays by
//! `exp(-lambda dt)`; within a step it spikes with probability
//! `1 - exp(-f dt)` evaluated at the step-start state, after which its age is
//! reset to 0 and its memory jumps to `gamma(m)`. Each neuron owns a PCG
//! stream derived from the master seed and its index, and partial sums are
//! reduced over fixed-size chunks in chunk order, so results do not depend on
//! the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, LogNormal, Normal};
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{find_cell, DensityGrid, GridSpec, InitialDatum};
use crate::model::ModelSpec;
use crate::trace::Trace;

/// Largest admissible `f_max * dt`.
pub const MAX_RATE_STEP: f64 = 0.1;

const CHUNK: usize = 2048;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn neuron_stream(seed: u64, id: usize) -> Pcg64Mcg {
    Pcg64Mcg::seed_from_u64(splitmix64(seed).wrapping_add(id as u64))
}

#[derive(Debug, Clone)]
pub struct ParticleState {
    pub ages: Vec<f64>,
    pub memories: Vec<f64>,
    pub x: f64,
    pub t: f64,
    rngs: Vec<Pcg64Mcg>,
}

/// What to record during [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RecordConfig {
    /// Record every `stride` steps.
    pub stride: usize,
    /// Spikes of neurons `0..raster_neurons` go to the raster.
    pub raster_neurons: usize,
    /// Window used for the `mass` column; `None` counts every neuron.
    pub window: Option<GridSpec>,
}

impl Default for RecordConfig {
    fn default() -> Self {
        RecordConfig {
            stride: 1,
            raster_neurons: 0,
            window: None,
        }
    }
}

/// Outcome of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSummary {
    /// Number of spikes emitted.
    pub spikes: usize,
    /// Sum of kernel weights of the emitted spikes, divided by N.
    pub drive: f64,
}

impl ParticleState {
    /// State with prescribed ages and memories.
    pub fn from_points(ages: Vec<f64>, memories: Vec<f64>, x: f64, seed: u64) -> Result<Self> {
        if ages.len() != memories.len() || ages.is_empty() {
            return Err(Error::input(
                "ages and memories must be non-empty and equally long",
            ));
        }
        if ages.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::input("ages must be finite and non-negative"));
        }
        if memories.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::input("memories must be positive"));
        }
        let rngs = (0..ages.len()).map(|id| neuron_stream(seed, id)).collect();
        Ok(ParticleState {
            ages,
            memories,
            x,
            t: 0.0,
            rngs,
        })
    }

    /// `n` neurons drawn from an initial datum. The product law is truncated
    /// to `a >= 0` and `m <= m_max` by rejection, matching the normalized
    /// datum the PDE solver starts from. A point datum is clamped to `m_max`.
    pub fn sample(spec: &ModelSpec, datum: &InitialDatum, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("need at least one neuron"));
        }
        let mut rng = Pcg64Mcg::seed_from_u64(splitmix64(seed ^ 0x5EED_1A17));
        let (ages, memories): (Vec<f64>, Vec<f64>) = match *datum {
            InitialDatum::Point { a, m } => (vec![a; n], vec![m.min(spec.m_max); n]),
            InitialDatum::Product {
                age_mean,
                age_sd,
                log_m_mean,
                log_m_sd,
            } => {
                let age = Normal::new(age_mean, age_sd)
                    .map_err(|e| Error::input(format!("age distribution: {e}")))?;
                let mem = LogNormal::new(log_m_mean, log_m_sd)
                    .map_err(|e| Error::input(format!("memory distribution: {e}")))?;
                (0..n)
                    .map(|_| {
                        let a = loop {
                            let a: f64 = age.sample(&mut rng);
                            if a >= 0.0 {
                                break a;
                            }
                        };
                        let m = loop {
                            let m: f64 = mem.sample(&mut rng);
                            if m <= spec.m_max {
                                break m;
                            }
                        };
                        (a, m)
                    })
                    .unzip()
            }
        };
        Self::from_points(ages, memories, 0.0, seed)
    }

    pub fn len(&self) -> usize {
        self.ages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ages.is_empty()
    }

    /// `(1/N) sum (1 + m_i)`.
    pub fn weighted_norm(&self) -> f64 {
        let sum: f64 = self
            .memories
            .par_chunks(CHUNK)
            .map(|c| c.iter().map(|m| 1.0 + m).sum::<f64>())
            .collect::<Vec<_>>()
            .iter()
            .sum();
        sum / self.len() as f64
    }

    /// Fraction of neurons inside the window.
    pub fn mass_in(&self, grid: &GridSpec) -> f64 {
        let inside = self
            .ages
            .iter()
            .zip(&self.memories)
            .filter(|&(&a, &m)| a < grid.a_max && m <= grid.m_max)
            .count();
        inside as f64 / self.len() as f64
    }

    /// Mean of `f` over the population at input `x`.
    pub fn mean_rate(&self, spec: &ModelSpec) -> f64 {
        let xin = spec.epsilon * self.x;
        let partial: Vec<f64> = self
            .ages
            .par_chunks(CHUNK)
            .zip(self.memories.par_chunks(CHUNK))
            .map(|(a, m)| a.iter().zip(m).map(|(&a, &m)| spec.rate(a, m, xin)).sum())
            .collect();
        partial.iter().sum::<f64>() / self.len() as f64
    }
}

/// Largest step the thinning guard admits, capped at `preferred`.
pub fn admissible_dt(spec: &ModelSpec, preferred: f64) -> f64 {
    preferred.min(MAX_RATE_STEP / spec.firing.sup())
}

fn check_dt(spec: &ModelSpec, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::input(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let dt_max = MAX_RATE_STEP / spec.firing.sup();
    if dt > dt_max * (1.0 + 1e-12) {
        return Err(Error::input(format!(
            "time step {dt} exceeds {dt_max} (f_max * dt must stay below {MAX_RATE_STEP})"
        )));
    }
    Ok(())
}

fn step_inner(
    spec: &ModelSpec,
    state: &mut ParticleState,
    dt: f64,
    raster: Option<(&mut Vec<(usize, f64)>, usize)>,
) -> StepSummary {
    let xin = spec.epsilon * state.x;
    let decay = (-spec.lambda * dt).exp();
    let n = state.len();
    let t_spike = state.t + dt;
    let watch = raster.as_ref().map_or(0, |r| r.1);

    let partials: Vec<(usize, f64, Vec<usize>)> = state
        .ages
        .par_chunks_mut(CHUNK)
        .zip(state.memories.par_chunks_mut(CHUNK))
        .zip(state.rngs.par_chunks_mut(CHUNK))
        .enumerate()
        .map(|(c, ((ages, mems), rngs))| {
            let mut spikes = 0;
            let mut drive = 0.0;
            let mut watched = Vec::new();
            for (k, ((a, m), rng)) in ages.iter_mut().zip(mems.iter_mut()).zip(rngs).enumerate() {
                let p = -(-spec.rate(*a, *m, xin) * dt).exp_m1();
                let u: f64 = rng.gen();
                let m_end = *m * decay;
                if u < p {
                    spikes += 1;
                    drive += spec.kernel.weight(m_end);
                    *a = 0.0;
                    *m = spec.jump.apply(m_end);
                    let id = c * CHUNK + k;
                    if id < watch {
                        watched.push(id);
                    }
                } else {
                    *a += dt;
                    *m = m_end;
                }
            }
            (spikes, drive, watched)
        })
        .collect();

    let mut spikes = 0;
    let mut drive = 0.0;
    let mut raster = raster;
    for (s, d, w) in partials {
        spikes += s;
        drive += d;
        if let Some((out, _)) = raster.as_mut() {
            out.extend(w.into_iter().map(|id| (id, t_spike)));
        }
    }
    let drive = drive / n as f64;
    state.x = spec.kernel.advance(state.x, drive, dt);
    state.t = t_spike;
    StepSummary { spikes, drive }
}

/// Advances the state by one step.
pub fn step(spec: &ModelSpec, state: &mut ParticleState, dt: f64) -> Result<StepSummary> {
    check_dt(spec, dt)?;
    Ok(step_inner(spec, state, dt, None))
}

/// Number of steps of size `dt` needed to reach `t_end`.
pub(crate) fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::input(format!(
            "end time must be non-negative, got {t_end}"
        )));
    }
    Ok((t_end / dt - 1e-9).ceil().max(0.0) as usize)
}

/// Runs `t_end / dt` steps, recording every `record.stride` steps and at the
/// start. The recorded rate is the spike count since the previous record per
/// neuron and unit time (the mean of `f` at the first record).
pub fn run(
    spec: &ModelSpec,
    state: &mut ParticleState,
    t_end: f64,
    dt: f64,
    record: &RecordConfig,
) -> Result<Trace> {
    check_dt(spec, dt)?;
    if record.stride == 0 {
        return Err(Error::input("record stride must be positive"));
    }
    let delta_abs = spec.firing.delta_abs;
    if delta_abs > 0.0 && delta_abs < dt {
        log::warn!(
            "time step {dt} exceeds the refractory period {delta_abs}; neurons may be due for \
             more than one spike per step"
        );
    }
    let steps = step_count(t_end, dt)?;
    let n = state.len() as f64;
    let mass = |s: &ParticleState| record.window.as_ref().map_or(1.0, |g| s.mass_in(g));

    let mut trace = Trace::default();
    let mut raster = (record.raster_neurons > 0).then(Vec::new);
    trace.push(
        state.t,
        state.x,
        state.mean_rate(spec),
        mass(state),
        state.weighted_norm(),
    );
    let mut spikes_since = 0usize;
    let mut t_since = state.t;
    for k in 1..=steps {
        let out = step_inner(
            spec,
            state,
            dt,
            raster.as_mut().map(|r| (r, record.raster_neurons)),
        );
        spikes_since += out.spikes;
        if k % record.stride == 0 || k == steps {
            let rate = spikes_since as f64 / (n * (state.t - t_since));
            trace.push(state.t, state.x, rate, mass(state), state.weighted_norm());
            spikes_since = 0;
            t_since = state.t;
        }
    }
    trace.raster = raster;
    Ok(trace)
}

/// Histogram estimate of the density: counts divided by `N` times the cell
/// area. Neurons outside the window are not counted.
pub fn empirical_density(state: &ParticleState, grid: &GridSpec) -> Result<DensityGrid> {
    let mut rho = DensityGrid::zeros(grid.clone())?;
    let w = 1.0 / state.len() as f64;
    for (&a, &m) in state.ages.iter().zip(&state.memories) {
        let (Some(i), Some(j)) = (grid.a_index(a), find_cell(&rho.m_faces, m)) else {
            continue;
        };
        let k = rho.idx(i, j);
        rho.values[k] += w;
    }
    let n_a = grid.n_a;
    for j in 0..grid.n_m {
        let area = rho.cell_area(j);
        for v in &mut rho.values[j * n_a..(j + 1) * n_a] {
            *v /= area;
        }
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{presets, FiringRate, InteractionKernel, JumpMap};

    fn constant_model(c: f64) -> ModelSpec {
        presets::constant_rate(c, JumpMap::additive(0.5))
    }

    #[test]
    fn zero_rate_is_pure_flow() {
        let mut spec = constant_model(1.0);
        spec.firing = FiringRate {
            delta_abs: 1e9,
            ..spec.firing.clone()
        };
        let mut state = ParticleState::from_points(vec![0.5, 2.0], vec![1.0, 3.0], 0.7, 1).unwrap();
        let dt = 0.05;
        let out = step(&spec, &mut state, dt).unwrap();
        assert_eq!(out.spikes, 0);
        assert_eq!(state.ages, vec![0.55, 2.05]);
        let q = (-spec.lambda * dt).exp();
        assert_eq!(state.memories, vec![q, 3.0 * q]);
        assert!((state.x - 0.7 * (-spec.kernel.decay * dt).exp()).abs() < 1e-15);
    }

    #[test]
    fn time_step_guard() {
        let spec = constant_model(2.0);
        let mut state = ParticleState::from_points(vec![0.0], vec![1.0], 0.0, 1).unwrap();
        assert!(matches!(
            step(&spec, &mut state, 0.06),
            Err(Error::Input(_))
        ));
        assert!(matches!(step(&spec, &mut state, 0.0), Err(Error::Input(_))));
        assert!(step(&spec, &mut state, 0.05).is_ok());
    }

    #[test]
    fn single_neuron_mean_interval() {
        let c = 2.0;
        let spec = constant_model(c);
        let mut state = ParticleState::from_points(vec![0.0], vec![1.0], 0.0, 42).unwrap();
        let record = RecordConfig {
            stride: 1_000_000,
            raster_neurons: 1,
            window: None,
        };
        let dt = 0.001;
        let trace = run(&spec, &mut state, 2000.0, dt, &record).unwrap();
        let spikes: Vec<f64> = trace.raster.unwrap().iter().map(|s| s.1).collect();
        let n = spikes.len() - 1;
        let mean = (spikes[n] - spikes[0]) / n as f64;
        // the discrete scheme has geometric intervals with mean dt / (1 - exp(-c dt))
        let exact = 1.0 / c;
        let tol = 3.0 * exact / (n as f64).sqrt() + dt;
        assert!(
            (mean - exact).abs() < tol,
            "mean interval {mean} vs {exact} (n={n})"
        );
    }

    #[test]
    fn memories_stay_positive_and_below_one_under_depression() {
        let spec = presets::depression();
        let datum = InitialDatum::Product {
            age_mean: 0.5,
            age_sd: 0.3,
            log_m_mean: -1.0,
            log_m_sd: 0.3,
        };
        let mut state = ParticleState::sample(&spec, &datum, 2000, 9).unwrap();
        for _ in 0..500 {
            step(&spec, &mut state, 0.005).unwrap();
            assert!(state.memories.iter().all(|&m| m > 0.0 && m < 1.0));
            assert_eq!(state.len(), 2000);
        }
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let spec = presets::asrm0();
        let datum = InitialDatum::Product {
            age_mean: 1.0,
            age_sd: 0.5,
            log_m_mean: 0.5,
            log_m_sd: 0.3,
        };
        let go = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                let mut state = ParticleState::sample(&spec, &datum, 10_000, 3).unwrap();
                let record = RecordConfig {
                    stride: 10,
                    raster_neurons: 50,
                    window: None,
                };
                run(&spec, &mut state, 1.0, 0.005, &record).unwrap()
            })
        };
        assert_eq!(go(1), go(3));
    }

    #[test]
    fn empirical_density_of_point_cloud() {
        let grid = GridSpec::uniform(4.0, 4, 2.0, 4);
        let state = ParticleState::from_points(vec![1.5; 10], vec![0.75; 10], 0.0, 0).unwrap();
        let rho = empirical_density(&state, &grid).unwrap();
        let k = rho.idx(1, 1);
        assert!((rho.values[k] * rho.cell_area(1) - 1.0).abs() < 1e-15);
        assert!((rho.mass() - 1.0).abs() < 1e-15);
        let spread: Vec<f64> = (0..1000).map(|k| 1.0 + (k as f64 + 0.5) / 1000.0).collect();
        let state = ParticleState::from_points(spread, vec![0.75; 1000], 0.0, 0).unwrap();
        let rho = empirical_density(&state, &grid).unwrap();
        assert!((rho.values[rho.idx(1, 1)] - 1.0 / rho.cell_area(1)).abs() < 1e-12);
    }

    #[test]
    fn decoupled_runs_ignore_the_kernel() {
        let spec = constant_model(1.0);
        let mut silent = spec.clone();
        silent.kernel = InteractionKernel::exponential(0.0, 1.0);
        let datum = InitialDatum::Point { a: 0.0, m: 1.0 };
        let mut s1 = ParticleState::sample(&spec, &datum, 500, 4).unwrap();
        let mut s2 = ParticleState::sample(&silent, &datum, 500, 4).unwrap();
        let r = RecordConfig::default();
        let t1 = run(&spec, &mut s1, 2.0, 0.01, &r).unwrap();
        let t2 = run(&silent, &mut s2, 2.0, 0.01, &r).unwrap();
        assert_eq!(t1.pop_rate, t2.pop_rate);
        assert_eq!(s1.ages, s2.ages);
        assert!(t2.x_values.iter().all(|&x| x == 0.0));
    }
}
