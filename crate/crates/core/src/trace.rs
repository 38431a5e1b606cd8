//! Recorded time series shared by the particle and PDE solvers.

/// Time series of the potential, population rate, mass in the window and
/// weighted norm. Spike raster entries are `(neuron_id, spike_time)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub times: Vec<f64>,
    pub x_values: Vec<f64>,
    pub pop_rate: Vec<f64>,
    pub mass: Vec<f64>,
    pub weighted_norm: Vec<f64>,
    pub raster: Option<Vec<(usize, f64)>>,
}

impl Trace {
    pub fn push(&mut self, t: f64, x: f64, rate: f64, mass: f64, weighted_norm: f64) {
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.x_values.push(x);
        self.pop_rate.push(rate);
        self.mass.push(mass);
        self.weighted_norm.push(weighted_norm);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Linear interpolation of the potential at time `t`, clamped to the ends.
    pub fn x_at(&self, t: f64) -> Option<f64> {
        let n = self.times.len();
        if n == 0 {
            return None;
        }
        if t <= self.times[0] {
            return Some(self.x_values[0]);
        }
        if t >= self.times[n - 1] {
            return Some(self.x_values[n - 1]);
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let s = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        Some(self.x_values[k] + s * (self.x_values[k + 1] - self.x_values[k]))
    }

    /// `sup_t |x(t) - other.x(t)|` over this trace's sample times.
    pub fn sup_x_distance(&self, other: &Trace) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.x_values)
            .map(|(&t, &x)| other.x_at(t).map(|y| (x - y).abs()))
            .try_fold(0.0f64, |acc, d| d.map(|d| acc.max(d)))
            .filter(|_| !self.is_empty())
    }

    /// Time average of the population rate over `[t_from, end]`, weighting
    /// each sample by the interval that precedes it.
    pub fn mean_rate_after(&self, t_from: f64) -> Option<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 1..self.times.len() {
            if self.times[k - 1] < t_from {
                continue;
            }
            let w = self.times[k] - self.times[k - 1];
            num += w * self.pop_rate[k];
            den += w;
        }
        (den > 0.0).then(|| num / den)
    }

    /// Time average of the potential over `[t_from, end]` (trapezoidal).
    pub fn mean_x_after(&self, t_from: f64) -> Option<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 1..self.times.len() {
            if self.times[k - 1] < t_from {
                continue;
            }
            let w = self.times[k] - self.times[k - 1];
            num += 0.5 * w * (self.x_values[k] + self.x_values[k - 1]);
            den += w;
        }
        (den > 0.0).then(|| num / den)
    }
}
