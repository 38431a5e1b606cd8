//! Truncated `(a, m)` grids and cell-averaged densities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    #[default]
    Uniform,
    /// One cell `[0, m_min]` followed by geometrically growing cells up to
    /// `m_max`.
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub a_max: f64,
    pub n_a: usize,
    #[serde(default)]
    pub m_min: f64,
    pub m_max: f64,
    pub n_m: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn uniform(a_max: f64, n_a: usize, m_max: f64, n_m: usize) -> Self {
        GridSpec {
            a_max,
            n_a,
            m_min: 0.0,
            m_max,
            n_m,
            spacing: Spacing::Uniform,
        }
    }

    /// Smallest age window that keeps the analytic tail `exp(-sigma (a - delta_abs))`
    /// below `exp(-10)`.
    pub fn min_age_window(spec: &ModelSpec) -> f64 {
        spec.firing.delta_abs + 10.0 / spec.firing.floor()
    }

    /// Uniform grid covering the model's memory domain and the minimal age
    /// window.
    pub fn for_model(spec: &ModelSpec, n_a: usize, n_m: usize) -> Self {
        GridSpec::uniform(Self::min_age_window(spec), n_a, spec.m_max, n_m)
    }

    /// Geometric memory grid whose cell ratio is `exp(lambda da)`, so that one
    /// step with `dt = da` carries every memory cell exactly onto its lower
    /// neighbour and the memory transport adds no numerical diffusion.
    pub fn aligned(spec: &ModelSpec, n_a: usize, n_m: usize) -> Self {
        let mut grid = Self::for_model(spec, n_a, n_m);
        grid.spacing = Spacing::Geometric;
        grid.m_min = Self::aligned_m_min(spec, grid.a_max, n_a, n_m);
        grid
    }

    /// Lowest geometric face of [`GridSpec::aligned`] for the given window.
    pub fn aligned_m_min(spec: &ModelSpec, a_max: f64, n_a: usize, n_m: usize) -> f64 {
        let da = a_max / n_a as f64;
        spec.m_max * (-spec.lambda * da * n_m.saturating_sub(1) as f64).exp()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_a < 4 || self.n_m < 4 {
            return Err(Error::input("grids need at least 4 cells per direction"));
        }
        if !(self.a_max.is_finite() && self.a_max > 0.0) {
            return Err(Error::input("a_max must be positive"));
        }
        if !(self.m_max.is_finite() && self.m_max > self.m_min && self.m_min >= 0.0) {
            return Err(Error::input("need 0 <= m_min < m_max"));
        }
        if self.spacing == Spacing::Geometric && self.m_min <= 0.0 {
            return Err(Error::input("geometric spacing needs m_min > 0"));
        }
        Ok(())
    }

    /// Checks the grid against a model: the memory domain must be covered
    /// and the age window must exceed `delta_abs + 10 / sigma`.
    pub fn validate_for(&self, spec: &ModelSpec) -> Result<()> {
        self.validate()?;
        let need = Self::min_age_window(spec);
        if self.a_max < need * (1.0 - 1e-12) {
            return Err(Error::input(format!(
                "a_max = {} is below delta_abs + 10/sigma = {need}",
                self.a_max
            )));
        }
        if self.m_max < spec.m_max * (1.0 - 1e-12) {
            return Err(Error::input(format!(
                "grid m_max = {} does not cover the memory domain (0, {}]",
                self.m_max, spec.m_max
            )));
        }
        Ok(())
    }

    pub fn da(&self) -> f64 {
        self.a_max / self.n_a as f64
    }

    pub fn a_face(&self, i: usize) -> f64 {
        self.da() * i as f64
    }

    pub fn a_center(&self, i: usize) -> f64 {
        self.da() * (i as f64 + 0.5)
    }

    /// The `n_m + 1` memory cell faces, starting at 0.
    pub fn m_faces(&self) -> Vec<f64> {
        let n = self.n_m;
        match (self.spacing, self.m_min > 0.0) {
            (Spacing::Uniform, false) => {
                (0..=n).map(|j| self.m_max * j as f64 / n as f64).collect()
            }
            (Spacing::Uniform, true) => {
                let mut faces = vec![0.0];
                let k = n - 1;
                faces.extend(
                    (0..=k).map(|j| self.m_min + (self.m_max - self.m_min) * j as f64 / k as f64),
                );
                faces
            }
            (Spacing::Geometric, _) => {
                let mut faces = vec![0.0];
                let k = n - 1;
                let ratio = (self.m_max / self.m_min).ln();
                faces.extend((0..=k).map(|j| self.m_min * (ratio * j as f64 / k as f64).exp()));
                *faces.last_mut().unwrap() = self.m_max;
                faces
            }
        }
    }

    /// Index of the age cell holding `a`, if inside the window.
    pub fn a_index(&self, a: f64) -> Option<usize> {
        if !(0.0..self.a_max).contains(&a) {
            return None;
        }
        Some(((a / self.da()) as usize).min(self.n_a - 1))
    }
}

/// Locates `m` among sorted cell faces.
pub(crate) fn find_cell(faces: &[f64], m: f64) -> Option<usize> {
    let n = faces.len() - 1;
    if !(m >= faces[0] && m < faces[n]) {
        return if m == faces[n] { Some(n - 1) } else { None };
    }
    Some(faces.partition_point(|&f| f <= m) - 1)
}

/// Cell-averaged density on a [`GridSpec`]; values are stored column by
/// column, `values[j * n_a + i]` for age cell `i` and memory cell `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub grid: GridSpec,
    pub m_faces: Vec<f64>,
    pub values: Vec<f64>,
    /// Mass that left the window through `a_max` or above `m_max`.
    pub leaked_mass: f64,
}

impl DensityGrid {
    pub fn zeros(grid: GridSpec) -> Result<Self> {
        grid.validate()?;
        let m_faces = grid.m_faces();
        let values = vec![0.0; grid.n_a * grid.n_m];
        Ok(DensityGrid {
            grid,
            m_faces,
            values,
            leaked_mass: 0.0,
        })
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.grid.n_a + i
    }

    pub fn dm(&self, j: usize) -> f64 {
        self.m_faces[j + 1] - self.m_faces[j]
    }

    pub fn m_center(&self, j: usize) -> f64 {
        0.5 * (self.m_faces[j] + self.m_faces[j + 1])
    }

    pub fn cell_area(&self, j: usize) -> f64 {
        self.grid.da() * self.dm(j)
    }

    /// Mass per cell.
    pub fn cell_masses(&self) -> Vec<f64> {
        let n_a = self.grid.n_a;
        let mut out = Vec::with_capacity(self.values.len());
        for j in 0..self.grid.n_m {
            let area = self.cell_area(j);
            out.extend(self.values[j * n_a..(j + 1) * n_a].iter().map(|v| v * area));
        }
        out
    }

    pub fn mass(&self) -> f64 {
        let n_a = self.grid.n_a;
        (0..self.grid.n_m)
            .map(|j| self.cell_area(j) * self.values[j * n_a..(j + 1) * n_a].iter().sum::<f64>())
            .sum()
    }

    /// `int (1 + m) rho` with `m` at cell centers.
    pub fn weighted_norm(&self) -> f64 {
        let n_a = self.grid.n_a;
        (0..self.grid.n_m)
            .map(|j| {
                (1.0 + self.m_center(j))
                    * self.cell_area(j)
                    * self.values[j * n_a..(j + 1) * n_a]
                        .iter()
                        .map(|v| v.abs())
                        .sum::<f64>()
            })
            .sum()
    }

    fn check_same_grid(&self, other: &DensityGrid) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::input("densities live on different grids"));
        }
        Ok(())
    }

    /// `int |rho - other|`.
    pub fn l1_distance(&self, other: &DensityGrid) -> Result<f64> {
        self.weighted_distance(other, |_| 1.0)
    }

    /// `int (1 + m) |rho - other|`.
    pub fn weighted_l1_distance(&self, other: &DensityGrid) -> Result<f64> {
        self.weighted_distance(other, |m| 1.0 + m)
    }

    fn weighted_distance(&self, other: &DensityGrid, w: impl Fn(f64) -> f64) -> Result<f64> {
        self.check_same_grid(other)?;
        let n_a = self.grid.n_a;
        Ok((0..self.grid.n_m)
            .map(|j| {
                let col = j * n_a..(j + 1) * n_a;
                w(self.m_center(j))
                    * self.cell_area(j)
                    * self.values[col.clone()]
                        .iter()
                        .zip(&other.values[col])
                        .map(|(a, b)| (a - b).abs())
                        .sum::<f64>()
            })
            .sum())
    }

    /// Density of the age marginal per age cell.
    pub fn age_marginal(&self) -> Vec<f64> {
        let n_a = self.grid.n_a;
        let mut out = vec![0.0; n_a];
        for j in 0..self.grid.n_m {
            let dm = self.dm(j);
            for (o, v) in out.iter_mut().zip(&self.values[j * n_a..(j + 1) * n_a]) {
                *o += v * dm;
            }
        }
        out
    }

    /// Adds `mass` at the point `(a, m)`; returns false if it lies outside.
    pub fn deposit(&mut self, a: f64, m: f64, mass: f64) -> bool {
        let (Some(i), Some(j)) = (self.grid.a_index(a), find_cell(&self.m_faces, m)) else {
            return false;
        };
        let k = self.idx(i, j);
        self.values[k] += mass / self.cell_area(j);
        true
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    /// Minimum density over the cells fully or partly inside the rectangle.
    pub fn min_over(&self, a_range: (f64, f64), m_range: (f64, f64)) -> Option<f64> {
        let da = self.grid.da();
        let mut best: Option<f64> = None;
        for j in 0..self.grid.n_m {
            if self.m_faces[j + 1] <= m_range.0 || self.m_faces[j] >= m_range.1 {
                continue;
            }
            for i in 0..self.grid.n_a {
                let lo = da * i as f64;
                if lo + da <= a_range.0 || lo >= a_range.1 {
                    continue;
                }
                let v = self.values[self.idx(i, j)];
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        best
    }
}

/// Initial data for the PDE solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialDatum {
    /// Truncated Gaussian in age times a log-normal in memory.
    Product {
        age_mean: f64,
        age_sd: f64,
        log_m_mean: f64,
        log_m_sd: f64,
    },
    /// All mass in the cell containing `(a, m)`.
    Point { a: f64, m: f64 },
}

impl InitialDatum {
    /// Cell-averaged datum normalized to unit mass.
    pub fn discretize(&self, grid: &GridSpec) -> Result<DensityGrid> {
        let mut rho = DensityGrid::zeros(grid.clone())?;
        match *self {
            InitialDatum::Point { a, m } => {
                if !rho.deposit(a, m, 1.0) {
                    return Err(Error::input(format!(
                        "point ({a}, {m}) lies outside the grid"
                    )));
                }
            }
            InitialDatum::Product {
                age_mean,
                age_sd,
                log_m_mean,
                log_m_sd,
            } => {
                if !(age_sd > 0.0 && log_m_sd > 0.0) {
                    return Err(Error::input("initial spreads must be positive"));
                }
                let n_a = grid.n_a;
                let age_w: Vec<f64> = (0..n_a)
                    .map(|i| {
                        let z = (grid.a_center(i) - age_mean) / age_sd;
                        (-0.5 * z * z).exp()
                    })
                    .collect();
                for j in 0..grid.n_m {
                    let m = rho.m_center(j);
                    let z = (m.ln() - log_m_mean) / log_m_sd;
                    let mw = (-0.5 * z * z).exp() / m;
                    for (v, w) in rho.values[j * n_a..(j + 1) * n_a].iter_mut().zip(&age_w) {
                        *v = w * mw;
                    }
                }
                let mass = rho.mass();
                if !(mass > 0.0) {
                    return Err(Error::input("initial datum has no mass on the grid"));
                }
                rho.scale(1.0 / mass);
            }
        }
        Ok(rho)
    }
}
