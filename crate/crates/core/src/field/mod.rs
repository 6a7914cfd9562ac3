//! Periodic spectral grids and complex fields sampled on them.
//!
//! The box is `[-L, L)^N` with `M` points per axis, `dx = 2L/M`, and the
//! wavenumbers `k_j = pi j / L` in standard FFT order. Quadratures are
//! trapezoidal, which is spectrally accurate for smooth periodic data.

mod fft;
mod io;
mod stretch;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use fft::AxisFft;

pub use io::{field_from_csv, field_to_csv, GridMetadata};

/// Mass fraction allowed outside the core box before a field counts as
/// leaking out of the periodic domain.
pub const DEFAULT_LEAK_TOL: f64 = 1e-8;
/// Half-width of the core box, as a fraction of `L`, used by the leak guard.
pub const DEFAULT_CORE_FRACTION: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Space dimension `N`.
    pub dim: usize,
    /// Half-length `L` of the box along each axis.
    pub half_length: f64,
    /// Points per axis; a power of two.
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            dim: 1,
            half_length: 20.0,
            points: 4096,
        }
    }
}

impl GridSpec {
    pub fn new(dim: usize, half_length: f64, points: usize) -> Self {
        Self {
            dim,
            half_length,
            points,
        }
    }

    pub fn one_d(half_length: f64, points: usize) -> Self {
        Self::new(1, half_length, points)
    }

    /// Checks the dimension, box and point count; returns the node count.
    pub fn validate(&self) -> Result<usize> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::Grid(format!("dimension {} not in {{1, 2, 3}}", self.dim)));
        }
        if !(self.half_length.is_finite() && self.half_length > 0.0) {
            return Err(Error::Grid(format!("half length must be positive, got {}", self.half_length)));
        }
        let m = self.points;
        if m < 4 || !m.is_power_of_two() {
            return Err(Error::Grid(format!("points per axis must be a power of two >= 4, got {m}")));
        }
        m.checked_pow(self.dim as u32)
            .filter(|t| t.checked_mul(std::mem::size_of::<Complex64>()).is_some())
            .ok_or_else(|| Error::Grid("point count overflows the address space".into()))
    }
}

/// A validated grid with its coordinates, wavenumbers and transform plans.
#[derive(Debug)]
pub struct Grid {
    spec: GridSpec,
    dx: f64,
    coords: Vec<f64>,
    wavenumbers: Vec<f64>,
    k2: Vec<f64>,
    r2: Vec<f64>,
    box_radius: Vec<f64>,
    band: Vec<bool>,
    total: usize,
    fft: AxisFft,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Arc<Self>> {
        let total = spec.validate()?;
        let m = spec.points;
        let l = spec.half_length;
        let dx = 2.0 * l / m as f64;
        let coords: Vec<f64> = (0..m).map(|j| -l + j as f64 * dx).collect();
        let wavenumbers: Vec<f64> = (0..m)
            .map(|j| {
                let n = if j < m / 2 { j as f64 } else { j as f64 - m as f64 };
                std::f64::consts::PI * n / l
            })
            .collect();
        let mut k2 = vec![0.0; total];
        let mut r2 = vec![0.0; total];
        let mut box_radius = vec![0.0; total];
        let mut band = vec![true; total];
        for idx in 0..total {
            let axes = axis_indices(idx, m, spec.dim);
            for &j in &axes[..spec.dim] {
                k2[idx] += wavenumbers[j] * wavenumbers[j];
                r2[idx] += coords[j] * coords[j];
                box_radius[idx] = f64::max(box_radius[idx], coords[j].abs());
                let n = if j < m / 2 { j } else { m - j };
                band[idx] &= 3 * n <= m;
            }
        }
        Ok(Arc::new(Self {
            spec,
            dx,
            coords,
            wavenumbers,
            k2,
            r2,
            box_radius,
            band,
            total,
            fft: AxisFft::new(m, spec.dim),
        }))
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn points(&self) -> usize {
        self.spec.points
    }

    pub fn half_length(&self) -> f64 {
        self.spec.half_length
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Volume element `dx^N`.
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.spec.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Node coordinates along one axis.
    pub fn axis_coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn axis_wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// `|k|^2` for every mode in storage order.
    pub fn k_squared(&self) -> &[f64] {
        &self.k2
    }

    /// Largest resolved wavenumber `pi M / (2L)`.
    pub fn k_max(&self) -> f64 {
        std::f64::consts::PI * (self.spec.points / 2) as f64 / self.spec.half_length
    }

    /// Coordinates of the node with flat index `idx`.
    pub fn node(&self, idx: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        let dim = self.spec.dim;
        for (a, j) in axis_indices(idx, self.spec.points, dim)[..dim].iter().enumerate() {
            out[a] = self.coords[*j];
        }
        out
    }

    /// Squared distance of node `idx` from the origin.
    pub fn radius_squared(&self, idx: usize) -> f64 {
        self.r2[idx]
    }

    /// `|x|^2` for every node in storage order.
    pub fn radii_squared(&self) -> &[f64] {
        &self.r2
    }

    /// Forward transform in place (unnormalized).
    pub fn forward(&self, data: &mut [Complex64]) {
        self.fft.forward(data);
    }

    /// Inverse transform in place (normalized).
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.fft.inverse(data);
    }

    /// Whether mode `idx` survives the 2/3-rule truncation.
    pub(crate) fn in_dealias_band(&self, idx: usize) -> bool {
        self.band[idx]
    }

    pub(crate) fn dealias_band(&self) -> &[bool] {
        &self.band
    }

    /// Fraction of `sum |v|^2` on nodes outside the centered box of
    /// half-length `edge`.
    pub(crate) fn outside_fraction(&self, values: &[Complex64], edge: f64) -> f64 {
        let mut total = 0.0;
        let mut outside = 0.0;
        for (v, r) in values.iter().zip(&self.box_radius) {
            let e = v.norm_sqr();
            total += e;
            if *r > edge {
                outside += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            outside / total
        }
    }
}

fn axis_indices(idx: usize, m: usize, dim: usize) -> [usize; 3] {
    let mut out = [0usize; 3];
    let mut rest = idx;
    for a in (0..dim).rev() {
        out[a] = rest % m;
        rest /= m;
    }
    out
}

/// Complex samples on a grid, row-major over axes.
#[derive(Clone, Debug)]
pub struct ComplexField {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl PartialEq for ComplexField {
    fn eq(&self, other: &Self) -> bool {
        self.grid.spec == other.grid.spec && self.values == other.values
    }
}

impl ComplexField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        let field = Self {
            grid: grid.clone(),
            values,
        };
        field.check_finite()?;
        Ok(field)
    }

    /// Evaluates `profile` at every grid node.
    pub fn sample<F>(grid: &Arc<Grid>, profile: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|idx| profile(&grid.node(idx)[..dim]))
            .collect();
        Self::from_values(grid, values)
    }

    /// Real profile sampled as a function of the distance to the origin.
    pub fn sample_radial<F>(grid: &Arc<Grid>, profile: F) -> Result<Self>
    where
        F: Fn(f64) -> f64,
    {
        Self::sample(grid, |x| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            Complex64::new(profile(r), 0.0)
        })
    }

    /// Radial profile summed over the nearest periodic images of the box,
    /// so that an exponentially decaying profile stays smooth across the
    /// box boundary.
    pub fn sample_radial_periodic<F>(grid: &Arc<Grid>, profile: F) -> Result<Self>
    where
        F: Fn(f64) -> f64,
    {
        let dim = grid.dim();
        let period = 2.0 * grid.half_length();
        let images = 3usize.pow(dim as u32);
        Self::sample(grid, |x| {
            let mut total = 0.0;
            for image in 0..images {
                let mut code = image;
                let mut r2 = 0.0;
                for xi in x {
                    let shift = (code % 3) as f64 - 1.0;
                    code /= 3;
                    let y = xi + shift * period;
                    r2 += y * y;
                }
                total += profile(r2.sqrt());
            }
            Complex64::new(total, 0.0)
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(i) = self.values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numeric(format!("non-finite sample at index {i}")));
        }
        Ok(())
    }

    /// Unnormalized forward transform.
    /// Trigonometric interpolant of `self` on a finer grid of the same box,
    /// by zero-padding the spectrum. Nyquist modes are split evenly.
    pub fn prolong(&self, fine: &Arc<Grid>) -> Result<Self> {
        let (coarse, dim) = (self.grid.spec, self.grid.dim());
        let spec = fine.spec;
        if spec.dim != dim || spec.half_length != coarse.half_length || spec.points % coarse.points != 0 {
            return Err(Error::Grid("prolongation needs the same box and a multiple of the point count".into()));
        }
        let (m, big) = (coarse.points, spec.points);
        let scale = (big as f64 / m as f64).powi(dim as i32);
        let axis_targets = |j: usize| -> Vec<(usize, f64)> {
            if 2 * j < m {
                vec![(j, 1.0)]
            } else if 2 * j > m {
                vec![(j + big - m, 1.0)]
            } else {
                vec![(j, 0.5), (big - j, 0.5)]
            }
        };
        let mut out = vec![Complex64::new(0.0, 0.0); fine.len()];
        for (idx, v) in self.spectrum().into_iter().enumerate() {
            let axes = axis_indices(idx, m, dim);
            let mut targets = vec![(0usize, scale)];
            for &j in &axes[..dim] {
                targets = targets
                    .iter()
                    .flat_map(|&(base, w)| axis_targets(j).into_iter().map(move |(t, a)| (base * big + t, w * a)))
                    .collect();
            }
            for (t, w) in targets {
                out[t] += v * w;
            }
        }
        Ok(Self::from_spectrum(fine, out))
    }

    /// Samples of `self` at the nodes of a coarser grid of the same box.
    /// Exact for fields whose spectrum fits the coarse grid.
    pub fn restrict(&self, coarse: &Arc<Grid>) -> Result<Self> {
        let (fine, dim) = (self.grid.spec, self.grid.dim());
        let spec = coarse.spec;
        if spec.dim != dim || spec.half_length != fine.half_length || fine.points % spec.points != 0 {
            return Err(Error::Grid("restriction needs the same box and a divisor of the point count".into()));
        }
        let stride = fine.points / spec.points;
        let values = (0..coarse.len())
            .map(|idx| {
                let axes = axis_indices(idx, spec.points, dim);
                let at = axes[..dim].iter().fold(0, |acc, &j| acc * fine.points + j * stride);
                self.values[at]
            })
            .collect();
        Ok(Self { grid: coarse.clone(), values })
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut s = self.values.clone();
        self.grid.forward(&mut s);
        s
    }

    pub fn from_spectrum(grid: &Arc<Grid>, mut spectrum: Vec<Complex64>) -> Self {
        grid.inverse(&mut spectrum);
        Self {
            grid: grid.clone(),
            values: spectrum,
        }
    }

    /// `dx^N sum |v|^2`.
    pub fn mass(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// `||grad v||^2` from the spectrum.
    pub fn kinetic(&self) -> f64 {
        spectral_kinetic(&self.grid, &self.spectrum())
    }

    /// `||grad v||_2`.
    pub fn gradient_norm(&self) -> f64 {
        self.kinetic().sqrt()
    }

    pub fn laplacian(&self) -> Self {
        let mut s = self.spectrum();
        for (v, k2) in s.iter_mut().zip(self.grid.k_squared()) {
            *v *= -k2;
        }
        Self::from_spectrum(&self.grid, s)
    }

    /// `dx^N sum |x|^2 |v|^2` in centered box coordinates.
    pub fn weighted_moment(&self) -> f64 {
        self.grid.cell_volume()
            * self
                .values
                .iter()
                .zip(self.grid.radii_squared())
                .map(|(v, r2)| r2 * v.norm_sqr())
                .sum::<f64>()
    }

    /// Fraction of mass outside the centered box of half-length
    /// `core_fraction * L`. Zero for a zero field.
    pub fn boundary_mass_fraction(&self, core_fraction: f64) -> f64 {
        self.grid.outside_fraction(&self.values, core_fraction * self.grid.half_length())
    }

    /// Spectral energy fraction outside the 2/3-rule band; the resolution
    /// guard of a trajectory.
    pub fn spectral_tail_fraction(&self) -> f64 {
        spectral_tail_fraction(&self.grid, &self.spectrum())
    }

    /// 2/3-rule low-pass projection.
    pub fn dealiased(&self) -> Self {
        let mut s = self.spectrum();
        for (i, v) in s.iter_mut().enumerate() {
            if !self.grid.in_dealias_band(i) {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        Self::from_spectrum(&self.grid, s)
    }

    /// `lambda^{N/2} v(lambda x)`, evaluated from the trigonometric
    /// interpolant at the stretched nodes.
    pub fn rescale(&self, lambda: f64) -> Result<Self> {
        self.rescale_with_tol(lambda, DEFAULT_LEAK_TOL)
    }

    pub fn rescale_with_tol(&self, lambda: f64, leak_tol: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Domain(format!("scale must be positive, got {lambda}")));
        }
        if lambda == 1.0 {
            return Ok(self.clone());
        }
        if lambda < 1.0 {
            // v(lambda x) only sees v on |y| < lambda L
            let leak = self.boundary_mass_fraction(lambda);
            if leak > leak_tol {
                return Err(Error::Truncation(format!(
                    "mass fraction {leak:.3e} outside |x| < {lambda} L exceeds {leak_tol:.1e}"
                )));
            }
        } else {
            let band = self.band_fraction_beyond(self.grid.k_max() / lambda);
            if band > leak_tol {
                return Err(Error::Truncation(format!(
                    "spectral fraction {band:.3e} beyond k_max/{lambda} exceeds {leak_tol:.1e}"
                )));
            }
        }
        let grid = &self.grid;
        let mut data = self.values.clone();
        for axis in 0..grid.dim() {
            stretch::stretch_axis(&grid.fft, grid.points(), grid.dim(), &mut data, axis, lambda);
        }
        let amp = lambda.powf(0.5 * grid.dim() as f64);
        let l = grid.half_length();
        let dim = grid.dim();
        for (i, v) in data.iter_mut().enumerate() {
            // stretched nodes past the box wrap around; v vanishes there
            if lambda > 1.0 && grid.node(i)[..dim].iter().any(|x| (lambda * x).abs() > l) {
                *v = Complex64::new(0.0, 0.0);
            } else {
                *v *= amp;
            }
        }
        Self::from_values(grid, data)
    }

    fn band_fraction_beyond(&self, k_cut: f64) -> f64 {
        let s = self.spectrum();
        let total: f64 = s.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let m = self.grid.points();
        let dim = self.grid.dim();
        let wn = self.grid.axis_wavenumbers();
        let beyond: f64 = s
            .iter()
            .enumerate()
            .filter(|(i, _)| axis_indices(*i, m, dim)[..dim].iter().any(|&j| wn[j].abs() > k_cut))
            .map(|(_, v)| v.norm_sqr())
            .sum();
        beyond / total
    }

    /// Real inner product `Re <a, b> = dx^N sum Re(conj(a) b)`.
    pub fn inner_real(&self, other: &Self) -> f64 {
        self.grid.cell_volume()
            * self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(a, b)| a.re * b.re + a.im * b.im)
                .sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.mass().sqrt()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn scaled_real(&self, factor: f64) -> Self {
        self.scaled(Complex64::new(factor, 0.0))
    }

    pub fn difference(&self, other: &Self) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(other.values.iter()).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    /// Grid `H^1` norm `sqrt(mass + kinetic)`.
    pub fn h1_norm(&self) -> f64 {
        (self.mass() + self.kinetic()).sqrt()
    }

    /// Node index of the largest modulus.
    pub fn peak_index(&self) -> usize {
        let mut best = 0;
        let mut val = -1.0;
        for (i, v) in self.values.iter().enumerate() {
            let a = v.norm_sqr();
            if a > val {
                val = a;
                best = i;
            }
        }
        best
    }
}

/// Kinetic energy `dx^N / M^N sum |k|^2 |V_k|^2` of an unnormalized spectrum.
pub fn spectral_kinetic(grid: &Grid, spectrum: &[Complex64]) -> f64 {
    let weight = grid.cell_volume() / grid.len() as f64;
    weight
        * spectrum
            .iter()
            .zip(grid.k_squared())
            .map(|(v, k2)| k2 * v.norm_sqr())
            .sum::<f64>()
}

/// Fraction of `sum |V_k|^2` outside the 2/3-rule band.
pub fn spectral_tail_fraction(grid: &Grid, spectrum: &[Complex64]) -> f64 {
    let mut total = 0.0;
    let mut tail = 0.0;
    for (v, inside) in spectrum.iter().zip(grid.dealias_band()) {
        let e = v.norm_sqr();
        total += e;
        if !inside {
            tail += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

#[cfg(test)]
mod tests;
