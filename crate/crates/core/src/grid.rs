//! Uniform periodic grids and the fields that live on them.
//!
//! Points are cell-centred: along dimension `d` the coordinates are
//! `-L/2 + (i + 1/2) Δx` for `i in 0..N`, so the domain is symmetric about
//! the origin and the origin itself is never a sample point. Storage is
//! row-major with the last dimension contiguous. Wavenumbers follow the
//! standard FFT ordering `0, 1, …, N/2-1, -N/2, …, -1` in units of `2π/L`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{config_err, Error, Result};

/// Smallest number of points allowed along any dimension.
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    extents: Vec<f64>,
    points: Vec<usize>,
}

/// Builds a grid, checking that `dims` agrees with the per-dimension lists.
pub fn make_grid(dims: usize, extents: &[f64], points: &[usize]) -> Result<Grid> {
    if extents.len() != dims || points.len() != dims {
        return Err(config_err(format!(
            "grid has dims = {dims} but {} extent(s) and {} point count(s)",
            extents.len(),
            points.len()
        )));
    }
    Grid::new(extents, points)
}

impl Grid {
    pub fn new(extents: &[f64], points: &[usize]) -> Result<Grid> {
        let dims = points.len();
        if !(1..=2).contains(&dims) {
            return Err(config_err(format!("grid must be 1D or 2D, got {dims} dimensions")));
        }
        if extents.len() != dims {
            return Err(config_err("extents and points must have the same length"));
        }
        for (d, (&l, &n)) in extents.iter().zip(points).enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(config_err(format!("extent along dimension {d} must be positive, got {l}")));
            }
            if n < MIN_POINTS || !n.is_power_of_two() {
                return Err(config_err(format!(
                    "points along dimension {d} must be a power of two >= {MIN_POINTS}, got {n}"
                )));
            }
        }
        Ok(Grid { extents: extents.to_vec(), points: points.to_vec() })
    }

    pub fn dims(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    /// Total number of samples.
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, dim: usize) -> f64 {
        self.extents[dim] / self.points[dim] as f64
    }

    /// Lower edge of the domain along `dim`.
    pub fn lower(&self, dim: usize) -> f64 {
        -0.5 * self.extents[dim]
    }

    /// Upper edge of the domain along `dim`.
    pub fn upper(&self, dim: usize) -> f64 {
        0.5 * self.extents[dim]
    }

    pub fn coord(&self, dim: usize, i: usize) -> f64 {
        self.lower(dim) + (i as f64 + 0.5) * self.spacing(dim)
    }

    pub fn coords(&self, dim: usize) -> Vec<f64> {
        (0..self.points[dim]).map(|i| self.coord(dim, i)).collect()
    }

    /// Wavenumber of FFT bin `i` along `dim`.
    pub fn wavenumber(&self, dim: usize, i: usize) -> f64 {
        let n = self.points[dim];
        let signed = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
        2.0 * PI * signed / self.extents[dim]
    }

    pub fn wavenumbers(&self, dim: usize) -> Vec<f64> {
        (0..self.points[dim]).map(|i| self.wavenumber(dim, i)).collect()
    }

    /// Product of the spacings, the quadrature weight of one sample.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dims()).map(|d| self.spacing(d)).product()
    }

    /// Flat index of a multi-index.
    pub fn index(&self, idx: &[usize]) -> usize {
        match self.dims() {
            1 => idx[0],
            _ => idx[0] * self.points[1] + idx[1],
        }
    }

    /// Multi-index of a flat index; unused trailing entries are zero.
    pub fn unravel(&self, flat: usize) -> [usize; 2] {
        match self.dims() {
            1 => [flat, 0],
            _ => [flat / self.points[1], flat % self.points[1]],
        }
    }

    /// Coordinates of a flat index; unused trailing entries are zero.
    pub fn position(&self, flat: usize) -> [f64; 2] {
        let idx = self.unravel(flat);
        let mut x = [0.0; 2];
        for (d, xd) in x.iter_mut().enumerate().take(self.dims()) {
            *xd = self.coord(d, idx[d]);
        }
        x
    }

    /// Squared wavenumber magnitude of a flat Fourier index.
    pub fn k_squared(&self, flat: usize) -> f64 {
        let idx = self.unravel(flat);
        (0..self.dims()).map(|d| self.wavenumber(d, idx[d]).powi(2)).sum()
    }

    /// Fractional sample index of coordinate `x` along `dim` (0 at the first sample).
    pub fn fractional_index(&self, dim: usize, x: f64) -> f64 {
        (x - self.lower(dim)) / self.spacing(dim) - 0.5
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "grids differ: {:?}/{:?} vs {:?}/{:?}",
                self.points, self.extents, other.points, other.extents
            )))
        }
    }
}

/// Complex samples of a wavefunction on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(ComplexField { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        ComplexField { values: vec![Complex64::new(0.0, 0.0); grid.len()], grid: grid.clone() }
    }

    /// Samples `f` at every grid point. The closure receives a slice of
    /// length `grid.dims()`.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let dims = grid.dims();
        let values = (0..grid.len()).map(|i| f(&grid.position(i)[..dims])).collect();
        ComplexField { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Grid {
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

    /// `Σ |ψ|² ΔV`.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    /// Rescales to unit norm.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Degenerate(format!("cannot normalize a field with norm² = {n}")));
        }
        let s = 1.0 / n.sqrt();
        self.values.iter_mut().for_each(|z| *z *= s);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    /// Probability density `|ψ|²`.
    pub fn density(&self) -> RealField {
        RealField { grid: self.grid.clone(), values: self.values.iter().map(|z| z.norm_sqr()).collect() }
    }

    pub fn conj(&self) -> Self {
        ComplexField { grid: self.grid.clone(), values: self.values.iter().map(|z| z.conj()).collect() }
    }

    pub fn real_part(&self) -> RealField {
        RealField { grid: self.grid.clone(), values: self.values.iter().map(|z| z.re).collect() }
    }

    /// `sqrt(Σ |a - b|² ΔV)`.
    pub fn l2_distance(&self, other: &ComplexField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((s * self.grid.cell_volume()).sqrt())
    }

    pub fn max_abs_distance(&self, other: &ComplexField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }
}

/// Real scalar samples on a grid. Masked entries are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: Grid,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(RealField { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        RealField { values: vec![0.0; grid.len()], grid: grid.clone() }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let dims = grid.dims();
        let values = (0..grid.len()).map(|i| f(&grid.position(i)[..dims])).collect();
        RealField { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Largest finite value, or `None` if every entry is NaN.
    pub fn max(&self) -> Option<f64> {
        self.values.iter().copied().filter(|v| !v.is_nan()).reduce(f64::max)
    }

    /// `Σ f ΔV` over finite entries.
    pub fn integral(&self) -> f64 {
        self.values.iter().filter(|v| v.is_finite()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}
