//! Fourier transforms and spectral differential operators.
//!
//! The forward transform is unnormalized and the inverse carries the `1/N`
//! factor, so `inverse(forward(f)) == f`. Derivatives multiply by `i k` in
//! Fourier space; the first derivative drops the Nyquist bin (its sign is
//! ambiguous), the Laplacian keeps it.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::Result;
use crate::grid::{ComplexField, Grid, RealField};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Reusable FFT plans for one grid.
pub struct Spectral {
    grid: Grid,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    /// Per-dimension wavenumbers with the Nyquist bin zeroed, for first derivatives.
    deriv_k: Vec<Vec<f64>>,
    k_squared: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish_non_exhaustive()
    }
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = grid.points().iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = grid.points().iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let deriv_k = (0..grid.dims())
            .map(|d| {
                let n = grid.points()[d];
                let mut k = grid.wavenumbers(d);
                k[n / 2] = 0.0;
                k
            })
            .collect();
        let k_squared = (0..grid.len()).map(|i| grid.k_squared(i)).collect();
        Spectral { grid: grid.clone(), forward, inverse, deriv_k, k_squared }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `|k|²` for every flat Fourier index.
    pub fn k_squared(&self) -> &[f64] {
        &self.k_squared
    }

    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let s = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        assert_eq!(data.len(), self.grid.len(), "buffer does not match grid");
        let points = self.grid.points();
        match points.len() {
            1 => plans[0].process(data),
            _ => {
                let (n0, n1) = (points[0], points[1]);
                // Rows are contiguous; rustfft handles the batch in one call.
                plans[1].process(data);
                let mut t = vec![Complex64::new(0.0, 0.0); data.len()];
                transpose(data, &mut t, n0, n1);
                plans[0].process(&mut t);
                transpose(&t, data, n1, n0);
            }
        }
    }

    /// Spectral gradient of raw samples, one component per dimension.
    pub fn gradient_values(&self, values: &[Complex64]) -> Vec<Vec<Complex64>> {
        let mut hat = values.to_vec();
        self.forward_in_place(&mut hat);
        (0..self.grid.dims())
            .map(|d| {
                let mut comp = hat.clone();
                for (flat, z) in comp.iter_mut().enumerate() {
                    let k = self.deriv_k[d][self.grid.unravel(flat)[d]];
                    *z *= I * k;
                }
                self.inverse_in_place(&mut comp);
                comp
            })
            .collect()
    }

    /// Spectral Laplacian of raw samples.
    pub fn laplacian_values(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut hat = values.to_vec();
        self.forward_in_place(&mut hat);
        hat.iter_mut().zip(&self.k_squared).for_each(|(z, &k2)| *z *= -k2);
        self.inverse_in_place(&mut hat);
        hat
    }

    pub fn gradient(&self, field: &ComplexField) -> Vec<ComplexField> {
        self.gradient_values(field.values())
            .into_iter()
            .map(|v| ComplexField::new(field.grid().clone(), v).expect("same grid"))
            .collect()
    }

    pub fn gradient_real(&self, field: &RealField) -> Vec<RealField> {
        let values: Vec<Complex64> = field.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.gradient_values(&values)
            .into_iter()
            .map(|v| real_field(field.grid(), &v))
            .collect()
    }

    pub fn laplacian(&self, field: &ComplexField) -> ComplexField {
        ComplexField::new(field.grid().clone(), self.laplacian_values(field.values())).expect("same grid")
    }

    pub fn laplacian_real(&self, field: &RealField) -> RealField {
        let values: Vec<Complex64> = field.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        real_field(field.grid(), &self.laplacian_values(&values))
    }

    /// `Σ_d ∂_d f_d` for a vector field given by components.
    pub fn divergence(&self, components: &[RealField]) -> RealField {
        let mut out = vec![0.0; self.grid.len()];
        for (d, comp) in components.iter().enumerate() {
            let mut hat: Vec<Complex64> = comp.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
            self.forward_in_place(&mut hat);
            for (flat, z) in hat.iter_mut().enumerate() {
                *z *= I * self.deriv_k[d][self.grid.unravel(flat)[d]];
            }
            self.inverse_in_place(&mut hat);
            out.iter_mut().zip(&hat).for_each(|(o, z)| *o += z.re);
        }
        RealField::new(self.grid.clone(), out).expect("same grid")
    }
}

fn real_field(grid: &Grid, values: &[Complex64]) -> RealField {
    RealField::new(grid.clone(), values.iter().map(|z| z.re).collect()).expect("same grid")
}

/// `src` is `rows x cols` row-major; `dst` becomes `cols x rows`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const BLOCK: usize = 32;
    for rb in (0..rows).step_by(BLOCK) {
        for cb in (0..cols).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(rows) {
                for c in cb..(cb + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

pub fn fourier_forward(field: &ComplexField) -> ComplexField {
    let mut out = field.clone();
    Spectral::new(field.grid()).forward_in_place(out.values_mut());
    out
}

pub fn fourier_inverse(field: &ComplexField) -> ComplexField {
    let mut out = field.clone();
    Spectral::new(field.grid()).inverse_in_place(out.values_mut());
    out
}

pub fn gradient(field: &ComplexField) -> Vec<ComplexField> {
    Spectral::new(field.grid()).gradient(field)
}

pub fn gradient_real(field: &RealField) -> Vec<RealField> {
    Spectral::new(field.grid()).gradient_real(field)
}

pub fn laplacian(field: &ComplexField) -> ComplexField {
    Spectral::new(field.grid()).laplacian(field)
}

pub fn laplacian_real(field: &RealField) -> RealField {
    Spectral::new(field.grid()).laplacian_real(field)
}

/// `Σ conj(a) b ΔV`.
pub fn inner_product(a: &ComplexField, b: &ComplexField) -> Result<Complex64> {
    a.grid().check_same(b.grid())?;
    let s: Complex64 = a.values().iter().zip(b.values()).map(|(x, y)| x.conj() * y).sum();
    Ok(s * a.grid().cell_volume())
}

/// Fourier-space counterpart of `inner_product(f, f)`: `Σ |f̂|² ΔV / N`.
pub fn parseval_norm_sqr(field: &ComplexField) -> f64 {
    let hat = fourier_forward(field);
    let n = field.grid().len() as f64;
    hat.values().iter().map(|z| z.norm_sqr()).sum::<f64>() * field.grid().cell_volume() / n
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_field(grid: &Grid, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexField::from_fn(grid, |_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn constant_transforms_to_zero_bin() {
        let g = Grid::new(&[3.0, 5.0], &[16, 8]).unwrap();
        let hat = fourier_forward(&ComplexField::from_fn(&g, |_| Complex64::new(1.0, 0.0)));
        assert!((hat.values()[0] - Complex64::new(128.0, 0.0)).norm() < 1e-12);
        assert!(hat.values()[1..].iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn round_trip_is_identity() {
        for g in [Grid::new(&[7.0], &[64]).unwrap(), Grid::new(&[2.0, 9.0], &[32, 16]).unwrap()] {
            let f = random_field(&g, 3);
            let back = fourier_inverse(&fourier_forward(&f));
            assert!(f.max_abs_distance(&back).unwrap() < 1e-12);
        }
    }

    #[test]
    fn plane_wave_occupies_single_bin() {
        let g = Grid::new(&[10.0], &[64]).unwrap();
        let k0 = g.wavenumber(0, 5);
        let f = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, k0 * x[0]));
        // Oracle: direct DFT sum.
        let n = g.len();
        for m in 0..n {
            let direct: Complex64 = (0..n)
                .map(|j| f.values()[j] * Complex64::from_polar(1.0, -2.0 * PI * (j * m) as f64 / n as f64))
                .sum();
            let hat = fourier_forward(&f).values()[m];
            assert!((direct - hat).norm() < 1e-9);
            if m == 5 {
                assert!((hat.norm() - n as f64) < 1e-9);
            } else {
                assert!(hat.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn derivative_of_sine() {
        let l = 6.0;
        let g = Grid::new(&[l], &[64]).unwrap();
        let w = 2.0 * PI / l;
        let f = RealField::from_fn(&g, |x| (w * x[0]).sin());
        let df = &gradient_real(&f)[0];
        let lf = laplacian_real(&f);
        for (i, x) in g.coords(0).into_iter().enumerate() {
            assert!((df.values()[i] - w * (w * x).cos()).abs() < 1e-10);
            assert!((lf.values()[i] + w * w * (w * x).sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn derivative_of_plane_wave() {
        let g = Grid::new(&[4.0], &[32]).unwrap();
        let k = g.wavenumber(0, 3);
        let f = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, k * x[0]));
        let df = &gradient(&f)[0];
        for (a, z) in df.values().iter().zip(f.values()) {
            assert!((a - I * k * z).norm() < 1e-10);
        }
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let g = Grid::new(&[4.0, 4.0], &[16, 16]).unwrap();
        let f = RealField::from_fn(&g, |_| 2.5);
        assert!(gradient_real(&f).iter().all(|c| c.values().iter().all(|v| v.abs() < 1e-13)));
        assert!(laplacian_real(&f).values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn laplacian_of_2d_gaussian() {
        let s = 1.0;
        let g = Grid::new(&[20.0, 20.0], &[64, 64]).unwrap();
        let f = RealField::from_fn(&g, |x| (-(x[0] * x[0] + x[1] * x[1]) / (4.0 * s * s)).exp());
        let lf = laplacian_real(&f);
        let mut worst: f64 = 0.0;
        for i in 0..g.len() {
            let [x, y] = g.position(i);
            let r2 = x * x + y * y;
            // Δ e^{-r²/4s²} = (r²/4s⁴ - 1/s²) e^{-r²/4s²} in 2D.
            let exact = (r2 / (4.0 * s.powi(4)) - 1.0 / (s * s)) * (-r2 / (4.0 * s * s)).exp();
            worst = worst.max((lf.values()[i] - exact).abs());
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn normalized_gaussian_inner_product() {
        let g = Grid::new(&[30.0], &[256]).unwrap();
        let f = ComplexField::from_fn(&g, |x| Complex64::new((-x[0] * x[0] / 4.0).exp(), 0.0)).normalized().unwrap();
        assert!((inner_product(&f, &f).unwrap() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn orthogonal_plane_waves() {
        let g = Grid::new(&[5.0, 3.0], &[16, 16]).unwrap();
        let a = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, g.wavenumber(0, 2) * x[0]));
        let b = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, g.wavenumber(1, 3) * x[1]));
        assert!(inner_product(&a, &b).unwrap().norm() < 1e-12);
    }

    #[test]
    fn inner_product_rejects_grid_mismatch() {
        let a = ComplexField::zeros(&Grid::new(&[1.0], &[8]).unwrap());
        let b = ComplexField::zeros(&Grid::new(&[1.0], &[16]).unwrap());
        assert!(inner_product(&a, &b).is_err());
    }

    #[test]
    fn parseval_and_div_grad() {
        let g = Grid::new(&[6.0, 6.0], &[32, 32]).unwrap();
        let f = random_field(&g, 11);
        let direct = inner_product(&f, &f).unwrap();
        assert!(direct.im.abs() < 1e-12 && direct.re >= 0.0);
        assert!(((parseval_norm_sqr(&f) - direct.re) / direct.re).abs() < 1e-12);

        let g = Grid::new(&[12.0, 12.0], &[64, 64]).unwrap();
        let smooth = RealField::from_fn(&g, |x| (-2.0 * (x[0] - 0.3).powi(2) - 2.0 * x[1].powi(2)).exp());
        let sp = Spectral::new(&g);
        let div_grad = sp.divergence(&sp.gradient_real(&smooth));
        let lap = sp.laplacian_real(&smooth);
        let worst = div_grad.values().iter().zip(lap.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst}");
    }
}
