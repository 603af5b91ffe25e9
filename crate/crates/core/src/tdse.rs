//! Time propagation of a single particle under `H = p²/2m + V(x)`.
//!
//! One Strang step is `e^{-iV dt/2ħ} e^{-iT dt/ħ} e^{-iV dt/2ħ}`, with the
//! kinetic factor applied exactly in Fourier space. Every factor is a pure
//! phase, so the discrete evolution is unitary on the grid.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{config_err, Result};
use crate::grid::{ComplexField, Grid, RealField};
use crate::spectral::Spectral;
use crate::units::Units;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aperture {
    /// Transverse centre of the opening.
    pub center: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Free,
    /// `½ m ω² |x - center|²`.
    Harmonic { omega: f64, center: Vec<f64> },
    /// A slab of `height` centred at `position` along the first axis; in 2D
    /// the slab is open inside each aperture along the second axis.
    HardBarrier { position: f64, thickness: f64, height: f64, apertures: Vec<Aperture> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub spec: PotentialSpec,
    pub field: RealField,
}

pub fn build_potential(spec: &PotentialSpec, grid: &Grid, units: Units) -> Result<Potential> {
    let field = match spec {
        PotentialSpec::Free => RealField::zeros(grid),
        PotentialSpec::Harmonic { omega, center } => {
            check_len("potential.center", center, grid)?;
            if !(omega.is_finite() && *omega > 0.0) {
                return Err(config_err(format!("harmonic omega must be positive, got {omega}")));
            }
            let k = 0.5 * units.mass * omega * omega;
            RealField::from_fn(grid, |x| k * x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum::<f64>())
        }
        PotentialSpec::HardBarrier { position, thickness, height, apertures } => {
            if !(*height > 0.0 && height.is_finite()) {
                return Err(config_err(format!("barrier height must be positive and finite, got {height}")));
            }
            if !(*thickness > 0.0) {
                return Err(config_err(format!("barrier thickness must be positive, got {thickness}")));
            }
            if apertures.iter().any(|a| !(a.width > 0.0)) {
                return Err(config_err("aperture widths must be positive"));
            }
            RealField::from_fn(grid, |x| {
                let inside = (x[0] - position).abs() < 0.5 * thickness;
                let open = x.len() > 1 && apertures.iter().any(|a| (x[1] - a.center).abs() < 0.5 * a.width);
                if inside && !open {
                    *height
                } else {
                    0.0
                }
            })
        }
    };
    Ok(Potential { spec: spec.clone(), field })
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Product of Gaussians; `width` is the position standard deviation of `|ψ|²`.
    Gaussian { center: Vec<f64>, width: Vec<f64>, momentum: Vec<f64> },
    /// `e^{i k·x}`; each `k_d` must lie on the wavenumber grid.
    PlaneWave { k: Vec<f64> },
    /// Two Gaussian sources at transverse offsets `±separation/2` on the line
    /// `x = source`, moving along the first axis with wavenumber `forward_momentum`.
    /// The source at `-separation/2` carries the extra phase `relative_phase`.
    TwoGaussianSlits {
        separation: f64,
        slit_width: f64,
        forward_momentum: f64,
        relative_phase: f64,
        source: f64,
        /// Width along the propagation axis; defaults to `slit_width`.
        longitudinal_width: Option<f64>,
    },
    HarmonicGround { omega: f64, center: Vec<f64> },
    /// Ground state displaced by `displacement`.
    HarmonicCoherent { omega: f64, displacement: Vec<f64> },
    /// `(x + i y)^n e^{-r²/4σ²}` (conjugated for negative winding); 2D only.
    Vortex { center: Vec<f64>, width: f64, winding: i32 },
}

fn check_len(name: &str, v: &[f64], grid: &Grid) -> Result<()> {
    if v.len() != grid.dims() {
        return Err(config_err(format!("{name} needs {} component(s), got {}", grid.dims(), v.len())));
    }
    Ok(())
}

fn gaussian_amplitude(dx: f64, sigma: f64) -> f64 {
    (-dx * dx / (4.0 * sigma * sigma)).exp()
}

pub fn build_initial_state(state: &InitialState, grid: &Grid, units: Units) -> Result<ComplexField> {
    let psi = match state {
        InitialState::Gaussian { center, width, momentum } => {
            check_len("initial.center", center, grid)?;
            check_len("initial.width", width, grid)?;
            check_len("initial.momentum", momentum, grid)?;
            if width.iter().any(|&s| !(s > 0.0)) {
                return Err(config_err("gaussian widths must be positive"));
            }
            ComplexField::from_fn(grid, |x| {
                let mut amp = 1.0;
                let mut phase = 0.0;
                for d in 0..x.len() {
                    amp *= gaussian_amplitude(x[d] - center[d], width[d]);
                    phase += momentum[d] * (x[d] - center[d]);
                }
                Complex64::from_polar(amp, phase)
            })
        }
        InitialState::PlaneWave { k } => {
            check_len("initial.k", k, grid)?;
            for (d, &kd) in k.iter().enumerate() {
                let m = kd * grid.extents()[d] / (2.0 * PI);
                let kmax = PI / grid.spacing(d);
                if (m - m.round()).abs() > 1e-9 || kd.abs() >= kmax {
                    return Err(config_err(format!("plane-wave k[{d}] = {kd} is not on the wavenumber grid")));
                }
            }
            ComplexField::from_fn(grid, |x| Complex64::from_polar(1.0, x.iter().zip(k).map(|(a, b)| a * b).sum()))
        }
        InitialState::TwoGaussianSlits {
            separation,
            slit_width,
            forward_momentum,
            relative_phase,
            source,
            longitudinal_width,
        } => {
            if grid.dims() != 2 {
                return Err(config_err("two_gaussian_slits requires a 2D grid"));
            }
            if !(*separation > 0.0) {
                return Err(config_err(format!("slit separation must be positive, got {separation}")));
            }
            if !(*slit_width > 0.0) {
                return Err(config_err(format!("slit width must be positive, got {slit_width}")));
            }
            let long = longitudinal_width.unwrap_or(*slit_width);
            if !(long > 0.0) {
                return Err(config_err(format!("longitudinal width must be positive, got {long}")));
            }
            let shifted = Complex64::from_polar(1.0, *relative_phase);
            ComplexField::from_fn(grid, |x| {
                let along = gaussian_amplitude(x[0] - source, long);
                let upper = gaussian_amplitude(x[1] - 0.5 * separation, *slit_width);
                let lower = gaussian_amplitude(x[1] + 0.5 * separation, *slit_width);
                (Complex64::new(upper, 0.0) + shifted * lower)
                    * along
                    * Complex64::from_polar(1.0, forward_momentum * (x[0] - source))
            })
        }
        InitialState::HarmonicGround { omega, center } => {
            check_len("initial.center", center, grid)?;
            let sigma = harmonic_width(*omega, units)?;
            ComplexField::from_fn(grid, |x| {
                let amp: f64 = x.iter().zip(center).map(|(a, c)| gaussian_amplitude(a - c, sigma)).product();
                Complex64::new(amp, 0.0)
            })
        }
        InitialState::HarmonicCoherent { omega, displacement } => {
            check_len("initial.displacement", displacement, grid)?;
            let sigma = harmonic_width(*omega, units)?;
            ComplexField::from_fn(grid, |x| {
                let amp: f64 = x.iter().zip(displacement).map(|(a, c)| gaussian_amplitude(a - c, sigma)).product();
                Complex64::new(amp, 0.0)
            })
        }
        InitialState::Vortex { center, width, winding } => {
            if grid.dims() != 2 {
                return Err(config_err("vortex state requires a 2D grid"));
            }
            check_len("initial.center", center, grid)?;
            if !(*width > 0.0) {
                return Err(config_err(format!("vortex width must be positive, got {width}")));
            }
            ComplexField::from_fn(grid, |x| {
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                let z = Complex64::new(dx, if *winding >= 0 { dy } else { -dy });
                z.powi(winding.abs()) * gaussian_amplitude((dx * dx + dy * dy).sqrt(), *width)
            })
        }
    };
    psi.normalized()
}

/// Position standard deviation of the harmonic ground-state density.
fn harmonic_width(omega: f64, units: Units) -> Result<f64> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(config_err(format!("harmonic omega must be positive, got {omega}")));
    }
    Ok((units.hbar / (2.0 * units.mass * omega)).sqrt())
}

/// Largest step keeping the kinetic phase at the Nyquist wavenumber below π:
/// `0.5 m Δx² / (π ħ)` for the finest dimension.
pub fn stable_dt(grid: &Grid, units: Units) -> f64 {
    let dx = (0..grid.dims()).map(|d| grid.spacing(d)).fold(f64::INFINITY, f64::min);
    0.5 * units.mass * dx * dx / (PI * units.hbar)
}

/// Advisory message when `dt` exceeds [`stable_dt`].
pub fn stability_advisory(grid: &Grid, units: Units, dt: f64) -> Option<String> {
    let limit = stable_dt(grid, units);
    (dt > limit).then(|| format!("dt = {dt} exceeds the accuracy advisory {limit:.3e}; high-k modes will be inaccurate"))
}

/// Precomputed phase factors for a fixed potential and step.
pub struct Propagator {
    spectral: Spectral,
    half_potential: Vec<Complex64>,
    full_potential: Vec<Complex64>,
    kinetic: Vec<Complex64>,
}

impl Propagator {
    pub fn new(potential: &RealField, dt: f64, units: Units) -> Self {
        let grid = potential.grid();
        let spectral = Spectral::new(grid);
        let phase = |v: f64, tau: f64| Complex64::from_polar(1.0, -v * tau / units.hbar);
        let half_potential = potential.values().iter().map(|&v| phase(v, 0.5 * dt)).collect();
        let full_potential = potential.values().iter().map(|&v| phase(v, dt)).collect();
        let kinetic = spectral
            .k_squared()
            .iter()
            .map(|&k2| Complex64::from_polar(1.0, -units.hbar * k2 * dt / (2.0 * units.mass)))
            .collect();
        Propagator { spectral, half_potential, full_potential, kinetic }
    }

    fn kinetic(&self, values: &mut [Complex64]) {
        self.spectral.forward_in_place(values);
        values.iter_mut().zip(&self.kinetic).for_each(|(z, p)| *z *= p);
        self.spectral.inverse_in_place(values);
    }

    fn multiply(values: &mut [Complex64], factors: &[Complex64]) {
        values.iter_mut().zip(factors).for_each(|(z, p)| *z *= p);
    }

    /// One Strang step.
    pub fn step(&self, values: &mut [Complex64]) {
        self.steps(values, 1);
    }

    /// `n` consecutive Strang steps with the adjacent half potential kicks fused.
    pub fn steps(&self, values: &mut [Complex64], n: usize) {
        if n == 0 {
            return;
        }
        Self::multiply(values, &self.half_potential);
        for i in 0..n {
            self.kinetic(values);
            if i + 1 < n {
                Self::multiply(values, &self.full_potential);
            }
        }
        Self::multiply(values, &self.half_potential);
    }
}

/// Advances `psi` by one step of length `dt`.
pub fn split_step(psi: &ComplexField, potential: &RealField, dt: f64, units: Units) -> Result<ComplexField> {
    psi.grid().check_same(potential.grid())?;
    if !(dt > 0.0) {
        return Err(config_err(format!("dt must be positive, got {dt}")));
    }
    let mut out = psi.clone();
    Propagator::new(potential, dt, units).step(out.values_mut());
    Ok(out)
}

/// Uniformly spaced wavefunction snapshots of one run.
#[derive(Debug, Clone)]
pub struct Timeline {
    pub snapshots: Vec<ComplexField>,
    pub times: Vec<f64>,
    pub dt: f64,
    pub steps_per_snapshot: usize,
    pub units: Units,
    pub potential: RealField,
    pub warnings: Vec<String>,
}

impl Timeline {
    pub fn grid(&self) -> &Grid {
        self.snapshots[0].grid()
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Time between consecutive snapshots.
    pub fn snapshot_interval(&self) -> f64 {
        self.steps_per_snapshot as f64 * self.dt
    }

    pub fn last(&self) -> &ComplexField {
        self.snapshots.last().expect("timeline has at least one snapshot")
    }
}

/// Number of steps in `total_time`, which must be an integer multiple of `dt`.
pub fn step_count(total_time: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(config_err(format!("dt must be positive, got {dt}")));
    }
    if !(total_time >= 0.0 && total_time.is_finite()) {
        return Err(config_err(format!("total_time must be non-negative, got {total_time}")));
    }
    let steps = (total_time / dt).round();
    if (steps * dt - total_time).abs() > 1e-9 * total_time.max(dt) {
        return Err(config_err(format!("total_time = {total_time} is not an integer multiple of dt = {dt}")));
    }
    Ok(steps as usize)
}

pub fn evolve(
    psi0: &ComplexField,
    potential: &RealField,
    units: Units,
    total_time: f64,
    dt: f64,
    snapshot_stride: usize,
) -> Result<Timeline> {
    psi0.grid().check_same(potential.grid())?;
    let steps = step_count(total_time, dt)?;
    if snapshot_stride == 0 {
        return Err(config_err("snapshot_stride must be at least 1"));
    }
    if steps % snapshot_stride != 0 {
        return Err(config_err(format!(
            "snapshot_stride = {snapshot_stride} does not divide the {steps} solver steps"
        )));
    }
    let mut warnings = Vec::new();
    if let Some(w) = stability_advisory(psi0.grid(), units, dt) {
        log::warn!("{w}");
        warnings.push(w);
    }
    let propagator = Propagator::new(potential, dt, units);
    let count = steps / snapshot_stride;
    let mut snapshots = Vec::with_capacity(count + 1);
    let mut times = Vec::with_capacity(count + 1);
    let mut current = psi0.clone();
    snapshots.push(current.clone());
    times.push(0.0);
    for i in 1..=count {
        propagator.steps(current.values_mut(), snapshot_stride);
        snapshots.push(current.clone());
        times.push(i as f64 * snapshot_stride as f64 * dt);
    }
    Ok(Timeline {
        snapshots,
        times,
        dt,
        steps_per_snapshot: snapshot_stride,
        units,
        potential: potential.clone(),
        warnings,
    })
}

/// `⟨ψ|H|ψ⟩` with the kinetic part evaluated in Fourier space.
pub fn energy(psi: &ComplexField, potential: &RealField, units: Units) -> Result<f64> {
    psi.grid().check_same(potential.grid())?;
    let grid = psi.grid();
    let spectral = Spectral::new(grid);
    let mut hat = psi.values().to_vec();
    spectral.forward_in_place(&mut hat);
    let kinetic: f64 = hat
        .iter()
        .zip(spectral.k_squared())
        .map(|(z, &k2)| z.norm_sqr() * units.hbar * units.hbar * k2 / (2.0 * units.mass))
        .sum::<f64>()
        / grid.len() as f64;
    let potential_part: f64 = psi.values().iter().zip(potential.values()).map(|(z, v)| z.norm_sqr() * v).sum();
    Ok((kinetic + potential_part) * grid.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::position_moments;

    fn line(l: f64, n: usize) -> Grid {
        Grid::new(&[l], &[n]).unwrap()
    }

    #[test]
    fn potentials() {
        let g = line(8.0, 16);
        let free = build_potential(&PotentialSpec::Free, &g, Units::NATURAL).unwrap();
        assert!(free.field.values().iter().all(|&v| v == 0.0));

        let h = build_potential(&PotentialSpec::Harmonic { omega: 1.0, center: vec![0.0] }, &g, Units::NATURAL).unwrap();
        // Sample index 11 sits at x = -4 + 11.5 * 0.5 = 1.75.
        assert!((h.field.values()[11] - 0.5 * 1.75 * 1.75).abs() < 1e-15);
        let at_two = 0.5 * 1.0 * 1.0 * 2.0f64.powi(2);
        assert_eq!(at_two, 2.0);

        let g2 = Grid::new(&[8.0, 8.0], &[32, 32]).unwrap();
        let spec = PotentialSpec::HardBarrier {
            position: 0.0,
            thickness: 1.0,
            height: 50.0,
            apertures: vec![Aperture { center: -2.0, width: 1.0 }, Aperture { center: 2.0, width: 1.0 }],
        };
        let b = build_potential(&spec, &g2, Units::NATURAL).unwrap();
        for i in 0..g2.len() {
            let [x, y] = g2.position(i);
            let expect = if x.abs() < 0.5 && (y + 2.0).abs() >= 0.5 && (y - 2.0).abs() >= 0.5 { 50.0 } else { 0.0 };
            assert_eq!(b.field.values()[i], expect);
        }
        let bad = PotentialSpec::HardBarrier { position: 0.0, thickness: 1.0, height: -1.0, apertures: vec![] };
        assert!(build_potential(&bad, &g2, Units::NATURAL).is_err());
    }

    #[test]
    fn gaussian_moments() {
        let g = line(40.0, 512);
        let s = InitialState::Gaussian { center: vec![0.0], width: vec![1.0], momentum: vec![0.0] };
        let psi = build_initial_state(&s, &g, Units::NATURAL).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        let m = position_moments(&psi.density())[0];
        assert!(m.0.abs() < 1e-8);
        assert!((m.1 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn plane_wave_has_flat_modulus() {
        let g = line(10.0, 64);
        let k = g.wavenumber(0, 3);
        let psi = build_initial_state(&InitialState::PlaneWave { k: vec![k] }, &g, Units::NATURAL).unwrap();
        let first = psi.values()[0].norm();
        assert!(psi.values().iter().all(|z| (z.norm() - first).abs() < 1e-14));
        assert!(build_initial_state(&InitialState::PlaneWave { k: vec![k + 0.1] }, &g, Units::NATURAL).is_err());
    }

    fn slits(phase: f64) -> InitialState {
        InitialState::TwoGaussianSlits {
            separation: 4.0,
            slit_width: 0.5,
            forward_momentum: 3.0,
            relative_phase: phase,
            source: -2.0,
            longitudinal_width: None,
        }
    }

    #[test]
    fn slits_are_mirror_symmetric() {
        let g = Grid::new(&[16.0, 16.0], &[64, 64]).unwrap();
        let rho = build_initial_state(&slits(0.0), &g, Units::NATURAL).unwrap().density();
        let [n0, n1] = [64, 64];
        let mut worst: f64 = 0.0;
        for i in 0..n0 {
            for j in 0..n1 {
                let a = rho.values()[g.index(&[i, j])];
                let b = rho.values()[g.index(&[i, n1 - 1 - j])];
                worst = worst.max((a - b).abs());
            }
        }
        assert!(worst < 1e-12);
    }

    #[test]
    fn invalid_initial_parameters() {
        let g2 = Grid::new(&[16.0, 16.0], &[64, 64]).unwrap();
        let mut s = slits(0.0);
        if let InitialState::TwoGaussianSlits { separation, .. } = &mut s {
            *separation = 0.0;
        }
        assert!(build_initial_state(&s, &g2, Units::NATURAL).is_err());
        let bad = InitialState::Gaussian { center: vec![0.0], width: vec![0.0], momentum: vec![0.0] };
        assert!(build_initial_state(&bad, &line(4.0, 16), Units::NATURAL).is_err());
        assert!(build_initial_state(&slits(0.0), &line(4.0, 16), Units::NATURAL).is_err());
    }

    #[test]
    fn free_plane_wave_step_is_exact_phase() {
        let g = line(10.0, 64);
        let k = g.wavenumber(0, 4);
        let psi = build_initial_state(&InitialState::PlaneWave { k: vec![k] }, &g, Units::NATURAL).unwrap();
        let dt = 0.01;
        let next = split_step(&psi, &RealField::zeros(&g), dt, Units::NATURAL).unwrap();
        let phase = Complex64::from_polar(1.0, -k * k * dt / 2.0);
        let worst = next.values().iter().zip(psi.values()).map(|(a, b)| (a - b * phase).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-12);
    }

    #[test]
    fn step_preserves_norm() {
        let g = Grid::new(&[16.0, 16.0], &[64, 64]).unwrap();
        let psi = build_initial_state(&slits(0.3), &g, Units::NATURAL).unwrap();
        let v = build_potential(&PotentialSpec::Harmonic { omega: 0.7, center: vec![0.5, 0.0] }, &g, Units::NATURAL)
            .unwrap();
        let next = split_step(&psi, &v.field, 0.01, Units::NATURAL).unwrap();
        assert!((next.norm_sqr() - psi.norm_sqr()).abs() < 1e-13);
    }

    #[test]
    fn ground_state_is_stationary_per_step() {
        let g = line(16.0, 128);
        let u = Units::NATURAL;
        let psi = build_initial_state(&InitialState::HarmonicGround { omega: 1.0, center: vec![0.0] }, &g, u).unwrap();
        let v = build_potential(&PotentialSpec::Harmonic { omega: 1.0, center: vec![0.0] }, &g, u).unwrap();
        let next = split_step(&psi, &v.field, 1e-3, u).unwrap();
        let worst = next.values().iter().zip(psi.values()).map(|(a, b)| (a.norm() - b.norm()).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn zero_time_gives_single_snapshot() {
        let g = line(8.0, 32);
        let psi = build_initial_state(&InitialState::HarmonicGround { omega: 1.0, center: vec![0.0] }, &g, Units::NATURAL)
            .unwrap();
        let tl = evolve(&psi, &RealField::zeros(&g), Units::NATURAL, 0.0, 0.01, 1).unwrap();
        assert_eq!(tl.len(), 1);
        assert_eq!(tl.snapshots[0], psi);
    }

    #[test]
    fn evolve_validates_schedule() {
        let g = line(8.0, 32);
        let psi = ComplexField::from_fn(&g, |_| Complex64::new(1.0, 0.0)).normalized().unwrap();
        let v = RealField::zeros(&g);
        assert!(evolve(&psi, &v, Units::NATURAL, 1.0, 0.3, 1).is_err());
        assert!(evolve(&psi, &v, Units::NATURAL, 1.0, 0.1, 3).is_err());
        assert!(evolve(&psi, &v, Units::NATURAL, 1.0, 0.1, 0).is_err());
        let tl = evolve(&psi, &v, Units::NATURAL, 1.0, 0.1, 5).unwrap();
        assert_eq!(tl.times.len(), 3);
        assert_eq!(tl.times[1] - tl.times[0], 5.0 * 0.1);
        // dt well above the advisory is a warning, not an error.
        let tl = evolve(&psi, &v, Units::NATURAL, 1.0, 0.5, 1).unwrap();
        assert_eq!(tl.warnings.len(), 1);
    }
}
