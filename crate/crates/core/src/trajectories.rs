//! Bohm streamlines and stochastic trajectories through a time-dependent
//! guidance field.
//!
//! Bohm trajectories integrate `dx/dt = v(x, t)` with classical RK4.
//! Fluctuating trajectories follow the Euler–Maruyama scheme
//! `x' = x + (v + u) Δt + sqrt(ħ Δt / m) ξ`, where `u = (ħ/2m) ∇ln ρ` is the
//! osmotic drift (optional) and `ξ` is standard normal per dimension.
//! Random streams are derived from `(seed, member index)`, so ensembles are
//! reproducible regardless of how members are scheduled across threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{config_err, Error, Result};
use crate::grid::{Grid, RealField};
use crate::madelung::node_mask;
use crate::spectral::Spectral;
use crate::tdse::Timeline;
use crate::units::Units;

/// Positions are stored as pairs; the second entry is unused (zero) in 1D.
pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrajectoryKind {
    Bohm,
    Fluctuating,
}

impl TrajectoryKind {
    pub fn name(self) -> &'static str {
        match self {
            TrajectoryKind::Bohm => "bohm",
            TrajectoryKind::Fluctuating => "fluctuating",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub times: Vec<f64>,
    pub positions: Vec<Point>,
    /// Noise seed of a fluctuating trajectory.
    pub seed: Option<u64>,
    /// Set when the trajectory left the trusted region; nothing is recorded after that.
    pub exited: bool,
}

impl Trajectory {
    pub fn last_position(&self) -> Point {
        *self.positions.last().expect("trajectory has a start point")
    }

    /// Position at recorded sample `i`, if the trajectory reached it.
    pub fn position_at(&self, i: usize) -> Option<Point> {
        self.positions.get(i).copied()
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble {
    pub kind: TrajectoryKind,
    pub members: Vec<Trajectory>,
    /// Member index and message of members that could not be integrated.
    pub failures: Vec<(usize, String)>,
    pub seed: u64,
    pub count: usize,
    pub dims: usize,
    /// Shared time axis (the snapshot times).
    pub times: Vec<f64>,
}

impl TrajectoryEnsemble {
    pub fn exited_count(&self) -> usize {
        self.members.iter().filter(|m| m.exited).count()
    }
}

/// A velocity field that trajectories can be pushed through.
pub trait Guidance: Sync {
    fn dims(&self) -> usize;
    fn units(&self) -> Units;
    /// `true` when `x` lies inside the computational domain.
    fn contains(&self, x: Point) -> bool;
    /// Bohm velocity at `(x, t)`, plus the osmotic velocity when `osmotic`
    /// is set. `None` means the point is outside the trusted region.
    fn drift(&self, x: Point, t: f64, osmotic: bool) -> Option<Point>;
}

/// Guidance from a closed-form velocity, trusted everywhere. The osmotic
/// flag is ignored.
pub struct AnalyticGuidance<F> {
    pub dims: usize,
    pub units: Units,
    pub velocity: F,
}

impl<F: Fn(Point, f64) -> Point + Sync> Guidance for AnalyticGuidance<F> {
    fn dims(&self) -> usize {
        self.dims
    }

    fn units(&self) -> Units {
        self.units
    }

    fn contains(&self, _x: Point) -> bool {
        true
    }

    fn drift(&self, x: Point, t: f64, _osmotic: bool) -> Option<Point> {
        Some((self.velocity)(x, t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceOptions {
    /// Relative density floor of the node mask.
    pub rho_floor: f64,
    /// Width, in grid cells, of the untrusted band along every edge.
    pub edge_margin: usize,
    /// Precompute the osmotic velocity (needed for fluctuating trajectories).
    pub osmotic: bool,
}

impl Default for GuidanceOptions {
    fn default() -> Self {
        GuidanceOptions { rho_floor: crate::madelung::DEFAULT_RHO_FLOOR, edge_margin: 4, osmotic: true }
    }
}

struct SnapshotFlow {
    velocity: Vec<Vec<f64>>,
    osmotic: Option<Vec<Vec<f64>>>,
    mask: Vec<bool>,
}

/// Velocity fields of every snapshot of a timeline, interpolated bilinearly
/// (linearly in 1D) in space and linearly in time.
pub struct GuidanceTimeline {
    grid: Grid,
    units: Units,
    times: Vec<f64>,
    interval: f64,
    flows: Vec<SnapshotFlow>,
    rho0: RealField,
    options: GuidanceOptions,
}

impl GuidanceTimeline {
    pub fn new(timeline: &Timeline, options: GuidanceOptions) -> Result<Self> {
        let grid = timeline.grid().clone();
        let spectral = Spectral::new(&grid);
        let scale = timeline.units.velocity_scale();
        let flows = timeline
            .snapshots
            .iter()
            .map(|psi| {
                let mask = node_mask(&psi.density(), options.rho_floor)?;
                let grads = spectral.gradient_values(psi.values());
                let ratio = |g: &Vec<Complex64>, part: fn(Complex64) -> f64| -> Vec<f64> {
                    g.iter().zip(psi.values()).map(|(d, z)| scale * part(d / z)).collect()
                };
                let velocity = grads.iter().map(|g| ratio(g, |z| z.im)).collect();
                let osmotic = options.osmotic.then(|| grads.iter().map(|g| ratio(g, |z| z.re)).collect());
                Ok(SnapshotFlow { velocity, osmotic, mask })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GuidanceTimeline {
            grid,
            units: timeline.units,
            times: timeline.times.clone(),
            interval: timeline.snapshot_interval(),
            flows,
            rho0: timeline.snapshots[0].density(),
            options,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn options(&self) -> GuidanceOptions {
        self.options
    }

    /// Density of the first snapshot, the Born-rule sampling target.
    pub fn initial_density(&self) -> &RealField {
        &self.rho0
    }

    /// Trusted interval along `dim`.
    pub fn trusted_range(&self, dim: usize) -> (f64, f64) {
        let m = self.options.edge_margin as f64 * self.grid.spacing(dim);
        (self.grid.lower(dim) + m, self.grid.upper(dim) - m)
    }

    fn trusted(&self, x: Point) -> bool {
        (0..self.grid.dims()).all(|d| {
            let (lo, hi) = self.trusted_range(d);
            x[d] >= lo && x[d] <= hi
        })
    }

    /// Stencil flat indices and weights, or `None` outside the grid.
    fn stencil(&self, x: Point) -> Option<([usize; 4], [f64; 4], usize)> {
        let mut base = [0usize; 2];
        let mut frac = [0.0; 2];
        for d in 0..self.grid.dims() {
            let f = self.grid.fractional_index(d, x[d]);
            let i = f.floor();
            if i < 0.0 || i as usize + 1 >= self.grid.points()[d] {
                return None;
            }
            base[d] = i as usize;
            frac[d] = f - i;
        }
        if self.grid.dims() == 1 {
            Some(([base[0], base[0] + 1, 0, 0], [1.0 - frac[0], frac[0], 0.0, 0.0], 2))
        } else {
            let n1 = self.grid.points()[1];
            let (i, j) = (base[0], base[1]);
            let (s, t) = (frac[0], frac[1]);
            Some((
                [i * n1 + j, (i + 1) * n1 + j, i * n1 + j + 1, (i + 1) * n1 + j + 1],
                [(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t],
                4,
            ))
        }
    }

    /// Bounding snapshot pair and linear weight for time `t`.
    fn bracket(&self, t: f64) -> (usize, usize, f64) {
        if self.flows.len() == 1 {
            return (0, 0, 0.0);
        }
        let pos = ((t - self.times[0]) / self.interval).clamp(0.0, (self.flows.len() - 1) as f64);
        let k = (pos.floor() as usize).min(self.flows.len() - 2);
        (k, k + 1, pos - k as f64)
    }

    /// Velocity of snapshot `k` at `x` (no time interpolation).
    pub fn velocity_at_snapshot(&self, k: usize, x: Point) -> Option<Point> {
        if !self.trusted(x) {
            return None;
        }
        let (idx, w, n) = self.stencil(x)?;
        self.sample(&self.flows[k], &idx[..n], &w[..n], false)
    }

    fn sample(&self, flow: &SnapshotFlow, idx: &[usize], w: &[f64], osmotic: bool) -> Option<Point> {
        if idx.iter().any(|&i| flow.mask[i]) {
            return None;
        }
        let mut out = [0.0; 2];
        for (d, o) in out.iter_mut().enumerate().take(self.grid.dims()) {
            let mut v: f64 = idx.iter().zip(w).map(|(&i, &wi)| wi * flow.velocity[d][i]).sum();
            if osmotic {
                let u = flow.osmotic.as_ref()?;
                v += idx.iter().zip(w).map(|(&i, &wi)| wi * u[d][i]).sum::<f64>();
            }
            *o = v;
        }
        Some(out)
    }
}

impl Guidance for GuidanceTimeline {
    fn dims(&self) -> usize {
        self.grid.dims()
    }

    fn units(&self) -> Units {
        self.units
    }

    fn contains(&self, x: Point) -> bool {
        (0..self.grid.dims()).all(|d| x[d] >= self.grid.lower(d) && x[d] <= self.grid.upper(d))
    }

    fn drift(&self, x: Point, t: f64, osmotic: bool) -> Option<Point> {
        if !self.trusted(x) {
            return None;
        }
        let (idx, w, n) = self.stencil(x)?;
        let (k0, k1, a) = self.bracket(t);
        let v0 = self.sample(&self.flows[k0], &idx[..n], &w[..n], osmotic)?;
        if k0 == k1 {
            return Some(v0);
        }
        let v1 = self.sample(&self.flows[k1], &idx[..n], &w[..n], osmotic)?;
        Some([(1.0 - a) * v0[0] + a * v1[0], (1.0 - a) * v0[1] + a * v1[1]])
    }
}

fn axpy(x: Point, h: f64, v: Point) -> Point {
    [x[0] + h * v[0], x[1] + h * v[1]]
}

fn check_start<G: Guidance + ?Sized>(field: &G, x0: Point) -> Result<()> {
    if !(x0[0].is_finite() && x0[1].is_finite()) || !field.contains(x0) {
        return Err(config_err(format!("start position {:?} is outside the domain", &x0[..field.dims()])));
    }
    Ok(())
}

/// RK4 integration of `dx/dt = v(x, t)`, recording the position at each of
/// `times` with `substeps` RK4 steps between consecutive records.
pub fn integrate_rk4<G: Guidance + ?Sized>(field: &G, x0: Point, times: &[f64], substeps: usize) -> Result<Trajectory> {
    check_start(field, x0)?;
    let substeps = substeps.max(1);
    let mut traj = Trajectory { kind: TrajectoryKind::Bohm, times: vec![], positions: vec![], seed: None, exited: false };
    if field.drift(x0, times[0], false).is_none() {
        traj.times.push(times[0]);
        traj.positions.push(x0);
        traj.exited = true;
        return Ok(traj);
    }
    traj.times.push(times[0]);
    traj.positions.push(x0);
    let mut x = x0;
    'outer: for w in times.windows(2) {
        let h = (w[1] - w[0]) / substeps as f64;
        for s in 0..substeps {
            let t = w[0] + s as f64 * h;
            let step = (|| {
                let k1 = field.drift(x, t, false)?;
                let k2 = field.drift(axpy(x, 0.5 * h, k1), t + 0.5 * h, false)?;
                let k3 = field.drift(axpy(x, 0.5 * h, k2), t + 0.5 * h, false)?;
                let k4 = field.drift(axpy(x, h, k3), t + h, false)?;
                Some([
                    x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                    x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
                ])
            })();
            match step {
                Some(next) => x = next,
                None => {
                    traj.exited = true;
                    break 'outer;
                }
            }
        }
        if field.drift(x, w[1], false).is_none() {
            traj.exited = true;
            break;
        }
        traj.times.push(w[1]);
        traj.positions.push(x);
    }
    Ok(traj)
}

/// Euler–Maruyama integration with noise variance `ħΔt/m` per dimension.
pub fn integrate_stochastic<G: Guidance + ?Sized>(
    field: &G,
    x0: Point,
    times: &[f64],
    substeps: usize,
    seed: u64,
    osmotic: bool,
) -> Result<Trajectory> {
    check_start(field, x0)?;
    let substeps = substeps.max(1);
    let units = field.units();
    let dims = field.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut traj = Trajectory {
        kind: TrajectoryKind::Fluctuating,
        times: vec![times[0]],
        positions: vec![x0],
        seed: Some(seed),
        exited: false,
    };
    if field.drift(x0, times[0], osmotic).is_none() {
        traj.exited = true;
        return Ok(traj);
    }
    let mut x = x0;
    'outer: for w in times.windows(2) {
        let h = (w[1] - w[0]) / substeps as f64;
        let amplitude = (units.hbar * h / units.mass).sqrt();
        for s in 0..substeps {
            let t = w[0] + s as f64 * h;
            let Some(b) = field.drift(x, t, osmotic) else {
                traj.exited = true;
                break 'outer;
            };
            for d in 0..dims {
                let xi: f64 = rng.sample(StandardNormal);
                x[d] += b[d] * h + amplitude * xi;
            }
        }
        if field.drift(x, w[1], osmotic).is_none() {
            traj.exited = true;
            break;
        }
        traj.times.push(w[1]);
        traj.positions.push(x);
    }
    Ok(traj)
}

pub fn integrate_bohm(timeline: &GuidanceTimeline, x0: Point, substeps: usize) -> Result<Trajectory> {
    integrate_rk4(timeline, x0, timeline.times(), substeps)
}

/// Fluctuating trajectory; the osmotic drift is used when the guidance
/// timeline was built with it.
pub fn fluctuating_trajectory(timeline: &GuidanceTimeline, x0: Point, seed: u64, substeps: usize) -> Result<Trajectory> {
    integrate_stochastic(timeline, x0, timeline.times(), substeps, seed, timeline.options.osmotic)
}

/// Per-member seed derived from the ensemble seed (SplitMix64 finalizer).
pub fn member_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Inverse CDF of the density `a(1-s) + b s` on `[0, 1]`.
fn linear_inverse(a: f64, b: f64, u: f64) -> f64 {
    if u <= 0.0 || a + b <= 0.0 {
        return u.max(0.0);
    }
    let s = u * (a + b) / (a + (a * a + (b - a) * (a + b) * u).sqrt());
    s.clamp(0.0, 1.0)
}

/// Picks a periodic linear segment by mass and a fractional offset inside it.
fn sample_periodic_linear(values: &[f64], cdf: &mut Vec<f64>, u_segment: f64, u_inner: f64) -> (usize, f64) {
    let n = values.len();
    cdf.clear();
    let mut acc = 0.0;
    for j in 0..n {
        acc += 0.5 * (values[j] + values[(j + 1) % n]);
        cdf.push(acc);
    }
    let target = u_segment * acc;
    let j = cdf.partition_point(|&c| c <= target).min(n - 1);
    let (a, b) = (values[j], values[(j + 1) % n]);
    (j, linear_inverse(a, b, u_inner))
}

fn wrap(grid: &Grid, d: usize, x: f64) -> f64 {
    if x >= grid.upper(d) {
        x - grid.extents()[d]
    } else {
        x
    }
}

/// Draws `count` i.i.d. positions from the (bi)linear interpolant of `rho0`,
/// treating the grid as periodic.
pub fn sample_initial_positions(rho0: &RealField, count: usize, seed: u64) -> Result<Vec<Point>> {
    if rho0.values().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(config_err("sampling density must be finite and non-negative"));
    }
    if !(rho0.values().iter().sum::<f64>() > 0.0) {
        return Err(Error::Degenerate("sampling density vanishes everywhere".into()));
    }
    let grid = rho0.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cdf = Vec::new();
    let mut out = Vec::with_capacity(count);
    match grid.dims() {
        1 => {
            for _ in 0..count {
                let (j, s) = sample_periodic_linear(rho0.values(), &mut cdf, rng.random(), rng.random());
                out.push([wrap(grid, 0, grid.coord(0, j) + s * grid.spacing(0)), 0.0]);
            }
        }
        _ => {
            let (n0, n1) = (grid.points()[0], grid.points()[1]);
            let v = rho0.values();
            let rows: Vec<f64> = (0..n0).map(|i| v[i * n1..(i + 1) * n1].iter().sum()).collect();
            let mut row_cdf = Vec::new();
            let mut blended = vec![0.0; n1];
            for _ in 0..count {
                let (i, s) = sample_periodic_linear(&rows, &mut row_cdf, rng.random(), rng.random());
                let next = (i + 1) % n0;
                for (j, b) in blended.iter_mut().enumerate() {
                    *b = (1.0 - s) * v[i * n1 + j] + s * v[next * n1 + j];
                }
                let (j, t) = sample_periodic_linear(&blended, &mut cdf, rng.random(), rng.random());
                out.push([
                    wrap(grid, 0, grid.coord(0, i) + s * grid.spacing(0)),
                    wrap(grid, 1, grid.coord(1, j) + t * grid.spacing(1)),
                ]);
            }
        }
    }
    Ok(out)
}

/// Samples `count` starts from the first snapshot's density and integrates
/// each member. Members run in parallel; results are in index order.
pub fn run_ensemble(
    timeline: &GuidanceTimeline,
    count: usize,
    kind: TrajectoryKind,
    seed: u64,
    substeps: usize,
) -> Result<TrajectoryEnsemble> {
    if count == 0 {
        return Err(config_err("ensemble count must be at least 1"));
    }
    if kind == TrajectoryKind::Fluctuating && !timeline.options.osmotic {
        log::info!("fluctuating ensemble without osmotic drift does not preserve the density");
    }
    let starts = sample_initial_positions(timeline.initial_density(), count, seed)?;
    let results: Vec<Result<Trajectory>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, &x0)| match kind {
            TrajectoryKind::Bohm => integrate_bohm(timeline, x0, substeps),
            TrajectoryKind::Fluctuating => fluctuating_trajectory(timeline, x0, member_seed(seed, i), substeps),
        })
        .collect();
    let mut members = Vec::with_capacity(count);
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => members.push(t),
            Err(e) => {
                log::warn!("ensemble member {i} failed: {e}");
                failures.push((i, e.to_string()));
            }
        }
    }
    Ok(TrajectoryEnsemble {
        kind,
        members,
        failures,
        seed,
        count,
        dims: timeline.dims(),
        times: timeline.times().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(grid: &Grid) -> RealField {
        RealField::from_fn(grid, |_| 1.0)
    }

    #[test]
    fn linear_inverse_is_the_cdf_inverse() {
        for (a, b) in [(1.0, 1.0), (0.0, 2.0), (3.0, 0.5), (2.0, 0.0)] {
            for u in [0.0, 0.1, 0.5, 0.93, 1.0] {
                let s: f64 = linear_inverse(a, b, u);
                let cdf = (a * s + 0.5 * (b - a) * s * s) / (0.5 * (a + b));
                assert!((cdf - u).abs() < 1e-12, "{a} {b} {u}");
            }
        }
    }

    #[test]
    fn uniform_sampling_mean() {
        let l = 10.0;
        let g = Grid::new(&[l], &[64]).unwrap();
        let n = 20_000;
        let xs = sample_initial_positions(&uniform(&g), n, 5).unwrap();
        let mean = xs.iter().map(|x| x[0] - g.lower(0)).sum::<f64>() / n as f64;
        let tol = 3.0 * (l / 12f64.sqrt()) / (n as f64).sqrt();
        assert!((mean - l / 2.0).abs() < tol, "{mean}");
        assert!(xs.iter().all(|x| x[0] >= g.lower(0) && x[0] < g.upper(0)));
    }

    #[test]
    fn gaussian_sampling_variance() {
        let g = Grid::new(&[20.0], &[256]).unwrap();
        let s = 1.3;
        let rho = RealField::from_fn(&g, |x| (-x[0] * x[0] / (2.0 * s * s)).exp());
        let xs = sample_initial_positions(&rho, 10_000, 9).unwrap();
        let var = xs.iter().map(|x| x[0] * x[0]).sum::<f64>() / xs.len() as f64;
        assert!((var / (s * s) - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn sampling_is_deterministic_and_validated() {
        let g = Grid::new(&[4.0, 4.0], &[16, 16]).unwrap();
        let rho = RealField::from_fn(&g, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp());
        assert_eq!(sample_initial_positions(&rho, 50, 1).unwrap(), sample_initial_positions(&rho, 50, 1).unwrap());
        assert_ne!(sample_initial_positions(&rho, 50, 1).unwrap(), sample_initial_positions(&rho, 50, 2).unwrap());
        assert!(matches!(sample_initial_positions(&RealField::zeros(&g), 5, 1), Err(Error::Degenerate(_))));
        let mut neg = rho.clone();
        neg.values_mut()[3] = -1.0;
        assert!(sample_initial_positions(&neg, 5, 1).is_err());
    }

    #[test]
    fn member_seeds_differ() {
        let a: Vec<u64> = (0..100).map(|i| member_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort();
        b.dedup();
        assert_eq!(b.len(), 100);
        assert_ne!(member_seed(7, 0), member_seed(8, 0));
    }

    #[test]
    fn constant_field_moves_rigidly() {
        let field = AnalyticGuidance { dims: 2, units: Units::NATURAL, velocity: |_x: Point, _t: f64| [0.3, -1.2] };
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let tr = integrate_rk4(&field, [1.0, 2.0], &times, 3).unwrap();
        for (t, x) in tr.times.iter().zip(&tr.positions) {
            assert!((x[0] - (1.0 + 0.3 * t)).abs() < 1e-12);
            assert!((x[1] - (2.0 - 1.2 * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn stochastic_paths_repeat_with_seed() {
        let field = AnalyticGuidance { dims: 1, units: Units::NATURAL, velocity: |x: Point, _t: f64| [-x[0], 0.0] };
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
        let a = integrate_stochastic(&field, [0.5, 0.0], &times, 4, 42, false).unwrap();
        let b = integrate_stochastic(&field, [0.5, 0.0], &times, 4, 42, false).unwrap();
        let c = integrate_stochastic(&field, [0.5, 0.0], &times, 4, 43, false).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.positions, c.positions);
        assert_eq!(a.seed, Some(42));
    }
}
