//! Quantitative checks on timelines and trajectory ensembles: fringe
//! geometry, quantum-potential canyons, streamline undulation, uncertainty
//! products and ensemble-versus-density agreement.

use std::f64::consts::PI;

use crate::error::{config_err, Error, Result};
use crate::grid::{ComplexField, Grid, RealField};
use crate::madelung::decompose_with;
use crate::spectral::Spectral;
use crate::tdse::Timeline;
use crate::trajectories::{integrate_bohm, integrate_stochastic, Guidance, GuidanceTimeline, Point, Trajectory, TrajectoryEnsemble};
use crate::units::Units;

/// Mean and variance of each coordinate under the normalized density.
pub fn position_moments(rho: &RealField) -> Vec<(f64, f64)> {
    let grid = rho.grid();
    let total: f64 = rho.values().iter().sum();
    (0..grid.dims())
        .map(|d| {
            let (mut m1, mut m2) = (0.0, 0.0);
            for (i, &r) in rho.values().iter().enumerate() {
                let x = grid.position(i)[d];
                m1 += r * x;
                m2 += r * x * x;
            }
            let mean = m1 / total;
            (mean, (m2 / total - mean * mean).max(0.0))
        })
        .collect()
}

/// Mean and variance of each momentum component `ħk` under `|ψ̂(k)|²`.
pub fn momentum_moments(psi: &ComplexField, units: Units) -> Vec<(f64, f64)> {
    let grid = psi.grid();
    let mut data = psi.values().to_vec();
    Spectral::new(grid).forward_in_place(&mut data);
    let weights: Vec<f64> = data.iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = weights.iter().sum();
    (0..grid.dims())
        .map(|d| {
            let (mut m1, mut m2) = (0.0, 0.0);
            for (i, &w) in weights.iter().enumerate() {
                let p = units.hbar * grid.wavenumber(d, grid.unravel(i)[d]);
                m1 += w * p;
                m2 += w * p * p;
            }
            let mean = m1 / total;
            (mean, (m2 / total - mean * mean).max(0.0))
        })
        .collect()
}

/// Half the L1 distance between two histograms, each normalized first.
pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!("histograms have {} and {} bins", p.len(), q.len())));
    }
    let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    if !(sp > 0.0 && sq > 0.0) {
        return Err(Error::Degenerate("empty histogram".into()));
    }
    let tv = 0.5 * p.iter().zip(q).map(|(a, b)| (a / sp - b / sq).abs()).sum::<f64>();
    Ok(tv.min(1.0))
}

/// Local minima and maxima of a sampled profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Extremum {
    Min,
    Max,
}

fn is_extremum(v: &[f64], i: usize, kind: Extremum) -> bool {
    let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
    match kind {
        Extremum::Min => b < a && b <= c,
        Extremum::Max => b > a && b >= c,
    }
}

/// Sub-grid offset, in samples, of the vertex of the parabola through three points.
fn parabolic_offset(a: f64, b: f64, c: f64) -> f64 {
    let den = a - 2.0 * b + c;
    if den == 0.0 {
        0.0
    } else {
        (0.5 * (a - c) / den).clamp(-0.5, 0.5)
    }
}

/// Positions of interior local minima of a uniformly sampled profile, with
/// quadratic refinement. Non-finite samples are skipped.
pub fn local_minima(coords: &[f64], values: &[f64]) -> Vec<f64> {
    extrema(coords, values, Extremum::Min)
}

fn extrema(coords: &[f64], values: &[f64], kind: Extremum) -> Vec<f64> {
    let h = if coords.len() > 1 { coords[1] - coords[0] } else { 0.0 };
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i - 1..=i + 1].iter().all(|v| v.is_finite()) && is_extremum(values, i, kind))
        .map(|i| coords[i] + h * parabolic_offset(values[i - 1], values[i], values[i + 1]))
        .collect()
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn adjacent_spacing(points: &[f64]) -> Option<f64> {
    median(points.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Values of a 2D field along the line `x = screen`, interpolated linearly
/// between the two neighbouring rows. NaN propagates.
pub fn screen_line(field: &RealField, screen: f64) -> Result<Vec<f64>> {
    let grid = field.grid();
    if grid.dims() != 2 {
        return Err(config_err("screen profiles need a 2D grid"));
    }
    if !(screen >= grid.coord(0, 0) && screen <= grid.coord(0, grid.points()[0] - 1)) {
        return Err(config_err(format!(
            "screen position {screen} is outside the sampled range [{}, {}]",
            grid.coord(0, 0),
            grid.coord(0, grid.points()[0] - 1)
        )));
    }
    let f = grid.fractional_index(0, screen);
    let i = (f.floor() as usize).min(grid.points()[0] - 2);
    let w = f - i as f64;
    let n1 = grid.points()[1];
    let v = field.values();
    Ok((0..n1).map(|j| (1.0 - w) * v[i * n1 + j] + w * v[(i + 1) * n1 + j]).collect())
}

/// Source-plane geometry of a two-slit state, for the predicted spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlitGeometry {
    pub separation: f64,
    /// Longitudinal wavenumber of the packets.
    pub forward_wavenumber: f64,
    /// Longitudinal coordinate of the slit plane.
    pub source: f64,
}

/// Small-angle two-source fringe spacing `λL/d`, with `λ = 2πħ/(m v)`.
pub fn predicted_fringe_spacing(units: Units, forward_velocity: f64, separation: f64, distance: f64) -> f64 {
    let lambda = 2.0 * PI * units.hbar / (units.mass * forward_velocity);
    lambda * distance / separation
}

#[derive(Debug, Clone)]
pub struct FringeProfile {
    pub screen: f64,
    pub time: f64,
    /// Transverse sample coordinates.
    pub coords: Vec<f64>,
    pub density: Vec<f64>,
    pub maxima: Vec<f64>,
    /// Minima strictly between the first and last maximum.
    pub minima: Vec<f64>,
    /// Median spacing of adjacent minima (of maxima if fewer than two minima).
    pub spacing: Option<f64>,
    pub predicted_spacing: Option<f64>,
    pub warnings: Vec<String>,
}

impl FringeProfile {
    pub fn relative_spacing_error(&self) -> Option<f64> {
        Some((self.spacing? - self.predicted_spacing?).abs() / self.predicted_spacing?)
    }

    /// Maximum closest to the transverse origin.
    pub fn central_maximum(&self) -> Option<f64> {
        self.maxima.iter().copied().min_by(|a, b| a.abs().total_cmp(&b.abs()))
    }

    /// Minimum closest to the transverse origin.
    pub fn central_minimum(&self) -> Option<f64> {
        self.minima.iter().copied().min_by(|a, b| a.abs().total_cmp(&b.abs()))
    }
}

/// Maxima below this fraction of the peak density are treated as envelope tail.
pub const FRINGE_DENSITY_CUTOFF: f64 = 1e-3;

/// Transverse density profile of the last snapshot at `x = screen`.
pub fn fringe_profile(timeline: &Timeline, screen: f64, geometry: Option<&SlitGeometry>) -> Result<FringeProfile> {
    fringe_profile_at(timeline, timeline.len() - 1, screen, geometry)
}

pub fn fringe_profile_at(
    timeline: &Timeline,
    snapshot: usize,
    screen: f64,
    geometry: Option<&SlitGeometry>,
) -> Result<FringeProfile> {
    let psi = timeline
        .snapshots
        .get(snapshot)
        .ok_or_else(|| config_err(format!("snapshot {snapshot} out of range")))?;
    let grid = psi.grid();
    let density = screen_line(&psi.density(), screen)?;
    let coords = grid.coords(1);
    let peak = density.iter().copied().fold(0.0, f64::max);
    let maxima: Vec<f64> = (1..density.len() - 1)
        .filter(|&i| density[i] >= FRINGE_DENSITY_CUTOFF * peak && is_extremum(&density, i, Extremum::Max))
        .map(|i| coords[i] + grid.spacing(1) * parabolic_offset(density[i - 1], density[i], density[i + 1]))
        .collect();
    let minima: Vec<f64> = match (maxima.first(), maxima.last()) {
        (Some(&lo), Some(&hi)) => extrema(&coords, &density, Extremum::Min)
            .into_iter()
            .filter(|&y| y > lo && y < hi)
            .collect(),
        _ => vec![],
    };
    let mut warnings = Vec::new();
    if maxima.len() < 2 {
        let msg = format!("underdeveloped pattern: {} maxima at x = {screen}", maxima.len());
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let spacing = if minima.len() >= 2 { adjacent_spacing(&minima) } else { adjacent_spacing(&maxima) };
    let predicted_spacing = geometry.map(|g| {
        let v = timeline.units.hbar * g.forward_wavenumber / timeline.units.mass;
        predicted_fringe_spacing(timeline.units, v, g.separation, screen - g.source)
    });
    Ok(FringeProfile {
        screen,
        time: timeline.times[snapshot],
        coords,
        density,
        maxima,
        minima,
        spacing,
        predicted_spacing,
        warnings,
    })
}

/// Quantum potential of every snapshot, NaN on the node mask.
pub fn canyon_map(timeline: &Timeline, rho_floor: f64) -> Result<Vec<RealField>> {
    let spectral = Spectral::new(timeline.grid());
    timeline
        .snapshots
        .iter()
        .map(|psi| Ok(decompose_with(&spectral, psi, timeline.units, rho_floor)?.v_q))
        .collect()
}

/// Positions of quantum-potential troughs along a sampled line. A run of
/// masked (NaN) samples counts as one trough at its centre.
pub fn canyon_troughs(coords: &[f64], v_q: &[f64]) -> Vec<f64> {
    let mut out = local_minima(coords, v_q);
    let mut i = 0;
    while i < v_q.len() {
        if v_q[i].is_nan() {
            let start = i;
            while i < v_q.len() && v_q[i].is_nan() {
                i += 1;
            }
            if start > 0 && i < v_q.len() {
                out.push(0.5 * (coords[start] + coords[i - 1]));
            }
        } else {
            i += 1;
        }
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

#[derive(Debug, Clone)]
pub struct CanyonSummary {
    pub screen: f64,
    pub density_minima: Vec<f64>,
    /// Troughs inside the fringe window (first to last density maximum).
    pub troughs: Vec<f64>,
    /// For each density minimum, the distance to the nearest trough.
    pub offsets: Vec<f64>,
    pub spacing: f64,
}

impl CanyonSummary {
    pub fn max_offset(&self) -> f64 {
        self.offsets.iter().copied().fold(0.0, f64::max)
    }

    /// Every density minimum has a trough within `cells` grid spacings.
    pub fn coincide_within(&self, cells: f64) -> bool {
        !self.density_minima.is_empty() && self.offsets.iter().all(|&o| o <= cells * self.spacing)
    }
}

/// Compares quantum-potential troughs with density minima along the screen
/// line of the last snapshot.
pub fn canyon_summary(timeline: &Timeline, screen: f64, rho_floor: f64) -> Result<CanyonSummary> {
    let profile = fringe_profile(timeline, screen, None)?;
    let spectral = Spectral::new(timeline.grid());
    let v_q = decompose_with(&spectral, timeline.last(), timeline.units, rho_floor)?.v_q;
    let line = screen_line(&v_q, screen)?;
    let window = (profile.maxima.first().copied(), profile.maxima.last().copied());
    let troughs: Vec<f64> = match window {
        (Some(lo), Some(hi)) => canyon_troughs(&profile.coords, &line).into_iter().filter(|&y| y > lo && y < hi).collect(),
        _ => vec![],
    };
    let offsets = profile
        .minima
        .iter()
        .map(|m| troughs.iter().map(|t| (t - m).abs()).fold(f64::INFINITY, f64::min))
        .collect();
    Ok(CanyonSummary {
        screen,
        density_minima: profile.minima,
        troughs,
        offsets,
        spacing: timeline.grid().spacing(1),
    })
}

/// `count` evenly spaced seeds on the segment from `start` to `end`, at
/// the midpoints of equal sub-segments.
pub fn seed_line(start: Point, end: Point, count: usize) -> Vec<Point> {
    (0..count)
        .map(|i| {
            let s = (i as f64 + 0.5) / count as f64;
            [start[0] + s * (end[0] - start[0]), start[1] + s * (end[1] - start[1])]
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct StreamlineMap {
    pub trajectories: Vec<Trajectory>,
    /// Sign changes of the transverse velocity along each trajectory.
    pub undulations: Vec<usize>,
}

/// Sign changes of the transverse velocity (last coordinate) sampled at the
/// recorded points; speeds below `1e-9` of the largest are ignored.
pub fn undulation(guidance: &GuidanceTimeline, trajectory: &Trajectory) -> usize {
    let d = guidance.dims() - 1;
    let v: Vec<f64> = trajectory
        .positions
        .iter()
        .enumerate()
        .filter_map(|(k, &x)| guidance.velocity_at_snapshot(k, x).map(|v| v[d]))
        .collect();
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut last = 0.0f64;
    let mut changes = 0;
    for &s in v.iter().filter(|s| s.abs() > 1e-9 * vmax) {
        if last != 0.0 && s.signum() != last {
            changes += 1;
        }
        last = s.signum();
    }
    changes
}

pub fn streamline_map(guidance: &GuidanceTimeline, seeds: &[Point], substeps: usize) -> Result<StreamlineMap> {
    let trajectories = seeds
        .iter()
        .map(|&x0| integrate_bohm(guidance, x0, substeps))
        .collect::<Result<Vec<_>>>()?;
    let undulations = trajectories.iter().map(|t| undulation(guidance, t)).collect();
    Ok(StreamlineMap { trajectories, undulations })
}

/// Spreads per snapshot, indexed `[snapshot][dimension]`.
#[derive(Debug, Clone)]
pub struct DispersionReport {
    pub times: Vec<f64>,
    pub delta_x: Vec<Vec<f64>>,
    pub delta_p_quantum: Vec<Vec<f64>>,
    /// `m ·` std of Bohm velocities at the ensemble positions.
    pub delta_p_bohm: Vec<Vec<f64>>,
    /// Number of members present at each snapshot.
    pub members: Vec<usize>,
}

impl DispersionReport {
    pub fn quantum_products(&self) -> Vec<Vec<f64>> {
        products(&self.delta_x, &self.delta_p_quantum)
    }

    pub fn bohm_products(&self) -> Vec<Vec<f64>> {
        products(&self.delta_x, &self.delta_p_bohm)
    }
}

fn products(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter().zip(b).map(|(x, p)| x.iter().zip(p).map(|(x, p)| x * p).collect()).collect()
}

fn std_dev(samples: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = samples.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = samples.clone().sum::<f64>() / n as f64;
    (samples.map(|s| (s - mean) * (s - mean)).sum::<f64>() / n as f64).sqrt()
}

pub fn dispersion_report(
    timeline: &Timeline,
    guidance: &GuidanceTimeline,
    ensemble: &TrajectoryEnsemble,
) -> Result<DispersionReport> {
    if ensemble.times != timeline.times || guidance.times() != timeline.times.as_slice() {
        return Err(config_err("ensemble and timeline have different time axes"));
    }
    let units = timeline.units;
    let dims = timeline.grid().dims();
    let mut report = DispersionReport {
        times: timeline.times.clone(),
        delta_x: vec![],
        delta_p_quantum: vec![],
        delta_p_bohm: vec![],
        members: vec![],
    };
    for (k, psi) in timeline.snapshots.iter().enumerate() {
        report.delta_x.push(position_moments(&psi.density()).iter().map(|m| m.1.sqrt()).collect());
        report.delta_p_quantum.push(momentum_moments(psi, units).iter().map(|m| m.1.sqrt()).collect());
        let velocities: Vec<Point> = ensemble
            .members
            .iter()
            .filter_map(|m| m.position_at(k))
            .filter_map(|x| guidance.velocity_at_snapshot(k, x))
            .collect();
        report.members.push(velocities.len());
        report
            .delta_p_bohm
            .push((0..dims).map(|d| units.mass * std_dev(velocities.iter().map(|v| v[d]))).collect());
    }
    Ok(report)
}

/// `m ·` std, per dimension, of the one-step effective velocity
/// `(x₁ − x₀)/Δt` of fluctuating steps started at `starts`.
pub fn step_velocity_spread<G: Guidance + ?Sized>(
    guidance: &G,
    starts: &[Point],
    t0: f64,
    dt: f64,
    seed: u64,
    osmotic: bool,
) -> Result<Vec<f64>> {
    let mut velocities = Vec::with_capacity(starts.len());
    for (i, &x0) in starts.iter().enumerate() {
        let tr = integrate_stochastic(guidance, x0, &[t0, t0 + dt], 1, crate::trajectories::member_seed(seed, i), osmotic)?;
        if let Some(x1) = tr.position_at(1) {
            velocities.push([(x1[0] - x0[0]) / dt, (x1[1] - x0[1]) / dt]);
        }
    }
    let m = guidance.units().mass;
    Ok((0..guidance.dims()).map(|d| m * std_dev(velocities.iter().map(|v| v[d]))).collect())
}

/// Binning used to compare ensembles with densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramSpec {
    pub bins: [usize; 2],
    /// Cells excluded along every edge (the trusted domain).
    pub edge_margin: usize,
}

impl HistogramSpec {
    pub fn for_dims(dims: usize, edge_margin: usize) -> Self {
        let bins = if dims == 1 { [64, 1] } else { [32, 32] };
        HistogramSpec { bins, edge_margin }
    }
}

/// Bin edges on the trusted range of one dimension.
struct Axis {
    lo: f64,
    width: f64,
    bins: usize,
}

impl Axis {
    fn new(grid: &Grid, d: usize, bins: usize, margin: usize) -> Result<Self> {
        let m = margin as f64 * grid.spacing(d);
        let (lo, hi) = (grid.lower(d) + m, grid.upper(d) - m);
        if !(hi > lo) || bins == 0 {
            return Err(config_err("histogram range is empty"));
        }
        Ok(Axis { lo, width: (hi - lo) / bins as f64, bins })
    }

    fn bin(&self, x: f64) -> Option<usize> {
        let b = ((x - self.lo) / self.width).floor();
        (b >= 0.0 && (b as usize) < self.bins).then_some(b as usize)
    }

    /// `(bin, fraction)` pairs covering the cell `[a, b]`.
    fn overlaps(&self, a: f64, b: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        let first = ((a - self.lo) / self.width).floor().max(0.0) as usize;
        for k in first..self.bins {
            let (l, r) = (self.lo + k as f64 * self.width, self.lo + (k + 1) as f64 * self.width);
            if l >= b {
                break;
            }
            let o = r.min(b) - l.max(a);
            if o > 0.0 {
                out.push((k, o / (b - a)));
            }
        }
        out
    }
}

/// Density mass per bin, splitting each grid cell by overlap fraction.
pub fn bin_density(rho: &RealField, spec: HistogramSpec) -> Result<Vec<f64>> {
    let grid = rho.grid();
    let axes = (0..grid.dims())
        .map(|d| Axis::new(grid, d, spec.bins[d], spec.edge_margin))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<Vec<Vec<(usize, f64)>>> = (0..grid.dims())
        .map(|d| {
            let h = 0.5 * grid.spacing(d);
            (0..grid.points()[d]).map(|i| axes[d].overlaps(grid.coord(d, i) - h, grid.coord(d, i) + h)).collect()
        })
        .collect();
    let mut hist = vec![0.0; spec.bins[0] * if grid.dims() == 2 { spec.bins[1] } else { 1 }];
    for (flat, &r) in rho.values().iter().enumerate() {
        let idx = grid.unravel(flat);
        if grid.dims() == 1 {
            for &(b, f) in &cells[0][idx[0]] {
                hist[b] += r * f;
            }
        } else {
            for &(b0, f0) in &cells[0][idx[0]] {
                for &(b1, f1) in &cells[1][idx[1]] {
                    hist[b0 * spec.bins[1] + b1] += r * f0 * f1;
                }
            }
        }
    }
    Ok(hist)
}

/// Counts of points per bin; points outside the range are dropped.
pub fn bin_points(grid: &Grid, points: &[Point], spec: HistogramSpec) -> Result<Vec<f64>> {
    let axes = (0..grid.dims())
        .map(|d| Axis::new(grid, d, spec.bins[d], spec.edge_margin))
        .collect::<Result<Vec<_>>>()?;
    let mut hist = vec![0.0; spec.bins[0] * if grid.dims() == 2 { spec.bins[1] } else { 1 }];
    for x in points {
        let b0 = axes[0].bin(x[0]);
        let b = if grid.dims() == 1 { b0 } else { b0.zip(axes[1].bin(x[1])).map(|(a, b)| a * spec.bins[1] + b) };
        if let Some(b) = b {
            hist[b] += 1.0;
        }
    }
    Ok(hist)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equivariance {
    pub tv: f64,
    /// Fraction of members excluded because they exited before the snapshot.
    pub excluded_fraction: f64,
}

/// Largest tolerated fraction of excluded members.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.2;

pub fn equivariance_distance(
    timeline: &Timeline,
    ensemble: &TrajectoryEnsemble,
    snapshot: usize,
    spec: HistogramSpec,
) -> Result<Equivariance> {
    let psi = timeline
        .snapshots
        .get(snapshot)
        .ok_or_else(|| config_err(format!("snapshot {snapshot} out of range")))?;
    if ensemble.times != timeline.times {
        return Err(config_err("ensemble and timeline have different time axes"));
    }
    let total = ensemble.count;
    let points: Vec<Point> = ensemble.members.iter().filter_map(|m| m.position_at(snapshot)).collect();
    let excluded_fraction = (total - points.len()) as f64 / total as f64;
    if excluded_fraction > MAX_EXCLUDED_FRACTION {
        return Err(Error::UnreliableStatistics { excluded: 100.0 * excluded_fraction });
    }
    let q = bin_density(&psi.density(), spec)?;
    let p = bin_points(psi.grid(), &points, spec)?;
    Ok(Equivariance { tv: total_variation(&p, &q)?, excluded_fraction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Complex64;

    #[test]
    fn tv_basics() {
        let p = [1.0, 2.0, 3.0];
        assert_eq!(total_variation(&p, &p).unwrap(), 0.0);
        let q = [3.0, 2.0, 1.0];
        let a = total_variation(&p, &q).unwrap();
        assert!((a - total_variation(&q, &p).unwrap()).abs() < 1e-15);
        assert!((a - 1.0 / 3.0).abs() < 1e-15);
        assert!((total_variation(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(total_variation(&[1.0], &[1.0, 2.0]).is_err());
        assert!(total_variation(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn parabolic_vertex() {
        // y = (x - 0.3)^2 sampled at -1, 0, 1.
        let f = |x: f64| (x - 0.3) * (x - 0.3);
        assert!((parabolic_offset(f(-1.0), f(0.0), f(1.0)) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn minima_of_cosine() {
        let xs: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
        let v: Vec<f64> = xs.iter().map(|x| x.cos()).collect();
        let m = local_minima(&xs, &v);
        assert_eq!(m.len(), 2);
        assert!((m[0] - PI).abs() < 1e-3);
        assert!((m[1] - 3.0 * PI).abs() < 1e-3);
    }

    #[test]
    fn masked_run_is_one_trough() {
        let xs: Vec<f64> = (0..7).map(|i| i as f64).collect();
        let v = [3.0, 2.0, f64::NAN, f64::NAN, f64::NAN, 2.0, 3.0];
        assert_eq!(canyon_troughs(&xs, &v), vec![3.0]);
    }

    #[test]
    fn density_binning_conserves_mass() {
        let g = Grid::new(&[10.0], &[256]).unwrap();
        let rho = RealField::from_fn(&g, |_| 1.0);
        let spec = HistogramSpec { bins: [48, 1], edge_margin: 4 };
        let h = bin_density(&rho, spec).unwrap();
        assert!((h.iter().sum::<f64>() - 248.0).abs() < 1e-9);
        assert!(h.iter().all(|&b| (b - 248.0 / 48.0).abs() < 1e-9));
        let g2 = Grid::new(&[4.0, 4.0], &[16, 16]).unwrap();
        let h2 = bin_density(&RealField::from_fn(&g2, |_| 1.0), HistogramSpec::for_dims(2, 2)).unwrap();
        assert!((h2.iter().sum::<f64>() - 144.0).abs() < 1e-9);
    }

    #[test]
    fn gaussian_uncertainty_is_minimal() {
        let g = Grid::new(&[40.0], &[512]).unwrap();
        let s: f64 = 0.8;
        let psi = ComplexField::from_fn(&g, |x| Complex64::from_polar((-x[0] * x[0] / (4.0 * s * s)).exp(), 1.5 * x[0]));
        let dx = position_moments(&psi.density())[0].1.sqrt();
        let (pm, pv) = momentum_moments(&psi, Units::NATURAL)[0];
        assert!((pm - 1.5).abs() < 1e-9);
        assert!((dx * pv.sqrt() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn seeds_are_midpoints() {
        let s = seed_line([0.0, -1.0], [0.0, 1.0], 4);
        assert_eq!(s, vec![[0.0, -0.75], [0.0, -0.25], [0.0, 0.25], [0.0, 0.75]]);
    }
}
