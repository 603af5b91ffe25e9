//! Hydrodynamic (Madelung) view of a wavefunction `ψ = R e^{iS/ħ}`.
//!
//! Phase gradients are taken pointwise as `ħ Im(∇ψ/ψ)`, never by unwrapping
//! `S`, so they stay single-valued around vortices. Points where
//! `ρ < rho_floor · max ρ` form the node mask; derived quantities there are
//! NaN.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{config_err, Error, Result};
use crate::grid::{ComplexField, Grid, RealField};
use crate::spectral::Spectral;
use crate::tdse::Timeline;
use crate::units::Units;

/// Default relative density floor for the node mask.
pub const DEFAULT_RHO_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct MadelungFields {
    pub rho: RealField,
    pub amplitude: RealField,
    /// `∇S`, one component per dimension; NaN on the node mask.
    pub grad_s: Vec<RealField>,
    /// Quantum potential; NaN on the node mask.
    pub v_q: RealField,
    pub node_mask: Vec<bool>,
}

impl MadelungFields {
    pub fn masked_count(&self) -> usize {
        self.node_mask.iter().filter(|&&m| m).count()
    }
}

/// Mask of points with `ρ < rho_floor · max ρ`.
pub fn node_mask(rho: &RealField, rho_floor: f64) -> Result<Vec<bool>> {
    let max = rho.max().unwrap_or(0.0);
    if !(max > 0.0) {
        return Err(Error::Degenerate("density vanishes everywhere".into()));
    }
    let cut = rho_floor * max;
    Ok(rho.values().iter().map(|&r| r < cut).collect())
}

/// `∇ψ / ψ` per dimension, computed from one forward transform.
fn log_gradient(spectral: &Spectral, psi: &ComplexField) -> Vec<Vec<Complex64>> {
    let mut grads = spectral.gradient_values(psi.values());
    for g in grads.iter_mut() {
        g.iter_mut().zip(psi.values()).for_each(|(d, z)| *d /= z);
    }
    grads
}

fn masked_field(grid: &Grid, mask: &[bool], values: impl Iterator<Item = f64>) -> RealField {
    let v = values.zip(mask).map(|(v, &m)| if m { f64::NAN } else { v }).collect();
    RealField::new(grid.clone(), v).expect("same grid")
}

pub fn decompose(psi: &ComplexField, units: Units, rho_floor: f64) -> Result<MadelungFields> {
    let spectral = Spectral::new(psi.grid());
    decompose_with(&spectral, psi, units, rho_floor)
}

pub(crate) fn decompose_with(
    spectral: &Spectral,
    psi: &ComplexField,
    units: Units,
    rho_floor: f64,
) -> Result<MadelungFields> {
    let grid = psi.grid();
    let rho = psi.density();
    let mask = node_mask(&rho, rho_floor)?;
    let amplitude = RealField::new(grid.clone(), rho.values().iter().map(|r| r.sqrt()).collect())?;
    let grad_s = log_gradient(spectral, psi)
        .into_iter()
        .map(|g| masked_field(grid, &mask, g.into_iter().map(|z| units.hbar * z.im)))
        .collect();
    let v_q = quantum_potential_with(spectral, &amplitude, &mask, units);
    Ok(MadelungFields { rho, amplitude, grad_s, v_q, node_mask: mask })
}

/// `V_q = -(ħ²/2m) ΔR / R`, NaN on the node mask.
pub fn quantum_potential(fields: &MadelungFields, units: Units) -> RealField {
    let spectral = Spectral::new(fields.amplitude.grid());
    quantum_potential_with(&spectral, &fields.amplitude, &fields.node_mask, units)
}

fn quantum_potential_with(spectral: &Spectral, amplitude: &RealField, mask: &[bool], units: Units) -> RealField {
    let lap = spectral.laplacian_real(amplitude);
    let c = -units.hbar * units.hbar / (2.0 * units.mass);
    masked_field(
        amplitude.grid(),
        mask,
        lap.values().iter().zip(amplitude.values()).map(|(l, r)| c * l / r),
    )
}

/// Guidance velocity `v = ∇S/m = j/ρ`.
#[derive(Debug, Clone)]
pub struct VelocityField {
    /// One component per dimension; NaN on the node mask.
    pub components: Vec<RealField>,
    pub node_mask: Vec<bool>,
    pub time: f64,
    /// Largest off-mask difference between `(ħ/m) Im(∇ψ/ψ)` and `j/ρ`.
    pub route_deviation: f64,
}

/// Probability current `j = (ħ/m) Im(ψ* ∇ψ)`.
pub fn current_density(psi: &ComplexField, units: Units) -> Vec<RealField> {
    let spectral = Spectral::new(psi.grid());
    current_with(&spectral, psi, units)
}

fn current_with(spectral: &Spectral, psi: &ComplexField, units: Units) -> Vec<RealField> {
    let scale = units.velocity_scale();
    spectral
        .gradient_values(psi.values())
        .into_iter()
        .map(|g| {
            let v = g.iter().zip(psi.values()).map(|(d, z)| scale * (z.conj() * d).im).collect();
            RealField::new(psi.grid().clone(), v).expect("same grid")
        })
        .collect()
}

pub fn velocity_field(psi: &ComplexField, units: Units, rho_floor: f64, time: f64) -> Result<VelocityField> {
    let spectral = Spectral::new(psi.grid());
    velocity_with(&spectral, psi, units, rho_floor, time)
}

pub(crate) fn velocity_with(
    spectral: &Spectral,
    psi: &ComplexField,
    units: Units,
    rho_floor: f64,
    time: f64,
) -> Result<VelocityField> {
    let grid = psi.grid();
    let rho = psi.density();
    let mask = node_mask(&rho, rho_floor)?;
    let scale = units.velocity_scale();
    let direct: Vec<RealField> = log_gradient(spectral, psi)
        .into_iter()
        .map(|g| masked_field(grid, &mask, g.into_iter().map(|z| scale * z.im)))
        .collect();
    let currents = current_with(spectral, psi, units);
    let mut route_deviation: f64 = 0.0;
    for (v, j) in direct.iter().zip(&currents) {
        for ((a, jj), (r, &m)) in v.values().iter().zip(j.values()).zip(rho.values().iter().zip(&mask)) {
            if !m {
                route_deviation = route_deviation.max((a - jj / r).abs());
            }
        }
    }
    Ok(VelocityField { components: direct, node_mask: mask, time, route_deviation })
}

/// Three consecutive snapshots used for centred time differences.
#[derive(Debug, Clone, Copy)]
pub struct SnapshotWindow<'a> {
    pub before: &'a ComplexField,
    pub center: &'a ComplexField,
    pub after: &'a ComplexField,
    /// Time between consecutive snapshots.
    pub spacing: f64,
    pub potential: &'a RealField,
    pub units: Units,
}

impl<'a> SnapshotWindow<'a> {
    /// Window centred on snapshot `center` of a timeline.
    pub fn from_timeline(timeline: &'a Timeline, center: usize) -> Result<Self> {
        if timeline.len() < 3 {
            return Err(Error::InsufficientData { needed: 3, got: timeline.len() });
        }
        if center == 0 || center + 1 >= timeline.len() {
            return Err(config_err(format!(
                "window centre {center} needs neighbours in a timeline of {} snapshots",
                timeline.len()
            )));
        }
        Ok(SnapshotWindow {
            before: &timeline.snapshots[center - 1],
            center: &timeline.snapshots[center],
            after: &timeline.snapshots[center + 1],
            spacing: timeline.snapshot_interval(),
            potential: &timeline.potential,
            units: timeline.units,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Residual {
    /// Pointwise residual; NaN where it is not evaluated.
    pub field: RealField,
    pub max_abs: f64,
    /// `sqrt(Σ r² ΔV)` over evaluated points.
    pub l2: f64,
}

impl Residual {
    fn from_field(field: RealField) -> Self {
        let dv = field.grid().cell_volume();
        let finite = field.values().iter().filter(|v| v.is_finite());
        let max_abs = finite.clone().map(|v| v.abs()).fold(0.0, f64::max);
        let l2 = (finite.map(|v| v * v).sum::<f64>() * dv).sqrt();
        Residual { field, max_abs, l2 }
    }
}

/// `∂_t ρ + ∇·(ρ v)` at the centre snapshot.
pub fn continuity_residual(window: &SnapshotWindow<'_>) -> Result<Residual> {
    let grid = window.center.grid();
    grid.check_same(window.before.grid())?;
    grid.check_same(window.after.grid())?;
    let spectral = Spectral::new(grid);
    let currents = current_with(&spectral, window.center, window.units);
    let div = spectral.divergence(&currents);
    let h2 = 2.0 * window.spacing;
    let values = window
        .after
        .values()
        .iter()
        .zip(window.before.values())
        .zip(div.values())
        .map(|((a, b), d)| (a.norm_sqr() - b.norm_sqr()) / h2 + d)
        .collect();
    Ok(Residual::from_field(RealField::new(grid.clone(), values)?))
}

/// `∂_t S + |∇S|²/2m + V + V_q` at the centre snapshot, off the node mask.
///
/// `∂_t S` is `ħ Arg(ψ(t+h) / ψ(t-h)) / 2h` on the principal branch. The
/// phase advance over `2h` is also accumulated through the centre snapshot;
/// if it reaches π anywhere the principal value is ambiguous and a
/// [`Error::BranchWrap`] is returned.
pub fn hj_residual(window: &SnapshotWindow<'_>, rho_floor: f64) -> Result<Residual> {
    let grid = window.center.grid();
    grid.check_same(window.before.grid())?;
    grid.check_same(window.after.grid())?;
    grid.check_same(window.potential.grid())?;
    let units = window.units;
    let fields = decompose(window.center, units, rho_floor)?;
    let mask_before = node_mask(&window.before.density(), rho_floor)?;
    let mask_after = node_mask(&window.after.density(), rho_floor)?;

    let mut wraps = 0;
    let mut max_step: f64 = 0.0;
    let mut values = vec![f64::NAN; grid.len()];
    for (i, out) in values.iter_mut().enumerate() {
        if fields.node_mask[i] || mask_before[i] || mask_after[i] {
            continue;
        }
        let (b, c, a) = (window.before.values()[i], window.center.values()[i], window.after.values()[i]);
        let accumulated = (c * b.conj()).arg() + (a * c.conj()).arg();
        if accumulated.abs() >= PI {
            wraps += 1;
            max_step = max_step.max(accumulated.abs());
            continue;
        }
        let ds_dt = units.hbar * (a * b.conj()).arg() / (2.0 * window.spacing);
        let grad2: f64 = fields.grad_s.iter().map(|g| g.values()[i].powi(2)).sum();
        *out = ds_dt + grad2 / (2.0 * units.mass) + window.potential.values()[i] + fields.v_q.values()[i];
    }
    if wraps > 0 {
        return Err(Error::BranchWrap { points: wraps, max_step });
    }
    Ok(Residual::from_field(RealField::new(grid.clone(), values)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub position: [f64; 2],
    pub winding: i32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeSet {
    pub nodes: Vec<Node>,
}

impl NodeSet {
    pub fn total_winding(&self) -> i32 {
        self.nodes.iter().map(|n| n.winding).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Field values shifted by half a cell along `dim` via a Fourier phase ramp.
fn half_cell_shift(spectral: &Spectral, psi: &ComplexField, dim: usize) -> Vec<Complex64> {
    let grid = psi.grid();
    let n = grid.points()[dim];
    let h = 0.5 * grid.spacing(dim);
    let mut hat = psi.values().to_vec();
    spectral.forward_in_place(&mut hat);
    for (flat, z) in hat.iter_mut().enumerate() {
        let i = grid.unravel(flat)[dim];
        *z *= if i == n / 2 { Complex64::new(0.0, 0.0) } else { Complex64::from_polar(1.0, grid.wavenumber(dim, i) * h) };
    }
    spectral.inverse_in_place(&mut hat);
    hat
}

/// Phase differences closer to ±π than this are treated as ambiguous.
const AMBIGUOUS_PHASE: f64 = 1e-6;

/// Ring samples this small relative to the corners sit on a nodal line.
const AMBIGUOUS_MODULUS: f64 = 1e-8;

/// Locates phase singularities of a 2D wavefunction.
///
/// Candidate cells are those where both `Re ψ` and `Im ψ` take both signs
/// on the corners. The winding is the sum of principal phase differences
/// around the cell boundary, sampled at the four corners and the four edge
/// midpoints (band-limited interpolation), divided by 2π. Cells whose
/// boundary contains a phase step of ±π or passes through a zero (real nodal
/// lines) are skipped.
pub fn find_nodes(psi: &ComplexField, rho_floor: f64) -> Result<NodeSet> {
    let grid = psi.grid();
    if grid.dims() != 2 {
        return Err(config_err("node detection needs a 2D grid"));
    }
    let rho = psi.density();
    let cut = rho_floor * rho.max().unwrap_or(0.0);
    if !(cut > 0.0) && rho_floor > 0.0 {
        return Err(Error::Degenerate("density vanishes everywhere".into()));
    }
    let spectral = Spectral::new(grid);
    let shift_x = half_cell_shift(&spectral, psi, 0);
    let shift_y = half_cell_shift(&spectral, psi, 1);
    let (n0, n1) = (grid.points()[0], grid.points()[1]);
    let at = |v: &[Complex64], i: usize, j: usize| v[i * n1 + j];
    let values = psi.values();

    let mut nodes = Vec::new();
    for i in 0..n0 - 1 {
        for j in 0..n1 - 1 {
            let c = [at(values, i, j), at(values, i + 1, j), at(values, i + 1, j + 1), at(values, i, j + 1)];
            if c.iter().all(|z| z.norm_sqr() < cut) {
                continue;
            }
            let spans = |f: fn(&Complex64) -> f64| {
                let lo = c.iter().map(f).fold(f64::INFINITY, f64::min);
                let hi = c.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
                lo <= 0.0 && hi >= 0.0
            };
            if !(spans(|z| z.re) && spans(|z| z.im)) {
                continue;
            }
            let ring = [
                c[0],
                at(&shift_x, i, j),
                c[1],
                at(&shift_y, i + 1, j),
                c[2],
                at(&shift_x, i, j + 1),
                c[3],
                at(&shift_y, i, j),
            ];
            let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let mut total = 0.0;
            let mut ambiguous = ring.iter().any(|z| z.norm() < AMBIGUOUS_MODULUS * scale);
            for k in 0..ring.len() {
                let step = (ring[(k + 1) % ring.len()] * ring[k].conj()).arg();
                if step.abs() > PI - AMBIGUOUS_PHASE {
                    ambiguous = true;
                    break;
                }
                total += step;
            }
            if ambiguous {
                continue;
            }
            let winding = (total / (2.0 * PI)).round() as i32;
            if winding == 0 {
                continue;
            }
            let (s, t) = bilinear_zero(&c);
            nodes.push(Node {
                position: [grid.coord(0, i) + s * grid.spacing(0), grid.coord(1, j) + t * grid.spacing(1)],
                winding,
            });
        }
    }
    Ok(NodeSet { nodes })
}

/// Zero of the bilinear interpolant of corner values `[c00, c10, c11, c01]`
/// in unit-cell coordinates, by Newton iteration from the centre.
fn bilinear_zero(c: &[Complex64; 4]) -> (f64, f64) {
    let eval = |s: f64, t: f64| {
        (1.0 - s) * (1.0 - t) * c[0] + s * (1.0 - t) * c[1] + s * t * c[2] + (1.0 - s) * t * c[3]
    };
    let (mut s, mut t) = (0.5, 0.5);
    for _ in 0..30 {
        let f = eval(s, t);
        let fs = (1.0 - t) * (c[1] - c[0]) + t * (c[2] - c[3]);
        let ft = (1.0 - s) * (c[3] - c[0]) + s * (c[2] - c[1]);
        let det = fs.re * ft.im - ft.re * fs.im;
        if det.abs() < 1e-300 {
            break;
        }
        let ds = (f.re * ft.im - ft.re * f.im) / det;
        let dt = (fs.re * f.im - f.re * fs.im) / det;
        s = (s - ds).clamp(0.0, 1.0);
        t = (t - dt).clamp(0.0, 1.0);
        if ds.abs() + dt.abs() < 1e-14 {
            break;
        }
    }
    (s, t)
}

/// Axis-aligned rectangle through grid samples, traversed counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridLoop {
    pub lower: [usize; 2],
    pub upper: [usize; 2],
}

impl GridLoop {
    /// Loop centred on sample `center` with half-size `half` samples.
    pub fn around(center: [usize; 2], half: usize) -> Self {
        GridLoop {
            lower: [center[0] - half, center[1] - half],
            upper: [center[0] + half, center[1] + half],
        }
    }

    /// Boundary of the domain interior, `inset` samples from each edge.
    pub fn interior_boundary(grid: &Grid, inset: usize) -> Self {
        let p = grid.points();
        GridLoop { lower: [inset, inset], upper: [p[0] - 1 - inset, p[1] - 1 - inset] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circulation {
    /// `∮ v·dl`.
    pub value: f64,
    /// `value · m / (2πħ)`.
    pub quanta: f64,
    /// `|quanta - round(quanta)|`.
    pub deviation: f64,
}

/// Composite Simpson rule over uniformly spaced samples (3/8 rule on the
/// last three intervals when the interval count is odd).
fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    match n {
        0 => 0.0,
        1 => 0.5 * h * (values[0] + values[1]),
        _ => {
            let (even_end, tail) = if n.is_multiple_of(2) { (n, false) } else { (n - 3, true) };
            let mut s = 0.0;
            let mut k = 0;
            while k < even_end {
                s += h / 3.0 * (values[k] + 4.0 * values[k + 1] + values[k + 2]);
                k += 2;
            }
            if tail {
                let v = &values[n - 3..];
                s += 3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
            }
            s
        }
    }
}

pub fn circulation(field: &VelocityField, lp: &GridLoop, units: Units) -> Result<Circulation> {
    let grid = field.components[0].grid();
    if grid.dims() != 2 {
        return Err(Error::InvalidLoop("circulation needs a 2D velocity field".into()));
    }
    let (n0, n1) = (grid.points()[0], grid.points()[1]);
    let [i0, j0] = lp.lower;
    let [i1, j1] = lp.upper;
    if !(i0 < i1 && j0 < j1 && i1 < n0 && j1 < n1) {
        return Err(Error::InvalidLoop(format!("loop {lp:?} is not a rectangle inside the grid")));
    }
    let vx = field.components[0].values();
    let vy = field.components[1].values();
    let sample = |v: &[f64], i: usize, j: usize| -> Result<f64> {
        let x = v[i * n1 + j];
        if field.node_mask[i * n1 + j] || !x.is_finite() {
            Err(Error::InvalidLoop(format!("loop crosses the node mask at sample ({i}, {j})")))
        } else {
            Ok(x)
        }
    };
    let (hx, hy) = (grid.spacing(0), grid.spacing(1));
    let bottom: Vec<f64> = (i0..=i1).map(|i| sample(vx, i, j0)).collect::<Result<_>>()?;
    let right: Vec<f64> = (j0..=j1).map(|j| sample(vy, i1, j)).collect::<Result<_>>()?;
    let top: Vec<f64> = (i0..=i1).map(|i| sample(vx, i, j1)).collect::<Result<_>>()?;
    let left: Vec<f64> = (j0..=j1).map(|j| sample(vy, i0, j)).collect::<Result<_>>()?;
    let value = simpson(&bottom, hx) + simpson(&right, hy) - simpson(&top, hx) - simpson(&left, hy);
    let quanta = value * units.mass / (2.0 * PI * units.hbar);
    Ok(Circulation { value, quanta, deviation: (quanta - quanta.round()).abs() })
}
