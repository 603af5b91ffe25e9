//! Fixtures shared by the kernel benchmarks.

use madelung_core::tdse::{build_initial_state, evolve, InitialState};
use madelung_core::{make_grid, ComplexField, RealField, Timeline, Units};

/// Two-source interference state on an `n × n` grid of side 32.
pub fn two_slit_state(n: usize) -> ComplexField {
    let grid = make_grid(2, &[32.0, 32.0], &[n, n]).expect("grid");
    let state = InitialState::TwoGaussianSlits {
        separation: 4.0,
        slit_width: 0.2,
        forward_momentum: 10.0,
        relative_phase: 0.0,
        source: -3.2,
        longitudinal_width: Some(0.566),
    };
    build_initial_state(&state, &grid, Units::NATURAL).expect("state")
}

/// Spreading 1D Gaussian on `n` points of a box of side 40.
pub fn gaussian_line(n: usize) -> ComplexField {
    let grid = make_grid(1, &[40.0], &[n]).expect("grid");
    let state = InitialState::Gaussian { center: vec![0.0], width: vec![1.0], momentum: vec![0.0] };
    build_initial_state(&state, &grid, Units::NATURAL).expect("state")
}

/// Short free evolution of the two-source state, `snapshots` frames 0.008 apart.
pub fn two_slit_timeline(n: usize, snapshots: usize) -> Timeline {
    let psi = two_slit_state(n);
    let free = RealField::zeros(psi.grid());
    evolve(&psi, &free, Units::NATURAL, 0.008 * (snapshots - 1) as f64, 1e-3, 8).expect("evolve")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_normalized() {
        assert!((two_slit_state(64).norm_sqr() - 1.0).abs() < 1e-10);
        assert!((gaussian_line(256).norm_sqr() - 1.0).abs() < 1e-10);
        assert_eq!(two_slit_timeline(64, 3).len(), 3);
    }
}
