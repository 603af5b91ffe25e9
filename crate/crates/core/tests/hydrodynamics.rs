use madelung_core::madelung::{
    circulation, continuity_residual, decompose, find_nodes, hj_residual, velocity_field, GridLoop, SnapshotWindow,
    DEFAULT_RHO_FLOOR,
};
use madelung_core::grid::{Grid, RealField};
use madelung_core::tdse::{build_initial_state, build_potential, evolve, InitialState, PotentialSpec, Timeline};
use madelung_core::{Error, Units};

fn free_gaussian(dt: f64, stride: usize) -> Timeline {
    let grid = Grid::new(&[40.0], &[1024]).unwrap();
    let s = InitialState::Gaussian { center: vec![0.0], width: vec![1.0], momentum: vec![0.0] };
    let psi0 = build_initial_state(&s, &grid, Units::NATURAL).unwrap();
    let steps = (0.2 / dt).round() as usize;
    evolve(&psi0, &RealField::zeros(&grid), Units::NATURAL, steps as f64 * dt, dt, stride).unwrap()
}

#[test]
fn residuals_shrink_quadratically_with_dt() {
    let coarse = free_gaussian(1e-3, 10);
    let fine = free_gaussian(5e-4, 10);
    // Both windows are centred on t = 0.1.
    let wc = SnapshotWindow::from_timeline(&coarse, 10).unwrap();
    let wf = SnapshotWindow::from_timeline(&fine, 20).unwrap();
    assert_eq!(coarse.times[10], fine.times[20]);

    let c = continuity_residual(&wc).unwrap().l2 / continuity_residual(&wf).unwrap().l2;
    assert!((3.5..=4.5).contains(&c), "continuity ratio {c}");
    let h = hj_residual(&wc, DEFAULT_RHO_FLOOR).unwrap().l2 / hj_residual(&wf, DEFAULT_RHO_FLOOR).unwrap().l2;
    assert!((3.5..=4.5).contains(&h), "hj ratio {h}");
}

#[test]
fn harmonic_ground_state_balances_potentials() {
    let units = Units::NATURAL;
    let grid = Grid::new(&[16.0], &[128]).unwrap();
    let psi = build_initial_state(&InitialState::HarmonicGround { omega: 1.0, center: vec![0.0] }, &grid, units).unwrap();
    let v = build_potential(&PotentialSpec::Harmonic { omega: 1.0, center: vec![0.0] }, &grid, units).unwrap();
    let f = decompose(&psi, units, DEFAULT_RHO_FLOOR).unwrap();
    let total: Vec<f64> = f
        .v_q
        .values()
        .iter()
        .zip(v.field.values())
        .filter(|(q, _)| q.is_finite())
        .map(|(q, v)| q + v)
        .collect();
    let mean = total.iter().sum::<f64>() / total.len() as f64;
    let std = (total.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / total.len() as f64).sqrt();
    assert!(std / mean.abs() < 1e-6, "{}", std / mean.abs());
    assert!((mean - 0.5).abs() < 1e-6);
}

#[test]
fn windows_need_three_snapshots() {
    let grid = Grid::new(&[10.0], &[64]).unwrap();
    let s = InitialState::Gaussian { center: vec![0.0], width: vec![1.0], momentum: vec![0.0] };
    let psi0 = build_initial_state(&s, &grid, Units::NATURAL).unwrap();
    let tl = evolve(&psi0, &RealField::zeros(&grid), Units::NATURAL, 0.1, 0.1, 1).unwrap();
    assert!(matches!(SnapshotWindow::from_timeline(&tl, 1), Err(Error::InsufficientData { needed: 3, got: 2 })));
}

#[test]
fn coarse_time_sampling_reports_branch_wrap() {
    let grid = Grid::new(&[20.0], &[256]).unwrap();
    let k = 6.0;
    let s = InitialState::Gaussian { center: vec![0.0], width: vec![1.5], momentum: vec![k] };
    let psi0 = build_initial_state(&s, &grid, Units::NATURAL).unwrap();
    // The phase turns by about k²h/2 = 1.8 rad per snapshot, 3.6 rad across the window.
    let tl = evolve(&psi0, &RealField::zeros(&grid), Units::NATURAL, 0.2, 0.05, 2).unwrap();
    let w = SnapshotWindow::from_timeline(&tl, 1).unwrap();
    assert!(matches!(hj_residual(&w, DEFAULT_RHO_FLOOR), Err(Error::BranchWrap { .. })));
}

#[test]
fn vortex_circulation_and_nodes() {
    let units = Units::new(1.0, 2.0);
    let grid = Grid::new(&[16.0, 16.0], &[128, 128]).unwrap();
    for winding in [1, 2, -1] {
        let s = InitialState::Vortex { center: vec![0.0, 0.0], width: 0.7, winding };
        let psi = build_initial_state(&s, &grid, units).unwrap();
        let nodes = find_nodes(&psi, DEFAULT_RHO_FLOOR).unwrap();
        assert_eq!(nodes.total_winding(), winding);
        let v = velocity_field(&psi, units, DEFAULT_RHO_FLOOR, 0.0).unwrap();
        let c = circulation(&v, &GridLoop::around([64, 64], 20), units).unwrap();
        let exact = 2.0 * std::f64::consts::PI * units.hbar * winding as f64 / units.mass;
        assert!(((c.value - exact) / exact).abs() < 1e-3, "{c:?}");
        assert!((c.quanta - winding as f64).abs() < 1e-3);
    }
}
