use madelung_core::diagnostics::{bin_density, equivariance_distance, position_moments, HistogramSpec};
use madelung_core::grid::{Grid, RealField};
use madelung_core::tdse::{build_initial_state, evolve, InitialState, Timeline};
use madelung_core::trajectories::{
    integrate_bohm, integrate_rk4, integrate_stochastic, run_ensemble, AnalyticGuidance, GuidanceOptions,
    GuidanceTimeline, Point,
};
use madelung_core::{Error, TrajectoryKind, Units};

fn free_gaussian_timeline() -> Timeline {
    let grid = Grid::new(&[40.0], &[1024]).unwrap();
    let s = InitialState::Gaussian { center: vec![0.0], width: vec![1.0], momentum: vec![0.0] };
    let psi0 = build_initial_state(&s, &grid, Units::NATURAL).unwrap();
    evolve(&psi0, &RealField::zeros(&grid), Units::NATURAL, 2.0, 1e-3, 10).unwrap()
}

/// `σ(t)/σ₀` for a free Gaussian with ħ = m = σ₀ = 1.
fn spread(t: f64) -> f64 {
    (1.0 + t * t / 4.0).sqrt()
}

#[test]
fn bohm_trajectories_follow_the_spreading_packet() {
    let tl = free_gaussian_timeline();
    let g = GuidanceTimeline::new(&tl, GuidanceOptions::default()).unwrap();
    for i in 0..10 {
        let x0 = -2.0 + 4.0 * i as f64 / 9.0;
        let tr = integrate_bohm(&g, [x0, 0.0], 4).unwrap();
        assert!(!tr.exited);
        assert_eq!(tr.positions.len(), tl.len());
        let x = tr.last_position()[0];
        let exact = x0 * spread(2.0);
        assert!((x - exact).abs() <= 1e-4 * exact.abs().max(1e-3), "x0 = {x0}: {x} vs {exact}");
    }
}

#[test]
fn rk4_is_fourth_order() {
    let field = AnalyticGuidance { dims: 1, units: Units::NATURAL, velocity: |x: Point, t: f64| [x[0] * t / (4.0 + t * t), 0.0] };
    let times = [0.0, 1.0, 2.0];
    let err = |n: usize| (integrate_rk4(&field, [1.3, 0.0], &times, n).unwrap().last_position()[0] - 1.3 * spread(2.0)).abs();
    let (e1, e2, e3) = (err(2), err(4), err(8));
    for r in [e1 / e2, e2 / e3] {
        assert!((12.0..=20.0).contains(&r), "ratio {r} ({e1:e}, {e2:e}, {e3:e})");
    }
}

#[test]
fn start_outside_the_domain_is_rejected() {
    let tl = free_gaussian_timeline();
    let g = GuidanceTimeline::new(&tl, GuidanceOptions::default()).unwrap();
    assert!(matches!(integrate_bohm(&g, [25.0, 0.0], 4), Err(Error::Config(_))));
    let edge = integrate_bohm(&g, [19.95, 0.0], 4).unwrap();
    assert!(edge.exited);
    assert_eq!(edge.positions.len(), 1);
}

#[test]
fn random_walk_variance() {
    let units = Units::new(0.5, 2.0);
    let still = AnalyticGuidance { dims: 1, units, velocity: |_: Point, _: f64| [0.0, 0.0] };
    let dt = 0.01;
    let n = 50;
    let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    let samples = 10_000;
    let var = (0..samples as u64)
        .map(|s| integrate_stochastic(&still, [0.0, 0.0], &times, 1, s, false).unwrap().last_position()[0].powi(2))
        .sum::<f64>()
        / samples as f64;
    let expect = n as f64 * units.hbar * dt / units.mass;
    assert!((var / expect - 1.0).abs() < 0.05, "{var} vs {expect}");
}

#[test]
fn small_hbar_recovers_the_streamline() {
    let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
    let path = |hbar: f64, substeps: usize| {
        let field = AnalyticGuidance { dims: 2, units: Units::new(hbar, 1.0), velocity: |x: Point, _: f64| [-x[1], x[0]] };
        integrate_stochastic(&field, [1.0, 0.0], &times, substeps, 3, false).unwrap().positions
    };
    let gap = |a: &[Point], b: &[Point]| a.iter().zip(b).map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1])).fold(0.0, f64::max);

    // Against the noiseless path of the same scheme the gap scales exactly as sqrt(ħ).
    let quiet = path(1e-30, 4);
    let ratio = gap(&path(1e-6, 4), &quiet) / gap(&path(1e-8, 4), &quiet);
    assert!((ratio - 10.0).abs() < 1e-3, "ratio {ratio}");

    let field = AnalyticGuidance { dims: 2, units: Units::NATURAL, velocity: |x: Point, _: f64| [-x[1], x[0]] };
    let bohm = integrate_rk4(&field, [1.0, 0.0], &times, 4).unwrap().positions;
    let (d8, d6) = (gap(&path(1e-8, 400), &bohm), gap(&path(1e-6, 400), &bohm));
    assert!(d8 < 1e-3 && d8 < d6, "{d8} {d6}");
}

#[test]
fn bohm_ensemble_spreads_like_the_density() {
    let tl = free_gaussian_timeline();
    let g = GuidanceTimeline::new(&tl, GuidanceOptions::default()).unwrap();
    let ens = run_ensemble(&g, 10_000, TrajectoryKind::Bohm, 11, 4).unwrap();
    assert!(ens.failures.is_empty());
    let last = tl.len() - 1;
    let xs: Vec<f64> = ens.members.iter().filter_map(|m| m.position_at(last)).map(|p| p[0]).collect();
    let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    assert!((var / spread(2.0).powi(2) - 1.0).abs() < 0.05, "{var}");

    let spec = HistogramSpec::for_dims(1, g.options().edge_margin);
    for k in [0, last] {
        let e = equivariance_distance(&tl, &ens, k, spec).unwrap();
        assert!(e.tv < 0.05, "snapshot {k}: {e:?}");
        assert!(e.excluded_fraction < 0.05);
    }
    let again = run_ensemble(&g, 10_000, TrajectoryKind::Bohm, 11, 4).unwrap();
    assert!(ens.members == again.members);
    assert!(matches!(run_ensemble(&g, 0, TrajectoryKind::Bohm, 11, 4), Err(Error::Config(_))));
}

#[test]
fn fluctuating_ensemble_keeps_the_density() {
    let tl = free_gaussian_timeline();
    let g = GuidanceTimeline::new(&tl, GuidanceOptions::default()).unwrap();
    let ens = run_ensemble(&g, 10_000, TrajectoryKind::Fluctuating, 5, 4).unwrap();
    let last = tl.len() - 1;
    let e = equivariance_distance(&tl, &ens, last, HistogramSpec::for_dims(1, 4)).unwrap();
    assert!(e.tv < 0.05, "{e:?}");
    let var = position_moments(&tl.last().density())[0].1;
    let xs: Vec<f64> = ens.members.iter().filter_map(|m| m.position_at(last)).map(|p| p[0]).collect();
    let sample = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    assert!((sample / var - 1.0).abs() < 0.05, "{sample} vs {var}");
}

#[test]
fn single_member_histogram_is_far_from_the_density() {
    let tl = free_gaussian_timeline();
    let g = GuidanceTimeline::new(&tl, GuidanceOptions::default()).unwrap();
    let ens = run_ensemble(&g, 1, TrajectoryKind::Bohm, 1, 4).unwrap();
    let e = equivariance_distance(&tl, &ens, 0, HistogramSpec::for_dims(1, 4)).unwrap();
    let q = bin_density(&tl.snapshots[0].density(), HistogramSpec::for_dims(1, 4)).unwrap();
    let x = ens.members[0].positions[0][0];
    let b = ((x + 19.84375) / (39.6875 / 64.0)) as usize;
    let expect = 1.0 - q[b] / q.iter().sum::<f64>();
    assert!((e.tv - expect).abs() < 1e-12, "{e:?} vs {expect}");
}
