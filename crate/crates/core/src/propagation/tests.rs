use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::reference;
use crate::systems::{MomentumSign, SystemSpec};

fn hh_state(pt: [f64; 2]) -> Vec4 {
    let hh = SystemSpec::HenonHeiles;
    hh.solve_constrained_momentum(&hh.default_section().unwrap(), pt, 0.125)
        .unwrap()
}

fn cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

#[test]
fn ld_vanishes_at_equilibria() {
    let hh = SystemSpec::HenonHeiles;
    let (s, ld) = propagate_ld(&hh, &[0.0; 4], 50.0, Direction::Forward, &cfg()).unwrap();
    assert_eq!(ld, 0.0);
    assert_eq!(s, [0.0; 4]);
    let dp = SystemSpec::double_pendulum(2.0, 0.5).unwrap();
    let (_, ld) = propagate_ld(&dp, &[0.0; 4], 50.0, Direction::Backward, &cfg()).unwrap();
    assert_eq!(ld, 0.0);
}

#[test]
fn ld_rejects_map_and_bad_time() {
    let m = SystemSpec::standard_map(1.0).unwrap();
    assert!(matches!(
        propagate_ld(&m, &[0.0; 4], 1.0, Direction::Forward, &cfg()),
        Err(Error::Unsupported { .. })
    ));
    let hh = SystemSpec::HenonHeiles;
    assert!(propagate_ld(&hh, &[0.0; 4], 0.0, Direction::Forward, &cfg()).is_err());
}

#[test]
fn ld_is_additive() {
    let hh = SystemSpec::HenonHeiles;
    let s0 = hh_state(reference::HENON_HEILES_REGULAR);
    let (s1, a) = propagate_ld(&hh, &s0, 30.0, Direction::Forward, &cfg()).unwrap();
    let (_, b) = propagate_ld(&hh, &s1, 40.0, Direction::Forward, &cfg()).unwrap();
    let (_, c) = propagate_ld(&hh, &s0, 70.0, Direction::Forward, &cfg()).unwrap();
    assert!((a + b - c).abs() < 1e-8, "{} vs {c}", a + b);
}

#[test]
fn ld_converges_under_tolerance_tightening() {
    let hh = SystemSpec::HenonHeiles;
    let s0 = hh_state(reference::HENON_HEILES_REGULAR);
    let (_, a) = propagate_ld(&hh, &s0, 1e3, Direction::Forward, &cfg()).unwrap();
    let (_, b) = propagate_ld(&hh, &s0, 1e3, Direction::Forward, &cfg().with_tolerance(1e-13)).unwrap();
    assert!(a > 0.0);
    assert!(((a - b) / b).abs() < 1e-6, "{a} vs {b}");
}

#[test]
fn forward_then_backward_returns_home() {
    let hh = SystemSpec::HenonHeiles;
    let dp = SystemSpec::double_pendulum(1.0, 1.0).unwrap();
    for (sys, s0) in [
        (hh, hh_state(reference::HENON_HEILES_CHAOTIC)),
        (dp, [0.3, -0.2, 0.5, 0.1]),
    ] {
        let (s1, lf) = propagate_ld(&sys, &s0, 50.0, Direction::Forward, &cfg()).unwrap();
        let (s2, lb) = propagate_ld(&sys, &s1, 50.0, Direction::Backward, &cfg()).unwrap();
        for i in 0..4 {
            assert!((s2[i] - s0[i]).abs() < 1e-6, "{s0:?} -> {s2:?}");
        }
        // The same path traversed in reverse accumulates the same descriptor.
        assert!(((lf - lb) / lf).abs() < 1e-7);
    }
}

#[test]
fn energy_is_conserved_at_working_horizons() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cases = [
        (SystemSpec::HenonHeiles, 0.125, 1e3),
        (SystemSpec::four_well(1.0, 0.25, 0.1).unwrap(), 0.5, 700.0),
        (SystemSpec::double_pendulum(1.0, 1.0).unwrap(), 1.0, 700.0),
    ];
    for (sys, e, tau) in cases {
        let flow = sys.flow("test").unwrap();
        let sec = flow.default_section();
        let b = flow.slice_bounds(&sec, e).unwrap();
        let mut done = 0;
        while done < 5 {
            let pt = [rng.gen_range(b[0][0]..b[0][1]), rng.gen_range(b[1][0]..b[1][1])];
            let Ok(s0) = flow.solve_constrained_momentum(&sec, pt, e) else {
                continue;
            };
            let (s1, _) = propagate_ld(&sys, &s0, tau, Direction::Forward, &cfg()).unwrap();
            let drift = (flow.energy(&s1) - e).abs() / e.abs().max(1.0);
            assert!(drift < 1e-8, "{sys:?} drift {drift:e}");
            done += 1;
        }
    }
}

#[test]
fn parallel_vectors_sit_at_the_floor() {
    let hh = SystemSpec::HenonHeiles;
    let w = [0.0, 1.0, 0.0, 0.0];
    let init = AugmentedState::new(hh_state([0.0, 0.0]), w, w);
    let series = propagate_sali_with(&hh, init, 100.0, 1.2, &cfg()).unwrap();
    assert!(series.floor_hit);
    assert!(series.log10_sali.iter().all(|v| *v <= SALI_FLOOR.log10()));
}

#[test]
fn parallelogram_law_after_renormalisation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let mut aug = AugmentedState::new(
            [0.0; 4],
            [rng.gen(), rng.gen(), rng.gen(), rng.gen()],
            [rng.gen(), rng.gen(), rng.gen(), rng.gen()],
        );
        aug.renormalize();
        assert!((norm(&aug.w1) - 1.0).abs() < 1e-15);
        let mut dp = 0.0;
        let mut dm = 0.0;
        for i in 0..4 {
            dp += (aug.w1[i] - aug.w2[i]).powi(2);
            dm += (aug.w1[i] + aug.w2[i]).powi(2);
        }
        assert!((dp + dm - 4.0).abs() < 1e-10);
        assert!(aug.sali() <= 2f64.sqrt() + 1e-15);
    }
}

#[test]
fn henon_heiles_sali_regular_and_chaotic() {
    let hh = SystemSpec::HenonHeiles;
    let reg = propagate_sali(&hh, &hh_state(reference::HENON_HEILES_REGULAR), 1e4, 1.2, &cfg()).unwrap();
    assert!(!reg.floor_hit);
    assert!(reg.min_log10() > -8.0);
    assert!(reg.log10_sali.iter().all(|v| *v <= 2f64.log10()));
    assert!(reg.times.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(*reg.times.last().unwrap(), 1e4);

    let cha = propagate_sali(&hh, &hh_state(reference::HENON_HEILES_CHAOTIC), 1e4, 1.2, &cfg()).unwrap();
    assert!(cha.min_log10() < -8.0);
    assert!(cha.floor_hit);
}

#[test]
fn map_ld_examples() {
    let m = SystemSpec::standard_map(0.8).unwrap();
    assert_eq!(iterate_map_ld(&m, [0.0, 0.0], 100, Direction::Forward).unwrap().1, 0.0);
    let (s, ld) = iterate_map_ld(&m, [0.5, 0.25], 1, Direction::Forward).unwrap();
    assert!((ld - 0.5).abs() < 1e-15);
    assert!((s[0] - 0.75).abs() < 1e-15);
    let (s1, a) = iterate_map_ld(&m, [0.3, 0.7], 400, Direction::Forward).unwrap();
    let (_, b) = iterate_map_ld(&m, s1, 600, Direction::Forward).unwrap();
    let (_, c) = iterate_map_ld(&m, [0.3, 0.7], 1000, Direction::Forward).unwrap();
    assert!((a + b - c).abs() < 1e-12);
    // Backward iteration retraces a short forward path.
    let (s2, a) = iterate_map_ld(&m, [0.3, 0.7], 30, Direction::Forward).unwrap();
    let (back, lb) = iterate_map_ld(&m, s2, 30, Direction::Backward).unwrap();
    assert!((lb - a).abs() < 1e-9);
    assert!(torus_delta(back[0], 0.3).abs() < 1e-9);
    assert!(torus_delta(back[1], 0.7).abs() < 1e-9);
    assert!(iterate_map_ld(&m, [0.1, 0.1], 0, Direction::Forward).is_err());
}

#[test]
fn map_ld_uses_minimal_image() {
    // K = 0 and y = 0.98: each step moves x by 0.98, i.e. -0.02 on the torus.
    let m = SystemSpec::standard_map(0.0).unwrap();
    let (_, ld) = iterate_map_ld(&m, [0.5, 0.98], 1, Direction::Forward).unwrap();
    assert!((ld - 0.02f64.sqrt()).abs() < 1e-12);
}

fn loglog_slope(s: &SaliSeries, lo: f64, hi: f64) -> f64 {
    let pts: Vec<(f64, f64)> = s
        .times
        .iter()
        .zip(&s.log10_sali)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, v)| (t.log10(), *v))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>()
}

#[test]
fn map_sali_asymptotics() {
    let m = SystemSpec::standard_map(reference::STANDARD_MAP_K).unwrap();
    let reg = iterate_map_sali(&m, reference::STANDARD_MAP_REGULAR, 100_000, 1.2).unwrap();
    let slope = loglog_slope(&reg, 1e3, 1e5);
    assert!((slope + 2.0).abs() < 0.3, "slope {slope}");
    let cha = iterate_map_sali(&m, reference::STANDARD_MAP_CHAOTIC, 10_000, 1.2).unwrap();
    assert!(cha.floor_hit);
    assert!(cha.min_log10() < -13.0);

    let shear = SystemSpec::standard_map(0.0).unwrap();
    let s = iterate_map_sali(&shear, [0.3, 0.123], 100_000, 1.2).unwrap();
    assert!(s.min_log10() > -13.0);
    assert!(s.times.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn section_starts_on_the_initial_condition() {
    let hh = SystemSpec::HenonHeiles;
    let sec = hh.default_section().unwrap();
    let s0 = hh_state(reference::HENON_HEILES_REGULAR);
    let pts = poincare_section(&hh, &s0, &sec, 5, 1e3, &cfg()).unwrap();
    assert_eq!(pts.len(), 5);
    assert!((pts[0][0] - 0.1).abs() < 1e-10 && (pts[0][1] - 0.1).abs() < 1e-10);
}

#[test]
fn section_points_stay_on_the_energy_shell() {
    let hh = SystemSpec::HenonHeiles;
    let sec = hh.default_section().unwrap();
    let s0 = hh_state(reference::HENON_HEILES_CHAOTIC);
    let states = poincare_states(&hh, &s0, &sec, 100, 1e4, &cfg()).unwrap();
    assert_eq!(states.len(), 100);
    for s in &states {
        assert_eq!(s[0], 0.0);
        assert!(s[2] >= 0.0);
        let re = hh.solve_constrained_momentum(&sec, sec.project(s), 0.125).unwrap();
        assert!((hh.energy(&re).unwrap() - 0.125).abs() < 1e-8);
        assert!((re[2] - s[2]).abs() < 1e-6);
    }
}

fn occupied_cells(pts: &[[f64; 2]]) -> usize {
    let mut cells = std::collections::HashSet::new();
    for p in pts {
        cells.insert(((p[0] * 40.0).floor() as i64, (p[1] * 40.0).floor() as i64));
    }
    cells.len()
}

#[test]
fn regular_section_traces_a_curve() {
    let hh = SystemSpec::HenonHeiles;
    let sec = hh.default_section().unwrap();
    let reg = poincare_section(&hh, &hh_state(reference::HENON_HEILES_REGULAR), &sec, 400, 1e5, &cfg()).unwrap();
    let cha = poincare_section(&hh, &hh_state(reference::HENON_HEILES_CHAOTIC), &sec, 400, 1e5, &cfg()).unwrap();
    assert_eq!(reg.len(), 400);
    assert_eq!(cha.len(), 400);
    // A closed invariant curve covers far fewer cells than a chaotic orbit
    // spreading over an area.
    let (r, c) = (occupied_cells(&reg), occupied_cells(&cha));
    assert!(2 * r < c, "regular {r} cells, chaotic {c} cells");
}

#[test]
fn section_with_negative_sign() {
    let hh = SystemSpec::HenonHeiles;
    let mut sec = hh.default_section().unwrap();
    sec.sign = MomentumSign::Negative;
    let s0 = hh_state(reference::HENON_HEILES_REGULAR);
    let states = poincare_states(&hh, &s0, &sec, 10, 1e3, &cfg()).unwrap();
    assert_eq!(states.len(), 10);
    assert!(states.iter().all(|s| s[2] <= 0.0));
}

#[test]
fn no_crossing_gives_empty_list() {
    let hh = SystemSpec::HenonHeiles;
    let sec = hh.default_section().unwrap();
    // Starts off the section; too short to reach it.
    let s0 = [0.2, 0.0, 0.0, 0.1];
    assert!(poincare_section(&hh, &s0, &sec, 3, 0.1, &cfg()).unwrap().is_empty());
}
