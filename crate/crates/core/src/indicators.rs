//! Lagrangian-descriptor chaos indicators built from a neighbour stencil, and
//! SALI-based ground-truth labels.
//!
//! For a point `x0` on a two-dimensional slice, the stencil adds the four
//! neighbours `x0 ± σ_i e_i`. With `L0` the forward descriptor at `x0` and
//! `L±_i` those at the neighbours (`n = 2`):
//!
//! ```text
//! D = Σ (|L0 − L+_i| + |L0 − L−_i|) / (2n L0)
//! R = |1 − Σ (L+_i + L−_i) / (2n L0)|
//! C = Σ |L+_i − L−_i| / σ_i / (2n)
//! S = Σ |L+_i − 2 L0 + L−_i| / σ_i² / n
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagation::{
    iterate_map_ld, iterate_map_sali, propagate_ld, propagate_sali, Direction, IntegratorConfig,
    SaliSeries, SALI_FLOOR,
};
use crate::systems::{wrap_unit, PhaseState, SectionSpec, SystemKind, SystemSpec};

pub const DEFAULT_SIGMA: f64 = 1e-4;

/// log10 SALI below which a map orbit is chaotic.
pub const MAP_SALI_THRESHOLD: f64 = -13.0;

/// log10 SALI below which a flow orbit is chaotic.
pub const FLOW_SALI_THRESHOLD: f64 = -8.0;

pub fn default_sali_threshold(kind: SystemKind) -> f64 {
    if kind.is_map() {
        MAP_SALI_THRESHOLD
    } else {
        FLOW_SALI_THRESHOLD
    }
}

/// Forward descriptor horizon: integration time for flows, iterations for the map.
pub fn default_ld_horizon(kind: SystemKind) -> f64 {
    match kind {
        SystemKind::DoublePendulum | SystemKind::FourWell => 700.0,
        SystemKind::HenonHeiles => 1e3,
        SystemKind::StandardMap => 5e3,
    }
}

pub fn default_sali_horizon(_kind: SystemKind) -> f64 {
    1e5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Regular,
    Chaotic,
}

impl Label {
    /// File encoding: 0 regular, 1 chaotic.
    pub fn as_bit(self) -> u8 {
        match self {
            Label::Regular => 0,
            Label::Chaotic => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Result<Self> {
        match bit {
            0 => Ok(Label::Regular),
            1 => Ok(Label::Chaotic),
            other => Err(Error::InvalidParameter(format!("label must be 0 or 1, got {other}"))),
        }
    }

    /// Training encoding: −1 regular, +1 chaotic.
    pub fn sign(self) -> f64 {
        match self {
            Label::Regular => -1.0,
            Label::Chaotic => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Regular => Label::Chaotic,
            Label::Chaotic => Label::Regular,
        }
    }
}

/// The centre point and its four axis neighbours, in slice coordinates and
/// embedded in phase space.
///
/// Order of `slice_points` and `states`: centre, `+e1`, `−e1`, `+e2`, `−e2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborStencil {
    pub center: [f64; 2],
    pub sigma: [f64; 2],
    pub slice_points: [[f64; 2]; 5],
    pub states: [PhaseState; 5],
}

fn stencil_points(center: [f64; 2], sigma: [f64; 2]) -> Result<[[f64; 2]; 5]> {
    if !sigma.iter().all(|s| *s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("stencil spacing must be > 0, got {sigma:?}")));
    }
    let [x, y] = center;
    Ok([
        center,
        [x + sigma[0], y],
        [x - sigma[0], y],
        [x, y + sigma[1]],
        [x, y - sigma[1]],
    ])
}

/// Stencil on an energy slice of a flow. Every point has its constrained
/// momentum solved from `energy`, so all five share the same energy.
pub fn build_stencil(
    sys: &SystemSpec,
    section: &SectionSpec,
    center: [f64; 2],
    energy: f64,
    sigma: [f64; 2],
) -> Result<NeighborStencil> {
    let flow = sys.flow("build_stencil")?;
    let slice_points = stencil_points(center, sigma)?;
    let mut states = [PhaseState::Flow([0.0; 4]); 5];
    for (k, p) in slice_points.iter().enumerate() {
        states[k] = match flow.solve_constrained_momentum(section, *p, energy) {
            Ok(s) => PhaseState::Flow(s),
            Err(Error::Infeasible) if k == 0 => return Err(Error::Infeasible),
            Err(Error::Infeasible) => return Err(Error::StencilInfeasible),
            Err(e) => return Err(e),
        };
    }
    Ok(NeighborStencil {
        center,
        sigma,
        slice_points,
        states,
    })
}

/// Stencil on the unit torus; neighbours wrap modulo 1.
pub fn build_map_stencil(center: [f64; 2], sigma: [f64; 2]) -> Result<NeighborStencil> {
    let mut slice_points = stencil_points(center, sigma)?;
    for p in &mut slice_points {
        *p = [wrap_unit(p[0]), wrap_unit(p[1])];
    }
    Ok(NeighborStencil {
        center,
        sigma,
        slice_points,
        states: slice_points.map(PhaseState::Map),
    })
}

/// Forward descriptors of all five stencil points, centre first.
pub fn stencil_descriptors(
    sys: &SystemSpec,
    stencil: &NeighborStencil,
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<[f64; 5]> {
    let mut out = [0.0; 5];
    for (k, state) in stencil.states.iter().enumerate() {
        out[k] = match state {
            PhaseState::Flow(s) => propagate_ld(sys, s, horizon, Direction::Forward, cfg)?.1,
            PhaseState::Map(s) => iterate_map_ld(sys, *s, iterations(horizon)?, Direction::Forward)?.1,
        };
    }
    Ok(out)
}

fn iterations(horizon: f64) -> Result<u64> {
    if horizon >= 1.0 && horizon.is_finite() {
        Ok(horizon.round() as u64)
    } else {
        Err(Error::InvalidParameter(format!("iteration count must be ≥ 1, got {horizon}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Indicators {
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "S")]
    pub s: f64,
}

/// D, R, C and S from the centre descriptor and the neighbours ordered
/// `[+e1, −e1, +e2, −e2]`.
pub fn compute_indicators(ld_center: f64, ld_neighbors: [f64; 4], sigma: [f64; 2]) -> Result<Indicators> {
    if ld_center == 0.0 {
        return Err(Error::DegenerateCenter);
    }
    if !sigma.iter().all(|s| *s > 0.0) {
        return Err(Error::InvalidParameter(format!("stencil spacing must be > 0, got {sigma:?}")));
    }
    let n = 2.0;
    let l0 = ld_center;
    let (mut d, mut sum, mut c, mut s) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..2 {
        let (lp, lm) = (ld_neighbors[2 * i], ld_neighbors[2 * i + 1]);
        d += (l0 - lp).abs() + (l0 - lm).abs();
        sum += lp + lm;
        c += (lp - lm).abs() / sigma[i];
        s += ((lp + lm) - 2.0 * l0).abs() / (sigma[i] * sigma[i]);
    }
    Ok(Indicators {
        d: d / (2.0 * n * l0),
        r: (1.0 - sum / (2.0 * n * l0)).abs(),
        c: c / (2.0 * n),
        s: s / n,
    })
}

/// Chaotic iff the final log10 SALI is below `threshold` or at the floor.
pub fn label_by_sali(sali_log10: f64, threshold: f64) -> Label {
    if sali_log10 < threshold || sali_log10 <= SALI_FLOOR.log10() {
        Label::Chaotic
    } else {
        Label::Regular
    }
}

/// Label of a whole series: floor hits are chaotic regardless of threshold.
pub fn label_series(series: &SaliSeries, threshold: f64) -> Label {
    if series.floor_hit {
        Label::Chaotic
    } else {
        label_by_sali(series.final_log10(), threshold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AsymptoteKind {
    /// Slope of log10 SALI against log10 t (regular map orbits, about −2).
    PowerLaw,
    /// Slope of log10 SALI against t (chaotic orbits).
    Exponential,
    /// Mean log10 SALI over the second half of the run (regular flow orbits).
    Plateau,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteFit {
    pub kind: AsymptoteKind,
    pub label: Label,
    pub value: f64,
    /// Largest Lyapunov exponent implied by an exponential fit.
    pub lyapunov: Option<f64>,
    pub window: [f64; 2],
    pub samples: usize,
}

const MIN_FIT_SAMPLES: usize = 10;

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Fits the asymptotic law matching the orbit's label over the samples that
/// precede the floor.
pub fn fit_sali_asymptote(series: &SaliSeries, kind: SystemKind) -> Result<AsymptoteFit> {
    let floor = SALI_FLOOR.log10();
    let pre: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.log10_sali)
        .filter(|(t, v)| **t >= 1.0 && **v > floor)
        .map(|(t, v)| (*t, *v))
        .collect();
    if pre.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} pre-floor SALI samples, need {MIN_FIT_SAMPLES}",
            pre.len()
        )));
    }
    let label = label_series(series, default_sali_threshold(kind));
    let t_end = pre.last().map_or(1.0, |p| p.0);
    let window = |lo: f64| -> Vec<(f64, f64)> {
        let w: Vec<_> = pre.iter().copied().filter(|p| p.0 >= lo).collect();
        if w.len() >= MIN_FIT_SAMPLES {
            w
        } else {
            pre.clone()
        }
    };
    let (fit_kind, pts) = match (label, kind.is_map()) {
        (Label::Chaotic, _) => (AsymptoteKind::Exponential, window(t_end / 10.0)),
        (Label::Regular, true) => (AsymptoteKind::PowerLaw, window(t_end / 100.0)),
        (Label::Regular, false) => (AsymptoteKind::Plateau, window(t_end / 2.0)),
    };
    let value = match fit_kind {
        AsymptoteKind::PowerLaw => {
            let logs: Vec<_> = pts.iter().map(|p| (p.0.log10(), p.1)).collect();
            least_squares_slope(&logs)
        }
        AsymptoteKind::Exponential => least_squares_slope(&pts),
        AsymptoteKind::Plateau => pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64,
    };
    let lyapunov = (fit_kind == AsymptoteKind::Exponential).then(|| {
        let per_exponent = if kind.is_map() { 2.0 } else { 1.0 };
        -value / (per_exponent * std::f64::consts::LOG10_E)
    });
    Ok(AsymptoteFit {
        kind: fit_kind,
        label,
        value,
        lyapunov,
        window: [pts[0].0, pts[pts.len() - 1].0],
        samples: pts.len(),
    })
}

/// Settings shared by every point of an indicator computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorConfig {
    pub sigma: [f64; 2],
    pub ld_horizon: f64,
    pub sali_horizon: f64,
    pub sali_threshold: f64,
    pub sali_ratio: f64,
    pub ld_integrator: IntegratorConfig,
    pub sali_integrator: IntegratorConfig,
}

impl IndicatorConfig {
    pub fn for_kind(kind: SystemKind) -> Self {
        IndicatorConfig {
            sigma: [DEFAULT_SIGMA; 2],
            ld_horizon: default_ld_horizon(kind),
            sali_horizon: default_sali_horizon(kind),
            sali_threshold: default_sali_threshold(kind),
            sali_ratio: 1.2,
            ld_integrator: IntegratorConfig::default(),
            sali_integrator: IntegratorConfig::default(),
        }
    }
}

/// One labelled sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorRecord {
    pub system: SystemSpec,
    /// `None` for the map.
    pub energy: Option<f64>,
    pub slice_point: [f64; 2],
    pub ld_center: f64,
    pub ld_neighbors: [f64; 4],
    pub indicators: Indicators,
    /// `None` when `S = 0`.
    pub log10_s: Option<f64>,
    pub sali_log10: f64,
    pub label: Label,
    pub ld_horizon: f64,
}

/// Builds the stencil at `point`, runs the five descriptors and the SALI
/// orbit, and assembles the record. `section` and `energy` are ignored for
/// the map.
pub fn measure_point(
    sys: &SystemSpec,
    section: Option<&SectionSpec>,
    point: [f64; 2],
    energy: Option<f64>,
    cfg: &IndicatorConfig,
) -> Result<IndicatorRecord> {
    let (stencil, energy) = if sys.kind().is_map() {
        (build_map_stencil(point, cfg.sigma)?, None)
    } else {
        let default_section;
        let section = match section {
            Some(s) => s,
            None => {
                default_section = sys.default_section()?;
                &default_section
            }
        };
        let e = energy.ok_or_else(|| Error::InvalidParameter("flow samples need an energy".into()))?;
        (build_stencil(sys, section, point, e, cfg.sigma)?, Some(e))
    };
    let lds = stencil_descriptors(sys, &stencil, cfg.ld_horizon, &cfg.ld_integrator)?;
    let ld_neighbors = [lds[1], lds[2], lds[3], lds[4]];
    let indicators = compute_indicators(lds[0], ld_neighbors, cfg.sigma)?;
    let series = match stencil.states[0] {
        PhaseState::Flow(s) => propagate_sali(sys, &s, cfg.sali_horizon, cfg.sali_ratio, &cfg.sali_integrator)?,
        PhaseState::Map(s) => iterate_map_sali(sys, s, iterations(cfg.sali_horizon)?, cfg.sali_ratio)?,
    };
    let sali_log10 = series.final_log10();
    Ok(IndicatorRecord {
        system: *sys,
        energy,
        slice_point: point,
        ld_center: lds[0],
        ld_neighbors,
        indicators,
        log10_s: (indicators.s > 0.0).then(|| indicators.s.log10()),
        sali_log10,
        label: label_by_sali(sali_log10, cfg.sali_threshold),
        ld_horizon: cfg.ld_horizon,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::reference;

    #[test]
    fn stencil_offsets_are_exact() {
        let st = build_map_stencil([0.3, 0.1], [1e-4; 2]).unwrap();
        assert_eq!(st.slice_points[1], [0.3 + 1e-4, 0.1]);
        assert_eq!(st.slice_points[2], [0.3 - 1e-4, 0.1]);
        assert_eq!(st.slice_points[3], [0.3, 0.1 + 1e-4]);
        assert_eq!(st.slice_points[4], [0.3, 0.1 - 1e-4]);
    }

    #[test]
    fn map_stencil_wraps() {
        let st = build_map_stencil([0.00005, 0.99995], [1e-4; 2]).unwrap();
        assert_relative_eq!(st.slice_points[2][0], 0.99995, epsilon = 1e-15);
        assert_relative_eq!(st.slice_points[3][1], 0.00005, epsilon = 1e-15);
        for p in st.slice_points {
            assert!(p.iter().all(|c| (0.0..1.0).contains(c)));
        }
    }

    #[test]
    fn flow_stencil_is_isoenergetic() {
        let hh = SystemSpec::henon_heiles();
        let sec = hh.default_section().unwrap();
        let e = reference::HENON_HEILES_ENERGY;
        let st = build_stencil(&hh, &sec, [0.1, -0.05], e, [1e-4; 2]).unwrap();
        for (state, p) in st.states.iter().zip(st.slice_points) {
            let PhaseState::Flow(s) = state else { panic!("flow state expected") };
            assert!((hh.energy(s).unwrap() - e).abs() < 1e-12);
            assert_eq!(sec.project(s), p);
            assert!(s[sec.constrained] >= 0.0);
        }
    }

    #[test]
    fn stencil_off_shell() {
        let hh = SystemSpec::henon_heiles();
        let sec = hh.default_section().unwrap();
        let e = reference::HENON_HEILES_ENERGY;
        assert!(matches!(build_stencil(&hh, &sec, [0.0, 0.6], e, [1e-4; 2]), Err(Error::Infeasible)));
        // Centre on the boundary p_y = √(2E): the outward neighbour is infeasible.
        let edge = (2.0 * e).sqrt() - 5e-5;
        assert!(matches!(
            build_stencil(&hh, &sec, [0.0, edge], e, [1e-4; 2]),
            Err(Error::StencilInfeasible)
        ));
    }

    #[test]
    fn indicators_of_constant_field_vanish() {
        let ind = compute_indicators(3.7, [3.7; 4], [1e-4; 2]).unwrap();
        assert_eq!(ind, Indicators { d: 0.0, r: 0.0, c: 0.0, s: 0.0 });
    }

    #[test]
    fn indicators_of_linear_field() {
        let s = 1e-4;
        let ind = compute_indicators(1.0, [1.0 + s, 1.0 - s, 1.0 + s, 1.0 - s], [s; 2]).unwrap();
        assert_relative_eq!(ind.d, s, max_relative = 1e-12);
        assert!(ind.r.abs() < 1e-15);
        assert_relative_eq!(ind.c, 1.0, max_relative = 1e-9);
        assert!(ind.s < 1e-4);
    }

    #[test]
    fn zero_center_is_degenerate() {
        assert!(matches!(compute_indicators(0.0, [1.0; 4], [1e-4; 2]), Err(Error::DegenerateCenter)));
    }

    fn direct_s(l0: f64, nb: [f64; 4], sigma: f64) -> f64 {
        let axis1 = (nb[0] - 2.0 * l0 + nb[1]).abs();
        let axis2 = (nb[2] - 2.0 * l0 + nb[3]).abs();
        (axis1 + axis2) / (sigma * sigma) / 2.0
    }

    proptest! {
        #[test]
        fn swapping_neighbours_changes_nothing(
            l0 in 0.1f64..100.0,
            nb in prop::array::uniform4(0.1f64..100.0),
        ) {
            let a = compute_indicators(l0, nb, [1e-4; 2]).unwrap();
            let b = compute_indicators(l0, [nb[1], nb[0], nb[3], nb[2]], [1e-4; 2]).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn indicators_are_homogeneous(
            l0 in 0.1f64..100.0,
            nb in prop::array::uniform4(0.1f64..100.0),
            c in 0.01f64..100.0,
        ) {
            let a = compute_indicators(l0, nb, [1e-4; 2]).unwrap();
            let b = compute_indicators(c * l0, nb.map(|v| c * v), [1e-4; 2]).unwrap();
            prop_assert!((a.d - b.d).abs() <= 1e-12 * a.d.max(1.0));
            prop_assert!((a.r - b.r).abs() <= 1e-12 * a.r.max(1.0));
            prop_assert!((c * a.c - b.c).abs() <= 1e-12 * b.c.max(1e-300));
            prop_assert!((c * a.s - b.s).abs() <= 1e-12 * b.s.max(1e-300));
        }

        #[test]
        fn s_matches_direct_formula(
            l0 in 0.1f64..100.0,
            nb in prop::array::uniform4(0.1f64..100.0),
        ) {
            let s = compute_indicators(l0, nb, [1e-4; 2]).unwrap().s;
            let direct = direct_s(l0, nb, 1e-4);
            prop_assert!((s - direct).abs() <= 1e-14 * direct.max(1.0));
        }

        #[test]
        fn indicators_are_nonnegative(
            l0 in 0.1f64..100.0,
            nb in prop::array::uniform4(0.0f64..100.0),
        ) {
            let ind = compute_indicators(l0, nb, [1e-4, 3e-4]).unwrap();
            prop_assert!(ind.d >= 0.0 && ind.r >= 0.0 && ind.c >= 0.0 && ind.s >= 0.0);
        }

        #[test]
        fn relabelling_is_consistent(v in -20.0f64..1.0, th in -14.0f64..-1.0) {
            let label = label_by_sali(v, th);
            prop_assert_eq!(label, label_by_sali(v, th));
            prop_assert_eq!(label == Label::Chaotic, v < th || v <= -14.0);
        }
    }

    #[test]
    fn sali_labels() {
        assert_eq!(label_by_sali(-15.0, -13.0), Label::Chaotic);
        assert_eq!(label_by_sali(-0.5, -8.0), Label::Regular);
        assert_eq!(label_by_sali(-14.0, -16.0), Label::Chaotic);
    }

    #[test]
    fn label_encodings() {
        for l in [Label::Regular, Label::Chaotic] {
            assert_eq!(Label::from_bit(l.as_bit()).unwrap(), l);
            assert_eq!(l.flipped().sign(), -l.sign());
        }
        assert!(Label::from_bit(2).is_err());
    }

    fn synthetic(times: Vec<f64>, f: impl Fn(f64) -> f64) -> SaliSeries {
        let log10_sali: Vec<f64> = times.iter().map(|t| f(*t)).collect();
        let floor_hit = log10_sali.last().is_some_and(|v| *v <= -14.0);
        SaliSeries {
            times,
            log10_sali,
            floor_hit,
            fitted_rate: None,
            final_state: vec![],
        }
    }

    fn geometric(end: f64) -> Vec<f64> {
        let mut t = vec![0.0];
        let mut x = 1.0;
        while x < end {
            t.push(x);
            x *= 1.2;
        }
        t.push(end);
        t
    }

    #[test]
    fn power_law_slope_is_recovered() {
        let s = synthetic(geometric(1e5), |t| if t == 0.0 { 0.0 } else { -2.0 * t.log10() });
        let fit = fit_sali_asymptote(&s, SystemKind::StandardMap).unwrap();
        assert_eq!(fit.kind, AsymptoteKind::PowerLaw);
        assert_relative_eq!(fit.value, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn exponential_rate_is_recovered() {
        let lambda = 0.05;
        let times: Vec<f64> = (0..=600).map(f64::from).collect();
        let s = synthetic(times, |t| (-lambda * t * std::f64::consts::LOG10_E).max(-14.5));
        let fit = fit_sali_asymptote(&s, SystemKind::HenonHeiles).unwrap();
        assert_eq!(fit.kind, AsymptoteKind::Exponential);
        assert!((fit.lyapunov.unwrap() - lambda).abs() < 0.01 * lambda);
    }

    #[test]
    fn plateau_level_is_reported() {
        let s = synthetic(geometric(1e4), |_| -0.7);
        let fit = fit_sali_asymptote(&s, SystemKind::HenonHeiles).unwrap();
        assert_eq!(fit.kind, AsymptoteKind::Plateau);
        assert_relative_eq!(fit.value, -0.7);
        assert_eq!(fit.lyapunov, None);
    }

    #[test]
    fn short_series_is_insufficient() {
        let s = synthetic(geometric(3.0), |t| -t);
        assert!(matches!(
            fit_sali_asymptote(&s, SystemKind::HenonHeiles),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn henon_heiles_reference_orbits_separate_in_s() {
        let hh = SystemSpec::henon_heiles();
        let mut cfg = IndicatorConfig::for_kind(SystemKind::HenonHeiles);
        cfg.sali_horizon = 1e3;
        let e = Some(reference::HENON_HEILES_ENERGY);
        let reg = measure_point(&hh, None, reference::HENON_HEILES_REGULAR, e, &cfg).unwrap();
        let cha = measure_point(&hh, None, reference::HENON_HEILES_CHAOTIC, e, &cfg).unwrap();
        assert!(cha.log10_s.unwrap() > reg.log10_s.unwrap() + 2.0, "{reg:?} {cha:?}");
    }
}
