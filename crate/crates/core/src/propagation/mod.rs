//! Trajectory propagation: Lagrangian-descriptor accumulation, SALI via the
//! variational (tangent) dynamics, and Poincaré section crossings.

mod dopri5;

use serde::{Deserialize, Serialize};

pub use dopri5::{Dopri5, IntegratorConfig};

use crate::error::{Error, Result};
use crate::systems::{torus_delta, Flow, Mat2, SectionSpec, StandardMap, SystemSpec, Vec4};

/// SALI below this value ends a run early.
pub const SALI_FLOOR: f64 = 1e-14;

/// Exponent of the p-norm integrand of the Lagrangian descriptor.
pub const LD_EXPONENT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// A trajectory point carried together with two deviation vectors and a
/// Lagrangian-descriptor accumulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedState<const D: usize> {
    pub state: [f64; D],
    pub w1: [f64; D],
    pub w2: [f64; D],
    pub ld_accum: f64,
    /// Time for flows, iteration count for maps.
    pub t: f64,
}

fn norm<const D: usize>(v: &[f64; D]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `min(|w1 - w2|, |w1 + w2|)` for unit vectors.
pub fn sali_of<const D: usize>(w1: &[f64; D], w2: &[f64; D]) -> f64 {
    let mut plus = 0.0;
    let mut minus = 0.0;
    for i in 0..D {
        plus += (w1[i] + w2[i]).powi(2);
        minus += (w1[i] - w2[i]).powi(2);
    }
    plus.sqrt().min(minus.sqrt())
}

impl<const D: usize> AugmentedState<D> {
    pub fn new(state: [f64; D], w1: [f64; D], w2: [f64; D]) -> Self {
        AugmentedState {
            state,
            w1,
            w2,
            ld_accum: 0.0,
            t: 0.0,
        }
    }

    /// Rescales both deviation vectors to unit length, returning the factors
    /// applied.
    pub fn renormalize(&mut self) -> (f64, f64) {
        let f1 = 1.0 / norm(&self.w1);
        let f2 = 1.0 / norm(&self.w2);
        self.w1.iter_mut().for_each(|v| *v *= f1);
        self.w2.iter_mut().for_each(|v| *v *= f2);
        (f1, f2)
    }

    pub fn sali(&self) -> f64 {
        sali_of(&self.w1, &self.w2)
    }
}

/// Sampled SALI history of one orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliSeries {
    /// Times (flows) or iteration counts (maps), increasing.
    pub times: Vec<f64>,
    pub log10_sali: Vec<f64>,
    pub floor_hit: bool,
    pub fitted_rate: Option<f64>,
    /// Phase-space point at the last sample.
    pub final_state: Vec<f64>,
}

impl SaliSeries {
    fn push(&mut self, t: f64, sali: f64) {
        self.times.push(t);
        self.log10_sali.push(sali.max(f64::MIN_POSITIVE).log10());
    }

    pub fn final_log10(&self) -> f64 {
        *self.log10_sali.last().expect("series always holds the initial sample")
    }

    pub fn min_log10(&self) -> f64 {
        self.log10_sali.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Sample times growing geometrically by `ratio`, starting at 1.
#[derive(Debug, Clone, Copy)]
struct Schedule {
    next: f64,
    ratio: f64,
    integer: bool,
}

impl Schedule {
    fn new(ratio: f64, integer: bool) -> Result<Self> {
        if !(ratio > 1.0 && ratio.is_finite()) {
            return Err(Error::InvalidParameter(format!("sample ratio must be > 1, got {ratio}")));
        }
        Ok(Schedule {
            next: 1.0,
            ratio,
            integer,
        })
    }

    fn due(&self, t: f64) -> bool {
        t >= self.next
    }

    fn advance(&mut self, t: f64) {
        while self.next <= t {
            let n = self.next * self.ratio;
            self.next = if self.integer { n.ceil().max(self.next + 1.0) } else { n };
        }
    }
}

/// Integrates a flow for time `tau` in the given direction while accumulating
/// the Lagrangian descriptor `∫ Σ|f_i|^½ dt`. Returns the end point and the
/// descriptor value.
///
/// The state is advanced by the adaptive pair; the descriptor is integrated
/// over each accepted step on the dense output. Components of the field that
/// change sign inside a step are split at the root and integrated with nodes
/// clustered there, which absorbs the square-root cusp.
pub fn propagate_ld(
    sys: &SystemSpec,
    s0: &Vec4,
    tau: f64,
    direction: Direction,
    cfg: &IntegratorConfig,
) -> Result<(Vec4, f64)> {
    let flow = sys.flow("propagate_ld")?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("integration time must be > 0, got {tau}")));
    }
    let sign = direction.sign();
    let field = move |y: &Vec4| {
        let f = flow.field(y);
        [sign * f[0], sign * f[1], sign * f[2], sign * f[3]]
    };
    let mut solver = Dopri5::new(field, *s0, *cfg)?;
    let mut f_prev = *solver.derivative();
    let mut ld = 0.0;
    while solver.t() < tau {
        solver.step(tau)?;
        let f_now = *solver.derivative();
        ld += step_descriptor(
            |t| field(&solver.dense(t)),
            solver.t_prev(),
            solver.t(),
            &f_prev,
            &f_now,
        );
        f_prev = f_now;
    }
    Ok((*solver.y(), ld))
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
const GL_NODES: [f64; 6] = [
    0.033_765_242_898_423_98,
    0.169_395_306_766_867_74,
    0.380_690_406_958_401_55,
    0.619_309_593_041_598_5,
    0.830_604_693_233_132_3,
    0.966_234_757_101_576,
];
const GL_WEIGHTS: [f64; 6] = [
    0.085_662_246_189_585_17,
    0.180_380_786_524_069_3,
    0.233_956_967_286_345_5,
    0.233_956_967_286_345_5,
    0.180_380_786_524_069_3,
    0.085_662_246_189_585_17,
];

/// `∫_a^b Σ|f_i(t)|^½ dt` given the field along the step and at its ends.
fn step_descriptor(eval: impl Fn(f64) -> Vec4, a: f64, b: f64, fa: &Vec4, fb: &Vec4) -> f64 {
    let h = b - a;
    let mut plain = [false; 4];
    let mut total = 0.0;
    for i in 0..4 {
        let crosses = fa[i] == 0.0 || fb[i] == 0.0 || (fa[i] < 0.0) != (fb[i] < 0.0);
        if crosses {
            let root = if fa[i] == 0.0 {
                a
            } else if fb[i] == 0.0 {
                b
            } else {
                find_root(|t| eval(t)[i], a, b, fa[i], fb[i])
            };
            total += clustered(&eval, i, root, a) + clustered(&eval, i, root, b);
        } else if fa[i].abs().min(fb[i].abs()) < (fb[i] - fa[i]).abs() {
            match outside_root(|t| eval(t)[i], a, b, fa[i], fb[i]) {
                Some(root) => total += anchored(&eval, i, root, a, b),
                None => plain[i] = true,
            }
        } else {
            plain[i] = true;
        }
    }
    if plain.iter().any(|&p| p) {
        let mut acc = 0.0;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let f = eval(a + h * x);
            acc += w * (0..4).filter(|&i| plain[i]).map(|i| f[i].abs().sqrt()).sum::<f64>();
        }
        total += acc * h;
    }
    total
}

/// `|∫_root^end |f_i|^½ dt|` with the substitution `t = root + (end − root) s²`,
/// which turns a square-root endpoint singularity into a smooth integrand.
fn clustered(eval: &impl Fn(f64) -> Vec4, i: usize, root: f64, end: f64) -> f64 {
    let len = end - root;
    if len == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (s, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        acc += w * 2.0 * s * eval(root + len * s * s)[i].abs().sqrt();
    }
    acc * len.abs()
}

/// `∫_a^b |f_i|^½ dt` for a root just outside `[a, b]`, using
/// `t = root ± s²` so the nearby singularity becomes smooth in `s`.
fn anchored(eval: &impl Fn(f64) -> Vec4, i: usize, root: f64, a: f64, b: f64) -> f64 {
    let dir = if root <= a { 1.0 } else { -1.0 };
    let (s0, s1) = ((a - root).abs().sqrt(), (b - root).abs().sqrt());
    let (lo, hi) = (s0.min(s1), s0.max(s1));
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        let s = lo + (hi - lo) * x;
        acc += w * 2.0 * s * eval(root + dir * s * s)[i].abs().sqrt();
    }
    acc * (hi - lo)
}

/// Secant search for a simple root of the step polynomial within one step
/// length outside `[a, b]`.
fn outside_root(g: impl Fn(f64) -> f64, a: f64, b: f64, ga: f64, gb: f64) -> Option<f64> {
    let h = b - a;
    let (mut t0, mut g0, mut t1, mut g1) = if ga.abs() < gb.abs() { (b, gb, a, ga) } else { (a, ga, b, gb) };
    for _ in 0..30 {
        if g1 == g0 {
            return None;
        }
        let t2 = t1 - g1 * (t1 - t0) / (g1 - g0);
        if !(t2 > a - h && t2 < b + h) {
            return None;
        }
        (t0, g0) = (t1, g1);
        t1 = t2;
        g1 = g(t1);
        if g1 == 0.0 || (t1 - t0).abs() <= 1e-15 * h.abs().max(t1.abs()) {
            break;
        }
    }
    let outside = t1 <= a || t1 >= b;
    (outside && g1.abs() <= 1e-12 * ga.abs().max(gb.abs())).then_some(t1)
}

/// Illinois regula falsi on a bracketing interval.
fn find_root(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut ga: f64, mut gb: f64) -> f64 {
    let mut side = 0;
    for _ in 0..100 {
        let c = (a * gb - b * ga) / (gb - ga);
        if !(c > a.min(b) && c < a.max(b)) || (b - a).abs() <= 4.0 * f64::EPSILON * a.abs().max(1.0) {
            return 0.5 * (a + b);
        }
        let gc = g(c);
        if gc == 0.0 {
            return c;
        }
        if (gc < 0.0) == (gb < 0.0) {
            b = c;
            gb = gc;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            ga = gc;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (a + b)
}

fn mat4_vec(m: &[[f64; 4]; 4], v: &[f64]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (r, row) in m.iter().enumerate() {
        out[r] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
    }
    out
}

/// SALI of a flow orbit from the canonical deviation vectors `e1`, `e2`.
pub fn propagate_sali(
    sys: &SystemSpec,
    s0: &Vec4,
    t_max: f64,
    sample_ratio: f64,
    cfg: &IntegratorConfig,
) -> Result<SaliSeries> {
    let e1 = [1.0, 0.0, 0.0, 0.0];
    let e2 = [0.0, 1.0, 0.0, 0.0];
    propagate_sali_with(sys, AugmentedState::new(*s0, e1, e2), t_max, sample_ratio, cfg)
}

/// SALI of a flow orbit from arbitrary initial deviation vectors.
///
/// Both vectors follow `dw/dt = J(x(t)) w` along the integrated orbit and are
/// renormalised after every accepted step.
pub fn propagate_sali_with(
    sys: &SystemSpec,
    init: AugmentedState<4>,
    t_max: f64,
    sample_ratio: f64,
    cfg: &IntegratorConfig,
) -> Result<SaliSeries> {
    let flow = sys.flow("propagate_sali")?;
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_max must be > 0, got {t_max}")));
    }
    let mut sched = Schedule::new(sample_ratio, false)?;
    let mut aug = init;
    let mut series = SaliSeries {
        times: Vec::new(),
        log10_sali: Vec::new(),
        floor_hit: false,
        fitted_rate: None,
        final_state: aug.state.to_vec(),
    };
    if norm(&aug.w1) == 0.0 || norm(&aug.w2) == 0.0 {
        return Err(Error::InvalidParameter("deviation vectors must be nonzero".into()));
    }
    aug.renormalize();
    let sali0 = aug.sali();
    series.push(0.0, sali0);
    if sali0 < SALI_FLOOR {
        series.floor_hit = true;
        return Ok(series);
    }

    let rhs = move |y: &[f64; 12]| {
        let s = [y[0], y[1], y[2], y[3]];
        let f = flow.field(&s);
        let j = flow.jacobian(&s);
        let a = mat4_vec(&j, &y[4..8]);
        let b = mat4_vec(&j, &y[8..12]);
        [
            f[0], f[1], f[2], f[3], a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3],
        ]
    };
    let mut y0 = [0.0; 12];
    y0[..4].copy_from_slice(&aug.state);
    y0[4..8].copy_from_slice(&aug.w1);
    y0[8..12].copy_from_slice(&aug.w2);
    let mut solver = Dopri5::new(rhs, y0, *cfg)?;
    while solver.t() < t_max {
        solver.step(t_max)?;
        let y = *solver.y();
        let n1 = norm(&[y[4], y[5], y[6], y[7]]);
        let n2 = norm(&[y[8], y[9], y[10], y[11]]);
        solver.scale_linear_components(4..8, 1.0 / n1);
        solver.scale_linear_components(8..12, 1.0 / n2);
        let y = solver.y();
        let w1 = [y[4], y[5], y[6], y[7]];
        let w2 = [y[8], y[9], y[10], y[11]];
        let sali = sali_of(&w1, &w2);
        let t = solver.t();
        let last = t >= t_max;
        if sali < SALI_FLOOR || last || sched.due(t) {
            series.push(t, sali);
            sched.advance(t);
        }
        if sali < SALI_FLOOR {
            series.floor_hit = true;
            break;
        }
    }
    series.final_state = solver.y()[..4].to_vec();
    Ok(series)
}

/// Discrete Lagrangian descriptor over `n` iterations of the Standard Map,
/// `Σ_n Σ_j |Δx^j|^½` with torus minimal-image differences. Backward
/// iterations use the exact inverse map.
pub fn iterate_map_ld(
    sys: &SystemSpec,
    s0: [f64; 2],
    n: u64,
    direction: Direction,
) -> Result<([f64; 2], f64)> {
    let map = sys.map("iterate_map_ld")?;
    if n == 0 {
        return Err(Error::InvalidParameter("iteration count must be > 0".into()));
    }
    Ok(map_ld(&map, s0, n, direction))
}

pub(crate) fn map_ld(map: &StandardMap, s0: [f64; 2], n: u64, direction: Direction) -> ([f64; 2], f64) {
    let mut s = s0;
    let mut ld = 0.0;
    for _ in 0..n {
        let next = match direction {
            Direction::Forward => map.step(s),
            Direction::Backward => map.inverse(s),
        };
        ld += torus_delta(s[0], next[0]).abs().sqrt() + torus_delta(s[1], next[1]).abs().sqrt();
        s = next;
    }
    (s, ld)
}

fn mat2_vec(m: &Mat2, v: &[f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// SALI of a Standard Map orbit over `n` iterations from canonical deviation
/// vectors.
pub fn iterate_map_sali(sys: &SystemSpec, s0: [f64; 2], n: u64, sample_ratio: f64) -> Result<SaliSeries> {
    iterate_map_sali_with(sys, AugmentedState::new(s0, [1.0, 0.0], [0.0, 1.0]), n, sample_ratio)
}

pub fn iterate_map_sali_with(
    sys: &SystemSpec,
    init: AugmentedState<2>,
    n: u64,
    sample_ratio: f64,
) -> Result<SaliSeries> {
    let map = sys.map("iterate_map_sali")?;
    let mut sched = Schedule::new(sample_ratio, true)?;
    let mut aug = init;
    if norm(&aug.w1) == 0.0 || norm(&aug.w2) == 0.0 {
        return Err(Error::InvalidParameter("deviation vectors must be nonzero".into()));
    }
    aug.renormalize();
    let mut series = SaliSeries {
        times: Vec::new(),
        log10_sali: Vec::new(),
        floor_hit: false,
        fitted_rate: None,
        final_state: aug.state.to_vec(),
    };
    let sali0 = aug.sali();
    series.push(0.0, sali0);
    if sali0 < SALI_FLOOR {
        series.floor_hit = true;
        return Ok(series);
    }
    for i in 1..=n {
        let tm = map.tangent(aug.state);
        aug.w1 = mat2_vec(&tm, &aug.w1);
        aug.w2 = mat2_vec(&tm, &aug.w2);
        aug.state = map.step(aug.state);
        aug.renormalize();
        let t = i as f64;
        let sali = aug.sali();
        if sali < SALI_FLOOR || i == n || sched.due(t) {
            series.push(t, sali);
            sched.advance(t);
        }
        if sali < SALI_FLOOR {
            series.floor_hit = true;
            break;
        }
    }
    series.final_state = aug.state.to_vec();
    Ok(series)
}

/// Up to `n_crossings` intersections of an orbit with `section`, taken in
/// the direction where the constrained momentum has the section's sign.
/// Each crossing is refined on the dense output until the fixed coordinate
/// is within 1e-10 of its section value. Returns slice-plane points.
pub fn poincare_section(
    sys: &SystemSpec,
    s0: &Vec4,
    section: &SectionSpec,
    n_crossings: usize,
    t_max: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<[f64; 2]>> {
    Ok(poincare_states(sys, s0, section, n_crossings, t_max, cfg)?
        .iter()
        .map(|s| section.project(s))
        .collect())
}

/// Like [`poincare_section`] but returns the full interpolated states.
pub fn poincare_states(
    sys: &SystemSpec,
    s0: &Vec4,
    section: &SectionSpec,
    n_crossings: usize,
    t_max: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<Vec4>> {
    let flow: Flow = sys.flow("poincare_section")?;
    let mut out = Vec::new();
    if n_crossings == 0 {
        return Ok(out);
    }
    let g = |s: &Vec4| s[section.fixed] - section.fixed_value;
    let sign_ok = |s: &Vec4| match section.sign {
        crate::systems::MomentumSign::Positive => s[section.constrained] >= 0.0,
        crate::systems::MomentumSign::Negative => s[section.constrained] <= 0.0,
    };
    const TOL: f64 = 1e-10;
    if g(s0).abs() < TOL && sign_ok(s0) {
        out.push(*s0);
        if out.len() >= n_crossings {
            return Ok(out);
        }
    }
    let mut solver = Dopri5::new(move |y: &Vec4| flow.field(y), *s0, *cfg)?;
    let mut g_prev = g(s0);
    while solver.t() < t_max && out.len() < n_crossings {
        solver.step(t_max)?;
        let g_now = g(solver.y());
        if g_prev * g_now < 0.0 || (g_now == 0.0 && g_prev != 0.0) {
            let (mut lo, mut hi) = (solver.t_prev(), solver.t());
            let mut s = *solver.y();
            for _ in 0..200 {
                if g(&s).abs() < TOL || hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                s = solver.dense(mid);
                if (g(&s) < 0.0) == (g_prev < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            if sign_ok(&s) {
                s[section.fixed] = section.fixed_value;
                out.push(s);
            }
        }
        g_prev = g_now;
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
