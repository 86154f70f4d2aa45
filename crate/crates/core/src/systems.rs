//! The four model systems: the double pendulum, the four-well potential and
//! the Hénon-Heiles potential (continuous, two degrees of freedom) and the
//! Chirikov Standard Map on the unit torus.
//!
//! Continuous states are laid out as `[q1, q2, p1, p2]`, positions first.
//! Map states are `[x, y]` with both coordinates in `[0, 1)`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec4 = [f64; 4];
pub type Mat4 = [[f64; 4]; 4];
pub type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    DoublePendulum,
    FourWell,
    HenonHeiles,
    StandardMap,
}

impl SystemKind {
    pub fn name(self) -> &'static str {
        match self {
            SystemKind::DoublePendulum => "double-pendulum",
            SystemKind::FourWell => "four-well",
            SystemKind::HenonHeiles => "henon-heiles",
            SystemKind::StandardMap => "standard-map",
        }
    }

    pub fn is_map(self) -> bool {
        self == SystemKind::StandardMap
    }

    pub fn dimension(self) -> usize {
        if self.is_map() {
            2
        } else {
            4
        }
    }
}

impl std::fmt::Display for SystemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "double-pendulum" => Ok(SystemKind::DoublePendulum),
            "four-well" => Ok(SystemKind::FourWell),
            "henon-heiles" => Ok(SystemKind::HenonHeiles),
            "standard-map" => Ok(SystemKind::StandardMap),
            other => Err(Error::InvalidParameter(format!("unknown system `{other}`"))),
        }
    }
}

/// A parameterised model system.
///
/// Serialises as `{"kind": "...", "params": {...}}`; construction through
/// serde runs the same validation as the constructors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub enum SystemSpec {
    /// `alpha = l1 / l2`, `sigma = m1 / m2`.
    DoublePendulum { alpha: f64, sigma: f64 },
    FourWell { alpha: f64, beta: f64, delta: f64 },
    HenonHeiles,
    StandardMap { k: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
enum SpecRepr {
    DoublePendulum {
        alpha: f64,
        sigma: f64,
    },
    FourWell {
        alpha: f64,
        beta: f64,
        delta: f64,
    },
    HenonHeiles {},
    StandardMap {
        #[serde(rename = "K")]
        k: f64,
    },
}

impl TryFrom<SpecRepr> for SystemSpec {
    type Error = Error;

    fn try_from(r: SpecRepr) -> Result<Self> {
        match r {
            SpecRepr::DoublePendulum { alpha, sigma } => SystemSpec::double_pendulum(alpha, sigma),
            SpecRepr::FourWell { alpha, beta, delta } => SystemSpec::four_well(alpha, beta, delta),
            SpecRepr::HenonHeiles {} => Ok(SystemSpec::HenonHeiles),
            SpecRepr::StandardMap { k } => SystemSpec::standard_map(k),
        }
    }
}

impl From<SystemSpec> for SpecRepr {
    fn from(s: SystemSpec) -> Self {
        match s {
            SystemSpec::DoublePendulum { alpha, sigma } => SpecRepr::DoublePendulum { alpha, sigma },
            SystemSpec::FourWell { alpha, beta, delta } => SpecRepr::FourWell { alpha, beta, delta },
            SystemSpec::HenonHeiles => SpecRepr::HenonHeiles {},
            SystemSpec::StandardMap { k } => SpecRepr::StandardMap { k },
        }
    }
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")))
    }
}

impl SystemSpec {
    pub fn double_pendulum(alpha: f64, sigma: f64) -> Result<Self> {
        if !(finite("alpha", alpha)? > 0.0 && finite("sigma", sigma)? > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "double pendulum needs alpha > 0 and sigma > 0, got alpha={alpha}, sigma={sigma}"
            )));
        }
        Ok(SystemSpec::DoublePendulum { alpha, sigma })
    }

    pub fn four_well(alpha: f64, beta: f64, delta: f64) -> Result<Self> {
        for (n, v) in [("alpha", alpha), ("beta", beta), ("delta", delta)] {
            if finite(n, v)? < 0.0 {
                return Err(Error::InvalidParameter(format!("four-well {n} must be >= 0, got {v}")));
            }
        }
        Ok(SystemSpec::FourWell { alpha, beta, delta })
    }

    pub fn henon_heiles() -> Self {
        SystemSpec::HenonHeiles
    }

    pub fn standard_map(k: f64) -> Result<Self> {
        if finite("K", k)? < 0.0 {
            return Err(Error::InvalidParameter(format!("standard map K must be >= 0, got {k}")));
        }
        Ok(SystemSpec::StandardMap { k })
    }

    pub fn kind(&self) -> SystemKind {
        match self {
            SystemSpec::DoublePendulum { .. } => SystemKind::DoublePendulum,
            SystemSpec::FourWell { .. } => SystemKind::FourWell,
            SystemSpec::HenonHeiles => SystemKind::HenonHeiles,
            SystemSpec::StandardMap { .. } => SystemKind::StandardMap,
        }
    }

    /// The continuous flow, or an error for the map.
    pub fn flow(&self, op: &'static str) -> Result<Flow> {
        match *self {
            SystemSpec::DoublePendulum { alpha, sigma } => Ok(Flow::DoublePendulum { alpha, sigma }),
            SystemSpec::FourWell { alpha, beta, delta } => Ok(Flow::FourWell { alpha, beta, delta }),
            SystemSpec::HenonHeiles => Ok(Flow::HenonHeiles),
            SystemSpec::StandardMap { .. } => Err(Error::Unsupported {
                op,
                kind: SystemKind::StandardMap,
            }),
        }
    }

    pub fn map(&self, op: &'static str) -> Result<StandardMap> {
        match *self {
            SystemSpec::StandardMap { k } => Ok(StandardMap { k }),
            other => Err(Error::Unsupported { op, kind: other.kind() }),
        }
    }

    pub fn vector_field(&self, s: &Vec4) -> Result<Vec4> {
        Ok(self.flow("vector_field")?.field(s))
    }

    pub fn jacobian(&self, s: &Vec4) -> Result<Mat4> {
        Ok(self.flow("jacobian")?.jacobian(s))
    }

    pub fn potential(&self, q: [f64; 2]) -> Result<f64> {
        Ok(self.flow("potential")?.potential(q))
    }

    pub fn energy(&self, s: &Vec4) -> Result<f64> {
        Ok(self.flow("energy")?.energy(s))
    }

    pub fn map_step(&self, s: [f64; 2]) -> Result<[f64; 2]> {
        Ok(self.map("map_step")?.step(s))
    }

    pub fn map_inverse(&self, s: [f64; 2]) -> Result<[f64; 2]> {
        Ok(self.map("map_inverse")?.inverse(s))
    }

    pub fn map_tangent(&self, s: [f64; 2]) -> Result<Mat2> {
        Ok(self.map("map_tangent")?.tangent(s))
    }

    pub fn solve_constrained_momentum(
        &self,
        section: &SectionSpec,
        slice_point: [f64; 2],
        energy: f64,
    ) -> Result<Vec4> {
        self.flow("solve_constrained_momentum")?
            .solve_constrained_momentum(section, slice_point, energy)
    }

    /// Section used for sampling and neighbour grids.
    pub fn default_section(&self) -> Result<SectionSpec> {
        Ok(self.flow("default_section")?.default_section())
    }
}

/// A point in phase space of either dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhaseState {
    Flow(Vec4),
    Map([f64; 2]),
}

impl PhaseState {
    pub fn coords(&self) -> &[f64] {
        match self {
            PhaseState::Flow(s) => s,
            PhaseState::Map(s) => s,
        }
    }

    pub fn from_slice(kind: SystemKind, coords: &[f64]) -> Result<Self> {
        let expected = kind.dimension();
        if coords.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: coords.len(),
            });
        }
        if kind.is_map() {
            let s = [coords[0], coords[1]];
            if !s.iter().all(|c| (0.0..1.0).contains(c)) {
                return Err(Error::InvalidParameter(format!(
                    "standard map coordinates must lie in [0,1), got {s:?}"
                )));
            }
            Ok(PhaseState::Map(s))
        } else {
            Ok(PhaseState::Flow([coords[0], coords[1], coords[2], coords[3]]))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentumSign {
    Positive,
    Negative,
}

/// A two-dimensional slice of the energy shell.
///
/// One position is held at `fixed_value`, the two `slice` coordinates are
/// free, and the momentum `constrained` is recovered from the energy with
/// the given sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec {
    pub slice: [usize; 2],
    pub fixed: usize,
    pub fixed_value: f64,
    pub constrained: usize,
    pub sign: MomentumSign,
}

impl SectionSpec {
    pub fn new(
        slice: [usize; 2],
        fixed: usize,
        fixed_value: f64,
        constrained: usize,
        sign: MomentumSign,
    ) -> Result<Self> {
        let idx = [slice[0], slice[1], fixed, constrained];
        let distinct = (0..4).all(|i| (i + 1..4).all(|j| idx[i] != idx[j]));
        if !distinct || idx.iter().any(|&i| i > 3) {
            return Err(Error::InvalidParameter(format!(
                "section indices must be distinct and < 4, got slice={slice:?} fixed={fixed} constrained={constrained}"
            )));
        }
        if fixed > 1 || constrained < 2 {
            return Err(Error::InvalidParameter(
                "section must fix a position and constrain a momentum".into(),
            ));
        }
        Ok(SectionSpec {
            slice,
            fixed,
            fixed_value,
            constrained,
            sign,
        })
    }

    /// Places slice coordinates and the fixed value into a state; the
    /// constrained momentum is left at zero.
    pub fn embed(&self, slice_point: [f64; 2]) -> Vec4 {
        let mut s = [0.0; 4];
        s[self.slice[0]] = slice_point[0];
        s[self.slice[1]] = slice_point[1];
        s[self.fixed] = self.fixed_value;
        s
    }

    pub fn project(&self, s: &Vec4) -> [f64; 2] {
        [s[self.slice[0]], s[self.slice[1]]]
    }

    /// Index of the position not held fixed.
    pub fn free_position(&self) -> usize {
        1 - self.fixed
    }

    /// Index of the momentum that is not constrained.
    pub fn free_momentum(&self) -> usize {
        5 - self.constrained
    }
}

/// A continuous two-degree-of-freedom Hamiltonian flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flow {
    DoublePendulum { alpha: f64, sigma: f64 },
    FourWell { alpha: f64, beta: f64, delta: f64 },
    HenonHeiles,
}

/// Inverse mass matrix of the double pendulum as a function of `x = cos(θ2 − θ1)`
/// together with its first two derivatives in `x`.
fn dp_inverse_mass(alpha: f64, sigma: f64, x: f64) -> (Mat2, Mat2, Mat2) {
    let d = 1.0 + sigma - x * x;
    let a = [[1.0 / (alpha * alpha), -x / alpha], [-x / alpha, 1.0 + sigma]];
    // dA/dx; A is linear in x.
    let da = [[0.0, -1.0 / alpha], [-1.0 / alpha, 0.0]];
    let inv_d = 1.0 / d;
    let g1 = 2.0 * x * inv_d * inv_d;
    let g2 = 2.0 * inv_d * inv_d + 8.0 * x * x * inv_d * inv_d * inv_d;
    let mut g = [[0.0; 2]; 2];
    let mut dg = [[0.0; 2]; 2];
    let mut ddg = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            g[i][j] = a[i][j] * inv_d;
            dg[i][j] = da[i][j] * inv_d + a[i][j] * g1;
            ddg[i][j] = 2.0 * da[i][j] * g1 + a[i][j] * g2;
        }
    }
    (g, dg, ddg)
}

#[inline]
fn mat2_vec(m: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

#[inline]
fn quad2(m: &Mat2, v: [f64; 2]) -> f64 {
    let mv = mat2_vec(m, v);
    v[0] * mv[0] + v[1] * mv[1]
}

impl Flow {
    pub fn kind(&self) -> SystemKind {
        match self {
            Flow::DoublePendulum { .. } => SystemKind::DoublePendulum,
            Flow::FourWell { .. } => SystemKind::FourWell,
            Flow::HenonHeiles => SystemKind::HenonHeiles,
        }
    }

    pub fn potential(&self, q: [f64; 2]) -> f64 {
        let [x, y] = q;
        match *self {
            Flow::DoublePendulum { alpha, sigma } => -alpha * (1.0 + sigma) * x.cos() - y.cos(),
            Flow::FourWell { alpha, beta, delta } => {
                let (x2, y2) = (x * x, y * y);
                x2 * x2 - alpha * x2 - delta * x + y2 * y2 - y2 + beta * x2 * y2
            }
            Flow::HenonHeiles => 0.5 * (x * x + y * y) + x * x * y - y * y * y / 3.0,
        }
    }

    /// Inverse mass matrix `G(q)` so that the kinetic energy is `½ pᵀ G p`.
    pub fn inverse_mass(&self, q: [f64; 2]) -> Mat2 {
        match *self {
            Flow::DoublePendulum { alpha, sigma } => dp_inverse_mass(alpha, sigma, (q[1] - q[0]).cos()).0,
            _ => [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// Diagonal entry of the mass matrix for momentum `i` (0 or 1); constant
    /// in the configuration for all three flows.
    pub fn mass_diagonal(&self, i: usize) -> f64 {
        match *self {
            Flow::DoublePendulum { alpha, sigma } if i == 0 => alpha * alpha * (1.0 + sigma),
            _ => 1.0,
        }
    }

    pub fn energy(&self, s: &Vec4) -> f64 {
        let q = [s[0], s[1]];
        let p = [s[2], s[3]];
        0.5 * quad2(&self.inverse_mass(q), p) + self.potential(q)
    }

    pub fn field(&self, s: &Vec4) -> Vec4 {
        let [x, y, px, py] = *s;
        match *self {
            Flow::HenonHeiles => [px, py, -x - 2.0 * x * y, -y - x * x + y * y],
            Flow::FourWell { alpha, beta, delta } => [
                px,
                py,
                -4.0 * x * x * x + 2.0 * alpha * x + delta - 2.0 * beta * x * y * y,
                -4.0 * y * y * y + 2.0 * y - 2.0 * beta * x * x * y,
            ],
            Flow::DoublePendulum { alpha, sigma } => {
                let (sd, cd) = (y - x).sin_cos();
                let (g, dg, _) = dp_inverse_mass(alpha, sigma, cd);
                let p = [px, py];
                let qdot = mat2_vec(&g, p);
                let h = 0.5 * quad2(&dg, p) * sd;
                [
                    qdot[0],
                    qdot[1],
                    -h - alpha * (1.0 + sigma) * x.sin(),
                    h - y.sin(),
                ]
            }
        }
    }

    pub fn jacobian(&self, s: &Vec4) -> Mat4 {
        let [x, y, px, py] = *s;
        match *self {
            Flow::HenonHeiles => [
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
                [-1.0 - 2.0 * y, -2.0 * x, 0.0, 0.0],
                [-2.0 * x, -1.0 + 2.0 * y, 0.0, 0.0],
            ],
            Flow::FourWell { alpha, beta, .. } => {
                let cross = -4.0 * beta * x * y;
                [
                    [0.0, 0.0, 1.0, 0.0],
                    [0.0, 0.0, 0.0, 1.0],
                    [-12.0 * x * x + 2.0 * alpha - 2.0 * beta * y * y, cross, 0.0, 0.0],
                    [cross, -12.0 * y * y + 2.0 - 2.0 * beta * x * x, 0.0, 0.0],
                ]
            }
            Flow::DoublePendulum { alpha, sigma } => {
                let (sd, cd) = (y - x).sin_cos();
                let (g, dg, ddg) = dp_inverse_mass(alpha, sigma, cd);
                let p = [px, py];
                let dgp = mat2_vec(&dg, p);
                let q = 0.5 * quad2(&dg, p);
                let q_c = 0.5 * quad2(&ddg, p);
                // h = Q(cos Δ, p) sin Δ with Δ = θ2 − θ1.
                let dh_dx = q_c * sd * sd - q * cd;
                let dh_dy = -dh_dx;
                let a = alpha * (1.0 + sigma);
                [
                    [dgp[0] * sd, -dgp[0] * sd, g[0][0], g[0][1]],
                    [dgp[1] * sd, -dgp[1] * sd, g[1][0], g[1][1]],
                    [-dh_dx - a * x.cos(), -dh_dy, -sd * dgp[0], -sd * dgp[1]],
                    [dh_dx, dh_dy - y.cos(), sd * dgp[0], sd * dgp[1]],
                ]
            }
        }
    }

    /// Global minimum of the potential energy surface and its location.
    pub fn potential_minimum(&self) -> (f64, [f64; 2]) {
        match *self {
            Flow::DoublePendulum { alpha, sigma } => (-alpha * (1.0 + sigma) - 1.0, [0.0, 0.0]),
            Flow::HenonHeiles => (0.0, [0.0, 0.0]),
            Flow::FourWell { .. } => {
                let mut best = (f64::INFINITY, [0.0, 0.0]);
                for sx in [-1.5, -0.7, 0.0, 0.7, 1.5] {
                    for sy in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                        let q = self.newton_critical([sx, sy]);
                        let v = self.potential(q);
                        if v < best.0 && self.is_local_minimum(q) {
                            best = (v, q);
                        }
                    }
                }
                best
            }
        }
    }

    fn gradient_hessian(&self, q: [f64; 2]) -> ([f64; 2], Mat2) {
        let j = self.jacobian(&[q[0], q[1], 0.0, 0.0]);
        let f = self.field(&[q[0], q[1], 0.0, 0.0]);
        // For p = 0 the force rows are −∇V and −Hess V.
        ([-f[2], -f[3]], [[-j[2][0], -j[2][1]], [-j[3][0], -j[3][1]]])
    }

    fn is_local_minimum(&self, q: [f64; 2]) -> bool {
        let (g, h) = self.gradient_hessian(q);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        g[0].abs() < 1e-10 && g[1].abs() < 1e-10 && h[0][0] > 0.0 && det > 0.0
    }

    fn newton_critical(&self, mut q: [f64; 2]) -> [f64; 2] {
        for _ in 0..100 {
            let (g, h) = self.gradient_hessian(q);
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            if det.abs() < 1e-14 {
                break;
            }
            let dx = (h[1][1] * g[0] - h[0][1] * g[1]) / det;
            let dy = (h[0][0] * g[1] - h[1][0] * g[0]) / det;
            q = [q[0] - dx, q[1] - dy];
            if dx.abs() + dy.abs() < 1e-15 {
                break;
            }
        }
        q
    }

    pub fn default_section(&self) -> SectionSpec {
        let (slice, fixed, constrained) = match self {
            // x = 0, p_x >= 0; slice (y, p_y).
            Flow::HenonHeiles => ([1, 3], 0, 2),
            // y = 0, p_y >= 0; slice (x, p_x).
            Flow::FourWell { .. } => ([0, 2], 1, 3),
            // θ1 = 0, p1 >= 0; slice (θ2, p2).
            Flow::DoublePendulum { .. } => ([1, 3], 0, 2),
        };
        SectionSpec {
            slice,
            fixed,
            fixed_value: 0.0,
            constrained,
            sign: MomentumSign::Positive,
        }
    }

    pub fn solve_constrained_momentum(
        &self,
        section: &SectionSpec,
        slice_point: [f64; 2],
        energy: f64,
    ) -> Result<Vec4> {
        if !energy.is_finite() || !slice_point.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite energy or slice point".into()));
        }
        let mut s = section.embed(slice_point);
        let q = [s[0], s[1]];
        let g = self.inverse_mass(q);
        let c = section.constrained - 2;
        let o = 1 - c;
        let p_o = s[2 + o];
        // g_cc p² + 2 b p + r = 0
        let a = g[c][c];
        let b = g[c][o] * p_o;
        let r = g[o][o] * p_o * p_o + 2.0 * (self.potential(q) - energy);
        let disc = b * b - a * r;
        if disc < 0.0 {
            return Err(Error::Infeasible);
        }
        let sq = disc.sqrt();
        let p = match section.sign {
            MomentumSign::Positive if b > 0.0 => -r / (b + sq),
            MomentumSign::Positive => (sq - b) / a,
            MomentumSign::Negative if b < 0.0 => -r / (b - sq),
            MomentumSign::Negative => -(sq + b) / a,
        };
        let ok = match section.sign {
            MomentumSign::Positive => p >= 0.0,
            MomentumSign::Negative => p <= 0.0,
        };
        if !ok || !p.is_finite() {
            return Err(Error::Infeasible);
        }
        s[section.constrained] = p;
        // One Newton polish on the energy residual; kept only if it helps.
        let res = self.energy(&s) - energy;
        let slope = a * p + b;
        if res != 0.0 && slope.abs() > 1e-8 {
            let mut t = s;
            t[section.constrained] = p - res / slope;
            let same_sign = match section.sign {
                MomentumSign::Positive => t[section.constrained] >= 0.0,
                MomentumSign::Negative => t[section.constrained] <= 0.0,
            };
            if same_sign && (self.energy(&t) - energy).abs() < res.abs() {
                s = t;
            }
        }
        Ok(s)
    }

    /// Bounding box of the energetically allowed part of a section slice,
    /// `[[lo0, hi0], [lo1, hi1]]` for the two slice coordinates.
    ///
    /// Only sections whose slice is (free position, free momentum) are
    /// supported, which covers every default section.
    pub fn slice_bounds(&self, section: &SectionSpec, energy: f64) -> Result<[[f64; 2]; 2]> {
        let pos = section.free_position();
        let mom = section.free_momentum();
        let order = if section.slice == [pos, mom] {
            false
        } else if section.slice == [mom, pos] {
            true
        } else {
            return Err(Error::InvalidParameter(
                "slice bounds need the free position and its conjugate momentum as slice coordinates".into(),
            ));
        };
        let line = |u: f64| {
            let mut q = [0.0; 2];
            q[section.fixed] = section.fixed_value;
            q[pos] = u;
            self.potential(q)
        };
        let (lo, hi) = self.position_window(pos, energy, &line);
        const GRID: usize = 4000;
        let step = (hi - lo) / GRID as f64;
        let mut first = None;
        let mut last = None;
        let mut vmin = f64::INFINITY;
        for i in 0..=GRID {
            let u = lo + step * i as f64;
            let v = line(u);
            if v <= energy {
                first.get_or_insert(u);
                last = Some(u);
            }
            vmin = vmin.min(v);
        }
        let (Some(a), Some(b)) = (first, last) else {
            return Err(Error::DegenerateEnergy { energy });
        };
        let u_lo = (a - step).max(lo);
        let u_hi = (b + step).min(hi);
        let pmax = (2.0 * (energy - vmin).max(0.0) * self.mass_diagonal(mom - 2)).sqrt();
        let pos_range = [u_lo, u_hi];
        let mom_range = [-pmax, pmax];
        Ok(if order {
            [mom_range, pos_range]
        } else {
            [pos_range, mom_range]
        })
    }

    fn position_window(&self, coord: usize, energy: f64, line: &dyn Fn(f64) -> f64) -> (f64, f64) {
        match *self {
            Flow::DoublePendulum { .. } => (-PI, PI),
            // The bounded component of the Hill region lies inside this box
            // for every energy below the saddle energy 1/6.
            Flow::HenonHeiles => {
                if coord == 1 {
                    (-1.5, 1.0)
                } else {
                    (-1.5, 1.5)
                }
            }
            Flow::FourWell { .. } => {
                let mut r = 1.0;
                while line(r) <= energy || line(-r) <= energy {
                    r *= 2.0;
                }
                (-r, r)
            }
        }
    }
}

/// Chirikov Standard Map on the unit torus, momentum updated first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardMap {
    pub k: f64,
}

/// Reduces to `[0, 1)`, wrapping negative remainders.
#[inline]
pub fn wrap_unit(v: f64) -> f64 {
    let r = v - v.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed minimal-image difference `b - a` on the unit circle.
#[inline]
pub fn torus_delta(a: f64, b: f64) -> f64 {
    let d = b - a;
    d - d.round()
}

impl StandardMap {
    #[inline]
    pub fn kick(&self, x: f64) -> f64 {
        self.k / TAU * (TAU * x).sin()
    }

    #[inline]
    pub fn step(&self, s: [f64; 2]) -> [f64; 2] {
        let y = wrap_unit(s[1] + self.kick(s[0]));
        let x = wrap_unit(s[0] + y);
        [x, y]
    }

    #[inline]
    pub fn inverse(&self, s: [f64; 2]) -> [f64; 2] {
        let x = wrap_unit(s[0] - s[1]);
        let y = wrap_unit(s[1] - self.kick(x));
        [x, y]
    }

    /// Jacobian of [`StandardMap::step`] at `s`; rows are `(x', y')`.
    #[inline]
    pub fn tangent(&self, s: [f64; 2]) -> Mat2 {
        let kc = self.k * (TAU * s[0]).cos();
        [[1.0 + kc, 1.0], [kc, 1.0]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flows() -> Vec<Flow> {
        vec![
            Flow::HenonHeiles,
            Flow::FourWell { alpha: 1.0, beta: 0.25, delta: 0.1 },
            Flow::FourWell { alpha: 0.5, beta: 0.75, delta: 0.0 },
            Flow::DoublePendulum { alpha: 1.0, sigma: 1.0 },
            Flow::DoublePendulum { alpha: 2.0, sigma: 0.5 },
        ]
    }

    fn random_state(rng: &mut ChaCha8Rng) -> Vec4 {
        [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ]
    }

    #[test]
    fn equilibria_have_zero_field() {
        assert_eq!(SystemSpec::HenonHeiles.vector_field(&[0.0; 4]).unwrap(), [0.0; 4]);
        let fw = SystemSpec::four_well(1.0, 1.0, 0.0).unwrap();
        assert_eq!(fw.vector_field(&[0.0; 4]).unwrap(), [0.0; 4]);
        let dp = SystemSpec::double_pendulum(1.0, 1.0).unwrap();
        let f = dp.vector_field(&[0.0; 4]).unwrap();
        assert!(f.iter().all(|v| *v == 0.0), "{f:?}");
        // Saddle of Hénon-Heiles at (0, 1).
        let f = SystemSpec::HenonHeiles.vector_field(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(f.iter().all(|v| *v == 0.0), "{f:?}");
    }

    #[test]
    fn map_rejects_flow_operations() {
        let m = SystemSpec::standard_map(1.5).unwrap();
        assert!(matches!(m.vector_field(&[0.0; 4]), Err(Error::Unsupported { .. })));
        assert!(matches!(m.jacobian(&[0.0; 4]), Err(Error::Unsupported { .. })));
        assert!(matches!(m.energy(&[0.0; 4]), Err(Error::Unsupported { .. })));
        assert!(matches!(m.potential([0.0; 2]), Err(Error::Unsupported { .. })));
        let hh = SystemSpec::HenonHeiles;
        assert!(matches!(hh.map_step([0.0; 2]), Err(Error::Unsupported { .. })));
        assert!(matches!(hh.map_tangent([0.0; 2]), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn henon_heiles_jacobian_at_origin() {
        let j = SystemSpec::HenonHeiles.jacobian(&[0.0; 4]).unwrap();
        let expected = [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [-1.0, 0.0, 0.0, 0.0],
            [0.0, -1.0, 0.0, 0.0],
        ];
        assert_eq!(j, expected);
    }

    /// Central differences of the vector field, step 1e-6.
    fn fd_jacobian(flow: &Flow, s: &Vec4) -> Mat4 {
        let h = 1e-6;
        let mut j = [[0.0; 4]; 4];
        for c in 0..4 {
            let mut sp = *s;
            let mut sm = *s;
            sp[c] += h;
            sm[c] -= h;
            let fp = flow.field(&sp);
            let fm = flow.field(&sm);
            for r in 0..4 {
                j[r][c] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        j
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for flow in flows() {
            for _ in 0..100 {
                let s = random_state(&mut rng);
                let j = flow.jacobian(&s);
                let fd = fd_jacobian(&flow, &s);
                for r in 0..4 {
                    for c in 0..4 {
                        let (a, b) = (j[r][c], fd[r][c]);
                        if a.abs() > 1e-8 {
                            assert!(((a - b) / a).abs() < 1e-5, "{flow:?} {s:?} [{r}][{c}] {a} vs {b}");
                        } else {
                            assert!((a - b).abs() < 1e-8, "{flow:?} {s:?} [{r}][{c}] {a} vs {b}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn jacobian_is_traceless() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for flow in flows() {
            for _ in 0..20 {
                let j = flow.jacobian(&random_state(&mut rng));
                let tr: f64 = (0..4).map(|i| j[i][i]).sum();
                assert!(tr.abs() < 1e-12, "{flow:?} trace {tr}");
            }
        }
    }

    /// The force must be minus the potential gradient and the velocity the
    /// momentum gradient of the kinetic energy; checked against central
    /// differences of the energy itself.
    #[test]
    fn field_is_hamiltonian() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = 1e-6;
        for flow in flows() {
            for _ in 0..20 {
                let s = random_state(&mut rng);
                let f = flow.field(&s);
                let mut grad = [0.0; 4];
                for c in 0..4 {
                    let mut sp = s;
                    let mut sm = s;
                    sp[c] += h;
                    sm[c] -= h;
                    grad[c] = (flow.energy(&sp) - flow.energy(&sm)) / (2.0 * h);
                }
                let expected = [grad[2], grad[3], -grad[0], -grad[1]];
                for i in 0..4 {
                    assert_abs_diff_eq!(f[i], expected[i], epsilon = 1e-7);
                }
            }
        }
    }

    #[test]
    fn potential_values() {
        assert_eq!(SystemSpec::HenonHeiles.potential([0.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            SystemSpec::HenonHeiles.potential([0.0, 1.0]).unwrap(),
            1.0 / 6.0,
            epsilon = 1e-15
        );
        let dp = SystemSpec::double_pendulum(1.0, 1.0).unwrap();
        assert_eq!(dp.potential([0.0, 0.0]).unwrap(), -3.0);
        assert_eq!(dp.energy(&[0.0; 4]).unwrap(), -3.0);
        assert_abs_diff_eq!(
            SystemSpec::HenonHeiles.energy(&[0.0, 0.0, 0.5, 0.0]).unwrap(),
            0.125,
            epsilon = 1e-15
        );
    }

    #[test]
    fn four_well_symmetric_without_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let fw = Flow::FourWell { alpha: 1.0, beta: 2.0, delta: 0.0 };
        for _ in 0..100 {
            let (x, y) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            assert_eq!(fw.potential([x, y]), fw.potential([-x, y]));
        }
    }

    #[test]
    fn four_well_minimum() {
        let fw = Flow::FourWell { alpha: 1.0, beta: 0.25, delta: 0.1 };
        let (v, q) = fw.potential_minimum();
        let (g, _) = fw.gradient_hessian(q);
        assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12);
        // Coarse grid never finds anything lower.
        for i in -100..=100 {
            for j in -100..=100 {
                let p = [i as f64 * 0.02, j as f64 * 0.02];
                assert!(fw.potential(p) >= v - 1e-12);
            }
        }
    }

    #[test]
    fn standard_map_examples() {
        let m = SystemSpec::standard_map(1.3).unwrap();
        assert_eq!(m.map_step([0.0, 0.0]).unwrap(), [0.0, 0.0]);
        let s = m.map_step([0.5, 0.25]).unwrap();
        assert_abs_diff_eq!(s[0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(s[1], 0.25, epsilon = 1e-15);
        let m = SystemSpec::standard_map(TAU * 0.1).unwrap();
        let s = m.map_step([0.25, 0.0]).unwrap();
        assert_abs_diff_eq!(s[1], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(s[0], 0.35, epsilon = 1e-15);
    }

    #[test]
    fn wrap_handles_negative_remainders() {
        assert_eq!(wrap_unit(-0.25), 0.75);
        assert_eq!(wrap_unit(1.0), 0.0);
        assert_eq!(wrap_unit(-1e-20), 0.0);
        assert_abs_diff_eq!(torus_delta(0.99, 0.01), 0.02, epsilon = 1e-15);
    }

    #[test]
    fn tangent_map_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let m = StandardMap { k: 1.5 };
        for _ in 0..100 {
            let t = m.tangent([rng.gen(), rng.gen()]);
            let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
            assert!((det - 1.0).abs() < 1e-12);
        }
        let shear = StandardMap { k: 0.0 }.tangent([0.3, 0.7]);
        assert_eq!(shear, [[1.0, 1.0], [0.0, 1.0]]);
        // Finite differences at x = 0.5 (cos term equals −1), away from wraps.
        let s = [0.5, 0.2];
        let t = m.tangent(s);
        let h = 1e-6;
        for c in 0..2 {
            let mut sp = s;
            let mut sm = s;
            sp[c] += h;
            sm[c] -= h;
            let (fp, fm) = (m.step(sp), m.step(sm));
            for r in 0..2 {
                let fd = torus_delta(fm[r], fp[r]) / (2.0 * h);
                assert!((fd - t[r][c]).abs() < 1e-5, "[{r}][{c}] {fd} vs {}", t[r][c]);
            }
        }
        assert_abs_diff_eq!(t[0][0], 1.0 - 1.5, epsilon = 1e-15);
    }

    #[test]
    fn map_inverse_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let m = StandardMap { k: 0.971635 };
        for _ in 0..1000 {
            let s = [rng.gen::<f64>(), rng.gen::<f64>()];
            let back = m.inverse(m.step(s));
            assert!(torus_delta(s[0], back[0]).abs() < 1e-12);
            assert!(torus_delta(s[1], back[1]).abs() < 1e-12);
            assert!(back.iter().all(|v| (0.0..1.0).contains(v)));
        }
    }

    #[test]
    fn constrained_momentum_examples() {
        let hh = SystemSpec::HenonHeiles;
        let sec = hh.default_section().unwrap();
        let s = hh.solve_constrained_momentum(&sec, [0.0, 0.0], 0.125).unwrap();
        assert_abs_diff_eq!(s[2], 0.5, epsilon = 1e-15);
        assert!(matches!(
            hh.solve_constrained_momentum(&sec, [0.0, 0.6], 0.125),
            Err(Error::Infeasible)
        ));
        let fw = Flow::FourWell { alpha: 1.0, beta: 0.25, delta: 0.1 };
        let sec = fw.default_section();
        // Minimum of the potential along the section line y = 0.
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=40000 {
            let x = -2.0 + 1e-4 * i as f64;
            let v = fw.potential([x, 0.0]);
            if v < best.0 {
                best = (v, x);
            }
        }
        let s = fw.solve_constrained_momentum(&sec, [best.1, 0.0], best.0).unwrap();
        assert_eq!(s[3], 0.0);
    }

    #[test]
    fn constrained_momentum_conserves_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cases = [
            (Flow::HenonHeiles, 0.125),
            (Flow::FourWell { alpha: 1.0, beta: 1.0, delta: 0.1 }, 0.3),
            (Flow::DoublePendulum { alpha: 1.0, sigma: 1.0 }, -1.0),
            (Flow::DoublePendulum { alpha: 0.5, sigma: 2.0 }, 2.5),
        ];
        for (flow, e) in cases {
            let sec = flow.default_section();
            let b = flow.slice_bounds(&sec, e).unwrap();
            let mut hits = 0;
            for _ in 0..2000 {
                let pt = [rng.gen_range(b[0][0]..b[0][1]), rng.gen_range(b[1][0]..b[1][1])];
                if let Ok(s) = flow.solve_constrained_momentum(&sec, pt, e) {
                    hits += 1;
                    assert!((flow.energy(&s) - e).abs() < 1e-12, "{flow:?} {s:?}");
                    assert!(s[sec.constrained] >= 0.0);
                    assert_eq!(s[sec.fixed], 0.0);
                }
            }
            assert!(hits > 100, "{flow:?} only {hits} feasible draws");
        }
    }

    #[test]
    fn slice_bounds_contain_all_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let flow = Flow::HenonHeiles;
        let sec = flow.default_section();
        let b = flow.slice_bounds(&sec, 0.125).unwrap();
        for _ in 0..20000 {
            let pt = [rng.gen_range(-1.5..1.0), rng.gen_range(-1.0..1.0)];
            if flow.solve_constrained_momentum(&sec, pt, 0.125).is_ok() && pt[0] < 1.0 {
                assert!(pt[0] >= b[0][0] && pt[0] <= b[0][1], "{pt:?} {b:?}");
                assert!(pt[1] >= b[1][0] && pt[1] <= b[1][1], "{pt:?} {b:?}");
            }
        }
    }

    #[test]
    fn spec_json_roundtrip_and_validation() {
        let s = SystemSpec::four_well(1.0, 0.25, 0.1).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"kind":"four-well","params":{"alpha":1.0,"beta":0.25,"delta":0.1}}"#);
        assert_eq!(serde_json::from_str::<SystemSpec>(&j).unwrap(), s);
        let m: SystemSpec = serde_json::from_str(r#"{"kind":"standard-map","params":{"K":1.5}}"#).unwrap();
        assert_eq!(m, SystemSpec::StandardMap { k: 1.5 });
        let hh: SystemSpec = serde_json::from_str(r#"{"kind":"henon-heiles","params":{}}"#).unwrap();
        assert_eq!(hh, SystemSpec::HenonHeiles);
        assert!(serde_json::from_str::<SystemSpec>(
            r#"{"kind":"four-well","params":{"alpha":-1.0,"beta":0.25,"delta":0.1}}"#
        )
        .is_err());
        assert!(serde_json::from_str::<SystemSpec>(
            r#"{"kind":"double-pendulum","params":{"alpha":0.0,"sigma":1.0}}"#
        )
        .is_err());
    }

    #[test]
    fn section_validation() {
        assert!(SectionSpec::new([1, 3], 0, 0.0, 2, MomentumSign::Positive).is_ok());
        assert!(SectionSpec::new([1, 1], 0, 0.0, 2, MomentumSign::Positive).is_err());
        assert!(SectionSpec::new([0, 3], 1, 0.0, 0, MomentumSign::Positive).is_err());
    }
}
