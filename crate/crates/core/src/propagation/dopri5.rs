//! Dormand–Prince 5(4) with PI step-size control and the classical
//! fourth-order continuous extension, specialised to autonomous systems on
//! fixed-size arrays.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    /// `None` picks the first step automatically.
    pub initial_step: Option<f64>,
    pub max_steps: u64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_step: 1.0,
            initial_step: None,
            max_steps: 500_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.abs_tol = tol;
        self.rel_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.max_step > 0.0
            && self.initial_step.is_none_or(|h| h > 0.0)
            && self.max_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid integrator configuration {self:?}")))
        }
    }
}

/// Integrator state for `dy/dt = f(y)` moving forward in `t`.
pub struct Dopri5<const N: usize, F> {
    f: F,
    cfg: IntegratorConfig,
    t: f64,
    y: [f64; N],
    k1: [f64; N],
    h: f64,
    fac_old: f64,
    steps: u64,
    t_prev: f64,
    h_last: f64,
    cont: [[f64; N]; 5],
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

impl<const N: usize, F: FnMut(&[f64; N]) -> [f64; N]> Dopri5<N, F> {
    pub fn new(mut f: F, y0: [f64; N], cfg: IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        let k1 = f(&y0);
        let mut s = Dopri5 {
            f,
            cfg,
            t: 0.0,
            y: y0,
            k1,
            h: 0.0,
            fac_old: 1e-4,
            steps: 0,
            t_prev: 0.0,
            h_last: 0.0,
            cont: [[0.0; N]; 5],
        };
        s.h = match cfg.initial_step {
            Some(h) => h.min(cfg.max_step),
            None => s.initial_step(),
        };
        Ok(s)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    /// Derivative at the current point (first stage of the next step).
    pub fn derivative(&self) -> &[f64; N] {
        &self.k1
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Start of the last accepted step.
    pub fn t_prev(&self) -> f64 {
        self.t_prev
    }

    fn scale(&self, a: &[f64; N], b: &[f64; N], i: usize) -> f64 {
        self.cfg.abs_tol + self.cfg.rel_tol * a[i].abs().max(b[i].abs())
    }

    fn initial_step(&mut self) -> f64 {
        let y = self.y;
        let k1 = self.k1;
        let (mut dnf, mut dny) = (0.0, 0.0);
        for i in 0..N {
            let sk = self.scale(&y, &y, i);
            dnf += (k1[i] / sk).powi(2);
            dny += (y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(self.cfg.max_step);
        let y1 = axpy(&y, h, &[(1.0, &k1)]);
        let k2 = (self.f)(&y1);
        let mut der2 = 0.0;
        for i in 0..N {
            der2 += ((k2[i] - k1[i]) / self.scale(&y, &y, i)).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(0.2)
        };
        (100.0 * h).min(h1).min(self.cfg.max_step)
    }

    /// Advances by one accepted step without passing `t_end`.
    pub fn step(&mut self, t_end: f64) -> Result<()> {
        if self.t >= t_end {
            return Ok(());
        }
        let expo = 0.2 - BETA * 0.75;
        let mut last_rejected = false;
        loop {
            if self.steps >= self.cfg.max_steps {
                return Err(Error::Integration {
                    t: self.t,
                    reason: "maximum number of steps exceeded",
                });
            }
            let mut h = self.h.min(self.cfg.max_step);
            let remaining = t_end - self.t;
            if h >= remaining * (1.0 - 1e-12) {
                h = remaining;
            }
            if h.abs() <= 1e-14 * self.t.abs().max(1.0) && h < remaining {
                return Err(Error::Integration {
                    t: self.t,
                    reason: "step size underflow",
                });
            }
            let y = &self.y;
            let k1 = self.k1;
            let k2 = (self.f)(&axpy(y, h, &[(A21, &k1)]));
            let k3 = (self.f)(&axpy(y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = (self.f)(&axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = (self.f)(&axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = (self.f)(&axpy(
                y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ));
            let y1 = axpy(
                y,
                h,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let k7 = (self.f)(&y1);
            self.steps += 1;

            let mut err = 0.0;
            for i in 0..N {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                err += (e / self.scale(y, &y1, i)).powi(2);
            }
            let err = (err / N as f64).sqrt();
            if !err.is_finite() {
                self.h = h * FAC_MIN;
                last_rejected = true;
                continue;
            }
            let fac11 = err.powf(expo);
            if err <= 1.0 {
                let mut fac = fac11 / self.fac_old.powf(BETA);
                fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut h_new = h / fac;
                if last_rejected {
                    h_new = h_new.min(h);
                }
                self.fac_old = err.max(1e-4);
                for i in 0..N {
                    let ydiff = y1[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    self.cont[0][i] = y[i];
                    self.cont[1][i] = ydiff;
                    self.cont[2][i] = bspl;
                    self.cont[3][i] = ydiff - h * k7[i] - bspl;
                    self.cont[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                self.t_prev = self.t;
                self.h_last = h;
                self.t = if h == remaining { t_end } else { self.t + h };
                self.y = y1;
                self.k1 = k7;
                self.h = h_new;
                return Ok(());
            }
            self.h = h / (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }

    /// Continuous extension over the last accepted step, `t_prev <= t <= t`.
    pub fn dense(&self, t: f64) -> [f64; N] {
        let theta = if self.h_last > 0.0 {
            (t - self.t_prev) / self.h_last
        } else {
            1.0
        };
        let theta1 = 1.0 - theta;
        let c = &self.cont;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = c[0][i] + theta * (c[1][i] + theta1 * (c[2][i] + theta * (c[3][i] + theta1 * c[4][i])));
        }
        out
    }

    /// Multiplies components `range` of the state by `factor`. Valid only for
    /// components whose derivative is linear in themselves (tangent vectors),
    /// so the stored first stage can be rescaled instead of re-evaluated.
    pub fn scale_linear_components(&mut self, range: std::ops::Range<usize>, factor: f64) {
        for i in range {
            self.y[i] *= factor;
            self.k1[i] *= factor;
        }
    }

    pub fn into_state(self) -> (f64, [f64; N]) {
        (self.t, self.y)
    }
}
