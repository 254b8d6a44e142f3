//! Copulae generated by a Brownian motion (or a correlated partner) and a
//! running maximum.
//!
//! Internally every evaluation works in the coordinates `z = Phi^-1(u)` for
//! the terminal value and `y = zeta(v)` for the maximum, where `zeta` is the
//! quantile function of the maximum. Drifts are per unit time and the
//! volatility is fixed to one.

use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bm_joint::{unit_cdf_mst, unit_cdf_mt, unit_pdf_mst, unit_pdf_mt};
use crate::error::{domain, Error, Result};
use crate::gauss::{
    cdf, cdf2_raw, cdf3_raw, exp_scaled_cdf, exp_scaled_cdf2, exp_scaled_cdf3, quantile, CorrelationMatrix3,
};

const LIMIT_GAP: f64 = 1e-12;
/// Number of Chebyshev nodes in a [`QuantileCache`].
pub const CACHE_NODES: usize = 4096;
/// Samples per RNG stream. Fixed so output does not depend on thread count.
pub const SAMPLE_BLOCK: usize = 4096;

/// The copula families. Times satisfy `0 <= s < t <= horizon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CopulaKind {
    /// `(W_t, M_t)` for a driftless motion.
    BmMax { t: f64 },
    /// `(W_t, M_t)` with drift `mu`.
    BmMaxDrift { mu: f64, t: f64 },
    /// `(W_T, M_t)`.
    TerminalVsMax { mu: f64, t: f64, horizon: f64 },
    /// `(W_T, M_(s,t))`.
    TerminalVsWindowMax { mu: f64, s: f64, t: f64, horizon: f64 },
    /// `(B1_T, M2_(s,t))` for correlated motions; `B1` is driftless.
    CorrTerminalVsMax { mu: f64, rho: f64, s: f64, t: f64, horizon: f64 },
}

impl CopulaKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::BmMax { .. } => "bm-max",
            Self::BmMaxDrift { .. } => "bm-max-drift",
            Self::TerminalVsMax { .. } => "terminal-vs-max",
            Self::TerminalVsWindowMax { .. } => "terminal-vs-window-max",
            Self::CorrTerminalVsMax { .. } => "corr-terminal-vs-max",
        }
    }

    /// `key=value` rendering of the parameters, space separated.
    pub fn describe(&self) -> String {
        match *self {
            Self::BmMax { t } => format!("kind={} t={t}", self.name()),
            Self::BmMaxDrift { mu, t } => format!("kind={} mu={mu} t={t}", self.name()),
            Self::TerminalVsMax { mu, t, horizon } => format!("kind={} mu={mu} t={t} T={horizon}", self.name()),
            Self::TerminalVsWindowMax { mu, s, t, horizon } => {
                format!("kind={} mu={mu} s={s} t={t} T={horizon}", self.name())
            }
            Self::CorrTerminalVsMax { mu, rho, s, t, horizon } => {
                format!("kind={} mu={mu} rho={rho} s={s} t={t} T={horizon}", self.name())
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |x: f64, what: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                domain(format!("{what} must be finite, got {x}"))
            }
        };
        let times = |s: f64, t: f64, h: f64| {
            if s >= 0.0 && s < t && t <= h && h.is_finite() {
                Ok(())
            } else {
                domain(format!("times must satisfy 0 <= s < t <= T, got s={s}, t={t}, T={h}"))
            }
        };
        match *self {
            Self::BmMax { t } => times(0.0, t, t),
            Self::BmMaxDrift { mu, t } => {
                finite(mu, "mu")?;
                times(0.0, t, t)
            }
            Self::TerminalVsMax { mu, t, horizon } => {
                finite(mu, "mu")?;
                times(0.0, t, horizon)
            }
            Self::TerminalVsWindowMax { mu, s, t, horizon } => {
                finite(mu, "mu")?;
                times(s, t, horizon)
            }
            Self::CorrTerminalVsMax { mu, rho, s, t, horizon } => {
                finite(mu, "mu")?;
                if !(-1.0..=1.0).contains(&rho) {
                    return domain(format!("rho must lie in [-1, 1], got {rho}"));
                }
                times(s, t, horizon)
            }
        }
    }
}

/// A point of the open unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSquarePoint {
    u: f64,
    v: f64,
}

impl UnitSquarePoint {
    pub fn new(u: f64, v: f64) -> Result<Self> {
        if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
            return domain(format!("point must lie in the open unit square, got ({u}, {v})"));
        }
        Ok(Self { u, v })
    }
    pub fn u(&self) -> f64 {
        self.u
    }
    pub fn v(&self) -> f64 {
        self.v
    }
}

/// Output of [`sample`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub kind: CopulaKind,
    pub seed: u64,
    pub pairs: Vec<[f64; 2]>,
}

/// Evaluation form after exact-limit reduction.
#[derive(Debug, Clone, Copy)]
enum Form {
    /// `(W_t, M_t)`, piecewise closed form.
    Max { mu: f64, t: f64, literal: bool },
    /// Bivariate normal form; `rho = 1` is `(W_T, M_t)`.
    Terminal { mu: f64, rho: f64, t: f64, horizon: f64 },
    /// Trivariate normal form on the window `[s, t]`.
    Window {
        mu: f64,
        rho: f64,
        s: f64,
        t: f64,
        horizon: f64,
        direct: [f64; 3],
        reflected: [f64; 3],
    },
}

impl Form {
    fn new(kind: &CopulaKind) -> Result<Self> {
        kind.validate()?;
        let terminal = |mu: f64, rho: f64, t: f64, horizon: f64| {
            if rho == 1.0 && horizon - t < LIMIT_GAP * horizon {
                Form::Max {
                    mu,
                    t: horizon,
                    literal: false,
                }
            } else {
                Form::Terminal { mu, rho, t, horizon }
            }
        };
        let window = |mu: f64, rho: f64, s: f64, t: f64, horizon: f64| -> Result<Form> {
            if s < LIMIT_GAP * t {
                return Ok(terminal(mu, rho, t, horizon));
            }
            let (rt, rs, rst) = ((t / horizon).sqrt(), (s / horizon).sqrt(), (s / t).sqrt());
            let direct = CorrelationMatrix3::new(rho * rt, rho * rs, rst)?.as_array();
            let reflected = CorrelationMatrix3::new(rho * rt, -rho * rs, -rst)?.as_array();
            Ok(Form::Window {
                mu,
                rho,
                s,
                t,
                horizon,
                direct,
                reflected,
            })
        };
        Ok(match *kind {
            CopulaKind::BmMax { t } => Form::Max {
                mu: 0.0,
                t,
                literal: true,
            },
            CopulaKind::BmMaxDrift { mu, t } => Form::Max { mu, t, literal: false },
            CopulaKind::TerminalVsMax { mu, t, horizon } => terminal(mu, 1.0, t, horizon),
            CopulaKind::TerminalVsWindowMax { mu, s, t, horizon } => window(mu, 1.0, s, t, horizon)?,
            CopulaKind::CorrTerminalVsMax { mu, rho, s, t, horizon } => window(mu, rho, s, t, horizon)?,
        })
    }

    fn margin_cdf(&self, y: f64) -> Result<f64> {
        match *self {
            Form::Max { mu, t, .. } | Form::Terminal { mu, t, .. } => Ok(unit_cdf_mt(y, mu, t)),
            Form::Window { mu, s, t, .. } => unit_cdf_mst(y, mu, s, t),
        }
    }

    fn margin_pdf(&self, y: f64) -> Result<f64> {
        match *self {
            Form::Max { mu, t, .. } | Form::Terminal { mu, t, .. } => Ok(unit_pdf_mt(y, mu, t)),
            Form::Window { mu, s, t, .. } => unit_pdf_mst(y, mu, s, t),
        }
    }

    /// True when the maximum is nonnegative almost surely.
    fn nonnegative_max(&self) -> bool {
        !matches!(self, Form::Window { .. })
    }

    /// Rough location and spread of the maximum, for brackets and steps.
    fn margin_scale(&self) -> (f64, f64) {
        match *self {
            Form::Max { mu, t, .. } | Form::Terminal { mu, t, .. } => (mu.max(0.0) * t, t.sqrt()),
            Form::Window { mu, s, t, .. } => (mu * s + (mu.max(0.0)) * (t - s), t.sqrt()),
        }
    }
}

/// Monotone interpolation table of `zeta` on Chebyshev nodes in `v`.
#[derive(Debug, Clone)]
pub struct QuantileCache {
    kind: CopulaKind,
    v: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
    tolerance: f64,
}

impl QuantileCache {
    pub fn new(kind: CopulaKind) -> Result<Self> {
        let form = Form::new(&kind)?;
        let n = CACHE_NODES;
        let v: Vec<f64> = (0..n)
            .map(|k| 0.5 * (1.0 - (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos()))
            .collect();
        let y = v.par_iter().map(|&p| solve_zeta(&form, p, None)).collect::<Result<Vec<f64>>>()?;
        for w in y.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Domain("quantile table is not strictly increasing".into()));
            }
        }
        let slope = pchip_slopes(&v, &y);
        Ok(Self {
            kind,
            v,
            y,
            slope,
            tolerance: 1e-9,
        })
    }

    pub fn kind(&self) -> CopulaKind {
        self.kind
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.v.iter().copied().zip(self.y.iter().copied())
    }

    /// Interpolated guess and the bracketing node interval, or `None`
    /// outside the tabulated range.
    fn lookup(&self, p: f64) -> Option<(f64, f64, f64)> {
        let n = self.v.len();
        if !(p >= self.v[0] && p <= self.v[n - 1]) {
            return None;
        }
        let k = match self.v.binary_search_by(|x| x.total_cmp(&p)) {
            Ok(k) => return Some((self.y[k], self.y[k], self.y[k])),
            Err(k) => k - 1,
        };
        let h = self.v[k + 1] - self.v[k];
        let s = (p - self.v[k]) / h;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s),
            s * (1.0 - s) * (1.0 - s),
            s * s * (3.0 - 2.0 * s),
            s * s * (s - 1.0),
        );
        let guess = h00 * self.y[k] + h10 * h * self.slope[k] + h01 * self.y[k + 1] + h11 * h * self.slope[k + 1];
        Some((guess, self.y[k], self.y[k + 1]))
    }
}

/// Fritsch–Carlson monotone slopes.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let d: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k])).collect();
    let mut m = vec![0.0; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for k in 1..n - 1 {
        if d[k - 1] * d[k] <= 0.0 {
            m[k] = 0.0;
        } else {
            let (h0, h1) = (x[k] - x[k - 1], x[k + 1] - x[k]);
            let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
            m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
        }
    }
    m
}

/// Root of an increasing function `g` on a bracket `[lo, hi]` with
/// `g(lo) <= 0 <= g(hi)`, by the Illinois variant of regula falsi with a
/// bisection safeguard. Stops when `|g| <= ftol` or the bracket collapses.
fn illinois<G: FnMut(f64) -> Result<f64>>(mut g: G, mut lo: f64, mut hi: f64, ftol: f64) -> Result<f64> {
    let mut glo = g(lo)?;
    let mut ghi = g(hi)?;
    if glo >= 0.0 {
        return Ok(lo);
    }
    if ghi <= 0.0 {
        return Ok(hi);
    }
    let mut side = 0i8;
    for it in 0..300 {
        let width = hi - lo;
        if width <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + f64::MIN_POSITIVE {
            break;
        }
        let mut x = if it % 4 == 3 {
            0.5 * (lo + hi)
        } else {
            (lo * ghi - hi * glo) / (ghi - glo)
        };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let gx = g(x)?;
        if gx.is_nan() {
            return Err(Error::Domain("root function returned NaN".into()));
        }
        if gx.abs() <= ftol {
            return Ok(x);
        }
        if gx < 0.0 {
            lo = x;
            glo = gx;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            ghi = gx;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(if -glo < ghi { lo } else { hi })
}

fn zeta_tolerance(p: f64) -> f64 {
    1e-13 * p.min(1.0 - p).max(1e-3)
}

/// Expands `[lo, hi]` until `f(lo) <= target <= f(hi)`.
fn bracket<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    floor: Option<f64>,
) -> Result<Option<(f64, f64)>> {
    for _ in 0..200 {
        if f(hi)? >= target {
            break;
        }
        let w = hi - lo;
        lo = hi;
        hi += 2.0 * w.max(1.0);
    }
    if f(hi)? < target {
        return Ok(None);
    }
    for _ in 0..200 {
        if floor.is_some_and(|fl| lo <= fl) || f(lo)? <= target {
            break;
        }
        let w = hi - lo;
        hi = lo;
        lo -= 2.0 * w.max(1.0);
    }
    if let Some(fl) = floor {
        lo = lo.max(fl);
    }
    if f(lo)? > target {
        return Ok(None);
    }
    Ok(Some((lo, hi)))
}

/// Full-precision quantile of the maximum. `hint` narrows the bracket.
fn solve_zeta(form: &Form, p: f64, hint: Option<(f64, f64)>) -> Result<f64> {
    if let Form::Max { mu, t, .. } = *form {
        if mu == 0.0 {
            // 2 Phi(y / sqrt t) - 1 = p
            return Ok(-t.sqrt() * quantile(0.5 * (1.0 - p)));
        }
    }
    let (lo, hi) = match hint {
        Some(b) => b,
        None => {
            let (centre, spread) = form.margin_scale();
            if form.nonnegative_max() {
                (0.0, (centre + 6.0 * spread).max(1.0))
            } else {
                let (mu, s) = match *form {
                    Form::Window { mu, s, .. } => (mu, s),
                    _ => unreachable!(),
                };
                (mu * s - 8.0 * s.sqrt(), (centre + 6.0 * spread).max(1.0))
            }
        }
    };
    let floor = form.nonnegative_max().then_some(0.0);
    let Some((lo, hi)) = bracket(|y| form.margin_cdf(y), p, lo, hi, floor)? else {
        return domain(format!("could not bracket the quantile at v={p}"));
    };
    illinois(|y| Ok(form.margin_cdf(y)? - p), lo, hi, zeta_tolerance(p))
}

/// Argument of a conditioned normal, `(a - r z) / sqrt(1 - r^2)`, with the
/// step limit at `|r| = 1`.
#[inline]
fn cond_arg(a: f64, r: f64, z: f64) -> f64 {
    let q = (1.0 - r * r).sqrt();
    if q == 0.0 {
        return if a - r * z >= 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    (a - r * z) / q
}

#[inline]
fn partial_corr(r12: f64, r13: f64, r23: f64) -> f64 {
    let d = ((1.0 - r12 * r12) * (1.0 - r13 * r13)).sqrt();
    if d == 0.0 {
        return 0.0;
    }
    ((r23 - r12 * r13) / d).clamp(-1.0, 1.0)
}

/// A copula with its parameters validated and reduced.
#[derive(Debug, Clone)]
pub struct Copula {
    kind: CopulaKind,
    form: Form,
    cache: Option<Arc<QuantileCache>>,
}

impl Copula {
    pub fn new(kind: CopulaKind) -> Result<Self> {
        Ok(Self {
            kind,
            form: Form::new(&kind)?,
            cache: None,
        })
    }

    /// Builds the quantile table; grid and sampling workloads use it.
    pub fn with_cache(kind: CopulaKind) -> Result<Self> {
        let mut c = Self::new(kind)?;
        c.cache = Some(Arc::new(QuantileCache::new(kind)?));
        Ok(c)
    }

    /// Attaches an existing table built for the same kind.
    pub fn attach_cache(&mut self, cache: Arc<QuantileCache>) -> Result<()> {
        if cache.kind != self.kind {
            return domain("quantile cache belongs to a different copula kind");
        }
        self.cache = Some(cache);
        Ok(())
    }

    pub fn kind(&self) -> CopulaKind {
        self.kind
    }

    /// Distribution function of the maximum coordinate.
    pub fn margin_cdf(&self, y: f64) -> Result<f64> {
        self.form.margin_cdf(y)
    }

    /// Density of the maximum coordinate.
    pub fn margin_pdf(&self, y: f64) -> Result<f64> {
        self.form.margin_pdf(y)
    }

    /// Quantile of the maximum, `zeta(v)`.
    pub fn zeta(&self, v: f64) -> Result<f64> {
        if !(v > 0.0 && v < 1.0) {
            return domain(format!("zeta requires v in (0, 1), got {v}"));
        }
        let Some(cache) = &self.cache else {
            return solve_zeta(&self.form, v, None);
        };
        let Some((guess, lo, hi)) = cache.lookup(v) else {
            return solve_zeta(&self.form, v, None);
        };
        if lo == hi {
            return Ok(lo);
        }
        let tol = zeta_tolerance(v);
        // Newton from the interpolant, safeguarded by the node interval
        let mut y = guess.clamp(lo, hi);
        for _ in 0..3 {
            let g = self.form.margin_cdf(y)? - v;
            if g.abs() <= tol {
                return Ok(y);
            }
            let d = self.form.margin_pdf(y)?;
            let next = y - g / d;
            if !(d > 0.0 && next > lo && next < hi) {
                break;
            }
            y = next;
        }
        let y = illinois(|y| Ok(self.form.margin_cdf(y)? - v), lo, hi, tol)?;
        if (self.form.margin_cdf(y)? - v).abs() > cache.tolerance {
            return solve_zeta(&self.form, v, None);
        }
        Ok(y)
    }

    /// Copula distribution function on the closed unit square.
    pub fn cdf(&self, u: f64, v: f64) -> Result<f64> {
        if u.is_nan() || v.is_nan() {
            return domain("copula arguments must not be NaN");
        }
        let (u, v) = (u.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
        if u == 0.0 || v == 0.0 {
            return Ok(0.0);
        }
        if u == 1.0 {
            return Ok(v);
        }
        if v == 1.0 {
            return Ok(u);
        }
        let y = self.zeta(v)?;
        let z = quantile(u);
        let c = self.cdf_at(u, v, z, y)?;
        Ok(c.clamp((u + v - 1.0).max(0.0), u.min(v)))
    }

    fn cdf_at(&self, u: f64, v: f64, z: f64, y: f64) -> Result<f64> {
        match self.form {
            Form::Max { mu, t, literal } => {
                let st = t.sqrt();
                let on_left = if literal {
                    u <= 0.5 * (v + 1.0)
                } else {
                    u <= cdf((y - mu * t) / st)
                };
                if on_left {
                    Ok(u - exp_scaled_cdf(2.0 * mu * y, z - 2.0 * y / st))
                } else {
                    Ok(v)
                }
            }
            Form::Terminal { mu, rho, t, horizon } => {
                let (st, sh) = (t.sqrt(), horizon.sqrt());
                let r = rho * (t / horizon).sqrt();
                let direct = cdf2_raw(z, (y - mu * t) / st, r);
                let reflected = exp_scaled_cdf2(2.0 * mu * y, z - 2.0 * rho * y / sh, (-y - mu * t) / st, r)?;
                Ok(direct - reflected)
            }
            Form::Window {
                mu,
                rho,
                s,
                t,
                horizon,
                direct,
                reflected,
            } => {
                let (ss, st, sh) = (s.sqrt(), t.sqrt(), horizon.sqrt());
                let d = cdf3_raw([z, (y - mu * t) / st, (y - mu * s) / ss], direct)?;
                let r = exp_scaled_cdf3(
                    2.0 * mu * y,
                    [z - 2.0 * rho * y / sh, (-y - mu * t) / st, (y + mu * s) / ss],
                    reflected,
                )?;
                Ok(d - r)
            }
        }
    }

    /// `dC/du` at `(u, v)`: the distribution of `V` given `U = u`.
    pub fn conditional_cdf(&self, u: f64, v: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return domain(format!("conditional cdf requires u in (0, 1), got {u}"));
        }
        if v.is_nan() {
            return domain("v must not be NaN");
        }
        if v <= 0.0 {
            return Ok(0.0);
        }
        if v >= 1.0 {
            return Ok(1.0);
        }
        let y = self.zeta(v)?;
        Ok(self.conditional_at(quantile(u), y)?.clamp(0.0, 1.0))
    }

    /// Unclamped `dC/du` in `(z, y)` coordinates.
    fn conditional_at(&self, z: f64, y: f64) -> Result<f64> {
        match self.form {
            Form::Max { mu, t, .. } => {
                let st = t.sqrt();
                if y <= 0.0 || z > (y - mu * t) / st {
                    return Ok(0.0);
                }
                Ok(-(2.0 * mu * y + 2.0 * z * y / st - 2.0 * y * y / t).exp_m1())
            }
            Form::Terminal { mu, rho, t, horizon } => {
                if y <= 0.0 {
                    return Ok(0.0);
                }
                let (st, sh) = (t.sqrt(), horizon.sqrt());
                let r = rho * (t / horizon).sqrt();
                let shift = 2.0 * rho * y / sh;
                let z1 = z - shift;
                let e = 2.0 * mu * y + z * shift - 0.5 * shift * shift;
                let direct = cdf(cond_arg((y - mu * t) / st, r, z));
                let reflected = exp_scaled_cdf(e, cond_arg((-y - mu * t) / st, r, z1));
                Ok(direct - reflected)
            }
            Form::Window {
                mu,
                rho,
                s,
                t,
                horizon,
                direct,
                reflected,
            } => {
                let (ss, st, sh) = (s.sqrt(), t.sqrt(), horizon.sqrt());
                let shift = 2.0 * rho * y / sh;
                let z1 = z - shift;
                let e = 2.0 * mu * y + z * shift - 0.5 * shift * shift;
                let [a12, a13, a23] = direct;
                let d = cdf2_raw(
                    cond_arg((y - mu * t) / st, a12, z),
                    cond_arg((y - mu * s) / ss, a13, z),
                    partial_corr(a12, a13, a23),
                );
                let [b12, b13, b23] = reflected;
                let r = exp_scaled_cdf2(
                    e,
                    cond_arg((-y - mu * t) / st, b12, z1),
                    cond_arg((y + mu * s) / ss, b13, z1),
                    partial_corr(b12, b13, b23),
                )?;
                Ok(d - r)
            }
        }
    }

    /// Copula density. Zero where the piecewise forms vanish; on the branch
    /// seam the left branch applies.
    pub fn density(&self, u: f64, v: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
            return domain(format!("density requires (u, v) in the open unit square, got ({u}, {v})"));
        }
        let y = self.zeta(v)?;
        let z = quantile(u);
        let f = self.form.margin_pdf(y)?;
        if !(f > 0.0) {
            return Ok(0.0);
        }
        match self.form {
            Form::Max { mu, t, literal } => {
                let st = t.sqrt();
                let on_left = if literal {
                    u <= 0.5 * (v + 1.0)
                } else {
                    u <= cdf((y - mu * t) / st)
                };
                if !on_left {
                    return Ok(0.0);
                }
                let e = 2.0 * mu * y + 2.0 * z * y / st - 2.0 * y * y / t;
                let slope = 2.0 * y / t - z / st - mu;
                Ok((2.0 * e.exp() * slope / f).max(0.0))
            }
            _ => {
                let step = 0.25 * self.conditional_width();
                let (d, _) = ridders(|yy| self.conditional_at(z, yy), y, step)?;
                Ok((d / f).max(0.0))
            }
        }
    }

    /// Smallest scale, in `y` units, on which the conditional law varies.
    fn conditional_width(&self) -> f64 {
        let w = match self.form {
            Form::Max { t, .. } => t.sqrt(),
            Form::Terminal { rho, t, horizon, .. } => {
                let r = rho * (t / horizon).sqrt();
                t.sqrt() * (1.0 - r * r).sqrt()
            }
            Form::Window { s, t, direct, .. } => {
                let a = t.sqrt() * (1.0 - direct[0] * direct[0]).sqrt();
                let b = s.sqrt() * (1.0 - direct[1] * direct[1]).sqrt();
                a.min(b)
            }
        };
        w.max(1e-6)
    }

    /// Draws `n` pairs by conditional inversion.
    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleBatch> {
        if n == 0 {
            return domain("sample size must be at least 1");
        }
        let blocks = n.div_ceil(SAMPLE_BLOCK);
        let chunks: Vec<Vec<[f64; 2]>> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b as u64);
                let len = SAMPLE_BLOCK.min(n - b * SAMPLE_BLOCK);
                (0..len)
                    .map(|_| {
                        let u = open_uniform(&mut rng);
                        let w = open_uniform(&mut rng);
                        self.sample_one(u, w).map(|v| [u, v])
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SampleBatch {
            kind: self.kind,
            seed,
            pairs: chunks.into_iter().flatten().collect(),
        })
    }

    /// The `v` solving `dC/du (u, v) = w`.
    pub fn sample_one(&self, u: f64, w: f64) -> Result<f64> {
        let z = quantile(u);
        let fail = || Error::Inversion { u, w };
        let y = match self.form {
            Form::Max { mu, t, .. } => {
                // 2 y^2 / t - 2 b y + ln(1 - w) = 0, larger root
                let b = mu + z / t.sqrt();
                let l = -(-w).ln_1p();
                0.5 * t * (b + (b * b + 2.0 * l / t).sqrt())
            }
            _ => {
                let (centre, spread) = self.form.margin_scale();
                let lo = if self.form.nonnegative_max() { 0.0 } else { centre - 8.0 * spread };
                let hi = (centre + 6.0 * spread).max(1.0);
                let floor = self.form.nonnegative_max().then_some(0.0);
                let h = |yy: f64| self.conditional_at(z, yy);
                let (lo, hi) = bracket(h, w, lo, hi, floor).map_err(|_| fail())?.ok_or_else(fail)?;
                illinois(|yy| Ok(self.conditional_at(z, yy)? - w), lo, hi, 1e-13).map_err(|_| fail())?
            }
        };
        let v = self.form.margin_cdf(y).map_err(|_| fail())?;
        if !v.is_finite() {
            return Err(fail());
        }
        Ok(v.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
    }
}

/// Uniform on the open interval `(0, 1)` from 53 random bits.
fn open_uniform<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Derivative by Ridders' extrapolation of central differences.
/// Returns the estimate and its error.
pub fn ridders<F: FnMut(f64) -> Result<f64>>(mut f: F, x: f64, h0: f64) -> Result<(f64, f64)> {
    const CON: f64 = 1.4;
    const CON2: f64 = CON * CON;
    const NTAB: usize = 10;
    const SAFE: f64 = 2.0;
    let mut a = [[0.0; NTAB]; NTAB];
    let mut h = h0;
    a[0][0] = (f(x + h)? - f(x - h)?) / (2.0 * h);
    let mut err = f64::MAX;
    let mut ans = a[0][0];
    for i in 1..NTAB {
        h /= CON;
        a[0][i] = (f(x + h)? - f(x - h)?) / (2.0 * h);
        let mut fac = CON2;
        for j in 1..=i {
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
            fac *= CON2;
            let errt = (a[j][i] - a[j - 1][i]).abs().max((a[j][i] - a[j - 1][i - 1]).abs());
            if errt <= err {
                err = errt;
                ans = a[j][i];
            }
        }
        if (a[i][i] - a[i - 1][i - 1]).abs() >= SAFE * err {
            break;
        }
    }
    Ok((ans, err))
}

// ---------------------------------------------------------------------------
// free-function surface

/// Quantile of the maximum coordinate of `kind`.
pub fn zeta(v: f64, kind: &CopulaKind) -> Result<f64> {
    Copula::new(*kind)?.zeta(v)
}

pub fn copula_cdf(p: UnitSquarePoint, kind: &CopulaKind) -> Result<f64> {
    Copula::new(*kind)?.cdf(p.u, p.v)
}

pub fn copula_density(p: UnitSquarePoint, kind: &CopulaKind) -> Result<f64> {
    Copula::new(*kind)?.density(p.u, p.v)
}

pub fn conditional_cdf(u: f64, v: f64, kind: &CopulaKind) -> Result<f64> {
    Copula::new(*kind)?.conditional_cdf(u, v)
}

/// Draws `n` pairs using a cached quantile table. Identical output for a
/// given `(kind, seed)` regardless of the thread pool.
pub fn sample(n: usize, kind: &CopulaKind, seed: u64) -> Result<SampleBatch> {
    Copula::new(*kind)?.sample(n, seed)
}
