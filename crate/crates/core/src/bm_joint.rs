//! Joint and marginal laws of a drifted Brownian motion, its running
//! maximum over `[0, t]` or a window `[s, t]`, and a correlated partner
//! observed at a later horizon.
//!
//! A `(mu, sigma)` motion is `sigma` times a `(mu / sigma, 1)` motion, so
//! every public function rescales its arguments and calls the unit-scale
//! kernel below.

use crate::error::{domain, Result};
use crate::gauss::{self, cdf, cdf2_raw, cdf3_raw, exp_scaled_cdf, exp_scaled_cdf2, exp_scaled_cdf3, pdf};

/// Relative gap below which `s -> 0` or `t -> T` is taken as exact.
const LIMIT_GAP: f64 = 1e-12;

/// Drift, volatility and observation times of a one-dimensional motion.
///
/// `s` is the start of the maximum window (unused by the `[0, t]`
/// functions), `t` its end and `horizon` the terminal time `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BmParams {
    mu: f64,
    sigma: f64,
    s: f64,
    t: f64,
    horizon: f64,
}

impl BmParams {
    pub fn new(mu: f64, sigma: f64, s: f64, t: f64, horizon: f64) -> Result<Self> {
        if !mu.is_finite() {
            return domain(format!("drift must be finite, got {mu}"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return domain(format!("sigma must be positive, got {sigma}"));
        }
        check_times(s, t, horizon)?;
        Ok(Self {
            mu,
            sigma,
            s,
            t,
            horizon,
        })
    }

    /// Unit-volatility motion observed on `[0, t]` with horizon `t`.
    pub fn drifted(mu: f64, t: f64) -> Result<Self> {
        Self::new(mu, 1.0, 0.0, t, t)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn unit_mu(&self) -> f64 {
        self.mu / self.sigma
    }
}

fn check_times(s: f64, t: f64, horizon: f64) -> Result<()> {
    if !(s >= 0.0 && s < t && t <= horizon && horizon.is_finite()) {
        return domain(format!("times must satisfy 0 <= s < t <= T, got s={s}, t={t}, T={horizon}"));
    }
    Ok(())
}

/// Parameters of the correlated pair `(B1, B2)` with
/// `B1 = sigma1 (rho W2 + sqrt(1 - rho^2) W1) + mu1 t` and
/// `B2 = sigma2 W2 + mu2 t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrBmParams {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
}

impl CorrBmParams {
    pub fn new(mu1: f64, mu2: f64, sigma1: f64, sigma2: f64, rho: f64) -> Result<Self> {
        if !(mu1.is_finite() && mu2.is_finite()) {
            return domain("drifts must be finite");
        }
        if !(sigma1 > 0.0 && sigma2 > 0.0 && sigma1.is_finite() && sigma2.is_finite()) {
            return domain(format!("volatilities must be positive, got {sigma1}, {sigma2}"));
        }
        if !(-1.0..=1.0).contains(&rho) {
            return domain(format!("correlation must lie in [-1, 1], got {rho}"));
        }
        Ok(Self {
            mu1,
            mu2,
            sigma1,
            sigma2,
            rho,
        })
    }
}

/// A query point: `x` for the terminal coordinate, `y` for the maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointPoint {
    pub x: f64,
    pub y: f64,
}

// ---------------------------------------------------------------------------
// driftless standard motion

/// `P(W_t <= x, M_t <= a)` for a standard Brownian motion.
pub fn cdf_wt_mt_std(x: f64, a: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("t must be positive, got {t}"));
    }
    if !(a >= 0.0) {
        return domain(format!("maximum level must be nonnegative, got {a}"));
    }
    let st = t.sqrt();
    if x <= a {
        Ok((cdf(x / st) - cdf((x - 2.0 * a) / st)).max(0.0))
    } else {
        Ok(2.0 * cdf(a / st) - 1.0)
    }
}

/// `P(M_t <= a)` for a standard Brownian motion.
pub fn cdf_mt_std(a: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("t must be positive, got {t}"));
    }
    if a < 0.0 {
        return Ok(0.0);
    }
    // 2 Phi(a) - 1 = 1 - 2 Phi(-a), the latter without cancellation
    Ok(1.0 - 2.0 * cdf(-a / t.sqrt()))
}

// ---------------------------------------------------------------------------
// unit-volatility kernels

pub(crate) fn unit_cdf_mt(y: f64, mu: f64, t: f64) -> f64 {
    if y.is_nan() {
        return f64::NAN;
    }
    if y <= 0.0 {
        return 0.0;
    }
    if y == f64::INFINITY {
        return 1.0;
    }
    let st = t.sqrt();
    let v = cdf((y - mu * t) / st) - exp_scaled_cdf(2.0 * mu * y, (-y - mu * t) / st);
    v.clamp(0.0, 1.0)
}

pub(crate) fn unit_pdf_mt(y: f64, mu: f64, t: f64) -> f64 {
    if !(y > 0.0) || y == f64::INFINITY {
        return 0.0;
    }
    let st = t.sqrt();
    let a = (y - mu * t) / st;
    let v = 2.0 * pdf(a) / st - 2.0 * mu * exp_scaled_cdf(2.0 * mu * y, (-y - mu * t) / st);
    v.max(0.0)
}

pub(crate) fn unit_cdf_wt_mt(x: f64, y: f64, mu: f64, t: f64) -> f64 {
    if !(y > 0.0) {
        return 0.0;
    }
    if x > y {
        return unit_cdf_mt(y, mu, t);
    }
    let st = t.sqrt();
    let v = cdf((x - mu * t) / st) - exp_scaled_cdf(2.0 * mu * y, (x - 2.0 * y - mu * t) / st);
    v.clamp(0.0, 1.0)
}

pub(crate) fn unit_cdf_wterm_mt(x: f64, y: f64, mu: f64, t: f64, horizon: f64) -> Result<f64> {
    if (horizon - t) < LIMIT_GAP * horizon {
        return Ok(unit_cdf_wt_mt(x, y, mu, horizon));
    }
    if !(y > 0.0) {
        return Ok(0.0);
    }
    let (st, sh) = (t.sqrt(), horizon.sqrt());
    if y == f64::INFINITY {
        return Ok(cdf((x - mu * horizon) / sh));
    }
    let r = (t / horizon).sqrt();
    let direct = cdf2_raw((x - mu * horizon) / sh, (y - mu * t) / st, r);
    let reflected = exp_scaled_cdf2(2.0 * mu * y, (x - 2.0 * y - mu * horizon) / sh, (-y - mu * t) / st, r)?;
    Ok((direct - reflected).clamp(0.0, 1.0))
}

pub(crate) fn unit_cdf_mst(y: f64, mu: f64, s: f64, t: f64) -> Result<f64> {
    if s < LIMIT_GAP * t {
        return Ok(unit_cdf_mt(y, mu, t));
    }
    if y.is_nan() {
        return Ok(f64::NAN);
    }
    if y == f64::INFINITY {
        return Ok(1.0);
    }
    if y == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let (ss, st) = (s.sqrt(), t.sqrt());
    let r = (s / t).sqrt();
    let direct = cdf2_raw((y - mu * t) / st, (y - mu * s) / ss, r);
    let reflected = exp_scaled_cdf2(2.0 * mu * y, (-y - mu * t) / st, (y + mu * s) / ss, -r)?;
    Ok((direct - reflected).clamp(0.0, 1.0))
}

pub(crate) fn unit_pdf_mst(y: f64, mu: f64, s: f64, t: f64) -> Result<f64> {
    if s < LIMIT_GAP * t {
        return Ok(unit_pdf_mt(y, mu, t));
    }
    if !y.is_finite() {
        return Ok(0.0);
    }
    let (ss, st) = (s.sqrt(), t.sqrt());
    let r = (s / t).sqrt();
    let q = (1.0 - r * r).sqrt();
    let a = (y - mu * t) / st;
    let a2 = (-y - mu * t) / st;
    let b = (y - mu * s) / ss;
    let b2 = (y + mu * s) / ss;
    // the phi(B) contributions of the two terms cancel identically
    let main = pdf(a) / st * (cdf((b - r * a) / q) + cdf((b2 + r * a2) / q));
    let reflected = exp_scaled_cdf2(2.0 * mu * y, a2, b2, -r)?;
    Ok((main - 2.0 * mu * reflected).max(0.0))
}

pub(crate) fn unit_cdf_wterm_mst(x: f64, y: f64, mu: f64, s: f64, t: f64, horizon: f64) -> Result<f64> {
    if s < LIMIT_GAP * t {
        return unit_cdf_wterm_mt(x, y, mu, t, horizon);
    }
    corr_kernel(x, y, mu, mu, 1.0, s, t, horizon)
}

/// Joint law of the correlated pair for unit volatilities.
#[allow(clippy::too_many_arguments)]
fn corr_kernel(x: f64, y: f64, mu1: f64, mu2: f64, rho: f64, s: f64, t: f64, horizon: f64) -> Result<f64> {
    if y == f64::NEG_INFINITY || x == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let sh = horizon.sqrt();
    if y == f64::INFINITY {
        return Ok(cdf((x - mu1 * horizon) / sh));
    }
    let (ss, st) = (s.sqrt(), t.sqrt());
    let rt = (t / horizon).sqrt();
    let rs = (s / horizon).sqrt();
    let rst = (s / t).sqrt();
    let direct = cdf3_raw(
        [(x - mu1 * horizon) / sh, (y - mu2 * t) / st, (y - mu2 * s) / ss],
        [rho * rt, rho * rs, rst],
    )?;
    let reflected = exp_scaled_cdf3(
        2.0 * mu2 * y,
        [(x - 2.0 * rho * y - mu1 * horizon) / sh, (-y - mu2 * t) / st, (y + mu2 * s) / ss],
        [rho * rt, -rho * rs, -rst],
    )?;
    Ok((direct - reflected).clamp(0.0, 1.0))
}

/// The correlated-pair law on the window `[0, t]`, i.e. the `s -> 0` limit.
fn corr_kernel_mt(x: f64, y: f64, mu1: f64, mu2: f64, rho: f64, t: f64, horizon: f64) -> Result<f64> {
    if !(y > 0.0) || x == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let sh = horizon.sqrt();
    if y == f64::INFINITY {
        return Ok(cdf((x - mu1 * horizon) / sh));
    }
    let st = t.sqrt();
    let r = rho * (t / horizon).sqrt();
    let direct = cdf2_raw((x - mu1 * horizon) / sh, (y - mu2 * t) / st, r);
    let reflected = exp_scaled_cdf2(2.0 * mu2 * y, (x - 2.0 * rho * y - mu1 * horizon) / sh, (-y - mu2 * t) / st, r)?;
    Ok((direct - reflected).clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// public surface

/// `P(W_t <= x, M_t <= y)` for a `(mu, sigma)` motion.
/// Returns 0 for `y < 0`.
pub fn cdf_wt_mt(x: f64, y: f64, p: &BmParams) -> f64 {
    unit_cdf_wt_mt(x / p.sigma, y / p.sigma, p.unit_mu(), p.t)
}

/// `P(M_t <= y)`. Returns 0 for `y < 0`.
pub fn cdf_mt(y: f64, p: &BmParams) -> f64 {
    unit_cdf_mt(y / p.sigma, p.unit_mu(), p.t)
}

/// Density of `M_t`; 0 for `y <= 0`.
pub fn pdf_mt(y: f64, p: &BmParams) -> f64 {
    unit_pdf_mt(y / p.sigma, p.unit_mu(), p.t) / p.sigma
}

/// `P(W_T <= x, M_t <= y)`.
pub fn cdf_wterm_mt(x: f64, y: f64, p: &BmParams) -> Result<f64> {
    unit_cdf_wterm_mt(x / p.sigma, y / p.sigma, p.unit_mu(), p.t, p.horizon)
}

/// `P(W_T <= x, M_(s,t) <= y)`. `y` may be negative.
pub fn cdf_wterm_mst(x: f64, y: f64, p: &BmParams) -> Result<f64> {
    unit_cdf_wterm_mst(x / p.sigma, y / p.sigma, p.unit_mu(), p.s, p.t, p.horizon)
}

/// `P(M_(s,t) <= y)`. `y` may be negative.
pub fn cdf_mst(y: f64, p: &BmParams) -> Result<f64> {
    unit_cdf_mst(y / p.sigma, p.unit_mu(), p.s, p.t)
}

/// Density of `M_(s,t)`.
pub fn pdf_mst(y: f64, p: &BmParams) -> Result<f64> {
    Ok(unit_pdf_mst(y / p.sigma, p.unit_mu(), p.s, p.t)? / p.sigma)
}

/// `P(B1_T <= x, M2_(s,t) <= y)` for the correlated pair.
pub fn cdf_b1term_m2st(x: f64, y: f64, p: &CorrBmParams, s: f64, t: f64, horizon: f64) -> Result<f64> {
    check_times(s, t, horizon)?;
    let horizon = if horizon - t < LIMIT_GAP * horizon { t } else { horizon };
    // standardize B2 to unit volatility; B1 keeps its drift as a shift
    let y = y / p.sigma2;
    let x = x / p.sigma1;
    let mu1 = p.mu1 / p.sigma1;
    let mu2 = p.mu2 / p.sigma2;
    if s < LIMIT_GAP * t {
        return corr_kernel_mt(x, y, mu1, mu2, p.rho, t, horizon);
    }
    corr_kernel(x, y, mu1, mu2, p.rho, s, t, horizon)
}

/// Convenience: the standard normal marginal of `W_T` for a `(mu, sigma)`
/// motion.
pub fn cdf_wterm(x: f64, p: &BmParams) -> f64 {
    gauss::cdf((x - p.mu * p.horizon) / (p.sigma * p.horizon.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, QuadOptions};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn standard_joint_seam_and_limit() {
        for (a, t) in [(0.5, 1.0), (2.0, 0.3), (0.01, 4.0)] {
            let left = cdf_wt_mt_std(a, a, t).unwrap();
            let right = cdf_wt_mt_std(a + 1e-15, a, t).unwrap();
            assert!(close(left, right, 1e-12));
            assert!(close(cdf_wt_mt_std(1e6, a, t).unwrap(), 2.0 * cdf(a / t.sqrt()) - 1.0, 1e-15));
        }
        assert!(cdf_wt_mt_std(0.0, -1.0, 1.0).is_err());
        assert!(cdf_wt_mt_std(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn standard_marginal() {
        assert_eq!(cdf_mt_std(0.0, 2.0).unwrap(), 0.0);
        assert_eq!(cdf_mt_std(f64::INFINITY, 2.0).unwrap(), 1.0);
        assert_eq!(cdf_mt_std(-0.5, 2.0).unwrap(), 0.0);
        assert!(close(cdf_mt_std(1.0, 1.0).unwrap(), 0.6826894921370859, 1e-12));
        assert!(cdf_mt_std(1.0, -1.0).is_err());
    }

    #[test]
    fn drifted_joint_reduces_to_standard() {
        let p = BmParams::new(0.0, 1.0, 0.0, 1.3, 1.3).unwrap();
        for &(x, y) in &[(0.2, 0.5), (-1.0, 0.3), (0.9, 0.4), (0.0, 2.0)] {
            assert!(close(cdf_wt_mt(x, y, &p), cdf_wt_mt_std(x, y, 1.3).unwrap(), 1e-12));
        }
        let q = BmParams::new(-0.7, 1.4, 0.0, 0.8, 1.0).unwrap();
        for y in [0.1, 0.7, 2.5] {
            assert!(close(cdf_wt_mt(y, y, &q), cdf_wt_mt(y + 1e-13, y, &q), 1e-12));
        }
        assert_eq!(cdf_wt_mt(0.1, -0.2, &q), 0.0);
    }

    #[test]
    fn maximum_marginal() {
        let p = BmParams::new(0.0, 0.8, 0.0, 2.0, 2.0).unwrap();
        assert_eq!(cdf_mt(0.0, &p), 0.0);
        for y in [0.1, 1.0, 3.0] {
            let want = 2.0 * cdf(y / (0.8 * 2f64.sqrt())) - 1.0;
            assert!(close(cdf_mt(y, &p), want, 1e-12));
            let dens = 2.0 * pdf(y / (0.8 * 2f64.sqrt())) / (0.8 * 2f64.sqrt());
            assert!(close(pdf_mt(y, &p), dens, 1e-12));
        }
        let p = BmParams::new(0.3, 1.0, 0.0, 1.0, 1.0).unwrap();
        let h = 1e-5;
        let fd = (cdf_mt(0.7 + h, &p) - cdf_mt(0.7 - h, &p)) / (2.0 * h);
        assert!(close(pdf_mt(0.7, &p), fd, 1e-6));
        assert!(cdf_mt(1e3, &p) > 1.0 - 1e-15);
    }

    #[test]
    fn maximum_density_normalizes() {
        for mu in [-2.0, 0.0, 10.0] {
            let p = BmParams::drifted(mu, 1.0).unwrap();
            let hi = (mu.max(0.0) + 12.0) * 1.0;
            let peak = mu.max(0.0);
            let q = crate::quad::integrate_with_breaks(|y| pdf_mt(y, &p), 0.0, hi, &[peak], QuadOptions::abs(1e-12)).unwrap();
            assert!(close(q.value, 1.0, 1e-6), "mu={mu}: {}", q.value);
        }
    }

    #[test]
    fn large_drift_stays_finite() {
        let p = BmParams::drifted(10.0, 0.75).unwrap();
        for y in [0.5, 5.0, 7.5, 12.0, 40.0] {
            let v = cdf_mt(y, &p);
            assert!(v.is_finite() && (0.0..=1.0).contains(&v));
            assert!(pdf_mt(y, &p).is_finite());
        }
        // exp(2 mu y) Phi(A') = phi(A) Mills(A') by hand at y = mu t
        let y = 7.5;
        let w = 15.0 / 0.75f64.sqrt();
        let want = cdf(0.0) - pdf(0.0) * cdf(-w) / pdf(w);
        assert!(close(cdf_mt(y, &p), want, 1e-12));
    }

    #[test]
    fn terminal_vs_max_limits() {
        let p = BmParams::new(0.2, 1.1, 0.0, 1.0 - 1e-8, 1.0).unwrap();
        let full = BmParams::new(0.2, 1.1, 0.0, 1.0, 1.0).unwrap();
        for &(x, y) in &[(0.4, 0.8), (-0.3, 0.2), (1.5, 1.0)] {
            assert!(close(cdf_wterm_mt(x, y, &p).unwrap(), cdf_wt_mt(x, y, &full), 1e-7));
            assert!(close(cdf_wterm_mt(x, y, &full).unwrap(), cdf_wt_mt(x, y, &full), 1e-12));
        }
        let p = BmParams::new(0.2, 1.0, 0.0, 0.5, 1.0).unwrap();
        for y in [0.3, 0.8, 2.0] {
            assert!(close(cdf_wterm_mt(60.0, y, &p).unwrap(), cdf_mt(y, &p), 1e-9));
        }
    }

    #[test]
    fn window_max_limits() {
        let p = BmParams::new(0.5, 1.0, 1e-8, 1.0, 1.0).unwrap();
        for y in [0.05, 0.9, 2.0] {
            assert!(close(cdf_mst(y, &p).unwrap(), cdf_mt(y, &p), 1e-6));
        }
        let p = BmParams::new(0.0, 1.0, 0.25, 0.75, 1.0).unwrap();
        assert!(close(cdf_mst(40.0, &p).unwrap(), 1.0, 1e-15));
        assert!(cdf_mst(-40.0, &p).unwrap() < 1e-15);
        for y in [-0.5, 0.3, 1.2] {
            assert!(close(cdf_wterm_mst(60.0, y, &p).unwrap(), cdf_mst(y, &p).unwrap(), 1e-8));
        }
        let q = BmParams::new(0.3, 1.0, 1e-8, 0.75, 1.0).unwrap();
        for &(x, y) in &[(0.5, 0.3), (-0.2, 1.0)] {
            assert!(close(cdf_wterm_mst(x, y, &q).unwrap(), cdf_wterm_mt(x, y, &q).unwrap(), 1e-6));
        }
    }

    #[test]
    fn window_density_matches_derivative_and_normalizes() {
        for mu in [-2.0, 0.0, 0.5, 10.0] {
            let p = BmParams::new(mu, 1.0, 0.25, 0.75, 1.0).unwrap();
            for y in [-0.5, 0.2, 1.0, 6.0] {
                let h = 1e-5;
                let fd = (cdf_mst(y + h, &p).unwrap() - cdf_mst(y - h, &p).unwrap()) / (2.0 * h);
                assert!(close(pdf_mst(y, &p).unwrap(), fd, 1e-6), "mu={mu} y={y}");
            }
            let c = mu * 0.5;
            let q = crate::quad::integrate_with_breaks(
                |y| pdf_mst(y, &p).unwrap(),
                c - 12.0,
                c + 12.0,
                &[c],
                QuadOptions::abs(1e-11),
            )
            .unwrap();
            assert!(close(q.value, 1.0, 1e-8), "mu={mu}: {}", q.value);
        }
    }

    #[test]
    fn correlated_limits() {
        let (s, t, big_t) = (0.25, 0.75, 1.0);
        let p0 = CorrBmParams::new(0.1, 0.3, 1.2, 0.8, 0.0).unwrap();
        let m = BmParams::new(0.3, 0.8, s, t, big_t).unwrap();
        for &(x, y) in &[(0.2, 0.5), (-0.4, 1.1)] {
            let want = cdf((x - 0.1) / 1.2) * cdf_mst(y, &m).unwrap();
            assert!(close(cdf_b1term_m2st(x, y, &p0, s, t, big_t).unwrap(), want, 1e-6));
        }
        let p1 = CorrBmParams::new(0.3, 0.3, 0.9, 0.9, 1.0).unwrap();
        let m = BmParams::new(0.3, 0.9, s, t, big_t).unwrap();
        for &(x, y) in &[(0.2, 0.5), (1.0, 0.4), (-0.4, 1.1)] {
            let got = cdf_b1term_m2st(x, y, &p1, s, t, big_t).unwrap();
            assert!(close(got, cdf_wterm_mst(x, y, &m).unwrap(), 1e-6));
        }
        assert!(cdf_b1term_m2st(0.0, 0.0, &p1, 0.5, 0.4, 1.0).is_err());
        assert!(CorrBmParams::new(0.0, 0.0, 1.0, 1.0, 1.2).is_err());
    }

    #[test]
    fn reduction_chain() {
        let (mu, sigma) = (0.4, 1.0);
        let chain_marie = CorrBmParams::new(mu, mu, sigma, sigma, 1.0).unwrap();
        let p = BmParams::new(mu, sigma, 0.3, 0.7, 1.0).unwrap();
        for &(x, y) in &[(0.3, 0.6), (-0.5, 0.2), (1.2, 1.5)] {
            let a = cdf_b1term_m2st(x, y, &chain_marie, 0.3, 0.7, 1.0).unwrap();
            assert!(close(a, cdf_wterm_mst(x, y, &p).unwrap(), 1e-6));
            let ps = BmParams::new(mu, sigma, 1e-8, 0.7, 1.0).unwrap();
            assert!(close(cdf_wterm_mst(x, y, &ps).unwrap(), cdf_wterm_mt(x, y, &ps).unwrap(), 1e-6));
            let pt = BmParams::new(mu, sigma, 0.0, 1.0 - 1e-8, 1.0).unwrap();
            let pf = BmParams::new(mu, sigma, 0.0, 1.0, 1.0).unwrap();
            assert!(close(cdf_wterm_mt(x, y, &pt).unwrap(), cdf_wt_mt(x, y, &pf), 1e-6));
        }
    }

    #[test]
    fn invalid_params() {
        assert!(BmParams::new(0.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(BmParams::new(0.0, 1.0, 0.5, 0.5, 1.0).is_err());
        assert!(BmParams::new(0.0, 1.0, 0.0, 2.0, 1.0).is_err());
        assert!(BmParams::new(f64::NAN, 1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn density_integrates_in_window_case_with_quadrature_helper() {
        // cross-check against quadrature of the terminal-value density
        let p = BmParams::new(0.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let q = integrate(|y| pdf_mt(y, &p), 0.0, 10.0, QuadOptions::abs(1e-13)).unwrap();
        assert!(close(q.value, cdf_mt(10.0, &p), 1e-12));
    }

    fn params() -> impl Strategy<Value = BmParams> {
        (-3.0..3.0f64, 0.3..2.0f64, 0.05..0.45f64, 0.5..0.95f64).prop_map(|(mu, sigma, s, t)| {
            BmParams::new(mu, sigma, s, t, 1.0).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn joint_cdfs_bounded_monotone_and_two_increasing(
            p in params(),
            x in -2.5..2.5f64,
            y in -1.0..2.5f64,
            dx in 0.0..0.7f64,
            dy in 0.0..0.7f64,
        ) {
            let fs: [Box<dyn Fn(f64, f64) -> f64>; 3] = [
                Box::new(|x, y| cdf_wt_mt(x, y, &p)),
                Box::new(|x, y| cdf_wterm_mt(x, y, &p).unwrap()),
                Box::new(|x, y| cdf_wterm_mst(x, y, &p).unwrap()),
            ];
            for f in fs.iter() {
                let (a, b, c, d) = (f(x, y), f(x + dx, y), f(x, y + dy), f(x + dx, y + dy));
                for v in [a, b, c, d] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                prop_assert!(b - a >= -1e-9 && c - a >= -1e-9);
                prop_assert!(d - b - c + a >= -1e-9, "mixed difference {}", d - b - c + a);
            }
        }

        #[test]
        fn seam_continuity(p in params(), y in 0.01..3.0f64) {
            prop_assert!(close(cdf_wt_mt(y, y, &p), cdf_wt_mt(y * (1.0 + 1e-14), y, &p), 1e-10));
        }

        #[test]
        fn marginals_monotone(p in params(), y in -1.0..3.0f64, dy in 0.0..0.5f64) {
            prop_assert!(cdf_mt(y + dy, &p) - cdf_mt(y, &p) >= -1e-12);
            prop_assert!(cdf_mst(y + dy, &p).unwrap() - cdf_mst(y, &p).unwrap() >= -1e-12);
        }

        #[test]
        fn correlated_two_increasing(
            rho in -1.0..1.0f64,
            x in -2.0..2.0f64,
            y in -0.5..2.0f64,
            dx in 0.0..0.6f64,
            dy in 0.0..0.6f64,
        ) {
            let p = CorrBmParams::new(0.1, -0.4, 1.2, 0.7, rho).unwrap();
            let f = |x, y| cdf_b1term_m2st(x, y, &p, 0.25, 0.75, 1.0).unwrap();
            let mixed = f(x + dx, y + dy) - f(x + dx, y) - f(x, y + dy) + f(x, y);
            prop_assert!(mixed >= -1e-9, "{}", mixed);
        }
    }
}
