//! Standard normal kernels in one to four dimensions.
//!
//! `cdf2` is the Drezner–Wesolowsky/Genz algorithm. `cdf3` and `cdf4`
//! condition on one coordinate and integrate the lower-order CDF against
//! the standard normal density with adaptive Gauss–Kronrod quadrature.
//!
//! The `exp_scaled_*` family returns `exp(c) * Phi_k(...)` without forming
//! either factor, so that reflection terms such as `exp(2 mu y) Phi(...)`
//! stay finite and accurate when the drift is large.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::sync::OnceLock;

use nalgebra::{Matrix3, Matrix4, SymmetricEigen};
use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{domain, Error, Result};
use crate::quad::{integrate_with_breaks, QuadOptions};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Correlations this close to ±1 are treated as exactly degenerate.
const UNIT_RHO: f64 = 1.0 - 4.0 * f64::EPSILON;
/// Below this conditional standard deviation a conditioned argument
/// behaves like a step, and its jump point becomes a quadrature break.
const STEP_SD: f64 = 0.2;
/// Beyond this many standard deviations the normal mass is below 1e-19.
const TAIL: f64 = 9.0;

const PHI3_OPTS: QuadOptions = QuadOptions {
    abs_tol: 5e-14,
    rel_tol: 1e-13,
    max_intervals: 400,
};
const PHI4_OPTS: QuadOptions = QuadOptions {
    abs_tol: 1e-11,
    rel_tol: 1e-11,
    max_intervals: 400,
};
const SCALED_OPTS: QuadOptions = QuadOptions {
    abs_tol: 1e-300,
    rel_tol: 1e-12,
    max_intervals: 400,
};
/// Exponents up to this size are applied directly to an unscaled value.
const DIRECT_SCALE: f64 = 5.0;

// ---------------------------------------------------------------------------
// one dimension

/// Standard normal density.
#[inline]
pub fn pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

#[inline]
pub fn ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Standard normal distribution function. Accurate to full relative
/// precision in the lower tail.
#[inline]
pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// `Phi(z) / phi(z)` for `x = -z > 0` via Laplace's continued fraction.
fn mills_lower(x: f64) -> f64 {
    // f = x + 1/(x + 2/(x + 3/(x + ...))), modified Lentz
    let tiny = 1e-300;
    let mut f = x;
    let mut c = f;
    let mut d = 0.0;
    for n in 1..500 {
        let a = n as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// `ln Phi(z)`, finite for every finite `z`.
pub fn ln_cdf(z: f64) -> f64 {
    if z < -8.0 {
        ln_pdf(z) + mills_lower(-z).ln()
    } else if z < 5.0 {
        cdf(z).ln()
    } else {
        (-cdf(-z)).ln_1p()
    }
}

/// `exp(c) * Phi(z)` evaluated in log space.
#[inline]
pub fn exp_scaled_cdf(c: f64, z: f64) -> f64 {
    if z == f64::NEG_INFINITY {
        return 0.0;
    }
    if z == f64::INFINITY {
        return c.exp();
    }
    (c + ln_cdf(z)).exp()
}

/// Standard normal quantile. Returns `-inf`/`+inf` at 0 and 1 and NaN
/// outside `[0, 1]`.
pub fn quantile(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -lower_quantile(1.0 - p);
    }
    lower_quantile(p)
}

fn lower_quantile(p: f64) -> f64 {
    let mut x = -SQRT_2 * erfc_inv(2.0 * p);
    // one Halley step against the full-precision lower-tail cdf
    let d = pdf(x);
    if d > 0.0 {
        let e = (cdf(x) - p) / d;
        x -= e / (1.0 + 0.5 * x * e);
    }
    x
}

/// Checked standard normal density.
pub fn phi(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return domain(format!("phi requires a finite argument, got {z}"));
    }
    Ok(pdf(z))
}

/// Checked standard normal distribution function; `±inf` are allowed.
pub fn norm_cdf(z: f64) -> Result<f64> {
    if z.is_nan() {
        return domain("Phi is undefined at NaN");
    }
    Ok(cdf(z))
}

/// Checked standard normal quantile on the open interval `(0, 1)`.
pub fn norm_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("Phi_inv requires p in (0, 1), got {p}"));
    }
    Ok(quantile(p))
}

// ---------------------------------------------------------------------------
// correlation matrices

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationMatrix2 {
    rho: f64,
}

impl CorrelationMatrix2 {
    pub fn new(rho: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&rho) {
            return domain(format!("correlation must lie in [-1, 1], got {rho}"));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Validated 3x3 correlation structure, stored as `(rho12, rho13, rho23)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationMatrix3 {
    r: [f64; 3],
    projected: bool,
}

impl CorrelationMatrix3 {
    pub fn new(rho12: f64, rho13: f64, rho23: f64) -> Result<Self> {
        let r = [rho12, rho13, rho23];
        check_entries(&r)?;
        let m = Matrix3::new(1.0, rho12, rho13, rho12, 1.0, rho23, rho13, rho23, 1.0);
        let min_eig = SymmetricEigen::new(m).eigenvalues.min();
        let projected = needs_projection(min_eig, &r)?;
        let r = if projected { shrink(r) } else { r };
        Ok(Self { r, projected })
    }

    /// Entry `(i, j)` with zero-based indices.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        get3(&self.r, i, j)
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.r
    }

    /// True when the input was nudged onto the PSD cone.
    pub fn was_projected(&self) -> bool {
        self.projected
    }
}

/// Validated 4x4 correlation structure, stored in upper-triangular order
/// `(r12, r13, r14, r23, r24, r34)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationMatrix4 {
    r: [f64; 6],
    projected: bool,
}

impl CorrelationMatrix4 {
    pub fn new(upper: [f64; 6]) -> Result<Self> {
        check_entries(&upper)?;
        let [a, b, c, d, e, f] = upper;
        #[rustfmt::skip]
        let m = Matrix4::new(
            1.0, a, b, c,
            a, 1.0, d, e,
            b, d, 1.0, f,
            c, e, f, 1.0,
        );
        let min_eig = SymmetricEigen::new(m).eigenvalues.min();
        let projected = needs_projection(min_eig, &upper)?;
        let r = if projected { shrink(upper) } else { upper };
        Ok(Self { r, projected })
    }

    /// Builds from a full symmetric matrix, reading the upper triangle.
    pub fn from_rows(m: [[f64; 4]; 4]) -> Result<Self> {
        Self::new([m[0][1], m[0][2], m[0][3], m[1][2], m[1][3], m[2][3]])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        get4(&self.r, i, j)
    }

    pub fn as_array(&self) -> [f64; 6] {
        self.r
    }

    pub fn was_projected(&self) -> bool {
        self.projected
    }
}

fn check_entries(r: &[f64]) -> Result<()> {
    for &x in r {
        if !(-1.0..=1.0).contains(&x) {
            return domain(format!("correlation must lie in [-1, 1], got {x}"));
        }
    }
    Ok(())
}

fn needs_projection(min_eig: f64, r: &[f64]) -> Result<bool> {
    if min_eig <= -1e-12 {
        return domain(format!("correlation matrix is not positive semi-definite (smallest eigenvalue {min_eig:.3e})"));
    }
    // exact unit correlations are singular by construction and are handled
    // by the degenerate formulas instead
    if min_eig < 1e-9 && !r.iter().any(|x| x.abs() >= UNIT_RHO) {
        log::warn!("near-singular correlation matrix (smallest eigenvalue {min_eig:.3e}); shrinking off-diagonals");
        return Ok(true);
    }
    Ok(false)
}

fn shrink<const N: usize>(r: [f64; N]) -> [f64; N] {
    r.map(|x| x * (1.0 - 1e-9))
}

#[inline]
fn get3(r: &[f64; 3], i: usize, j: usize) -> f64 {
    match (i.min(j), i.max(j)) {
        (a, b) if a == b => 1.0,
        (0, 1) => r[0],
        (0, 2) => r[1],
        (1, 2) => r[2],
        _ => panic!("index out of range for a 3x3 correlation matrix"),
    }
}

#[inline]
fn get4(r: &[f64; 6], i: usize, j: usize) -> f64 {
    match (i.min(j), i.max(j)) {
        (a, b) if a == b => 1.0,
        (0, 1) => r[0],
        (0, 2) => r[1],
        (0, 3) => r[2],
        (1, 2) => r[3],
        (1, 3) => r[4],
        (2, 3) => r[5],
        _ => panic!("index out of range for a 4x4 correlation matrix"),
    }
}

// ---------------------------------------------------------------------------
// two dimensions

/// Gauss–Legendre rules with 6, 12 and 20 points on [-1, 1].
fn legendre_rules() -> &'static [Vec<(f64, f64)>; 3] {
    static RULES: OnceLock<[Vec<(f64, f64)>; 3]> = OnceLock::new();
    RULES.get_or_init(|| [gauss_legendre(6), gauss_legendre(12), gauss_legendre(20)])
}

fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Upper bivariate probability `P(X > h, Y > k)` for correlation `r`.
fn bvnd(h: f64, k: f64, r: f64) -> f64 {
    let rules = legendre_rules();
    let rule = if r.abs() < 0.3 {
        &rules[0]
    } else if r.abs() < 0.75 {
        &rules[1]
    } else {
        &rules[2]
    };
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = r.asin();
        for &(x, w) in rule {
            let sn = (0.5 * asr * (x + 1.0)).sin();
            bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
        }
        return bvn * asr / (4.0 * PI) + cdf(-h) * cdf(-k);
    }
    let mut k = k;
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = a_s.sqrt();
        let b_s = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * (-0.5 * (b_s / a_s + hk)).exp()
            * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        if hk > -160.0 {
            let b = b_s.sqrt();
            bvn -= (-0.5 * hk).exp()
                * (2.0 * PI).sqrt()
                * cdf(-b / a)
                * b
                * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
        }
        a *= 0.5;
        for &(x, w) in rule {
            let xs = (a * (x + 1.0)).powi(2);
            let rs = (1.0 - xs).sqrt();
            bvn += a
                * w
                * ((-b_s / (2.0 * xs) - hk / (1.0 + rs)).exp() / rs
                    - (-0.5 * (b_s / xs + hk)).exp() * (1.0 + c * xs * (1.0 + d * xs)));
        }
        bvn = -bvn / (2.0 * PI);
    }
    if r > 0.0 {
        bvn + cdf(-h.max(k))
    } else {
        -bvn + (cdf(-h) - cdf(-k)).max(0.0)
    }
}

/// Unchecked `Phi2(a, b; r)`; exactly symmetric in `(a, b)`.
pub fn cdf2_raw(a: f64, b: f64, r: f64) -> f64 {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    if a == f64::NEG_INFINITY {
        return 0.0;
    }
    if b == f64::INFINITY {
        return cdf(a);
    }
    if r >= UNIT_RHO {
        return cdf(a);
    }
    if r <= -UNIT_RHO {
        return if a + b > 0.0 { cdf(a) - cdf(-b) } else { 0.0 };
    }
    if r == 0.0 {
        return cdf(a) * cdf(b);
    }
    bvnd(-a, -b, r).clamp(0.0, 1.0)
}

/// `Phi2(z1, z2; rho)`.
pub fn cdf2(z1: f64, z2: f64, r: &CorrelationMatrix2) -> f64 {
    cdf2_raw(z1, z2, r.rho)
}

/// `exp(c) * Phi2(a, b; r)` without overflow or loss of relative accuracy.
pub fn exp_scaled_cdf2(c: f64, a: f64, b: f64, r: f64) -> Result<f64> {
    if c <= DIRECT_SCALE {
        return Ok(c.exp() * cdf2_raw(a, b, r));
    }
    // condition on the smaller argument, which carries the exponent
    let (a, b) = if a >= b { (a, b) } else { (b, a) };
    if b == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if a == f64::INFINITY {
        return Ok(exp_scaled_cdf(c, b));
    }
    if r >= UNIT_RHO {
        return Ok(exp_scaled_cdf(c, b));
    }
    if r <= -UNIT_RHO {
        if a + b <= 0.0 {
            return Ok(0.0);
        }
        // exp(c) (Phi(b) - Phi(-a)) with Phi(-a) <= Phi(b)
        let lb = ln_cdf(b);
        let la = ln_cdf(-a);
        return Ok((c + lb).exp() * -(la - lb).exp_m1());
    }
    let sd = (1.0 - r * r).sqrt();
    let lo = -(b.min(0.0).powi(2) + 80.0).sqrt();
    let mut breaks = Vec::new();
    if sd < STEP_SD {
        breaks.push(a / r);
    }
    let q = integrate_with_breaks(
        |s| (c + ln_pdf(s) + ln_cdf((a - r * s) / sd)).exp(),
        lo,
        b,
        &breaks,
        SCALED_OPTS,
    )?;
    Ok(q.value)
}

// ---------------------------------------------------------------------------
// three dimensions

/// Arguments and correlations of the bivariate law left after fixing
/// coordinate `k` at `s`.
struct Conditioned3 {
    i: usize,
    j: usize,
    ri: f64,
    rj: f64,
    sdi: f64,
    sdj: f64,
    rho: f64,
}

impl Conditioned3 {
    fn new(r: &[f64; 3], k: usize) -> Self {
        let (i, j) = match k {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let ri = get3(r, k, i);
        let rj = get3(r, k, j);
        let sdi = (1.0 - ri * ri).sqrt();
        let sdj = (1.0 - rj * rj).sqrt();
        let rho = ((get3(r, i, j) - ri * rj) / (sdi * sdj)).clamp(-1.0, 1.0);
        Self {
            i,
            j,
            ri,
            rj,
            sdi,
            sdj,
            rho,
        }
    }

    #[inline]
    fn eval(&self, z: &[f64; 3], s: f64) -> f64 {
        cdf2_raw((z[self.i] - self.ri * s) / self.sdi, (z[self.j] - self.rj * s) / self.sdj, self.rho)
    }

    fn breaks(&self, z: &[f64; 3]) -> Vec<f64> {
        let mut out = Vec::new();
        if self.sdi < STEP_SD {
            out.push(z[self.i] / self.ri);
        }
        if self.sdj < STEP_SD {
            out.push(z[self.j] / self.rj);
        }
        out
    }
}

/// Rewrites a trivariate probability with an exactly degenerate pair as a
/// difference of bivariate ones: `(sign, a, b, rho)` terms.
fn degenerate3(z: &[f64; 3], r: &[f64; 3]) -> Option<Vec<(f64, f64, f64, f64)>> {
    for (i, j, o) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
        let rij = get3(r, i, j);
        if rij >= UNIT_RHO {
            return Some(vec![(1.0, z[i].min(z[j]), z[o], get3(r, i, o))]);
        }
        if rij <= -UNIT_RHO {
            // X_j = -X_i, so the event is -z_j <= X_i <= z_i
            if z[i] <= -z[j] {
                return Some(vec![]);
            }
            let rio = get3(r, i, o);
            return Some(vec![(1.0, z[i], z[o], rio), (-1.0, -z[j], z[o], rio)]);
        }
    }
    None
}

/// Reduces infinite arguments. Returns `Err(value)` when the probability is
/// already determined, or the index of a `+inf` argument to drop.
fn infinite_arg(z: &[f64]) -> Option<std::result::Result<usize, f64>> {
    if z.iter().any(|x| x.is_nan()) {
        return Some(Err(f64::NAN));
    }
    if z.iter().any(|&x| x == f64::NEG_INFINITY) {
        return Some(Err(0.0));
    }
    z.iter().position(|&x| x == f64::INFINITY).map(Ok)
}

/// Unchecked `Phi3` with correlations `(r12, r13, r23)`.
pub fn cdf3_raw(z: [f64; 3], r: [f64; 3]) -> Result<f64> {
    if let Some(red) = infinite_arg(&z) {
        return Ok(match red {
            Err(v) => v,
            Ok(drop) => {
                let (i, j) = match drop {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                cdf2_raw(z[i], z[j], get3(&r, i, j))
            }
        });
    }
    if let Some(terms) = degenerate3(&z, &r) {
        let v: f64 = terms.iter().map(|&(sgn, a, b, rho)| sgn * cdf2_raw(a, b, rho)).sum();
        return Ok(v.clamp(0.0, 1.0));
    }
    // condition on the coordinate least correlated with the other two
    let k = (0..3)
        .min_by(|&a, &b| max_abs_corr3(&r, a).total_cmp(&max_abs_corr3(&r, b)))
        .unwrap_or(0);
    let cond = Conditioned3::new(&r, k);
    if cond.ri == 0.0 && cond.rj == 0.0 {
        return Ok(cdf(z[k]) * cdf2_raw(z[cond.i], z[cond.j], cond.rho));
    }
    let hi = z[k].min(TAIL);
    let lo = if z[k] < -TAIL { z[k] - 10.0 } else { -TAIL };
    if hi <= lo {
        return Ok(0.0);
    }
    let q = integrate_with_breaks(|s| pdf(s) * cond.eval(&z, s), lo, hi, &cond.breaks(&z), PHI3_OPTS)?;
    Ok(q.value.clamp(0.0, 1.0))
}

fn max_abs_corr3(r: &[f64; 3], k: usize) -> f64 {
    (0..3).filter(|&j| j != k).map(|j| get3(r, k, j).abs()).fold(0.0, f64::max)
}

/// `Phi3(z1, z2, z3; R)`.
pub fn cdf3(z1: f64, z2: f64, z3: f64, r: &CorrelationMatrix3) -> Result<f64> {
    cdf3_raw([z1, z2, z3], r.r)
}

/// `exp(c) * Phi3(z; r)` without overflow or loss of relative accuracy.
pub fn exp_scaled_cdf3(c: f64, z: [f64; 3], r: [f64; 3]) -> Result<f64> {
    if c <= DIRECT_SCALE {
        return Ok(c.exp() * cdf3_raw(z, r)?);
    }
    if let Some(red) = infinite_arg(&z) {
        return match red {
            Err(v) => Ok(v),
            Ok(drop) => {
                let (i, j) = match drop {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                exp_scaled_cdf2(c, z[i], z[j], get3(&r, i, j))
            }
        };
    }
    if let Some(terms) = degenerate3(&z, &r) {
        let mut v = 0.0;
        for (sgn, a, b, rho) in terms {
            v += sgn * exp_scaled_cdf2(c, a, b, rho)?;
        }
        return Ok(v.max(0.0));
    }
    let k = (0..3).min_by(|&a, &b| z[a].total_cmp(&z[b])).unwrap_or(0);
    let cond = Conditioned3::new(&r, k);
    let lo = -(z[k].min(0.0).powi(2) + 80.0).sqrt();
    let q = integrate_with_breaks(
        |s| {
            let p = cond.eval(&z, s);
            if p == 0.0 {
                0.0
            } else {
                (c + ln_pdf(s) + p.ln()).exp()
            }
        },
        lo,
        z[k],
        &cond.breaks(&z),
        SCALED_OPTS,
    )?;
    Ok(q.value)
}

// ---------------------------------------------------------------------------
// four dimensions

/// Unchecked `Phi4` with upper-triangular correlations
/// `(r12, r13, r14, r23, r24, r34)`.
pub fn cdf4_raw(z: [f64; 4], r: [f64; 6]) -> Result<f64> {
    if let Some(red) = infinite_arg(&z) {
        return match red {
            Err(v) => Ok(v),
            Ok(drop) => {
                let keep: Vec<usize> = (0..4).filter(|&i| i != drop).collect();
                let (a, b, c) = (keep[0], keep[1], keep[2]);
                cdf3_raw([z[a], z[b], z[c]], [get4(&r, a, b), get4(&r, a, c), get4(&r, b, c)])
            }
        };
    }
    let max_corr = |k: usize| (0..4).filter(|&j| j != k).map(|j| get4(&r, k, j).abs()).fold(0.0, f64::max);
    let k = (0..4).min_by(|&a, &b| max_corr(a).total_cmp(&max_corr(b))).unwrap_or(0);
    let rest: Vec<usize> = (0..4).filter(|&i| i != k).collect();
    let rk: Vec<f64> = rest.iter().map(|&i| get4(&r, k, i)).collect();
    if max_corr(k) >= UNIT_RHO {
        return degenerate4(&z, &r, k);
    }
    let sd: Vec<f64> = rk.iter().map(|x| (1.0 - x * x).sqrt()).collect();
    let partial = |a: usize, b: usize| {
        ((get4(&r, rest[a], rest[b]) - rk[a] * rk[b]) / (sd[a] * sd[b])).clamp(-1.0, 1.0)
    };
    let pr = [partial(0, 1), partial(0, 2), partial(1, 2)];
    let mut breaks = Vec::new();
    for a in 0..3 {
        if sd[a] < STEP_SD && rk[a] != 0.0 {
            breaks.push(z[rest[a]] / rk[a]);
        }
    }
    let hi = z[k].min(TAIL);
    let lo = if z[k] < -TAIL { z[k] - 10.0 } else { -TAIL };
    if hi <= lo {
        return Ok(0.0);
    }
    let mut failure = None;
    let q = integrate_with_breaks(
        |s| {
            let w = [
                (z[rest[0]] - rk[0] * s) / sd[0],
                (z[rest[1]] - rk[1] * s) / sd[1],
                (z[rest[2]] - rk[2] * s) / sd[2],
            ];
            match cdf3_raw(w, pr) {
                Ok(v) => pdf(s) * v,
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        lo,
        hi,
        &breaks,
        PHI4_OPTS,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(q.value.clamp(0.0, 1.0))
}

/// Every coordinate has a unit correlation with some other coordinate.
/// Merges the first such pair and falls back to three dimensions.
fn degenerate4(z: &[f64; 4], r: &[f64; 6], k: usize) -> Result<f64> {
    let j = (0..4)
        .filter(|&j| j != k)
        .find(|&j| get4(r, k, j).abs() >= UNIT_RHO)
        .ok_or_else(|| Error::Domain("inconsistent degenerate correlation structure".into()))?;
    let rest: Vec<usize> = (0..4).filter(|&i| i != k && i != j).collect();
    let (a, b) = (rest[0], rest[1]);
    let rab = get4(r, a, b);
    if get4(r, k, j) > 0.0 {
        // X_j = X_k
        let m = z[k].min(z[j]);
        return cdf3_raw([m, z[a], z[b]], [get4(r, k, a), get4(r, k, b), rab]);
    }
    if z[k] <= -z[j] {
        return Ok(0.0);
    }
    let rka = get4(r, k, a);
    let rkb = get4(r, k, b);
    let upper = cdf3_raw([z[k], z[a], z[b]], [rka, rkb, rab])?;
    let lower = cdf3_raw([-z[j], z[a], z[b]], [rka, rkb, rab])?;
    Ok((upper - lower).clamp(0.0, 1.0))
}

/// `Phi4(z; R)`.
pub fn cdf4(z: [f64; 4], r: &CorrelationMatrix4) -> Result<f64> {
    cdf4_raw(z, r.r)
}
