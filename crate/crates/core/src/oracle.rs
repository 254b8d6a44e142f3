//! Independent checks of the closed forms: a Brownian path simulator with
//! exact per-step maxima, and quadrature of the Gaussian integral identities.
//!
//! Random streams are ChaCha8 (`rand_chacha`), seeded with the user seed and
//! switched to stream `b` for path block `b`. Block results are integer
//! counts, so estimates do not depend on how blocks are scheduled.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bm_joint::{self, BmParams, CorrBmParams};
use crate::error::{Error, Result};
use crate::gauss::{cdf, cdf2_raw, cdf3_raw, cdf4_raw, CorrelationMatrix3};
use crate::quad::{integrate_with_breaks, QuadOptions};

/// Paths per RNG stream.
pub const PATH_BLOCK: usize = 8192;

/// Simulation settings. `horizon` must equal the target's terminal time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub antithetic: bool,
}

impl PathConfig {
    /// Uses `dt = horizon / 100`.
    pub fn new(n_paths: usize, horizon: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            n_paths,
            dt: horizon / 100.0,
            horizon,
            seed,
            antithetic: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon / 100.0 * (1.0 + 1e-12)) {
            return Err(Error::Config(format!(
                "dt must lie in (0, horizon/100], got {} for horizon {}",
                self.dt, self.horizon
            )));
        }
        if self.n_paths < 1000 {
            return Err(Error::Config(format!("need at least 1000 paths, got {}", self.n_paths)));
        }
        if self.antithetic && self.n_paths % 2 == 1 {
            return Err(Error::Config("antithetic sampling needs an even path count".into()));
        }
        Ok(())
    }
}

/// Which joint law to simulate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimTarget {
    /// `(W_t, M_t)`; the horizon is `t`.
    WtMt(BmParams),
    /// `(W_T, M_t)`.
    WTMt(BmParams),
    /// `(W_T, M_(s,t))`.
    WTMst(BmParams),
    /// `(B1_T, M2_(s,t))`.
    B1TM2st { p: CorrBmParams, s: f64, t: f64, horizon: f64 },
}

impl SimTarget {
    pub fn name(&self) -> &'static str {
        match self {
            Self::WtMt(_) => "WtMt",
            Self::WTMt(_) => "WTMt",
            Self::WTMst(_) => "WTMst",
            Self::B1TM2st { .. } => "B1TM2st",
        }
    }

    pub fn horizon(&self) -> f64 {
        match self {
            Self::WtMt(p) => p.t(),
            Self::WTMt(p) | Self::WTMst(p) => p.horizon(),
            Self::B1TM2st { horizon, .. } => *horizon,
        }
    }

    /// The closed-form joint distribution function.
    pub fn closed_form(&self, x: f64, y: f64) -> Result<f64> {
        match self {
            Self::WtMt(p) => Ok(bm_joint::cdf_wt_mt(x, y, p)),
            Self::WTMt(p) => bm_joint::cdf_wterm_mt(x, y, p),
            Self::WTMst(p) => bm_joint::cdf_wterm_mst(x, y, p),
            Self::B1TM2st { p, s, t, horizon } => bm_joint::cdf_b1term_m2st(x, y, p, *s, *t, *horizon),
        }
    }

    /// Closed-form marginal of the terminal coordinate.
    pub fn terminal_cdf(&self, x: f64) -> f64 {
        match self {
            Self::WtMt(p) => cdf((x - p.mu() * p.t()) / (p.sigma() * p.t().sqrt())),
            Self::WTMt(p) | Self::WTMst(p) => bm_joint::cdf_wterm(x, p),
            Self::B1TM2st { p, horizon, .. } => cdf((x - p.mu1 * horizon) / (p.sigma1 * horizon.sqrt())),
        }
    }

    /// Closed-form marginal of the maximum coordinate.
    pub fn max_cdf(&self, y: f64) -> Result<f64> {
        match self {
            Self::WtMt(p) | Self::WTMt(p) => Ok(bm_joint::cdf_mt(y, p)),
            Self::WTMst(p) => bm_joint::cdf_mst(y, p),
            Self::B1TM2st { p, s, t, .. } => {
                let q = BmParams::new(p.mu2, p.sigma2, *s, *t, *t)?;
                if *s == 0.0 {
                    Ok(bm_joint::cdf_mt(y, &q))
                } else {
                    bm_joint::cdf_mst(y, &q)
                }
            }
        }
    }

    /// Drift, volatility, window and horizon of the process whose maximum
    /// is taken.
    fn plan(&self, dt: f64) -> Plan {
        let (mu, sigma, s, t, horizon) = match *self {
            Self::WtMt(p) => (p.mu(), p.sigma(), 0.0, p.t(), p.t()),
            Self::WTMt(p) => (p.mu(), p.sigma(), 0.0, p.t(), p.horizon()),
            Self::WTMst(p) => (p.mu(), p.sigma(), p.s(), p.t(), p.horizon()),
            Self::B1TM2st { p, s, t, horizon } => (p.mu2, p.sigma2, s, t, horizon),
        };
        let mut steps = Vec::new();
        for (a, b, window) in [(0.0, s, false), (s, t, true), (t, horizon, false)] {
            let len = b - a;
            if len <= 0.0 {
                continue;
            }
            let k = (len / dt).ceil().max(1.0) as usize;
            steps.extend(std::iter::repeat_n((len / k as f64, window), k));
        }
        Plan {
            mu,
            sigma,
            window_at_origin: s == 0.0,
            steps,
        }
    }
}

struct Plan {
    mu: f64,
    sigma: f64,
    window_at_origin: bool,
    steps: Vec<(f64, bool)>,
}

/// Maximum of a Brownian bridge from `a` to `b` with variance `var` over
/// the step, by inversion with the uniform `u`.
#[inline]
fn bridge_max(a: f64, b: f64, var: f64, u: f64) -> f64 {
    let d = b - a;
    0.5 * (a + b + (d * d - 2.0 * var * u.ln()).sqrt())
}

/// One path: returns the terminal value of the standard noise driving the
/// maximised process and the maximum of that process over the window.
fn run_path<R: Rng>(plan: &Plan, sign: f64, rng: &mut R) -> (f64, f64) {
    let (mut w, mut x, mut elapsed) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut max = if plan.window_at_origin { 0.0 } else { f64::NEG_INFINITY };
    let mut was_window = plan.window_at_origin;
    for &(h, window) in &plan.steps {
        let z: f64 = rng.sample(StandardNormal);
        let u: f64 = 1.0 - rng.random::<f64>();
        if window && !was_window {
            max = x;
        }
        was_window = window;
        w += sign * h.sqrt() * z;
        elapsed += h;
        let next = plan.mu * elapsed + plan.sigma * w;
        if window {
            max = max.max(bridge_max(x, next, plan.sigma * plan.sigma * h, u));
        }
        x = next;
    }
    (w, max)
}

/// Monte Carlo estimates of a joint distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalJoint {
    pub queries: Vec<(f64, f64)>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_paths: usize,
}

/// Per query: number of paths (or antithetic pairs) with one hit and with
/// two hits.
type Counts = Vec<[u64; 2]>;

/// Simulates `cfg.n_paths` paths of `target` and estimates
/// `P(X <= x, Y <= y)` at each query. `y = +inf` gives the marginal of `X`.
pub fn simulate_joint(target: &SimTarget, cfg: &PathConfig, queries: &[(f64, f64)]) -> Result<EmpiricalJoint> {
    cfg.validate()?;
    if queries.is_empty() {
        return Err(Error::Config("at least one query point is required".into()));
    }
    let h = target.horizon();
    if (cfg.horizon - h).abs() > 1e-12 * h {
        return Err(Error::Config(format!(
            "path horizon {} does not match the target horizon {h}",
            cfg.horizon
        )));
    }
    let plan = target.plan(cfg.dt);
    let per_path = |rng: &mut ChaCha8Rng, sign: f64| -> (f64, f64) {
        let (w, max) = run_path(&plan, sign, rng);
        let x = match *target {
            SimTarget::B1TM2st { p, horizon, .. } => {
                let z: f64 = rng.sample(StandardNormal);
                let w1 = sign * horizon.sqrt() * z;
                p.sigma1 * (p.rho * w + (1.0 - p.rho * p.rho).sqrt() * w1) + p.mu1 * horizon
            }
            _ => plan.mu * h + plan.sigma * w,
        };
        (x, max)
    };

    let units = if cfg.antithetic { cfg.n_paths / 2 } else { cfg.n_paths };
    let blocks = units.div_ceil(PATH_BLOCK);
    let counts: Counts = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64);
            let len = PATH_BLOCK.min(units - b * PATH_BLOCK);
            let mut c: Counts = vec![[0, 0]; queries.len()];
            for _ in 0..len {
                if cfg.antithetic {
                    let mut twin = rng.clone();
                    let a = per_path(&mut rng, 1.0);
                    let b = per_path(&mut twin, -1.0);
                    for (k, &(qx, qy)) in queries.iter().enumerate() {
                        let hits = u8::from(a.0 <= qx && a.1 <= qy) + u8::from(b.0 <= qx && b.1 <= qy);
                        if hits > 0 {
                            c[k][usize::from(hits - 1)] += 1;
                        }
                    }
                } else {
                    let a = per_path(&mut rng, 1.0);
                    for (k, &(qx, qy)) in queries.iter().enumerate() {
                        c[k][0] += u64::from(a.0 <= qx && a.1 <= qy);
                    }
                }
            }
            c
        })
        .reduce(
            || vec![[0, 0]; queries.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x[0] += y[0];
                    x[1] += y[1];
                }
                a
            },
        );

    let n = units as f64;
    let (estimates, std_errors) = counts
        .iter()
        .map(|&[one, two]| {
            if cfg.antithetic {
                // pair averages take values 0, 1/2, 1
                let mean = (0.5 * one as f64 + two as f64) / n;
                let second = (0.25 * one as f64 + two as f64) / n;
                let var = (second - mean * mean).max(0.25 / (n + 1.0) / n);
                (mean, (var / n).sqrt())
            } else {
                let p = one as f64 / n;
                let shrunk = (one as f64 + 0.5) / (n + 1.0);
                (p, (shrunk * (1.0 - shrunk) / n).sqrt())
            }
        })
        .unzip();
    Ok(EmpiricalJoint {
        queries: queries.to_vec(),
        estimates,
        std_errors,
        n_paths: cfg.n_paths,
    })
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationRow {
    pub target: String,
    pub x: f64,
    pub y: f64,
    pub closed_form: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub z_score: f64,
}

/// Simulates `target` and compares with its closed form at every query.
pub fn mc_agreement(target: &SimTarget, cfg: &PathConfig, queries: &[(f64, f64)]) -> Result<Vec<VerificationRow>> {
    let emp = simulate_joint(target, cfg, queries)?;
    queries
        .iter()
        .enumerate()
        .map(|(k, &(x, y))| {
            let closed = target.closed_form(x, y)?;
            let (est, se) = (emp.estimates[k], emp.std_errors[k]);
            Ok(VerificationRow {
                target: target.name().to_string(),
                x,
                y,
                closed_form: closed,
                estimate: est,
                std_error: se,
                z_score: (est - closed) / se,
            })
        })
        .collect()
}

/// A 5 x 4 grid of query points at marginal probabilities
/// {0.1, 0.3, 0.5, 0.7, 0.9} for the terminal value and {0.2, 0.4, 0.6, 0.8}
/// for the maximum.
pub fn default_queries(target: &SimTarget) -> Result<Vec<(f64, f64)>> {
    let xs = [0.1, 0.3, 0.5, 0.7, 0.9]
        .iter()
        .map(|&p| invert(|x| Ok(target.terminal_cdf(x)), p))
        .collect::<Result<Vec<_>>>()?;
    let ys = [0.2, 0.4, 0.6, 0.8]
        .iter()
        .map(|&p| invert(|y| target.max_cdf(y), p))
        .collect::<Result<Vec<_>>>()?;
    Ok(xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect())
}

fn invert<F: Fn(f64) -> Result<f64>>(f: F, p: f64) -> Result<f64> {
    let (mut lo, mut hi) = (-1.0, 1.0);
    while f(lo)? > p {
        lo *= 2.0;
    }
    while f(hi)? < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Writes rows as CSV with a header.
pub fn write_report<W: Write>(rows: &[VerificationRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "target,x,y,closed_form,estimate,std_error,z_score")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.target, r.x, r.y, r.closed_form, r.estimate, r.std_error, r.z_score
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// integral identities

/// Constants of the Gaussian integral identities. Index 0 of `delta` and
/// `eta` belongs to the integration variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralSpec {
    pub h: f64,
    pub a: f64,
    pub delta: [f64; 4],
    pub theta: [f64; 3],
    pub eta: [f64; 4],
    pub r: CorrelationMatrix3,
}

impl IntegralSpec {
    pub fn new(h: f64, a: f64, delta: [f64; 4], theta: [f64; 3], eta: [f64; 4], r: CorrelationMatrix3) -> Result<Self> {
        if eta.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Domain(format!("all eta must be positive, got {eta:?}")));
        }
        let finite = [h, a].iter().chain(&delta).chain(&theta).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("integral constants must be finite".into()));
        }
        Ok(Self {
            h,
            a,
            delta,
            theta,
            eta,
            r,
        })
    }

    /// Random constants with a random correlation matrix built from a Gram
    /// matrix of unit vectors.
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let mut u = [[0.0; 3]; 3];
        for row in &mut u {
            for v in row.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            row.iter_mut().for_each(|v| *v /= n);
        }
        let dot = |i: usize, j: usize| (0..3).map(|k| u[i][k] * u[j][k]).sum::<f64>().clamp(-0.95, 0.95);
        let r = CorrelationMatrix3::new(dot(0, 1), dot(0, 2), dot(1, 2))
            .or_else(|_| CorrelationMatrix3::new(0.0, 0.0, 0.0))
            .expect("identity is a correlation matrix");
        let mut g = |lo: f64, hi: f64| rng.random_range(lo..hi);
        Self {
            h: g(-0.6, 0.6),
            a: g(-1.5, 1.5),
            delta: [g(-1.0, 1.0), g(-1.5, 1.5), g(-1.5, 1.5), g(-1.5, 1.5)],
            theta: [g(-1.5, 1.5), g(-1.5, 1.5), g(-1.5, 1.5)],
            eta: [g(0.4, 1.6), g(0.4, 1.6), g(0.4, 1.6), g(0.4, 1.6)],
            r,
        }
    }

    fn kappa(&self, i: usize) -> f64 {
        (self.theta[i] * self.theta[i] * self.eta[0] * self.eta[0] + self.eta[i + 1] * self.eta[i + 1]).sqrt()
    }

    fn shifted_mean(&self) -> f64 {
        self.delta[0] + self.h * self.eta[0] * self.eta[0]
    }

    fn scale(&self) -> f64 {
        (self.h * self.delta[0] + 0.5 * self.h * self.h * self.eta[0] * self.eta[0]).exp()
    }
}

/// Which of the six identities to check. `Phi4` variants integrate a
/// trivariate CDF, `Phi3` a bivariate and `Phi2` a univariate one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentityVariant {
    Phi4Lower,
    Phi4Upper,
    Phi3Lower,
    Phi3Upper,
    Phi2Lower,
    Phi2Upper,
}

impl IdentityVariant {
    pub const ALL: [IdentityVariant; 6] = [
        Self::Phi4Lower,
        Self::Phi4Upper,
        Self::Phi3Lower,
        Self::Phi3Upper,
        Self::Phi2Lower,
        Self::Phi2Upper,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Phi4Lower => "phi4_lower",
            Self::Phi4Upper => "phi4_upper",
            Self::Phi3Lower => "phi3_lower",
            Self::Phi3Upper => "phi3_upper",
            Self::Phi2Lower => "phi2_lower",
            Self::Phi2Upper => "phi2_upper",
        }
    }

    fn upper(&self) -> bool {
        matches!(self, Self::Phi4Upper | Self::Phi3Upper | Self::Phi2Upper)
    }

    fn order(&self) -> usize {
        match self {
            Self::Phi4Lower | Self::Phi4Upper => 3,
            Self::Phi3Lower | Self::Phi3Upper => 2,
            Self::Phi2Lower | Self::Phi2Upper => 1,
        }
    }
}

/// Two readings of the entries `rho*_{2,i+1}`, `i = 2, 3`, of the
/// four-dimensional correlation matrix: with `rho_{1i}` as printed, or with
/// the index shifted to `rho_{1,i-1}` (taking `rho_11 = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RStarIndexing {
    AsPrinted,
    Shifted,
}

/// Entries `[r12, r13, r14, r23, r24, r34]` of the conditioned matrix.
pub fn r_star(spec: &IntegralSpec, indexing: RStarIndexing) -> [f64; 6] {
    let k = [spec.kappa(0), spec.kappa(1), spec.kappa(2)];
    let (e0, e) = (spec.eta[0], &spec.eta[1..]);
    let th = &spec.theta;
    let rho1 = |i: usize| -> f64 {
        // rho_{1i}, 1-based, with rho_11 = 1
        if i == 1 {
            1.0
        } else {
            spec.r.get(0, i - 1)
        }
    };
    let first = |i: usize| -th[i] * e0 / k[i];
    let pair = |rho: f64, i: usize, j: usize| (rho * e[i] * e[j] + th[i] * th[j] * e0 * e0) / (k[i] * k[j]);
    let idx = |i: usize| match indexing {
        RStarIndexing::AsPrinted => rho1(i),
        RStarIndexing::Shifted => rho1(i - 1),
    };
    [
        first(0),
        first(1),
        first(2),
        pair(idx(2), 0, 1),
        pair(idx(3), 0, 2),
        pair(spec.r.get(1, 2), 1, 2),
    ]
}

/// Left side by quadrature over `s`, truncated ten standard deviations
/// from the centre of the Gaussian weight.
pub fn identity_lhs(spec: &IntegralSpec, variant: IdentityVariant) -> Result<f64> {
    let [r12, r13, r23] = spec.r.as_array();
    let arg = |i: usize, s: f64| (spec.delta[i + 1] + spec.theta[i] * s) / spec.eta[i + 1];
    let (d0, e0) = (spec.delta[0], spec.eta[0]);
    let integrand = |s: f64| -> f64 {
        let inner = match variant.order() {
            3 => cdf3_raw([arg(0, s), arg(1, s), arg(2, s)], [r12, r13, r23]).unwrap_or(f64::NAN),
            2 => cdf2_raw(arg(0, s), arg(1, s), r12),
            _ => cdf(arg(0, s)),
        };
        let w = (spec.h * s - 0.5 * ((s - d0) / e0).powi(2)).exp() / (e0 * (2.0 * std::f64::consts::PI).sqrt());
        inner * w
    };
    let centre = spec.shifted_mean();
    let reach = 10.0 * e0;
    let (lo, hi) = if variant.upper() {
        (spec.a, spec.a.max(centre) + reach)
    } else {
        (spec.a.min(centre) - reach, spec.a)
    };
    let mut breaks: Vec<f64> = (0..variant.order())
        .filter(|&i| spec.theta[i] != 0.0)
        .map(|i| -spec.delta[i + 1] / spec.theta[i])
        .collect();
    breaks.push(centre);
    let opts = QuadOptions {
        abs_tol: 1e-10,
        rel_tol: 1e-10,
        max_intervals: 2000,
    };
    Ok(integrate_with_breaks(integrand, lo, hi, &breaks, opts)?.value)
}

/// Right side in closed form.
pub fn identity_rhs(spec: &IntegralSpec, variant: IdentityVariant, indexing: RStarIndexing) -> Result<f64> {
    let rs = r_star(spec, indexing);
    let ds = spec.shifted_mean();
    let first = if variant.upper() { (ds - spec.a) / spec.eta[0] } else { (spec.a - ds) / spec.eta[0] };
    let arg = |i: usize| (spec.delta[i + 1] + spec.theta[i] * ds) / spec.kappa(i);
    let flip = if variant.upper() { -1.0 } else { 1.0 };
    let value = match variant.order() {
        3 => {
            let r = [flip * rs[0], flip * rs[1], flip * rs[2], rs[3], rs[4], rs[5]];
            cdf4_raw([first, arg(0), arg(1), arg(2)], r)?
        }
        // the trivariate reduction keeps the third argument (delta_2 + theta_2 delta0*) / kappa_2
        2 => cdf3_raw([first, arg(0), arg(1)], [flip * rs[0], flip * rs[1], rs[3]])?,
        _ => cdf2_raw(first, arg(0), flip * rs[0]),
    };
    Ok(spec.scale() * value)
}

/// `|LHS - RHS|` for the printed reading of the correlation matrix.
pub fn check_integral_identity(spec: &IntegralSpec, variant: IdentityVariant) -> Result<f64> {
    check_integral_identity_with(spec, variant, RStarIndexing::AsPrinted)
}

pub fn check_integral_identity_with(
    spec: &IntegralSpec,
    variant: IdentityVariant,
    indexing: RStarIndexing,
) -> Result<f64> {
    Ok((identity_lhs(spec, variant)? - identity_rhs(spec, variant, indexing)?).abs())
}

/// Residuals of the two lemma identities at `z1 = -rho z2 + sqrt(1-rho^2) z3`.
pub fn lemma_residuals(rho: f64, z2: f64, z3: f64) -> (f64, f64) {
    let q = (1.0 - rho * rho).max(0.0).sqrt();
    let z1 = -rho * z2 + q * z3;
    let first = cdf2_raw(z1, z2, -rho) + cdf2_raw(-z1, z3, -q) - cdf(z2) * cdf(z3);
    let second = cdf2_raw(z1, z2, -rho) + cdf(-z2) * cdf(z3) - cdf2_raw(z1, z3, q);
    (first.abs(), second.abs())
}

/// Largest lemma residual over `n_trials` random `(rho, z2, z3)` plus the
/// degenerate correlations 0 and 1.
pub fn check_lemma_identities(n_trials: usize, seed: u64) -> Result<f64> {
    if n_trials < 100 {
        return Err(Error::Config(format!("need at least 100 trials, got {n_trials}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for k in 0..n_trials {
        let rho = match k {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random::<f64>(),
        };
        let (z2, z3) = (rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
        let (a, b) = lemma_residuals(rho, z2, z3);
        worst = worst.max(a).max(b);
    }
    Ok(worst)
}

/// Largest residual of the symmetry, complement, permutation and
/// reflection identities of the bivariate and trivariate normal CDFs over
/// `n_trials` random arguments.
pub fn check_kernel_identities(n_trials: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..n_trials {
        let spec = IntegralSpec::random(&mut rng);
        let [r12, r13, r23] = spec.r.as_array();
        let z: [f64; 3] = std::array::from_fn(|_| rng.random_range(-3.5..3.5));
        let rho = rng.random_range(-1.0..1.0);
        worst = worst.max((cdf2_raw(z[0], z[1], rho) - cdf2_raw(z[1], z[0], rho)).abs());
        worst = worst.max((cdf(z[0]) - cdf2_raw(z[0], z[1], rho) - cdf2_raw(z[0], -z[1], -rho)).abs());
        let base = cdf3_raw(z, [r12, r13, r23])?;
        let perms = [
            cdf3_raw([z[1], z[0], z[2]], [r12, r23, r13])?,
            cdf3_raw([z[0], z[2], z[1]], [r13, r12, r23])?,
            cdf3_raw([z[2], z[1], z[0]], [r23, r13, r12])?,
        ];
        for p in perms {
            worst = worst.max((p - base).abs());
        }
        let reflected = cdf3_raw([-z[0], z[1], z[2]], [-r12, -r13, r23])?;
        worst = worst.max((cdf2_raw(z[1], z[2], r23) - base - reflected).abs());
    }
    Ok(worst)
}
