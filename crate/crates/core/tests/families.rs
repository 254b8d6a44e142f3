use bmcopula_core::bm_joint::{self, BmParams, CorrBmParams};
use bmcopula_core::gauss::quantile;
use bmcopula_core::{Copula, CopulaKind};

fn grid9() -> impl Iterator<Item = (f64, f64)> {
    (1..=9).flat_map(|i| (1..=9).map(move |j| (i as f64 / 10.0, j as f64 / 10.0)))
}

fn max_gap(a: CopulaKind, b: CopulaKind) -> f64 {
    let (a, b) = (Copula::new(a).unwrap(), Copula::new(b).unwrap());
    grid9()
        .map(|(u, v)| (a.cdf(u, v).unwrap() - b.cdf(u, v).unwrap()).abs())
        .fold(0.0, f64::max)
}

#[test]
fn collapse_chain() {
    let (mu, s, t, horizon) = (0.6, 0.25, 0.75, 1.0);
    let e = 1e-11;
    let steps = [
        (
            CopulaKind::CorrTerminalVsMax { mu, rho: 1.0 - e, s, t, horizon },
            CopulaKind::TerminalVsWindowMax { mu, s, t, horizon },
        ),
        (
            CopulaKind::TerminalVsWindowMax { mu, s: e, t, horizon },
            CopulaKind::TerminalVsMax { mu, t, horizon },
        ),
        (
            CopulaKind::TerminalVsMax { mu, t: horizon - e, horizon },
            CopulaKind::BmMaxDrift { mu, t: horizon },
        ),
        (CopulaKind::BmMaxDrift { mu: e, t: horizon }, CopulaKind::BmMax { t: horizon }),
    ];
    for (near, limit) in steps {
        let gap = max_gap(near, limit);
        assert!(gap < 1e-5, "{near:?} -> {limit:?}: {gap}");
    }
}

#[test]
fn exact_limits_dispatch() {
    let gap = max_gap(
        CopulaKind::CorrTerminalVsMax { mu: 0.3, rho: 1.0, s: 0.0, t: 1.0, horizon: 1.0 },
        CopulaKind::BmMaxDrift { mu: 0.3, t: 1.0 },
    );
    assert!(gap < 1e-12, "{gap}");
}

#[test]
fn independence_limit() {
    for mu in [-2.0, 0.0, 10.0] {
        let c = Copula::new(CopulaKind::CorrTerminalVsMax { mu, rho: 0.0, s: 0.25, t: 0.75, horizon: 1.0 }).unwrap();
        for (u, v) in grid9() {
            assert!((c.cdf(u, v).unwrap() - u * v).abs() < 1e-7, "mu={mu} ({u},{v})");
        }
    }
}

/// Quantile of a continuous distribution function by bisection.
fn invert(f: impl Fn(f64) -> f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if f(m) < p {
            lo = m
        } else {
            hi = m
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn drift_rescaling_invariance() {
    let (mu, sigma) = (0.9, 1.7);
    let (s, t, horizon) = (0.2, 0.6, 1.0);
    let p = BmParams::new(mu, sigma, s, t, horizon).unwrap();
    let pm = BmParams::new(mu, sigma, 0.0, t, horizon).unwrap();
    let pt = BmParams::new(mu, sigma, 0.0, t, t).unwrap();
    let q = CorrBmParams::new(-0.4, mu, 0.7, sigma, -0.55).unwrap();
    let m = mu / sigma;

    let window = Copula::new(CopulaKind::TerminalVsWindowMax { mu: m, s, t, horizon }).unwrap();
    let terminal = Copula::new(CopulaKind::TerminalVsMax { mu: m, t, horizon }).unwrap();
    let plain = Copula::new(CopulaKind::BmMaxDrift { mu: m, t }).unwrap();
    let corr = Copula::new(CopulaKind::CorrTerminalVsMax { mu: m, rho: -0.55, s, t, horizon }).unwrap();

    for (u, v) in grid9() {
        let xt = mu * horizon + sigma * horizon.sqrt() * quantile(u);
        let y = invert(|y| bm_joint::cdf_mst(y, &p).unwrap(), v);
        let got = bm_joint::cdf_wterm_mst(xt, y, &p).unwrap();
        assert!((got - window.cdf(u, v).unwrap()).abs() < 1e-7, "window ({u},{v})");

        let y = invert(|y| bm_joint::cdf_mt(y, &pm), v);
        let got = bm_joint::cdf_wterm_mt(xt, y, &pm).unwrap();
        assert!((got - terminal.cdf(u, v).unwrap()).abs() < 1e-7, "terminal ({u},{v})");

        let x = mu * t + sigma * t.sqrt() * quantile(u);
        let y = invert(|y| bm_joint::cdf_mt(y, &pt), v);
        let got = bm_joint::cdf_wt_mt(x, y, &pt);
        assert!((got - plain.cdf(u, v).unwrap()).abs() < 1e-7, "plain ({u},{v})");

        let x1 = q.mu1 * horizon + q.sigma1 * horizon.sqrt() * quantile(u);
        let y = invert(|y| bm_joint::cdf_mst(y, &p).unwrap(), v);
        let got = bm_joint::cdf_b1term_m2st(x1, y, &q, s, t, horizon).unwrap();
        assert!((got - corr.cdf(u, v).unwrap()).abs() < 1e-7, "corr ({u},{v})");
    }
}

#[test]
fn zeta_against_tabulated_inversion() {
    let (mu, t) = (0.3, 1.0);
    let p = BmParams::drifted(mu, t).unwrap();
    let c = Copula::new(CopulaKind::BmMaxDrift { mu, t }).unwrap();
    // dense table of the distribution function, inverted by linear interpolation
    let n = 2000;
    let ys: Vec<f64> = (0..=n).map(|k| 4.0 * k as f64 / n as f64).collect();
    let fs: Vec<f64> = ys.iter().map(|&y| bm_joint::cdf_mt(y, &p)).collect();
    let k = fs.partition_point(|&f| f < 0.5);
    let (f0, f1) = (fs[k - 1], fs[k]);
    let (y0, y1) = (ys[k - 1], ys[k]);
    let y_lin = y0 + (0.5 - f0) / (f1 - f0) * (y1 - y0);
    // one Newton polish removes the interpolation error of the table
    let y_tab = y_lin - (bm_joint::cdf_mt(y_lin, &p) - 0.5) / bm_joint::pdf_mt(y_lin, &p);
    assert!((c.zeta(0.5).unwrap() - y_tab).abs() < 1e-8);
}

#[test]
fn zeta_inverts_the_max_law() {
    let p = BmParams::drifted(0.0, 1.0).unwrap();
    let c = Copula::new(CopulaKind::BmMaxDrift { mu: 0.0, t: 1.0 }).unwrap();
    for y in [0.1, 1.0, 3.0] {
        assert!((c.zeta(bm_joint::cdf_mt(y, &p)).unwrap() - y).abs() < 1e-8);
    }
}
