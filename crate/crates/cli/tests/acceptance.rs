//! Acceptance criteria 1-8, one line each. Exits nonzero if any fails.

use std::time::Instant;

use bmcopula_cli::commands::{cmd_figures, write_sample};
use bmcopula_cli::verify::{self, VerifyOptions};
use bmcopula_cli::RunConfig;
use bmcopula_core::bm_joint::BmParams;
use bmcopula_core::gauss;
use bmcopula_core::oracle::{self, IdentityVariant, IntegralSpec, PathConfig, RStarIndexing, SimTarget};
use bmcopula_core::quad::{integrate, QuadOptions};
use bmcopula_core::{Copula, CopulaKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const MUS: [f64; 3] = [-2.0, 0.0, 10.0];
const RHOS: [f64; 3] = [-0.99, 0.0, 0.99];
const S: f64 = 0.25;
const T: f64 = 0.75;
const HORIZON: f64 = 1.0;
const RECTANGLES: usize = 10_000;

fn parameter_sets() -> Vec<CopulaKind> {
    let mut kinds = vec![CopulaKind::BmMax { t: T }];
    for mu in MUS {
        kinds.push(CopulaKind::BmMaxDrift { mu, t: T });
        kinds.push(CopulaKind::TerminalVsMax { mu, t: T, horizon: HORIZON });
        kinds.push(CopulaKind::TerminalVsWindowMax { mu, s: S, t: T, horizon: HORIZON });
        for rho in RHOS {
            kinds.push(CopulaKind::CorrTerminalVsMax { mu, rho, s: S, t: T, horizon: HORIZON });
        }
    }
    kinds
}

fn ok_if(pass: bool, detail: String) -> Outcome {
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_boundary, mut worst_volume) = (0.0_f64, f64::INFINITY);
    let kinds = parameter_sets();
    for kind in &kinds {
        let c = Copula::with_cache(*kind).map_err(err)?;
        let cdf = |u: f64, v: f64| c.cdf(u, v).map_err(err);
        for _ in 0..100 {
            let x: f64 = rng.random();
            let eps = 1e-10;
            // Exact edges, then edges approached within eps (Lipschitz slack eps).
            let gaps = [
                cdf(x, 0.0)?.abs(),
                cdf(0.0, x)?.abs(),
                (cdf(x, 1.0)? - x).abs(),
                (cdf(1.0, x)? - x).abs(),
                (cdf(x, 1.0 - eps)? - x).abs() - eps,
                (cdf(1.0 - eps, x)? - x).abs() - eps,
                cdf(x, eps)?.abs() - eps,
                cdf(eps, x)?.abs() - eps,
            ];
            worst_boundary = gaps.iter().fold(worst_boundary, |w, &g| w.max(g));
        }
        for k in 0..RECTANGLES {
            let width = if k % 2 == 0 { 1.0 } else { 0.01 };
            let (u1, v1): (f64, f64) = (rng.random(), rng.random());
            let u2 = (u1 + width * rng.random::<f64>()).min(1.0);
            let v2 = (v1 + width * rng.random::<f64>()).min(1.0);
            let vol = cdf(u2, v2)? - cdf(u1, v2)? - cdf(u2, v1)? + cdf(u1, v1)?;
            worst_volume = worst_volume.min(vol);
        }
    }
    ok_if(
        worst_boundary <= 1e-8 && worst_volume >= -1e-9,
        format!(
            "{} parameter sets x {RECTANGLES} rectangles: worst boundary gap {worst_boundary:.2e}, min volume {worst_volume:.2e}",
            kinds.len()
        ),
    )
}

/// Integral of the density over the unit square, split at the seam
/// `u = P(W_t <= zeta(v))` beyond which the density vanishes.
fn density_mass(kind: CopulaKind) -> Result<f64, String> {
    let (mu, t) = match kind {
        CopulaKind::BmMax { t } => (0.0, t),
        CopulaKind::BmMaxDrift { mu, t } => (mu, t),
        _ => return Err("seam only defined for the maximum kinds".into()),
    };
    let c = Copula::with_cache(kind).map_err(err)?;
    let mut failure = None;
    let mut inner = |v: f64| -> f64 {
        let run = || -> bmcopula_core::Result<f64> {
            let seam = gauss::cdf((c.zeta(v)? - mu * t) / t.sqrt());
            let q = integrate(|u| c.density(u, v).unwrap_or(f64::NAN), 0.0, seam, QuadOptions::abs(1e-7))?;
            Ok(q.value)
        };
        run().unwrap_or_else(|e| {
            failure.get_or_insert(e.to_string());
            f64::NAN
        })
    };
    let opts = QuadOptions {
        abs_tol: 1e-5,
        rel_tol: 1e-8,
        max_intervals: 400,
    };
    let outer = integrate(&mut inner, 0.0, 1.0, opts);
    match (outer, failure) {
        (Ok(q), None) => Ok(q.value),
        (_, Some(e)) => Err(e),
        (Err(e), None) => Err(e.to_string()),
    }
}

fn density_normalization() -> Outcome {
    let kinds = [
        CopulaKind::BmMax { t: 1.0 },
        CopulaKind::BmMaxDrift { mu: -2.0, t: 1.0 },
        CopulaKind::BmMaxDrift { mu: 2.0, t: 1.0 },
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    for kind in kinds {
        let mass = density_mass(kind)?;
        pass &= (mass - 1.0).abs() <= 5e-3;
        parts.push(format!("{}: {mass:.6}", kind.describe()));
    }
    ok_if(pass, parts.join("; "))
}

fn identities() -> Outcome {
    let checks = verify::identity_checks(7, 1.0).map_err(err)?;
    let detail = checks.iter().map(|c| format!("{} {:.2e}", c.name, c.value)).collect::<Vec<_>>().join(", ");
    ok_if(checks.iter().all(|c| c.pass), format!("{} draws each: {detail}", verify::IDENTITY_TRIALS))
}

fn integral_identities() -> Outcome {
    let checks = verify::integral_checks(11, verify::SPECS_PER_VARIANT, 1.0).map_err(err)?;
    let worst = checks.iter().map(|c| c.value).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut shifted = 0.0_f64;
    for _ in 0..3 {
        let spec = IntegralSpec::random(&mut rng);
        for v in &IdentityVariant::ALL[..4] {
            shifted = shifted.max(oracle::check_integral_identity_with(&spec, *v, RStarIndexing::Shifted).map_err(err)?);
        }
    }
    ok_if(
        checks.iter().all(|c| c.pass) && shifted > 1e-3,
        format!(
            "6 variants x {} specs, worst residual {worst:.2e} with printed indexing; shifted indexing residual {shifted:.2e}",
            verify::SPECS_PER_VARIANT
        ),
    )
}

fn monte_carlo(quick: bool) -> Outcome {
    let opts = VerifyOptions {
        seed: 1,
        n_paths: if quick { verify::QUICK_PATHS } else { verify::FULL_PATHS },
        quick,
        tolerance_scale: 1.0,
    };
    let (checks, _) = verify::mc_checks(&opts).map_err(err)?;
    let detail = checks.iter().map(|c| format!("{} {:.3}", c.name, c.value)).collect::<Vec<_>>().join(", ");
    ok_if(checks.iter().all(|c| c.pass), format!("n={}: {detail}", opts.n_paths))
}

fn max_gap(a: CopulaKind, b: CopulaKind) -> Result<f64, String> {
    let (a, b) = (Copula::new(a).map_err(err)?, Copula::new(b).map_err(err)?);
    let mut worst = 0.0_f64;
    for i in 1..=9 {
        for j in 1..=9 {
            let (u, v) = (i as f64 / 10.0, j as f64 / 10.0);
            worst = worst.max((a.cdf(u, v).map_err(err)? - b.cdf(u, v).map_err(err)?).abs());
        }
    }
    Ok(worst)
}

fn collapse_chain() -> Outcome {
    let (mu, e) = (0.6, 1e-11);
    let steps = [
        (
            CopulaKind::CorrTerminalVsMax { mu, rho: 1.0 - e, s: S, t: T, horizon: HORIZON },
            CopulaKind::TerminalVsWindowMax { mu, s: S, t: T, horizon: HORIZON },
        ),
        (
            CopulaKind::TerminalVsWindowMax { mu, s: e, t: T, horizon: HORIZON },
            CopulaKind::TerminalVsMax { mu, t: T, horizon: HORIZON },
        ),
        (
            CopulaKind::TerminalVsMax { mu, t: HORIZON - e, horizon: HORIZON },
            CopulaKind::BmMaxDrift { mu, t: HORIZON },
        ),
        (CopulaKind::BmMaxDrift { mu: e, t: HORIZON }, CopulaKind::BmMax { t: HORIZON }),
    ];
    let mut gaps = Vec::new();
    for (near, limit) in steps {
        gaps.push(max_gap(near, limit)?);
    }
    let mut independence = 0.0_f64;
    for mu in MUS {
        let c = Copula::new(CopulaKind::CorrTerminalVsMax { mu, rho: 0.0, s: S, t: T, horizon: HORIZON }).map_err(err)?;
        for i in 1..=9 {
            for j in 1..=9 {
                let (u, v) = (i as f64 / 10.0, j as f64 / 10.0);
                independence = independence.max((c.cdf(u, v).map_err(err)? - u * v).abs());
            }
        }
    }
    ok_if(
        gaps.iter().all(|&g| g < 1e-5) && independence < 1e-7,
        format!("chain gaps {gaps:?}", gaps = gaps.iter().map(|g| format!("{g:.1e}")).collect::<Vec<_>>()) + &format!(", independence gap {independence:.1e}"),
    )
}

fn figures() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let out = dir.path().join("figures");
    let cfg = RunConfig::parse_from(["bmcopula", "figures", "--out", out.to_str().unwrap()]).map_err(err)?;
    let r = cmd_figures(&cfg).map_err(err)?;
    let [m0, m1, m2] = r.corner_mass;
    let signs = r.kendall[0] < 0.0 && r.kendall[2] > 0.0;
    ok_if(
        r.panels.len() == 7 && r.beyond_seam_max == 0.0 && m0 < m1 && m1 < m2 && signs,
        format!(
            "density beyond seam {}, corner mass {m0:.4} < {m1:.4} < {m2:.4}, tau {:.3} / {:.3} / {:.3}",
            r.beyond_seam_max, r.kendall[0], r.kendall[1], r.kendall[2]
        ),
    )
}

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool").install(f)
}

fn determinism() -> Outcome {
    let kinds = [
        CopulaKind::BmMaxDrift { mu: 0.5, t: T },
        CopulaKind::CorrTerminalVsMax { mu: 0.5, rho: 0.6, s: S, t: T, horizon: HORIZON },
    ];
    let sample_bytes = |kind: CopulaKind| -> Result<Vec<u8>, String> {
        let batch = Copula::with_cache(kind).map_err(err)?.sample(10_000, 42).map_err(err)?;
        let mut buf = Vec::new();
        write_sample(&batch, &mut buf).map_err(err)?;
        Ok(buf)
    };
    for kind in kinds {
        if in_pool(1, || sample_bytes(kind))? != in_pool(4, || sample_bytes(kind))? {
            return Err(format!("sample output differs across thread counts for {}", kind.describe()));
        }
    }
    let target = SimTarget::WTMst(BmParams::new(0.3, 1.1, S, T, HORIZON).map_err(err)?);
    let cfg = PathConfig::new(50_000, HORIZON, 9).map_err(err)?;
    let queries = oracle::default_queries(&target).map_err(err)?;
    let run = || oracle::simulate_joint(&target, &cfg, &queries).map_err(err);
    let (a, b) = (in_pool(1, run)?, in_pool(4, run)?);
    let same = a.estimates.iter().zip(&b.estimates).all(|(x, y)| x.to_bits() == y.to_bits())
        && a.std_errors.iter().zip(&b.std_errors).all(|(x, y)| x.to_bits() == y.to_bits());
    ok_if(same, "sample CSV bytes and Monte Carlo estimates identical on 1 and 4 threads".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1", axioms),
        ("2", density_normalization),
        ("3", identities),
        ("4", integral_identities),
        ("5", || monte_carlo(false)),
        ("5-quick", || monte_carlo(true)),
        ("6", collapse_chain),
        ("7", figures),
        ("8", determinism),
    ];
    let mut failed = 0;
    for (id, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id}: PASS ({secs:.1} s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id}: FAIL ({secs:.1} s) {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
