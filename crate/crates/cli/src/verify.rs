//! Verification suites behind `bmcopula verify`.

use std::io::Write;

use bmcopula_core::bm_joint::{BmParams, CorrBmParams};
use bmcopula_core::oracle::{self, IdentityVariant, IntegralSpec, PathConfig, SimTarget, VerificationRow};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;

pub const IDENTITY_TRIALS: usize = 1000;
pub const SPECS_PER_VARIANT: usize = 50;
pub const IDENTITY_TOL: f64 = 1e-7;
pub const PROP22_TOL: f64 = 1e-6;
pub const FULL_PATHS: usize = 1_000_000;
pub const QUICK_PATHS: usize = 100_000;

/// One pass/fail line of the summary report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(suite: &'static str, name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub mc_rows: Vec<VerificationRow>,
}

impl VerifyReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }

    pub fn write_summary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "suite,check,value,tolerance,pass")?;
        for c in &self.checks {
            writeln!(out, "{},{},{},{},{}", c.suite, c.name, c.value, c.tolerance, c.pass)?;
        }
        out.flush()
    }
}

/// Settings for [`run`].
#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    pub n_paths: usize,
    pub quick: bool,
    pub tolerance_scale: f64,
}

/// The four simulated joint laws, with drift and volatility switched on.
pub fn mc_targets() -> Result<Vec<SimTarget>, CliError> {
    Ok(vec![
        SimTarget::WtMt(BmParams::new(0.5, 1.0, 0.0, 0.75, 0.75)?),
        SimTarget::WTMt(BmParams::new(0.5, 1.3, 0.0, 0.75, 1.0)?),
        SimTarget::WTMst(BmParams::new(-0.4, 1.0, 0.25, 0.75, 1.0)?),
        SimTarget::B1TM2st {
            p: CorrBmParams::new(0.2, 0.5, 1.2, 0.8, 0.6)?,
            s: 0.25,
            t: 0.75,
            horizon: 1.0,
        },
    ])
}

pub fn identity_checks(seed: u64, scale: f64) -> Result<Vec<Check>, CliError> {
    let tol = IDENTITY_TOL * scale;
    Ok(vec![
        Check::at_most("kernel", "gaussian-kernel", oracle::check_kernel_identities(IDENTITY_TRIALS, seed)?, tol),
        Check::at_most("lemma", "lemma", oracle::check_lemma_identities(IDENTITY_TRIALS, seed)?, tol),
    ])
}

/// Worst residual per identity variant over `n_specs` random specs.
pub fn integral_checks(seed: u64, n_specs: usize, scale: f64) -> Result<Vec<Check>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<IntegralSpec> = (0..n_specs).map(|_| IntegralSpec::random(&mut rng)).collect();
    IdentityVariant::ALL
        .iter()
        .map(|&v| {
            let mut worst = 0.0_f64;
            for spec in &specs {
                worst = worst.max(oracle::check_integral_identity(spec, v)?);
            }
            Ok(Check::at_most("prop22", v.name(), worst, PROP22_TOL * scale))
        })
        .collect()
}

/// Runs every target at its default 20 query points.
pub fn mc_checks(opts: &VerifyOptions) -> Result<(Vec<Check>, Vec<VerificationRow>), CliError> {
    let (mut checks, mut rows) = (Vec::new(), Vec::new());
    let z_max = if opts.quick { 4.0 } else { 3.0 };
    for target in mc_targets()? {
        let cfg = PathConfig::new(opts.n_paths, target.horizon(), opts.seed)?;
        log::info!("simulating {} with {} paths", target.name(), cfg.n_paths);
        let r = oracle::mc_agreement(&target, &cfg, &oracle::default_queries(&target)?)?;
        let worst = r.iter().map(|row| row.z_score.abs()).fold(0.0, f64::max);
        checks.push(Check::at_most("mc", format!("{}/max_abs_z", target.name()), worst, z_max * opts.tolerance_scale));
        if !opts.quick {
            let over = r.iter().filter(|row| row.z_score.abs() > 2.0 * opts.tolerance_scale).count();
            checks.push(Check::at_most("mc", format!("{}/count_abs_z_gt_2", target.name()), over as f64, 2.0));
        }
        rows.extend(r);
    }
    Ok((checks, rows))
}

pub fn run(opts: &VerifyOptions) -> Result<VerifyReport, CliError> {
    let mut checks = identity_checks(opts.seed, opts.tolerance_scale)?;
    checks.extend(integral_checks(opts.seed, SPECS_PER_VARIANT, opts.tolerance_scale)?);
    let (mc, mc_rows) = mc_checks(opts)?;
    checks.extend(mc);
    Ok(VerifyReport { checks, mc_rows })
}
