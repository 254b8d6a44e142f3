//! The five subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bmcopula_core::stats::kendall_tau;
use bmcopula_core::{Copula, CopulaKind, SampleBatch};

use crate::config::{make_kind, Command, GridSpec, Params, RunConfig};
use crate::error::CliError;
use crate::grid::{self, GridValues, Quantity};
use crate::svg;
use crate::verify::{self, VerifyOptions, VerifyReport};

pub const DEFAULT_SAMPLE_SIZE: usize = 1000;
pub const FIGURE_SAMPLE_SIZE: usize = 100_000;
pub const FIG2_DRIFTS: [f64; 3] = [-2.0, 0.0, 10.0];
pub const FIG3_RHOS: [f64; 3] = [-0.99, 0.0, 0.99];

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

/// Runs `body` against `path`, or stdout when there is none.
fn with_output<F>(path: Option<&Path>, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    match path {
        Some(p) => {
            let mut w = create(p)?;
            body(&mut w).map_err(|e| CliError::io(p, e))
        }
        None => body(&mut std::io::stdout().lock()).map_err(|e| CliError::io("<stdout>", e)),
    }
}

fn write_svg(path: &Path, grid: &GridValues, title: &str) -> Result<(), CliError> {
    std::fs::write(path, svg::heatmap(grid, title)).map_err(|e| CliError::io(path, e))
}

pub fn cmd_grid(cfg: &RunConfig, quantity: Quantity) -> Result<GridValues, CliError> {
    let copula = Copula::with_cache(cfg.kind)?;
    let values = grid::evaluate(&copula, &cfg.grid, quantity)?;
    with_output(cfg.out.as_deref(), |w| values.write_csv(w))?;
    if let Some(path) = &cfg.svg {
        write_svg(path, &values, &format!("{} of {}", quantity.label(), cfg.kind.describe()))?;
    }
    Ok(values)
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<GridValues, CliError> {
    cmd_grid(cfg, Quantity::Cdf)
}

pub fn cmd_density(cfg: &RunConfig) -> Result<GridValues, CliError> {
    cmd_grid(cfg, Quantity::Density)
}

pub fn write_sample<W: Write + ?Sized>(batch: &SampleBatch, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "# {} seed={} n={}", batch.kind.describe(), batch.seed, batch.pairs.len())?;
    writeln!(out, "u,v")?;
    for [u, v] in &batch.pairs {
        writeln!(out, "{u},{v}")?;
    }
    out.flush()
}

pub fn cmd_sample(cfg: &RunConfig) -> Result<SampleBatch, CliError> {
    let copula = Copula::with_cache(cfg.kind)?;
    let batch = copula.sample(cfg.n.unwrap_or(DEFAULT_SAMPLE_SIZE), cfg.seed)?;
    with_output(cfg.out.as_deref(), |w| write_sample(&batch, w))?;
    Ok(batch)
}

/// Path next to `out` for the Monte Carlo detail table.
pub fn mc_detail_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("verify");
    out.with_file_name(format!("{stem}-mc.csv"))
}

/// Writes the reports and returns them; failing checks are left for the
/// caller to turn into an exit code.
pub fn cmd_verify(cfg: &RunConfig) -> Result<VerifyReport, CliError> {
    let opts = VerifyOptions {
        seed: cfg.seed,
        n_paths: cfg.n.unwrap_or(if cfg.quick { verify::QUICK_PATHS } else { verify::FULL_PATHS }),
        quick: cfg.quick,
        tolerance_scale: cfg.tolerance_scale,
    };
    let report = verify::run(&opts)?;
    with_output(cfg.out.as_deref(), |w| report.write_summary(w))?;
    if let Some(out) = &cfg.out {
        let path = mc_detail_path(out);
        let mut w = create(&path)?;
        bmcopula_core::oracle::write_report(&report.mc_rows, &mut w).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(report)
}

/// One emitted panel.
#[derive(Debug, Clone)]
pub struct Panel {
    pub name: String,
    pub kind: CopulaKind,
    pub values: GridValues,
}

/// Panels plus the numbers behind the shape assertions.
#[derive(Debug, Clone)]
pub struct FiguresReport {
    pub panels: Vec<Panel>,
    /// Largest BmMax density on grid points with `u > (v + 1) / 2`.
    pub beyond_seam_max: f64,
    /// Copula mass of `[0.9, 1]^2` for each drift in [`FIG2_DRIFTS`].
    pub corner_mass: [f64; 3],
    /// Sample Kendall tau for each correlation in [`FIG3_RHOS`].
    pub kendall: [f64; 3],
}

fn tag(x: f64) -> String {
    let s = if x < 0.0 { format!("m{}", -x) } else { x.to_string() };
    s.replace('.', "p")
}

fn panel(dir: &Path, name: String, kind: CopulaKind, grid: &GridSpec, quantity: Quantity) -> Result<Panel, CliError> {
    let copula = Copula::with_cache(kind)?;
    let values = grid::evaluate(&copula, grid, quantity)?;
    values
        .write_csv(create(&dir.join(format!("{name}.csv")))?)
        .map_err(|e| CliError::io(dir.join(&name), e))?;
    write_svg(&dir.join(format!("{name}.svg")), &values, &format!("{} of {}", quantity.label(), kind.describe()))?;
    Ok(Panel { name, kind, values })
}

/// Writes three panel sets: the BmMax density, drifted densities for
/// `mu` in {-2, 0, 10}, and the CDF of the correlated kind for
/// `rho` in {-0.99, 0, 0.99}, with `mu`, `s`, `t`, `T` from the config.
pub fn cmd_figures(cfg: &RunConfig) -> Result<FiguresReport, CliError> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("figures"));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut panels = Vec::new();

    let fig1 = panel(&dir, "fig1_bm_max_density".into(), CopulaKind::BmMax { t: 1.0 }, &cfg.grid, Quantity::Density)?;
    let g = &fig1.values;
    let mut beyond_seam_max = 0.0_f64;
    for j in 0..g.spec.nv {
        for i in 0..g.spec.nu {
            if g.spec.u(i) > (g.spec.v(j) + 1.0) / 2.0 {
                beyond_seam_max = beyond_seam_max.max(g.get(i, j).abs());
            }
        }
    }
    panels.push(fig1);

    let mut corner_mass = [0.0; 3];
    for (k, &mu) in FIG2_DRIFTS.iter().enumerate() {
        let kind = CopulaKind::BmMaxDrift { mu, t: 1.0 };
        corner_mass[k] = Copula::new(kind)?.cdf(0.9, 0.9)? - 0.8;
        panels.push(panel(&dir, format!("fig2_bm_max_drift_density_mu_{}", tag(mu)), kind, &cfg.grid, Quantity::Density)?);
    }

    let mut kendall = [0.0; 3];
    let n = cfg.n.unwrap_or(FIGURE_SAMPLE_SIZE);
    for (k, &rho) in FIG3_RHOS.iter().enumerate() {
        let kind = make_kind("corr-terminal-vs-max", &Params { rho, ..cfg.params })?;
        let p = panel(&dir, format!("fig3_corr_copula_cdf_rho_{}", tag(rho)), kind, &cfg.grid, Quantity::Cdf)?;
        let batch = Copula::with_cache(kind)?.sample(n, cfg.seed)?;
        let (u, v): (Vec<f64>, Vec<f64>) = batch.pairs.iter().map(|p| (p[0], p[1])).unzip();
        kendall[k] = kendall_tau(&u, &v);
        panels.push(p);
    }

    let report = FiguresReport {
        panels,
        beyond_seam_max,
        corner_mass,
        kendall,
    };
    let mut w = create(&dir.join("shape.csv"))?;
    write_shape(&report, &mut w).map_err(|e| CliError::io(dir.join("shape.csv"), e))?;
    Ok(report)
}

fn write_shape<W: Write>(r: &FiguresReport, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "quantity,parameter,value")?;
    writeln!(out, "fig1_density_beyond_seam_max,,{}", r.beyond_seam_max)?;
    for (mu, m) in FIG2_DRIFTS.iter().zip(r.corner_mass) {
        writeln!(out, "fig2_corner_mass,mu={mu},{m}")?;
    }
    for (rho, tau) in FIG3_RHOS.iter().zip(r.kendall) {
        writeln!(out, "fig3_sample_kendall_tau,rho={rho},{tau}")?;
    }
    out.flush()
}

/// Dispatches `cfg.command`. Failing verification checks become
/// [`CliError::VerificationFailed`].
pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    match cfg.command {
        Command::Eval => cmd_eval(cfg).map(drop),
        Command::Density => cmd_density(cfg).map(drop),
        Command::Sample => cmd_sample(cfg).map(drop),
        Command::Verify => {
            let report = cmd_verify(cfg)?;
            match report.failures() {
                0 => Ok(()),
                failed => Err(CliError::VerificationFailed { failed }),
            }
        }
        Command::Figures => {
            let r = cmd_figures(cfg)?;
            log::info!("wrote {} panels", r.panels.len());
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags() {
        assert_eq!(tag(-0.99), "m0p99");
        assert_eq!(tag(10.0), "10");
        assert_eq!(tag(0.0), "0");
    }

    #[test]
    fn detail_path() {
        assert_eq!(mc_detail_path(Path::new("out/report.csv")), PathBuf::from("out/report-mc.csv"));
    }
}
