//! Run configuration: built-in defaults, then a `key=value` file, then
//! command-line flags.

use std::path::{Path, PathBuf};

use bmcopula_core::CopulaKind;
use clap::{Parser, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Copula CDF on a grid
    Eval,
    /// Copula density on a grid
    Density,
    /// Draw (u, v) pairs
    Sample,
    /// Run the identity, quadrature and Monte Carlo suites
    Verify,
    /// Write the figure analogues
    Figures,
}

/// Evaluate, sample and verify copulae generated by Brownian motions and
/// their running maxima.
#[derive(Debug, Parser)]
#[command(name = "bmcopula", version)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// bm-max | bm-max-drift | terminal-vs-max | terminal-vs-window-max | corr-terminal-vs-max
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Start of the maximum window
    #[arg(long)]
    pub s: Option<f64>,
    /// End of the maximum window
    #[arg(long)]
    pub t: Option<f64>,
    /// Terminal time
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    /// Grid size as UxV
    #[arg(long)]
    pub grid: Option<String>,
    /// Grid range as umin:umax,vmin:vmax
    #[arg(long)]
    pub range: Option<String>,
    /// Sample size, or path count for verify
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (directory for figures)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Reduced verification (1e5 paths, looser z bound)
    #[arg(long)]
    pub quick: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Multiplies every verification tolerance
    #[arg(long)]
    pub tolerance_scale: Option<f64>,
}

/// Evaluation grid over a sub-rectangle of the open unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub nu: usize,
    pub nv: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            u_min: 1e-3,
            u_max: 1.0 - 1e-3,
            v_min: 1e-3,
            v_max: 1.0 - 1e-3,
            nu: 101,
            nv: 101,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        let inside = |a: f64, b: f64| a > 0.0 && a < b && b < 1.0;
        if !inside(self.u_min, self.u_max) || !inside(self.v_min, self.v_max) {
            return Err(CliError::Usage(format!(
                "grid range must satisfy 0 < min < max < 1, got u {}:{} v {}:{}",
                self.u_min, self.u_max, self.v_min, self.v_max
            )));
        }
        if self.nu < 2 || self.nv < 2 {
            return Err(CliError::Usage(format!("grid needs at least 2x2 points, got {}x{}", self.nu, self.nv)));
        }
        Ok(())
    }

    pub fn u(&self, i: usize) -> f64 {
        self.u_min + (self.u_max - self.u_min) * i as f64 / (self.nu - 1) as f64
    }

    pub fn v(&self, j: usize) -> f64 {
        self.v_min + (self.v_max - self.v_min) * j as f64 / (self.nv - 1) as f64
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub kind: CopulaKind,
    pub grid: GridSpec,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub seed: u64,
    pub n: Option<usize>,
    pub quick: bool,
    pub tolerance_scale: f64,
    /// Raw parameters, kept for commands that build several kinds.
    pub params: Params,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub mu: f64,
    pub rho: f64,
    pub s: f64,
    pub t: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone)]
struct Settings {
    kind: String,
    params: Params,
    grid: GridSpec,
    n: Option<usize>,
    seed: u64,
    out: Option<PathBuf>,
    svg: Option<PathBuf>,
    quick: bool,
    tolerance_scale: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            kind: "bm-max".into(),
            params: Params {
                mu: 0.0,
                rho: 0.0,
                s: 0.25,
                t: 0.75,
                horizon: 1.0,
            },
            grid: GridSpec::default(),
            n: None,
            seed: 1,
            out: None,
            svg: None,
            quick: false,
            tolerance_scale: 1.0,
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, CliError> {
    raw.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value for {key}: {raw:?}")))
}

fn parse_grid(raw: &str) -> Result<(usize, usize), CliError> {
    let (a, b) = raw
        .split_once(['x', 'X'])
        .ok_or_else(|| CliError::Usage(format!("grid must look like 101x101, got {raw:?}")))?;
    Ok((number("grid", a)?, number("grid", b)?))
}

fn parse_range(raw: &str) -> Result<[f64; 4], CliError> {
    let bad = || CliError::Usage(format!("range must look like 0.001:0.999,0.001:0.999, got {raw:?}"));
    let (u, v) = raw.split_once(',').ok_or_else(bad)?;
    let (a, b) = u.split_once(':').ok_or_else(bad)?;
    let (c, d) = v.split_once(':').ok_or_else(bad)?;
    Ok([number("range", a)?, number("range", b)?, number("range", c)?, number("range", d)?])
}

fn parse_bool(key: &str, raw: &str) -> Result<bool, CliError> {
    match raw.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Usage(format!("invalid value for {key}: {raw:?}"))),
    }
}

impl Settings {
    fn set(&mut self, key: &str, raw: &str) -> Result<(), CliError> {
        match key {
            "kind" => self.kind = raw.trim().to_string(),
            "mu" => self.params.mu = number(key, raw)?,
            "rho" => self.params.rho = number(key, raw)?,
            "s" => self.params.s = number(key, raw)?,
            "t" => self.params.t = number(key, raw)?,
            "T" => self.params.horizon = number(key, raw)?,
            "grid" => (self.grid.nu, self.grid.nv) = parse_grid(raw)?,
            "range" => {
                [self.grid.u_min, self.grid.u_max, self.grid.v_min, self.grid.v_max] = parse_range(raw)?;
            }
            "n" => self.n = Some(number(key, raw)?),
            "seed" => self.seed = number(key, raw)?,
            "out" => self.out = Some(PathBuf::from(raw.trim())),
            "svg" => self.svg = Some(PathBuf::from(raw.trim())),
            "quick" => self.quick = parse_bool(key, raw)?,
            "tolerance_scale" => self.tolerance_scale = number(key, raw)?,
            _ => return Err(CliError::Usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("{}:{}: expected key=value, got {line:?}", path.display(), k + 1))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }
}

/// Builds the copula kind named `name` from `p`.
pub fn make_kind(name: &str, p: &Params) -> Result<CopulaKind, CliError> {
    let Params { mu, rho, s, t, horizon } = *p;
    let kind = match name {
        "bm-max" => CopulaKind::BmMax { t },
        "bm-max-drift" => CopulaKind::BmMaxDrift { mu, t },
        "terminal-vs-max" => CopulaKind::TerminalVsMax { mu, t, horizon },
        "terminal-vs-window-max" => CopulaKind::TerminalVsWindowMax { mu, s, t, horizon },
        "corr-terminal-vs-max" => CopulaKind::CorrTerminalVsMax { mu, rho, s, t, horizon },
        _ => return Err(CliError::Usage(format!("unknown kind {name:?}"))),
    };
    bmcopula_core::Copula::new(kind).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(kind)
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let mut st = Settings::default();
        if let Some(path) = &cli.config {
            st.apply_file(path)?;
        }
        if let Some(v) = &cli.kind {
            st.set("kind", v)?;
        }
        let flags = [("mu", cli.mu), ("rho", cli.rho), ("s", cli.s), ("t", cli.t), ("T", cli.horizon)];
        for (key, value) in flags {
            if let Some(v) = value {
                st.set(key, &v.to_string())?;
            }
        }
        if let Some(v) = &cli.grid {
            st.set("grid", v)?;
        }
        if let Some(v) = &cli.range {
            st.set("range", v)?;
        }
        if let Some(v) = cli.n {
            st.n = Some(v);
        }
        if let Some(v) = cli.seed {
            st.seed = v;
        }
        if let Some(v) = &cli.out {
            st.out = Some(v.clone());
        }
        if let Some(v) = &cli.svg {
            st.svg = Some(v.clone());
        }
        st.quick |= cli.quick;
        if let Some(v) = cli.tolerance_scale {
            st.tolerance_scale = v;
        }

        st.grid.validate()?;
        if !(st.tolerance_scale >= 0.0 && st.tolerance_scale.is_finite()) {
            return Err(CliError::Usage(format!("tolerance_scale must be >= 0, got {}", st.tolerance_scale)));
        }
        if cli.command == Command::Sample && st.n == Some(0) {
            return Err(CliError::Usage("sample needs --n >= 1".into()));
        }
        let kind = make_kind(&st.kind, &st.params)?;
        Ok(Self {
            command: cli.command,
            kind,
            grid: st.grid,
            out: st.out,
            svg: st.svg,
            seed: st.seed,
            n: st.n,
            quick: st.quick,
            tolerance_scale: st.tolerance_scale,
            params: st.params,
        })
    }

    /// Parses flags the way the binary does.
    pub fn parse_from<I, T>(args: I) -> Result<Self, CliError>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
        Self::from_cli(&cli)
    }
}
