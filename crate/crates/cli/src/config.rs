//! Run configuration: command-line flags over a TOML file over defaults.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rabi_ising::trotter::Mode;
use rabi_ising::{CoherentLabel, Parity, RabiParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Oracle,
    Recurrence,
    Ising,
    Series,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Oracle => "oracle",
            Route::Recurrence => "recurrence",
            Route::Ising => "ising",
            Route::Series => "series",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Real,
    Euclidean,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Real => Mode::Real,
            ModeArg::Euclidean => Mode::Euclidean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Slice count: a fixed value or chosen from the splitting error bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceCount {
    Auto,
    Fixed(usize),
}

impl SliceCount {
    fn parse(s: &str) -> Result<Self, CliError> {
        if s == "auto" {
            return Ok(SliceCount::Auto);
        }
        s.parse().map(SliceCount::Fixed).map_err(|_| {
            CliError::usage(format!(
                "--n must be a positive integer or 'auto', got '{s}'"
            ))
        })
    }
}

impl Serialize for SliceCount {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            SliceCount::Auto => s.serialize_str("auto"),
            SliceCount::Fixed(n) => s.serialize_u64(*n as u64),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum SliceValue {
    Int(usize),
    Text(String),
}

/// Flags shared by every subcommand. Every field is optional so that a value
/// given on the command line can be told apart from a default.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub omega0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub g: Option<f64>,
    /// Parity sector, +1 or -1.
    #[arg(long, allow_negative_numbers = true)]
    pub parity: Option<i32>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha_re: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha_im: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta_re: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta_im: Option<f64>,
    /// Grid start in units of 1/omega.
    #[arg(long, allow_negative_numbers = true)]
    pub t_start: Option<f64>,
    /// Grid stop in units of 1/omega.
    #[arg(long, allow_negative_numbers = true)]
    pub t_stop: Option<f64>,
    #[arg(long)]
    pub t_count: Option<usize>,
    /// oracle, recurrence, ising, series, all, or a comma-separated list.
    #[arg(long)]
    pub route: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Trotter slices, or "auto".
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub m_max: Option<usize>,
    /// Monte Carlo samples per wall count.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = "RABI_ISING_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Contents of a `--config` TOML file. Keys match the flag names with `_`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    omega0: Option<f64>,
    omega: Option<f64>,
    g: Option<f64>,
    parity: Option<i32>,
    alpha_re: Option<f64>,
    alpha_im: Option<f64>,
    beta_re: Option<f64>,
    beta_im: Option<f64>,
    t_start: Option<f64>,
    t_stop: Option<f64>,
    t_count: Option<usize>,
    route: Option<String>,
    mode: Option<ModeArg>,
    n: Option<SliceValue>,
    m_max: Option<usize>,
    samples: Option<usize>,
    seed: Option<u64>,
    format: Option<Format>,
    /// Absolute deviation floor for `compare`.
    tolerance: Option<f64>,
    /// Slice counts for the convergence fit in `compare`.
    n_sweep: Option<Vec<usize>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::usage(format!("bad config {origin}: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl TimeGrid {
    /// Grid values in units of 1/omega.
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                if k + 1 == self.count {
                    self.stop
                } else {
                    self.start + step * k as f64
                }
            })
            .collect()
    }
}

/// Effective configuration, echoed into JSON output. Thread count and output
/// path are left out: neither changes a result.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub omega0: f64,
    pub omega: f64,
    pub g: f64,
    pub parity: i32,
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub time_grid: TimeGrid,
    pub routes: Vec<Route>,
    pub mode: ModeArg,
    pub n: SliceCount,
    pub m_max: usize,
    pub samples: usize,
    pub seed: u64,
    pub format: Format,
    pub tolerance: f64,
    pub n_sweep: Vec<usize>,
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// Defaults for fields the command line and file leave unset.
#[derive(Debug, Clone)]
pub struct Defaults {
    pub route: &'static str,
    pub mode: ModeArg,
    pub t_start: f64,
    pub t_stop: f64,
    pub t_count: usize,
}

impl Defaults {
    pub const AMPLITUDE: Defaults = Defaults {
        route: "all",
        mode: ModeArg::Real,
        t_start: 0.0,
        t_stop: 10.0,
        t_count: 21,
    };
    /// `partition` always reports the spectral sum and the series; the
    /// route list is not used.
    pub const PARTITION: Defaults = Defaults {
        route: "oracle",
        mode: ModeArg::Euclidean,
        t_start: 0.5,
        t_stop: 3.0,
        t_count: 6,
    };
}

pub fn parse_routes(spec: &str, mode: ModeArg) -> Result<Vec<Route>, CliError> {
    let mut routes = Vec::new();
    for part in spec.split(',').map(str::trim) {
        let add: Vec<Route> = match part {
            "all" => match mode {
                ModeArg::Real => vec![
                    Route::Oracle,
                    Route::Recurrence,
                    Route::Ising,
                    Route::Series,
                ],
                ModeArg::Euclidean => vec![Route::Oracle, Route::Ising],
            },
            other => vec![Route::from_str(other, false)
                .map_err(|_| CliError::usage(format!("unknown route '{other}'")))?],
        };
        for r in add {
            if !routes.contains(&r) {
                routes.push(r);
            }
        }
    }
    if mode == ModeArg::Euclidean {
        for r in &routes {
            if matches!(r, Route::Recurrence | Route::Series) {
                return Err(CliError::usage(format!(
                    "route '{}' is only available in real mode",
                    r.name()
                )));
            }
        }
    }
    Ok(routes)
}

impl RunConfig {
    pub fn resolve(
        args: &RunArgs,
        file: &FileConfig,
        defaults: &Defaults,
    ) -> Result<Self, CliError> {
        macro_rules! pick {
            ($field:ident, $default:expr) => {
                args.$field
                    .clone()
                    .or(file.$field.clone())
                    .unwrap_or($default)
            };
        }
        let mode = pick!(mode, defaults.mode);
        let route = args
            .route
            .clone()
            .or(file.route.clone())
            .unwrap_or_else(|| defaults.route.to_string());
        let n = match (&args.n, &file.n) {
            (Some(s), _) => SliceCount::parse(s)?,
            (None, Some(SliceValue::Int(n))) => SliceCount::Fixed(*n),
            (None, Some(SliceValue::Text(s))) => SliceCount::parse(s)?,
            (None, None) => SliceCount::Auto,
        };
        let cfg = RunConfig {
            omega0: pick!(omega0, 0.3),
            omega: pick!(omega, 1.0),
            g: pick!(g, 0.5),
            parity: pick!(parity, 1),
            alpha: [pick!(alpha_re, -0.2), pick!(alpha_im, 0.5)],
            beta: [pick!(beta_re, 0.1), pick!(beta_im, 0.3)],
            time_grid: TimeGrid {
                start: pick!(t_start, defaults.t_start),
                stop: pick!(t_stop, defaults.t_stop),
                count: pick!(t_count, defaults.t_count),
            },
            routes: parse_routes(&route, mode)?,
            mode,
            n,
            m_max: pick!(m_max, 10),
            samples: pick!(samples, 10_000),
            seed: pick!(seed, 0),
            format: pick!(format, Format::Csv),
            tolerance: file.tolerance.unwrap_or(0.02),
            n_sweep: file.n_sweep.clone().unwrap_or_default(),
            threads: args.threads,
            out: args.out.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let g = &self.time_grid;
        if g.count == 0 {
            return Err(CliError::usage("time grid is empty (t-count = 0)"));
        }
        if !(g.start.is_finite() && g.stop.is_finite() && g.start >= 0.0 && g.stop >= g.start) {
            return Err(CliError::usage(format!(
                "time grid needs 0 <= t-start <= t-stop, got [{}, {}]",
                g.start, g.stop
            )));
        }
        if let SliceCount::Fixed(n) = self.n {
            if n < 2 {
                return Err(CliError::usage("--n must be at least 2"));
            }
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(CliError::usage("tolerance must be > 0"));
        }
        if self.n_sweep.iter().any(|&n| n < 2) {
            return Err(CliError::usage("n_sweep entries must be at least 2"));
        }
        if self.routes.contains(&Route::Series) && self.m_max > 0 && self.samples < 100 {
            return Err(CliError::usage("--samples must be at least 100"));
        }
        self.params()?;
        self.labels()?;
        Ok(())
    }

    pub fn params(&self) -> Result<RabiParams, CliError> {
        let parity = Parity::from_sign(self.parity).map_err(|e| CliError::usage(e.to_string()))?;
        RabiParams::new(self.omega0, self.omega, self.g, parity)
            .map_err(|e| CliError::usage(e.to_string()))
    }

    pub fn labels(&self) -> Result<(CoherentLabel, CoherentLabel), CliError> {
        let a = CoherentLabel::from_parts(self.alpha[0], self.alpha[1]);
        let b = CoherentLabel::from_parts(self.beta[0], self.beta[1]);
        match (a, b) {
            (Ok(a), Ok(b)) => Ok((a, b)),
            (Err(e), _) | (_, Err(e)) => Err(CliError::usage(e.to_string())),
        }
    }
}
