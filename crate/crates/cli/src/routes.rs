//! Per-grid-point evaluation of each route.

use rabi_ising::domain_wall::{amplitude_series, partition_series, RngSpec, SeriesOptions};
use rabi_ising::fock::{auto_truncation, FockOracle, MAX_CUTOFF};
use rabi_ising::trotter::{
    amplitude_ising_exact, amplitude_ising_transfer, amplitude_recurrence,
    amplitude_recurrence_restricted, trotter_counts, Mode, RESTRICTED_CAP, UNRESTRICTED_CAP,
};
use rabi_ising::{CoherentLabel, RabiError, RabiParams, C64};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ModeArg, Route, RunConfig, SliceCount};
use crate::CliError;

/// Largest slice count evaluated by explicit branch lists; beyond it the
/// wall-restricted transfer product is used.
const FULL_BRANCH_LIMIT: usize = 16;
const ORACLE_TOL: f64 = 1e-10;
const AUTO_EPSILON: f64 = 1e-2;

#[derive(Debug, Clone, Serialize)]
pub struct AmplitudeRow {
    pub time: f64,
    pub route: &'static str,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
    pub stderr: f64,
    pub n_used: usize,
    pub m_used: usize,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: C64,
    pub stderr: f64,
    pub n_used: usize,
    pub m_used: usize,
    pub samples: usize,
    pub warnings: Vec<String>,
}

impl Evaluation {
    fn exact(value: C64, n_used: usize, m_used: usize) -> Self {
        Evaluation {
            value,
            stderr: 0.0,
            n_used,
            m_used,
            samples: 0,
            warnings: Vec::new(),
        }
    }
}

/// Everything shared by the grid points of one run.
pub struct Engine {
    pub params: RabiParams,
    pub alpha: CoherentLabel,
    pub beta: CoherentLabel,
    pub mode: Mode,
    pub m_max: usize,
    pub samples: usize,
    pub seed: u64,
    /// Trotter slices for the grid.
    pub n: usize,
    oracle: Option<(FockOracle, usize)>,
}

impl Engine {
    pub fn new(cfg: &RunConfig, with_oracle: bool) -> Result<Self, CliError> {
        let params = cfg.params()?;
        let (alpha, beta) = cfg.labels()?;
        let n = match cfg.n {
            SliceCount::Fixed(n) => n,
            SliceCount::Auto => {
                let label = if alpha.norm() >= beta.norm() {
                    alpha
                } else {
                    beta
                };
                let t = cfg.time_grid.stop / params.omega;
                trotter_counts(&params, label, t, AUTO_EPSILON)?.min(RESTRICTED_CAP)
            }
        };
        let oracle = if with_oracle {
            let n_max = auto_truncation(alpha, beta, params, ORACLE_TOL)?;
            Some((FockOracle::new(params, n_max)?, n_max))
        } else {
            None
        };
        Ok(Engine {
            params,
            alpha,
            beta,
            mode: cfg.mode.into(),
            m_max: cfg.m_max,
            samples: cfg.samples,
            seed: cfg.seed,
            n,
            oracle,
        })
    }

    /// `grid_value` is in units of 1/omega; `stream` separates the Monte
    /// Carlo draws of different grid points.
    pub fn evaluate(
        &self,
        route: Route,
        grid_value: f64,
        stream: u64,
    ) -> Result<Evaluation, CliError> {
        self.evaluate_with_n(route, grid_value, stream, self.n)
    }

    pub fn evaluate_with_n(
        &self,
        route: Route,
        grid_value: f64,
        stream: u64,
        n: usize,
    ) -> Result<Evaluation, CliError> {
        let t = grid_value / self.params.omega;
        let (p, a, b) = (&self.params, self.alpha, self.beta);
        match route {
            Route::Oracle => {
                let (o, n_max) = self.oracle.as_ref().expect("oracle route needs an oracle");
                let v = match self.mode {
                    Mode::Real => o.real_time(a, b, t)?,
                    Mode::Euclidean => o.imag_time(a, b, t)?,
                };
                Ok(Evaluation::exact(v, *n_max, 0))
            }
            Route::Recurrence => {
                if n <= FULL_BRANCH_LIMIT {
                    Ok(Evaluation::exact(
                        amplitude_recurrence(p, a, b, t, n)?,
                        n,
                        n,
                    ))
                } else {
                    let m = self.m_max.min(n);
                    let v = amplitude_recurrence_restricted(p, a, b, t, n, m, None)?.total;
                    Ok(Evaluation::exact(v, n, m))
                }
            }
            Route::Ising => {
                if n <= UNRESTRICTED_CAP && self.m_max >= n - 1 {
                    let v = amplitude_ising_exact(p, a, b, t, n, self.mode, None)?;
                    return Ok(Evaluation::exact(v, n, n - 1));
                }
                let m = self.m_max.min(n - 1);
                let v = match amplitude_ising_exact(p, a, b, t, n, self.mode, Some(m)) {
                    Err(RabiError::ResourceLimit { .. }) => {
                        amplitude_ising_transfer(p, a, b, t, n, self.mode, m, None)?.total
                    }
                    other => other?,
                };
                Ok(Evaluation::exact(v, n, m))
            }
            Route::Series => {
                let opts =
                    SeriesOptions::new(self.m_max, self.samples, RngSpec::new(self.seed, stream));
                let s = amplitude_series(p, a, b, t, &opts)?;
                let samples = if s.m_used > 0 { self.samples } else { 0 };
                Ok(Evaluation {
                    value: s.value,
                    stderr: s.stderr,
                    n_used: 0,
                    m_used: s.m_used,
                    samples,
                    warnings: s
                        .warnings
                        .into_iter()
                        .map(|w| format!("t={grid_value}: {w}"))
                        .collect(),
                })
            }
        }
    }
}

/// Rows in grid order, routes in configured order, plus series warnings.
pub fn amplitude_rows(cfg: &RunConfig) -> Result<(Vec<AmplitudeRow>, Vec<String>), CliError> {
    let engine = Engine::new(cfg, cfg.routes.contains(&Route::Oracle))?;
    let grid = cfg.time_grid.values();
    let per_point: Vec<Result<(Vec<AmplitudeRow>, Vec<String>), CliError>> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut rows = Vec::with_capacity(cfg.routes.len());
            let mut warnings = Vec::new();
            for &route in &cfg.routes {
                let e = engine.evaluate(route, x, i as u64)?;
                warnings.extend(e.warnings);
                rows.push(AmplitudeRow {
                    time: x,
                    route: route.name(),
                    re: e.value.re,
                    im: e.value.im,
                    abs: e.value.norm(),
                    stderr: e.stderr,
                    n_used: e.n_used,
                    m_used: e.m_used,
                    samples: e.samples,
                });
            }
            Ok((rows, warnings))
        })
        .collect();
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for r in per_point {
        let (r, w) = r?;
        rows.extend(r);
        warnings.extend(w);
    }
    Ok((rows, warnings))
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionRow {
    pub tau: f64,
    pub spectral: f64,
    pub series: f64,
    pub stderr: f64,
    pub rel_dev: f64,
    pub n_used: usize,
    pub m_used: usize,
    pub samples: usize,
}

/// Smallest power-of-two cutoff (from 64) whose spectral tail is negligible
/// at every grid point. The tail needs roughly `E_{n_max} τ > 28`, which is
/// checked first so hopeless grids fail without diagonalizing.
fn partition_oracle(params: RabiParams, taus: &[f64]) -> Result<(FockOracle, usize), CliError> {
    let tau_min = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let x = params.g / params.omega;
    let estimate = (28.0 / (params.omega * tau_min) + 4.0 * x * x + 8.0).ceil();
    if estimate > MAX_CUTOFF as f64 {
        return Err(CliError::Numeric(format!(
            "spectral sum at tau*omega = {} needs a Fock cutoff near {estimate}, above {MAX_CUTOFF}",
            params.omega * tau_min
        )));
    }
    let mut n_max = (estimate as usize).next_power_of_two().max(64);
    loop {
        let o = FockOracle::new(params, n_max)?;
        match taus
            .iter()
            .try_for_each(|&tau| o.ln_partition(tau).map(|_| ()))
        {
            Ok(()) => return Ok((o, n_max)),
            Err(RabiError::TruncationTooSmall { .. }) if 2 * n_max <= MAX_CUTOFF => n_max *= 2,
            Err(e) => return Err(e.into()),
        }
    }
}

pub fn partition_rows(cfg: &RunConfig) -> Result<(Vec<PartitionRow>, Vec<String>), CliError> {
    if cfg.mode != ModeArg::Euclidean {
        return Err(CliError::usage("partition requires --mode euclidean"));
    }
    let params = cfg.params()?;
    let grid = cfg.time_grid.values();
    let taus: Vec<f64> = grid.iter().map(|x| x / params.omega).collect();
    if let Some(x) = grid
        .iter()
        .find(|&&x| x < rabi_ising::domain_wall::MIN_TAU_OMEGA)
    {
        return Err(CliError::usage(format!(
            "tau*omega = {x} is below the floor {:e}",
            rabi_ising::domain_wall::MIN_TAU_OMEGA
        )));
    }
    let (oracle, n_max) = partition_oracle(params, &taus)?;
    let per_point: Vec<Result<(PartitionRow, Vec<String>), CliError>> = grid
        .par_iter()
        .zip(&taus)
        .enumerate()
        .map(|(i, (&x, &tau))| {
            let spectral = oracle.partition(tau)?;
            let opts = SeriesOptions::new(cfg.m_max, cfg.samples, RngSpec::new(cfg.seed, i as u64));
            let s = partition_series(&params, tau, &opts)?;
            let row = PartitionRow {
                tau: x,
                spectral,
                series: s.value.re,
                stderr: s.stderr,
                rel_dev: (s.value.re - spectral).abs() / spectral,
                n_used: n_max,
                m_used: s.m_used,
                samples: if s.m_used > 0 { cfg.samples } else { 0 },
            };
            let warnings = s
                .warnings
                .into_iter()
                .map(|w| format!("tau={x}: {w}"))
                .collect();
            Ok((row, warnings))
        })
        .collect();
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for r in per_point {
        let (r, w) = r?;
        rows.push(r);
        warnings.extend(w);
    }
    Ok((rows, warnings))
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub time: f64,
    pub check: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub const SLOPE_TARGET: f64 = -1.0;
pub const SLOPE_HALF_WIDTH: f64 = 0.3;

/// Worst pairwise deviation per grid point, and the log-log slope of each
/// Trotter route's error against the oracle when an n sweep is configured.
pub fn compare_rows(cfg: &RunConfig) -> Result<Vec<CompareRow>, CliError> {
    if cfg.routes.len() < 2 {
        return Err(CliError::usage("compare needs at least two routes"));
    }
    let sweep_routes: Vec<Route> = cfg
        .routes
        .iter()
        .copied()
        .filter(|r| matches!(r, Route::Recurrence | Route::Ising))
        .collect();
    let sweeping = !cfg.n_sweep.is_empty() && !sweep_routes.is_empty();
    if sweeping && cfg.n_sweep.len() < 2 {
        return Err(CliError::usage("n_sweep needs at least two slice counts"));
    }
    let engine = Engine::new(cfg, cfg.routes.contains(&Route::Oracle) || sweeping)?;
    let grid = cfg.time_grid.values();
    let per_point: Vec<Result<Vec<CompareRow>, CliError>> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let evals = cfg
                .routes
                .iter()
                .map(|&r| engine.evaluate(r, x, i as u64).map(|e| (r, e)))
                .collect::<Result<Vec<_>, _>>()?;
            let mut worst: Option<(f64, f64, String)> = None;
            for (k, (ra, ea)) in evals.iter().enumerate() {
                for (rb, eb) in &evals[k + 1..] {
                    let dev = (ea.value - eb.value).norm();
                    let tol = (3.0 * ea.stderr.hypot(eb.stderr)).max(cfg.tolerance);
                    let name = format!("pair:{}-{}", ra.name(), rb.name());
                    if worst.as_ref().is_none_or(|(d, t, _)| dev / tol > d / t) {
                        worst = Some((dev, tol, name));
                    }
                }
            }
            let (dev, tol, check) = worst.expect("at least one pair");
            let mut rows = vec![CompareRow {
                time: x,
                check,
                value: dev,
                tolerance: tol,
                pass: dev <= tol,
            }];
            if sweeping && x > 0.0 {
                let reference = engine.evaluate(Route::Oracle, x, i as u64)?.value;
                for &route in &sweep_routes {
                    let ns: Vec<f64> = cfg.n_sweep.iter().map(|&n| n as f64).collect();
                    let errs = cfg
                        .n_sweep
                        .iter()
                        .map(|&n| {
                            engine
                                .evaluate_with_n(route, x, i as u64, n)
                                .map(|e| (e.value - reference).norm())
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    let slope = rabi_ising::numeric::log_log_slope(&ns, &errs);
                    rows.push(CompareRow {
                        time: x,
                        check: format!("slope:{}", route.name()),
                        value: slope,
                        tolerance: SLOPE_HALF_WIDTH,
                        pass: (slope - SLOPE_TARGET).abs() <= SLOPE_HALF_WIDTH,
                    });
                }
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    Ok(rows)
}
