//! Continuum series in the splitting `ω0`.
//!
//! Real time:
//!
//! `⟨β|U(t)|α⟩ = e^{-(|α|²-2β*α+|β|²)/2} e^{ig²t/ω} Σ_m (iPω0t)^m/m!
//!               · e^{-2m x² - (α+x)(β*+x)(1-(-1)^m e^{-iωt})} F_m`
//!
//! with `x = g/ω` and `F_m` the average of `f_m_integrand` over ordered flip
//! positions `0 < z_1 < … < z_m < 1`. The Euclidean partition function has the
//! analogous expansion built on `l_functional`.
//!
//! Monte Carlo averages are accumulated in log-shifted form so that
//! exponents of several hundred (deep strong coupling) neither overflow nor
//! lose the subleading samples.

use num_complex::Complex64 as C64;
use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{RabiError, Result};
use crate::model::{ln_coherent_overlap, CoherentLabel, RabiParams};
use crate::numeric::{factorial, gauss_legendre, KahanSum};

/// Samples per independently seeded batch. Fixed so that results do not
/// depend on how batches are spread over threads.
pub const BATCH: usize = 1024;
/// Largest wall count the series will expand to.
pub const M_CAP: usize = 255;
/// Default absolute tolerance for the adaptive tail cut.
pub const DEFAULT_TAIL_TOL: f64 = 1e-9;
/// Below this `τω` the partition series denominators degenerate.
pub const MIN_TAU_OMEGA: f64 = 1e-6;
/// Largest `τω` at which the partition series has been validated.
pub const VALIDATED_TAU_OMEGA: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FlipPositions {
    z: Vec<f64>,
}

impl FlipPositions {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        let inside = z.iter().all(|&v| v > 0.0 && v < 1.0);
        let ascending = z.windows(2).all(|w| w[0] < w[1]);
        if !(inside && ascending) {
            return Err(RabiError::invalid(
                "flip positions must be strictly ascending inside (0, 1)",
            ));
        }
        Ok(FlipPositions { z })
    }

    pub fn empty() -> Self {
        FlipPositions { z: Vec::new() }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngSpec { seed, stream_id }
    }

    /// Generator for wall count `m`, positioned at the start of `batch`.
    /// Every draw is one `u64` (two ChaCha words), so batch `b` begins at word
    /// `2·m·BATCH·b` of the stream and the sample sequence is the same as a
    /// single sequential run.
    fn generator(&self, m: usize, batch: usize) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream((self.stream_id << 8) | m as u64);
        rng.set_word_pos(2 * (m * BATCH * batch) as u128);
        rng
    }
}

/// `m` uniforms on `(0, 1)`, sorted.
pub fn sample_flip_positions<R: Rng + ?Sized>(m: usize, rng: &mut R) -> FlipPositions {
    let mut z: Vec<f64> = (0..m).map(|_| rng.sample(Open01)).collect();
    z.sort_by(f64::total_cmp);
    FlipPositions { z }
}

/// Exponent of the `F_m` integrand with `ph(z) = e^{-izωt}` (or its Euclidean
/// continuation), flip sign convention `(-1)^k` for `k = 1..m`.
#[inline]
fn f_exponent(x: f64, alpha: C64, beta_conj: C64, z: &[f64], ph: impl Fn(f64) -> C64) -> C64 {
    let m = z.len();
    let sign = |k: usize| if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut pair = C64::new(0.0, 0.0);
    for k in 1..=m {
        for l in 1..k {
            pair += sign(k + l) * ph(z[k - 1] - z[l - 1]);
        }
    }
    let mut lin = C64::new(0.0, 0.0);
    for k in 1..=m {
        let zk = z[k - 1];
        lin += (beta_conj + x) * sign(k) * ph(zk) - (alpha + x) * sign(m + k) * ph(1.0 - zk);
    }
    -4.0 * x * x * pair - 2.0 * x * lin
}

fn real_phase(omega_t: f64) -> impl Fn(f64) -> C64 {
    move |z| C64::from_polar(1.0, -z * omega_t)
}

/// `f_m(z) = exp(-(4g²/ω²) Σ_{k>l} (-1)^{k+l} e^{-i(z_k-z_l)ωt}
///   - (2g/ω) Σ_k [(β*+g/ω)(-1)^k e^{-iz_kωt} - (α+g/ω)(-1)^{m+k} e^{-i(1-z_k)ωt}])`.
pub fn f_m_integrand(
    params: &RabiParams,
    alpha: CoherentLabel,
    beta: CoherentLabel,
    t: f64,
    z: &FlipPositions,
) -> C64 {
    f_m_exponent(params, alpha, beta, t, z).exp()
}

pub fn f_m_exponent(
    params: &RabiParams,
    alpha: CoherentLabel,
    beta: CoherentLabel,
    t: f64,
    z: &FlipPositions,
) -> C64 {
    f_exponent(
        params.coupling_ratio(),
        alpha.value(),
        beta.value().conj(),
        z.as_slice(),
        real_phase(params.omega * t),
    )
}

/// Sample statistics of `e^{X}` kept relative to a reference shift `s`:
/// `mean·e^{s}` is the sample mean, `m2·e^{2s}` the summed squared
/// deviations (real and imaginary parts separately).
#[derive(Debug, Clone, Copy)]
struct ShiftedStats {
    count: usize,
    shift: f64,
    mean: C64,
    m2_re: f64,
    m2_im: f64,
}

impl ShiftedStats {
    fn empty() -> Self {
        ShiftedStats {
            count: 0,
            shift: f64::NEG_INFINITY,
            mean: C64::new(0.0, 0.0),
            m2_re: 0.0,
            m2_im: 0.0,
        }
    }

    fn from_exponents(xs: &[C64]) -> Self {
        let shift = xs.iter().map(|x| x.re).fold(f64::NEG_INFINITY, f64::max);
        if xs.is_empty() || !shift.is_finite() {
            return Self::empty();
        }
        let vals: Vec<C64> = xs.iter().map(|x| (x - shift).exp()).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().copied().collect::<KahanSum>().value() / n;
        let m2_re = vals.iter().map(|v| (v.re - mean.re).powi(2)).sum();
        let m2_im = vals.iter().map(|v| (v.im - mean.im).powi(2)).sum();
        ShiftedStats {
            count: vals.len(),
            shift,
            mean,
            m2_re,
            m2_im,
        }
    }

    fn rescaled(&self, shift: f64) -> Self {
        if self.count == 0 {
            return ShiftedStats { shift, ..*self };
        }
        let f = (self.shift - shift).exp();
        ShiftedStats {
            count: self.count,
            shift,
            mean: self.mean * f,
            m2_re: self.m2_re * f * f,
            m2_im: self.m2_im * f * f,
        }
    }

    /// Chan et al. pairwise combination.
    fn merge(self, other: Self) -> Self {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let s = self.shift.max(other.shift);
        let (a, b) = (self.rescaled(s), other.rescaled(s));
        let (na, nb) = (a.count as f64, b.count as f64);
        let n = na + nb;
        let d = b.mean - a.mean;
        ShiftedStats {
            count: a.count + b.count,
            shift: s,
            mean: a.mean + d * (nb / n),
            m2_re: a.m2_re + b.m2_re + d.re * d.re * na * nb / n,
            m2_im: a.m2_im + b.m2_im + d.im * d.im * na * nb / n,
        }
    }

    /// Standard error of the mean in units of `e^{shift}`.
    fn stderr(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        ((self.m2_re + self.m2_im) / (n - 1.0) / n).sqrt()
    }
}

/// Monte Carlo average of `e^{X(z)}` over `n_samples` ordered draws.
fn shifted_average<F>(m: usize, n_samples: usize, rng: RngSpec, exponent: F) -> ShiftedStats
where
    F: Fn(&[f64]) -> C64 + Sync,
{
    let batches = n_samples.div_ceil(BATCH);
    let parts: Vec<ShiftedStats> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut gen = rng.generator(m, b);
            let count = BATCH.min(n_samples - b * BATCH);
            let xs: Vec<C64> = (0..count)
                .map(|_| {
                    let z = sample_flip_positions(m, &mut gen);
                    exponent(z.as_slice())
                })
                .collect();
            ShiftedStats::from_exponents(&xs)
        })
        .collect();
    parts
        .into_iter()
        .fold(ShiftedStats::empty(), ShiftedStats::merge)
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples < 100 {
        return Err(RabiError::invalid(format!(
            "at least 100 samples are required, got {n_samples}"
        )));
    }
    Ok(())
}

fn check_m(m: usize) -> Result<()> {
    if m > M_CAP {
        return Err(RabiError::invalid(format!(
            "wall count {m} exceeds {M_CAP}"
        )));
    }
    Ok(())
}

/// `(mean, stderr)` of `f_m` over uniformly drawn ordered flip positions.
pub fn f_m_montecarlo(
    params: &RabiParams,
    alpha: CoherentLabel,
    beta: CoherentLabel,
    t: f64,
    m: usize,
    n_samples: usize,
    rng: RngSpec,
) -> Result<(C64, f64)> {
    if m == 0 {
        return Err(RabiError::invalid("Monte Carlo needs m >= 1; F_0 = 1"));
    }
    check_m(m)?;
    check_samples(n_samples)?;
    let x = params.coupling_ratio();
    let (a, bc) = (alpha.value(), beta.value().conj());
    let ph = params.omega * t;
    let stats = shifted_average(m, n_samples, rng, |z| {
        f_exponent(x, a, bc, z, real_phase(ph))
    });
    let scale = stats.shift.exp();
    Ok((stats.mean * scale, stats.stderr() * scale))
}

/// `m! ∫_{0<z_1<…<z_m<1} f_m(z) dz` by nested Gauss–Legendre rules with
/// `points` nodes per dimension, outermost variable `z_m`.
pub fn f_m_quadrature(
    params: &RabiParams,
    alpha: CoherentLabel,
    beta: CoherentLabel,
    t: f64,
    m: usize,
    points: usize,
) -> Result<C64> {
    if !(1..=3).contains(&m) {
        return Err(RabiError::UnsupportedOrder(m));
    }
    if points == 0 {
        return Err(RabiError::invalid("points must be >= 1"));
    }
    let x = params.coupling_ratio();
    let (a, bc) = (alpha.value(), beta.value().conj());
    let ph = params.omega * t;
    let rule = gauss_legendre(points);
    let f = |z: &[f64]| f_exponent(x, a, bc, z, real_phase(ph)).exp();
    let mut z = vec![0.0; m];
    Ok(nested(&rule, &f, &mut z, m, 1.0) * factorial(m))
}

/// Integrate over `0 < z_1 < … < z_k < upper` for the first `k` coordinates.
fn nested(
    rule: &(Vec<f64>, Vec<f64>),
    f: &impl Fn(&[f64]) -> C64,
    z: &mut [f64],
    k: usize,
    upper: f64,
) -> C64 {
    if k == 0 {
        return f(z);
    }
    let (nodes, weights) = rule;
    let half = upper / 2.0;
    let mut acc = KahanSum::new();
    for (xi, wi) in nodes.iter().zip(weights) {
        z[k - 1] = half * (xi + 1.0);
        let inner = nested(rule, f, z, k - 1, z[k - 1]);
        acc.add(inner * (wi * half));
    }
    acc.value()
}

/// Doubles the rule from 16 points until successive results differ by less
/// than `tol`. Returns the value and the points used.
pub fn f_m_quadrature_converged(
    params: &RabiParams,
    alpha: CoherentLabel,
    beta: CoherentLabel,
    t: f64,
    m: usize,
    tol: f64,
) -> Result<(C64, usize)> {
    let max_points = match m {
        1 => 4096,
        2 => 512,
        _ => 128,
    };
    let mut points = 16;
    let mut prev = f_m_quadrature(params, alpha, beta, t, m, points)?;
    while points < max_points {
        points *= 2;
        let next = f_m_quadrature(params, alpha, beta, t, m, points)?;
        if (next - prev).norm() < tol {
            return Ok((next, points));
        }
        prev = next;
    }
    Err(RabiError::Numeric(format!(
        "quadrature for m = {m} did not reach {tol:e} with {max_points} points"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTerm {
    pub m: usize,
    pub value: C64,
    pub stderr: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesEstimate {
    pub value: C64,
    pub stderr: f64,
    pub per_m: Vec<SeriesTerm>,
    pub m_used: usize,
    /// Tail bound after the last kept term.
    pub tail_bound: f64,
    pub converged: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    pub m_max: usize,
    pub n_samples: usize,
    pub rng: RngSpec,
    pub tail_tol: f64,
}

impl SeriesOptions {
    pub fn new(m_max: usize, n_samples: usize, rng: RngSpec) -> Self {
        SeriesOptions {
            m_max,
            n_samples,
            rng,
            tail_tol: DEFAULT_TAIL_TOL,
        }
    }
}

/// Even and odd `m` carry different Gaussian factors, so one parity can be
/// negligible while the other dominates. The running max only stops the sum
/// once both parities have contributed two terms.
const MIN_TERMS_BEFORE_STOP: usize = 3;

/// Shared driver: term `m` is `exp(ln_weight(m) + shift) · mean_scaled`.
/// Stops once `|r|^{m+1}/(m+1)! · max_k(|term_k| k!/|r|^k)` is below the
/// tolerance, where `r` is the expansion variable.
fn sum_series(
    r: f64,
    opts: &SeriesOptions,
    ln_weight: impl Fn(usize) -> C64,
    term_stats: impl Fn(usize) -> (ShiftedStats, usize),
) -> Result<SeriesEstimate> {
    check_m(opts.m_max)?;
    let mut per_m = Vec::new();
    let mut value = KahanSum::new();
    let mut var = 0.0;
    let mut running_max: f64 = 0.0;
    let mut tail_bound = f64::INFINITY;
    for m in 0..=opts.m_max {
        if m > 0 && r == 0.0 {
            tail_bound = 0.0;
            break;
        }
        let (stats, samples) = term_stats(m);
        let lw = ln_weight(m) + stats.shift;
        let scale = lw.exp();
        let term = scale * stats.mean;
        let err = scale.norm() * stats.stderr();
        if !(term.re.is_finite() && term.im.is_finite()) {
            return Err(RabiError::Numeric(format!(
                "series term m = {m} overflowed"
            )));
        }
        value.add(term);
        var += err * err;
        per_m.push(SeriesTerm {
            m,
            value: term,
            stderr: err,
            samples,
        });
        let power = r.abs().powi(m as i32) / factorial(m);
        if power > 0.0 {
            running_max = running_max.max(term.norm() / power);
        }
        tail_bound = r.abs().powi(m as i32 + 1) / factorial(m + 1) * running_max;
        if m >= MIN_TERMS_BEFORE_STOP && tail_bound < opts.tail_tol {
            break;
        }
    }
    let m_used = per_m.last().map_or(0, |t| t.m);
    let converged = tail_bound < opts.tail_tol;
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!(
            "series not converged at m_max = {}: tail bound {tail_bound:.3e} >= {:.1e}",
            opts.m_max, opts.tail_tol
        ));
    }
    Ok(SeriesEstimate {
        value: value.value(),
        stderr: var.sqrt(),
        per_m,
        m_used,
        tail_bound,
        converged,
        warnings,
    })
}

fn ln_factorial(m: usize) -> f64 {
    (1..=m).map(|k| (k as f64).ln()).sum()
}

/// Real-time amplitude from the `ω0` series with Monte Carlo `F_m`.
pub fn amplitude_series(
    params: &RabiParams,
    alpha: CoherentLabel,
    beta: CoherentLabel,
    t: f64,
    opts: &SeriesOptions,
) -> Result<SeriesEstimate> {
    params.validate()?;
    if !t.is_finite() {
        return Err(RabiError::invalid("time must be finite"));
    }
    if opts.m_max > 0 {
        check_samples(opts.n_samples)?;
    }
    let x = params.coupling_ratio();
    let (a, bc) = (alpha.value(), beta.value().conj());
    let wt = params.omega * t;
    let r = params.signed_splitting() * t;
    let ln_pre =
        ln_coherent_overlap(alpha, beta) + C64::new(0.0, params.g * params.g * t / params.omega);
    // ln (iPω0t)^m = m ln|Pω0t| + i m arg(iPω0t)
    let ln_i_r = C64::new(0.0, r).ln();
    let ln_weight = |m: usize| {
        let alt = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
        let gauss = (a + x) * (bc + x) * (C64::new(1.0, 0.0) - alt * C64::from_polar(1.0, -wt));
        let power = if m == 0 {
            C64::new(0.0, 0.0)
        } else {
            ln_i_r * m as f64
        };
        ln_pre + power - ln_factorial(m) - 2.0 * m as f64 * x * x - gauss
    };
    let term_stats = |m: usize| {
        if m == 0 {
            (ShiftedStats::from_exponents(&[C64::new(0.0, 0.0)]), 0)
        } else {
            let s = shifted_average(m, opts.n_samples, opts.rng, |z| {
                f_exponent(x, a, bc, z, real_phase(wt))
            });
            (s, opts.n_samples)
        }
    };
    sum_series(r, opts, ln_weight, term_stats)
}

/// `L[s̄](τ)` for flip positions `z` and wall count `m`:
///
/// `-(4g²/ω²) Σ_{k>l} (-1)^{k+l} e^{-(z_k-z_l)ωτ}
///  - (2g²/ω²) Σ_k (-1)^k [e^{-z_kωτ} - (-1)^m e^{-(1-z_k)ωτ}]
///  - (g²/ω²)(1 - (-1)^m e^{-ωτ}) - 2m g²/ω² + g²τ/ω`.
pub fn l_functional(params: &RabiParams, tau: f64, z: &FlipPositions, m: usize) -> Result<C64> {
    if z.len() != m {
        return Err(RabiError::invalid(format!(
            "expected {m} flip positions, got {}",
            z.len()
        )));
    }
    Ok(C64::new(l_value(params, tau, z.as_slice()), 0.0))
}

fn l_value(params: &RabiParams, tau: f64, z: &[f64]) -> f64 {
    let m = z.len();
    let x2 = params.coupling_ratio().powi(2);
    let wt = params.omega * tau;
    let sign = |k: usize| if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut pair = 0.0;
    for k in 1..=m {
        for l in 1..k {
            pair += sign(k + l) * (-(z[k - 1] - z[l - 1]) * wt).exp();
        }
    }
    let mut lin = 0.0;
    for k in 1..=m {
        let zk = z[k - 1];
        lin += sign(k) * ((-zk * wt).exp() - sign(m) * (-(1.0 - zk) * wt).exp());
    }
    -4.0 * x2 * pair - 2.0 * x2 * lin - x2 * (1.0 - sign(m) * (-wt).exp()) - 2.0 * m as f64 * x2
        + params.g * params.g * tau / params.omega
}

/// Exponent of the `Z_m` average:
/// `L(τ) + (-1)^m e^{-ωτ} (L(τ) + L(-τ)) / (1 - (-1)^m e^{-ωτ})`.
fn z_m_exponent(params: &RabiParams, tau: f64, z: &[f64]) -> f64 {
    let m = z.len();
    let alt = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let e = (-params.omega * tau).exp();
    let denom = 1.0 - alt * e;
    let lp = l_value(params, tau, z);
    let lm = l_value(params, -tau, z);
    lp + alt * e * (lp + lm) / denom
}

/// `Z(τ) = Σ_m (τPω0)^m/m! · Z_m / (1 - (-1)^m e^{-ωτ})`.
pub fn partition_series(
    params: &RabiParams,
    tau: f64,
    opts: &SeriesOptions,
) -> Result<SeriesEstimate> {
    params.validate()?;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(RabiError::invalid(format!("tau must be > 0, got {tau}")));
    }
    let wt = params.omega * tau;
    if wt < MIN_TAU_OMEGA {
        return Err(RabiError::Domain(format!(
            "tau*omega = {wt:e} is below {MIN_TAU_OMEGA:e}"
        )));
    }
    if opts.m_max > 0 {
        check_samples(opts.n_samples)?;
    }
    let r = tau * params.signed_splitting();
    let ln_r = C64::new(r, 0.0).ln();
    let ln_weight = |m: usize| {
        let alt = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
        let denom = 1.0 - alt * (-wt).exp();
        let power = if m == 0 {
            C64::new(0.0, 0.0)
        } else {
            ln_r * m as f64
        };
        power - ln_factorial(m) - denom.ln()
    };
    let term_stats = |m: usize| {
        if m == 0 {
            let e = C64::new(z_m_exponent(params, tau, &[]), 0.0);
            (ShiftedStats::from_exponents(&[e]), 0)
        } else {
            let s = shifted_average(m, opts.n_samples, opts.rng, |z| {
                C64::new(z_m_exponent(params, tau, z), 0.0)
            });
            (s, opts.n_samples)
        }
    };
    let mut est = sum_series(r, opts, ln_weight, term_stats)?;
    // real quantity; drop the rounding residue of complex logs of negative r
    est.value.im = 0.0;
    for t in &mut est.per_m {
        t.value.im = 0.0;
    }
    if wt > VALIDATED_TAU_OMEGA {
        est.warnings.push(format!(
            "tau*omega = {wt} is outside the validated range (<= {VALIDATED_TAU_OMEGA})"
        ));
    }
    Ok(est)
}
