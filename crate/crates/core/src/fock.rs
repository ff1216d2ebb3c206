//! Truncated Fock-space oracle for one parity chain.
//!
//! On the chain `|P, k⟩` the Hamiltonian is real symmetric and tridiagonal:
//! `⟨k|H|k⟩ = -Pω0(-1)^k + ωk`, `⟨k+1|H|k⟩ = g√(k+1)`. One dense
//! diagonalization serves every time point of a scan.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{RabiError, Result};
use crate::model::{CoherentLabel, RabiParams};
use crate::numeric::{poisson_tail, KahanSum};

/// Largest cutoff the oracle will build.
pub const MAX_CUTOFF: usize = 4096;
/// A coherent vector is refused when more probability than this lies above
/// the cutoff.
pub const COHERENT_TAIL_LIMIT: f64 = 1e-8;
/// Relative weight allowed for the highest truncated level in a partition sum.
pub const PARTITION_TAIL_LIMIT: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TruncatedHamiltonian {
    pub n_max: usize,
    pub matrix: DMatrix<f64>,
    pub params: RabiParams,
}

pub fn build_hamiltonian(params: RabiParams, n_max: usize) -> Result<TruncatedHamiltonian> {
    params.validate()?;
    if n_max < 1 {
        return Err(RabiError::invalid("n_max must be at least 1"));
    }
    if n_max > MAX_CUTOFF {
        return Err(RabiError::ResourceLimit {
            what: "Fock cutoff",
            requested: n_max as u128,
            limit: MAX_CUTOFF as u128,
        });
    }
    let dim = n_max + 1;
    let pw0 = params.signed_splitting();
    let matrix = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            let alt = if i % 2 == 0 { 1.0 } else { -1.0 };
            -pw0 * alt + params.omega * i as f64
        } else if i + 1 == j || j + 1 == i {
            params.g * (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    Ok(TruncatedHamiltonian {
        n_max,
        matrix,
        params,
    })
}

/// Eigenpairs sorted by ascending energy. Column `k` of `eigenvectors` is the
/// real eigenvector for `energies[k]`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub energies: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    /// Largest `‖Hv - Ev‖ / ‖H‖` over all pairs.
    pub residual: f64,
}

impl SpectralData {
    pub fn new(h: &TruncatedHamiltonian) -> Result<Self> {
        let eig = SymmetricEigen::try_new(h.matrix.clone(), f64::EPSILON, 0).ok_or_else(|| {
            RabiError::Numeric(format!(
                "symmetric eigensolver did not converge (n_max = {})",
                h.n_max
            ))
        })?;
        let dim = h.matrix.nrows();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let energies: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigenvectors = DMatrix::from_fn(dim, dim, |i, k| eig.eigenvectors[(i, order[k])]);
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(RabiError::Numeric("non-finite eigenvalue".into()));
        }

        let hv = &h.matrix * &eigenvectors;
        let h_norm = h.matrix.norm().max(f64::MIN_POSITIVE);
        let mut residual: f64 = 0.0;
        for k in 0..dim {
            let r = (hv.column(k) - eigenvectors.column(k) * energies[k]).norm();
            residual = residual.max(r / h_norm);
        }
        if residual > 1e-10 {
            return Err(RabiError::Numeric(format!(
                "eigenpair residual {residual:.3e} exceeds 1e-10 relative (n_max = {}, ‖H‖ = {h_norm:.3e})",
                h.n_max
            )));
        }
        Ok(SpectralData {
            energies,
            eigenvectors,
            residual,
        })
    }

    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    /// Components `⟨v_k|ψ⟩` of a Fock vector in the eigenbasis.
    pub fn project(&self, psi: &FockVector) -> Vec<C64> {
        let dim = self.energies.len();
        assert_eq!(psi.coefficients.len(), dim, "cutoff mismatch");
        (0..dim)
            .map(|k| {
                let col = self.eigenvectors.column(k);
                let mut acc = C64::new(0.0, 0.0);
                for (v, c) in col.iter().zip(&psi.coefficients) {
                    acc += c * *v;
                }
                acc
            })
            .collect()
    }

    /// `Σ_k e^{-iE_k t} conj(pb_k) pa_k`.
    pub fn evolve_real(&self, pa: &[C64], pb: &[C64], t: f64) -> C64 {
        let mut acc = KahanSum::new();
        for ((e, a), b) in self.energies.iter().zip(pa).zip(pb) {
            acc.add(C64::from_polar(1.0, -e * t) * b.conj() * a);
        }
        acc.value()
    }

    /// `Σ_k e^{-E_k τ} conj(pb_k) pa_k`, weighted relative to the ground state
    /// and rescaled at the end.
    pub fn evolve_imag(&self, pa: &[C64], pb: &[C64], tau: f64) -> C64 {
        let e0 = self.ground_energy();
        let mut acc = KahanSum::new();
        for ((e, a), b) in self.energies.iter().zip(pa).zip(pb) {
            acc.add((-(e - e0) * tau).exp() * b.conj() * a);
        }
        acc.value() * (-e0 * tau).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    pub coefficients: Vec<C64>,
}

impl FockVector {
    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &FockVector) -> C64 {
        self.coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| a.conj() * b)
            .collect::<KahanSum>()
            .value()
    }

    pub fn norm(&self) -> f64 {
        self.coefficients
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Smallest cutoff whose Poisson tail for `|α|²` is below `tol`.
fn cutoff_for_tail(mean: f64, tol: f64) -> usize {
    let mut n = mean.ceil() as usize;
    while poisson_tail(mean, n) >= tol {
        n += 1;
    }
    n
}

/// Unchecked coherent vector, computed in log space so large `|α|` does not
/// overflow `αᵏ` or `k!`.
pub(crate) fn coherent_coefficients(alpha: C64, n_max: usize) -> Vec<C64> {
    let r = alpha.norm();
    let mut out = Vec::with_capacity(n_max + 1);
    if r == 0.0 {
        out.push(C64::new(1.0, 0.0));
        out.resize(n_max + 1, C64::new(0.0, 0.0));
        return out;
    }
    let theta = alpha.arg();
    let ln_r = r.ln();
    let mut ln_fact = 0.0;
    for k in 0..=n_max {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        let ln_mag = -r * r / 2.0 + k as f64 * ln_r - 0.5 * ln_fact;
        out.push(C64::from_polar(ln_mag.exp(), k as f64 * theta));
    }
    out
}

pub fn coherent_vector(alpha: CoherentLabel, n_max: usize) -> Result<FockVector> {
    let mean = alpha.value().norm_sqr();
    let tail = poisson_tail(mean, n_max);
    if tail >= COHERENT_TAIL_LIMIT {
        return Err(RabiError::TruncationTooSmall {
            n_max,
            required: cutoff_for_tail(mean, COHERENT_TAIL_LIMIT),
            reason: format!("coherent tail {tail:.3e} for |alpha|^2 = {mean}"),
        });
    }
    Ok(FockVector {
        coefficients: coherent_coefficients(alpha.value(), n_max),
    })
}

/// Spectrum of one parity chain at a fixed cutoff, reusable across many
/// amplitude evaluations.
#[derive(Debug, Clone)]
pub struct FockOracle {
    pub params: RabiParams,
    pub n_max: usize,
    pub spectrum: SpectralData,
}

impl FockOracle {
    pub fn new(params: RabiParams, n_max: usize) -> Result<Self> {
        let h = build_hamiltonian(params, n_max)?;
        let spectrum = SpectralData::new(&h)?;
        Ok(FockOracle {
            params,
            n_max,
            spectrum,
        })
    }

    pub fn project(&self, label: CoherentLabel) -> Result<Vec<C64>> {
        Ok(self.spectrum.project(&coherent_vector(label, self.n_max)?))
    }

    pub fn real_time(&self, alpha: CoherentLabel, beta: CoherentLabel, t: f64) -> Result<C64> {
        check_time(t, "t")?;
        let (pa, pb) = (self.project(alpha)?, self.project(beta)?);
        Ok(self.spectrum.evolve_real(&pa, &pb, t))
    }

    pub fn imag_time(&self, alpha: CoherentLabel, beta: CoherentLabel, tau: f64) -> Result<C64> {
        check_time(tau, "tau")?;
        let (pa, pb) = (self.project(alpha)?, self.project(beta)?);
        Ok(self.spectrum.evolve_imag(&pa, &pb, tau))
    }

    /// `ln Z(τ)` over the truncated spectrum.
    pub fn ln_partition(&self, tau: f64) -> Result<f64> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(RabiError::invalid(format!("tau must be > 0, got {tau}")));
        }
        let e = &self.spectrum.energies;
        let e0 = e[0];
        let shifted: f64 = e.iter().map(|x| (-(x - e0) * tau).exp()).sum();
        let top = (-(e[e.len() - 1] - e0) * tau).exp();
        if top >= PARTITION_TAIL_LIMIT * shifted {
            // E_k grows like ωk, so this many extra levels push the top weight under the limit
            let extra = ((top / (PARTITION_TAIL_LIMIT * shifted)).ln() / (self.params.omega * tau))
                .ceil() as usize;
            return Err(RabiError::TruncationTooSmall {
                n_max: self.n_max,
                required: self.n_max + extra.max(1),
                reason: format!("partition tail weight {:.3e} at tau = {tau}", top / shifted),
            });
        }
        Ok(shifted.ln() - e0 * tau)
    }

    pub fn partition(&self, tau: f64) -> Result<f64> {
        Ok(self.ln_partition(tau)?.exp())
    }
}

fn check_time(t: f64, name: &str) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(RabiError::invalid(format!(
            "{name} must be finite and >= 0, got {t}"
        )));
    }
    Ok(())
}

/// Probe times (in units of 1/ω) for the cutoff doubling check.
const PROBE_REAL: [f64; 7] = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
const PROBE_IMAG: f64 = 1.0;

/// Cutoff for which both coherent tails are below `tol` and doubling the
/// cutoff moves every probe amplitude by less than `tol` (relative to the
/// amplitude size for the imaginary-time probe).
pub fn auto_truncation(
    alpha: CoherentLabel,
    beta: CoherentLabel,
    params: RabiParams,
    tol: f64,
) -> Result<usize> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(RabiError::invalid(format!(
            "tol must lie in (0, 1), got {tol}"
        )));
    }
    params.validate()?;
    let r = alpha.norm().max(beta.norm());
    let floor = (4.0 * r * r + 20.0).ceil() as usize;
    let tail_tol = tol.min(COHERENT_TAIL_LIMIT);
    let mut n = floor
        .max(cutoff_for_tail(alpha.value().norm_sqr(), tail_tol))
        .max(cutoff_for_tail(beta.value().norm_sqr(), tail_tol));

    let probes = |o: &FockOracle| -> Result<Vec<C64>> {
        let (pa, pb) = (o.project(alpha)?, o.project(beta)?);
        let mut v: Vec<C64> = PROBE_REAL
            .iter()
            .map(|wt| o.spectrum.evolve_real(&pa, &pb, wt / params.omega))
            .collect();
        v.push(o.spectrum.evolve_imag(&pa, &pb, PROBE_IMAG / params.omega));
        Ok(v)
    };

    let mut current = probes(&FockOracle::new(params, n)?)?;
    loop {
        if 2 * n > MAX_CUTOFF {
            return Err(RabiError::TruncationTooSmall {
                n_max: n,
                required: 2 * n,
                reason: format!("doubling check did not settle below {MAX_CUTOFF}"),
            });
        }
        let next = probes(&FockOracle::new(params, 2 * n)?)?;
        let last = current.len() - 1;
        let ok = current.iter().zip(&next).enumerate().all(|(i, (a, b))| {
            let scale = if i == last { b.norm().max(1.0) } else { 1.0 };
            (a - b).norm() < tol * scale
        });
        if ok {
            return Ok(n);
        }
        n *= 2;
        current = next;
    }
}

pub fn amplitude_real_time(
    params: RabiParams,
    alpha: CoherentLabel,
    beta: CoherentLabel,
    t: f64,
    n_max: usize,
) -> Result<C64> {
    FockOracle::new(params, n_max)?.real_time(alpha, beta, t)
}

pub fn amplitude_imag_time(
    params: RabiParams,
    alpha: CoherentLabel,
    beta: CoherentLabel,
    tau: f64,
    n_max: usize,
) -> Result<C64> {
    FockOracle::new(params, n_max)?.imag_time(alpha, beta, tau)
}

pub fn partition_spectral(params: RabiParams, tau: f64, n_max: usize) -> Result<f64> {
    FockOracle::new(params, n_max)?.partition(tau)
}
