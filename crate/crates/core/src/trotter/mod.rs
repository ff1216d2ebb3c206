//! Finite-`n` Trotterized evolution in one parity sector, its branch
//! expansion and the equivalent complex Ising sums.

mod branches;
mod ising;
mod step;
mod transfer;
pub mod walls;

pub use branches::{
    amplitude_recurrence, amplitude_spin_sum, closed_form, evolve_branches, evolve_recurrence,
    BranchState, BRANCH_CAP, SPIN_SUM_CAP,
};
pub use ising::{
    amplitude_ising_exact, amplitude_ising_exact_with_budget, ising_kernel, term_count,
    IsingKernel, RESTRICTED_CAP, TERM_BUDGET, UNRESTRICTED_CAP,
};
pub use step::{Mode, TrotterStep};
pub use transfer::{
    amplitude_ising_transfer, amplitude_recurrence_restricted, default_transfer_cutoff,
    ising_transfer, trotter_transfer, SectorSums,
};
pub use walls::enumerate_by_domain_walls;

use num_complex::Complex64 as C64;

use crate::error::{RabiError, Result};
use crate::model::{CoherentLabel, RabiParams};

/// Slice count from the first-order splitting bound
/// `n ≳ C₁ g ω max(|α|, 1) t² / ε`, never below 8.
pub fn trotter_counts_with(
    params: &RabiParams,
    alpha: CoherentLabel,
    t: f64,
    epsilon: f64,
    c1: f64,
) -> Result<usize> {
    params.validate()?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(RabiError::invalid(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if !(c1.is_finite() && c1 > 0.0) {
        return Err(RabiError::invalid("C1 must be finite and > 0"));
    }
    if !t.is_finite() {
        return Err(RabiError::invalid("time must be finite"));
    }
    let raw = c1 * params.g * params.omega * alpha.norm().max(1.0) * t * t / epsilon;
    // the product is rounded before the ceiling so that exact values such as
    // 1/1e-3 do not step up by one ulp
    let rounded = (raw * 1e9).round() / 1e9;
    Ok((rounded.ceil() as usize).max(8))
}

pub fn trotter_counts(
    params: &RabiParams,
    alpha: CoherentLabel,
    t: f64,
    epsilon: f64,
) -> Result<usize> {
    trotter_counts_with(params, alpha, t, epsilon, 1.0)
}

/// Vacuum persistence `⟨0|e^{-Hτ}|0⟩` from the field-free Euclidean Ising
/// chain. Enumerates when the configuration count fits the budget and uses
/// the wall-resolved transfer product otherwise.
pub fn vacuum_persistence_euclidean(
    params: &RabiParams,
    tau: f64,
    n: usize,
    max_domain_walls: Option<usize>,
) -> Result<C64> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(RabiError::invalid(format!("tau must be >= 0, got {tau}")));
    }
    let v = CoherentLabel::vacuum();
    match amplitude_ising_exact(params, v, v, tau, n, Mode::Euclidean, max_domain_walls) {
        Err(RabiError::ResourceLimit { .. }) if (2..=RESTRICTED_CAP).contains(&n) => {
            let m = max_domain_walls.unwrap_or(n - 1);
            Ok(amplitude_ising_transfer(params, v, v, tau, n, Mode::Euclidean, m, None)?.total)
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockOracle;
    use crate::model::Parity;

    #[test]
    fn trotter_count_examples() {
        let p = RabiParams::new(0.3, 1.0, 1.0, Parity::Plus).unwrap();
        let a = CoherentLabel::from_parts(1.0, 0.0).unwrap();
        assert_eq!(trotter_counts(&p, a, 1.0, 1e-3).unwrap(), 1000);
        let free = RabiParams::new(0.3, 1.0, 0.0, Parity::Plus).unwrap();
        assert_eq!(trotter_counts(&free, a, 5.0, 1e-3).unwrap(), 8);
        assert!(trotter_counts(&p, a, 1.0, 0.0).is_err());
        assert_eq!(trotter_counts_with(&p, a, 1.0, 1e-3, 2.0).unwrap(), 2000);
    }

    #[test]
    fn vacuum_persistence_examples() {
        let p = RabiParams::new(0.3, 1.0, 0.0, Parity::Plus).unwrap();
        let x = vacuum_persistence_euclidean(&p, 2.0, 16, None).unwrap();
        assert!((x.re - 0.6f64.exp()).abs() < 1e-12);
        let x = vacuum_persistence_euclidean(&p, 0.0, 16, None).unwrap();
        assert!((x - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn vacuum_persistence_matches_spectral_sum() {
        let p = RabiParams::new(0.3, 1.0, 0.2, Parity::Plus).unwrap();
        let v = CoherentLabel::vacuum();
        let exact = FockOracle::new(p, 60)
            .unwrap()
            .imag_time(v, v, 1.0)
            .unwrap();
        let x = vacuum_persistence_euclidean(&p, 1.0, 512, Some(6)).unwrap();
        assert!((x - exact).norm() / exact.norm() < 1e-2);
    }

    #[test]
    fn convergence_slope_is_first_order() {
        let p = RabiParams::new(0.3, 1.0, 0.5, Parity::Plus).unwrap();
        let a = CoherentLabel::from_parts(-0.2, 0.5).unwrap();
        let b = CoherentLabel::from_parts(0.1, 0.3).unwrap();
        let exact = FockOracle::new(p, 60)
            .unwrap()
            .real_time(a, b, 2.0)
            .unwrap();
        let ns = [32.0, 64.0, 128.0];
        let errs: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let r =
                    amplitude_recurrence_restricted(&p, a, b, 2.0, n as usize, 8, None).unwrap();
                (r.total - exact).norm()
            })
            .collect();
        let slope = crate::numeric::log_log_slope(&ns, &errs);
        assert!((-1.3..=-0.7).contains(&slope), "slope {slope}");
    }
}
