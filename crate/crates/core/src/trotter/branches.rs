//! The `2ⁿ` coherent branches of `U_nⁿ|α⟩`.
//!
//! Branch `l` is addressed by its binary digits: step `k` (counting from 0)
//! contributes bit `n-1-k`, with 0 for the sign-keeping `cos δ` path and 1
//! for the `-i sin δ` path. The parent of branch `l` is `l >> 1`.

use num_complex::Complex64 as C64;

use super::step::{Mode, TrotterStep};
use crate::error::{RabiError, Result};
use crate::model::{overlap_raw, CoherentLabel, RabiParams};
use crate::numeric::KahanSum;

/// Default cap on the slice count for explicit branch lists.
pub const BRANCH_CAP: usize = 22;
/// Cap for the explicit `O(2ⁿ n²)` spin-sequence sum.
pub const SPIN_SUM_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchState {
    pub coefficient: C64,
    pub label: C64,
}

fn check_cap(n: usize, cap: usize, what: &'static str) -> Result<()> {
    if n > cap {
        return Err(RabiError::ResourceLimit {
            what,
            requested: n as u128,
            limit: cap as u128,
        });
    }
    Ok(())
}

/// Iterate the one-step splitting `n` times.
pub fn evolve_branches(step: &TrotterStep, alpha: C64) -> Result<Vec<BranchState>> {
    check_cap(step.n, BRANCH_CAP, "Trotter slices for explicit branches")?;
    let mut branches = vec![BranchState {
        coefficient: C64::new(1.0, 0.0),
        label: alpha,
    }];
    for _ in 0..step.n {
        let mut next = Vec::with_capacity(2 * branches.len());
        for b in &branches {
            let (factor, shifted) = step.displace(b.label);
            let (norm, label) = step.rotate(shifted);
            let c = b.coefficient * factor * norm;
            next.push(BranchState {
                coefficient: c * step.keep,
                label,
            });
            next.push(BranchState {
                coefficient: c * step.flip,
                label: -label,
            });
        }
        branches = next;
    }
    Ok(branches)
}

/// Real-time branches of `U_nⁿ|α⟩`.
pub fn evolve_recurrence(
    params: &RabiParams,
    alpha: CoherentLabel,
    t: f64,
    n: usize,
) -> Result<Vec<BranchState>> {
    let step = TrotterStep::new(params, t, n, Mode::Real)?;
    evolve_branches(&step, alpha.value())
}

/// `⟨β|U_nⁿ|α⟩ = Σ_l b_l ⟨β|a_l⟩`.
pub fn amplitude_recurrence(
    params: &RabiParams,
    alpha: CoherentLabel,
    beta: CoherentLabel,
    t: f64,
    n: usize,
) -> Result<C64> {
    let branches = evolve_recurrence(params, alpha, t, n)?;
    Ok(sum_branches(&branches, beta.value()))
}

pub(crate) fn sum_branches(branches: &[BranchState], beta: C64) -> C64 {
    branches
        .iter()
        .filter(|b| b.coefficient != C64::new(0.0, 0.0))
        .map(|b| b.coefficient * overlap_raw(b.label, beta))
        .collect::<KahanSum>()
        .value()
}

/// Closed-form branch functions. They are written to mirror their defining
/// sums term by term, so they cost `O(n³)` per branch and serve as a
/// cross-check of the recurrence rather than as a fast path.
pub mod closed_form {
    use super::*;

    #[inline]
    fn sign_of(f: u64) -> f64 {
        if f.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// `f(n, l) = Σ_{k<n} ⌊l / 2ᵏ⌋`.
    pub fn f(n: usize, l: u64) -> u64 {
        (0..n).map(|k| l.checked_shr(k as u32).unwrap_or(0)).sum()
    }

    /// `S(n, l) = Σ_{k=1}^{n} e^{i(π f(k,l) - kλ)}`.
    pub fn s(step: &TrotterStep, n: usize, l: u64) -> C64 {
        (1..=n)
            .map(|k| sign_of(f(k, l)) * step.w.powu(k as u32))
            .collect::<KahanSum>()
            .value()
    }

    /// `G(l) = 1 + (-1)^l e^{2iδ}`.
    pub fn g(step: &TrotterStep, l: u64) -> C64 {
        C64::new(1.0, 0.0) + sign_of(l) * C64::from_polar(1.0, 2.0 * step.delta_n)
    }

    /// `H(n, l) = e^{-inδ} 2^{-n} Π_{k<n} G(⌊l / 2ᵏ⌋)`.
    pub fn h(step: &TrotterStep, n: usize, l: u64) -> C64 {
        let mut acc = C64::from_polar(0.5f64.powi(n as i32), -(n as f64) * step.delta_n);
        for k in 0..n {
            acc *= g(step, l >> k);
        }
        acc
    }

    /// Ancestor of branch `l` (an `n`-step index) after `k` steps.
    #[inline]
    fn ancestor(n: usize, l: u64, k: usize) -> u64 {
        l.checked_shr((n - k) as u32).unwrap_or(0)
    }

    /// `J(n, l) = Σ_{k<n} e^{i(π f(k, ⌊l/2^{n-k}⌋) - kλ)}`.
    pub fn j(step: &TrotterStep, n: usize, l: u64) -> C64 {
        (0..n)
            .map(|k| sign_of(f(k, ancestor(n, l, k))) * step.w.powu(k as u32))
            .collect::<KahanSum>()
            .value()
    }

    /// `Z(n, l) = Σ_{k<n} S(k, ⌊l/2^{n-k}⌋)`.
    pub fn z(step: &TrotterStep, n: usize, l: u64) -> C64 {
        (0..n)
            .map(|k| s(step, k, ancestor(n, l, k)))
            .collect::<KahanSum>()
            .value()
    }

    /// Branch `l` of `U_nⁿ|α⟩`:
    /// `H e^{γ Re(αJ + γZ)} |e^{i(πf - nλ)}α + Sγ⟩` (real time only).
    pub fn branch(step: &TrotterStep, alpha: C64, l: u64) -> BranchState {
        let n = step.n;
        let gamma = step.gamma_n;
        let re = (alpha * j(step, n, l) + gamma * z(step, n, l)).re;
        BranchState {
            coefficient: h(step, n, l) * (gamma * re).exp(),
            label: sign_of(f(n, l)) * step.w.powu(n as u32) * alpha + s(step, n, l) * gamma,
        }
    }
}

/// Exact finite-`n` amplitude as an explicit sum over accumulated signs
/// `σ_1..σ_n` (`σ_0 = 1`, step `k` takes `σ_k → σ_{k+1}`):
///
/// `⟨β|U_nⁿ|α⟩ = e^{-(|α|²+|β|²)/2} Σ_σ Π_k bond(σ_k, σ_{k+1}) e^{E[σ]}`,
///
/// `E = nγ²/2 + γ² Σ_{p<k<n} σ_kσ_p w^{k-p} + γα Σ_{k<n} σ_k w^k
///     + γβ*σ_n Σ_{p<n} σ_p w^{n-p} + σ_n wⁿ β*α`.
///
/// Valid in both modes.
pub fn amplitude_spin_sum(step: &TrotterStep, alpha: C64, beta: C64) -> Result<C64> {
    let n = step.n;
    check_cap(n, SPIN_SUM_CAP, "Trotter slices for the spin-sequence sum")?;
    let g = step.gamma_n;
    let w = step.w;
    let wp: Vec<C64> = (0..=n).map(|k| w.powu(k as u32)).collect();
    let bs = beta.conj();
    let constant = -(alpha.norm_sqr() + beta.norm_sqr()) / 2.0 + n as f64 * g * g / 2.0;

    let mut acc = KahanSum::new();
    let mut sigma = vec![1.0f64; n + 1];
    for mask in 0u64..(1u64 << n) {
        // bit k of mask: step k flips
        let mut bonds = C64::new(1.0, 0.0);
        for k in 0..n {
            let flipped = (mask >> k) & 1 == 1;
            sigma[k + 1] = if flipped { -sigma[k] } else { sigma[k] };
            bonds *= step.bond(flipped);
        }
        if bonds == C64::new(0.0, 0.0) {
            continue;
        }
        let mut quad = KahanSum::new();
        let mut lin_a = KahanSum::new();
        let mut lin_b = KahanSum::new();
        for k in 0..n {
            lin_a.add(sigma[k] * wp[k]);
            lin_b.add(sigma[k] * wp[n - k]);
            for p in 0..k {
                quad.add(sigma[k] * sigma[p] * wp[k - p]);
            }
        }
        let sn = sigma[n];
        let e = constant
            + g * g * quad.value()
            + g * alpha * lin_a.value()
            + g * bs * sn * lin_b.value()
            + sn * wp[n] * bs * alpha;
        acc.add(bonds * e.exp());
    }
    Ok(acc.value())
}
