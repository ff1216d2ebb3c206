//! Wall-resolved transfer products in a truncated Fock basis.
//!
//! Both the exact Trotter product and the Ising form are products of the
//! slice operators `W = w^{b†b}`, `E_± = e^{±γ(b+b†)}` and bond weights. By
//! carrying one Fock vector per wall count, a sum restricted to at most
//! `M` walls costs `O(n M N²)` instead of `Σ_m C(n-1, m)` configurations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use super::step::{Mode, TrotterStep};
use crate::error::{RabiError, Result};
use crate::fock::{coherent_coefficients, MAX_CUTOFF};
use crate::model::{CoherentLabel, RabiParams};
use crate::numeric::KahanSum;

/// Cutoff used when none is given: the coherent spread `4|α|²` plus room for
/// the coupling-induced displacement `2g/ω`.
pub fn default_transfer_cutoff(
    params: &RabiParams,
    alpha: CoherentLabel,
    beta: CoherentLabel,
) -> usize {
    let r = alpha.norm().max(beta.norm()) + 2.0 * params.coupling_ratio();
    ((4.0 * r * r + 30.0).ceil() as usize).min(MAX_CUTOFF)
}

/// Per-wall-count contributions; `total` is their compensated sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorSums {
    pub per_m: Vec<C64>,
    pub total: C64,
    pub cutoff: usize,
}

impl SectorSums {
    fn new(per_m: Vec<C64>, cutoff: usize) -> Self {
        let total = per_m.iter().copied().collect::<KahanSum>().value();
        SectorSums {
            per_m,
            total,
            cutoff,
        }
    }
}

struct SliceOperators {
    e_plus: DMatrix<C64>,
    e_minus: DMatrix<C64>,
    w_diag: Vec<C64>,
    parity: Vec<f64>,
}

impl SliceOperators {
    fn new(step: TrotterStep, cutoff: usize) -> Result<Self> {
        if !(1..=MAX_CUTOFF).contains(&cutoff) {
            return Err(RabiError::invalid(format!(
                "transfer cutoff must lie in 1..={MAX_CUTOFF}, got {cutoff}"
            )));
        }
        let dim = cutoff + 1;
        let x = DMatrix::from_fn(dim, dim, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::try_new(x, f64::EPSILON, 0)
            .ok_or_else(|| RabiError::Numeric("eigensolver failed for b + b†".into()))?;
        let v = eig.eigenvectors.map(|x| C64::new(x, 0.0));
        let exp_of = |sign: f64| {
            let d: Vec<C64> = eig
                .eigenvalues
                .iter()
                .map(|&l| (sign * step.gamma_n * l).exp())
                .collect();
            let scaled = DMatrix::from_fn(dim, dim, |i, k| v[(i, k)] * d[k]);
            scaled * v.transpose()
        };
        let e_plus = exp_of(1.0);
        let e_minus = exp_of(-1.0);
        let w_diag = (0..dim).map(|k| step.w.powu(k as u32)).collect();
        let parity = (0..dim)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        Ok(SliceOperators {
            e_plus,
            e_minus,
            w_diag,
            parity,
        })
    }

    fn coherent(&self, a: C64) -> DVector<C64> {
        DVector::from_vec(coherent_coefficients(a, self.w_diag.len() - 1))
    }
}

fn axpy_diag(
    out: &mut DVector<C64>,
    scale: C64,
    diag: &[C64],
    sign: Option<&[f64]>,
    u: &DVector<C64>,
) {
    match sign {
        None => {
            for ((o, d), x) in out.iter_mut().zip(diag).zip(u.iter()) {
                *o += scale * d * x;
            }
        }
        Some(s) => {
            for (((o, d), p), x) in out.iter_mut().zip(diag).zip(s).zip(u.iter()) {
                *o += scale * d * *p * x;
            }
        }
    }
}

/// Exact Trotter product `(W (keep + flip Π) E_+)ⁿ |α⟩` resolved by the number
/// of sign flips after the first slice, projected on `⟨β|`. The flip in the
/// first slice corresponds to the free end bond of the Ising form and is not
/// counted. With `max_walls = n-1` this equals the full branch sum.
pub fn trotter_transfer(
    step: &TrotterStep,
    alpha: C64,
    beta: C64,
    max_walls: usize,
    cutoff: usize,
) -> Result<SectorSums> {
    let ops = SliceOperators::new(*step, cutoff)?;
    let dim = cutoff + 1;
    let sectors = max_walls.min(step.n.saturating_sub(1)) + 1;
    let zero = DVector::<C64>::zeros(dim);
    let mut vs = vec![zero.clone(); sectors];
    vs[0] = ops.coherent(alpha);
    for k in 0..step.n {
        let mut next = vec![zero.clone(); sectors];
        for m in 0..sectors {
            if vs[m].iter().all(|x| *x == C64::new(0.0, 0.0)) {
                continue;
            }
            let u = &ops.e_plus * &vs[m];
            axpy_diag(&mut next[m], step.keep, &ops.w_diag, None, &u);
            let target = if k == 0 { m } else { m + 1 };
            if target < sectors {
                axpy_diag(
                    &mut next[target],
                    step.flip,
                    &ops.w_diag,
                    Some(&ops.parity),
                    &u,
                );
            }
        }
        vs = next;
    }
    let vb = ops.coherent(beta);
    let per_m = vs.iter().map(|v| vb.dotc(v)).collect();
    Ok(SectorSums::new(per_m, cutoff))
}

/// Ising form `Σ_s bonds ⟨β| W E_{s_1} W ⋯ E_{s_{n-1}} W |s_n α⟩` resolved by
/// the number of walls among `s_0..s_{n-1}`.
pub fn ising_transfer(
    step: &TrotterStep,
    alpha: C64,
    beta: C64,
    max_walls: usize,
    cutoff: usize,
) -> Result<SectorSums> {
    if step.n < 2 {
        return Err(RabiError::invalid("Ising chain needs n >= 2"));
    }
    let ops = SliceOperators::new(*step, cutoff)?;
    let dim = cutoff + 1;
    let sectors = max_walls.min(step.n - 1) + 1;
    let zero = DVector::<C64>::zeros(dim);
    // rows[spin][m]: ⟨β| W E_{s_1} W ⋯ E_{s_j} W with s_j = spin, stored
    // transposed; E_± are complex symmetric so row·E = E·rowᵀ.
    let mut rows = [vec![zero.clone(); sectors], vec![zero.clone(); sectors]];
    let vb = ops.coherent(beta).map(|x| x.conj());
    rows[0][0] = DVector::from_iterator(dim, vb.iter().zip(&ops.w_diag).map(|(b, w)| b * w));
    for _ in 1..step.n {
        let mut next = [vec![zero.clone(); sectors], vec![zero.clone(); sectors]];
        for (s, group) in rows.iter().enumerate() {
            for (m, r) in group.iter().enumerate() {
                if r.iter().all(|x| *x == C64::new(0.0, 0.0)) {
                    continue;
                }
                for s2 in 0..2 {
                    let mm = m + usize::from(s2 != s);
                    if mm >= sectors {
                        continue;
                    }
                    let e = if s2 == 0 { &ops.e_plus } else { &ops.e_minus };
                    let u = e * r;
                    axpy_diag(&mut next[s2][mm], step.bond(s2 != s), &ops.w_diag, None, &u);
                }
            }
        }
        rows = next;
    }
    let va_plus = ops.coherent(alpha);
    let va_minus = ops.coherent(-alpha);
    let mut per_m = vec![C64::new(0.0, 0.0); sectors];
    for (s, group) in rows.iter().enumerate() {
        for (m, r) in group.iter().enumerate() {
            let plus = step.bond(s != 0) * r.dot(&va_plus);
            let minus = step.bond(s != 1) * r.dot(&va_minus);
            per_m[m] += plus + minus;
        }
    }
    Ok(SectorSums::new(per_m, cutoff))
}

/// Real-time Trotter amplitude `⟨β|U_nⁿ|α⟩` keeping at most `max_walls` sign
/// flips, for slice counts beyond the explicit branch cap.
pub fn amplitude_recurrence_restricted(
    params: &RabiParams,
    alpha: CoherentLabel,
    beta: CoherentLabel,
    t: f64,
    n: usize,
    max_walls: usize,
    cutoff: Option<usize>,
) -> Result<SectorSums> {
    let step = TrotterStep::new(params, t, n, Mode::Real)?;
    let cutoff = cutoff.unwrap_or_else(|| default_transfer_cutoff(params, alpha, beta));
    trotter_transfer(&step, alpha.value(), beta.value(), max_walls, cutoff)
}

/// Ising-form amplitude with at most `max_walls` walls, for chains beyond the
/// enumeration budget.
#[allow(clippy::too_many_arguments)]
pub fn amplitude_ising_transfer(
    params: &RabiParams,
    alpha: CoherentLabel,
    beta: CoherentLabel,
    time_value: f64,
    n: usize,
    mode: Mode,
    max_walls: usize,
    cutoff: Option<usize>,
) -> Result<SectorSums> {
    let step = TrotterStep::new(params, time_value, n, mode)?;
    let cutoff = cutoff.unwrap_or_else(|| default_transfer_cutoff(params, alpha, beta));
    ising_transfer(&step, alpha.value(), beta.value(), max_walls, cutoff)
}
