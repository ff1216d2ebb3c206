//! Complex Ising form of the Trotterized amplitude.
//!
//! With `s_0 = 1`, free spins `s_1..s_{n-1}` and an end spin `s_n = ±1`,
//!
//! `⟨β|U|α⟩ ≈ e^{-(|α|²+|β|²)/2} Σ_s Π_{bonds} w(s_k, s_{k+1})
//!            · exp(½ Σ_{j,l} s_j s_l K_{jl} + Σ_l s_l B_l^{s_n} + s_n wⁿ β*α)`
//!
//! with `K_{jl} = γ² w^{|j-l|}` and `B_l^± = γ(β* w^l ± α w^{n-l})`. The
//! nearest-neighbour coupling `ln(i cot δ)` is kept in product form as the
//! per-bond weights `cos δ` / `-i sin δ` (`cosh` / `sinh` in Euclidean mode).

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::step::{Mode, TrotterStep};
use super::walls::Colex;
use crate::error::{RabiError, Result};
use crate::model::{CoherentLabel, RabiParams};
use crate::numeric::{binomial, KahanSum};

/// Default cap on the number of enumerated configurations (both `s_n` signs
/// counted).
pub const TERM_BUDGET: u128 = 1 << 24;
/// Largest `n` for an unrestricted sum.
pub const UNRESTRICTED_CAP: usize = 20;
/// Largest `n` for a wall-restricted sum.
pub const RESTRICTED_CAP: usize = 4096;
/// Wall configurations per parallel chunk. Fixed so the summation order, and
/// hence every bit of the result, does not depend on the thread count.
const CHUNK: u128 = 1 << 14;

#[derive(Debug, Clone)]
pub struct IsingKernel {
    pub n: usize,
    pub mode: Mode,
    /// Long-range part `K_{jl}`, `j, l = 1..n-1` stored at `[j-1, l-1]`.
    pub k_lr: DMatrix<C64>,
    /// `B_l^+` for `l = 1..n-1`.
    pub b_plus: Vec<C64>,
    /// `B_l^-` for `l = 1..n-1`.
    pub b_minus: Vec<C64>,
    /// `(+wⁿβ*α, -wⁿβ*α)`, the end-spin term for `s_n = +1` and `-1`.
    pub boundary_terms: (C64, C64),
    pub nn_bond_aligned: C64,
    pub nn_bond_flipped: C64,
    step: TrotterStep,
    alpha: C64,
    beta: C64,
}

pub fn ising_kernel(
    params: &RabiParams,
    alpha: CoherentLabel,
    beta: CoherentLabel,
    time_value: f64,
    n: usize,
    mode: Mode,
) -> Result<IsingKernel> {
    if n < 2 {
        return Err(RabiError::invalid("Ising chain needs n >= 2"));
    }
    let step = TrotterStep::new(params, time_value, n, mode)?;
    Ok(IsingKernel::from_step(step, alpha.value(), beta.value()))
}

impl IsingKernel {
    pub(crate) fn from_step(step: TrotterStep, alpha: C64, beta: C64) -> Self {
        let n = step.n;
        let g2 = step.gamma_n * step.gamma_n;
        let wp: Vec<C64> = (0..=n).map(|k| step.w.powu(k as u32)).collect();
        let k_lr = DMatrix::from_fn(n - 1, n - 1, |j, l| g2 * wp[j.abs_diff(l)]);
        let field =
            |l: usize, sign: f64| step.gamma_n * (beta.conj() * wp[l] + sign * alpha * wp[n - l]);
        let b_plus = (1..n).map(|l| field(l, 1.0)).collect();
        let b_minus = (1..n).map(|l| field(l, -1.0)).collect();
        let end = wp[n] * beta.conj() * alpha;
        IsingKernel {
            n,
            mode: step.mode,
            k_lr,
            b_plus,
            b_minus,
            boundary_terms: (end, -end),
            nn_bond_aligned: step.keep,
            nn_bond_flipped: step.flip,
            step,
            alpha,
            beta,
        }
    }

    pub fn step(&self) -> &TrotterStep {
        &self.step
    }

    /// `B_l^±` for any `l = 1..=n`, including the end site that is not part
    /// of the stored lists.
    pub fn field(&self, l: usize, plus: bool) -> C64 {
        let w = self.step.w;
        let sign = if plus { 1.0 } else { -1.0 };
        self.step.gamma_n
            * (self.beta.conj() * w.powu(l as u32)
                + sign * self.alpha * w.powu((self.n - l) as u32))
    }

    /// `K_{j,j+1}` written as a logarithm, `ln(aligned / flipped)` on the
    /// principal branch. For reporting only; sums use the bond weights.
    pub fn formal_nn_coupling(&self) -> C64 {
        (self.nn_bond_aligned / self.nn_bond_flipped).ln()
    }

    /// Exponent of one configuration, evaluated directly from the kernel in
    /// `O(n²)`. `spins` holds `s_0..s_{n-1}`.
    pub fn exponent(&self, spins: &[i8], s_n: i8) -> C64 {
        assert_eq!(spins.len(), self.n);
        assert_eq!(spins[0], 1);
        let s = &spins[1..];
        let mut acc = KahanSum::new();
        for (j, &sj) in s.iter().enumerate() {
            for (l, &sl) in s.iter().enumerate() {
                acc.add(0.5 * (sj * sl) as f64 * self.k_lr[(j, l)]);
            }
        }
        let b = if s_n > 0 { &self.b_plus } else { &self.b_minus };
        for (sl, bl) in s.iter().zip(b) {
            acc.add(*sl as f64 * bl);
        }
        acc.add(if s_n > 0 {
            self.boundary_terms.0
        } else {
            self.boundary_terms.1
        });
        acc.value()
    }

    /// Product of all `n` bond weights, including `(s_{n-1}, s_n)`.
    pub fn bond_weight(&self, spins: &[i8], s_n: i8) -> C64 {
        let mut w = C64::new(1.0, 0.0);
        for pair in spins.windows(2) {
            w *= self.step.bond(pair[0] != pair[1]);
        }
        w * self.step.bond(spins[spins.len() - 1] != s_n)
    }

    /// Configuration weight without the `e^{-(|α|²+|β|²)/2}` prefactor.
    pub fn weight(&self, spins: &[i8], s_n: i8) -> C64 {
        self.bond_weight(spins, s_n) * self.exponent(spins, s_n).exp()
    }

    pub fn prefactor(&self) -> f64 {
        (-(self.alpha.norm_sqr() + self.beta.norm_sqr()) / 2.0).exp()
    }
}

/// Geometric tables for evaluating a configuration from its domains in
/// `O(m)`. Only non-negative powers of `w` appear, so Euclidean mode stays
/// well conditioned.
struct DomainTables {
    n: usize,
    /// `w^k`, `k = 0..=n`
    wp: Vec<C64>,
    /// `G[L] = Σ_{i<L} w^i`
    geo: Vec<C64>,
    /// `T[L] = Σ_{0≤l<j<L} w^{j-l} = Σ_{d=1}^{L-1} (L-d) w^d`
    tri: Vec<C64>,
    keep_pow: Vec<C64>,
    flip_pow: Vec<C64>,
}

impl DomainTables {
    fn new(step: &TrotterStep, m_max: usize) -> Self {
        let n = step.n;
        let w = step.w;
        let wp: Vec<C64> = (0..=n).map(|k| w.powu(k as u32)).collect();
        let mut geo = vec![C64::new(0.0, 0.0); n + 1];
        let mut tri = vec![C64::new(0.0, 0.0); n + 1];
        // T[L+1] = T[L] + Σ_{d=1}^{L} w^d = T[L] + w G[L]
        for l in 0..n {
            geo[l + 1] = geo[l] + wp[l];
            tri[l + 1] = tri[l] + w * geo[l];
        }
        let keep_pow = (0..=n).map(|k| step.keep.powu(k as u32)).collect();
        let flip_pow = (0..=m_max + 1).map(|k| step.flip.powu(k as u32)).collect();
        DomainTables {
            n,
            wp,
            geo,
            tri,
            keep_pow,
            flip_pow,
        }
    }

    /// Sum over `s_n = ±1` for the spin sequence whose walls sit at bonds
    /// `walls[i] + 1` (`walls` zero-based, ascending).
    #[inline]
    fn config_sum(&self, walls: &[usize], consts: &ConfigConsts) -> C64 {
        let n = self.n;
        let m = walls.len();
        let mut quad = C64::new(0.0, 0.0);
        let mut lin_b = C64::new(0.0, 0.0);
        let mut lin_a = C64::new(0.0, 0.0);
        // running Σ_{l < a_d} s_l w^{a_d - l}
        let mut x = C64::new(0.0, 0.0);
        let mut sign = 1.0;
        let mut start = 1usize;
        for d in 0..=m {
            let end = if d < m { walls[d] + 1 } else { n }; // exclusive
            let len = end - start;
            if len > 0 {
                let g = self.geo[len];
                quad += self.tri[len] + sign * g * x;
                lin_b += sign * self.wp[start] * g;
                lin_a += sign * self.wp[n - (end - 1)] * g;
                x = self.wp[len] * x + sign * self.wp[1] * g;
            }
            sign = -sign;
            start = end;
        }
        // sign now holds -s_{n-1}
        let last = -sign;
        let base = consts.diag + consts.g2 * quad + consts.gb * lin_b;
        let plus = (base + consts.ga * lin_a + consts.end).exp();
        let minus = (base - consts.ga * lin_a - consts.end).exp();
        let interior = self.keep_pow[n - 1 - m] * self.flip_pow[m];
        let (w_plus, w_minus) = if last > 0.0 {
            (consts.keep, consts.flip)
        } else {
            (consts.flip, consts.keep)
        };
        interior * (w_plus * plus + w_minus * minus)
    }
}

struct ConfigConsts {
    g2: C64,
    ga: C64,
    gb: C64,
    diag: C64,
    end: C64,
    keep: C64,
    flip: C64,
}

/// Number of configurations (both end-spin signs) with at most `m_max` walls.
pub fn term_count(n: usize, m_max: usize) -> u128 {
    let mut total: u128 = 0;
    for m in 0..=m_max.min(n - 1) {
        total = total.saturating_add(binomial((n - 1) as u64, m as u64));
    }
    total.saturating_mul(2)
}

/// Ising-form sum with a budget on the enumerated term count.
pub fn amplitude_ising_exact(
    params: &RabiParams,
    alpha: CoherentLabel,
    beta: CoherentLabel,
    time_value: f64,
    n: usize,
    mode: Mode,
    max_domain_walls: Option<usize>,
) -> Result<C64> {
    amplitude_ising_exact_with_budget(
        params,
        alpha,
        beta,
        time_value,
        n,
        mode,
        max_domain_walls,
        TERM_BUDGET,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn amplitude_ising_exact_with_budget(
    params: &RabiParams,
    alpha: CoherentLabel,
    beta: CoherentLabel,
    time_value: f64,
    n: usize,
    mode: Mode,
    max_domain_walls: Option<usize>,
    budget: u128,
) -> Result<C64> {
    if n < 2 {
        return Err(RabiError::invalid("Ising chain needs n >= 2"));
    }
    let (m_max, cap) = match max_domain_walls {
        None => (n - 1, UNRESTRICTED_CAP),
        Some(m) => (m.min(n - 1), RESTRICTED_CAP),
    };
    if n > cap {
        return Err(RabiError::ResourceLimit {
            what: "Ising chain length",
            requested: n as u128,
            limit: cap as u128,
        });
    }
    let terms = term_count(n, m_max);
    if terms > budget {
        return Err(RabiError::ResourceLimit {
            what: "Ising configuration count",
            requested: terms,
            limit: budget,
        });
    }
    let step = TrotterStep::new(params, time_value, n, mode)?;
    let per_m = sector_sums(&step, alpha.value(), beta.value(), m_max);
    let total: KahanSum = per_m.into_iter().collect();
    let pre = (-(alpha.value().norm_sqr() + beta.value().norm_sqr()) / 2.0).exp();
    Ok(total.value() * pre)
}

/// Per-wall-count sums (without the coherent prefactor).
pub(crate) fn sector_sums(step: &TrotterStep, alpha: C64, beta: C64, m_max: usize) -> Vec<C64> {
    let n = step.n;
    let tables = DomainTables::new(step, m_max);
    let g = step.gamma_n;
    let consts = ConfigConsts {
        g2: g * g,
        ga: g * alpha * tables.wp[0],
        gb: g * beta.conj(),
        diag: g * g * (n as f64 - 1.0) / 2.0,
        end: tables.wp[n] * beta.conj() * alpha,
        keep: step.keep,
        flip: step.flip,
    };
    let bonds = n - 1;

    let mut jobs: Vec<(usize, u128)> = Vec::new();
    for m in 0..=m_max.min(bonds) {
        let count = binomial(bonds as u64, m as u64);
        let mut start = 0;
        while start < count {
            jobs.push((m, start));
            start += CHUNK;
        }
    }
    let partial: Vec<(usize, C64)> = jobs
        .par_iter()
        .map(|&(m, start)| {
            let mut it = Colex::starting_at(bonds, m, start).take_count(CHUNK);
            let mut acc = KahanSum::new();
            while let Some(walls) = it.next_ref() {
                acc.add(tables.config_sum(walls, &consts));
            }
            (m, acc.value())
        })
        .collect();

    let mut per_m = vec![KahanSum::new(); m_max.min(bonds) + 1];
    for (m, v) in partial {
        per_m[m].add(v);
    }
    per_m.into_iter().map(|k| k.value()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{coherent_overlap, Parity};
    use crate::trotter::walls::enumerate_by_domain_walls;
    use proptest::prelude::*;

    fn lab(re: f64, im: f64) -> CoherentLabel {
        CoherentLabel::from_parts(re, im).unwrap()
    }

    #[test]
    fn kernel_example_values() {
        let p = RabiParams::new(0.3, 1.0, 0.5, Parity::Plus).unwrap();
        let k = ising_kernel(&p, lab(0.1, 0.2), lab(0.3, -0.1), 1.0, 10, Mode::Real).unwrap();
        let c = k.formal_nn_coupling();
        assert!((c.re - (1.0 / 0.03f64.tan()).ln()).abs() < 1e-12, "{c}");
        assert!((c.re - 3.5065).abs() < 5e-4);
        assert!((c.im + std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((k.step().delta_n + 0.03).abs() < 1e-16);

        let (a, b) = (lab(0.4, -0.3), lab(-0.2, 0.6));
        let tau = 1.3;
        let k = ising_kernel(&p, a, b, tau, 12, Mode::Euclidean).unwrap();
        let gt = 0.5 * tau / 12.0;
        for plus in [true, false] {
            let sign = if plus { 1.0 } else { -1.0 };
            let expect = -gt * (b.value().conj() * (-tau).exp() + sign * a.value());
            assert!((k.field(12, plus) - expect).norm() < 1e-15);
        }
        assert!(k.k_lr.iter().all(|x| x.im == 0.0));

        let free = RabiParams::new(0.3, 1.0, 0.0, Parity::Plus).unwrap();
        let k = ising_kernel(&free, a, b, 2.0, 6, Mode::Real).unwrap();
        assert!(k.k_lr.iter().all(|x| x.norm() == 0.0));
        assert!(k.b_plus.iter().chain(&k.b_minus).all(|x| x.norm() == 0.0));
        assert!(ising_kernel(&free, a, b, 2.0, 1, Mode::Real).is_err());
    }

    #[test]
    fn kernel_structure() {
        let p = RabiParams::new(0.3, 1.0, 0.5, Parity::Minus).unwrap();
        let k = ising_kernel(&p, lab(0.1, 0.2), lab(0.3, -0.1), 2.0, 9, Mode::Real).unwrap();
        let s = k.step();
        for j in 0..8 {
            for l in 0..8 {
                assert_eq!(k.k_lr[(j, l)], k.k_lr[(l, j)]);
                let expect = s.gamma_n
                    * s.gamma_n
                    * C64::from_polar(1.0, -(j.abs_diff(l) as f64) * s.lambda_n);
                assert!((k.k_lr[(j, l)] - expect).norm() < 1e-15);
            }
        }
    }

    fn brute_force(k: &IsingKernel, m_max: usize) -> C64 {
        let mut acc = KahanSum::new();
        for seq in enumerate_by_domain_walls(k.n, m_max) {
            for s_n in [1i8, -1] {
                acc.add(k.weight(&seq.spins, s_n));
            }
        }
        acc.value() * k.prefactor()
    }

    #[test]
    fn domain_evaluation_matches_direct_kernel_sum() {
        let p = RabiParams::new(0.7, 1.0, 0.6, Parity::Plus).unwrap();
        let (a, b) = (lab(0.5, -0.4), lab(-0.3, 0.8));
        for mode in [Mode::Real, Mode::Euclidean] {
            for n in [2, 3, 7, 11] {
                for m in [0, 1, 3, n - 1] {
                    let k = ising_kernel(&p, a, b, 1.6, n, mode).unwrap();
                    let x = brute_force(&k, m);
                    let y = amplitude_ising_exact(&p, a, b, 1.6, n, mode, Some(m)).unwrap();
                    assert!(
                        (x - y).norm() < 1e-12 * x.norm().max(1.0),
                        "{mode:?} n={n} m={m}"
                    );
                }
            }
        }
    }

    #[test]
    fn unrestricted_equals_full_wall_count() {
        let p = RabiParams::new(0.4, 1.0, 0.3, Parity::Minus).unwrap();
        let (a, b) = (lab(0.2, 0.1), lab(0.0, -0.3));
        let x = amplitude_ising_exact(&p, a, b, 2.0, 10, Mode::Real, None).unwrap();
        let y = amplitude_ising_exact(&p, a, b, 2.0, 10, Mode::Real, Some(9)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn only_aligned_configurations_survive_without_splitting() {
        let p = RabiParams::new(0.0, 1.0, 0.6, Parity::Plus).unwrap();
        let (a, b) = (lab(0.3, 0.2), lab(-0.5, 0.4));
        let full = amplitude_ising_exact(&p, a, b, 1.5, 12, Mode::Real, None).unwrap();
        let aligned = amplitude_ising_exact(&p, a, b, 1.5, 12, Mode::Real, Some(0)).unwrap();
        assert_eq!(full, aligned);
        let k = ising_kernel(&p, a, b, 1.5, 12, Mode::Real).unwrap();
        let only = k.weight(&[1; 12], 1) * k.prefactor();
        assert!((only - full).norm() < 1e-14);
    }

    #[test]
    fn zero_time_gives_overlap() {
        let p = RabiParams::new(0.4, 1.0, 0.3, Parity::Plus).unwrap();
        let (a, b) = (lab(0.9, 0.1), lab(0.2, -0.7));
        for mode in [Mode::Real, Mode::Euclidean] {
            let x = amplitude_ising_exact(&p, a, b, 0.0, 8, mode, None).unwrap();
            assert!((x - coherent_overlap(a, b)).norm() < 1e-12);
        }
    }

    #[test]
    fn budget_and_caps() {
        let p = RabiParams::new(0.4, 1.0, 0.3, Parity::Plus).unwrap();
        let v = CoherentLabel::vacuum();
        let r = amplitude_ising_exact(&p, v, v, 1.0, 21, Mode::Real, None);
        assert!(matches!(r, Err(RabiError::ResourceLimit { .. })));
        let r = amplitude_ising_exact(&p, v, v, 1.0, 512, Mode::Real, Some(4));
        assert!(matches!(r, Err(RabiError::ResourceLimit { .. })));
        assert!(amplitude_ising_exact(&p, v, v, 1.0, 512, Mode::Real, Some(2)).is_ok());
    }

    #[test]
    fn bit_stable_across_thread_counts() {
        let p = RabiParams::new(0.4, 1.0, 0.3, Parity::Plus).unwrap();
        let (a, b) = (lab(0.3, 0.2), lab(-0.5, 0.4));
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| amplitude_ising_exact(&p, a, b, 2.0, 300, Mode::Real, Some(3)).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn wall_truncation_tail_is_bounded(w0 in 0.05..0.6f64, t in 0.5..2.5f64, m in 0usize..4) {
            let p = RabiParams::new(w0, 1.0, 0.2, Parity::Plus).unwrap();
            let (a, b) = (lab(0.2, -0.1), lab(0.1, 0.3));
            let n = 16;
            let x = amplitude_ising_exact(&p, a, b, t, n, Mode::Real, Some(m)).unwrap();
            let y = amplitude_ising_exact(&p, a, b, t, n, Mode::Real, Some(m + 2)).unwrap();
            let r = w0 * t;
            let tail = r.powi(m as i32 + 1) / crate::numeric::factorial(m + 1)
                + r.powi(m as i32 + 2) / crate::numeric::factorial(m + 2);
            prop_assert!((x - y).norm() <= 10.0 * tail, "change {} bound {}", (x - y).norm(), tail);
        }
    }
}
