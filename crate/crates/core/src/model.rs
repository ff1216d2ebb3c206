//! Physical parameters, generalized coherent-state labels and the
//! parity/spin basis relations.
//!
//! In a fixed parity sector the Hamiltonian reads
//! `H = -P ω0 e^{iπ b†b} + ω b†b + g (b† + b)` with `b = σˣ a`, and the states
//! `|α⟩` used throughout are coherent states of `b`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{RabiError, Result};

/// Eigenvalue `P` of the parity operator `Π = -e^{iπ a†a} σᶻ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub enum Parity {
    Plus,
    Minus,
}

impl Parity {
    pub fn from_sign(p: i32) -> Result<Self> {
        match p {
            1 => Ok(Parity::Plus),
            -1 => Ok(Parity::Minus),
            other => Err(RabiError::invalid(format!(
                "parity must be +1 or -1, got {other}"
            ))),
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Parity::Plus => 1.0,
            Parity::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Parity::Plus => Parity::Minus,
            Parity::Minus => Parity::Plus,
        }
    }
}

impl TryFrom<i32> for Parity {
    type Error = RabiError;
    fn try_from(p: i32) -> Result<Self> {
        Parity::from_sign(p)
    }
}

impl From<Parity> for i32 {
    fn from(p: Parity) -> i32 {
        p.sign() as i32
    }
}

/// Couplings of the Rabi Hamiltonian and the parity sector being evolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiParams {
    /// Two-level splitting. Only the product `P·ω0` enters the dynamics, so
    /// negative values are accepted (they are equivalent to flipping `P`).
    pub omega0: f64,
    pub omega: f64,
    pub g: f64,
    pub parity: Parity,
}

impl RabiParams {
    pub fn new(omega0: f64, omega: f64, g: f64, parity: Parity) -> Result<Self> {
        let p = RabiParams {
            omega0,
            omega,
            g,
            parity,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega0.is_finite() {
            return Err(RabiError::invalid("omega0 must be finite"));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(RabiError::invalid(format!(
                "omega must be finite and > 0, got {}",
                self.omega
            )));
        }
        if !(self.g.is_finite() && self.g >= 0.0) {
            return Err(RabiError::invalid(format!(
                "g must be finite and >= 0, got {}",
                self.g
            )));
        }
        Ok(())
    }

    /// `P·ω0`, the only combination of parity and splitting that matters.
    pub fn signed_splitting(&self) -> f64 {
        self.parity.sign() * self.omega0
    }

    /// `g/ω`, the dimensionless coupling.
    pub fn coupling_ratio(&self) -> f64 {
        self.g / self.omega
    }
}

/// Complex eigenvalue `α` of `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "(f64, f64)", try_from = "(f64, f64)")]
pub struct CoherentLabel(C64);

impl CoherentLabel {
    pub const DEFAULT_CAP: f64 = 50.0;

    pub fn new(alpha: C64) -> Result<Self> {
        Self::with_cap(alpha, Self::DEFAULT_CAP)
    }

    pub fn with_cap(alpha: C64, cap: f64) -> Result<Self> {
        if !(alpha.re.is_finite() && alpha.im.is_finite()) {
            return Err(RabiError::invalid(format!(
                "coherent label must be finite, got {alpha}"
            )));
        }
        if alpha.norm() > cap {
            return Err(RabiError::invalid(format!(
                "|alpha| = {} exceeds the cap {cap}",
                alpha.norm()
            )));
        }
        Ok(CoherentLabel(alpha))
    }

    pub fn from_parts(re: f64, im: f64) -> Result<Self> {
        Self::new(C64::new(re, im))
    }

    pub fn vacuum() -> Self {
        CoherentLabel(C64::new(0.0, 0.0))
    }

    pub fn value(self) -> C64 {
        self.0
    }

    pub fn norm(self) -> f64 {
        self.0.norm()
    }

    pub fn negated(self) -> Self {
        CoherentLabel(-self.0)
    }
}

impl From<CoherentLabel> for (f64, f64) {
    fn from(c: CoherentLabel) -> Self {
        (c.0.re, c.0.im)
    }
}

impl TryFrom<(f64, f64)> for CoherentLabel {
    type Error = RabiError;
    fn try_from((re, im): (f64, f64)) -> Result<Self> {
        CoherentLabel::from_parts(re, im)
    }
}

/// Shared numerical slack. Algebraic identities are held to `algebraic`,
/// quantities that went through time evolution to `evolved`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub algebraic: f64,
    pub evolved: f64,
    /// Allowed excess of `|amplitude|` over 1 for normalized real-time states.
    pub amplitude_slack: f64,
    pub alpha_cap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            algebraic: 1e-12,
            evolved: 1e-9,
            amplitude_slack: 1e-9,
            alpha_cap: CoherentLabel::DEFAULT_CAP,
        }
    }
}

/// `ln⟨β|α⟩ = -(|α|² + |β|²)/2 + β*α`.
pub fn ln_coherent_overlap(alpha: CoherentLabel, beta: CoherentLabel) -> C64 {
    let (a, b) = (alpha.value(), beta.value());
    C64::new(-(a.norm_sqr() + b.norm_sqr()) / 2.0, 0.0) + b.conj() * a
}

/// `⟨β|α⟩` for normalized coherent states.
pub fn coherent_overlap(alpha: CoherentLabel, beta: CoherentLabel) -> C64 {
    ln_coherent_overlap(alpha, beta).exp()
}

/// Unchecked variant for labels produced internally (branch labels etc.).
#[inline]
pub(crate) fn overlap_raw(alpha: C64, beta: C64) -> C64 {
    (C64::new(-(alpha.norm_sqr() + beta.norm_sqr()) / 2.0, 0.0) + beta.conj() * alpha).exp()
}

/// Eigenvalue of `σᶻ` for the ordinary (`a`) coherent states `|s, α⟩_c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn sign(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }
}

/// `coeff · |basis, alpha⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedTerm<B> {
    pub coeff: f64,
    pub basis: B,
    pub alpha: C64,
}

pub type SpinTerm = WeightedTerm<Spin>;
pub type ParityTerm = WeightedTerm<Parity>;

/// Spin carried by the even photon-number components of `|P, α⟩`:
/// `Π|s,n⟩ = -s(-1)ⁿ|s,n⟩`, so for even `n` the spin is `-P`.
fn even_spin(p: Parity) -> Spin {
    match p {
        Parity::Plus => Spin::Down,
        Parity::Minus => Spin::Up,
    }
}

/// `|P, α⟩ = ½(|s_e,α⟩_c + |s_e,-α⟩_c + |s_o,α⟩_c - |s_o,-α⟩_c)` where `s_e`
/// (`s_o`) is the spin paired with even (odd) photon numbers in sector `P`.
pub fn parity_to_spin(parity: Parity, alpha: CoherentLabel) -> [SpinTerm; 4] {
    let a = alpha.value();
    let se = even_spin(parity);
    let so = even_spin(parity.flipped());
    [
        WeightedTerm {
            coeff: 0.5,
            basis: se,
            alpha: a,
        },
        WeightedTerm {
            coeff: 0.5,
            basis: se,
            alpha: -a,
        },
        WeightedTerm {
            coeff: 0.5,
            basis: so,
            alpha: a,
        },
        WeightedTerm {
            coeff: -0.5,
            basis: so,
            alpha: -a,
        },
    ]
}

/// `|s, α⟩_c = ½(|P_e,α⟩ + |P_e,-α⟩ + |P_o,α⟩ - |P_o,-α⟩)` with `P_e = -s`
/// the sector whose even components carry spin `s`.
pub fn spin_to_parity(spin: Spin, alpha: CoherentLabel) -> [ParityTerm; 4] {
    let a = alpha.value();
    let (pe, po) = match spin {
        Spin::Up => (Parity::Minus, Parity::Plus),
        Spin::Down => (Parity::Plus, Parity::Minus),
    };
    [
        WeightedTerm {
            coeff: 0.5,
            basis: pe,
            alpha: a,
        },
        WeightedTerm {
            coeff: 0.5,
            basis: pe,
            alpha: -a,
        },
        WeightedTerm {
            coeff: 0.5,
            basis: po,
            alpha: a,
        },
        WeightedTerm {
            coeff: -0.5,
            basis: po,
            alpha: -a,
        },
    ]
}

/// Merge terms with identical basis label and coherent label, dropping the
/// ones that cancel.
pub fn collect_terms<B: Copy + PartialEq>(terms: &[WeightedTerm<B>]) -> Vec<WeightedTerm<B>> {
    let mut out: Vec<WeightedTerm<B>> = Vec::new();
    for t in terms {
        match out
            .iter_mut()
            .find(|o| o.basis == t.basis && o.alpha == t.alpha)
        {
            Some(o) => o.coeff += t.coeff,
            None => out.push(*t),
        }
    }
    out.retain(|t| t.coeff != 0.0);
    out
}

/// Re-express a superposition of `a`-coherent states in the parity basis.
pub fn spin_terms_to_parity(terms: &[SpinTerm]) -> Vec<ParityTerm> {
    let mut all = Vec::with_capacity(4 * terms.len());
    for t in terms {
        for p in spin_to_parity(t.basis, CoherentLabel(t.alpha)) {
            all.push(WeightedTerm {
                coeff: t.coeff * p.coeff,
                ..p
            });
        }
    }
    collect_terms(&all)
}

/// Re-express a superposition of `b`-coherent states in the spin basis.
pub fn parity_terms_to_spin(terms: &[ParityTerm]) -> Vec<SpinTerm> {
    let mut all = Vec::with_capacity(4 * terms.len());
    for t in terms {
        for s in parity_to_spin(t.basis, CoherentLabel(t.alpha)) {
            all.push(WeightedTerm {
                coeff: t.coeff * s.coeff,
                ..s
            });
        }
    }
    collect_terms(&all)
}
