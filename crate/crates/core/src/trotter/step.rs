use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{RabiError, Result};
use crate::model::RabiParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `U = e^{-iHt}`.
    Real,
    /// `e^{-Hτ}`.
    Euclidean,
}

/// Per-slice quantities of the split `U_n = e^{-iλ b†b} e^{-iδ Π_b} e^{γ(b+b†)}`.
///
/// Real time: `λ = ωt/n`, `δ = -Pω0t/n`, `γ = -igt/n`. Euclidean mode uses
/// `λ = ωτ/n`, `δ = -Pω0τ/n`, `γ = -gτ/n` with the same sign conventions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrotterStep {
    pub n: usize,
    pub mode: Mode,
    pub lambda_n: f64,
    pub delta_n: f64,
    pub gamma_n: C64,
    /// Factor by which a coherent label is rotated (`e^{-iλ}` or `e^{-λ}`).
    pub w: C64,
    /// Weight of keeping the label sign in the parity exponential.
    pub keep: C64,
    /// Weight of flipping it (`|a⟩ → |-a⟩`).
    pub flip: C64,
}

impl TrotterStep {
    pub fn new(params: &RabiParams, time_value: f64, n: usize, mode: Mode) -> Result<Self> {
        params.validate()?;
        if n == 0 {
            return Err(RabiError::invalid("slice count n must be >= 1"));
        }
        if !time_value.is_finite() {
            return Err(RabiError::invalid("time must be finite"));
        }
        let nf = n as f64;
        let lambda_n = params.omega * time_value / nf;
        let delta_n = -params.signed_splitting() * time_value / nf;
        let g = params.g * time_value / nf;
        Ok(match mode {
            Mode::Real => TrotterStep {
                n,
                mode,
                lambda_n,
                delta_n,
                gamma_n: C64::new(0.0, -g),
                w: C64::from_polar(1.0, -lambda_n),
                keep: C64::new(delta_n.cos(), 0.0),
                flip: C64::new(0.0, -delta_n.sin()),
            },
            Mode::Euclidean => TrotterStep {
                n,
                mode,
                lambda_n,
                delta_n,
                gamma_n: C64::new(-g, 0.0),
                w: C64::new((-lambda_n).exp(), 0.0),
                keep: C64::new(delta_n.cosh(), 0.0),
                flip: C64::new(-delta_n.sinh(), 0.0),
            },
        })
    }

    /// `e^{γ(b+b†)}|a⟩ = factor · |a + γ⟩` for normalized coherent states.
    /// In real time the factor is the phase `e^{γ Re a}`.
    #[inline]
    pub fn displace(&self, a: C64) -> (C64, C64) {
        let g = self.gamma_n;
        let shifted = a + g;
        let factor = match self.mode {
            Mode::Real => (g * a.re).exp(),
            Mode::Euclidean => {
                (g * a + g * g / 2.0 + (shifted.norm_sqr() - a.norm_sqr()) / 2.0).exp()
            }
        };
        (factor, shifted)
    }

    /// `w^{b†b}|a⟩ = factor · |w a⟩` for normalized coherent states; the
    /// factor is 1 in real time.
    #[inline]
    pub fn rotate(&self, a: C64) -> (C64, C64) {
        let rotated = a * self.w;
        let factor = match self.mode {
            Mode::Real => C64::new(1.0, 0.0),
            Mode::Euclidean => C64::new(((rotated.norm_sqr() - a.norm_sqr()) / 2.0).exp(), 0.0),
        };
        (factor, rotated)
    }

    /// Bond weight for keeping (`false`) or flipping (`true`) the sign.
    #[inline]
    pub fn bond(&self, flipped: bool) -> C64 {
        if flipped {
            self.flip
        } else {
            self.keep
        }
    }
}
