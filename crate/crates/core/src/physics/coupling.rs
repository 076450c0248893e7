use serde::{Deserialize, Serialize};

use super::{AtomicEnsemble, ControlPulse};
use crate::error::{finite, Error, Result};
use crate::units::SPEED_OF_LIGHT_MM_GHZ;

/// Stokes coupling `C_s = √(W·d_eff·γ)/Δ_s`.
///
/// `effective_depth` is the free-space optical depth or the cavity
/// cooperativity; the caller decides which picture applies.
pub fn stokes_coupling(
    pulse: &ControlPulse,
    atoms: &AtomicEnsemble,
    effective_depth: f64,
) -> Result<f64> {
    pulse.validate()?;
    if !(effective_depth.is_finite() && effective_depth >= 0.0) {
        return Err(Error::domain(format!(
            "effective depth must be non-negative, got {effective_depth}"
        )));
    }
    let c_s = (pulse.w() * effective_depth * atoms.gamma()).sqrt() / pulse.detuning_ghz;
    finite("C_s", c_s)
}

/// Returns `(Δ_a, C_a)` with `Δ_a = Δ_s + Δ_HF` and `C_a = C_s·Δ_s/Δ_a`.
pub fn anti_stokes_coupling(c_s: f64, delta_s: f64, delta_hf: f64) -> Result<(f64, f64)> {
    if !(delta_s.is_finite() && delta_s > 0.0) {
        return Err(Error::domain(format!("Δ_s must be positive, got {delta_s}")));
    }
    if !(delta_hf.is_finite() && delta_hf >= 0.0) {
        return Err(Error::domain(format!("Δ_HF must be non-negative, got {delta_hf}")));
    }
    if !(c_s.is_finite() && c_s >= 0.0) {
        return Err(Error::domain(format!("C_s must be non-negative, got {c_s}")));
    }
    let delta_a = delta_s + delta_hf;
    Ok((delta_a, c_s * delta_s / delta_a))
}

/// Noise suppression factor from the round-trip factors, `x = (1 − μ_s)/(1 + μ_a)`.
pub fn suppression_from_losses(mu_s: f64, mu_a: f64) -> Result<f64> {
    for (name, mu) in [("μ_s", mu_s), ("μ_a", mu_a)] {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::domain(format!("{name} must lie in [0, 1], got {mu}")));
        }
    }
    Ok((1.0 - mu_s) / (1.0 + mu_a))
}

/// Noise suppression factor from a fringe visibility, `x = √((1 − V)/(1 + V))`.
pub fn suppression_from_visibility(visibility: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::domain(format!(
            "visibility must lie in [0, 1], got {visibility}"
        )));
    }
    Ok(((1.0 - visibility) / (1.0 + visibility)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityDesign {
    pub order: i64,
    pub fsr_ghz: f64,
    pub roundtrip_length_mm: f64,
}

/// Cavity that puts the anti-Stokes field half a free spectral range away from
/// a resonance when the signal sits on one: `FSR_m = 4Δ_HF/(2m + 1)`.
pub fn fsr_design(delta_hf: f64, order: i64) -> Result<CavityDesign> {
    if order < 0 {
        return Err(Error::domain(format!("cavity order must be >= 0, got {order}")));
    }
    if !(delta_hf.is_finite() && delta_hf > 0.0) {
        return Err(Error::domain(format!("Δ_HF must be positive, got {delta_hf}")));
    }
    let fsr = 4.0 * delta_hf / (2 * order + 1) as f64;
    Ok(CavityDesign {
        order,
        fsr_ghz: fsr,
        roundtrip_length_mm: SPEED_OF_LIGHT_MM_GHZ / fsr,
    })
}

/// Cavity cooperativity `𝒞 = r·d/(1 − μ_s)`.
pub fn cooperativity(r: f64, optical_depth: f64, mu_s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::domain(format!("r must lie in [0, 1], got {r}")));
    }
    if !(0.0..1.0).contains(&mu_s) {
        return Err(Error::domain(format!("μ_s must lie in [0, 1), got {mu_s}")));
    }
    if !(optical_depth.is_finite() && optical_depth >= 0.0) {
        return Err(Error::domain("optical depth must be non-negative"));
    }
    Ok(r * optical_depth / (1.0 - mu_s))
}

/// Control energy reduction relative to free space, `F_s²·F_Ω²/π⁴`.
pub fn energy_reduction(finesse_signal: f64, finesse_control: f64) -> Result<f64> {
    if !(finesse_signal > 0.0 && finesse_control > 0.0) {
        return Err(Error::domain("finesse values must be positive"));
    }
    let pi2 = std::f64::consts::PI.powi(2);
    Ok((finesse_signal * finesse_signal / pi2) * (finesse_control * finesse_control / pi2))
}
