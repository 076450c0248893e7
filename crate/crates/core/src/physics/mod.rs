//! Closed-form forward model of the cavity-enhanced Raman memory.
//!
//! Everything here is a pure function of value types. The model works with the
//! dimensionless Stokes and anti-Stokes couplings `C_s`, `C_a` rather than the
//! (unnormalised) interaction Hamiltonians.

mod coupling;
mod response;
mod sweep;

pub use coupling::{
    anti_stokes_coupling, cooperativity, energy_reduction, fsr_design, stokes_coupling,
    suppression_from_losses, suppression_from_visibility, CavityDesign,
};
pub use response::{branch_mismatch, evaluate_response, memory_response, MemoryResponse, ResponseInputs};
pub use sweep::{
    efficiency_energy_sweep, interior_maxima, metrics, DepthChoice, MemoryMetrics, ModelParams,
    SuppressionRoute, SweepPoint,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which width the quoted linewidth `γ` stands for when it enters `C_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LinewidthConvention {
    /// Use the quoted value as is.
    #[default]
    Fwhm,
    /// Use half the quoted value.
    Hwhm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomicEnsemble {
    pub hyperfine_splitting_ghz: f64,
    /// Resonant single-pass optical depth `d`.
    pub optical_depth: f64,
    /// Pressure-broadened linewidth `γ`, quoted as a FWHM.
    pub linewidth_ghz: f64,
    pub doppler_fwhm_ghz: f64,
    pub pressure_fwhm_ghz: f64,
    pub spin_polarization: f64,
    #[serde(default)]
    pub linewidth_convention: LinewidthConvention,
}

impl AtomicEnsemble {
    /// Warm Cs with 10 Torr Ne buffer gas, as characterised in the reference experiment.
    pub fn cs_reference() -> Self {
        Self {
            hyperfine_splitting_ghz: 9.2,
            optical_depth: 300.0,
            linewidth_ghz: 0.25,
            doppler_fwhm_ghz: 0.375,
            pressure_fwhm_ghz: 0.08,
            spin_polarization: 0.8,
            linewidth_convention: LinewidthConvention::Fwhm,
        }
    }

    /// The `γ` that enters the Stokes coupling under the selected convention.
    pub fn gamma(&self) -> f64 {
        match self.linewidth_convention {
            LinewidthConvention::Fwhm => self.linewidth_ghz,
            LinewidthConvention::Hwhm => 0.5 * self.linewidth_ghz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hyperfine_splitting_ghz", self.hyperfine_splitting_ghz),
            ("linewidth_ghz", self.linewidth_ghz),
            ("doppler_fwhm_ghz", self.doppler_fwhm_ghz),
            ("pressure_fwhm_ghz", self.pressure_fwhm_ghz),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.optical_depth.is_finite() && self.optical_depth >= 0.0) {
            return Err(Error::domain(format!(
                "optical_depth must be non-negative, got {}",
                self.optical_depth
            )));
        }
        if !(0.0..=1.0).contains(&self.spin_polarization) {
            return Err(Error::domain(format!(
                "spin_polarization must lie in [0, 1], got {}",
                self.spin_polarization
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlPulse {
    pub energy_nj: f64,
    pub bandwidth_ghz: f64,
    /// Stokes detuning `Δ_s`.
    pub detuning_ghz: f64,
    /// Conversion from pulse energy to the pulse area `W`, GHz per nJ.
    pub w_per_nj: f64,
}

impl ControlPulse {
    pub fn reference(energy_nj: f64) -> Self {
        Self {
            energy_nj,
            bandwidth_ghz: 1.2,
            detuning_ghz: 15.2,
            w_per_nj: 110.0,
        }
    }

    /// Pulse area `W = k_W · 𝓔`, GHz.
    pub fn w(&self) -> f64 {
        self.w_per_nj * self.energy_nj
    }

    pub fn with_energy(&self, energy_nj: f64) -> Self {
        Self {
            energy_nj,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.energy_nj.is_finite() && self.energy_nj >= 0.0) {
            return Err(Error::domain(format!(
                "pulse energy must be non-negative, got {}",
                self.energy_nj
            )));
        }
        if !(self.detuning_ghz.is_finite() && self.detuning_ghz > 0.0) {
            return Err(Error::domain(format!(
                "detuning must be positive (on-resonance operation is not modelled), got {}",
                self.detuning_ghz
            )));
        }
        if !(self.w_per_nj.is_finite() && self.w_per_nj > 0.0) {
            return Err(Error::domain(format!(
                "w_per_nj must be positive, got {}",
                self.w_per_nj
            )));
        }
        if !(self.bandwidth_ghz.is_finite() && self.bandwidth_ghz >= 0.0) {
            return Err(Error::domain(format!(
                "bandwidth must be non-negative, got {}",
                self.bandwidth_ghz
            )));
        }
        Ok(())
    }
}

/// Mirror and round-trip parameters of the memory cavity.
///
/// `loss_*` are the round-trip amplitude factors `μ` of the intra-cavity
/// Stokes, anti-Stokes and control fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityOptics {
    pub r1: f64,
    pub r2: f64,
    pub loss_signal: f64,
    pub loss_antistokes: f64,
    pub loss_control: f64,
    pub roundtrip_length_mm: f64,
    pub order: u32,
    pub finesse_signal: f64,
    pub finesse_control: f64,
}

/// Largest tolerated mismatch between the two coupling-mirror reflectivities.
pub const REFLECTIVITY_MATCH_TOL: f64 = 1e-6;

impl CavityOptics {
    pub fn reference() -> Self {
        Self {
            r1: 0.86,
            r2: 0.86,
            loss_signal: 0.6,
            loss_antistokes: 0.6,
            loss_control: 0.4,
            roundtrip_length_mm: 40.733,
            order: 2,
            finesse_signal: 7.0,
            finesse_control: 4.0,
        }
    }

    /// The common mirror reflectivity `r = r1 = r2`.
    pub fn reflectivity(&self) -> Result<f64> {
        if (self.r1 - self.r2).abs() > REFLECTIVITY_MATCH_TOL {
            return Err(Error::domain(format!(
                "model assumes r1 = r2, got r1 = {} and r2 = {}",
                self.r1, self.r2
            )));
        }
        Ok(self.r1)
    }

    /// On-resonance amplitude transmission of the signal, `χ = (1 − r²)/(1 − μ_s)`.
    pub fn signal_transmission(&self) -> Result<f64> {
        let r = self.reflectivity()?;
        if self.loss_signal >= 1.0 {
            return Err(Error::domain("loss_signal must be < 1"));
        }
        Ok((1.0 - r * r) / (1.0 - self.loss_signal))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("r1", self.r1), ("r2", self.r2)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::domain(format!("{name} must lie in [0, 1], got {r}")));
            }
        }
        for (name, mu) in [
            ("loss_signal", self.loss_signal),
            ("loss_antistokes", self.loss_antistokes),
            ("loss_control", self.loss_control),
        ] {
            if !(0.0..1.0).contains(&mu) {
                return Err(Error::domain(format!("{name} must lie in [0, 1), got {mu}")));
            }
        }
        if !(self.roundtrip_length_mm.is_finite() && self.roundtrip_length_mm > 0.0) {
            return Err(Error::domain("roundtrip_length_mm must be positive"));
        }
        if !(self.finesse_signal > 0.0 && self.finesse_control > 0.0) {
            return Err(Error::domain("finesse values must be positive"));
        }
        Ok(())
    }
}

/// Derived coupling strengths for one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    pub c_s: f64,
    pub c_a: f64,
    /// Anti-Stokes detuning `Δ_a = Δ_s + Δ_HF`.
    pub delta_a_ghz: f64,
    /// Noise suppression factor `x`.
    pub x: f64,
    pub cooperativity: f64,
}
