use serde::{Deserialize, Serialize};

use super::coupling::{
    anti_stokes_coupling, cooperativity, stokes_coupling, suppression_from_losses,
    suppression_from_visibility,
};
use super::response::{memory_response, MemoryResponse};
use super::{AtomicEnsemble, CavityOptics, ControlPulse, Couplings};
use crate::error::{Error, Result};

/// Which optical depth enters the Stokes coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthChoice {
    /// Single-pass optical depth `d`.
    FreeSpace,
    /// Cavity cooperativity `𝒞 = r·d/(1 − μ_s)`.
    Cooperativity,
}

/// Where the noise suppression factor `x` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "snake_case")]
pub enum SuppressionRoute {
    /// From the round-trip factors `μ_s`, `μ_a` of the cavity.
    Losses,
    /// From a measured fringe visibility.
    Visibility { visibility: f64 },
}

/// Full parameter set of the forward model; the pulse energy is the sweep
/// variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub atoms: AtomicEnsemble,
    pub pulse: ControlPulse,
    pub optics: CavityOptics,
    pub depth: DepthChoice,
    pub suppression: SuppressionRoute,
}

impl ModelParams {
    pub fn reference() -> Self {
        Self {
            atoms: AtomicEnsemble::cs_reference(),
            pulse: ControlPulse::reference(1.5),
            optics: CavityOptics::reference(),
            depth: DepthChoice::Cooperativity,
            suppression: SuppressionRoute::Visibility { visibility: 0.9 },
        }
    }

    pub fn effective_depth(&self) -> Result<f64> {
        match self.depth {
            DepthChoice::FreeSpace => Ok(self.atoms.optical_depth),
            DepthChoice::Cooperativity => cooperativity(
                self.optics.reflectivity()?,
                self.atoms.optical_depth,
                self.optics.loss_signal,
            ),
        }
    }

    pub fn suppression_factor(&self) -> Result<f64> {
        match self.suppression {
            SuppressionRoute::Losses => {
                suppression_from_losses(self.optics.loss_signal, self.optics.loss_antistokes)
            }
            SuppressionRoute::Visibility { visibility } => suppression_from_visibility(visibility),
        }
    }

    /// Couplings at the pulse energy stored in `self.pulse`.
    pub fn couplings(&self) -> Result<Couplings> {
        self.couplings_for(&self.pulse)
    }

    fn couplings_for(&self, pulse: &ControlPulse) -> Result<Couplings> {
        let depth = self.effective_depth()?;
        let c_s = stokes_coupling(pulse, &self.atoms, depth)?;
        let (delta_a, c_a) =
            anti_stokes_coupling(c_s, pulse.detuning_ghz, self.atoms.hyperfine_splitting_ghz)?;
        Ok(Couplings {
            c_s,
            c_a,
            delta_a_ghz: delta_a,
            x: self.suppression_factor()?,
            cooperativity: cooperativity(
                self.optics.reflectivity()?,
                self.atoms.optical_depth,
                self.optics.loss_signal,
            )?,
        })
    }

    pub fn response_at(&self, energy_nj: f64) -> Result<MemoryResponse> {
        let pulse = self.pulse.with_energy(energy_nj);
        let couplings = self.couplings_for(&pulse)?;
        memory_response(&couplings, &pulse, &self.optics)
    }

    pub fn validate(&self) -> Result<()> {
        self.atoms.validate()?;
        self.pulse.validate()?;
        self.optics.validate()?;
        self.optics.reflectivity()?;
        self.suppression_factor()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub energy_nj: f64,
    pub eta_tot: f64,
    pub n_noise: f64,
}

/// Efficiency and noise floor over a strictly increasing grid of pulse energies.
pub fn efficiency_energy_sweep(params: &ModelParams, grid: &[f64]) -> Result<Vec<SweepPoint>> {
    if let Some(bad) = grid.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::domain(format!(
            "energy grid values must be finite and >= 0, got {bad}"
        )));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("energy grid must be strictly increasing"));
    }
    grid.iter()
        .map(|&e| {
            let r = params.response_at(e)?;
            Ok(SweepPoint {
                energy_nj: e,
                eta_tot: r.eta_tot,
                n_noise: r.n_noise,
            })
        })
        .collect()
}

/// Indices of strict interior local maxima of `values`.
pub fn interior_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] > values[i + 1])
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryMetrics {
    pub lifetime_ns: f64,
    /// Time-bandwidth product `B = τ·δ`.
    pub time_bandwidth: f64,
    /// Noise photons per unit efficiency, `μ₁ = ⟨n_noise⟩/η_tot`.
    pub mu1: f64,
}

pub fn metrics(
    lifetime_ns: f64,
    bandwidth_ghz: f64,
    mean_noise: f64,
    eta_tot: f64,
) -> Result<MemoryMetrics> {
    for (name, v) in [
        ("lifetime", lifetime_ns),
        ("bandwidth", bandwidth_ghz),
        ("noise", mean_noise),
        ("efficiency", eta_tot),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::domain(format!("{name} must be non-negative, got {v}")));
        }
    }
    if eta_tot == 0.0 {
        return Err(Error::domain("μ₁ is undefined for zero efficiency"));
    }
    Ok(MemoryMetrics {
        lifetime_ns,
        time_bandwidth: lifetime_ns * bandwidth_ghz,
        mu1: mean_noise / eta_tot,
    })
}
