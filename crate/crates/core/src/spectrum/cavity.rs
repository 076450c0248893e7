use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SusceptibilityModel;
use crate::error::{Error, Result};
use crate::units::{CS_D2_GHZ, SPEED_OF_LIGHT_MM_GHZ, SPEED_OF_LIGHT_NM_GHZ};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Signal,
    Control,
    AntiStokes,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Signal, Channel::Control, Channel::AntiStokes];

    /// Signal and anti-Stokes share a polarisation; the control is orthogonal
    /// and picks up the birefringent phase.
    pub fn polarization(self) -> Polarization {
        match self {
            Channel::Signal | Channel::AntiStokes => Polarization::Signal,
            Channel::Control => Polarization::Control,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    Signal,
    Control,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirefringentCavity {
    pub r1: f64,
    pub r2: f64,
    /// Round-trip passive amplitude loss of the signal/anti-Stokes polarisation.
    pub loss_signal_pol: f64,
    /// Round-trip passive amplitude loss of the control polarisation.
    pub loss_control_pol: f64,
    pub roundtrip_length_mm: f64,
    /// Extra round-trip phase of the control polarisation.
    pub birefringent_phase_rad: f64,
    /// Fine length adjustment on top of `roundtrip_length_mm`.
    pub length_offset_nm: f64,
    /// Absolute optical frequency of the zero of the offset axis.
    pub carrier_ghz: f64,
}

impl BirefringentCavity {
    /// Second-order design cavity (FSR = 7.36 GHz) without passive loss.
    pub fn reference() -> Self {
        Self {
            r1: 0.86,
            r2: 0.86,
            loss_signal_pol: 0.0,
            loss_control_pol: 0.0,
            roundtrip_length_mm: SPEED_OF_LIGHT_MM_GHZ / 7.36,
            birefringent_phase_rad: 0.0,
            length_offset_nm: 0.0,
            carrier_ghz: CS_D2_GHZ,
        }
    }

    pub fn fsr_ghz(&self) -> f64 {
        SPEED_OF_LIGHT_MM_GHZ / self.total_length_mm()
    }

    fn total_length_mm(&self) -> f64 {
        self.roundtrip_length_mm + self.length_offset_nm * 1e-6
    }

    pub fn loss(&self, pol: Polarization) -> f64 {
        match pol {
            Polarization::Signal => self.loss_signal_pol,
            Polarization::Control => self.loss_control_pol,
        }
    }

    pub fn set_loss(&mut self, pol: Polarization, loss: f64) {
        match pol {
            Polarization::Signal => self.loss_signal_pol = loss,
            Polarization::Control => self.loss_control_pol = loss,
        }
    }

    /// Wavelength at offset `nu`, nm.
    pub fn wavelength_nm(&self, nu: f64) -> f64 {
        SPEED_OF_LIGHT_NM_GHZ / (self.carrier_ghz + nu)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("r1", self.r1), ("r2", self.r2)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::domain(format!("{name} must lie in [0, 1], got {r}")));
            }
        }
        for pol in [Polarization::Signal, Polarization::Control] {
            let l = self.loss(pol);
            if !(0.0..1.0).contains(&l) {
                return Err(Error::domain(format!(
                    "passive loss for {pol:?} must lie in [0, 1), got {l}"
                )));
            }
        }
        if !(self.roundtrip_length_mm > 0.0 && self.carrier_ghz > 0.0) {
            return Err(Error::domain("length and carrier frequency must be positive"));
        }
        if !(self.birefringent_phase_rad.is_finite() && self.length_offset_nm.is_finite()) {
            return Err(Error::domain("phase and length offset must be finite"));
        }
        Ok(())
    }

    /// Round-trip phase from propagation alone, wrapped to `[0, 2π)`.
    pub(crate) fn propagation_phase(&self, nu: f64, length_offset_nm: f64) -> f64 {
        // Split into coarse and fine parts so the large carrier term keeps its precision.
        // The carrier term is the same for every ν, so its rounding error cancels
        // between frequencies.
        let cycles_per_ghz = self.roundtrip_length_mm / SPEED_OF_LIGHT_MM_GHZ;
        let coarse = (self.carrier_ghz * cycles_per_ghz).rem_euclid(1.0) + nu * cycles_per_ghz;
        let fine = (self.carrier_ghz + nu) * length_offset_nm / SPEED_OF_LIGHT_NM_GHZ;
        TAU * (coarse + fine).rem_euclid(1.0)
    }
}

/// Everything about one field at one frequency that does not depend on the
/// length offset or the birefringent phase.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FieldResponse {
    /// `t1·t2·a`.
    pub numerator: f64,
    /// Round-trip amplitude factor `ρ`.
    pub rho: f64,
    /// Atomic phase plus the propagation phase at zero length offset.
    pub base_phase: f64,
    pub nu: f64,
    pub channel: Channel,
}

impl FieldResponse {
    pub fn new(
        cavity: &BirefringentCavity,
        model: &SusceptibilityModel,
        nu: f64,
        channel: Channel,
    ) -> Result<Self> {
        let chi = model.susceptibility(nu);
        let a = (1.0 - cavity.loss(channel.polarization())) * (-0.5 * chi.im).exp();
        let rho = cavity.r1 * cavity.r2 * a;
        if !(rho < 1.0) {
            return Err(Error::domain(format!(
                "round-trip gain {rho} >= 1 at {nu} GHz (lasing regime not modelled)"
            )));
        }
        let t1 = (1.0 - cavity.r1 * cavity.r1).sqrt();
        let t2 = (1.0 - cavity.r2 * cavity.r2).sqrt();
        Ok(Self {
            numerator: t1 * t2 * a,
            rho,
            base_phase: cavity.propagation_phase(nu, cavity.length_offset_nm) - 0.5 * chi.re,
            nu,
            channel,
        })
    }

    /// Transmission with an extra length offset and birefringent phase.
    pub fn transmission_with(
        &self,
        cavity: &BirefringentCavity,
        extra_length_nm: f64,
        birefringent_phase: f64,
    ) -> f64 {
        let mut theta = self.base_phase
            + TAU * (cavity.carrier_ghz + self.nu) * extra_length_nm / SPEED_OF_LIGHT_NM_GHZ;
        if self.channel == Channel::Control {
            theta += birefringent_phase;
        }
        airy_transmission(self.numerator, self.rho, theta)
    }

    /// Peak transmission at this frequency over all round-trip phases.
    pub fn peak(&self) -> f64 {
        (self.numerator / (1.0 - self.rho)).powi(2)
    }

    /// Minimum transmission over all round-trip phases.
    pub fn trough(&self) -> f64 {
        (self.numerator / (1.0 + self.rho)).powi(2)
    }
}

/// `|n/(1 − ρ e^{iθ})|²`.
pub fn airy_transmission(numerator: f64, rho: f64, theta: f64) -> f64 {
    let denom = Complex64::new(1.0, 0.0) - Complex64::from_polar(rho, theta);
    numerator * numerator / denom.norm_sqr()
}

/// Transmission of `channel` at frequency offset `nu`.
pub fn transmission(
    cavity: &BirefringentCavity,
    model: &SusceptibilityModel,
    nu: f64,
    channel: Channel,
) -> Result<f64> {
    if !nu.is_finite() {
        return Err(Error::domain("frequency must be finite"));
    }
    let field = FieldResponse::new(cavity, model, nu, channel)?;
    Ok(field.transmission_with(cavity, 0.0, cavity.birefringent_phase_rad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    pub start_ghz: f64,
    pub stop_ghz: f64,
    pub points: usize,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self {
            start_ghz: -5.0,
            stop_ghz: 32.0,
            points: 4096,
        }
    }
}

impl FrequencyGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points < 2 || !(self.stop_ghz > self.start_ghz) {
            return Err(Error::domain("frequency grid needs >= 2 points and stop > start"));
        }
        let step = (self.stop_ghz - self.start_ghz) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.start_ghz + step * i as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub frequency_ghz: Vec<f64>,
    pub signal: Vec<f64>,
    pub control: Vec<f64>,
    pub antistokes: Vec<f64>,
    /// Transmission maxima per channel (signal, control, anti-Stokes), GHz.
    pub resonance_centers: [Vec<f64>; 3],
    /// Mean fringe spacing over mean resonance FWHM, per channel.
    pub finesse: [Option<f64>; 3],
}

impl SpectrumResult {
    pub fn channel(&self, channel: Channel) -> &[f64] {
        match channel {
            Channel::Signal => &self.signal,
            Channel::Control => &self.control,
            Channel::AntiStokes => &self.antistokes,
        }
    }

    pub fn centers(&self, channel: Channel) -> &[f64] {
        &self.resonance_centers[channel_index(channel)]
    }

    pub fn finesse_of(&self, channel: Channel) -> Option<f64> {
        self.finesse[channel_index(channel)]
    }

    /// CSV with columns `frequency_ghz, transmission_signal, transmission_control, transmission_antistokes`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "frequency_ghz",
            "transmission_signal",
            "transmission_control",
            "transmission_antistokes",
        ])?;
        for i in 0..self.frequency_ghz.len() {
            w.write_record(&[
                format!("{:.6}", self.frequency_ghz[i]),
                format!("{:.9e}", self.signal[i]),
                format!("{:.9e}", self.control[i]),
                format!("{:.9e}", self.antistokes[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn channel_index(c: Channel) -> usize {
    match c {
        Channel::Signal => 0,
        Channel::Control => 1,
        Channel::AntiStokes => 2,
    }
}

pub fn compute_spectrum(
    cavity: &BirefringentCavity,
    model: &SusceptibilityModel,
    grid: &[f64],
) -> Result<SpectrumResult> {
    cavity.validate()?;
    model.validate()?;
    let mut columns: [Vec<f64>; 3] = Default::default();
    for channel in Channel::ALL {
        columns[channel_index(channel)] = grid
            .iter()
            .map(|&nu| transmission(cavity, model, nu, channel))
            .collect::<Result<_>>()?;
    }
    let centers = columns.clone().map(|col| peak_centers(grid, &col));
    let finesse = [0, 1, 2].map(|i| finesse_estimate(grid, &columns[i], &centers[i]));
    let [signal, control, antistokes] = columns;
    Ok(SpectrumResult {
        frequency_ghz: grid.to_vec(),
        signal,
        control,
        antistokes,
        resonance_centers: centers,
        finesse,
    })
}

/// Local maxima refined by a parabola through the three neighbouring samples.
pub(crate) fn peak_centers(grid: &[f64], t: &[f64]) -> Vec<f64> {
    (1..t.len().saturating_sub(1))
        .filter(|&i| t[i] > t[i - 1] && t[i] >= t[i + 1])
        .map(|i| {
            let (a, b, c) = (t[i - 1], t[i], t[i + 1]);
            let denom = a - 2.0 * b + c;
            let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            grid[i] + shift * (grid[i + 1] - grid[i - 1]) / 2.0
        })
        .collect()
}

fn finesse_estimate(grid: &[f64], t: &[f64], centers: &[f64]) -> Option<f64> {
    if centers.len() < 2 {
        return None;
    }
    let spacing = (centers[centers.len() - 1] - centers[0]) / (centers.len() - 1) as f64;
    let widths: Vec<f64> = centers.iter().filter_map(|&c| fwhm_around(grid, t, c)).collect();
    if widths.is_empty() {
        return None;
    }
    let mean = widths.iter().sum::<f64>() / widths.len() as f64;
    Some(spacing / mean)
}

fn fwhm_around(grid: &[f64], t: &[f64], center: f64) -> Option<f64> {
    let i = grid.partition_point(|&g| g < center).min(grid.len() - 1);
    let half = 0.5 * t[i];
    let mut lo = i;
    while lo > 0 && t[lo] > half {
        lo -= 1;
    }
    let mut hi = i;
    while hi + 1 < t.len() && t[hi] > half {
        hi += 1;
    }
    if t[lo] > half || t[hi] > half {
        return None;
    }
    let cross = |a: usize, b: usize| grid[a] + (half - t[a]) * (grid[b] - grid[a]) / (t[b] - t[a]);
    Some(cross(hi - 1, hi) - cross(lo, lo + 1))
}
