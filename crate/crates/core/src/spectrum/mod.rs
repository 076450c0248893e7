//! Ring-cavity spectra with an intracavity atomic vapour and a birefringent
//! element.
//!
//! Frequencies are offsets in GHz from the `|1⟩ ↔ |2⟩` (F = 4) line; the
//! absolute optical carrier only matters for how a length offset maps to
//! round-trip phase.

mod cavity;
mod resonance;
mod visibility;
pub mod voigt;

pub use cavity::{
    airy_transmission, compute_spectrum, transmission, BirefringentCavity, Channel, FrequencyGrid,
    Polarization, SpectrumResult,
};
pub use resonance::{find_triple_resonance, ResonanceSettings, SearchOutcome, TripleResonance};
pub use visibility::{
    calibrate_polarization_loss, calibrate_visibilities, closed_form_visibility, visibility, visibility_near,
    VisibilityCalibration,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::AtomicEnsemble;

/// Signal, control and anti-Stokes frequencies on the offset axis, GHz.
pub const OPERATING_FREQS_GHZ: [f64; 3] = [15.2, 24.4, 33.6];

/// Linewidth of the laser used to measure fringe visibilities, GHz.
pub const PROBE_FWHM_GHZ: f64 = 1.2;

const FWHM_TO_SIGMA: f64 = 0.424_660_900_144_009_5; // 1/(2√(2 ln 2))

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorptionLine {
    pub center_ghz: f64,
    pub weight: f64,
}

/// Inhomogeneously broadened absorption lines sharing one Voigt shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SusceptibilityModel {
    pub lines: Vec<AbsorptionLine>,
    pub doppler_fwhm_ghz: f64,
    pub homogeneous_fwhm_ghz: f64,
    /// Optical depth at the centre of a line of unit weight.
    pub peak_optical_depth: f64,
}

impl SusceptibilityModel {
    /// Two ground-state lines of the Cs D2 manifold with 80 % of the
    /// population pumped into F = 4.
    pub fn cs_reference() -> Self {
        Self {
            lines: vec![
                AbsorptionLine {
                    center_ghz: 0.0,
                    weight: 0.8,
                },
                AbsorptionLine {
                    center_ghz: 9.2,
                    weight: 0.2,
                },
            ],
            doppler_fwhm_ghz: 0.375,
            homogeneous_fwhm_ghz: 0.08,
            peak_optical_depth: 300.0,
        }
    }

    /// Lines at the two ground states of `atoms`, with the fraction
    /// `spin_polarization` in the lower one.
    pub fn from_ensemble(atoms: &AtomicEnsemble) -> Self {
        let p = atoms.spin_polarization;
        Self {
            lines: vec![
                AbsorptionLine {
                    center_ghz: 0.0,
                    weight: p,
                },
                AbsorptionLine {
                    center_ghz: atoms.hyperfine_splitting_ghz,
                    weight: 1.0 - p,
                },
            ],
            doppler_fwhm_ghz: atoms.doppler_fwhm_ghz,
            homogeneous_fwhm_ghz: atoms.pressure_fwhm_ghz,
            peak_optical_depth: atoms.optical_depth,
        }
    }

    /// No atoms.
    pub fn vacuum() -> Self {
        Self {
            lines: Vec::new(),
            doppler_fwhm_ghz: 0.375,
            homogeneous_fwhm_ghz: 0.08,
            peak_optical_depth: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.doppler_fwhm_ghz > 0.0 && self.homogeneous_fwhm_ghz > 0.0) {
            return Err(Error::domain("line widths must be positive"));
        }
        if !(self.peak_optical_depth.is_finite() && self.peak_optical_depth >= 0.0) {
            return Err(Error::domain("peak optical depth must be non-negative"));
        }
        if self.lines.iter().any(|l| !(l.weight >= 0.0) || !l.center_ghz.is_finite()) {
            return Err(Error::domain("line weights must be non-negative"));
        }
        let total: f64 = self.lines.iter().map(|l| l.weight).sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::domain(format!("line weights sum to {total} > 1")));
        }
        Ok(())
    }

    /// Complex susceptibility at offset `nu`, scaled so that its imaginary
    /// part is the single-pass (intensity) optical depth and its real part the
    /// matching dispersive response.
    pub fn susceptibility(&self, nu: f64) -> Complex64 {
        if self.peak_optical_depth == 0.0 || self.lines.is_empty() {
            return Complex64::new(0.0, 0.0);
        }
        let scale = std::f64::consts::SQRT_2 * self.doppler_fwhm_ghz * FWHM_TO_SIGMA;
        let y = 0.5 * self.homogeneous_fwhm_ghz / scale;
        let peak = voigt::faddeeva(Complex64::new(0.0, y)).re;
        self.lines
            .iter()
            .map(|line| {
                let g = voigt::faddeeva(Complex64::new((nu - line.center_ghz) / scale, y)) / peak;
                Complex64::new(g.im, g.re) * (line.weight * self.peak_optical_depth)
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_line(doppler: f64, homogeneous: f64) -> SusceptibilityModel {
        SusceptibilityModel {
            lines: vec![AbsorptionLine {
                center_ghz: 2.0,
                weight: 1.0,
            }],
            doppler_fwhm_ghz: doppler,
            homogeneous_fwhm_ghz: homogeneous,
            peak_optical_depth: 10.0,
        }
    }

    #[test]
    fn reference_ensemble_gives_reference_medium() {
        let m = SusceptibilityModel::from_ensemble(&AtomicEnsemble::cs_reference());
        let r = SusceptibilityModel::cs_reference();
        for (a, b) in m.lines.iter().zip(&r.lines) {
            assert_eq!(a.center_ghz, b.center_ghz);
            assert!((a.weight - b.weight).abs() < 1e-15);
        }
        assert_eq!((m.doppler_fwhm_ghz, m.homogeneous_fwhm_ghz), (r.doppler_fwhm_ghz, r.homogeneous_fwhm_ghz));
        assert_eq!(m.peak_optical_depth, r.peak_optical_depth);
    }

    #[test]
    fn lorentzian_limit() {
        let m = single_line(1e-7, 0.08);
        let half = 0.04;
        for &det in &[-3.0, -0.5, -0.04, 0.0, 0.01, 0.1, 1.0, 25.0] {
            let chi = m.susceptibility(2.0 + det);
            // (Γ/2)/(Γ/2 − iΔ), absorptive part in the imaginary slot
            let l = Complex64::new(half, 0.0) / Complex64::new(half, -det);
            let expect = Complex64::new(l.im, l.re) * 10.0;
            assert!((chi - expect).norm() / expect.norm() < 1e-6, "Δ = {det}");
        }
    }

    #[test]
    fn gaussian_limit() {
        let m = single_line(0.375, 1e-9);
        let sigma = 0.375 * FWHM_TO_SIGMA;
        for &det in &[0.0, 0.05, 0.1, 0.2, 0.3] {
            let chi = m.susceptibility(2.0 + det);
            let expect = 10.0 * (-det * det / (2.0 * sigma * sigma)).exp();
            assert!((chi.im - expect).abs() / expect < 1e-4, "Δ = {det}");
        }
    }

    #[test]
    fn absorptive_and_dispersive_symmetry() {
        let m = single_line(0.375, 0.08);
        for &det in &[0.01, 0.2, 1.0, 7.0, 40.0] {
            let a = m.susceptibility(2.0 + det);
            let b = m.susceptibility(2.0 - det);
            assert!(a.im >= 0.0 && b.im >= 0.0);
            assert!((a.im - b.im).abs() <= 1e-10 * a.im.abs().max(1e-300));
            assert!((a.re + b.re).abs() <= 1e-10 * a.re.abs().max(1e-300));
        }
    }

    #[test]
    fn far_off_resonance_decay() {
        let m = SusceptibilityModel::cs_reference();
        let on = m.susceptibility(0.0).norm();
        let widths = m.doppler_fwhm_ghz + m.homogeneous_fwhm_ghz;
        let far = m.susceptibility(9.2 + 1e3 * widths * 1.01).norm();
        assert!(far < 1e-3 * on);
    }

    #[test]
    fn vacuum_is_zero() {
        assert_eq!(SusceptibilityModel::vacuum().susceptibility(3.0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn weights_validated() {
        let mut m = SusceptibilityModel::cs_reference();
        m.lines[0].weight = 0.9;
        assert!(m.validate().is_err());
    }
}
