use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CavityOptics, ControlPulse, Couplings};
use crate::error::{finite, Error, Result};

/// Below this magnitude the removable singularities at `f = 0` (and `ζ = 0`)
/// are evaluated from their Taylor series.
pub const SERIES_THRESHOLD: f64 = 1e-4;

/// Everything the closed-form response needs, already reduced to
/// dimensionless numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseInputs {
    pub c_s: f64,
    pub c_a: f64,
    pub x: f64,
    /// AC-Stark phase `W/Δ_s`.
    pub stark_s: f64,
    /// AC-Stark phase `W/Δ_a`.
    pub stark_a: f64,
    /// Signal amplitude transmission `χ`.
    pub chi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryResponse {
    pub f: Complex64,
    pub zeta: f64,
    /// `(1 − e^{−ζ})/ζ`.
    pub gain_integral: f64,
    pub kappa: Complex64,
    pub chi: f64,
    pub eta_tot: f64,
    pub n_noise: f64,
}

/// Evaluates the response for a set of couplings, a control pulse and the
/// cavity mirrors.
pub fn memory_response(
    couplings: &Couplings,
    pulse: &ControlPulse,
    optics: &CavityOptics,
) -> Result<MemoryResponse> {
    pulse.validate()?;
    if !(couplings.delta_a_ghz.is_finite() && couplings.delta_a_ghz > 0.0) {
        return Err(Error::domain("Δ_a must be positive"));
    }
    let w = pulse.w();
    evaluate_response(&ResponseInputs {
        c_s: couplings.c_s,
        c_a: couplings.c_a,
        x: couplings.x,
        stark_s: w / pulse.detuning_ghz,
        stark_a: w / couplings.delta_a_ghz,
        chi: optics.signal_transmission()?,
    })
}

pub fn evaluate_response(inp: &ResponseInputs) -> Result<MemoryResponse> {
    if !(inp.x >= 0.0 && inp.c_s >= 0.0 && inp.c_a >= 0.0) {
        return Err(Error::domain(
            "couplings and suppression factor must be non-negative",
        ));
    }
    let f = Complex64::new(
        -inp.c_s * inp.c_s - inp.c_a * inp.c_a * inp.x,
        inp.stark_s + inp.stark_a,
    );
    finite("f", f.re)?;
    finite("f", f.im)?;
    let zeta = finite("zeta", -2.0 * f.re)?;
    let gain = finite("gain_integral", gain_integral(zeta))?;
    let kappa = overlap(f, zeta, gain);
    finite("kappa", kappa.re)?;
    finite("kappa", kappa.im)?;

    let eta = finite("eta_tot", (inp.chi * inp.c_s * gain * kappa).norm_sqr())?;
    let amp = inp.chi * inp.c_s * inp.c_a * inp.x;
    let n_noise = finite("n_noise", amp * amp * noise_factor(zeta))?;

    Ok(MemoryResponse {
        f,
        zeta,
        gain_integral: gain,
        kappa,
        chi: inp.chi,
        eta_tot: eta,
        n_noise,
    })
}

/// `(1 − e^{−ζ})/ζ`.
pub(crate) fn gain_integral(zeta: f64) -> f64 {
    if zeta.abs() < SERIES_THRESHOLD {
        gain_series(zeta)
    } else {
        gain_direct(zeta)
    }
}

fn gain_series(zeta: f64) -> f64 {
    1.0 - zeta / 2.0 + zeta * zeta / 6.0 - zeta * zeta * zeta / 24.0
}

fn gain_direct(zeta: f64) -> f64 {
    -(-zeta).exp_m1() / zeta
}

/// `(1 − e^{−ζ}·E)/ζ`, the integrated noise emission.
pub(crate) fn noise_factor(zeta: f64) -> f64 {
    if zeta.abs() < SERIES_THRESHOLD {
        noise_series(zeta)
    } else {
        noise_direct(zeta)
    }
}

fn noise_series(zeta: f64) -> f64 {
    1.5 - 7.0 / 6.0 * zeta + 5.0 / 8.0 * zeta * zeta - 31.0 / 120.0 * zeta * zeta * zeta
}

fn noise_direct(zeta: f64) -> f64 {
    (1.0 - (-zeta).exp() * gain_direct(zeta)) / zeta
}

/// `κ = (e^ζ E)^{−1/2} (1 − e^{−f})/f`.
///
/// Written as `E^{−1/2} (e^{−ζ/2} − e^{−i Im f})/f` so that large `ζ` does
/// not overflow.
pub(crate) fn overlap(f: Complex64, zeta: f64, gain: f64) -> Complex64 {
    if f.norm() < SERIES_THRESHOLD {
        overlap_series(f, zeta, gain)
    } else {
        overlap_direct(f, zeta, gain)
    }
}

fn overlap_series(f: Complex64, zeta: f64, gain: f64) -> Complex64 {
    let series = Complex64::new(1.0, 0.0) - f / 2.0 + f * f / 6.0 - f * f * f / 24.0;
    series * ((-zeta / 2.0).exp() / gain.sqrt())
}

fn overlap_direct(f: Complex64, zeta: f64, gain: f64) -> Complex64 {
    let phase = Complex64::from_polar(1.0, -f.im);
    (Complex64::new((-zeta / 2.0).exp(), 0.0) - phase) / f / gain.sqrt()
}

/// Largest relative difference between the series and direct forms of `κ`
/// and `E` at `f ≠ 0` (with `ζ = −2 Re f`). Both forms are evaluated
/// regardless of `|f|`.
///
/// The noise factor is left out: its direct form cancels catastrophically as
/// `ζ → 0` even when `|f|` is not small.
pub fn branch_mismatch(f: Complex64) -> f64 {
    let zeta = -2.0 * f.re;
    let (gain, e_rel) = if zeta == 0.0 {
        (1.0, 0.0)
    } else {
        let g = gain_direct(zeta);
        (g, (gain_series(zeta) - g).abs() / g)
    };
    let kd = overlap_direct(f, zeta, gain);
    e_rel.max((overlap_series(f, zeta, gain) - kd).norm() / kd.norm())
}
