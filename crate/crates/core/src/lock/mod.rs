//! Discrete-time simulation of the polarisation-analysis cavity-length lock.
//!
//! The error signal is a quantised sinusoid in the length error. A fast
//! positional PID spans one signal wavelength of actuator travel; a slow
//! offset steps whenever the PID output nears the edge of its range. The two
//! outputs go through separate DACs and are summed onto the piezo.

mod controller;
mod sim;

pub use controller::{ControllerConfig, DualRateController};
pub use sim::{
    actuator_lsb_nm, reacquisition_step, simulate, write_trajectory_csv, LockMetrics, PlantState, SimulationRun,
    TrajectoryPoint,
};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::HENE_WAVELENGTH_NM;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorSignalModel {
    pub amplitude_v: f64,
    /// Length period of the error signal (lock-laser wavelength), nm.
    pub period_nm: f64,
    pub noise_sigma_v: f64,
    pub adc_bits: u32,
}

impl Default for ErrorSignalModel {
    fn default() -> Self {
        Self {
            amplitude_v: 1.0,
            period_nm: HENE_WAVELENGTH_NM,
            noise_sigma_v: 0.0,
            adc_bits: 12,
        }
    }
}

impl ErrorSignalModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.period_nm > 0.0 && self.amplitude_v > 0.0) {
            return Err(Error::domain("error-signal period and amplitude must be positive"));
        }
        if !(self.noise_sigma_v >= 0.0) {
            return Err(Error::domain("error-signal noise must be non-negative"));
        }
        if !(1..=31).contains(&self.adc_bits) {
            return Err(Error::domain(format!("adc_bits must lie in 1..=31, got {}", self.adc_bits)));
        }
        Ok(())
    }

    /// ADC step over the `±amplitude` full scale.
    pub fn lsb_v(&self) -> f64 {
        2.0 * self.amplitude_v / f64::from(1u32 << self.adc_bits)
    }

    /// One ADC step expressed as a length error at the lock point.
    pub fn lsb_length_nm(&self) -> f64 {
        self.lsb_v() * self.period_nm / (std::f64::consts::TAU * self.amplitude_v)
    }

    pub fn quantize(&self, v: f64) -> f64 {
        quantize(v, self.amplitude_v, self.adc_bits)
    }
}

/// Mid-tread quantiser with `2^bits` codes over `[−half_range, half_range)`.
pub(crate) fn quantize(v: f64, half_range: f64, bits: u32) -> f64 {
    let half_codes = f64::from(1u32 << (bits - 1));
    let step = half_range / half_codes;
    let code = (v / step).round().clamp(-half_codes, half_codes - 1.0);
    code * step
}

/// Digitised error signal for a given length error.
pub fn error_signal<R: Rng + ?Sized>(model: &ErrorSignalModel, length_error_nm: f64, rng: &mut R) -> f64 {
    let mut v = model.amplitude_v * (std::f64::consts::TAU * length_error_nm / model.period_nm).sin();
    if model.noise_sigma_v > 0.0 {
        // sigma checked non-negative in validate
        v += Normal::new(0.0, model.noise_sigma_v).unwrap().sample(rng);
    }
    model.quantize(v)
}
