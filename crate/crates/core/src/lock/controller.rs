use serde::{Deserialize, Serialize};

use super::quantize;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub kp: f64,
    /// Integral gain, 1/s.
    pub ki: f64,
    /// Derivative gain, s.
    pub kd: f64,
    /// Full span of the fast output, V. Corresponds to one signal wavelength
    /// of cavity length.
    pub fast_output_range_v: f64,
    pub slow_step_v: f64,
    pub handoff_fraction: f64,
    pub fast_rate_hz: f64,
    pub slow_rate_hz: f64,
    pub dac_bits: u32,
}

impl ControllerConfig {
    /// Gains tuned for the reference plant (852 nm over the fast span, 1 V
    /// error-signal amplitude at 632.8 nm period). Closed-loop bandwidth is
    /// about 70 Hz.
    pub fn reference() -> Self {
        Self {
            kp: 0.3,
            ki: 500.0,
            kd: 0.0,
            fast_output_range_v: 10.0,
            slow_step_v: 0.5,
            handoff_fraction: 0.9,
            fast_rate_hz: 10_000.0,
            slow_rate_hz: 10.0,
            dac_bits: 12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.handoff_fraction > 0.0 && self.handoff_fraction < 1.0) {
            return Err(Error::domain("handoff_fraction must lie in (0, 1)"));
        }
        if !(self.fast_rate_hz > 0.0 && self.slow_rate_hz > 0.0) {
            return Err(Error::domain("controller rates must be positive"));
        }
        if !(self.fast_rate_hz > self.slow_rate_hz) {
            return Err(Error::domain("fast rate must exceed slow rate"));
        }
        if !(self.fast_output_range_v > 0.0 && self.slow_step_v > 0.0) {
            return Err(Error::domain("fast range and slow step must be positive"));
        }
        if !(1..=31).contains(&self.dac_bits) {
            return Err(Error::domain("dac_bits must lie in 1..=31"));
        }
        if ![self.kp, self.ki, self.kd].iter().all(|g| g.is_finite()) {
            return Err(Error::domain("PID gains must be finite"));
        }
        Ok(())
    }

    /// Fast steps per slow tick.
    pub fn slow_period_steps(&self) -> u64 {
        (self.fast_rate_hz / self.slow_rate_hz).round().max(1.0) as u64
    }
}

/// Fast PID plus slow offset accumulator.
#[derive(Debug, Clone)]
pub struct DualRateController {
    config: ControllerConfig,
    /// Half of the slow output's travel, V.
    slow_limit_v: f64,
    integral: f64,
    prev_error: f64,
    fast_out: f64,
    slow_out: f64,
    steps: u64,
    slow_increments: u64,
    range_exhausted: bool,
}

impl DualRateController {
    pub fn new(config: ControllerConfig, actuator_range_v: f64) -> Result<Self> {
        config.validate()?;
        if !(actuator_range_v > 0.0) {
            return Err(Error::domain("actuator range must be positive"));
        }
        Ok(Self {
            config,
            slow_limit_v: 0.5 * actuator_range_v,
            integral: 0.0,
            prev_error: 0.0,
            fast_out: 0.0,
            slow_out: 0.0,
            steps: 0,
            slow_increments: 0,
            range_exhausted: false,
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    /// Advances one fast period and returns the DAC-quantised `(fast, slow)`
    /// outputs.
    pub fn step(&mut self, error_v: f64, dt: f64) -> (f64, f64) {
        debug_assert!(dt > 0.0);
        let cfg = &self.config;
        let half = 0.5 * cfg.fast_output_range_v;

        self.integral = (self.integral + cfg.ki * error_v * dt).clamp(-half, half);
        let derivative = (error_v - self.prev_error) / dt;
        self.prev_error = error_v;
        let raw = cfg.kp * error_v + self.integral + cfg.kd * derivative;
        self.fast_out = quantize(raw.clamp(-half, half), half, cfg.dac_bits);

        self.steps += 1;
        if self.steps.is_multiple_of(cfg.slow_period_steps())
            && self.fast_out.abs() >= cfg.handoff_fraction * half
        {
            let dir = self.fast_out.signum();
            let wanted = self.slow_out + dir * cfg.slow_step_v;
            let next = quantize(
                wanted.clamp(-self.slow_limit_v, self.slow_limit_v),
                self.slow_limit_v,
                cfg.dac_bits,
            );
            if next != self.slow_out {
                // bumpless hand-off: the fast integrator gives up what the offset takes over
                let moved = next - self.slow_out;
                self.integral = (self.integral - moved).clamp(-half, half);
                self.slow_out = next;
                self.slow_increments += 1;
            }
            if (wanted - next).abs() > 0.5 * cfg.slow_step_v {
                self.range_exhausted = true;
            }
        }
        (self.fast_out, self.slow_out)
    }

    pub fn outputs(&self) -> (f64, f64) {
        (self.fast_out, self.slow_out)
    }

    pub fn slow_increments(&self) -> u64 {
        self.slow_increments
    }

    pub fn range_exhausted(&self) -> bool {
        self.range_exhausted
    }
}
