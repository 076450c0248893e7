use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{error_signal, ControllerConfig, DualRateController, ErrorSignalModel};
use crate::error::{Error, Result};

/// Cavity length disturbance and piezo actuator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantState {
    /// Initial length error, nm.
    pub length_error_nm: f64,
    pub drift_rate_nm_per_s: f64,
    pub random_walk_sigma_nm: f64,
    pub actuator_gain_nm_per_v: f64,
    pub actuator_range_v: f64,
    /// Sudden length change applied at `step_time_s`.
    #[serde(default)]
    pub step_nm: f64,
    #[serde(default)]
    pub step_time_s: f64,
}

impl PlantState {
    /// Quiet plant whose fast span equals one 852 nm wavelength.
    pub fn reference(config: &ControllerConfig) -> Self {
        Self {
            length_error_nm: 0.0,
            drift_rate_nm_per_s: 0.0,
            random_walk_sigma_nm: 0.0,
            actuator_gain_nm_per_v: crate::units::SIGNAL_WAVELENGTH_NM / config.fast_output_range_v,
            actuator_range_v: 150.0,
            step_nm: 0.0,
            step_time_s: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.actuator_gain_nm_per_v == 0.0 || !self.actuator_gain_nm_per_v.is_finite() {
            return Err(Error::domain("actuator gain must be finite and non-zero"));
        }
        if !(self.actuator_range_v > 0.0) {
            return Err(Error::domain("actuator range must be positive"));
        }
        if !(self.random_walk_sigma_nm >= 0.0) {
            return Err(Error::domain("random-walk sigma must be non-negative"));
        }
        if ![self.length_error_nm, self.drift_rate_nm_per_s, self.step_nm, self.step_time_s]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::domain("plant parameters must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t_s: f64,
    pub length_error_nm: f64,
    pub fast_v: f64,
    pub slow_v: f64,
    pub error_signal_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockMetrics {
    /// RMS length error after acquisition, nm.
    pub rms_error_nm: f64,
    pub max_error_nm: f64,
    pub slow_increments: u64,
    /// Acquired, and never left the quarter-fringe capture region afterwards.
    pub lock_retained: bool,
    /// Steps from acquisition until the lock was lost (or the run ended).
    pub retained_steps: u64,
    /// The slow offset was asked to move past the actuator range.
    pub range_exhausted: bool,
    pub acquired_at_step: Option<u64>,
    pub adc_lsb_nm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub trajectory: Vec<TrajectoryPoint>,
    pub metrics: LockMetrics,
}

/// Runs the closed loop for `steps` fast periods. Deterministic in `seed`.
pub fn simulate(
    plant: &PlantState,
    model: &ErrorSignalModel,
    config: &ControllerConfig,
    steps: u64,
    seed: u64,
) -> Result<SimulationRun> {
    plant.validate()?;
    model.validate()?;
    if steps == 0 {
        return Err(Error::domain("simulation needs at least one step"));
    }
    let mut controller = DualRateController::new(config.clone(), plant.actuator_range_v)?;
    let dt = 1.0 / config.fast_rate_hz;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let walk = (plant.random_walk_sigma_nm > 0.0)
        .then(|| Normal::new(0.0, plant.random_walk_sigma_nm).unwrap());
    // feedback sign follows the actuator so the loop is negative for either polarity
    let polarity = plant.actuator_gain_nm_per_v.signum();
    let capture = model.period_nm / 4.0;

    let mut trajectory = Vec::with_capacity(steps as usize);
    let mut disturbance = plant.length_error_nm;
    let mut actuator_v = 0.0;
    let mut acquired_at = None;
    let mut lost_at = None;
    let (mut sum_sq, mut max_abs, mut n_window) = (0.0, 0.0f64, 0u64);

    for k in 0..steps {
        let t = k as f64 * dt;
        if k > 0 {
            disturbance += plant.drift_rate_nm_per_s * dt;
            if let Some(w) = &walk {
                disturbance += w.sample(&mut rng);
            }
        }
        let step = if plant.step_nm != 0.0 && t >= plant.step_time_s {
            plant.step_nm
        } else {
            0.0
        };
        let length_error = disturbance + step - plant.actuator_gain_nm_per_v * actuator_v;
        let e = error_signal(model, length_error, &mut rng);
        let (fast, slow) = controller.step(polarity * e, dt);
        actuator_v = fast + slow;

        if acquired_at.is_none() && length_error.abs() < capture {
            acquired_at = Some(k);
        }
        if acquired_at.is_some() {
            if lost_at.is_none() && length_error.abs() >= capture {
                lost_at = Some(k);
            }
            sum_sq += length_error * length_error;
            max_abs = max_abs.max(length_error.abs());
            n_window += 1;
        }
        trajectory.push(TrajectoryPoint {
            t_s: t,
            length_error_nm: length_error,
            fast_v: fast,
            slow_v: slow,
            error_signal_v: e,
        });
    }

    let metrics = LockMetrics {
        rms_error_nm: if n_window > 0 { (sum_sq / n_window as f64).sqrt() } else { f64::NAN },
        max_error_nm: if n_window > 0 { max_abs } else { f64::NAN },
        slow_increments: controller.slow_increments(),
        lock_retained: acquired_at.is_some() && lost_at.is_none(),
        retained_steps: match (acquired_at, lost_at) {
            (Some(a), Some(l)) => l - a,
            (Some(a), None) => steps - a,
            _ => 0,
        },
        range_exhausted: controller.range_exhausted(),
        acquired_at_step: acquired_at,
        adc_lsb_nm: model.lsb_length_nm(),
    };
    Ok(SimulationRun { trajectory, metrics })
}

/// Length change of one fast-output DAC code.
pub fn actuator_lsb_nm(plant: &PlantState, config: &ControllerConfig) -> f64 {
    plant.actuator_gain_nm_per_v.abs() * config.fast_output_range_v / 2f64.powi(config.dac_bits as i32)
}

/// First step at or after `from` where `|length error| < threshold_nm`.
pub fn reacquisition_step(trajectory: &[TrajectoryPoint], from: usize, threshold_nm: f64) -> Option<usize> {
    trajectory
        .iter()
        .enumerate()
        .skip(from)
        .find(|(_, p)| p.length_error_nm.abs() < threshold_nm)
        .map(|(i, _)| i)
}

/// CSV with columns `t_s, length_error_nm, fast_v, slow_v, error_signal_v`.
pub fn write_trajectory_csv<W: std::io::Write>(trajectory: &[TrajectoryPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_s", "length_error_nm", "fast_v", "slow_v", "error_signal_v"])?;
    for p in trajectory {
        w.write_record(&[
            format!("{:.6e}", p.t_s),
            format!("{:.6e}", p.length_error_nm),
            format!("{:.6e}", p.fast_v),
            format!("{:.6e}", p.slow_v),
            format!("{:.6e}", p.error_signal_v),
        ])?;
    }
    w.flush()?;
    Ok(())
}
