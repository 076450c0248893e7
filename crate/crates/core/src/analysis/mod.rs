//! Photon-counting analysis: time tags, histograms, windowed counts, the
//! efficiency and SNR estimators, the μ₁, noise-scaling and lifetime fits, and
//! a synthetic generator that produces data in the same formats.

mod estimators;
mod fit;
mod histogram;
mod montecarlo;
mod synth;
mod timetag;

use serde::{Deserialize, Serialize};

pub use estimators::{efficiency, efficiency_point, snr};
pub use fit::{
    fit_lifetime, fit_mu1, fit_noise_scaling, lifetime_point, mu1_point, nnls, noise_scaling_point, LifetimeFit,
    NoiseScalingFit,
};
pub use histogram::{histogram, histogram_span, integrate_windows, Histogram, Window, DEFAULT_BIN_WIDTH_PS};
pub use montecarlo::{MonteCarloConfig, Summary};
pub use synth::{
    generate_coherent_series, generate_lifetime_series, generate_noise_series, generate_timetags,
    read_coherent_series, read_lifetime_series, read_noise_series, write_coherent_series, write_lifetime_series,
    write_noise_series, CoherentPoint, CoherentTruth, LifetimePoint, LifetimeTruth, NoisePoint, NoiseTruth,
    TimeTagTruth,
};
pub use timetag::{read_timetags, write_timetags};

/// Detector configuration a click was recorded under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    /// Signal and control.
    Sc,
    /// Signal only.
    S,
    /// Control only.
    C,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Sc, Channel::S, Channel::C];

    pub fn label(self) -> &'static str {
        match self {
            Channel::Sc => "sc",
            Channel::S => "s",
            Channel::C => "c",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl std::str::FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sc" => Ok(Channel::Sc),
            "s" => Ok(Channel::S),
            "c" => Ok(Channel::C),
            other => Err(format!("unknown channel `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeTagRecord {
    pub trigger_id: u64,
    pub channel: Channel,
    pub time_ps: u64,
}

/// Counts in the read-in and read-out windows for each configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CountSet {
    pub c_sc_in: u64,
    pub c_sc_out: u64,
    pub c_s_in: u64,
    pub c_s_out: u64,
    pub c_c_in: u64,
    pub c_c_out: u64,
    pub n_triggers: u64,
}

impl CountSet {
    /// Read-out counts attributed to the retrieved signal.
    pub fn retrieved(&self) -> f64 {
        self.c_sc_out as f64 - self.c_c_out as f64 - self.c_s_out as f64
    }

    pub fn scaled(&self, k: u64) -> CountSet {
        CountSet {
            c_sc_in: self.c_sc_in * k,
            c_sc_out: self.c_sc_out * k,
            c_s_in: self.c_s_in * k,
            c_s_out: self.c_s_out * k,
            c_c_in: self.c_c_in * k,
            c_c_out: self.c_c_out * k,
            n_triggers: self.n_triggers * k,
        }
    }
}

/// A point estimate with Monte-Carlo uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub estimate: f64,
    pub std_error: f64,
    /// Row-major; 1×1 for scalar estimates.
    pub covariance: Vec<Vec<f64>>,
    pub percentile_16: f64,
    pub percentile_84: f64,
    pub n_mc_samples: usize,
    pub seed: u64,
}

impl FitResult {
    pub(crate) fn from_summary(estimate: f64, s: &Summary, seed: u64) -> Self {
        Self {
            estimate,
            std_error: s.std_dev,
            covariance: vec![vec![s.std_dev * s.std_dev]],
            percentile_16: s.p16,
            percentile_84: s.p84,
            n_mc_samples: s.n,
            seed,
        }
    }
}
