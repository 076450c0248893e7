//! Run configuration. One TOML document covers every subcommand; each section
//! falls back to the reference setup when absent, and unknown keys are
//! rejected at every level.

use std::path::Path;

use cavmem::analysis::{CoherentTruth, LifetimeTruth, NoiseTruth, TimeTagTruth, Window, DEFAULT_BIN_WIDTH_PS};
use cavmem::lock::{ControllerConfig, ErrorSignalModel, PlantState};
use cavmem::physics::ModelParams;
use cavmem::spectrum::{
    BirefringentCavity, FrequencyGrid, ResonanceSettings, SusceptibilityModel, OPERATING_FREQS_GHZ, PROBE_FWHM_GHZ,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Seeds every random stream of every command.
    pub seed: u64,
    pub model: ModelParams,
    pub design: DesignConfig,
    pub sweep: SweepConfig,
    pub spectrum: SpectrumConfig,
    pub resonance: ResonanceConfig,
    pub lock: LockConfig,
    pub synth: SynthConfig,
    pub analysis: AnalysisConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: ModelParams::reference(),
            design: DesignConfig::default(),
            sweep: SweepConfig::default(),
            spectrum: SpectrumConfig::default(),
            resonance: ResonanceConfig::default(),
            lock: LockConfig::default(),
            synth: SynthConfig::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

/// Inputs of the design summary that are not part of the forward model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    /// FSR table runs over orders `0..=max_order`.
    pub max_order: u32,
    /// Fringe visibility for the visibility route of the suppression factor.
    pub visibility: f64,
    pub lifetime_ns: f64,
    pub measured_efficiency: f64,
    /// Mean noise photons per pulse at the memory output.
    pub measured_noise_photons: f64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            max_order: 4,
            visibility: 0.9,
            lifetime_ns: 95.0,
            measured_efficiency: 0.095,
            measured_noise_photons: 0.015,
        }
    }
}

/// Pulse-energy grid of the efficiency sweep. `points = 1` evaluates `start_nj` alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub start_nj: f64,
    pub stop_nj: f64,
    pub points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            start_nj: 0.001,
            stop_nj: 3.0,
            points: 3000,
        }
    }
}

impl SweepConfig {
    pub fn energies(&self) -> CliResult<Vec<f64>> {
        if !(self.start_nj.is_finite() && self.start_nj >= 0.0) {
            return Err(CliError::Config("sweep.start_nj must be finite and >= 0".into()));
        }
        match self.points {
            0 => Err(CliError::Config("sweep.points must be >= 1".into())),
            1 => Ok(vec![self.start_nj]),
            n => {
                if !(self.stop_nj > self.start_nj && self.stop_nj.is_finite()) {
                    return Err(CliError::Config("sweep.stop_nj must exceed sweep.start_nj".into()));
                }
                let step = (self.stop_nj - self.start_nj) / (n - 1) as f64;
                Ok((0..n).map(|i| self.start_nj + step * i as f64).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub grid: FrequencyGrid,
    pub cavity: BirefringentCavity,
    /// Fill the cavity with the vapour described by `model.atoms`.
    pub with_atoms: bool,
    /// Signal, control and anti-Stokes offsets from the F = 4 line.
    pub operating_freqs_ghz: [f64; 3],
    pub probe_fwhm_ghz: f64,
    /// Fit the two polarisation losses to the target visibilities before
    /// computing the spectrum.
    pub calibrate: bool,
    pub target_visibility_signal: f64,
    pub target_visibility_control: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            grid: FrequencyGrid {
                start_ghz: -5.0,
                stop_ghz: 40.0,
                points: 9001,
            },
            cavity: BirefringentCavity::reference(),
            with_atoms: true,
            operating_freqs_ghz: OPERATING_FREQS_GHZ,
            probe_fwhm_ghz: PROBE_FWHM_GHZ,
            calibrate: true,
            target_visibility_signal: 0.86,
            target_visibility_control: 0.71,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResonanceConfig {
    pub settings: ResonanceSettings,
    /// Search with the vapour in the cavity rather than the empty cavity.
    pub with_atoms: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LockConfig {
    pub controller: ControllerConfig,
    pub plant: PlantState,
    pub error_signal: ErrorSignalModel,
    pub steps: u64,
    /// Keep every n-th trajectory point in the written output.
    pub trajectory_stride: usize,
}

impl Default for LockConfig {
    fn default() -> Self {
        let controller = ControllerConfig::reference();
        Self {
            plant: PlantState::reference(&controller),
            controller,
            error_signal: ErrorSignalModel::default(),
            steps: 100_000,
            trajectory_stride: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub coherent: CoherentTruth,
    pub noise: NoiseTruth,
    pub lifetime: LifetimeTruth,
    pub timetags: TimeTagTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Directory holding the input files; defaults to the output directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_dir: Option<String>,
    pub timetags_file: String,
    pub coherent_file: String,
    pub noise_file: String,
    pub lifetime_file: String,
    pub bin_width_ps: u64,
    pub origin_ps: u64,
    pub n_bins: usize,
    /// Half-open `[start, end)` windows around read-in and read-out.
    pub read_in_window_ps: [u64; 2],
    pub read_out_window_ps: [u64; 2],
    /// Triggers behind the time-tag file.
    pub n_triggers: u64,
    /// Pulse energy at which the quadratic noise component is quoted.
    pub energy_eval_nj: f64,
    pub mc_samples: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            input_dir: None,
            timetags_file: "timetags.csv".into(),
            coherent_file: "coherent_series.csv".into(),
            noise_file: "noise_series.csv".into(),
            lifetime_file: "lifetime_series.csv".into(),
            bin_width_ps: DEFAULT_BIN_WIDTH_PS,
            origin_ps: 0,
            n_bins: 400,
            read_in_window_ps: [3_750, 16_250],
            read_out_window_ps: [16_250, 28_750],
            n_triggers: 200_000,
            energy_eval_nj: 1.5,
            mc_samples: 10_000,
        }
    }
}

impl AnalysisConfig {
    pub fn windows(&self) -> CliResult<(Window, Window)> {
        let [a, b] = self.read_in_window_ps;
        let [c, d] = self.read_out_window_ps;
        Ok((Window::new(a, b)?, Window::new(c, d)?))
    }
}

impl SpectrumConfig {
    pub fn medium(&self, model: &ModelParams) -> SusceptibilityModel {
        if self.with_atoms {
            SusceptibilityModel::from_ensemble(&model.atoms)
        } else {
            SusceptibilityModel::vacuum()
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form (object keys sorted), hex encoded.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serialises to JSON");
        let bytes = serde_json::to_vec(&value).expect("JSON value serialises");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Re-checks every physical invariant; the same checks the library runs
    /// before computing, done up front so a bad config fails before any output.
    pub fn validate(&self) -> CliResult<()> {
        let ctx = |section: &'static str| move |e: cavmem::Error| CliError::Config(format!("[{section}] {e}"));
        self.model.validate().map_err(ctx("model"))?;

        let d = &self.design;
        if !(0.0..=1.0).contains(&d.visibility) {
            return Err(CliError::Config("[design] visibility must lie in [0, 1]".into()));
        }
        for (name, v) in [
            ("lifetime_ns", d.lifetime_ns),
            ("measured_efficiency", d.measured_efficiency),
            ("measured_noise_photons", d.measured_noise_photons),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::Config(format!("[design] {name} must be finite and >= 0")));
            }
        }
        self.sweep.energies()?;

        let s = &self.spectrum;
        s.grid.values().map_err(ctx("spectrum.grid"))?;
        s.cavity.validate().map_err(ctx("spectrum.cavity"))?;
        s.medium(&self.model).validate().map_err(ctx("spectrum"))?;
        let [ns, nc, na] = s.operating_freqs_ghz;
        if !(ns < nc && nc < na) {
            return Err(CliError::Config(
                "[spectrum] operating_freqs_ghz must be signal < control < anti-Stokes".into(),
            ));
        }
        if !(s.probe_fwhm_ghz >= 0.0 && s.probe_fwhm_ghz.is_finite()) {
            return Err(CliError::Config("[spectrum] probe_fwhm_ghz must be >= 0".into()));
        }
        for (name, v) in [
            ("target_visibility_signal", s.target_visibility_signal),
            ("target_visibility_control", s.target_visibility_control),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CliError::Config(format!("[spectrum] {name} must lie in [0, 1]")));
            }
        }

        let r = &self.resonance.settings;
        if r.length_steps < 2 || r.phase_steps < 2 {
            return Err(CliError::Config("[resonance] search grid needs >= 2 steps per axis".into()));
        }
        if !(r.refine_tol > 0.0) {
            return Err(CliError::Config("[resonance] refine_tol must be positive".into()));
        }

        let l = &self.lock;
        l.controller.validate().map_err(ctx("lock.controller"))?;
        l.plant.validate().map_err(ctx("lock.plant"))?;
        l.error_signal.validate().map_err(ctx("lock.error_signal"))?;
        if l.steps == 0 || l.trajectory_stride == 0 {
            return Err(CliError::Config("[lock] steps and trajectory_stride must be >= 1".into()));
        }

        self.synth.coherent.validate().map_err(ctx("synth.coherent"))?;
        self.synth.noise.validate().map_err(ctx("synth.noise"))?;
        self.synth.lifetime.validate().map_err(ctx("synth.lifetime"))?;
        self.synth.timetags.validate().map_err(ctx("synth.timetags"))?;

        let a = &self.analysis;
        let (w_in, w_out) = a.windows().map_err(|e| CliError::Config(format!("[analysis] {e}")))?;
        if w_in.overlaps(&w_out) {
            return Err(CliError::Config("[analysis] read-in and read-out windows overlap".into()));
        }
        if a.bin_width_ps == 0 || a.n_bins == 0 || a.n_triggers == 0 {
            return Err(CliError::Config("[analysis] bin_width_ps, n_bins and n_triggers must be >= 1".into()));
        }
        if !(a.energy_eval_nj.is_finite() && a.energy_eval_nj >= 0.0) {
            return Err(CliError::Config("[analysis] energy_eval_nj must be finite and >= 0".into()));
        }
        if a.mc_samples < 2 {
            return Err(CliError::Config("[analysis] mc_samples must be >= 2".into()));
        }
        Ok(())
    }
}
