use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::montecarlo::poisson;
use super::{Channel, CountSet, TimeTagRecord};
use crate::error::{Error, Result};

/// One input amplitude of a coherent-state SNR series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentPoint {
    pub mean_photon: f64,
    pub counts: CountSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct CoherentRow {
    mean_photon: f64,
    c_sc_in: u64,
    c_sc_out: u64,
    c_s_in: u64,
    c_s_out: u64,
    c_c_in: u64,
    c_c_out: u64,
    n_triggers: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint {
    pub energy_nj: f64,
    pub noise_counts: u64,
    pub n_triggers: u64,
    pub detection_efficiency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimePoint {
    pub storage_time_ns: f64,
    pub counts: u64,
    pub n_triggers: u64,
}

/// Memory seen through a lossy detection chain. Photon numbers are per
/// trigger at the memory; `detection_efficiency` maps them to clicks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherentTruth {
    pub mean_photons: Vec<f64>,
    pub efficiency: f64,
    pub noise_photons: f64,
    /// Fraction of the input transmitted in the read-in bin while storing.
    pub transmitted_fraction: f64,
    /// Fraction of the input that leaks into the read-out bin without control.
    pub signal_leak: f64,
    pub detection_efficiency: f64,
    pub n_triggers: u64,
}

impl Default for CoherentTruth {
    fn default() -> Self {
        Self {
            mean_photons: vec![0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0],
            efficiency: 0.095,
            // μ₁ = 0.17
            noise_photons: 0.016_15,
            transmitted_fraction: 0.7,
            signal_leak: 0.0,
            detection_efficiency: 0.01,
            n_triggers: 800_000,
        }
    }
}

impl CoherentTruth {
    pub fn mu1(&self) -> f64 {
        self.noise_photons / self.efficiency
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseTruth {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub energies_nj: Vec<f64>,
    pub detection_efficiency: f64,
    pub n_triggers: u64,
}

impl Default for NoiseTruth {
    fn default() -> Self {
        Self {
            a: 0.004,
            b: 0.002,
            // 0.006 photons at 1.5 nJ
            c: 0.006 / 2.25,
            energies_nj: vec![0.3, 0.6, 0.9, 1.2, 1.5, 1.8, 2.1, 2.4],
            detection_efficiency: 0.01,
            n_triggers: 3_000_000,
        }
    }
}

impl NoiseTruth {
    pub fn noise_at(&self, energy_nj: f64) -> f64 {
        self.a + self.b * energy_nj + self.c * energy_nj * energy_nj
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifetimeTruth {
    /// Clicks per trigger at zero storage time.
    pub amplitude: f64,
    pub tau_ns: f64,
    pub storage_times_ns: Vec<f64>,
    pub n_triggers: u64,
}

impl Default for LifetimeTruth {
    fn default() -> Self {
        Self {
            amplitude: 0.01,
            tau_ns: 95.0,
            storage_times_ns: (1..=10).map(|k| 12.5 * k as f64).collect(),
            n_triggers: 200_000,
        }
    }
}

/// Per-click arrival times for the three detector configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeTagTruth {
    pub mean_photon: f64,
    pub efficiency: f64,
    pub noise_photons: f64,
    pub transmitted_fraction: f64,
    pub detection_efficiency: f64,
    pub n_triggers: u64,
    pub read_in_ps: u64,
    pub storage_time_ps: u64,
    pub jitter_ps: f64,
}

impl Default for TimeTagTruth {
    fn default() -> Self {
        Self {
            mean_photon: 0.7,
            efficiency: 0.095,
            noise_photons: 0.015,
            transmitted_fraction: 0.7,
            detection_efficiency: 0.05,
            n_triggers: 200_000,
            read_in_ps: 10_000,
            storage_time_ps: 12_500,
            jitter_ps: 300.0,
        }
    }
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite and non-negative")))
    }
}

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in [0, 1]")))
    }
}

impl CoherentTruth {
    pub fn validate(&self) -> Result<()> {
        check_fraction("efficiency", self.efficiency)?;
        check_fraction("transmitted fraction", self.transmitted_fraction)?;
        check_fraction("signal leak", self.signal_leak)?;
        check_fraction("detection efficiency", self.detection_efficiency)?;
        check_rate("noise photons", self.noise_photons)?;
        for &m in &self.mean_photons {
            check_rate("mean photon number", m)?;
        }
        Ok(())
    }
}

impl NoiseTruth {
    pub fn validate(&self) -> Result<()> {
        check_rate("a", self.a)?;
        check_rate("b", self.b)?;
        check_rate("c", self.c)?;
        check_fraction("detection efficiency", self.detection_efficiency)?;
        for &e in &self.energies_nj {
            check_rate("energy", e)?;
        }
        Ok(())
    }
}

impl LifetimeTruth {
    pub fn validate(&self) -> Result<()> {
        check_rate("amplitude", self.amplitude)?;
        if !(self.tau_ns > 0.0 && self.tau_ns.is_finite()) {
            return Err(Error::domain("lifetime must be positive"));
        }
        for &t in &self.storage_times_ns {
            check_rate("storage time", t)?;
        }
        Ok(())
    }
}

impl TimeTagTruth {
    pub fn validate(&self) -> Result<()> {
        check_rate("mean photon number", self.mean_photon)?;
        check_rate("noise photons", self.noise_photons)?;
        check_fraction("efficiency", self.efficiency)?;
        check_fraction("transmitted fraction", self.transmitted_fraction)?;
        check_fraction("detection efficiency", self.detection_efficiency)?;
        if !(self.jitter_ps >= 0.0 && self.jitter_ps.is_finite()) {
            return Err(Error::domain("jitter must be finite and non-negative"));
        }
        Ok(())
    }
}

pub fn generate_coherent_series(truth: &CoherentTruth, seed: u64) -> Result<Vec<CoherentPoint>> {
    truth.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = truth.n_triggers as f64 * truth.detection_efficiency;
    let n = truth.noise_photons;
    Ok(truth
        .mean_photons
        .iter()
        .map(|&m| {
            let counts = CountSet {
                c_sc_in: poisson(k * (m * truth.transmitted_fraction + n), &mut rng),
                c_sc_out: poisson(k * (m * (truth.efficiency + truth.signal_leak) + n), &mut rng),
                c_s_in: poisson(k * m, &mut rng),
                c_s_out: poisson(k * m * truth.signal_leak, &mut rng),
                c_c_in: poisson(k * n, &mut rng),
                c_c_out: poisson(k * n, &mut rng),
                n_triggers: truth.n_triggers,
            };
            CoherentPoint { mean_photon: m, counts }
        })
        .collect())
}

pub fn generate_noise_series(truth: &NoiseTruth, seed: u64) -> Result<Vec<NoisePoint>> {
    truth.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = truth.n_triggers as f64 * truth.detection_efficiency;
    Ok(truth
        .energies_nj
        .iter()
        .map(|&e| NoisePoint {
            energy_nj: e,
            noise_counts: poisson(k * truth.noise_at(e), &mut rng),
            n_triggers: truth.n_triggers,
            detection_efficiency: truth.detection_efficiency,
        })
        .collect())
}

pub fn generate_lifetime_series(truth: &LifetimeTruth, seed: u64) -> Result<Vec<LifetimePoint>> {
    truth.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = truth.n_triggers as f64;
    Ok(truth
        .storage_times_ns
        .iter()
        .map(|&t| LifetimePoint {
            storage_time_ns: t,
            counts: poisson(n * truth.amplitude * (-t / truth.tau_ns).exp(), &mut rng),
            n_triggers: truth.n_triggers,
        })
        .collect())
}

/// Time tags for signal+control, signal-only and control-only runs with
/// read-in at `read_in_ps` and read-out one storage time later.
pub fn generate_timetags(truth: &TimeTagTruth, seed: u64) -> Result<Vec<TimeTagRecord>> {
    truth.validate()?;
    let jitter = Normal::new(0.0, truth.jitter_ps)
        .map_err(|_| Error::domain("jitter must be finite and non-negative"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = truth.detection_efficiency;
    let (m, n) = (truth.mean_photon, truth.noise_photons);
    let read_out_ps = truth.read_in_ps + truth.storage_time_ps;
    let mut out = Vec::new();
    for ch in Channel::ALL {
        let (rate_in, rate_out) = match ch {
            Channel::Sc => (m * truth.transmitted_fraction + n, m * truth.efficiency + n),
            Channel::S => (m, 0.0),
            Channel::C => (n, n),
        };
        for trigger_id in 0..truth.n_triggers {
            for (rate, centre) in [(rate_in, truth.read_in_ps), (rate_out, read_out_ps)] {
                for _ in 0..poisson(k * rate, &mut rng) {
                    let t = (centre as f64 + jitter.sample(&mut rng)).round().max(0.0) as u64;
                    out.push(TimeTagRecord { trigger_id, channel: ch, time_ps: t });
                }
            }
        }
    }
    Ok(out)
}

fn read_rows<T: DeserializeOwned, R: Read>(input: R) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    reader
        .deserialize()
        .map(|row| {
            row.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })
        })
        .collect()
}

fn write_rows<T: Serialize, W: Write>(rows: impl IntoIterator<Item = T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_coherent_series<W: Write>(series: &[CoherentPoint], out: W) -> Result<()> {
    write_rows(
        series.iter().map(|p| CoherentRow {
            mean_photon: p.mean_photon,
            c_sc_in: p.counts.c_sc_in,
            c_sc_out: p.counts.c_sc_out,
            c_s_in: p.counts.c_s_in,
            c_s_out: p.counts.c_s_out,
            c_c_in: p.counts.c_c_in,
            c_c_out: p.counts.c_c_out,
            n_triggers: p.counts.n_triggers,
        }),
        out,
    )
}

pub fn read_coherent_series<R: Read>(input: R) -> Result<Vec<CoherentPoint>> {
    Ok(read_rows::<CoherentRow, _>(input)?
        .into_iter()
        .map(|r| CoherentPoint {
            mean_photon: r.mean_photon,
            counts: CountSet {
                c_sc_in: r.c_sc_in,
                c_sc_out: r.c_sc_out,
                c_s_in: r.c_s_in,
                c_s_out: r.c_s_out,
                c_c_in: r.c_c_in,
                c_c_out: r.c_c_out,
                n_triggers: r.n_triggers,
            },
        })
        .collect())
}

pub fn write_noise_series<W: Write>(series: &[NoisePoint], out: W) -> Result<()> {
    write_rows(series, out)
}

pub fn read_noise_series<R: Read>(input: R) -> Result<Vec<NoisePoint>> {
    read_rows(input)
}

pub fn write_lifetime_series<W: Write>(series: &[LifetimePoint], out: W) -> Result<()> {
    write_rows(series, out)
}

pub fn read_lifetime_series<R: Read>(input: R) -> Result<Vec<LifetimePoint>> {
    read_rows(input)
}
