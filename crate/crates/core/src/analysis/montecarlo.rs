use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self { samples: 10_000, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std_dev: f64,
    pub p16: f64,
    pub p84: f64,
    pub n: usize,
}

/// Generator for resample `index`: the master seed picks the key, the index
/// picks the stream, so results do not depend on how work is split.
pub(crate) fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub(crate) fn poisson<R: rand::Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean > 0.0 {
        Poisson::new(mean).unwrap().sample(rng) as u64
    } else {
        0
    }
}

/// Runs `f` once per resample in parallel. Resamples returning `None` are
/// dropped.
pub(crate) fn run<T, F>(mc: &MonteCarloConfig, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Option<T> + Sync,
{
    (0..mc.samples)
        .into_par_iter()
        .filter_map(|i| f(&mut sample_rng(mc.seed, i)))
        .collect()
}

pub(crate) fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary { mean: f64::NAN, std_dev: f64::NAN, p16: f64::NAN, p84: f64::NAN, n };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Summary { mean, std_dev: var.sqrt(), p16: percentile(&sorted, 0.16), p84: percentile(&sorted, 0.84), n }
}

/// Sample covariance of row vectors.
pub(crate) fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; k]; k];
    if n < 2 {
        return out;
    }
    let mean: Vec<f64> = (0..k).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    for i in 0..k {
        for j in 0..k {
            out[i][j] = rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1) as f64;
        }
    }
    out
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}
