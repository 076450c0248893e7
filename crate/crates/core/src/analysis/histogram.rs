use serde::{Deserialize, Serialize};

use super::{Channel, CountSet, TimeTagRecord};
use crate::error::{Error, Result};

pub const DEFAULT_BIN_WIDTH_PS: u64 = 81;

/// Arrival-time histogram per channel. Bin `k` covers
/// `[origin + k·width, origin + (k+1)·width)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width_ps: u64,
    pub origin_ps: u64,
    /// `counts[channel][bin]`, channels ordered sc, s, c.
    pub counts: [Vec<u64>; 3],
    /// Records before the origin.
    pub underflow: [u64; 3],
    /// Records past the last bin.
    pub overflow: [u64; 3],
}

impl Histogram {
    pub fn n_bins(&self) -> usize {
        self.counts[0].len()
    }

    pub fn span_ps(&self) -> (u64, u64) {
        (self.origin_ps, self.origin_ps + self.n_bins() as u64 * self.bin_width_ps)
    }

    pub fn channel(&self, ch: Channel) -> &[u64] {
        &self.counts[ch.index()]
    }

    pub fn total(&self, ch: Channel) -> u64 {
        let i = ch.index();
        self.counts[i].iter().sum::<u64>() + self.underflow[i] + self.overflow[i]
    }

    pub fn bin_start_ps(&self, k: usize) -> u64 {
        self.origin_ps + k as u64 * self.bin_width_ps
    }
}

/// Histogram just wide enough to hold every record.
pub fn histogram(records: &[TimeTagRecord], bin_width_ps: u64, origin_ps: u64) -> Result<Histogram> {
    let last = records.iter().map(|r| r.time_ps).max().unwrap_or(origin_ps);
    let n = if last < origin_ps { 0 } else { ((last - origin_ps) / bin_width_ps.max(1) + 1) as usize };
    histogram_span(records, bin_width_ps, origin_ps, n)
}

/// Histogram with a fixed number of bins.
pub fn histogram_span(
    records: &[TimeTagRecord],
    bin_width_ps: u64,
    origin_ps: u64,
    n_bins: usize,
) -> Result<Histogram> {
    if bin_width_ps == 0 {
        return Err(Error::domain("bin width must be positive"));
    }
    let mut h = Histogram {
        bin_width_ps,
        origin_ps,
        counts: [vec![0; n_bins], vec![0; n_bins], vec![0; n_bins]],
        underflow: [0; 3],
        overflow: [0; 3],
    };
    for r in records {
        let i = r.channel.index();
        if r.time_ps < origin_ps {
            h.underflow[i] += 1;
            continue;
        }
        let k = ((r.time_ps - origin_ps) / bin_width_ps) as usize;
        match h.counts[i].get_mut(k) {
            Some(c) => *c += 1,
            None => h.overflow[i] += 1,
        }
    }
    Ok(h)
}

/// Half-open time window `[start_ps, end_ps)`. A bin belongs to the window
/// when its left edge does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start_ps: u64,
    pub end_ps: u64,
}

impl Window {
    pub fn new(start_ps: u64, end_ps: u64) -> Result<Self> {
        if end_ps < start_ps {
            return Err(Error::domain(format!("window end {end_ps} ps precedes start {start_ps} ps")));
        }
        Ok(Self { start_ps, end_ps })
    }

    pub fn overlaps(&self, other: &Window) -> bool {
        self.start_ps < other.end_ps && other.start_ps < self.end_ps
    }

    fn sum(&self, h: &Histogram, ch: Channel) -> u64 {
        h.channel(ch)
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let s = h.bin_start_ps(*k);
                s >= self.start_ps && s < self.end_ps
            })
            .map(|(_, c)| c)
            .sum()
    }
}

/// Sums each channel over the read-in and read-out windows.
pub fn integrate_windows(h: &Histogram, read_in: Window, read_out: Window, n_triggers: u64) -> Result<CountSet> {
    if read_in.overlaps(&read_out) {
        return Err(Error::domain("read-in and read-out windows overlap"));
    }
    let (lo, hi) = h.span_ps();
    for w in [read_in, read_out] {
        if w.start_ps < lo || w.end_ps > hi {
            return Err(Error::domain(format!(
                "window [{}, {}) ps outside histogram span [{lo}, {hi}) ps",
                w.start_ps, w.end_ps
            )));
        }
    }
    Ok(CountSet {
        c_sc_in: read_in.sum(h, Channel::Sc),
        c_sc_out: read_out.sum(h, Channel::Sc),
        c_s_in: read_in.sum(h, Channel::S),
        c_s_out: read_out.sum(h, Channel::S),
        c_c_in: read_in.sum(h, Channel::C),
        c_c_out: read_out.sum(h, Channel::C),
        n_triggers,
    })
}
