use super::montecarlo::{poisson, run, summarize};
use super::{CountSet, FitResult, MonteCarloConfig};
use crate::error::{Error, Result};

/// `(c_sc_out − c_c_out − c_s_out) / c_s_in`.
pub fn efficiency_point(c: &CountSet) -> Result<f64> {
    if c.c_s_in == 0 {
        return Err(Error::domain("efficiency undefined without read-in signal counts"));
    }
    Ok(c.retrieved() / c.c_s_in as f64)
}

/// Efficiency with Poisson resampling of the four counts it uses.
pub fn efficiency(c: &CountSet, mc: &MonteCarloConfig) -> Result<FitResult> {
    let estimate = efficiency_point(c)?;
    let draws = run(mc, |rng| {
        let r = CountSet {
            c_sc_out: poisson(c.c_sc_out as f64, rng),
            c_c_out: poisson(c.c_c_out as f64, rng),
            c_s_out: poisson(c.c_s_out as f64, rng),
            c_s_in: poisson(c.c_s_in as f64, rng),
            ..*c
        };
        efficiency_point(&r).ok()
    });
    Ok(FitResult::from_summary(estimate, &summarize(&draws), mc.seed))
}

/// Retrieved-signal counts over noise counts in the read-out window.
pub fn snr(c: &CountSet) -> Result<f64> {
    if c.c_c_out == 0 {
        return Err(Error::domain("SNR undefined without noise counts"));
    }
    Ok(c.retrieved() / c.c_c_out as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(sc: u64, c: u64, s: u64, s_in: u64) -> CountSet {
        CountSet { c_sc_out: sc, c_c_out: c, c_s_out: s, c_s_in: s_in, n_triggers: 1, ..Default::default() }
    }

    #[test]
    fn headline_arithmetic() {
        assert_eq!(efficiency_point(&counts(95, 0, 0, 1000)).unwrap(), 0.095);
        assert_eq!(efficiency_point(&counts(30, 20, 10, 1000)).unwrap(), 0.0);
        assert!(efficiency_point(&counts(1, 0, 0, 0)).is_err());
    }

    #[test]
    fn snr_definition() {
        assert_eq!(snr(&counts(250, 100, 50, 1)).unwrap(), 1.0);
        assert!(snr(&counts(5, 0, 0, 1)).is_err());
    }

    #[test]
    fn mc_is_seeded() {
        let c = counts(950, 100, 3, 10_000);
        let mc = MonteCarloConfig { samples: 2_000, seed: 9 };
        let a = efficiency(&c, &mc).unwrap();
        assert_eq!(a, efficiency(&c, &mc).unwrap());
        assert_eq!(a.estimate, 0.0847);
        assert!(a.percentile_16 < a.estimate && a.estimate < a.percentile_84);
        // sqrt(950 + 100 + 3)/1e4 plus the denominator term
        let expect = ((1053.0f64) / 1e8 + 0.0847f64.powi(2) / 1e4).sqrt();
        assert!((a.std_error / expect - 1.0).abs() < 0.05, "{} vs {expect}", a.std_error);
    }
}
