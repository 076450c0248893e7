use super::cavity::{BirefringentCavity, Channel};
use super::{transmission, SusceptibilityModel, FWHM_TO_SIGMA};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Fringe visibility of an Airy response with round-trip factor `ρ`.
pub fn closed_form_visibility(rho: f64) -> f64 {
    2.0 * rho / (1.0 + rho * rho)
}

/// `(max − min)/(max + min)` of `values` over `band`, after smoothing with a
/// Gaussian probe of the given FWHM (no smoothing when it is zero).
///
/// `freqs` must be uniformly spaced.
pub fn visibility(freqs: &[f64], values: &[f64], band: (f64, f64), probe_fwhm: f64) -> Result<f64> {
    if freqs.len() != values.len() {
        return Err(Error::domain("frequency and value arrays differ in length"));
    }
    if !(probe_fwhm >= 0.0) {
        return Err(Error::domain("probe linewidth must be non-negative"));
    }
    let smoothed;
    let trace = if probe_fwhm > 0.0 && freqs.len() > 1 {
        smoothed = gaussian_smooth(freqs, values, probe_fwhm)?;
        &smoothed[..]
    } else {
        values
    };
    let (lo, hi) = band;
    let (mut max, mut min) = (f64::NEG_INFINITY, f64::INFINITY);
    for (&f, &v) in freqs.iter().zip(trace) {
        if f >= lo && f <= hi {
            max = max.max(v);
            min = min.min(v);
        }
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::domain(format!("band [{lo}, {hi}] GHz contains no grid points")));
    }
    if max + min == 0.0 {
        return Ok(0.0);
    }
    Ok((max - min) / (max + min))
}

fn gaussian_smooth(freqs: &[f64], values: &[f64], fwhm: f64) -> Result<Vec<f64>> {
    let step = (freqs[freqs.len() - 1] - freqs[0]) / (freqs.len() - 1) as f64;
    if freqs
        .windows(2)
        .any(|w| ((w[1] - w[0]) - step).abs() > 1e-6 * step.abs())
    {
        return Err(Error::domain("probe smoothing needs a uniform frequency grid"));
    }
    let sigma = fwhm * FWHM_TO_SIGMA / step;
    let half = (4.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-half..=half)
        .map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp())
        .collect();
    let n = values.len() as isize;
    Ok((0..n)
        .map(|i| {
            let (mut acc, mut norm) = (0.0, 0.0);
            for (k, w) in (-half..=half).zip(&kernel) {
                let j = i + k;
                if (0..n).contains(&j) {
                    acc += w * values[j as usize];
                    norm += w;
                }
            }
            acc / norm
        })
        .collect())
}

/// Visibility of one channel over one free spectral range centred on
/// `center_ghz`, as seen through a probe of width `probe_fwhm`.
pub fn visibility_near(
    cavity: &BirefringentCavity,
    model: &SusceptibilityModel,
    channel: Channel,
    center_ghz: f64,
    probe_fwhm: f64,
) -> Result<f64> {
    let fsr = cavity.fsr_ghz();
    let margin = 5.0 * probe_fwhm * FWHM_TO_SIGMA;
    let lo = center_ghz - 0.5 * fsr - margin;
    let hi = center_ghz + 0.5 * fsr + margin;
    let points = ((hi - lo) / fsr * 1024.0).ceil() as usize + 1;
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
    let t = grid
        .iter()
        .map(|&nu| transmission(cavity, model, nu, channel))
        .collect::<Result<Vec<_>>>()?;
    visibility(
        &grid,
        &t,
        (center_ghz - 0.5 * fsr, center_ghz + 0.5 * fsr),
        probe_fwhm,
    )
}

/// Passive loss of the channel's polarisation that reproduces a measured
/// visibility at `center_ghz`. Returns the loss; `cavity` is not modified.
pub fn calibrate_polarization_loss(
    cavity: &BirefringentCavity,
    model: &SusceptibilityModel,
    channel: Channel,
    center_ghz: f64,
    probe_fwhm: f64,
    target: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&target) {
        return Err(Error::domain(format!("target visibility {target} outside [0, 1)")));
    }
    let pol = channel.polarization();
    let eval = |loss: f64| -> Result<f64> {
        let mut c = cavity.clone();
        c.set_loss(pol, loss);
        visibility_near(&c, model, channel, center_ghz, probe_fwhm)
    };
    let (mut lo, mut hi) = (0.0, 0.999);
    if eval(lo)? < target {
        return Err(Error::domain(format!(
            "visibility {target} not reachable even without passive loss"
        )));
    }
    if eval(hi)? > target {
        return Err(Error::domain(format!("visibility {target} not reachable")));
    }
    // visibility falls monotonically with loss
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Passive losses fitted to measured signal and control visibilities, and the
/// visibilities they give on all three channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityCalibration {
    pub loss_signal_pol: f64,
    pub loss_control_pol: f64,
    /// Signal, control, anti-Stokes.
    pub visibilities: [f64; 3],
}

/// Calibrates the signal polarisation on `targets.0` at `freqs[0]` and the
/// control polarisation on `targets.1` at `freqs[1]`. The anti-Stokes channel
/// shares the signal polarisation, so its visibility is a prediction.
pub fn calibrate_visibilities(
    cavity: &BirefringentCavity,
    model: &SusceptibilityModel,
    freqs: [f64; 3],
    probe_fwhm: f64,
    targets: (f64, f64),
) -> Result<VisibilityCalibration> {
    let ls = calibrate_polarization_loss(cavity, model, Channel::Signal, freqs[0], probe_fwhm, targets.0)?;
    let lc = calibrate_polarization_loss(cavity, model, Channel::Control, freqs[1], probe_fwhm, targets.1)?;
    let mut c = cavity.clone();
    c.set_loss(Channel::Signal.polarization(), ls);
    c.set_loss(Channel::Control.polarization(), lc);
    let mut visibilities = [0.0; 3];
    for (v, (ch, nu)) in visibilities.iter_mut().zip(Channel::ALL.into_iter().zip(freqs)) {
        *v = visibility_near(&c, model, ch, nu, probe_fwhm)?;
    }
    Ok(VisibilityCalibration { loss_signal_pol: ls, loss_control_pol: lc, visibilities })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{compute_spectrum, SusceptibilityModel};

    #[test]
    fn constant_trace_has_zero_visibility() {
        let f: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let v = vec![0.37; 100];
        assert_eq!(visibility(&f, &v, (1.0, 8.0), 0.0).unwrap(), 0.0);
        assert!(visibility(&f, &v, (1.0, 8.0), 1.2).unwrap() < 1e-14);
    }

    #[test]
    fn empty_band_rejected() {
        let f: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let v = vec![1.0; 10];
        assert!(visibility(&f, &v, (3.2, 3.8), 0.0).is_err());
    }

    #[test]
    fn sampled_visibility_matches_airy() {
        let vac = SusceptibilityModel::vacuum();
        for &(r, loss) in &[(0.86, 0.0), (0.9, 0.1), (0.7, 0.3)] {
            let cav = BirefringentCavity {
                r1: r,
                r2: r,
                loss_signal_pol: loss,
                ..BirefringentCavity::reference()
            };
            let grid: Vec<f64> = (0..20001).map(|i| i as f64 * 15.0 / 20000.0).collect();
            let s = compute_spectrum(&cav, &vac, &grid).unwrap();
            let v = visibility(&grid, &s.signal, (0.0, 15.0), 0.0).unwrap();
            let rho = r * r * (1.0 - loss);
            assert!((v - closed_form_visibility(rho)).abs() < 1e-4);
        }
    }

    #[test]
    fn wide_probe_washes_out_fringes() {
        let cav = BirefringentCavity::reference();
        let vac = SusceptibilityModel::vacuum();
        let narrow = visibility_near(&cav, &vac, Channel::Signal, 10.0, 0.0).unwrap();
        let medium = visibility_near(&cav, &vac, Channel::Signal, 10.0, 1.2).unwrap();
        let wide = visibility_near(&cav, &vac, Channel::Signal, 10.0, 50.0).unwrap();
        assert!(narrow > medium && medium > wide);
        assert!(wide < 1e-3);
    }

    #[test]
    fn calibration_hits_target() {
        let cav = BirefringentCavity::reference();
        let vac = SusceptibilityModel::vacuum();
        let loss = calibrate_polarization_loss(&cav, &vac, Channel::Control, 5.0, 1.2, 0.71).unwrap();
        let mut c = cav.clone();
        c.loss_control_pol = loss;
        let v = visibility_near(&c, &vac, Channel::Control, 5.0, 1.2).unwrap();
        assert!((v - 0.71).abs() < 1e-6);
        assert!(calibrate_polarization_loss(&cav, &vac, Channel::Control, 5.0, 1.2, 0.999).is_err());
    }
}
