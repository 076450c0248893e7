use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::montecarlo::{covariance, poisson, run, summarize};
use super::{snr, CoherentPoint, CountSet, FitResult, LifetimePoint, MonteCarloConfig, NoisePoint};
use crate::error::{Error, Result};

const REL_STEP_TOL: f64 = 1e-10;
const MAX_ITER: usize = 200;

fn distinct(xs: impl Iterator<Item = f64>) -> bool {
    let mut v: Vec<f64> = xs.collect();
    v.sort_by(f64::total_cmp);
    v.windows(2).all(|w| w[0] != w[1])
}

/// Delta-method variance of `S/C` for retrieved counts `S`, noise counts `C`
/// and signal-only read-out counts `s`, all Poisson.
fn snr_variance(retrieved: f64, noise: f64, leak: f64) -> f64 {
    let noise = noise.max(1.0);
    let var_s = (retrieved + 2.0 * noise + 2.0 * leak).max(1.0);
    (var_s + 2.0 * retrieved) / (noise * noise) + retrieved * retrieved / noise.powi(3)
}

/// Weighted slope of SNR against |α|² through the origin, inverted. Weights
/// come from the fitted line and the pooled noise rate so that a point's
/// own fluctuation does not set its weight.
pub fn mu1_point(series: &[CoherentPoint]) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::domain("μ₁ fit needs at least two points"));
    }
    if !distinct(series.iter().map(|p| p.mean_photon)) {
        return Err(Error::domain("μ₁ fit needs distinct input photon numbers"));
    }
    let y: Vec<f64> = series.iter().map(|p| snr(&p.counts)).collect::<Result<_>>()?;
    if y.iter().all(|&v| v == 0.0) {
        return Err(Error::fit("all SNR values are zero"));
    }
    let triggers: u64 = series.iter().map(|p| p.counts.n_triggers.max(1)).sum();
    let noise_rate = series.iter().map(|p| p.counts.c_c_out).sum::<u64>() as f64 / triggers as f64;

    let slope_with = |weight: &dyn Fn(usize) -> f64| -> f64 {
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (i, p) in series.iter().enumerate() {
            let w = weight(i);
            sxy += w * p.mean_photon * y[i];
            sxx += w * p.mean_photon * p.mean_photon;
        }
        sxy / sxx
    };
    let mut slope = slope_with(&|i| {
        let c = &series[i].counts;
        1.0 / snr_variance(c.retrieved().max(0.0), c.c_c_out as f64, c.c_s_out as f64)
    });
    for _ in 0..3 {
        let prev = slope;
        slope = slope_with(&|i| {
            let p = &series[i];
            let noise = noise_rate * p.counts.n_triggers.max(1) as f64;
            let retrieved = (prev * p.mean_photon * noise).max(0.0);
            1.0 / snr_variance(retrieved, noise, p.counts.c_s_out as f64)
        });
    }
    if !(slope > 0.0) || !slope.is_finite() {
        return Err(Error::fit(format!("non-positive SNR slope {slope}")));
    }
    Ok(1.0 / slope)
}

fn resample_counts<R: rand::Rng + ?Sized>(c: &CountSet, rng: &mut R) -> CountSet {
    CountSet {
        c_sc_in: poisson(c.c_sc_in as f64, rng),
        c_sc_out: poisson(c.c_sc_out as f64, rng),
        c_s_in: poisson(c.c_s_in as f64, rng),
        c_s_out: poisson(c.c_s_out as f64, rng),
        c_c_in: poisson(c.c_c_in as f64, rng),
        c_c_out: poisson(c.c_c_out as f64, rng),
        n_triggers: c.n_triggers,
    }
}

pub fn fit_mu1(series: &[CoherentPoint], mc: &MonteCarloConfig) -> Result<FitResult> {
    let estimate = mu1_point(series)?;
    let draws = run(mc, |rng| {
        let r: Vec<_> = series
            .iter()
            .map(|p| CoherentPoint { mean_photon: p.mean_photon, counts: resample_counts(&p.counts, rng) })
            .collect();
        mu1_point(&r).ok()
    });
    Ok(FitResult::from_summary(estimate, &summarize(&draws), mc.seed))
}

/// Least squares `min |Ax − b|` subject to `x ≥ 0` (active-set method).
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = a.norm() * b.norm().max(1.0);
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);

    let solve_passive = |passive: &[bool]| -> Result<DVector<f64>> {
        let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = DMatrix::from_fn(a.nrows(), cols.len(), |i, k| a[(i, cols[k])]);
        let sol = sub
            .svd(true, true)
            .solve(b, 1e-12)
            .map_err(|e| Error::fit(e.to_string()))?;
        let mut z = DVector::zeros(n);
        for (k, &j) in cols.iter().enumerate() {
            z[j] = sol[k];
        }
        Ok(z)
    };

    for _ in 0..3 * n + 10 {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { return Ok(x) };
        passive[j] = true;
        loop {
            let z = solve_passive(&passive)?;
            if (0..n).filter(|&j| passive[j]).all(|j| z[j] > 0.0) {
                x = z;
                break;
            }
            // step back to the boundary and drop the blocking variables
            let alpha = (0..n)
                .filter(|&j| passive[j] && z[j] <= 0.0)
                .map(|j| x[j] / (x[j] - z[j]))
                .fold(f64::INFINITY, f64::min);
            x += (z - &x) * alpha;
            for j in 0..n {
                if passive[j] && x[j] <= tol {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
        }
    }
    Err(Error::fit("non-negative least squares did not converge"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseScalingFit {
    /// `(a, b, c)` in `N(𝓔) = a + b𝓔 + c𝓔²`.
    pub coefficients: [f64; 3],
    pub covariance: Vec<Vec<f64>>,
    pub energy_eval_nj: f64,
    /// `c·𝓔_eval²`.
    pub fwm: FitResult,
}

fn noise_value(p: &NoisePoint) -> (f64, f64) {
    let scale = p.n_triggers as f64 * p.detection_efficiency;
    (p.noise_counts as f64 / scale, (p.noise_counts as f64).max(1.0).sqrt() / scale)
}

fn noise_design(series: &[NoisePoint]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if series.len() < 4 {
        return Err(Error::domain("noise-scaling fit needs at least four points"));
    }
    if series.iter().any(|p| !(p.energy_nj >= 0.0) || p.n_triggers == 0 || !(p.detection_efficiency > 0.0)) {
        return Err(Error::domain("energies must be non-negative with positive triggers and detection efficiency"));
    }
    if !distinct(series.iter().map(|p| p.energy_nj)) {
        return Err(Error::domain("noise-scaling fit needs distinct energies"));
    }
    let m = series.len();
    let mut a = DMatrix::zeros(m, 3);
    let mut b = DVector::zeros(m);
    for (i, p) in series.iter().enumerate() {
        let (y, sigma) = noise_value(p);
        let e = p.energy_nj;
        a[(i, 0)] = 1.0 / sigma;
        a[(i, 1)] = e / sigma;
        a[(i, 2)] = e * e / sigma;
        b[i] = y / sigma;
    }
    let sv = a.singular_values();
    if sv.min() <= 1e-10 * sv.max() {
        return Err(Error::fit("degenerate design matrix"));
    }
    Ok((a, b))
}

/// Weighted `a + b𝓔 + c𝓔²` with every coefficient non-negative.
pub fn noise_scaling_point(series: &[NoisePoint]) -> Result<[f64; 3]> {
    let (a, b) = noise_design(series)?;
    let x = nnls(&a, &b)?;
    Ok([x[0], x[1], x[2]])
}

fn noise_scaling_free(series: &[NoisePoint]) -> Result<[f64; 3]> {
    let (a, b) = noise_design(series)?;
    let x = a.svd(true, true).solve(&b, 1e-14).map_err(|e| Error::fit(e.to_string()))?;
    Ok([x[0], x[1], x[2]])
}

/// Non-negative fit with Monte-Carlo errors. The errors come from the spread
/// of unconstrained refits: when a coefficient sits on its bound the
/// constrained spread is too narrow and misses the bias the bound introduces.
pub fn fit_noise_scaling(series: &[NoisePoint], energy_eval_nj: f64, mc: &MonteCarloConfig) -> Result<NoiseScalingFit> {
    if !(energy_eval_nj >= 0.0) {
        return Err(Error::domain("evaluation energy must be non-negative"));
    }
    let coefficients = noise_scaling_point(series)?;
    let draws = run(mc, |rng| {
        let r: Vec<_> = series
            .iter()
            .map(|p| NoisePoint { noise_counts: poisson(p.noise_counts as f64, rng), ..*p })
            .collect();
        noise_scaling_free(&r).ok().map(|c| c.to_vec())
    });
    let e2 = energy_eval_nj * energy_eval_nj;
    let fwm: Vec<f64> = draws.iter().map(|c| c[2] * e2).collect();
    Ok(NoiseScalingFit {
        coefficients,
        covariance: covariance(&draws),
        energy_eval_nj,
        fwm: FitResult::from_summary(coefficients[2] * e2, &summarize(&fwm), mc.seed),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeFit {
    /// Retrieved counts per trigger extrapolated to zero storage time.
    pub amplitude: f64,
    pub tau: FitResult,
}

/// Weighted `A·exp(−t/τ)` by Gauss-Newton from a log-linear start.
/// Returns `(A, τ)`.
pub fn lifetime_point(series: &[LifetimePoint]) -> Result<(f64, f64)> {
    if series.len() < 3 {
        return Err(Error::domain("lifetime fit needs at least three points"));
    }
    if series.windows(2).any(|w| !(w[1].storage_time_ns > w[0].storage_time_ns)) {
        return Err(Error::domain("storage times must be strictly increasing"));
    }
    if series.iter().any(|p| p.n_triggers == 0) {
        return Err(Error::domain("every point needs triggers"));
    }
    let data: Vec<(f64, f64, f64)> = series
        .iter()
        .map(|p| {
            let n = p.n_triggers as f64;
            (p.storage_time_ns, p.counts as f64 / n, (p.counts as f64).max(1.0).sqrt() / n)
        })
        .collect();
    if data.iter().all(|d| d.1 == 0.0) {
        return Err(Error::fit("no retrieved counts"));
    }

    // log-linear start, weighted by counts
    let pos: Vec<_> = series.iter().zip(&data).filter(|(p, _)| p.counts > 0).collect();
    if pos.len() < 2 {
        return Err(Error::fit("too few non-zero points to start the fit"));
    }
    let (mut sw, mut st, mut sl, mut stt, mut stl) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, d) in &pos {
        let w = p.counts as f64;
        let l = d.1.ln();
        sw += w;
        st += w * d.0;
        sl += w * l;
        stt += w * d.0 * d.0;
        stl += w * d.0 * l;
    }
    let slope = (sw * stl - st * sl) / (sw * stt - st * st);
    if !(slope < 0.0) {
        return Err(Error::fit("data do not decay"));
    }
    let mut amp = ((sl - slope * st) / sw).exp();
    let mut tau = -1.0 / slope;

    let cost = |amp: f64, tau: f64| -> f64 {
        data.iter().map(|&(t, y, s)| ((y - amp * (-t / tau).exp()) / s).powi(2)).sum()
    };
    let mut current = cost(amp, tau);
    for _ in 0..MAX_ITER {
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for &(t, y, s) in &data {
            let e = (-t / tau).exp();
            let j = [e / s, amp * t / (tau * tau) * e / s];
            let r = (y - amp * e) / s;
            for a in 0..2 {
                jtr[a] += j[a] * r;
                for b in 0..2 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if !(det.abs() > 0.0) {
            return Err(Error::fit("singular lifetime Jacobian"));
        }
        let da = (jtj[1][1] * jtr[0] - jtj[0][1] * jtr[1]) / det;
        let dt = (jtj[0][0] * jtr[1] - jtj[1][0] * jtr[0]) / det;
        // halve until the cost does not increase and τ stays positive
        let mut lambda = 1.0;
        let (mut na, mut nt, mut nc) = (amp, tau, current);
        for _ in 0..60 {
            na = amp + lambda * da;
            nt = tau + lambda * dt;
            if nt > 0.0 {
                nc = cost(na, nt);
                if nc <= current {
                    break;
                }
            }
            lambda *= 0.5;
        }
        let rel = ((na - amp) / amp).abs().max(((nt - tau) / tau).abs());
        amp = na;
        tau = nt;
        current = nc;
        if rel < REL_STEP_TOL {
            break;
        }
    }
    if !(tau > 0.0) || !tau.is_finite() || !(amp > 0.0) {
        return Err(Error::fit(format!("lifetime fit diverged (τ = {tau} ns)")));
    }
    Ok((amp, tau))
}

pub fn fit_lifetime(series: &[LifetimePoint], mc: &MonteCarloConfig) -> Result<LifetimeFit> {
    let (amplitude, tau) = lifetime_point(series)?;
    let draws = run(mc, |rng| {
        let r: Vec<_> = series.iter().map(|p| LifetimePoint { counts: poisson(p.counts as f64, rng), ..*p }).collect();
        lifetime_point(&r).ok().map(|(_, t)| t)
    });
    Ok(LifetimeFit { amplitude, tau: FitResult::from_summary(tau, &summarize(&draws), mc.seed) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nnls_unconstrained_interior() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = nnls(&a, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nnls_pins_negative_component() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![-1.0, 2.0]);
        let x = nnls(&a, &b).unwrap();
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lifetime_rejects_flat_and_empty() {
        let flat: Vec<_> = (1..6)
            .map(|k| LifetimePoint { storage_time_ns: 12.5 * k as f64, counts: 100, n_triggers: 10 })
            .collect();
        assert!(lifetime_point(&flat).is_err());
        let empty: Vec<_> = flat.iter().map(|p| LifetimePoint { counts: 0, ..*p }).collect();
        assert!(matches!(lifetime_point(&empty), Err(Error::Fit(_))));
    }
}
