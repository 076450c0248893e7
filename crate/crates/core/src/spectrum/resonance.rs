//! Search for the operating point with the signal and control resonant and
//! the anti-Stokes field anti-resonant.
//!
//! The two knobs are a length offset within one signal wavelength and the
//! birefringent phase of the control polarisation. A dense grid locates the
//! basin, then a Nelder-Mead simplex polishes it.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::cavity::{BirefringentCavity, Channel, FieldResponse};
use super::SusceptibilityModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceSettings {
    pub length_steps: usize,
    pub phase_steps: usize,
    pub max_refine_iter: usize,
    /// Simplex size (in units of the search box) at which refinement stops.
    pub refine_tol: f64,
}

impl Default for ResonanceSettings {
    fn default() -> Self {
        Self {
            length_steps: 256,
            phase_steps: 256,
            max_refine_iter: 2000,
            refine_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleResonance {
    /// Offset added to the cavity's current `length_offset_nm`.
    pub length_offset_nm: f64,
    pub birefringent_phase_rad: f64,
    /// `T(ν_s) + T(ν_c) − T(ν_a)`.
    pub score: f64,
    pub t_signal: f64,
    pub t_control: f64,
    pub t_antistokes: f64,
    /// Largest signal transmission reachable at `ν_s`.
    pub t_signal_max: f64,
    /// Smallest anti-Stokes transmission reachable at `ν_a`.
    pub t_antistokes_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SearchOutcome {
    Found(TripleResonance),
    /// The best point does not put the signal above half its peak transmission.
    Infeasible(TripleResonance),
}

impl SearchOutcome {
    pub fn point(&self) -> &TripleResonance {
        match self {
            SearchOutcome::Found(p) | SearchOutcome::Infeasible(p) => p,
        }
    }
}

struct Objective<'a> {
    cavity: &'a BirefringentCavity,
    signal: FieldResponse,
    control: FieldResponse,
    antistokes: FieldResponse,
    wavelength_nm: f64,
}

impl Objective<'_> {
    fn parts(&self, length_nm: f64, phase: f64) -> (f64, f64, f64) {
        (
            self.signal.transmission_with(self.cavity, length_nm, phase),
            self.control.transmission_with(self.cavity, length_nm, phase),
            self.antistokes.transmission_with(self.cavity, length_nm, phase),
        )
    }

    /// Score at unit-box coordinates `(u, v)`, both wrapped to `[0, 1)`.
    fn score_unit(&self, u: f64, v: f64) -> f64 {
        let (s, c, a) = self.parts(
            u.rem_euclid(1.0) * self.wavelength_nm,
            v.rem_euclid(1.0) * TAU,
        );
        s + c - a
    }
}

pub fn find_triple_resonance(
    cavity: &BirefringentCavity,
    model: &SusceptibilityModel,
    nu_s: f64,
    nu_c: f64,
    nu_a: f64,
    settings: &ResonanceSettings,
) -> Result<SearchOutcome> {
    cavity.validate()?;
    model.validate()?;
    if !(nu_s < nu_c && nu_c < nu_a) {
        return Err(Error::domain("expected ν_s < ν_c < ν_a"));
    }
    let (lower, upper) = (nu_c - nu_s, nu_a - nu_c);
    if (lower - upper).abs() > 1e-9 * lower.max(upper) {
        return Err(Error::domain(format!(
            "control must sit midway between signal and anti-Stokes (gaps {lower} and {upper} GHz)"
        )));
    }
    if settings.length_steps < 2 || settings.phase_steps < 2 {
        return Err(Error::domain("search grid needs at least 2 steps per axis"));
    }

    let obj = Objective {
        cavity,
        signal: FieldResponse::new(cavity, model, nu_s, Channel::Signal)?,
        control: FieldResponse::new(cavity, model, nu_c, Channel::Control)?,
        antistokes: FieldResponse::new(cavity, model, nu_a, Channel::AntiStokes)?,
        wavelength_nm: cavity.wavelength_nm(nu_s),
    };

    let (mut best_u, mut best_v, mut best) = (0.0, 0.0, f64::NEG_INFINITY);
    for i in 0..settings.length_steps {
        let u = i as f64 / settings.length_steps as f64;
        for j in 0..settings.phase_steps {
            let v = j as f64 / settings.phase_steps as f64;
            let s = obj.score_unit(u, v);
            if s > best {
                (best_u, best_v, best) = (u, v, s);
            }
        }
    }

    let step = [
        1.0 / settings.length_steps as f64,
        1.0 / settings.phase_steps as f64,
    ];
    let (u, v) = nelder_mead_max(
        |p| obj.score_unit(p[0], p[1]),
        [best_u, best_v],
        step,
        settings.max_refine_iter,
        settings.refine_tol,
    );
    let (u, v) = if obj.score_unit(u, v) >= best {
        (u.rem_euclid(1.0), v.rem_euclid(1.0))
    } else {
        (best_u, best_v)
    };

    let length = u * obj.wavelength_nm;
    let phase = v * TAU;
    let (ts, tc, ta) = obj.parts(length, phase);
    let point = TripleResonance {
        length_offset_nm: length,
        birefringent_phase_rad: phase,
        score: ts + tc - ta,
        t_signal: ts,
        t_control: tc,
        t_antistokes: ta,
        t_signal_max: obj.signal.peak(),
        t_antistokes_min: obj.antistokes.trough(),
    };
    if ts > 0.5 * point.t_signal_max {
        Ok(SearchOutcome::Found(point))
    } else {
        Ok(SearchOutcome::Infeasible(point))
    }
}

/// Maximises `f` over the plane with a Nelder-Mead simplex.
fn nelder_mead_max<F>(f: F, start: [f64; 2], step: [f64; 2], max_iter: usize, tol: f64) -> (f64, f64)
where
    F: Fn([f64; 2]) -> f64,
{
    // minimise the negated objective
    let g = |p: [f64; 2]| -f(p);
    let mut simplex = [
        start,
        [start[0] + step[0], start[1]],
        [start[0], start[1] + step[1]],
    ];
    let mut values = simplex.map(g);

    for _ in 0..max_iter {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);

        let size = (1..3)
            .map(|k| (simplex[k][0] - simplex[0][0]).abs().max((simplex[k][1] - simplex[0][1]).abs()))
            .fold(0.0, f64::max);
        if size < tol {
            break;
        }

        let centroid = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let along = |t: f64| {
            [
                centroid[0] + t * (simplex[2][0] - centroid[0]),
                centroid[1] + t * (simplex[2][1] - centroid[1]),
            ]
        };

        let reflected = along(-1.0);
        let fr = g(reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = g(expanded);
            if fe < fr {
                simplex[2] = expanded;
                values[2] = fe;
            } else {
                simplex[2] = reflected;
                values[2] = fr;
            }
        } else if fr < values[1] {
            simplex[2] = reflected;
            values[2] = fr;
        } else {
            let contracted = if fr < values[2] { along(-0.5) } else { along(0.5) };
            let fc = g(contracted);
            if fc < values[2].min(fr) {
                simplex[2] = contracted;
                values[2] = fc;
            } else {
                for k in 1..3 {
                    simplex[k] = [
                        simplex[0][0] + 0.5 * (simplex[k][0] - simplex[0][0]),
                        simplex[0][1] + 0.5 * (simplex[k][1] - simplex[0][1]),
                    ];
                    values[k] = g(simplex[k]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    (simplex[best][0], simplex[best][1])
}
