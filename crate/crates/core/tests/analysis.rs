use cavmem::analysis::*;
use cavmem::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn no_mc() -> MonteCarloConfig {
    MonteCarloConfig { samples: 0, seed: 0 }
}

#[test]
fn mu1_exact_recovery() {
    let series: Vec<_> = [0.1, 0.25, 0.5, 1.0, 2.0]
        .iter()
        .map(|&m| {
            let signal = (m * 1e7_f64).round() as u64;
            CoherentPoint {
                mean_photon: m,
                counts: CountSet {
                    c_sc_out: signal + 1_700_000,
                    c_c_out: 1_700_000,
                    c_s_in: 1,
                    n_triggers: 1,
                    ..Default::default()
                },
            }
        })
        .collect();
    assert!((mu1_point(&series).unwrap() - 0.17).abs() < 1e-6);
}

#[test]
fn mu1_needs_signal_and_points() {
    let p = CoherentPoint {
        mean_photon: 1.0,
        counts: CountSet { c_sc_out: 10, c_c_out: 10, n_triggers: 1, ..Default::default() },
    };
    assert!(matches!(mu1_point(&[p]), Err(Error::Domain(_))));
    let q = CoherentPoint { mean_photon: 2.0, ..p };
    assert!(matches!(mu1_point(&[p, q]), Err(Error::Fit(_))));
    assert!(mu1_point(&[p, p]).is_err());
}

fn exact_noise(a: f64, b: f64, c: f64) -> Vec<NoisePoint> {
    [0.25, 0.5, 1.0, 1.5, 2.0, 3.0]
        .iter()
        .map(|&e| NoisePoint {
            energy_nj: e,
            noise_counts: ((a + b * e + c * e * e) * 1e13).round() as u64,
            n_triggers: 10_000_000_000_000,
            detection_efficiency: 1.0,
        })
        .collect()
}

#[test]
fn noise_scaling_exact_recovery() {
    let c = noise_scaling_point(&exact_noise(0.004, 0.002, 0.0027)).unwrap();
    for (got, want) in c.iter().zip([0.004, 0.002, 0.0027]) {
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
}

#[test]
fn pure_quadratic_pins_the_rest_at_zero() {
    let c = noise_scaling_point(&exact_noise(0.0, 0.0, 0.003)).unwrap();
    assert!(c[0].abs() < 1e-12 && c[1].abs() < 1e-12, "{c:?}");
    assert!((c[2] - 0.003).abs() < 1e-9);
}

#[test]
fn noise_scaling_rejects_degenerate_designs() {
    let mut pts = exact_noise(0.004, 0.002, 0.0027);
    pts.truncate(3);
    assert!(noise_scaling_point(&pts).is_err());
    let zeros: Vec<_> = (0..5).map(|i| NoisePoint { energy_nj: 0.0, noise_counts: i, ..pts[0] }).collect();
    assert!(noise_scaling_point(&zeros).is_err());
}

#[test]
fn lifetime_exact_recovery() {
    let series: Vec<_> = (1..=10)
        .map(|k| {
            let t = 12.5 * k as f64;
            LifetimePoint {
                storage_time_ns: t,
                counts: (1e15 * (-t / 95.0).exp()).round() as u64,
                n_triggers: 1_000_000,
            }
        })
        .collect();
    let (amp, tau) = lifetime_point(&series).unwrap();
    assert!((tau / 95.0 - 1.0).abs() < 1e-6);
    assert!((amp / 1e9 - 1.0).abs() < 1e-6);
}

#[test]
fn zero_amplitude_lifetime_fails() {
    let truth = LifetimeTruth { amplitude: 0.0, ..LifetimeTruth::default() };
    let series = generate_lifetime_series(&truth, 3).unwrap();
    assert!(matches!(fit_lifetime(&series, &no_mc()), Err(Error::Fit(_))));
}

#[test]
fn forward_model_snr() {
    let (m, eta, noise): (f64, f64, f64) = (0.7, 0.095, 0.015);
    let scale = 1e8_f64;
    let c = CountSet {
        c_sc_out: ((m * eta + noise) * scale).round() as u64,
        c_c_out: (noise * scale).round() as u64,
        n_triggers: 1,
        ..Default::default()
    };
    assert!((snr(&c).unwrap() - 4.4333).abs() < 1e-3);
}

#[test]
fn timetag_closed_loop_recovers_efficiency() {
    let truth = TimeTagTruth::default();
    let tags = generate_timetags(&truth, 17).unwrap();
    let mut buf = Vec::new();
    write_timetags(&tags, &mut buf).unwrap();
    let back = read_timetags(buf.as_slice()).unwrap();
    assert_eq!(back, tags);
    let h = histogram_span(&back, DEFAULT_BIN_WIDTH_PS, 0, 400).unwrap();
    let half = truth.storage_time_ps / 2;
    let read_in = Window::new(truth.read_in_ps - half, truth.read_in_ps + half).unwrap();
    let out_c = truth.read_in_ps + truth.storage_time_ps;
    let read_out = Window::new(out_c - half, out_c + half).unwrap();
    let counts = integrate_windows(&h, read_in, read_out, truth.n_triggers).unwrap();
    let eta = efficiency(&counts, &MonteCarloConfig { samples: 2_000, seed: 1 }).unwrap();
    assert!((eta.estimate - truth.efficiency).abs() < 3.0 * eta.std_error, "{eta:?}");
    assert!(eta.std_error > 0.0 && eta.std_error < 0.01);
}

#[test]
fn generators_are_byte_identical_per_seed() {
    let gen = |seed| {
        let mut a = Vec::new();
        write_timetags(&generate_timetags(&TimeTagTruth { n_triggers: 5_000, ..Default::default() }, seed).unwrap(), &mut a)
            .unwrap();
        write_coherent_series(&generate_coherent_series(&CoherentTruth::default(), seed).unwrap(), &mut a).unwrap();
        write_noise_series(&generate_noise_series(&NoiseTruth::default(), seed).unwrap(), &mut a).unwrap();
        write_lifetime_series(&generate_lifetime_series(&LifetimeTruth::default(), seed).unwrap(), &mut a).unwrap();
        a
    };
    assert_eq!(gen(5), gen(5));
    assert_ne!(gen(5), gen(6));
}

#[test]
fn series_roundtrip_through_csv() {
    let c = generate_coherent_series(&CoherentTruth::default(), 2).unwrap();
    let mut buf = Vec::new();
    write_coherent_series(&c, &mut buf).unwrap();
    assert_eq!(read_coherent_series(buf.as_slice()).unwrap(), c);
    let n = generate_noise_series(&NoiseTruth::default(), 2).unwrap();
    buf.clear();
    write_noise_series(&n, &mut buf).unwrap();
    assert_eq!(read_noise_series(buf.as_slice()).unwrap(), n);
    let l = generate_lifetime_series(&LifetimeTruth::default(), 2).unwrap();
    buf.clear();
    write_lifetime_series(&l, &mut buf).unwrap();
    assert_eq!(read_lifetime_series(buf.as_slice()).unwrap(), l);
}

#[test]
fn mc_error_shrinks_with_counts() {
    let base = CountSet { c_sc_out: 120, c_c_out: 20, c_s_out: 5, c_s_in: 1_000, n_triggers: 1, ..Default::default() };
    let mc = MonteCarloConfig { samples: 10_000, seed: 3 };
    let small = efficiency(&base, &mc).unwrap();
    let big = efficiency(&base.scaled(100), &mc).unwrap();
    assert_eq!(small.estimate, big.estimate);
    let ratio = (small.std_error / small.estimate) / (big.std_error / big.estimate);
    assert!((ratio / 10.0 - 1.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn mc_result_is_independent_of_thread_count() {
    let series = generate_coherent_series(&CoherentTruth::default(), 8).unwrap();
    let mc = MonteCarloConfig { samples: 400, seed: 12 };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| fit_mu1(&series, &mc).unwrap());
    let b = four.install(|| fit_mu1(&series, &mc).unwrap());
    assert_eq!(a, b);
}

fn within(v: &[(f64, f64)], truth: f64, k: f64) -> usize {
    v.iter().filter(|(est, err)| (est - truth).abs() <= k * err).count()
}

#[test]
fn closed_loop_coverage_of_reported_errors() {
    // reported MC errors should cover the truth at about the normal rate
    let mc = |seed| MonteCarloConfig { samples: 200, seed };
    let (ct, nt, lt) = (CoherentTruth::default(), NoiseTruth::default(), LifetimeTruth::default());
    let (mut mu, mut fwm, mut tau, mut coeff) = (vec![], vec![], vec![], [vec![], vec![], vec![]]);
    for seed in 0..1000u64 {
        let f = fit_mu1(&generate_coherent_series(&ct, seed).unwrap(), &mc(seed)).unwrap();
        mu.push((f.estimate, f.std_error));
        let n = fit_noise_scaling(&generate_noise_series(&nt, seed).unwrap(), 1.5, &mc(seed)).unwrap();
        fwm.push((n.fwm.estimate, n.fwm.std_error));
        for j in 0..3 {
            coeff[j].push((n.coefficients[j], n.covariance[j][j].sqrt()));
        }
        let l = fit_lifetime(&generate_lifetime_series(&lt, seed).unwrap(), &mc(seed)).unwrap();
        tau.push((l.tau.estimate, l.tau.std_error));
    }
    let truths = [nt.a, nt.b, nt.c];
    let report = [
        ("mu1", within(&mu, ct.mu1(), 2.0)),
        ("fwm", within(&fwm, nt.noise_at(1.5) - nt.a - nt.b * 1.5, 2.0)),
        ("tau", within(&tau, lt.tau_ns, 2.0)),
        ("a", within(&coeff[0], truths[0], 2.0)),
        ("b", within(&coeff[1], truths[1], 2.0)),
        ("c", within(&coeff[2], truths[2], 2.0)),
    ];
    for (name, hits) in report {
        assert!(hits >= 930, "{name}: {hits}/1000 within 2σ");
    }
}

/// Every subset of free coefficients, solved unconstrained; the best
/// feasible one is the constrained optimum.
fn nnls_oracle(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let n = a.ncols();
    let mut best = f64::INFINITY;
    for mask in 0..(1u32 << n) {
        let cols: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        let mut x = DVector::zeros(n);
        if !cols.is_empty() {
            let sub = DMatrix::from_fn(a.nrows(), cols.len(), |i, k| a[(i, cols[k])]);
            let sol = sub.svd(true, true).solve(b, 1e-14).unwrap();
            if sol.iter().any(|&v| v < 0.0) {
                continue;
            }
            for (k, &j) in cols.iter().enumerate() {
                x[j] = sol[k];
            }
        }
        best = best.min((a * x - b).norm_squared());
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn nnls_matches_active_set_enumeration(
        energies in prop::collection::btree_set(0u32..400, 4..9),
        ys in prop::collection::vec(-1.0f64..1.0, 9),
    ) {
        let e: Vec<f64> = energies.iter().map(|&k| k as f64 / 100.0).collect();
        let a = DMatrix::from_fn(e.len(), 3, |i, j| e[i].powi(j as i32));
        let b = DVector::from_iterator(e.len(), ys.iter().take(e.len()).copied());
        let x = nnls(&a, &b).unwrap();
        prop_assert!(x.iter().all(|&v| v >= 0.0));
        let cost = (&a * &x - &b).norm_squared();
        let best = nnls_oracle(&a, &b);
        prop_assert!(cost <= best * (1.0 + 1e-9) + 1e-12, "{} vs {}", cost, best);
    }

    #[test]
    fn histogram_conserves_counts(
        times in prop::collection::vec((0u64..3, 0u64..100_000), 0..400),
        width in 1u64..500,
        origin in 0u64..2_000,
        bins in prop::option::of(0usize..300),
    ) {
        let recs: Vec<_> = times
            .iter()
            .enumerate()
            .map(|(i, &(c, t))| TimeTagRecord { trigger_id: i as u64, channel: Channel::ALL[c as usize], time_ps: t })
            .collect();
        let h = match bins {
            Some(n) => histogram_span(&recs, width, origin, n).unwrap(),
            None => histogram(&recs, width, origin).unwrap(),
        };
        for ch in Channel::ALL {
            let n = recs.iter().filter(|r| r.channel == ch).count() as u64;
            prop_assert_eq!(h.total(ch), n);
            if bins.is_none() {
                prop_assert_eq!(h.overflow[ch as usize], 0);
            }
        }
    }

    #[test]
    fn efficiency_is_scale_invariant(
        sc in 0u64..10_000, c in 0u64..1_000, s in 0u64..1_000, s_in in 1u64..100_000, k in 1u64..1_000,
    ) {
        let base = CountSet { c_sc_out: sc, c_c_out: c, c_s_out: s, c_s_in: s_in, n_triggers: 1, ..Default::default() };
        let a = efficiency_point(&base).unwrap();
        let b = efficiency_point(&base.scaled(k)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn mu1_ignores_point_order(seed in any::<u64>(), rot in 0usize..7) {
        let mut series = generate_coherent_series(&CoherentTruth::default(), seed).unwrap();
        let a = mu1_point(&series).unwrap();
        series.rotate_left(rot);
        series.reverse();
        let b = mu1_point(&series).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }
}
