use cavmem::lock::*;
use proptest::prelude::*;

fn reference() -> (PlantState, ErrorSignalModel, ControllerConfig) {
    let cfg = ControllerConfig::reference();
    (PlantState::reference(&cfg), ErrorSignalModel::default(), cfg)
}

#[test]
fn quiescent_error_within_one_adc_lsb() {
    let (plant, model, cfg) = reference();
    let run = simulate(&plant, &model, &cfg, 50_000, 0).unwrap();
    assert!(run.metrics.max_error_nm <= model.lsb_length_nm());
    assert!(run.metrics.rms_error_nm <= run.metrics.max_error_nm);
}

fn ramp_increments(slow_step_v: f64) -> (u64, f64) {
    let (mut plant, model, mut cfg) = reference();
    cfg.slow_step_v = slow_step_v;
    // 900 nm over the horizon, about twice the fast half-span
    plant.drift_rate_nm_per_s = 300.0;
    let run = simulate(&plant, &model, &cfg, 30_000, 0).unwrap();
    let max_fast = run.trajectory.iter().map(|p| p.fast_v.abs()).fold(0.0, f64::max);
    assert!(run.metrics.lock_retained);
    (run.metrics.slow_increments, max_fast)
}

#[test]
fn ramp_hands_off_to_slow_offset() {
    let cfg = ControllerConfig::reference();
    let (n, max_fast) = ramp_increments(cfg.slow_step_v);
    assert!(n > 0);
    assert!(max_fast < 0.5 * cfg.fast_output_range_v);
}

#[test]
fn doubling_slow_step_halves_increments() {
    let (n1, _) = ramp_increments(0.5);
    let (n2, _) = ramp_increments(1.0);
    assert!((n1 as i64 - 2 * n2 as i64).abs() <= 2, "{n1} vs {n2}");
    assert!(((n1 as f64 / 2.0) - n2 as f64).abs() <= 1.0);
}

#[test]
fn step_disturbance_reacquires() {
    let (mut plant, model, cfg) = reference();
    plant.step_nm = 100.0;
    plant.step_time_s = 0.1;
    let run = simulate(&plant, &model, &cfg, 5_000, 0).unwrap();
    let at = 1_000;
    assert!(run.trajectory[at].length_error_nm > 99.0);
    let resolution = actuator_lsb_nm(&plant, &cfg);
    let back = reacquisition_step(&run.trajectory, at, resolution).unwrap();
    assert!(back - at <= 200, "took {} steps", back - at);
    // settles into a limit cycle of at most one DAC code
    let worst = run.trajectory[back + 1_000..].iter().map(|p| p.length_error_nm.abs()).fold(0.0, f64::max);
    assert!(worst < resolution, "worst {worst} vs {resolution}");
}

#[test]
fn nominal_million_step_run_keeps_lock() {
    let (mut plant, mut model, cfg) = reference();
    plant.drift_rate_nm_per_s = 1.0;
    plant.random_walk_sigma_nm = 0.01;
    model.noise_sigma_v = 0.002;
    let run = simulate(&plant, &model, &cfg, 1_000_000, 7).unwrap();
    assert!(run.metrics.lock_retained);
    assert_eq!(run.metrics.retained_steps, 1_000_000);
    assert!(!run.metrics.range_exhausted);
}

#[test]
fn exhausted_actuator_is_flagged() {
    let (mut plant, model, cfg) = reference();
    plant.actuator_range_v = 12.0;
    plant.drift_rate_nm_per_s = 300.0;
    let run = simulate(&plant, &model, &cfg, 60_000, 0).unwrap();
    assert!(run.metrics.range_exhausted);
    assert!(run.trajectory.iter().all(|p| p.slow_v.abs() <= 6.0));
    assert!(!run.metrics.lock_retained);
}

#[test]
fn seeded_runs_are_bit_identical() {
    let (mut plant, mut model, cfg) = reference();
    plant.random_walk_sigma_nm = 0.05;
    model.noise_sigma_v = 0.01;
    let a = simulate(&plant, &model, &cfg, 20_000, 99).unwrap();
    let b = simulate(&plant, &model, &cfg, 20_000, 99).unwrap();
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    write_trajectory_csv(&a.trajectory, &mut ca).unwrap();
    write_trajectory_csv(&b.trajectory, &mut cb).unwrap();
    assert_eq!(ca, cb);
    for (p, q) in a.trajectory.iter().zip(&b.trajectory) {
        assert_eq!(p.length_error_nm.to_bits(), q.length_error_nm.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn outputs_stay_within_their_ranges(
        drift in -500.0f64..500.0,
        walk in 0.0f64..0.5,
        noise in 0.0f64..0.05,
        start in -150.0f64..150.0,
        range in 2.0f64..200.0,
        seed in any::<u64>(),
    ) {
        let (mut plant, mut model, cfg) = reference();
        plant.drift_rate_nm_per_s = drift;
        plant.random_walk_sigma_nm = walk;
        plant.length_error_nm = start;
        plant.actuator_range_v = range;
        model.noise_sigma_v = noise;
        let run = simulate(&plant, &model, &cfg, 4_000, seed).unwrap();
        let half = 0.5 * cfg.fast_output_range_v;
        for p in &run.trajectory {
            prop_assert!(p.fast_v.abs() <= half);
            prop_assert!(p.slow_v.abs() <= 0.5 * range);
        }
        prop_assert!(run.metrics.retained_steps <= 4_000);
        if run.metrics.acquired_at_step.is_some() {
            prop_assert!(run.metrics.rms_error_nm <= run.metrics.max_error_nm);
        }
    }

    #[test]
    fn quantized_signal_is_on_the_code_grid(len in -2_000.0f64..2_000.0, bits in 1u32..16) {
        let model = ErrorSignalModel { adc_bits: bits, ..ErrorSignalModel::default() };
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let v = error_signal(&model, len, &mut rng);
        let codes = v / model.lsb_v();
        prop_assert!((codes - codes.round()).abs() < 1e-9);
        prop_assert!(v.abs() <= model.amplitude_v);
    }
}
