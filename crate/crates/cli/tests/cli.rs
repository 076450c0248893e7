use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cavmem_cli::RunConfig;
use serde_json::Value;

fn reference_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("config/reference.toml")
}

fn cavmem(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cavmem"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p
}

fn report(out: &Path, cmd: &str) -> Value {
    serde_json::from_slice(&std::fs::read(out.join(format!("{cmd}_report.json"))).unwrap()).unwrap()
}

fn row<'a>(report: &'a Value, quantity: &str) -> &'a Value {
    report["reproduction"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["quantity"] == quantity)
        .unwrap_or_else(|| panic!("no row {quantity}"))
}

#[test]
fn committed_reference_config_is_the_default() {
    let cfg = RunConfig::load(&reference_path()).unwrap();
    assert_eq!(cfg, RunConfig::default());
    assert_eq!(cfg.hash(), RunConfig::default().hash());
}

#[test]
fn config_hash_is_stable_across_round_trips() {
    let mut cfg = RunConfig::load(&reference_path()).unwrap();
    cfg.seed = 4242;
    cfg.model.pulse.detuning_ghz = 15.200_000_000_000_001;
    let h = cfg.hash();
    let once = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    let twice = RunConfig::from_toml(&once.to_toml().unwrap()).unwrap();
    assert_eq!(once.hash(), h);
    assert_eq!(twice.hash(), h);
    assert_eq!(h.len(), 64);

    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &cfg.to_toml().unwrap());
    let out = dir.path().join("o");
    assert!(cavmem(&["design", "--config", path.to_str().unwrap()], &out).status.success());
    assert_eq!(report(&out, "design")["config_hash"], h.as_str());
}

#[test]
fn design_table_matches_reference_cavities() {
    let dir = tempfile::tempdir().unwrap();
    let o = cavmem(&["design"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("design.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    assert!((rows[0][1] - 36.8).abs() < 1e-9 && (rows[0][2] - 8.147).abs() < 5e-4);
    assert!((rows[2][1] - 7.36).abs() < 1e-9 && (rows[2][2] - 40.73).abs() < 5e-3);
    let r = report(dir.path(), "design");
    assert_eq!(r["tool"], "cavmem");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(row(&r, "suppression_factor_losses")["computed"], 0.25);
    assert_eq!(row(&r, "suppression_factor_losses")["paper"], 0.24);
}

#[test]
fn design_follows_the_hyperfine_splitting() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.model.atoms.hyperfine_splitting_ghz = 1.0;
    let path = write_config(dir.path(), &cfg.to_toml().unwrap());
    let out = dir.path().join("o");
    assert!(cavmem(&["design", "--config", path.to_str().unwrap()], &out).status.success());
    let r = report(&out, "design");
    assert_eq!(r["outputs"]["fsr_table"][0]["fsr_ghz"], 4.0);
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let body = "seed = 11\n[lock]\nsteps = 20000\n[lock.error_signal]\namplitude_v = 1.0\nperiod_nm = 632.8\nnoise_sigma_v = 0.01\nadc_bits = 12\n";
    let path = write_config(dir.path(), body);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for cmd in ["design", "simulate", "lock", "synth"] {
        for out in [&a, &b] {
            assert!(cavmem(&[cmd, "--config", path.to_str().unwrap()], out).status.success(), "{cmd}");
        }
    }
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 12);
    for n in names {
        assert_eq!(std::fs::read(a.join(&n)).unwrap(), std::fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(cavmem(&["synth"], &a).status.success());
    assert!(cavmem(&["synth", "--seed", "9"], &b).status.success());
    let (ra, rb) = (report(&a, "synth"), report(&b, "synth"));
    assert_eq!(rb["seed"], 9);
    assert_ne!(ra["config_hash"], rb["config_hash"]);
    assert_ne!(
        std::fs::read(a.join("timetags.csv")).unwrap(),
        std::fs::read(b.join("timetags.csv")).unwrap()
    );
}

#[test]
fn single_zero_energy_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "[sweep]\nstart_nj = 0.0\nstop_nj = 0.0\npoints = 1\n");
    let out = dir.path().join("o");
    assert!(cavmem(&["simulate", "--config", path.to_str().unwrap()], &out).status.success());
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines, ["energy_nj,eta_tot,n_noise", "0.000000,0.000000000e0,0.000000000e0"]);
}

#[test]
fn simulate_reports_the_convention_table() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cavmem(&["simulate"], dir.path()).status.success());
    let r = report(dir.path(), "simulate");
    assert_eq!(r["outputs"]["interior_maxima"], 1);
    assert_eq!(r["outputs"]["conventions"].as_array().unwrap().len(), 8);
    assert_eq!(row(&r, "interior_maxima")["pass"], true);
    let n = row(&r, "n_noise_at_peak[fwhm,cooperativity]");
    assert_eq!(n["paper"], 0.005);
    assert!(n["pass"].is_boolean());
}

#[test]
fn json_format_writes_json_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cavmem(&["simulate", "--format", "json"], dir.path()).status.success());
    let v: Value = serde_json::from_slice(&std::fs::read(dir.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3000);
    assert!(v[0]["eta_tot"].is_number());
    assert!(!dir.path().join("sweep.csv").exists());
}

#[test]
fn quiet_lock_stays_within_one_lsb() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cavmem(&["lock"], dir.path()).status.success());
    let r = report(dir.path(), "lock");
    let m = &r["outputs"]["metrics"];
    assert_eq!(m["lock_retained"], true);
    assert!(m["rms_error_nm"].as_f64().unwrap() <= r["outputs"]["adc_lsb_nm"].as_f64().unwrap());
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next().unwrap(), "t_s,length_error_nm,fast_v,slow_v,error_signal_v");
    assert_eq!(traj.lines().count(), 10_001);
}

#[test]
fn empty_design_cavity_is_anti_resonant_for_anti_stokes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cavmem(&["resonance"], dir.path()).status.code(), Some(0));
    let r = report(dir.path(), "resonance");
    assert_eq!(r["outputs"]["outcome"]["status"], "found");
    assert_eq!(row(&r, "antistokes_offset_fsr")["pass"], true);
    assert_eq!(row(&r, "t_antistokes_above_trough")["pass"], true);
}

#[test]
fn infeasible_search_exits_3_with_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.spectrum.cavity.r1 = 0.99;
    cfg.spectrum.cavity.r2 = 0.99;
    cfg.resonance.settings.length_steps = 2;
    cfg.resonance.settings.phase_steps = 2;
    cfg.resonance.settings.max_refine_iter = 0;
    let path = write_config(dir.path(), &cfg.to_toml().unwrap());
    let out = dir.path().join("o");
    let o = cavmem(&["resonance", "--config", path.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(3));
    let r = report(&out, "resonance");
    assert_eq!(r["outputs"]["outcome"]["status"], "infeasible");
    assert!(r["failure"].is_string());
}

#[test]
fn spectrum_reproduces_measured_visibilities() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cavmem(&["spectrum"], dir.path()).status.success());
    let r = report(dir.path(), "spectrum");
    for q in ["visibility_signal", "visibility_control", "visibility_antistokes"] {
        assert_eq!(row(&r, q)["pass"], true, "{q}");
    }
    let csv = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9002);
}

#[test]
fn synth_then_analyze_recovers_the_truth() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cavmem(&["synth", "--seed", "3"], dir.path()).status.success());
    assert!(cavmem(&["analyze", "--seed", "3"], dir.path()).status.success());
    let a: Value = serde_json::from_slice(&std::fs::read(dir.path().join("analysis.json")).unwrap()).unwrap();
    let keys: Vec<&str> = a.as_object().unwrap().keys().map(String::as_str).collect();
    let mut want = [
        "efficiency", "efficiency_err", "mu1", "mu1_err", "fwm_component", "fwm_err", "lifetime_ns", "lifetime_err",
        "windows", "seed", "n_mc",
    ];
    want.sort();
    assert_eq!(keys, want);
    let truth = RunConfig::default().synth;
    for (est, err, value) in [
        ("efficiency", "efficiency_err", truth.timetags.efficiency),
        ("mu1", "mu1_err", truth.coherent.mu1()),
        ("fwm_component", "fwm_err", truth.noise.c * 1.5 * 1.5),
        ("lifetime_ns", "lifetime_err", truth.lifetime.tau_ns),
    ] {
        let (e, s) = (a[est].as_f64().unwrap(), a[err].as_f64().unwrap());
        assert!(s > 0.0);
        assert!((e - value).abs() <= 3.0 * s, "{est}: {e} ± {s} vs {value}");
    }
    assert_eq!(a["n_mc"], 10_000);
}

#[test]
fn analyze_reads_json_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let body = "[analysis]\ntimetags_file = \"timetags.json\"\ncoherent_file = \"coherent_series.json\"\n\
                noise_file = \"noise_series.json\"\nlifetime_file = \"lifetime_series.json\"\nmc_samples = 200\n";
    let path = write_config(dir.path(), body);
    let out = dir.path().join("o");
    let cfg = ["--config", path.to_str().unwrap()];
    assert!(cavmem(&[&["synth", "--format", "json"][..], &cfg].concat(), &out).status.success());
    let o = cavmem(&[&["analyze"][..], &cfg].concat(), &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report(&out, "analyze")["outputs"]["summary"]["n_mc"], 200);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let bad = write_config(dir.path(), "[model.atoms]\noptical_depth_typo = 3\n");
    let o = cavmem(&["design", "--config", bad.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("optical_depth_typo"));

    let o = cavmem(&["design", "--config", dir.path().join("missing.toml").to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));

    let invalid = write_config(dir.path(), "[design]\nvisibility = 2.0\n");
    assert_eq!(cavmem(&["design", "--config", invalid.to_str().unwrap()], &out).status.code(), Some(2));

    // no inputs in an empty directory
    assert_eq!(cavmem(&["analyze"], &dir.path().join("empty")).status.code(), Some(2));
    assert_eq!(cavmem(&["frobnicate"], &out).status.code(), Some(2));
}

#[test]
fn malformed_time_tags_are_reported_with_their_line() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cavmem(&["synth"], dir.path()).status.success());
    let p = dir.path().join("timetags.csv");
    let mut text = std::fs::read_to_string(&p).unwrap();
    text.push_str("7,xx,100\n");
    let line = text.lines().count();
    std::fs::write(&p, text).unwrap();
    let o = cavmem(&["analyze"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(&format!("line {line}")));
}

#[test]
fn failed_fit_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cavmem(&["synth"], dir.path()).status.success());
    // counts that grow with storage time cannot be an exponential decay
    let mut body = String::from("storage_time_ns,counts,n_triggers\n");
    for k in 1..=5 {
        body.push_str(&format!("{},{},200000\n", 10 * k, 100 * k));
    }
    std::fs::write(dir.path().join("lifetime_series.csv"), body).unwrap();
    let o = cavmem(&["analyze"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
