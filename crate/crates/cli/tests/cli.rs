//! End-to-end tests of the `pvqc` binary: exit codes, output formats, and
//! rerun determinism.

use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn pvqc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pvqc"))
        .args(args)
        .output()
        .expect("binary should run")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

#[test]
fn basis_prints_dimension_and_states() {
    let out = pvqc(&["basis", "--modes", "4", "--photons", "2"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("dim=10"));

    let out = pvqc(&["basis", "--modes", "2", "--photons", "2"]);
    let text = stdout(&out);
    assert!(text.contains("dim=3"));
    let state_lines = text.lines().filter(|l| l.contains("(")).count();
    assert_eq!(state_lines, 3);
}

#[test]
fn basis_rejects_zero_modes_with_usage_exit() {
    let out = pvqc(&["basis", "--modes", "0", "--photons", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn hom_prints_probabilities_and_passes() {
    let out = pvqc(&["hom"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("p(2,0)=0.5000000000"));
    assert!(text.contains("p(1,1)=0.0000000000"));
    assert!(text.contains("p(0,2)=0.5000000000"));
    assert!(text.contains("PASS"));
}

#[test]
fn purity_writes_ordered_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = pvqc(&[
        "purity",
        "--regimes",
        "fock,unbunched,dual_rail",
        "--m-values",
        "4,6",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("purity.csv")).unwrap();
    assert!(csv.starts_with("regime,m,n,subspace_dim,purity"));
    assert_eq!(csv.lines().count(), 7);
    assert!(dir.path().join("resolved_config.toml").exists());

    // Strict purity ordering per size.
    let purity = |regime: &str, m: &str| -> f64 {
        csv.lines()
            .find(|l| l.starts_with(&format!("{regime},{m},")))
            .unwrap()
            .rsplit(',')
            .next()
            .unwrap()
            .parse()
            .unwrap()
    };
    for m in ["4", "6"] {
        let f = purity("fock", m);
        let u = purity("unbunched", m);
        let d = purity("dual_rail", m);
        assert!(f > u && u > d, "m={m}: {f} {u} {d}");
    }
}

#[test]
fn purity_single_regime_one_row_per_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = pvqc(&[
        "purity",
        "--regimes",
        "unbunched",
        "--m-values",
        "4,6",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("purity.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn purity_rejects_unknown_regime() {
    let dir = tempfile::tempdir().unwrap();
    let out = pvqc(&[
        "purity",
        "--regimes",
        "bogus",
        "--m-values",
        "4",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bogus"));
}

#[test]
fn sweep_smoke_cell_is_fast_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let d = dir.path().join(sub);
        let started = Instant::now();
        let out = pvqc(&[
            "sweep",
            "--regimes",
            "unbunched",
            "--inits",
            "uniform",
            "--n-values",
            "2",
            "--samples",
            "3",
            "--seed",
            "7",
            "--output-dir",
            d.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        assert!(started.elapsed().as_secs() < 5, "smoke cell exceeded 5 s");
        std::fs::read(d.join("results.csv")).unwrap()
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b, "rerun changed CSV bytes");

    let echo =
        std::fs::read_to_string(dir.path().join("a").join("resolved_config.toml")).unwrap();
    assert!(echo.contains("master_seed = 7"));
    assert!(echo.contains("samples = 3"));
}

#[test]
fn sweep_requires_output_dir() {
    let out = pvqc(&[
        "sweep",
        "--regimes",
        "fock",
        "--inits",
        "uniform",
        "--n-values",
        "2",
        "--samples",
        "3",
        "--seed",
        "7",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("output"));
}

#[test]
fn sweep_config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(
        &cfg_path,
        format!(
            "regimes = [\"unbunched\"]\ninits = [\"uniform\"]\nn_values = [2]\n\
             samples = 3\nmaster_seed = 5\noutput_dir = \"{}\"\n",
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let out = pvqc(&[
        "sweep",
        "--config",
        cfg_path.to_str().unwrap(),
        "--samples",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("out").join("results.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains(",4,"), "flag override lost");
}

#[test]
fn sweep_rejects_unknown_config_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(&cfg_path, "regimes = [\"fock\"]\nbanana = 3\n").unwrap();
    let out = pvqc(&["sweep", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("banana"));
}

fn write_synthetic_csv(path: &Path, f: impl Fn(f64) -> f64) {
    let mut text = String::from("regime,init,N,m,n,P,S,var_mean,var_se,master_seed,epsilon\n");
    for n in 3..=10 {
        let v = f(n as f64);
        text.push_str(&format!(
            "fock,uniform,{n},{},{n},{},200,{v:.16e},1e-5,42,1e-12\n",
            2 * n,
            4 * n * n
        ));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn fit_recovers_exact_exponential_and_prefers_it() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("results.csv");
    write_synthetic_csv(&csv, |n| 2.0 * (-0.7 * n).exp());
    let out_dir = dir.path().join("fits");
    let out = pvqc(&[
        "fit",
        "--csv",
        csv.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = std::fs::read_to_string(out_dir.join("fit_fock_uniform_exponential.txt")).unwrap();
    let a_line = report.lines().find(|l| l.starts_with("a: ")).unwrap();
    let a: f64 = a_line[3..].trim().parse().unwrap();
    assert!((a - 0.7).abs() < 1e-10, "recovered a = {a}");
    let cmp = std::fs::read_to_string(out_dir.join("aic_comparison.txt")).unwrap();
    assert!(cmp.contains("preferred: exponential"));
}

#[test]
fn fit_prefers_power_on_power_data() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("results.csv");
    write_synthetic_csv(&csv, |n| 3.0 * n.powf(-2.3));
    let out_dir = dir.path().join("fits");
    let out = pvqc(&[
        "fit",
        "--csv",
        csv.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
        "--models",
        "exponential,power",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let cmp = std::fs::read_to_string(out_dir.join("aic_comparison.txt")).unwrap();
    assert!(cmp.contains("preferred: power"));
}

#[test]
fn fit_handles_mode_sweeps_on_the_m_axis() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("results.csv");
    let mut text = String::from("regime,init,N,m,n,P,S,var_mean,var_se,master_seed,epsilon\n");
    for m in [8usize, 10, 12, 14, 16] {
        let v = 0.5 * (m as f64).powf(-1.8);
        text.push_str(&format!(
            "unbunched,uniform,4,{m},4,{},100,{v:.16e},1e-6,42,1e-12\n",
            m * m
        ));
    }
    std::fs::write(&csv, text).unwrap();

    // Repeated N values must be rejected on the default axis...
    let out = pvqc(&[
        "fit",
        "--csv",
        csv.to_str().unwrap(),
        "--output-dir",
        dir.path().join("bad").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--x-axis m"));

    // ...and fit cleanly against m.
    let out_dir = dir.path().join("fits");
    let out = pvqc(&[
        "fit",
        "--csv",
        csv.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
        "--models",
        "power",
        "--x-axis",
        "m",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report =
        std::fs::read_to_string(out_dir.join("fit_unbunched_uniform_N4_power.txt")).unwrap();
    let c_line = report.lines().find(|l| l.starts_with("c: ")).unwrap();
    let c: f64 = c_line[3..].trim().parse().unwrap();
    assert!((c - 1.8).abs() < 1e-10, "recovered exponent {c}");
}

#[test]
fn fit_skips_infeasible_default_models_but_honors_explicit_requests() {
    // Three points support the linear models but not the cubic; the default
    // selection must degrade gracefully, an explicit request must not.
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("results.csv");
    let mut text = String::from("regime,init,N,m,n,P,S,var_mean,var_se,master_seed,epsilon\n");
    for n in 3..=5 {
        let v = ((-0.5) * n as f64).exp();
        text.push_str(&format!(
            "fock,uniform,{n},{},{n},{},100,{v:.16e},1e-6,42,1e-12\n",
            2 * n,
            4 * n * n
        ));
    }
    std::fs::write(&csv, text).unwrap();

    let out_dir = dir.path().join("fits");
    let out = pvqc(&[
        "fit",
        "--csv",
        csv.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("skipped"));
    assert!(out_dir.join("fit_fock_uniform_exponential.txt").exists());
    assert!(out_dir.join("aic_comparison.txt").exists());
    assert!(!out_dir.join("fit_fock_uniform_cubic_log.txt").exists());

    let out = pvqc(&[
        "fit",
        "--csv",
        csv.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
        "--models",
        "cubic_log",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_reports_malformed_csv_line() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("results.csv");
    std::fs::write(
        &csv,
        "regime,init,N,m,n,P,S,var_mean,var_se,master_seed,epsilon\nfock,uniform,oops\n",
    )
    .unwrap();
    let out = pvqc(&[
        "fit",
        "--csv",
        csv.to_str().unwrap(),
        "--output-dir",
        dir.path().join("fits").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn gradcheck_passes_with_default_and_custom_step() {
    let out = pvqc(&["gradcheck"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("PASS"));

    let out = pvqc(&["gradcheck", "--step", "3e-6"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn gradcheck_exits_one_when_the_check_fails() {
    // A coarse step makes the finite-difference oracle miss the tolerance.
    let out = pvqc(&["gradcheck", "--step", "1e-1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("check failed"));
}

#[test]
fn help_is_available_on_every_subcommand() {
    for sub in ["basis", "hom", "purity", "sweep", "fit", "gradcheck"] {
        let out = pvqc(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "--help failed for {sub}");
        assert!(stdout(&out).contains("Usage"));
    }
    let out = pvqc(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn workers_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pvqc"))
        .env("PVQC_WORKERS", "1")
        .args([
            "sweep",
            "--regimes",
            "unbunched",
            "--inits",
            "uniform",
            "--n-values",
            "2",
            "--samples",
            "3",
            "--seed",
            "7",
            "--output-dir",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let echo = std::fs::read_to_string(dir.path().join("resolved_config.toml")).unwrap();
    assert!(echo.contains("workers = 1"));
}
