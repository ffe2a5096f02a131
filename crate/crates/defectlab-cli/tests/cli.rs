use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use defectlab::defect_sim::{Model, SimConfig};
use defectlab_cli::config::{Sector, StateConfig};
use defectlab_cli::RunManifest;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn out_dir(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_defectlab")).arg("--out").arg(out).args(args).output().expect("binary runs")
}

fn manifest(out: &Path) -> RunManifest {
    let text = std::fs::read_to_string(out.join(defectlab_cli::MANIFEST_NAME)).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn reference_configs_match_the_built_in_scenarios() {
    for (file, model) in [("simulate_bosonic_type2.toml", Model::BosonicType2), ("simulate_super_type2.toml", Model::SuperType2)] {
        let text = std::fs::read_to_string(configs().join(file)).unwrap();
        assert_eq!(SimConfig::from_toml_str(&text).unwrap(), SimConfig::reference(model), "{file}");
    }
    for (file, sector) in [("bosonic.toml", Sector::Bosonic), ("super.toml", Sector::Super)] {
        let cfg = StateConfig::load(sector, Some(&configs().join(file))).unwrap();
        assert_eq!(cfg, StateConfig::defaults(sector), "{file}");
    }
    assert!(StateConfig::from_toml_str(Sector::Bosonic, "colour = 3").is_err());
}

#[test]
fn verify_algebra_passes_and_detects_a_fault() {
    let out = out_dir("algebra");
    let o = run(&out, &["verify-algebra", "--cases", "200"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let m = manifest(&out);
    assert!(m.pass);
    assert_eq!(m.command, "verify-algebra");
    for f in &m.outputs {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(m.outputs.contains(&"grassmann_properties.csv".to_string()));

    let bad = out_dir("algebra-perturbed");
    let o = run(&bad, &["verify-algebra", "--perturb", "--cases", "10"]);
    assert_eq!(o.status.code(), Some(1));
    let m = manifest(&bad);
    assert!(!m.checks.iter().find(|c| c.criterion == Some(1)).unwrap().pass);

    let big = out_dir("algebra-8");
    let o = run(&big, &["verify-algebra", "--generators", "8", "--cases", "100"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn reruns_are_identical_apart_from_timestamps() {
    let (a, b) = (out_dir("rerun-a"), out_dir("rerun-b"));
    for d in [&a, &b] {
        assert_eq!(run(d, &["verify-algebra", "--cases", "50"]).status.code(), Some(0));
    }
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma.outputs, mb.outputs);
    for f in &ma.outputs {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let strip = |m: RunManifest| RunManifest { started_unix: 0.0, finished_unix: 0.0, ..m };
    assert_eq!(strip(ma), strip(mb));
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    let out = out_dir("errors");
    let o = run(&out, &["backlund", "bosonic", "--config", "/nonexistent/backlund.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.join(defectlab_cli::MANIFEST_NAME).exists());

    let cfg = out.with_extension("lambda0.toml");
    std::fs::create_dir_all(cfg.parent().unwrap()).unwrap();
    std::fs::write(&cfg, "lambda = [0.0, 0.0]\n").unwrap();
    let o = run(&out, &["kmatrix", "bosonic_first", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    std::fs::write(&cfg, "n = 17\nwidth = 2.0\n").unwrap();
    let o = run(&out, &["backlund", "super", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&out, &["simulate", "--refine", "40"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&out, &["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_duration_simulation_gives_one_time_row() {
    let out = out_dir("t0");
    let cfg = configs().join("simulate_zero_time.toml");
    let o = run(&out, &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = std::fs::read_to_string(out.join("series.csv")).unwrap();
    let times: std::collections::BTreeSet<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(times.len(), 1);
    assert!(manifest(&out).outputs.contains(&"closure.csv".to_string()));
}

#[test]
fn disabling_defect_terms_is_a_passing_negative_control() {
    let out = out_dir("negative");
    let o = run(&out, &["simulate", "--disable-defect-terms"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let m = manifest(&out);
    assert_eq!(m.checks.len(), 1);
    assert!(m.checks[0].detail.starts_with("negative control passed"), "{}", m.checks[0].detail);
}

#[test]
fn kmatrix_reports_slopes_and_tables() {
    let out = out_dir("kmatrix");
    let o = run(&out, &["kmatrix", "bosonic_prime", "--refine", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = std::fs::read_to_string(out.join("kmatrix_bosonic_prime_convergence.csv")).unwrap();
    assert!(csv.starts_with("equation,level,nodes,max_norm,slope\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
}
