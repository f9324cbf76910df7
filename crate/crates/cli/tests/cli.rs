use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ajdkit::io::{matrix_set_to_string, matrix_to_string, MatrixJson};
use ajdkit::{random, C64};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn ajdkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ajdkit")).args(args).env_remove("AJDKIT_THREADS").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn real_set(dir: &Path) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ms: Vec<DMatrix<f64>> = (0..5).map(|_| random::hpd::<f64, _>(&mut rng, 4, 0.2).into_matrix()).collect();
    write(dir, "set.json", &matrix_set_to_string(&ms))
}

#[test]
fn measure_of_a_diagonal_matrix_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 3.0, 0.5]));
    let input = write(dir.path(), "a.json", &matrix_to_string(&m));
    let o = ajdkit(&["measure", "--input", input.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let js = stdout_json(&o);
    let map = js.as_object().unwrap();
    assert_eq!(map.len(), 9);
    assert!(map.values().all(|v| v.as_f64() == Some(0.0)), "{js}");
}

#[test]
fn complex_input_is_measured_as_complex() {
    let dir = tempfile::tempdir().unwrap();
    let a: DMatrix<C64> = random::hpd::<C64, _>(&mut ChaCha8Rng::seed_from_u64(9), 3, 0.3).into_matrix();
    let input = write(dir.path(), "a.json", &matrix_to_string(&a));
    let js: MatrixJson = serde_json::from_str(&std::fs::read_to_string(&input).unwrap()).unwrap();
    assert!(js.has_imaginary_part());
    let o = ajdkit(&["measure", "--input", input.to_str().unwrap(), "--alpha", "0.25"]);
    assert_eq!(code(&o), 0);
    let want = ajdkit::measures::diagonality(&ajdkit::HpdMatrix::from_matrix(a).unwrap(), ajdkit::measures::DiagonalityKind::LogDetAlpha(0.25)).unwrap();
    assert_eq!(stdout_json(&o)["logdet_alpha(0.25)"].as_f64().unwrap(), want);
}

#[test]
fn alpha_outside_range_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let set = real_set(dir.path());
    let o = ajdkit(&["ajd", "--input", set.to_str().unwrap(), "--alpha", "2.0"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("[-1, 1]"));
    assert!(o.stdout.is_empty());
}

#[test]
fn non_hpd_input_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    let input = write(dir.path(), "a.json", &matrix_to_string(&m));
    assert_eq!(code(&ajdkit(&["measure", "--input", input.to_str().unwrap()])), 1);
}

#[test]
fn missing_or_malformed_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = ajdkit(&["measure", "--input", missing.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.json"));
    let bad = write(dir.path(), "bad.json", "{\"dim\": 2, \"real\": [[1.0]]}");
    assert_eq!(code(&ajdkit(&["project", "--input", bad.to_str().unwrap()])), 3);
}

#[test]
fn non_convergence_exits_two_and_still_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let set = real_set(dir.path());
    let trace = dir.path().join("trace.csv");
    let o = ajdkit(&["ajd", "--input", set.to_str().unwrap(), "--max-iter", "1", "--trace", trace.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("did not converge"));
    let c: DMatrix<f64> = ajdkit::io::parse_matrix(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    assert_eq!(c.nrows(), 4);
    let text = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(text.lines().next(), Some("iter,cost,grad_norm,step,stop_stat"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn ajd_and_mean_converge_on_a_random_set() {
    let dir = tempfile::tempdir().unwrap();
    let set = real_set(dir.path());
    for algo in ["ldnewton", "jadiag", "uwedge"] {
        let o = ajdkit(&["ajd", "--input", set.to_str().unwrap(), "--algo", algo, "--alpha", "-0.5", "--max-iter", "2000"]);
        assert_eq!(code(&o), 0, "{algo}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = ajdkit(&["mean", "--input", set.to_str().unwrap(), "--p", "0.5"]);
    assert_eq!(code(&o), 0);
    let m: DMatrix<f64> = ajdkit::io::parse_matrix(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    assert!(ajdkit::HpdMatrix::from_matrix(m).is_ok());
}

#[test]
fn project_reports_the_closed_form_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 3.0]);
    let input = write(dir.path(), "a.json", &matrix_to_string(&m));
    let o = ajdkit(&["project", "--input", input.to_str().unwrap(), "--criterion", "frobenius"]);
    assert_eq!(code(&o), 0);
    let js = stdout_json(&o);
    assert_eq!(js["diagonal"], serde_json::json!([2.0, 3.0]));
    let o = ajdkit(&["project", "--input", input.to_str().unwrap(), "--criterion", "alpha", "--alpha", "-0.3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["converged"], Value::Bool(true));
}

#[test]
fn bench_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", r#"{"n": 3, "k_matrices": 4, "snr": 5.0, "n_simulations": 2, "seed": 1, "alphas": [0.0], "max_iter": 2000}"#);
    let out = dir.path().join("out");
    let o = ajdkit(&["bench", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["records.csv", "timings.csv", "summary.json", "plots/ldnewton_alpha_0.dat"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let bad = write(dir.path(), "bad.json", r#"{"n": 1, "k_matrices": 4, "snr": 5.0, "n_simulations": 2, "seed": 1}"#);
    let o = ajdkit(&["bench", "--config", bad.to_str().unwrap(), "--out", dir.path().join("out2").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(!dir.path().join("out2").exists());
}

#[test]
fn help_lists_every_flag_with_its_default() {
    let expect: &[(&str, &[&str])] = &[
        ("measure", &["--input", "--alpha", "[default: -0.5,0.5]"]),
        ("project", &["--input", "--criterion", "[default: riemannian]", "[default: 0]", "[default: 1e-10]", "[default: 500]"]),
        ("ajd", &["--input", "--alpha", "--algo", "[default: ldnewton]", "[default: 1e-15]", "[default: 200]", "--trace"]),
        ("mean", &["--input", "--p", "--alpha", "[default: 0]"]),
        ("bench", &["--config", "--out"]),
    ];
    for (sub, needles) in expect {
        let o = ajdkit(&[sub, "--help"]);
        assert_eq!(code(&o), 0);
        let text = String::from_utf8_lossy(&o.stdout);
        for n in *needles {
            assert!(text.contains(n), "{sub} --help lacks {n}:\n{text}");
        }
        assert!(text.contains("--threads") && text.contains("AJDKIT_THREADS"), "{sub}");
    }
}

#[test]
fn unknown_flags_and_values_are_rejected() {
    assert_eq!(code(&ajdkit(&["measure", "--input", "x.json", "--bogus"])), 1);
    assert_eq!(code(&ajdkit(&["ajd", "--input", "x.json", "--algo", "simplex"])), 1);
    assert_eq!(code(&ajdkit(&["frobnicate"])), 1);
}
