//! End-to-end checks of the `risbeam` binary: exit codes and output files.

use std::path::Path;
use std::process::{Command, Output};

fn risbeam(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_risbeam")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const TINY: &str = "[scene]\nn_tx = 4\nn_rx = 2\nris_ny = 4\nris_nz = 4\n\n[sweep]\nfamily = \"se_vs_ntx\"\nvalues = [2, 4]\nmodels = [\"near\", \"far\"]\ntrials = 2\n";

#[test]
fn validate_default_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = risbeam(&["validate"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(!stdout.contains("FAILED"), "{stdout}");
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("[channel]\nmodel = \"piecewise\"\nk = 3\n", "N_Ry not divisible by K"),
        ("[errors]\ntau_g = 1.0\n", "tau must be in [0,1)"),
        ("[link]\nsnr_db = 10\ntx_power_w = 1\n", "mutually exclusive"),
        ("[scene]\nn_txx = 3\n", "unknown config keys"),
    ];
    for (text, message) in cases {
        let cfg = write(tmp.path(), "bad.toml", text);
        let out = risbeam(&["validate", "--config", &cfg], tmp.path());
        assert_eq!(out.status.code(), Some(1), "{text}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(message), "{text}");
    }
    let out = risbeam(&["run", "--family", "no_such_family"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let out = risbeam(&["run", "--no-such-flag"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_config_file_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let out = risbeam(&["validate", "--config", "does_not_exist.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unwritable_output_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = write(tmp.path(), "blocker", "");
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let out = risbeam(&["run", "--config", &cfg, "--out", &format!("{blocker}/sub")], tmp.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn run_writes_schema_and_echo_reparses() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let out = risbeam(&["run", "--config", &cfg, "--out", "res", "--seed", "3"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let res = tmp.path().join("res");
    let records = std::fs::read_to_string(res.join("se_vs_ntx_records.csv")).unwrap();
    assert!(records.starts_with(
        "family,model,K,sweep_name,sweep_value,trial,seed,se_eval_bits,se_design_bits,outer_iters,converged,wall_s\n"
    ));
    assert_eq!(records.lines().count(), 1 + 2 * 2 * 2);
    let summary = std::fs::read_to_string(res.join("se_vs_ntx_summary.csv")).unwrap();
    assert!(summary.starts_with("family,model,K,sweep_value,mean_se,stderr_se,n,conv_rate\n"));
    assert_eq!(summary.lines().count(), 1 + 2 * 2);

    let echo = res.join("se_vs_ntx_config.toml");
    let parsed = risbeam::config::SystemConfig::from_file(&echo).unwrap();
    let again = risbeam::config::SystemConfig::from_toml(&parsed.to_toml()).unwrap();
    assert_eq!(parsed, again);
    assert_eq!(parsed.sweep.seed, 3);
}

#[test]
fn trace_dumps_iterations() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let out = risbeam(&["trace", "--config", &cfg, "--out", "t"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(tmp.path().join("t/trace.csv")).unwrap();
    assert!(text.starts_with("outer_iter,objective,se_design,se_eval,adpm_iters,adpm_residual,eta\n"));
    assert!(text.lines().count() >= 2);
    assert_eq!(String::from_utf8_lossy(&out.stdout), text);
}

#[test]
fn help_exits_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = risbeam(&["--help"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for word in ["run", "validate", "trace", "--seed", "--threads", "--full-scale"] {
        assert!(text.contains(word), "{word}");
    }
}
