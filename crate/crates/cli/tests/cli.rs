use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pairsource_cli::output::sha256_hex;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pairsource"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pairsource-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

const SMALL_SWEEP: &str = "[sweep]\nverdict = false\n[[sweep.axis]]\nparam = \"omega_s_drive\"\n\
                           start = 0.5\nstop = 5.0\npoints = 3\nscale = \"log\"\n";

#[test]
fn empty_range_is_a_config_error() {
    let dir = scratch("empty");
    let cfg = write_config(&dir, "[sweep]\n[[sweep.axis]]\nparam = \"gamma_star\"\nstart = 0.0\nstop = 1.0\npoints = 0\n");
    let out = run(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty range"));
}

#[test]
fn unknown_keys_and_missing_files_are_config_errors() {
    let dir = scratch("unknown");
    let cfg = write_config(&dir, "[params]\nomega = 1.0\n");
    assert_eq!(run(&["sweep", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(run(&["sweep", "--config", "/nonexistent/run.toml"]).status.code(), Some(1));
    assert_eq!(run(&["sweep", "--jobs", "0"]).status.code(), Some(1));
}

#[test]
fn sweep_output_is_byte_identical_across_runs_and_workers() {
    let dir = scratch("determinism");
    let cfg = write_config(&dir, SMALL_SWEEP);
    let a = run(&["sweep", "--config", cfg.to_str().unwrap(), "--jobs", "1"]);
    let b = run(&["sweep", "--config", cfg.to_str().unwrap(), "--jobs", "3"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains(&format!("# config_sha256: {}", sha256_hex(SMALL_SWEEP.as_bytes()))));
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    assert!(text.contains(&format!("# content_sha256: {}", sha256_hex(body.as_bytes()))));
    assert_eq!(body.lines().count(), 4);
    assert!(body.starts_with("omega_s_drive,n_p,n_s,n_e,n_p_out,g2_p0,g2_s0,g2_pairs0,regime,status\n"));
}

#[test]
fn physical_units_are_echoed_and_scaled() {
    let dir = scratch("units");
    let text = format!("unit = \"MHz\"\n[params]\ngamma_s = 2.0\ngamma_p = 40.0\ng_p = 0.2\ng_s = 0.2\nomega_p_drive = 0.02\n{SMALL_SWEEP}");
    let cfg = write_config(&dir, &text);
    let out = run(&["sweep", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["metadata"]["unit"], "MHz");
    let rows = doc["data"]["sweep"]["rows"].as_array().unwrap();
    assert!((rows[0][0].as_f64().unwrap() - 0.5).abs() < 1e-12);

    // the same physics in units of γ_s: rates halved
    let base = write_config(&scratch("units-base"), SMALL_SWEEP.replace("0.5", "0.25").replace("5.0", "2.5").as_str());
    let reference = run(&["sweep", "--config", base.to_str().unwrap(), "--format", "json"]);
    let ref_doc: serde_json::Value = serde_json::from_slice(&reference.stdout).unwrap();
    let ref_rows = ref_doc["data"]["sweep"]["rows"].as_array().unwrap();
    for (a, b) in rows.iter().zip(ref_rows) {
        let n_s = (a[2].as_f64().unwrap(), b[2].as_f64().unwrap());
        assert!((n_s.0 - n_s.1).abs() <= 1e-10 * n_s.1, "{n_s:?}");
    }
}

#[test]
fn scatter_writes_one_file_per_table() {
    let dir = scratch("scatter");
    let cfg = write_config(&dir, "[scatter]\nk_points = 5\nr_points = 7\n");
    let out_path = dir.join("scan.csv");
    let out = run(&["scatter", "--config", cfg.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let spectrum = std::fs::read_to_string(dir.join("scan.spectrum.csv")).unwrap();
    let wave = std::fs::read_to_string(dir.join("scan.wavefunctions.csv")).unwrap();
    assert_eq!(spectrum.lines().filter(|l| !l.starts_with('#')).count(), 6);
    assert_eq!(wave.lines().filter(|l| !l.starts_with('#')).count(), 8);
}

#[test]
fn verify_reports_pass_and_failure_through_exit_codes() {
    let flux = run(&["verify", "flux"]);
    assert_eq!(flux.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&flux.stdout).unwrap();
    assert_eq!(doc["data"]["passed"], true);
    assert_eq!(doc["data"]["checks"].as_array().unwrap().len(), 5);

    // the Ψ_2ph argmax scales as Ω_s⁻², so the slope check fails
    let ts = run(&["verify", "timescales", "--format", "csv"]);
    assert_eq!(ts.status.code(), Some(3));
    let text = String::from_utf8(ts.stdout).unwrap();
    assert!(text.contains("psi_2ph argmax slope vs omega_s"));
}

#[test]
fn circuit_defaults_to_json() {
    let dir = scratch("circuit");
    let cfg = write_config(&dir, "[circuit]\nomega_t = 5.0\nkappa = 0.5\ng_1l = 0.01\ng_2p = 0.02\ng_1s = 0.014\nrwa = false\n");
    let out = run(&["circuit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let e = doc["data"]["spectrum"]["energies"].as_array().unwrap();
    assert!((e[3].as_f64().unwrap() - 5.0 * 1.25f64.sqrt()).abs() < 1e-12);
    assert!((doc["data"]["effective"]["freq_l"].as_f64().unwrap() - 5.0).abs() < 1e-12);
}
