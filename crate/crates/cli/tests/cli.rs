//! End-to-end checks of the command-line interface: subcommands, output
//! files, and exit codes (0 success, 1 config error, 2 runtime failure).

use std::path::Path;
use std::process::Command;

fn spacelink() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spacelink"))
}

fn write_config(dir: &Path, loss: f64) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    let text = format!(
        r#"
name = "cli_ftp"
algorithm = "aggressive"
seeds = [1, 2]
duration_s = 600.0

[path]
[[path.links]]
prop_delay_s = 0.275
forward_rate_bps = 1e7
reverse_rate_bps = 1e6
loss_prob = {loss}
queue_capacity = 100

[workload]
kind = "ftp"
total_bytes = 1048576

[sweep]
algorithms = ["aggressive", "reno"]
loss_rates = [0.01]
"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_writes_expected_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), 0.01);
    let out_dir = tmp.path().join("out");
    let output = spacelink()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    for seed in ["1", "2"] {
        let dir = out_dir.join("cli_ftp/aggressive").join(seed);
        for f in ["throughput.csv", "cwnd.csv", "utilization.csv", "summary.json"] {
            assert!(dir.join(f).exists(), "missing {f} for seed {seed}");
        }
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("\"algorithm\": \"aggressive\""));
}

#[test]
fn run_seed_override_runs_single_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), 0.01);
    let out_dir = tmp.path().join("out");
    let status = spacelink()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .args(["--seed", "9"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out_dir.join("cli_ftp/aggressive/9/summary.json").exists());
    assert!(!out_dir.join("cli_ftp/aggressive/1").exists());
}

#[test]
fn run_is_deterministic_on_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), 0.01);
    let mut bytes = Vec::new();
    for name in ["a", "b"] {
        let out_dir = tmp.path().join(name);
        assert!(spacelink()
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .args(["--seed", "3"])
            .status()
            .unwrap()
            .success());
        bytes.push(std::fs::read(out_dir.join("cli_ftp/aggressive/3/summary.json")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn compare_emits_table_and_files() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), 0.01);
    let out_dir = tmp.path().join("out");
    let output = spacelink()
        .args(["compare", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("ranking at loss 0.01: mean_throughput_bps"));
    assert!(out_dir.join("cli_ftp/comparison.csv").exists());
    assert!(out_dir.join("cli_ftp/rankings.json").exists());
    let csv = std::fs::read_to_string(out_dir.join("cli_ftp/comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2, "header + algorithms x seeds");
}

#[test]
fn geometry_subcommand_text_and_json() {
    // GEO pair a quarter turn apart
    let output = spacelink()
        .args([
            "geometry",
            "--point",
            "0,0,35786",
            "--point",
            "0,90,35786",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("rtt_est"));
    assert!(stdout.contains("interruption threshold"));

    let output = spacelink()
        .args(["geometry", "--json", "--point", "0,0,35786", "--point", "0,90,35786"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let v: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let d = v["total_distance_m"].as_f64().unwrap();
    assert!((d - 59_619_001.148_962_568).abs() < 1.0);
    let rtt = v["rtt_est_s"].as_f64().unwrap();
    assert!((v["interruption_threshold_s"].as_f64().unwrap() - 10.0 * rtt).abs() < 1e-9);
}

#[test]
fn analyze_slowstart_subcommand() {
    let output = spacelink()
        .args(["analyze-slowstart", "--rtt-s", "0.55", "--bandwidth-bps", "1e7"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("5.7151"), "stdout: {stdout}");
}

#[test]
fn analyze_slowstart_reads_config() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("scenario.toml");
    let base = std::fs::read_to_string(write_config(tmp.path(), 0.01)).unwrap();
    std::fs::write(&config, format!("{base}\n[analysis]\nbandwidth_bps = 1e7\n")).unwrap();
    let output = spacelink()
        .args(["analyze-slowstart", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    // rtt from path (0.55 s), bandwidth and default segment bits from [analysis]
    assert!(String::from_utf8_lossy(&output.stdout).contains("5.7151"));
}

#[test]
fn config_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "name = \"x\"\n# missing everything else\n").unwrap();
    let output = spacelink().args(["run", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&output.stderr).is_empty());

    // invalid field value
    let config = write_config(tmp.path(), 1.5);
    let output = spacelink().args(["run", "--config"]).arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(1));

    // degenerate analysis input
    let output = spacelink()
        .args(["analyze-slowstart", "--rtt-s", "0.0001", "--bandwidth-bps", "100"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), 0.01);
    // an output root that cannot be created
    let output = spacelink()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--out", "/dev/null/nope"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn geometry_rejects_malformed_points() {
    let output = spacelink().args(["geometry", "--point", "0,0"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    let output = spacelink()
        .args(["geometry", "--point", "95,0,1000", "--point", "0,0,1000"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}
