use std::process::Command;

fn vlcambc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vlcambc"))
}

#[test]
fn help_and_unknown_commands() {
    assert_eq!(vlcambc().arg("--help").output().unwrap().status.code(), Some(0));
    assert_eq!(vlcambc().arg("bogus").output().unwrap().status.code(), Some(1));
    assert_eq!(vlcambc().args(["point", "--bd", "nope"]).output().unwrap().status.code(), Some(1));
}

#[test]
fn selftest_passes() {
    let out = vlcambc().arg("selftest").output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).lines().all(|l| l.contains("PASS")));
}

#[test]
fn point_writes_one_row_per_kind() {
    let out = vlcambc().args(["point", "--frames", "2", "--bd", "eh,relay"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("bd_kind,"));
}

#[test]
fn report_without_csv_prints_theory() {
    let out = vlcambc().arg("report").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("gamma_db,ber_theory"));
}

#[test]
fn missing_files_are_io_errors() {
    let out = vlcambc().args(["report", "/nonexistent/sweep.csv"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("none.toml");
    let out = vlcambc().args(["theory", "--config"]).arg(&bad).output().unwrap();
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn small_sweep_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(
        &cfg,
        "[run]\nframes = 2\n[sweep]\nd_led_bd_m = [0.3]\nd_rx_bd_m = [0.5, 0.7]\np_tx_dbm = [0.0]\n",
    )
    .unwrap();
    let csv = dir.path().join("s.csv");
    let out = vlcambc().args(["sweep", "--bd", "eh", "--config"]).arg(&cfg).arg("--out").arg(&csv).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 4);
    let again = dir.path().join("t.csv");
    vlcambc().args(["sweep", "--bd", "eh", "--workers", "2", "--config"]).arg(&cfg).arg("--out").arg(&again).output().unwrap();
    assert_eq!(rows, std::fs::read_to_string(&again).unwrap());
}
