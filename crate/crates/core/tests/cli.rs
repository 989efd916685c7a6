use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::Duration;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_motionpilot"))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(name)
}

#[test]
fn replay_of_golden_record_prints_stored_summary() {
    let out = bin()
        .args(["replay"])
        .arg(data("tests/data/golden-session.jsonl"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let expected = std::fs::read_to_string(data("tests/data/golden-summary.txt")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), expected);
}

#[test]
fn replay_detects_tampered_record() {
    let text = std::fs::read_to_string(data("tests/data/golden-session.jsonl")).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    // Change one recorded input; the re-run trajectory no longer matches.
    let row = &mut lines[150];
    let pos = row.find("\"tilt_pitch\":").unwrap() + "\"tilt_pitch\":".len();
    row.insert(pos, '5');
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tampered.jsonl");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let out = bin().arg("replay").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
}

#[test]
fn ueq_score_on_sample_matches_published_table() {
    let out = bin()
        .args(["ueq", "score"])
        .arg(data("data/ueq-sample.csv"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("|     2.2 ± 0.8     |    2.3 ± 0.9    | 2.2 ± 0.8 |"),
        "{text}"
    );
}

#[test]
fn usage_errors_exit_with_2() {
    let out = bin()
        .args(["ueq", "score", "--frobnicate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(bin().output().unwrap().status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_1() {
    let out = bin()
        .args(["ueq", "score", "/definitely/missing.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin()
        .args(["crsf", "gen", "--channels", "3000"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn crsf_gen_then_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("frame.bin");
    let out = bin()
        .args(["crsf", "gen", "--channels", "172,992,1811", "--out"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let hex = String::from_utf8(out.stdout).unwrap();
    assert_eq!(hex.trim().len(), 52);
    assert!(hex.starts_with("c81816"));
    let out = bin().args(["crsf", "inspect"]).arg(&path).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("rc_channels 172,992,1811,992,"), "{text}");
    assert!(text.contains("frames=1 crc_errors=0"));
}

#[test]
fn map_simulate_prints_channels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("in.csv");
    let mut rows =
        String::from("timestamp_ms,trigger,tilt_pitch,tilt_roll,thumbstick_x,arm_button\n");
    for i in 0..12 {
        rows.push_str(&format!("{},0,2,-1,0,0\n", i * 10));
    }
    std::fs::write(&path, rows).unwrap();
    let out = bin()
        .args(["map", "simulate", "--calibrate", "10", "--input"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 13);
    // Calibrated on the constant pose, so every sample maps to neutral.
    assert!(
        lines[1..]
            .iter()
            .all(|l| l.contains(",disarmed,992,992,172,992,172,")),
        "{text}"
    );
}

#[test]
fn serve_then_client_receives_telemetry() {
    let mut child = bin()
        .args(["serve", "--bind", "127.0.0.1:0"])
        .env_remove("MOTIONPILOT_CONFIG")
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stderr = BufReader::new(child.stderr.take().unwrap());
    let mut line = String::new();
    stderr.read_line(&mut line).unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on ")
        .expect("listen line")
        .to_string();

    let stream = TcpStream::connect(&addr).unwrap();
    stream
        .set_read_timeout(Some(Duration::from_secs(5)))
        .unwrap();
    let mut w = stream.try_clone().unwrap();
    let mut r = BufReader::new(stream);
    writeln!(w, r#"{{"type":"hello","format":1}}"#).unwrap();
    writeln!(w, r#"{{"type":"start"}}"#).unwrap();
    let mut telemetry = 0;
    let mut reply = String::new();
    while telemetry < 3 {
        reply.clear();
        r.read_line(&mut reply).unwrap();
        if reply.contains(r#""type":"telemetry""#) {
            telemetry += 1;
        }
    }
    child.kill().unwrap();
    child.wait().unwrap();
}
