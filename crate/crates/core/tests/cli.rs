use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};

use splatstream::harness::MovementTrace;
use splatstream::server::assets::conformance_json;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_splatstream"));
    c.env("RUST_LOG", "warn");
    c
}

fn ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn help_lists_subcommands() {
    let help = ok(bin().arg("--help"));
    for sub in ["serve", "run", "evaluate", "scene", "conformance"] {
        assert!(help.contains(sub), "{sub} missing from:\n{help}");
    }
    let out = bin().arg("bogus").output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn conformance_writes_the_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fixture.json");
    ok(bin().arg("conformance").arg("--out").arg(&path));
    assert_eq!(std::fs::read_to_string(path).unwrap(), conformance_json());
}

fn write_models(root: &Path) {
    ok(bin().args(["scene", "--count", "1500", "--seed", "3", "--id", "demo", "--models"]).arg(root));
    assert!(root.join("demo/point_cloud.ply").is_file());
}

#[test]
fn serve_run_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let models = dir.path().join("models");
    write_models(&models);
    let cert = dir.path().join("cert.pem");
    let mut child = bin()
        .args(["serve", "--bind", "127.0.0.1:0", "--models"])
        .arg(&models)
        .arg("--cert-out")
        .arg(&cert)
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let stdout = child.stdout.take().unwrap();
    let server = Server(child);
    let mut line = String::new();
    BufReader::new(stdout).read_line(&mut line).unwrap();
    let url = line.split_whitespace().find(|w| w.starts_with("https://")).expect("server url").to_owned();
    assert!(cert.is_file());

    let trace = dir.path().join("orbit.csv");
    MovementTrace::orbit(12, 100.0, 4.0, 45.0).save(&trace).unwrap();
    let session = dir.path().join("session");
    let summary = ok(bin()
        .args(["run", "--endpoint", &url, "--model", "demo", "--virtual-time", "--sample-stride", "4", "--fixed-level", "2"])
        .arg("--trace")
        .arg(&trace)
        .arg("--ca")
        .arg(&cert)
        .arg("--out")
        .arg(&session));
    let summary: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(summary["frames"], 12);
    assert_eq!(summary["ok_frames"], 12);
    for f in ["frames.csv", "session.json", "summary.json"] {
        assert!(session.join(f).is_file(), "{f}");
    }

    let report = dir.path().join("report.json");
    ok(bin()
        .args(["evaluate", "--model", "demo", "--models"])
        .arg(&models)
        .arg("--session")
        .arg(&session)
        .arg("--out")
        .arg(&report));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(report).unwrap()).unwrap();
    assert_eq!(report["frames"].as_array().unwrap().len(), 3);
    let ssim = report["overall"]["mean_ssim"].as_f64().unwrap();
    assert!(ssim > 0.5 && ssim < 1.0);

    // An unknown model fails the run before any frames go out.
    let out = bin()
        .args(["run", "--endpoint", &url, "--model", "nope"])
        .arg("--trace")
        .arg(&trace)
        .arg("--ca")
        .arg(&cert)
        .arg("--out")
        .arg(dir.path().join("bad"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    drop(server);
}
