use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_edgecarve");

fn edgecarve(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_reconstruct_evaluate_export() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let out = dir.path().join("out");
    let s = edgecarve(&["simulate", "--scene", "corridor", "--seed", "3", "--t-edges", "40", "--out", path(&sim)]);
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    for f in ["poses.txt", "tracks.txt", "cloud.xyz", "config.txt"] {
        assert!(sim.join(f).is_file(), "missing {f}");
    }

    let r = edgecarve(&["reconstruct", "--config", path(&sim.join("config.txt")), "--out", path(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let report = String::from_utf8(r.stdout).unwrap();
    assert!(report.contains("p2m_evaluated=true"));
    for f in ["mesh.ply", "points.txt", "report.txt", "timings.csv", "state.dump"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }

    let e = edgecarve(&["evaluate", "--mesh", path(&out.join("mesh.ply")), "--cloud", path(&sim.join("cloud.xyz"))]);
    assert!(e.status.success());
    let text = String::from_utf8(e.stdout).unwrap();
    let mean: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("mean_p2m_error="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(report.contains(&format!("mean_p2m_error={mean:?}")));

    // exporting the saved state reproduces the mesh
    let ply = dir.path().join("export.ply");
    let x = edgecarve(&["export", "--state", path(&out.join("state.dump")), "--ply", path(&ply)]);
    assert!(x.status.success());
    assert_eq!(std::fs::read(&ply).unwrap(), std::fs::read(out.join("mesh.ply")).unwrap());
}

#[test]
fn exit_codes_separate_config_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.txt");
    std::fs::write(&config, "t_edges = 0\n").unwrap();
    let out = path(dir.path());
    assert_eq!(edgecarve(&["reconstruct", "--config", path(&config), "--out", out]).status.code(), Some(1));
    assert_eq!(edgecarve(&["simulate", "--scene", "nowhere", "--out", out]).status.code(), Some(1));
    assert_eq!(edgecarve(&["frobnicate"]).status.code(), Some(1));
    let missing = dir.path().join("missing.ply");
    let cloud = dir.path().join("cloud.xyz");
    std::fs::write(&cloud, "0 0 0\n").unwrap();
    assert_eq!(edgecarve(&["evaluate", "--mesh", path(&missing), "--cloud", path(&cloud)]).status.code(), Some(2));
    assert_eq!(edgecarve(&["--help"]).status.code(), Some(0));
}
