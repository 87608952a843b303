use std::path::Path;
use std::process::{Command, Output};

fn explab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_explab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn list_examples_prints_every_id() {
    let out = explab(&["list-examples"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 10);
    for name in ["PeriodicBand", "KSMinimal", "MoebiusSuspension", "RotationSmooth"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
}

#[test]
fn suspension_check_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "ks.json",
        r#"{"example":"KSMinimal","operation":"suspension-check",
            "parameters":{"rho":2.0,"N":1000,"pairs":[["0-","0+"]]}}"#,
    );
    let out_path = dir.path().join("ks.csv");
    let out = explab(&["suspension-check", "--config", &config, "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).lines().count(), 1);
    let csv = std::fs::read_to_string(out_path).unwrap();
    let row = csv.lines().nth(1).unwrap();
    // H_3 = 11/6 < 2 ≤ H_4 = 25/12: witness n_4 = 13
    assert!(row.contains(",true,13.0,time-gap,"), "{row}");
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", r#"{"example":"RigidBand","operation":"green-check","bogus":1}"#);
    let out = explab(&["green-check", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let mismatched = write_config(dir.path(), "m.json", r#"{"example":"RigidBand","operation":"green-check"}"#);
    let out = explab(&["simulate", "--config", &mismatched]);
    assert_eq!(out.status.code(), Some(2));

    let garbled = write_config(dir.path(), "g.json", "{not json");
    assert_eq!(explab(&["simulate", "--config", &garbled]).status.code(), Some(2));
}

#[test]
fn domain_escape_exits_three_with_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "esc.json",
        r#"{"example":"RigidBand","operation":"simulate","parameters":{"start":[2,0],"horizon":30,"dt":3}}"#,
    );
    let out_path = dir.path().join("esc.csv");
    let out = explab(&["simulate", "--config", &config, "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let csv = std::fs::read_to_string(out_path).unwrap();
    assert!(csv.starts_with("t,x,y\n0.0,2.0,0.0\n"), "{csv}");
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "sweep.json",
        r#"{"example":"RotationSmooth","operation":"separation-sweep",
            "parameters":{"rho":0.2,"N":100,"random_pairs":{"count":8,"spread":0.05}},"seed":1}"#,
    );
    let run = |seed: &str, name: &str| {
        let path = dir.path().join(name);
        let out = explab(&["separation-sweep", "--config", &config, "--seed", seed, "--out", path.to_str().unwrap()]);
        assert!(out.status.success());
        std::fs::read(path).unwrap()
    };
    assert_eq!(run("4", "a.csv"), run("4", "b.csv"));
    assert_ne!(run("4", "a.csv"), run("5", "c.csv"));
}

#[test]
fn json_format_carries_details() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "crit.json",
        r#"{"example":{"annulus":{"profile":{"kind":"affine","intercept":0,"slope":1},"r_in":1,"r_out":2}},
            "operation":"robust-criterion","parameters":{"grid":32},"output":{"format":"json"}}"#,
    );
    let path = dir.path().join("crit.json.out");
    let out = explab(&["robust-criterion", "--config", &config, "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    assert_eq!(doc["details"]["satisfied"], true);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 32 * 32);
    assert_eq!(doc["operation"], "robust-criterion");
}

#[test]
fn koksma_command_emits_decreasing_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "dk.json",
        r#"{"example":{"id":"RotationSmooth","params":{"amplitude":0.3}},"operation":"denjoy-koksma","parameters":{"n":8}}"#,
    );
    let path = dir.path().join("dk.csv");
    let out = explab(&["denjoy-koksma", "--config", &config, "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,q,gap"));
    let gaps: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(gaps.len(), 8);
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}
