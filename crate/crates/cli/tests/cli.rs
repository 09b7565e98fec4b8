use std::fs;
use std::path::Path;
use std::process::Command;

use supercrit_cli::config::parse_config;
use supercrit_cli::store::{read_manifest, Outcome};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_supercrit"));
    // keep the developer's SUPERCRIT_* variables out of the contract tests
    for (k, _) in std::env::vars() {
        if k.starts_with("SUPERCRIT_") {
            c.env_remove(k);
        }
    }
    c
}

fn run(out: &Path, args: &[&str]) -> (i32, String, String) {
    let o = bin().arg("--output").arg(out).args(args).output().unwrap();
    (
        o.status.code().unwrap(),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn run_dir(out: &Path, stdout: &str) -> std::path::PathBuf {
    out.join(stdout.split_whitespace().next().unwrap())
}

/// Every file except the manifest, which carries timestamps.
fn payload(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "manifest.json")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn exit_code_contract() {
    let out = tempfile::tempdir().unwrap();
    let p = out.path();
    let (code, stdout, _) = run(p, &["simulate-wave", "--nonlinearity", "defocusing_exp:m=1", "--set", "n=64"]);
    assert_eq!(code, 0);
    let m = read_manifest(&run_dir(p, &stdout)).unwrap();
    assert_eq!(m.outcome, Outcome::Ok);
    assert_eq!(m.files, ["trace.csv", "summary.json"]);

    let (code, _, stderr) = run(p, &["simulate-wave", "--nonlinearity", "linear", "--set", "n=100"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("power of two"), "{stderr}");
    let (code, _, _) = run(p, &["simulate-wave", "--nonlinearity", "linear", "--set", "dt=1"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(p, &["no-such-command"]);
    assert_eq!(code, 2);

    let (code, stdout, _) =
        run(p, &["simulate-wave", "--nonlinearity", "defocusing_exp:m=2", "--set", "amplitude=6", "--set", "n=64"]);
    assert_eq!(code, 3);
    assert_eq!(read_manifest(&run_dir(p, &stdout)).unwrap().outcome, Outcome::AbortedBlowup);

    let (code, stdout, _) = run(p, &["simulate-wave", "--nonlinearity", "linear", "--set", "radius=3.9", "--set", "n=64"]);
    assert_eq!(code, 4);
    assert_eq!(read_manifest(&run_dir(p, &stdout)).unwrap().outcome, Outcome::LeakageFlag);
}

#[test]
fn supercritical_growth_is_a_config_error() {
    let out = tempfile::tempdir().unwrap();
    let (code, _, stderr) =
        run(out.path(), &["simulate-wave", "--nonlinearity", "oscillating_sin:q=7", "--set", "d=3", "--set", "n=16"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("2*=6"), "{stderr}");
}

#[test]
fn identical_configs_give_identical_bytes() {
    let out = tempfile::tempdir().unwrap();
    let p = out.path();
    let args = [
        "weak-strong",
        "--nonlinearity",
        "oscillating_sin:q=1",
        "--set",
        "n=64",
        "--set",
        "t=0.5",
        "--jobs",
        "2",
    ];
    let (code, first, _) = run(p, &args);
    assert_eq!(code, 0);
    let a = payload(&run_dir(p, &first));
    assert_eq!(a.len(), 7);
    let (code, second, _) = run(p, &args);
    assert_eq!(code, 0);
    assert_eq!(first, second);
    assert_eq!(a, payload(&run_dir(p, &second)));
    // jobs only changes scheduling
    let mut serial = args.to_vec();
    let last = serial.len() - 1;
    serial[last] = "1";
    run(p, &serial);
    assert_eq!(a, payload(&run_dir(p, &first)));
}

#[test]
fn precedence_file_env_cli() {
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("exp.conf");
    fs::write(
        &cfg,
        "[experiment]\nkind = simulate-wave\nnonlinearity = linear\n[grid]\nn = 32\n[time]\nt = 0.25\n",
    )
    .unwrap();
    let n_of = |stdout: &str| read_manifest(&run_dir(out.path(), stdout)).unwrap().config["n"].clone();
    let o = bin().arg("--output").arg(out.path()).arg("--config").arg(&cfg).arg("simulate-wave").output().unwrap();
    assert_eq!(n_of(&String::from_utf8_lossy(&o.stdout)), "32");
    let o = bin()
        .env("SUPERCRIT_N", "16")
        .arg("--output")
        .arg(out.path())
        .arg("--config")
        .arg(&cfg)
        .arg("simulate-wave")
        .output()
        .unwrap();
    assert_eq!(n_of(&String::from_utf8_lossy(&o.stdout)), "16");
    let o = bin()
        .env("SUPERCRIT_N", "16")
        .args(["--output", out.path().to_str().unwrap(), "--config", cfg.to_str().unwrap()])
        .args(["simulate-wave", "--set", "n=8"])
        .output()
        .unwrap();
    assert_eq!(n_of(&String::from_utf8_lossy(&o.stdout)), "8");
}

#[test]
fn manifest_echo_round_trips() {
    let out = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run(out.path(), &["simulate-nls", "--nonlinearity", "nls_coercive_exp", "--set", "t=0.05"]);
    assert_eq!(code, 0);
    let m = read_manifest(&run_dir(out.path(), &stdout)).unwrap();
    let mut text = String::new();
    for (section, key) in supercrit_cli::config::KEYS {
        text.push_str(&format!("[{section}]\n{key} = {}\n", m.config[*key]));
    }
    let cfg = parse_config(&text).unwrap();
    assert_eq!(supercrit_cli::store::experiment_id(&cfg), m.experiment_id);
    assert_eq!(parse_config(&cfg.serialize()).unwrap(), cfg);
}

#[test]
fn export_long_format() {
    let out = tempfile::tempdir().unwrap();
    let p = out.path();
    let (_, stdout, _) = run(p, &["weak-strong", "--nonlinearity", "defocusing_exp:m=1", "--set", "n=32", "--set", "t=0.25"]);
    let id = stdout.split_whitespace().next().unwrap();
    let o = bin().arg("--output").arg(p).args(["export", id]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let csv = String::from_utf8(o.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("series,t,value"));
    let series: std::collections::BTreeSet<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    let expected: std::collections::BTreeSet<String> =
        (0..3).flat_map(|i| ["G", "w_l2", "bound"].map(|s| format!("{i}:{s}"))).collect();
    assert_eq!(series, expected.iter().map(|s| s.as_str()).collect());

    let (_, stdout, _) = run(p, &["simulate-wave", "--nonlinearity", "linear", "--set", "n=32", "--set", "t=0.25"]);
    let id = stdout.split_whitespace().next().unwrap();
    let to = p.join("plot.csv");
    let o = bin().arg("--output").arg(p).args(["export", id, "--to"]).arg(&to).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(to).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("E_total,0,")));

    let empty = p.join("deadbeefdeadbeef");
    fs::create_dir(&empty).unwrap();
    let o = bin().arg("--output").arg(p).args(["export", "deadbeefdeadbeef"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
