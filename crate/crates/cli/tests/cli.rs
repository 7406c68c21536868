use std::path::Path;
use std::process::{Command, Output};

fn weaklab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weaklab"))
        .args(args)
        .env_remove("WEAKLAB_OUT")
        .output()
        .expect("spawn weaklab")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &[&str] = &[
    "--depths",
    "6,7",
    "--seeds",
    "1..2",
    "--weight",
    "power:a=-0.5,x0=0.3",
    "--weight",
    "const:1",
    "--function",
    "random:density=0.5,seed=3",
    "--strategy",
    "stopping:ratio=2",
];

fn small(cmd: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--out", out.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    weaklab(&args)
}

#[test]
fn help_lists_subcommands() {
    let o = weaklab(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for cmd in [
        "orlicz-norm",
        "cphi",
        "verify-weak",
        "verify-lemma",
        "verify-fs",
        "verify-square",
        "verify-ainfty",
        "verify-apbound",
        "search",
        "mw-probe",
    ] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(weaklab(&["verify-weak", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(weaklab(&["cphi", "--family", "nonsense"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[corpus]\ndepth = [4]\n").unwrap();
    let o = weaklab(&["verify-weak", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn orlicz_norm_of_a_constant() {
    let o = weaklab(&["orlicz-norm", "--family", "power:r=2", "--weight", "const:3"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 3.0).abs() < 1e-9, "{v}");
}

#[test]
fn cphi_prints_a_json_report() {
    let o = weaklab(&["cphi", "--family", "power:r=2"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!((v["value"].as_f64().unwrap() - 0.40820).abs() < 1e-4);
    assert!(v["truncation_k"].as_u64().unwrap() >= 1);
    assert_eq!(v["surrogate"], false);
}

#[test]
fn verify_weak_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = small("verify-weak", a.path(), &["--family", "llog:eps=0.5", "--jobs", "3"]);
    let ob = small("verify-weak", b.path(), &["--family", "llog:eps=0.5", "--jobs", "1"]);
    assert_eq!(oa.status.code(), Some(0), "{}", String::from_utf8_lossy(&oa.stderr));
    assert_eq!(ob.status.code(), Some(0));
    for name in ["verify-weak.csv", "verify-weak.jsonl"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs between runs");
    }
    let csv = std::fs::read_to_string(a.path().join("verify-weak.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("inequality,phi,p,depth,"));
    assert!(header.ends_with("config_hash,seeds,version"));
    // two depths plus the aggregate
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn out_dir_falls_back_to_env() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["verify-fs"];
    args.extend_from_slice(SMALL);
    let o = Command::new(env!("CARGO_BIN_EXE_weaklab"))
        .args(&args)
        .env("WEAKLAB_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("verify-fs.csv").exists());
}

#[test]
fn every_verifier_passes_on_a_small_corpus() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, extra) in [
        ("verify-lemma", vec!["--family", "power:r=2"]),
        ("verify-fs", vec!["--p", "1.5,2"]),
        ("verify-square", vec!["--p", "2", "--spike-depth", "8", "--spike-levels", "2,3,4,5"]),
        ("verify-ainfty", vec!["--m0", "1,2"]),
        ("verify-apbound", vec!["--p", "2,3"]),
    ] {
        let o = small(cmd, dir.path(), &extra);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
        assert!(dir.path().join(format!("{cmd}.csv")).exists());
    }
    assert!(dir.path().join("spike.csv").exists());
}

#[test]
fn search_violation_writes_a_witness() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let base = ["search", "--objective", "orlicz:llog:eps=0.5", "--depth", "6", "--iters", "50", "--restarts", "2", "--out", out];
    let o = weaklab(&[&base[..], &["--bound", "1e-3"]].concat());
    assert_eq!(o.status.code(), Some(1));
    let w: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("witness.json")).unwrap()).unwrap();
    assert!(w["value"].as_f64().unwrap() > 1e-3);
    assert_eq!(w["config_hash"].as_str().unwrap().len(), 64);

    let o = weaklab(&[&base[..], &["--bound", "1e3"]].concat());
    assert_eq!(o.status.code(), Some(0));
    // bounds only make sense against the Orlicz majorant
    let o = weaklab(&["search", "--depth", "6", "--iters", "5", "--bound", "1", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mw_probe_writes_one_row_per_depth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("probe.toml");
    std::fs::write(
        &cfg,
        "[corpus]\ndepths = [6]\nseeds = \"1\"\n\n[probe]\ndepths = [6, 7]\niters = 60\nrestarts = 2\n",
    )
    .unwrap();
    let o = weaklab(&["mw-probe", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("mw-probe.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("depth,plainM_best,orlicz_best,"));
    assert_eq!(lines.count(), 2);
}
