use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ramsey-lab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn identities_example() {
    let o = run(&["identities", "--alpha", "3", "--beta", "4"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    let mut lines = s.lines();
    assert_eq!(lines.next(), Some("check,alpha,beta,max_err,tol,pass"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.ends_with(",true")), "{s}");
}

#[test]
fn vcdim_example_prints_three() {
    let o = run(&["vcdim", "--curve", "circle", "--t", "8", "--set-a", "ones", "--set-b", "ones", "--window", "64"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "3");
}

#[test]
fn distances_example_writes_report() {
    let o = run(&["distances", "--lambda-ladder", "2,4,8", "--set-a", "chessboard", "--set-b", "chessboard-white"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.starts_with("scale,N0,N1,Neps,I_s,I_e,I_u\n"));
    assert_eq!(s.lines().count(), 4);
}

#[test]
fn outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let c = dir.path().join("c.json");
    let args = ["density", "--kind", "vc", "--r-side", "64", "--z", "-32:-32", "--mc-samples", "20000", "--seed", "7"];
    let with = |out: &Path, extra: &[&str]| {
        let mut v: Vec<&str> = args.to_vec();
        v.extend_from_slice(extra);
        v.extend_from_slice(&["--out", path(out)]);
        assert_eq!(code(&run(&v)), 0);
    };
    with(&a, &[]);
    with(&b, &[]);
    with(&c, &["--workers", "1"]);
    let ra = std::fs::read(&a).unwrap();
    assert_eq!(ra, std::fs::read(&b).unwrap());
    assert_eq!(ra, std::fs::read(&c).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&ra).unwrap();
    for k in ["value", "stderr", "M", "R", "r_values", "z_values", "seed"] {
        assert!(v.get(k).is_some(), "missing {k}");
    }
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# n = 2 telescoping\ncommand = sbl\nn = 2\nalpha = 1\nalpha = 3\n").unwrap();
    let from_file = run(&["--config", path(&cfg)]);
    let from_flags = run(&["sbl", "--n", "2", "--alpha", "1,3"]);
    assert_eq!(code(&from_file), 0);
    assert_eq!(from_file.stdout, from_flags.stdout);
    // command-line flags override the file
    std::fs::write(&cfg, "alpha = 3\n").unwrap();
    let o = run(&["identities", "--config", path(&cfg), "--alpha", "2", "--which", "gg", "--heat-t", "1"]);
    assert!(stdout(&o).contains("gg,2.0,4.0"), "{}", stdout(&o));
}

#[test]
fn not_found_and_errors_have_distinct_codes() {
    let o = run(&["vcdim", "--from-config", "--set-a", "zeros", "--config-budget", "4096"]);
    assert_eq!(code(&o), 2);
    let o = run(&["density", "--m", "0.5"]);
    assert_eq!(code(&o), 1);
    let o = run(&["gowers", "--set-a", "nonsense"]);
    assert_eq!(code(&o), 1);
    let o = run(&["identities", "--alpha"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn field_and_curve_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let pf = dir.path().join("a.pfield");
    let cf = dir.path().join("e.curve");
    let a = run(&["gowers", "--set-a", "disk:0:0:10", "--grid", "64", "--write-a", path(&pf)]);
    assert_eq!(code(&a), 0);
    let head = std::fs::read_to_string(&pf).unwrap();
    assert!(head.starts_with("PFIELD v1 "));
    let b = run(&["gowers", "--pfield-a", path(&pf), "--grid", "64"]);
    assert_eq!(a.stdout, b.stdout);

    let c = run(&["curves", "--curve", "ellipse:2:1", "--samples", "256", "--k-mu", "1024", "--write-curve", path(&cf)]);
    assert_eq!(code(&c), 0);
    assert!(std::fs::read_to_string(&cf).unwrap().starts_with("CURVE v1 256\n"));
    let d = run(&["curves", "--curve-file", path(&cf), "--k-mu", "1024"]);
    assert_eq!(c.stdout, d.stdout);
    assert!(stdout(&c).starts_with("direction,radius,value\n"));
}

#[test]
fn help_documents_tolerances() {
    for (cmd, needle) in [
        ("identities", "1e-6"),
        ("curves", "K_mu/(20 t)"),
        ("gowers", "1e-6"),
        ("density", "1e4"),
        ("distances", "8 ulp"),
        ("vcdim", "chord sag"),
        ("sbl", "2e-2"),
    ] {
        let o = run(&[cmd, "--help"]);
        assert_eq!(code(&o), 0);
        assert!(stdout(&o).contains(needle), "{cmd}");
    }
}

#[test]
fn selftest_passes() {
    let o = run(&["--selftest"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.lines().all(|l| l.starts_with("PASS ")), "{s}");
    for name in ["identity-gg", "heat", "bessel-zero", "telescoping", "u2-unit-square"] {
        assert!(s.contains(name));
    }
}

#[test]
fn sbl_probe_csv() {
    let o = run(&["sbl", "--n", "1", "--grid", "16", "--probe-trials", "3", "--seed", "4"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.starts_with("trial,alpha1,ratio,norms\n"));
    assert_eq!(s.lines().count(), 4);
}
