use std::fs;
use std::path::PathBuf;
use std::process::Command;

use negsound_cli::{run_cli, Outcome, Verdict};

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "core", "fixtures", name].iter().collect();
    p.display().to_string()
}

fn run(args: &[&str]) -> Outcome {
    run_cli(std::iter::once("negsound").chain(args.iter().copied()))
}

#[test]
fn check_routes_by_class() {
    for (file, method, code) in [
        ("FIG1L.ngt", "patterns", 0),
        ("FIG1M.ngt", "weak", 0),
        ("FIG1R.ngt", "weak", 0),
        ("NODOM.ngt", "oracle", 0),
        ("ANTI-F.ngt", "patterns", 1),
        ("ANTI-C.ngt", "patterns", 1),
        ("FIG1L-MOD.ngt", "patterns", 1),
        ("WEAK-BAD.ngt", "weak", 1),
        // every process of this fixture is deterministic
        ("FIG1R-MOD.ngt", "patterns", 1),
    ] {
        let out = run(&["check", &fixture(file)]);
        assert_eq!(out.code, code, "{file}");
        assert_eq!(out.reports[0].method.as_deref(), Some(method), "{file}");
        assert!(out.stdout.contains(&format!("method: {method} (")), "{file}: routing decision printed");
    }
}

#[test]
fn weak_witness_names_the_tuple() {
    let out = run(&["check", &fixture("WEAK-BAD.ngt")]);
    let w = out.reports[0].witness.as_deref().unwrap();
    assert!(w.starts_with("p=p1 (m,a)=(n0,a) (n,b)=(n4,a) B={n2}"), "{w}");
}

#[test]
fn forced_patterns_on_nondeterministic_exits_3() {
    for file in ["FIG1M.ngt", "FIG1R.ngt", "NODOM.ngt", "WEAK-BAD.ngt"] {
        let out = run(&["check", "--method", "patterns", &fixture(file)]);
        assert_eq!(out.code, 3, "{file}");
        assert_eq!(out.reports[0].verdict, Verdict::Precondition);
    }
}

#[test]
fn forced_methods_agree_with_oracle() {
    for file in ["FIG1L.ngt", "ANTI-F.ngt", "ANTI-C.ngt", "FIG1R-MOD.ngt", "FIG1M.ngt", "WEAK-BAD.ngt"] {
        let auto = run(&["check", &fixture(file)]);
        let oracle = run(&["check", "--method", "oracle", &fixture(file)]);
        assert_eq!(auto.code, oracle.code, "{file}");
    }
    assert_eq!(run(&["check", "--method", "game", &fixture("FIG1M.ngt")]).code, 0);
    assert_eq!(run(&["check", "--method", "weak", &fixture("FIG1L.ngt")]).code, 3);
}

#[test]
fn input_errors_exit_2() {
    assert_eq!(run(&["check", "/no/such/file.ngt"]).code, 2);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("dup.ngt");
    fs::write(&bad, "negotiation d\nprocesses p\ninit a ; fin b\nnode a { p }\nnode a { p }\n").unwrap();
    let out = run(&["check", bad.to_str().unwrap()]);
    assert_eq!(out.code, 2);
    assert!(out.diagnostics[0].contains("line 5"), "{:?}", out.diagnostics);
    assert!(out.stdout.is_empty(), "diagnostics stay off stdout");
    assert_eq!(run(&["frobnicate"]).code, 2);
    assert_eq!(run(&["race", &fixture("FIG1L.ngt"), "n1", "zz"]).code, 2);
}

#[test]
fn batch_glob_keeps_input_order() {
    let pattern = fixture("FIG1*.ngt");
    let out = run(&["check", "--glob", &pattern, "--json"]);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    let names: Vec<String> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|r| PathBuf::from(r["input"].as_str().unwrap()).file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["FIG1L-MOD.ngt", "FIG1L.ngt", "FIG1M.ngt", "FIG1R-MOD.ngt", "FIG1R.ngt"]);
    // worst verdict wins
    assert_eq!(out.code, 1);
}

#[test]
fn json_report_fields() {
    let out = run(&["check", "--json", &fixture("ANTI-F.ngt")]);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    let r = &v[0];
    assert_eq!(r["verdict"], "unsound");
    assert_eq!(r["method"], "patterns");
    assert!(r["witness"].as_str().unwrap().contains("fork (p0,p1,n1,n2)"));
    assert_eq!(r["class"]["deterministic"], true);
    assert!(r["elapsed_ms"].as_f64().unwrap() >= 0.0);
}

#[test]
fn race_and_omit() {
    let d = fixture("DATA1-ACYC.ngt");
    assert_eq!(run(&["race", &d, "n2", "n3"]).code, 1);
    assert_eq!(run(&["race", &d, "n1", "n3"]).code, 0);
    let out = run(&["race", &fixture("FIG1L.ngt"), "n1", "n2"]);
    assert_eq!((out.code, out.reports[0].method.as_deref()), (1, Some("oracle")));
    assert_eq!(run(&["omit", &d, "--include", "(n1,a)"]).code, 0);
    assert_eq!(run(&["omit", &d, "--include", "(n1,a)", "--method", "oracle"]).code, 0);
    assert_eq!(run(&["omit", &fixture("ANTI-F.ngt"), "--method", "game"]).code, 3);
}

#[test]
fn data_analyses() {
    let d = fixture("DATA1.ngt");
    let out = run(&["data", &d, "--kind", "inconsistent", "--var", "x2"]);
    assert_eq!(out.code, 1);
    assert!(out.reports[0].witness.as_deref().unwrap().contains("(n2,a) ∥ (n3,b)"));
    let out = run(&["data", &d, "--kind", "weakly-redundant", "--var", "x2"]);
    assert!(out.reports[0].witness.as_deref().unwrap().contains("at (n3,b) then (n5,a)"));
    assert_eq!(run(&["data", &d, "--kind", "inconsistent", "--var", "nope"]).code, 2);
    assert_eq!(run(&["data", &fixture("FIG1L.ngt"), "--kind", "inconsistent", "--var", "x"]).code, 2);

    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("s.spec");
    fs::write(&spec, "O1: n0:a\nO2: n4:b\nO:\n").unwrap();
    let a = fixture("DATA1-ACYC.ngt");
    let fast = run(&["data", &a, "--spec", spec.to_str().unwrap()]);
    let oracle = run(&["data", &a, "--spec", spec.to_str().unwrap(), "--method", "oracle"]);
    assert_eq!(fast.reports[0].method.as_deref(), Some("fast"));
    assert_eq!(fast.code, oracle.code);
}

#[test]
fn gen_and_dot() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = dir.path().join("f.cnf");
    fs::write(&cnf, "p cnf 1 1\n1 1 1 0\n").unwrap();
    let ngt = dir.path().join("g.ngt");
    assert_eq!(run(&["gen", "cnf", cnf.to_str().unwrap(), "-o", ngt.to_str().unwrap()]).code, 0);
    let out = run(&["check", ngt.to_str().unwrap()]);
    assert_eq!((out.code, out.reports[0].method.as_deref()), (1, Some("oracle")));

    let g = dir.path().join("g.txt");
    fs::write(&g, "s u\nu t\n").unwrap();
    let out = run(&["gen", "digraph", g.to_str().unwrap(), "--source", "s", "--target", "t"]);
    assert!(out.stdout.starts_with("negotiation"));

    let a = run(&["gen", "random", "--nodes", "6", "--procs", "2", "--seed", "4"]);
    let b = run(&["gen", "random", "--nodes", "6", "--procs", "2", "--seed", "4"]);
    assert_eq!(a.stdout, b.stdout);

    let out = run(&["dot", "--witness", &fixture("ANTI-C.ngt")]);
    assert_eq!(out.stdout.matches("highlight=").count(), 3);
    assert!(out.stdout.starts_with("digraph"));
}

#[test]
fn binary_exit_codes_and_streams() {
    let bin = env!("CARGO_BIN_EXE_negsound");
    let ok = Command::new(bin).args(["check", &fixture("FIG1L.ngt")]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(ok.stderr.is_empty());
    let bad = Command::new(bin).args(["check", &fixture("FIG1R-MOD.ngt")]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let pre = Command::new(bin).args(["check", "--method", "patterns", &fixture("NODOM.ngt")]).output().unwrap();
    assert_eq!(pre.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&pre.stderr).contains("not deterministic"));
    let missing = Command::new(bin).args(["check", "missing.ngt"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    assert!(missing.stdout.is_empty());
}
