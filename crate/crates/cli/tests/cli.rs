use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn attman(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attman")).args(args).output().expect("spawn attman")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn eigs_inverted_table() {
    let o = attman(&["eigs", "--model", "s2", "--equilibrium", "inverted"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("-1.6180   v1 = e1 - 1.6180e4"), "{text}");
    assert!(text.contains("v2 = e2 - 1.6180e5"), "{text}");
    assert!(text.contains("0.6180"), "{text}");
    assert_eq!(text.matches("(not admissible)").count(), 2, "{text}");
    assert!(text.contains("stable 2, unstable 2: saddle"), "{text}");
}

#[test]
fn eigs_so3_lists_every_equilibrium() {
    let o = attman(&["eigs", "--model", "so3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for needle in ["equilibrium desired", "equilibrium e1", "equilibrium e2", "equilibrium e3", "-1.0477", "0.5954", "stable-focus"] {
        assert!(text.contains(needle), "missing {needle}:\n{text}");
    }
}

#[test]
fn negative_duration_names_the_flag() {
    let o = attman(&["simulate", "--model", "so3", "--T", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--T"), "{}", stderr(&o));
}

#[test]
fn argument_and_parameter_errors_exit_2() {
    for args in [
        vec!["simulate", "--T", "0.005"],
        vec!["simulate", "--h", "1.5", "--param", "komega=2"],
        vec!["simulate", "--state", "0,0,0"],
        vec!["eigs", "--model", "s2", "--equilibrium", "e1"],
        vec!["eigs", "--param", "nope=1"],
        vec!["eigs", "--param", "kq=x"],
        vec!["manifold", "--delta", "0.5", "--out", "unused.jsonl"],
        vec!["manifold", "--model", "s2", "--equilibrium", "hanging", "--out", "unused.jsonl"],
        vec!["validate", "--bundle", "does-not-exist.jsonl", "--seed", "0", "--t", "0"],
    ] {
        let o = attman(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error"), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn blow_up_exits_1() {
    let o = attman(&["simulate", "--state", "1,0,0:0,0,600", "--T", "0.01"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("step 1"), "{}", stderr(&o));
}

#[test]
fn simulate_writes_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let o = attman(&["simulate", "--model", "so3", "--state", "0,0,1:0.1,0,0", "--T", "0.1", "--stride", "10", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("seed,t,R11"));
    assert_eq!(lines.len(), 1 + 6);
    assert!(lines[6].starts_with("0,0.1,"), "{}", lines[6]);

    let o = attman(&["simulate", "--T", "0.004", "--direction", "bwd"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 3);
    assert!(stdout(&o).starts_with("{\"seed\":0,\"t\":0.0,\"q\":[1.0,0.0,0.0]"));
}

#[test]
fn manifold_validate_export_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let args = |out: &Path| {
        vec![
            "manifold".to_string(),
            "--model".into(),
            "s2".into(),
            "--equilibrium".into(),
            "inverted".into(),
            "--delta".into(),
            "1e-6".into(),
            "--points".into(),
            "12".into(),
            "--T".into(),
            "2".into(),
            "--h".into(),
            "0.002".into(),
            "--out".into(),
            path_str(out).into(),
        ]
    };
    for out in [&a, &b] {
        let argv = args(out);
        let o = attman(&argv.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "runs are not byte-identical");
    assert_eq!(fs::read_to_string(&a).unwrap().lines().count(), 12 * 1001);
    assert!(dir.path().join("a.jsonl.meta.json").exists());

    let o = attman(&["validate", "--bundle", path_str(&a), "--seed", "3", "--t", "1.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("delta"));

    let csv = dir.path().join("a.csv");
    let back = dir.path().join("back.jsonl");
    assert_eq!(attman(&["export", "--bundle", path_str(&a), "--out", path_str(&csv)]).status.code(), Some(0));
    assert!(fs::read_to_string(&csv).unwrap().starts_with("seed,t,q1,q2,q3,w1,w2,w3,speed\n"));
    assert_eq!(attman(&["export", "--bundle", path_str(&csv), "--out", path_str(&back)]).status.code(), Some(0));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&back).unwrap());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("params.cfg");
    fs::write(&cfg, "# stiffer gain\nmodel = s2\nkq = 2\n").unwrap();
    let o = attman(&["eigs", "--config", path_str(&cfg), "--equilibrium", "hanging"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // λ² + λ + 2 = 0
    assert!(stdout(&o).contains("-0.5000+1.3229i"), "{}", stdout(&o));
    let o = attman(&["eigs", "--config", path_str(&cfg), "--param", "kq=3", "--equilibrium", "hanging"]);
    assert!(stdout(&o).contains("-0.5000+1.6583i"), "{}", stdout(&o));
    let o = attman(&["eigs", "--config", path_str(&cfg), "--model", "so3", "--equilibrium", "e1"]);
    assert_eq!(o.status.code(), Some(2), "kq does not apply to so3: {}", stdout(&o));
}

#[test]
fn help_documents_defaults() {
    for (sub, needles) in [
        ("simulate", &["--T", "[default: 10]", "[default: 0.002]", "[default: fwd]", "--state"][..]),
        ("manifold", &["--delta", "[default: 0.000001]", "[default: 100]", "[default: 9]", "--stride"][..]),
        ("validate", &["--bundle", "--seed", "--t", "--h"][..]),
        ("export", &["--bundle", "--out", "--format"][..]),
        ("eigs", &["--model", "--equilibrium"][..]),
    ] {
        let o = attman(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        for n in needles {
            assert!(text.contains(n), "{sub} --help lacks {n}:\n{text}");
        }
    }
}
