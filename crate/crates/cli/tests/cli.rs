use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fusemetrics")).args(args).output().expect("spawn fusemetrics")
}

fn ok(args: &[&str]) -> String {
    let o = bin(args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn error_kind(o: &Output) -> String {
    assert!(!o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stderr).expect("stderr is one JSON object");
    v["error"]["kind"].as_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, scenes: &str) {
    ok(&["--out", s(dir), "--seed", "3", "synth", "--scenes", scenes, "--width", "32", "--height", "32"]);
}

#[test]
fn classical_eval_covers_every_pair_and_q_star_recomputes() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    let out = tmp.path().join("out");
    synth(&ds, "50");
    ok(&["--dataset", s(&ds), "--out", s(&out), "--seed", "1", "train-probe", "--epochs", "1"]);
    let probe = out.join("probe.bin");
    ok(&["--dataset", s(&ds), "--out", s(&out), "--workers", "2", "eval-classical", "--probe", s(&probe)]);

    let scores = std::fs::read_to_string(out.join("scores.csv")).unwrap();
    let mut lines = scores.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scene,method,VIF,QABF,SSIM,CC,PSNR,FMI_P,FMI_DCT,FMI_W,EN,SD,EI,SF"
    );
    assert_eq!(lines.count(), 800);

    let mut rdr = csv::Reader::from_path(out.join("adjusted_classical.csv")).unwrap();
    let mut n = 0;
    for r in rdr.records() {
        let r = r.unwrap();
        let f = |k: usize| r[k].parse::<f64>().unwrap();
        let (qi, qv, delta, env, qs) = (f(3), f(4), f(5), f(6), f(7));
        assert_eq!(delta, qv - qi);
        assert!((qs - (qi + qv - env * delta)).abs() <= 1e-12);
        assert!((0.0..=1.0).contains(&env));
        n += 1;
    }
    assert_eq!(n, 800 * 8);
}

#[test]
fn mc_regenerates_from_breakdown() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("t.csv"), "method,A,B,R\nm1,0.5,3,1\nm2,0.1,2,3\nm3,0.9,1,2\nm4,0.7,5,4\n").unwrap();
    std::fs::write(
        d.join("t.json"),
        r#"{"A":{"kind":"metric","higher_is_better":true},
            "B":{"kind":"metric","higher_is_better":false},
            "R":{"kind":"reference","higher_is_better":true}}"#,
    )
    .unwrap();
    let first = d.join("first");
    let second = d.join("second");
    ok(&["--out", s(&first), "--s", "0.05", "mc", "--scores", s(&d.join("t.csv"))]);
    ok(&["--out", s(&second), "mc", "--from-breakdown", s(&first.join("mc_breakdown.csv"))]);
    let a = std::fs::read(first.join("mc_matrix.csv")).unwrap();
    let b = std::fs::read(second.join("mc_matrix.csv")).unwrap();
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().starts_with("metric,R\nA,"));
}

#[test]
fn malformed_score_table_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("t.csv"), "method,A,R\nm1,0.5,1\nm2,oops,2\n").unwrap();
    std::fs::write(
        d.join("t.json"),
        r#"{"A":{"kind":"metric","higher_is_better":true},"R":{"kind":"reference","higher_is_better":true}}"#,
    )
    .unwrap();
    let o = bin(&["--out", s(&d.join("o")), "mc", "--scores", s(&d.join("t.csv"))]);
    assert_eq!(error_kind(&o), "Parse");
    assert!(String::from_utf8_lossy(&o.stderr).contains("t.csv:3"));

    std::fs::write(
        d.join("t.json"),
        r#"{"A":{"kind":"metric","higher_is_better":true},"R":{"kind":"reference","higher_is_better":true},
            "Z":{"kind":"metric","higher_is_better":true}}"#,
    )
    .unwrap();
    std::fs::write(d.join("t.csv"), "method,A,R\nm1,0.5,1\nm2,0.4,2\n").unwrap();
    let o = bin(&["--out", s(&d.join("o")), "mc", "--scores", s(&d.join("t.csv"))]);
    assert_eq!(error_kind(&o), "UnknownColumn");
}

#[test]
fn missing_artifacts_and_bad_flags_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    synth(&ds, "3");
    let o = bin(&["--dataset", s(&ds), "--out", s(&tmp.path().join("o")), "eval-surrogate"]);
    assert_eq!(error_kind(&o), "MissingArtifact");
    let o = bin(&[
        "--dataset",
        s(&ds),
        "--out",
        s(&tmp.path().join("o")),
        "eval-classical",
        "--probe",
        s(&tmp.path().join("nope.bin")),
    ]);
    assert_eq!(error_kind(&o), "MissingArtifact");
    assert_eq!(error_kind(&bin(&["--workers", "0", "mc", "--scores", "x.csv"])), "Config");
    assert_eq!(error_kind(&bin(&["no-such-command"])), "Usage");
    // refuses to clobber an existing dataset
    assert_eq!(error_kind(&bin(&["--out", s(&ds), "synth", "--scenes", "2"])), "Io");
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    let ds = tmp.path().join("ds");
    std::fs::write(&cfg, format!("out = {:?}\nscenes = 2\nwidth = 32\nheight = 32\nmetrics = [\"PSNR\", \"EN\"]\n", s(&ds))).unwrap();
    ok(&["--config", s(&cfg), "synth"]);
    assert_eq!(std::fs::read_dir(ds.join("ir")).unwrap().count(), 2);

    let out = tmp.path().join("out");
    ok(&["--config", s(&cfg), "--dataset", s(&ds), "--out", s(&out), "--metrics", "CC", "eval-classical"]);
    let scores = std::fs::read_to_string(out.join("scores.csv")).unwrap();
    assert_eq!(scores.lines().next().unwrap(), "scene,method,CC");

    std::fs::write(&cfg, "bogus_key = 1\n").unwrap();
    assert_eq!(error_kind(&bin(&["--config", s(&cfg), "synth"])), "Config");
}
