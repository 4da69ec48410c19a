use std::path::Path;
use std::process::Command;

fn radsurv(dir: &Path, args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_radsurv"))
        .args(["--seed", "2", "--out"])
        .arg(dir)
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn feature_workflow() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let p = |f: &str| d.join(f).to_string_lossy().into_owned();
    radsurv(d, &["synth", "--n", "30"]);
    let manifest = p("manifest.csv");
    assert!(radsurv(d, &["extract", "--manifest", &manifest]).starts_with("30 subjects x 892 features"));
    let selected = radsurv(d, &["select", "--manifest", &manifest, "--features", &p("features.csv"), "--k", "3"]);
    assert_eq!(selected.lines().count(), 3);
    radsurv(
        d,
        &["fit", "--manifest", &manifest, "--features", &p("features.csv"), "--selection", &p("selection.json")],
    );
    radsurv(d, &["predict", "--model", &p("model.json"), "--features", &p("features.csv")]);
    let c: f64 = radsurv(d, &["cindex", "--manifest", &manifest, "--scores", &p("scores.csv")]).trim().parse().unwrap();
    assert!((0.5..=1.0).contains(&c), "training C = {c}");

    std::fs::copy(p("scores.csv"), p("a.csv")).unwrap();
    radsurv(d, &["ensemble", "--scores", &p("a.csv"), &p("scores.csv")]);
    assert!(d.join("ensemble.csv").is_file());

    let masks: Vec<String> = (0..3).map(|i| p(&format!("synth-{i:03}_mask.json"))).collect();
    let alts: Vec<String> = (0..3).map(|i| p(&format!("synth-{i:03}_mask_alt.json"))).collect();
    let mut args = vec!["dice", "--pred"];
    args.extend(alts.iter().map(String::as_str));
    args.push("--truth");
    args.extend(masks.iter().map(String::as_str));
    let summary = radsurv(d, &args);
    assert!(summary.contains("label 1"));
    let rows = std::fs::read_to_string(d.join("dice.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 3 * 2);

    let sub = tmp.path().join("pre");
    radsurv(&sub, &["preprocess", "--manifest", &manifest, "--subject", "synth-001", "--crop", "24"]);
    assert!(sub.join("pet.json").is_file() && sub.join("mask.json").is_file());
}

#[test]
fn bad_manifest_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("m.csv");
    std::fs::write(&bad, "subject_id,time_days\nx,3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_radsurv"))
        .args(["extract", "--manifest"])
        .arg(&bad)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing column"));
}

#[test]
fn cv_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    radsurv(&data, &["synth", "--n", "100"]);
    let manifest = data.join("manifest.csv").to_string_lossy().into_owned();
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let row = radsurv(&out, &["cv", "--manifest", &manifest]);
        assert!(row.contains("Survival net + Clinical indicators"), "{row}");
        reports.push(std::fs::read(out.join("report.json")).unwrap());
        assert!(out.join("folds/4/net.json").is_file());
    }
    assert!(reports[0] == reports[1]);
}
