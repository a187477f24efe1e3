use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(rel)
}

fn mdpattern(args: &[&str]) -> Output {
    mdpattern_env(args, &[])
}

fn mdpattern_env(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mdpattern"));
    cmd.args(args).env_remove("MDPATTERN_CODE_TABLE");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// A manifest over the bundled fixtures.
fn manifest(dir: &Path) -> PathBuf {
    let path = dir.join("corpus.txt");
    let text = format!(
        "# fixtures\nmips = {}\narm = {}\nsynth = {}\nsynth-flat = {} no-includes\n",
        data("addition/mips.md").display(),
        data("addition/arm.md").display(),
        data("synth/synth.md").display(),
        data("synth/synth.md").display(),
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn str_path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stats_text_and_json_agree() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path());
    let text = mdpattern(&["stats", str_path(&m)]);
    assert!(text.status.success());
    let json = mdpattern(&["stats", str_path(&m), "--format", "json"]);
    assert!(json.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(v["table"], "stats");
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let text = stdout(&text);
    for row in rows {
        let arch = row["arch"].as_str().unwrap();
        let line = text.lines().find(|l| l.split_whitespace().next() == Some(arch)).unwrap();
        let fields: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(fields[1], row["expressions"].to_string());
        assert_eq!(fields[2], row["patterns"].to_string());
        assert_eq!(fields[3].parse::<f64>().unwrap(), row["average"].as_f64().unwrap());
    }
    let synth = rows.iter().find(|r| r["arch"] == "synth").unwrap();
    let flat = rows.iter().find(|r| r["arch"] == "synth-flat").unwrap();
    assert_eq!(synth["expressions"], 50);
    assert_eq!(flat["expressions"], 40);
}

#[test]
fn global_flags_apply_to_every_architecture() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path());
    let o = mdpattern(&["stats", str_path(&m), "--format=json", "--no-includes", "--heads=define_insn"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let synth = v["rows"].as_array().unwrap().iter().find(|r| r["arch"] == "synth").unwrap().clone();
    assert!(synth["expressions"].as_u64().unwrap() < 40);
    let mips = v["rows"].as_array().unwrap().iter().find(|r| r["arch"] == "mips").unwrap().clone();
    assert_eq!(mips["expressions"], 0);
    assert!(mips["average"].is_null());
}

#[test]
fn compare_reports_addition_pair() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path());
    let o = mdpattern(&["compare", str_path(&m), "mips", "arm", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let tables: Vec<&str> = v.as_array().unwrap().iter().map(|r| r["table"].as_str().unwrap()).collect();
    assert_eq!(tables, ["pattern-sim", "expr-sim", "coverage"]);
    assert_eq!(v[0]["cells"][0]["count"], 1);
    assert_eq!(v[0]["cells"][0]["pct"], 100.0);
    assert_eq!(v[2]["cells"].as_array().unwrap().len(), 2);

    let text = stdout(&mdpattern(&["compare", str_path(&m), "mips", "arm", "--metric", "pattern"]));
    assert!(text.contains("1 (100.00%)"), "{text}");
}

#[test]
fn matrix_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path());
    let o = mdpattern(&["matrix", str_path(&m), "--format=json", "--metric=coverage"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["cells"].as_array().unwrap().len(), 12);
    let o = mdpattern(&["matrix", str_path(&m), "--format=json", "--metric=expression"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["cells"].as_array().unwrap().len(), 6);
    for c in v["cells"].as_array().unwrap() {
        let pct = c["pct"].as_f64().unwrap();
        assert!((0.0..=100.0).contains(&pct));
        assert_eq!(pct, (pct * 100.0).round() / 100.0);
    }
}

#[test]
fn split_recombine_merge() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("arch");
    let o = mdpattern(&["split", str_path(&data("synth/synth.md")), "--out", str_path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let patterns = out.join("synth.patterns");
    let params = out.join("synth.params");
    assert!(std::fs::read_to_string(&patterns).unwrap().contains("# total_templates: 50"));

    let regenerated = dir.path().join("regen.md");
    let o = mdpattern(&["recombine", str_path(&patterns), str_path(&params), "--out", str_path(&regenerated)]);
    assert!(o.status.success());
    let m = dir.path().join("regen.txt");
    std::fs::write(&m, format!("regen = {}\n", regenerated.display())).unwrap();
    let o = mdpattern(&["stats", str_path(&m), "--format=json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rows"][0]["expressions"], 50);

    let all = stdout(&mdpattern(&["merge", str_path(&patterns), str_path(&patterns)]));
    assert!(all.contains("# total_templates: 100"));
    let frequent = stdout(&mdpattern(&["merge", str_path(&patterns), str_path(&patterns), "--min-count", "2"]));
    let count = |s: &str| s.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).count();
    assert!(count(&frequent) < count(&all));
    assert!(count(&frequent) > 0);
}

#[test]
fn extract_writes_archives() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path());
    let out = dir.path().join("x");
    let o = mdpattern(&["extract", str_path(&m), "arm", "--out", str_path(&out)]);
    assert!(o.status.success());
    let params = std::fs::read_to_string(out.join("arm.params")).unwrap();
    assert!(params.contains("define_expand \"addsi3\""), "{params}");
}

#[test]
fn verify_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path());
    let o = mdpattern(&["verify", str_path(&m)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = mdpattern(&["verify", str_path(&m), "synth", "--format=json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rows"][0]["expressions"], 50);
    assert_eq!(v["rows"][0]["changed"], 0);
}

#[test]
fn code_table_override_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path());
    let table = dir.path().join("codes.txt");
    std::fs::write(&table, "# treat plus as machine-specific\nplus obj 0\n").unwrap();
    let before = stdout(&mdpattern(&["compare", str_path(&m), "mips", "synth", "--metric=pattern", "--format=json"]));
    let after = stdout(&mdpattern_env(
        &["compare", str_path(&m), "mips", "synth", "--metric=pattern", "--format=json"],
        &[("MDPATTERN_CODE_TABLE", &table)],
    ));
    assert_ne!(before, after);
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "plus\n").unwrap();
    let o = mdpattern_env(&["stats", str_path(&m)], &[("MDPATTERN_CODE_TABLE", &bad)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    assert_eq!(mdpattern(&["--help"]).status.code(), Some(0));
    assert_eq!(mdpattern(&["--version"]).status.code(), Some(0));
    assert_eq!(mdpattern(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mdpattern(&["stats", "/nonexistent/manifest"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path());
    assert_eq!(mdpattern(&["compare", str_path(&m), "mips", "nope"]).status.code(), Some(1));

    let broken = dir.path().join("broken.md");
    std::fs::write(&broken, "(define_insn \"x\" [(set (reg 0) (reg 1))] \"\"").unwrap();
    let bm = dir.path().join("broken.txt");
    std::fs::write(&bm, format!("ok = {}\nbroken = {}\n", data("addition/arm.md").display(), broken.display())).unwrap();
    let o = mdpattern(&["stats", str_path(&bm)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("ok"), "the readable architecture is still reported");
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken"));
}
