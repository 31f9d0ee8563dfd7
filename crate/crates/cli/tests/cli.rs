use std::path::PathBuf;
use std::process::Command;

use tempfile::TempDir;

const EX1: &str = "default: deny\nconflict: deny\n+ delete /a\n- delete /a[b]\n";
const HOSPITAL: &str = "default: deny\nconflict: deny\n+ insert //patient//* :: *\n\
                        - insert //* :: treatment\n- update //treatment :: *\n";
const OPEN: &str = "default: allow\nconflict: deny\n";

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_xguard")).args(args).output().unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn file(dir: &TempDir, name: &str, body: &str) -> String {
    let p: PathBuf = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn containment_exit_codes() {
    let r = run(&["contains", "/a//b", "/a/b"]);
    assert_eq!(r.code, 1);
    assert!(r.stdout.starts_with("no\nwitness: a(z(b))\nmark: /a/z[1]/b[1]\n"));
    assert_eq!(run(&["contains", "/a/b", "/a//b"]).code, 0);
    let bad = run(&["contains", "/a[", "/a"]);
    assert_eq!(bad.code, 2);
    assert!(bad.stderr.contains("syntax error"));
}

#[test]
fn overlap_witness_selected_by_both() {
    let r = run(&["overlaps", "/a/*", "/*/b"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("witness: a(b)"));
    assert_eq!(run(&["overlaps", "/a", "/b"]).code, 1);
}

#[test]
fn fairness_examples() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(&["fairness", &file(&dir, "ex1", EX1)]);
    assert_eq!(r.code, 1);
    assert!(r.stdout.contains("allowed: a\ndenied: a(b)\n"));
    assert!(r.stdout.contains("violated: - delete /a[b]"));

    let r = run(&["fairness", &file(&dir, "h", HOSPITAL)]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("reason: syntactic (deny-filter-free)"));

    let r = run(&["fairness", &file(&dir, "att", "default: deny\nconflict: deny\n+ delete /a/@id\n")]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("attribute rules unsupported for fairness"));
}

#[test]
fn enforcement_blocker() {
    let dir = tempfile::tempdir().unwrap();
    let ex1 = file(&dir, "ex1", EX1);
    let r = run(&["enforce", &ex1, "delete /a"]);
    assert_eq!(r.code, 1);
    assert!(r.stdout.contains("blocked by: - delete /a[b]\nwitness: a(b)\n"));
    assert_eq!(run(&["enforce", &ex1, "delete /a[b]/c"]).code, 1);
    assert_eq!(run(&["enforce", &file(&dir, "open", OPEN), "delete /a"]).code, 0);
    assert_eq!(run(&["enforce", &ex1, "remove /a"]).code, 2);
}

#[test]
fn dynamic_lists_every_update_of_an_open_policy() {
    let dir = tempfile::tempdir().unwrap();
    let t = file(&dir, "t", "c(a)\n");
    let r = run(&["dynamic", &file(&dir, "open", OPEN), &t]);
    assert_eq!(r.code, 0);
    let lines: Vec<&str> = r.stdout.lines().filter(|l| l.contains(' ') && !l.starts_with("stats")).collect();
    // Two nodes; each admits a delete plus insert and update per class.
    assert_eq!(lines.len(), 2 + 2 * 2 * 3);
    assert!(lines.contains(&"insert /c/a[1] :: text()"));

    let closed = run(&["dynamic", &file(&dir, "closed", "default: deny\nconflict: deny\n"), &t]);
    assert_eq!(closed.stdout.lines().filter(|l| l.starts_with("delete")).count(), 0);
}

#[test]
fn cover_finds_a_capability() {
    let dir = tempfile::tempdir().unwrap();
    let t = file(&dir, "t", "c(a)\n");
    let r = run(&["cover", &file(&dir, "open", OPEN), &t, "delete /c/a[1]", "--fragment", "linear"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("capability: delete /c/a"));
    // Unfair policy: allowed update with no safe capability.
    let r = run(&["cover", &file(&dir, "ex1", EX1), &file(&dir, "a", "a\n"), "delete /a"]);
    assert_eq!(r.code, 1);
}

#[test]
fn json_shape() {
    let r = run(&["--json", "contains", "/a//b", "/a/b"]);
    let v: serde_json::Value = serde_json::from_str(r.stdout.trim()).unwrap();
    assert_eq!(v["answer"], "no");
    assert_eq!(v["witness"]["tree"], "a(z(b))");
    assert!(v["stats"]["instances-explored"].is_u64());
    assert!(v["stats"].get("elapsed-ms").is_none());

    let dir = tempfile::tempdir().unwrap();
    let r = run(&["--json", "--timing", "eval", "//b", &file(&dir, "t", "a(b)\n")]);
    let v: serde_json::Value = serde_json::from_str(r.stdout.trim()).unwrap();
    assert!(v["stats"]["elapsed-ms"].is_u64());
}

#[test]
fn oracles_agree_with_static_answers() {
    let r = run(&["oracle-contains", "/a//b", "/a/b", "--nodes", "4"]);
    assert_eq!(r.code, 1);
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["oracle-fairness", &file(&dir, "ex1", EX1), "--nodes", "3"]).code, 1);
    assert_eq!(run(&["oracle-fairness", &file(&dir, "h", HOSPITAL), "--nodes", "4"]).code, 0);
}
