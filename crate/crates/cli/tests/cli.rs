use std::path::PathBuf;
use std::process::Command;

use bisim_cli::{run, EXIT_BISIMILAR, EXIT_ERROR, EXIT_NOT_BISIMILAR};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["bisim".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn bisimilar_pair() {
    let (code, out, err) = invoke(&[&fixture("a2.tck"), &fixture("a3.tck")]);
    assert_eq!(code, EXIT_BISIMILAR, "{err}");
    assert_eq!(out, "bisimilar\n");
}

#[test]
fn contradiction_in_text_and_json() {
    let (code, out, _) = invoke(&[&fixture("a1.tck"), &fixture("a2.tck")]);
    assert_eq!(code, EXIT_NOT_BISIMILAR);
    assert_eq!(out, "not bisimilar\n  χ0 = χ1 = 0\n");
    let (code, out, _) = invoke(&[&fixture("a1.tck"), &fixture("a2.tck"), "--json"]);
    assert_eq!(code, EXIT_NOT_BISIMILAR);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["bisimilar"], false);
    assert_eq!(v["contradictions"], serde_json::json!(["χ0 = χ1 = 0"]));
    assert!(v["pairs_visited"].as_u64().unwrap() > 0);
    assert!(v.get("millis").is_none());
}

#[test]
fn stats_add_counters_and_time() {
    let (code, out, _) = invoke(&[&fixture("a2.tck"), &fixture("a6.tck"), "--json", "--stats"]);
    assert_eq!(code, EXIT_BISIMILAR);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["millis"].as_f64().is_some());
    assert!(v["max_depth"].as_u64().is_some());
    let (_, out, _) = invoke(&[&fixture("a2.tck"), &fixture("a6.tck"), "--stats"]);
    assert!(out.starts_with("bisimilar\npairs visited: "), "{out}");
    assert!(out.contains("\ntime: "));
}

#[test]
fn output_is_deterministic() {
    let args = [fixture("a1.tck"), fixture("a4.tck"), "--json".to_string()];
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let first = invoke(&args);
    for _ in 0..3 {
        assert_eq!(invoke(&args), first);
    }
}

#[test]
fn bounded_order() {
    // Order 0 compares only the initial zones, which agree.
    let (code, _, _) = invoke(&[&fixture("a1.tck"), &fixture("a2.tck"), "--order", "0"]);
    assert_eq!(code, EXIT_BISIMILAR);
    let (code, out, _) = invoke(&[&fixture("a1.tck"), &fixture("a2.tck"), "--order", "5"]);
    assert_eq!(code, EXIT_NOT_BISIMILAR);
    assert_eq!(out, "not bisimilar\n  χ0 = χ1 = 0\n");
    let (code, _, _) = invoke(&[&fixture("a2.tck"), &fixture("a3.tck"), "--order", "4"]);
    assert_eq!(code, EXIT_BISIMILAR);
}

#[test]
fn missing_file() {
    let (code, out, err) = invoke(&["missing.tck", &fixture("a1.tck")]);
    assert_eq!(code, EXIT_ERROR);
    assert!(out.is_empty());
    assert!(err.starts_with("error: missing.tck: "), "{err}");
}

#[test]
fn parse_errors_carry_positions() {
    let dir = std::env::temp_dir().join(format!("bisim-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.tck");
    std::fs::write(
        &bad,
        "system:s\nclock:1:x\nevent:a\nprocess:P\nlocation:P:l0{initial:}\nedge:P:l0:l9:a{}\n",
    )
    .unwrap();
    let bad = bad.to_string_lossy().into_owned();
    let (code, _, err) = invoke(&[&bad, &fixture("a1.tck")]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.starts_with(&format!("error: {bad}:6:")), "{err}");
    assert!(err.contains("l9"), "{err}");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn visited_limit_is_an_error() {
    let (code, _, err) = invoke(&[&fixture("a2.tck"), &fixture("a3.tck"), "--max-visited", "1"]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("limit"), "{err}");
}

#[test]
fn usage_errors() {
    let (code, _, err) = invoke(&[&fixture("a1.tck")]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("Usage"), "{err}");
    let (code, _, _) = invoke(&[&fixture("a1.tck"), &fixture("a2.tck"), "--order", "x"]);
    assert_eq!(code, EXIT_ERROR);
}

#[test]
fn binary_exit_codes_and_tracing() {
    let bin = env!("CARGO_BIN_EXE_bisim");
    let status = |args: &[String]| Command::new(bin).args(args).output().unwrap();
    let o = status(&[fixture("a2.tck"), fixture("a3.tck")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout), "bisimilar\n");
    assert!(o.stderr.is_empty());
    assert_eq!(status(&[fixture("a1.tck"), fixture("a2.tck")]).status.code(), Some(1));
    assert_eq!(
        status(&["missing.tck".into(), fixture("a2.tck")]).status.code(),
        Some(2)
    );
    let traced = Command::new(bin)
        .args([fixture("a1.tck"), fixture("a2.tck")])
        .env("BISIM_LOG", "trace")
        .output()
        .unwrap();
    assert_eq!(traced.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&traced.stderr).contains("depth"));
}
