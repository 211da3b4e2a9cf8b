use std::path::Path;
use std::process::Command;

use vistoken::cli::run;
use vistoken::io::report::read_result;
use vistoken::io::synth::read_fixture_meta;

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("vistoken").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth_into(dir: &Path, seed: &str) {
    let (code, _, err) = invoke(&["synth", "--seed", seed, "--out", p(dir)]);
    assert_eq!(code, 0, "{err}");
}

fn select_args<'a>(out: &'a Path, files: &'a [String; 4]) -> Vec<&'a str> {
    vec![
        "select", "--visual", &files[0], "--attention", &files[1], "--text", &files[2], "--projector", &files[3],
        "--out", p(out),
    ]
}

fn fixture_files(fx: &Path) -> [String; 4] {
    ["visual", "attention", "text", "projector"].map(|n| fx.join(format!("{n}.fvlm")).to_str().unwrap().to_owned())
}

#[test]
fn synth_select_metrics_round() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = tmp.path().join("fx");
    synth_into(&fx, "4");
    let files = fixture_files(&fx);
    let out = tmp.path().join("r.json");
    let mut args = select_args(&out, &files);
    args.extend(["--keep", "128"]);
    let (code, _, err) = invoke(&args);
    assert_eq!(code, 0, "{err}");
    let doc = read_result(&out).unwrap();
    assert_eq!(doc.kept_indices.len(), 128);
    assert_eq!(doc.important_indices.len(), 64);
    assert_eq!(doc.diverse_indices.len(), 64);
    assert_eq!(doc.stats.n_tokens, 576);
    assert_eq!((doc.stats.prune_ratio * 1e4).round() / 1e4, 0.7778);
    assert!(!doc.stats.no_query);

    let fixture_json = fx.join("fixture.json");
    let (code, text, err) = invoke(&["metrics", "--result", p(&out), "--fixture", p(&fixture_json)]);
    assert_eq!(code, 0, "{err}");
    let m: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(m["iou"].as_f64().unwrap() > 0.0);
    assert!(m["entropy"].as_f64().unwrap() > 0.0);
}

#[test]
fn select_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = tmp.path().join("fx");
    synth_into(&fx, "9");
    let files = fixture_files(&fx);
    let a = tmp.path().join("a.json");
    let b = tmp.path().join("b.json");
    assert_eq!(invoke(&select_args(&a, &files)).0, 0);
    assert_eq!(invoke(&select_args(&b, &files)).0, 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn metrics_on_box_cells_gives_unit_iou() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = tmp.path().join("fx");
    synth_into(&fx, "2");
    let meta = read_fixture_meta(fx.join("fixture.json")).unwrap();
    let cells = meta.query_box.cells(&meta.grid);
    let files = fixture_files(&fx);
    let out = tmp.path().join("r.json");
    let keep = cells.len().to_string();
    let mut args = select_args(&out, &files);
    args.extend(["--keep", &keep]);
    assert_eq!(invoke(&args).0, 0);

    // overwrite the selection with exactly the box cells
    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    doc["kept_indices"] = serde_json::json!(cells);
    std::fs::write(&out, serde_json::to_string(&doc).unwrap()).unwrap();
    let b = meta.query_box;
    let spec = format!("{},{},{},{}", b.row_min, b.col_min, b.row_max, b.col_max);
    let (code, text, err) = invoke(&["metrics", "--result", p(&out), "--box", &spec, "--grid", "24x24"]);
    assert_eq!(code, 0, "{err}");
    assert!(text.contains("\"iou\": 1.0"), "{text}");
}

#[test]
fn no_text_flags_no_query() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = tmp.path().join("fx");
    synth_into(&fx, "1");
    let files = fixture_files(&fx);
    let (code, text, _) = invoke(&["select", "--visual", &files[0], "--attention", &files[1], "--keep", "32"]);
    assert_eq!(code, 0);
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["stats"]["no_query"], true);
    assert_eq!(doc["kept_indices"].as_array().unwrap().len(), 32);
}

#[test]
fn verify_cover_passes() {
    let (code, text, err) = invoke(&["verify", "--mode", "cover", "--tau", "0.9"]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["lemma_violations"], 0);
}

#[test]
fn verify_stability_and_cost() {
    assert_eq!(invoke(&["verify", "--mode", "stability", "--noise", "0.1", "--seed", "3"]).0, 0);
    let (code, text, _) = invoke(&["verify", "--mode", "cost", "--sizes", "512"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let ratio = v["reports"][0]["ratio"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 0.1);
}

#[test]
fn bench_prints_one_row_per_budget() {
    let (code, text, err) = invoke(&["bench", "--fixtures", "2", "--tokens", "144", "--clusters", "4", "--budgets", "32,16"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().trim_start().starts_with("32"));
}

#[test]
fn usage_and_data_errors() {
    let (code, _, err) = invoke(&["frobnicate"]);
    assert_eq!(code, 1);
    assert!(err.contains("Usage"));
    assert_eq!(invoke(&["select", "--visual", "x"]).0, 1);
    assert_eq!(invoke(&["--help"]).0, 0);
    assert_eq!(invoke(&["select", "--visual", "/nonexistent.fvlm", "--attention", "/nonexistent.fvlm"]).0, 2);
    assert_eq!(invoke(&["synth", "--floor", "1.0", "--out", "/tmp/never"]).0, 2);
}

#[test]
fn bad_parameter_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = tmp.path().join("fx");
    synth_into(&fx, "1");
    let files = fixture_files(&fx);
    let (code, _, err) = invoke(&["select", "--visual", &files[0], "--attention", &files[1], "--split", "1.5"]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_vistoken");
    assert_eq!(Command::new(bin).arg("nope").output().unwrap().status.code(), Some(1));
    assert_eq!(Command::new(bin).arg("--version").output().unwrap().status.code(), Some(0));
    let out = Command::new(bin).args(["verify", "--mode", "cover"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}
