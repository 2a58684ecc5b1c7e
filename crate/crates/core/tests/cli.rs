use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use samstar::mask::{io, Mask, MaskSet};

fn samstar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_samstar"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn score_line(text: &str, name: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{name} = ")))
        .unwrap_or_else(|| panic!("no {name} in {text}"))
        .parse()
        .unwrap()
}

#[test]
fn synth_then_score_the_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = samstar(&["synth", "disks", "--seed", "2", "--out", p(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("image.png").is_file());
    let truth = dir.path().join("truth.rle");
    let scored = samstar(&["score", p(&truth)]);
    assert!(scored.status.success());
    let text = stdout(&scored);
    assert_eq!(score_line(&text, "overlap_fidelity"), 1.0);
    assert_eq!(score_line(&text, "overlapping_pairs"), 0.0);
}

#[test]
fn score_counts_duplicates_and_empty_sets() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.rle");
    fs::write(&empty, io::format_mask_set(&MaskSet::empty(8, 8))).unwrap();
    assert_eq!(score_line(&stdout(&samstar(&["score", p(&empty)])), "overlap_fidelity"), 1.0);

    let m = Mask::from_bitmap(8, 8, &(0..64).map(|i| i % 8 < 4).collect::<Vec<_>>()).unwrap();
    let dup = dir.path().join("dup.rle");
    fs::write(&dup, io::format_mask_set(&MaskSet::new(8, 8, vec![m.clone(), m]).unwrap())).unwrap();
    let text = stdout(&samstar(&["score", p(&dup)]));
    assert_eq!(score_line(&text, "duplicate_pairs"), 1.0);
    assert_eq!(score_line(&text, "overlapping_pairs"), 0.0);
    // (1 + O) / (1 + alpha D + beta B) with alpha = beta = 1.
    assert_eq!(score_line(&text, "overlap_fidelity"), 0.5);
}

#[test]
fn render_writes_a_label_png_and_its_rle() {
    let dir = tempfile::tempdir().unwrap();
    assert!(samstar(&["synth", "mixed", "--out", p(dir.path())]).status.success());
    let png = dir.path().join("labels.png");
    let out = samstar(&["render", p(&dir.path().join("truth.rle")), p(&png)]);
    assert!(out.status.success());
    let labels = io::read_image(&png).unwrap();
    assert_eq!(labels.data().iter().copied().max(), Some(16));
    assert_eq!(
        fs::read_to_string(dir.path().join("labels.rle")).unwrap(),
        fs::read_to_string(dir.path().join("truth.rle")).unwrap()
    );
}

#[test]
fn tune_rerun_from_manifest_and_pareto() {
    let dir = tempfile::tempdir().unwrap();
    assert!(samstar(&["synth", "disk", "--out", p(dir.path())]).status.success());
    let image = dir.path().join("image.png");
    let first = dir.path().join("run1");
    let out = samstar(&[
        "tune", "--image", p(&image), "--seed", "4", "--pop", "6", "--gens", "2", "--out", p(&first),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("trade-off"));
    for f in ["manifest.toml", "history.csv", "front.csv", "tradeoff.txt"] {
        assert!(first.join(f).is_file(), "{f}");
    }
    assert!(!first.join("INCOMPLETE").exists());

    let second = dir.path().join("run2");
    let manifest = first.join("manifest.toml");
    let out = samstar(&["tune", "--config", p(&manifest), "--workers", "3", "--out", p(&second)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["manifest.toml", "history.csv", "front.csv", "tradeoff.txt"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f}");
    }

    let plots = dir.path().join("plots");
    let out = samstar(&["pareto", p(&first.join("history.csv")), "--out", p(&plots)]);
    assert!(out.status.success());
    assert!(plots.join("pareto_front.csv").is_file());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(samstar(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(samstar(&["synth", "teapot", "--out", p(dir.path())]).status.code(), Some(2));
    assert_eq!(samstar(&["score", p(&dir.path().join("missing.rle"))]).status.code(), Some(4));
    assert_eq!(samstar(&["tune", "--image", p(&dir.path().join("missing.png"))]).status.code(), Some(2));

    let history = dir.path().join("history.csv");
    fs::write(&history, "").unwrap();
    assert_ne!(samstar(&["pareto", p(&history)]).status.code(), Some(0));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "mode = \"single\"\nbogus = 1\n").unwrap();
    assert_eq!(samstar(&["tune", "--config", p(&bad), "--out", p(dir.path())]).status.code(), Some(2));

    assert!(samstar(&["synth", "disk", "--out", p(dir.path())]).status.success());
    let out = samstar(&[
        "tune", "--image", p(&dir.path().join("image.png")), "--pop", "4", "--gens", "1", "--segmenter",
        "tcp:127.0.0.1:1", "--out", p(&dir.path().join("run")),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
