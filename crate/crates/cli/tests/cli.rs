//! Drives the installed binary end to end through temp directories.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sg_embed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sg-embed"))
        .args(args)
        .output()
        .expect("spawning sg-embed")
}

/// Two triangles joined by one symmetric bridge edge, unit weights.
fn write_test_graph(dir: &Path) -> PathBuf {
    let path = dir.join("g.tsv");
    let mut lines = String::new();
    for (a, b) in [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (2, 3)] {
        lines.push_str(&format!("{a}\t{b}\t1.0\n{b}\t{a}\t1.0\n"));
    }
    fs::write(&path, lines).unwrap();
    path
}

#[test]
fn rejects_both_conditioning_flags() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_test_graph(dir.path());
    let out = sg_embed(&[
        "--input",
        input.to_str().unwrap(),
        "--lambda",
        "10",
        "--perplexity",
        "30",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn requires_a_conditioning_flag() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_test_graph(dir.path());
    let out = sg_embed(&["--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn perplexity_needs_squared_distances() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_test_graph(dir.path());
    let out = sg_embed(&["--input", input.to_str().unwrap(), "--perplexity", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("squared-distance"), "stderr: {msg}");
}

#[test]
fn cluster_hint_needs_a_label_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_test_graph(dir.path());
    let out = sg_embed(&[
        "--input",
        input.to_str().unwrap(),
        "--lambda",
        "1",
        "--reorder",
        "cluster-hint",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_input_fails_with_the_path_in_the_message() {
    let out = sg_embed(&["--input", "/no/such/file.tsv", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("/no/such/file.tsv"), "stderr: {msg}");
}

#[test]
fn end_to_end_run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_test_graph(dir.path());
    let outdir = dir.path().join("run");
    let out = sg_embed(&[
        "--input",
        input.to_str().unwrap(),
        "--lambda",
        "1.5",
        "--dim",
        "2",
        "--iters",
        "200",
        "--exag-iters",
        "30",
        "--eta",
        "5",
        "--exact",
        "--recall-k",
        "2",
        "--outdir",
        outdir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let embedding = fs::read_to_string(outdir.join("embedding.tsv")).unwrap();
    let rows: Vec<&str> = embedding.lines().collect();
    assert_eq!(rows.len(), 6);
    for (i, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split('\t').collect();
        assert_eq!(cols.len(), 3);
        assert_eq!(cols[0].parse::<usize>().unwrap(), i);
        for c in &cols[1..] {
            assert!(c.parse::<f64>().unwrap().is_finite());
        }
    }

    let trace = fs::read_to_string(outdir.join("kl_trace.tsv")).unwrap();
    let points: Vec<&str> = trace.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(points.len() >= 2);
    let kl_of = |line: &str| line.split('\t').nth(1).unwrap().parse::<f64>().unwrap();
    assert!(kl_of(points.last().unwrap()) < kl_of(points[0]));

    let manifest = fs::read_to_string(outdir.join("manifest.txt")).unwrap();
    for key in ["lambda = 1.5", "dim = 2", "iters = 200", "seed = 0"] {
        assert!(manifest.contains(key), "manifest missing {key:?}:\n{manifest}");
    }

    let recall = fs::read_to_string(outdir.join("recall.tsv")).unwrap();
    assert_eq!(recall.lines().filter(|l| !l.starts_with('#')).count(), 6);
    assert_eq!(recall.lines().filter(|l| l.starts_with("# bin")).count(), 20);
}

#[test]
fn reruns_with_one_thread_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_test_graph(dir.path());
    let run = |outdir: &Path| {
        let out = sg_embed(&[
            "--input",
            input.to_str().unwrap(),
            "--lambda",
            "1",
            "--iters",
            "50",
            "--exag-iters",
            "15",
            "--eta",
            "20",
            "--threads",
            "1",
            "--outdir",
            outdir.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        fs::read(outdir.join("embedding.tsv")).unwrap()
    };
    let a = run(&dir.path().join("a"));
    let b = run(&dir.path().join("b"));
    assert_eq!(a, b);
}
