//! End-to-end command tests, driving the CLI in-process through
//! `cli::run_from` and checking exit codes and output files.

mod common;

use std::collections::BTreeSet;
use std::path::Path;

use detpipe::annotations::{
    parse_detections, parse_ground_truth, serialize_detections, serialize_ground_truth,
    BoundingBox, ClassId, DetectionRecord, FrameGeometry, GroundTruthRecord, ParseMode,
};
use detpipe::cli;
use tempfile::TempDir;

fn run(args: &[&str]) -> u8 {
    let mut full = vec!["detpipe"];
    full.extend_from_slice(args);
    cli::run_from(full)
}

fn gt(video: u32, frame: u32, track: u32, left: f64, class: ClassId) -> GroundTruthRecord {
    GroundTruthRecord {
        video_id: video,
        frame,
        track_id: track,
        bbox: BoundingBox::new(left, 100.0, 40.0, 60.0),
        class,
    }
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn small_gt() -> Vec<GroundTruthRecord> {
    vec![
        gt(1, 1, 0, 100.0, ClassId::Motorbike),
        gt(1, 1, 1, 300.0, ClassId::DHelmet),
        gt(1, 2, 0, 120.0, ClassId::Motorbike),
        gt(2, 1, 0, 500.0, ClassId::DNoHelmet),
    ]
}

fn identity_dets(gts: &[GroundTruthRecord]) -> Vec<DetectionRecord> {
    gts.iter()
        .map(|g| DetectionRecord {
            video_id: g.video_id,
            frame: g.frame,
            bbox: g.bbox,
            class: g.class,
            confidence: 1.0,
        })
        .collect()
}

#[test]
fn evaluate_perfect_detector_writes_unit_summary() {
    let dir = TempDir::new().unwrap();
    let gt_path = dir.path().join("gt.txt");
    let det_path = dir.path().join("det.txt");
    let out = dir.path().join("out");
    let gts = small_gt();
    std::fs::write(&gt_path, serialize_ground_truth(&gts)).unwrap();
    std::fs::write(&det_path, serialize_detections(&identity_dets(&gts))).unwrap();

    let code = run(&[
        "evaluate",
        "--gt",
        gt_path.to_str().unwrap(),
        "--det",
        det_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let summary = read(&out.join("summary.txt"));
    assert!(summary.contains("map50: 1\n"), "summary:\n{summary}");
    assert!(summary.contains("map50_95: 1\n"), "summary:\n{summary}");
    for file in [
        "summary.txt",
        "per_class_ap.csv",
        "curve_all.csv",
        "curve_motorbike.csv",
        "confusion_matrix.csv",
        "manifest.txt",
    ] {
        assert!(out.join(file).exists(), "{file} missing");
    }
    let manifest = read(&out.join("manifest.txt"));
    assert!(manifest.contains("command: evaluate"));
    assert!(manifest.contains("seed: 0"));
}

#[test]
fn evaluate_empty_detections_is_all_zero_success() {
    let dir = TempDir::new().unwrap();
    let gt_path = dir.path().join("gt.txt");
    let det_path = dir.path().join("det.txt");
    let out = dir.path().join("out");
    std::fs::write(&gt_path, serialize_ground_truth(&small_gt())).unwrap();
    std::fs::write(&det_path, "").unwrap();
    let code = run(&[
        "evaluate",
        "--gt",
        gt_path.to_str().unwrap(),
        "--det",
        det_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let summary = read(&out.join("summary.txt"));
    assert!(summary.contains("map50: 0\n"));
    assert!(summary.contains("map50_95: 0\n"));
    assert!(summary.contains("precision: 0\n"));
}

#[test]
fn evaluate_malformed_input_exits_two() {
    let dir = TempDir::new().unwrap();
    let gt_path = dir.path().join("gt.txt");
    let det_path = dir.path().join("det.txt");
    let out = dir.path().join("out");
    let mut text = serialize_ground_truth(&small_gt());
    text.push_str("1,2,garbage\n"); // line 5 malformed
    std::fs::write(&gt_path, text).unwrap();
    std::fs::write(&det_path, "").unwrap();
    let code = run(&[
        "evaluate",
        "--gt",
        gt_path.to_str().unwrap(),
        "--det",
        det_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);

    // The underlying error names the offending line.
    let err = parse_ground_truth(
        &read(&gt_path),
        &FrameGeometry::default(),
        ParseMode::Lenient,
    )
    .unwrap_err();
    assert!(err.to_string().contains("line 5"), "got: {err}");
}

#[test]
fn evaluate_missing_file_exits_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let code = run(&[
        "evaluate",
        "--gt",
        dir.path().join("nope.txt").to_str().unwrap(),
        "--det",
        dir.path().join("nope2.txt").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn usage_error_exits_two() {
    assert_eq!(run(&["evaluate", "--bogus-flag"]), 2);
    assert_eq!(run(&["no-such-command"]), 2);
}

#[test]
fn sample_default_split_sends_91_to_99_to_val() {
    let dir = TempDir::new().unwrap();
    let gt_path = dir.path().join("gt.txt");
    let out = dir.path().join("out");
    let mut records = Vec::new();
    for video in 1..=100u32 {
        records.push(gt(video, 1, 0, 100.0, ClassId::Motorbike));
        records.push(gt(video, 2, 0, 200.0, ClassId::DHelmet));
    }
    std::fs::write(&gt_path, serialize_ground_truth(&records)).unwrap();
    let code = run(&[
        "sample",
        "--gt",
        gt_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    let geometry = FrameGeometry::default();
    let train = parse_ground_truth(&read(&out.join("train.txt")), &geometry, ParseMode::Strict)
        .unwrap()
        .records;
    let val = parse_ground_truth(&read(&out.join("val.txt")), &geometry, ParseMode::Strict)
        .unwrap()
        .records;
    let val_videos: BTreeSet<u32> = val.iter().map(|r| r.video_id).collect();
    assert_eq!(val_videos, (91..=99).collect());
    let train_videos: BTreeSet<u32> = train.iter().map(|r| r.video_id).collect();
    assert!(train_videos.contains(&100));
    assert!(train_videos.is_disjoint(&val_videos));

    // All stages disabled: train + val together reproduce the input.
    assert_eq!(train.len() + val.len(), records.len());
    let plan = read(&out.join("plan.txt"));
    assert!(plan.contains("KEEP 1 1"));
    let manifest = read(&out.join("manifest.txt"));
    assert!(manifest.contains("stage train_records: 182"));
    assert!(manifest.contains("stage val_records: 18"));
}

#[test]
fn sample_stage_accounting_is_consistent() {
    let dir = TempDir::new().unwrap();
    let gt_path = dir.path().join("gt.txt");
    let out = dir.path().join("out");
    // Two videos with annotated frames 1..10 among 30-frame spans; trailing
    // unannotated frames are background.
    let mut records = Vec::new();
    for video in [1u32, 95] {
        for frame in 1..=10u32 {
            records.push(gt(
                video,
                frame,
                0,
                100.0 + frame as f64,
                ClassId::Motorbike,
            ));
        }
        records.push(gt(video, 30, 0, 400.0, ClassId::DHelmet));
    }
    std::fs::write(&gt_path, serialize_ground_truth(&records)).unwrap();
    let code = run(&[
        "sample",
        "--gt",
        gt_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--keep-background",
        "0.25",
        "--dup-threshold",
        "0.99",
        "--seed",
        "7",
    ]);
    assert_eq!(code, 0);
    let manifest = read(&out.join("manifest.txt"));
    // 30 frames per video, 11 annotated each.
    assert!(manifest.contains("stage universe_frames: 60"));
    assert!(manifest.contains("stage annotated_frames: 22"));
    // 38 background frames; ceil(0.25 * 38) = 10 kept.
    assert!(
        manifest.contains("stage after_background_discard: 32"),
        "manifest:\n{manifest}"
    );
    let plan = read(&out.join("plan.txt"));
    let keeps = plan.lines().filter(|l| l.starts_with("KEEP")).count();
    let drops = plan.lines().filter(|l| l.starts_with("DROP")).count();
    assert_eq!(keeps + drops, 60, "plan:\n{plan}");
}

#[test]
fn sample_oversample_and_caps() {
    let dir = TempDir::new().unwrap();
    let gt_path = dir.path().join("gt.txt");
    let out = dir.path().join("out");
    let mut records = Vec::new();
    for frame in 1..=20u32 {
        records.push(gt(1, frame, 0, 100.0 + frame as f64, ClassId::Motorbike));
    }
    records.push(gt(1, 3, 1, 700.0, ClassId::P1NoHelmet));
    std::fs::write(&gt_path, serialize_ground_truth(&records)).unwrap();
    let code = run(&[
        "sample",
        "--gt",
        gt_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--oversample",
        "flip",
        "--oversample",
        "rot:15",
        "--cap",
        "1=10",
    ]);
    assert_eq!(code, 0);
    let plan = read(&out.join("plan.txt"));
    assert!(plan.contains("AUG 1 3 horizontal_flip 0"), "plan:\n{plan}");
    assert!(plan.contains("AUG 1 3 rotation 15"), "plan:\n{plan}");
    let augmented = read(&out.join("augmented.txt"));
    assert!(!augmented.is_empty());
    // The cap brought motorbike down to 10 at most.
    let geometry = FrameGeometry::default();
    let train = parse_ground_truth(&read(&out.join("train.txt")), &geometry, ParseMode::Strict)
        .unwrap()
        .records;
    let count = train
        .iter()
        .filter(|r| r.class == ClassId::Motorbike)
        .count();
    assert!(count <= 10, "motorbike count {count}");
    // The minority frame survived undersampling.
    assert!(train.iter().any(|r| r.class == ClassId::P1NoHelmet));
}

#[test]
fn fuse_single_input_is_canonical_reserialization() {
    let dir = TempDir::new().unwrap();
    let det_path = dir.path().join("a.txt");
    let out = dir.path().join("out");
    let gts = small_gt();
    let dets = identity_dets(&gts);
    std::fs::write(&det_path, serialize_detections(&dets)).unwrap();
    let code = run(&[
        "fuse",
        "--input",
        det_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let fused = parse_detections(
        &read(&out.join("fused.txt")),
        &FrameGeometry::default(),
        ParseMode::Strict,
    )
    .unwrap()
    .records;
    assert_eq!(fused.len(), dets.len());
    for d in &dets {
        assert!(fused
            .iter()
            .any(|f| f.bbox == d.bbox && f.confidence == d.confidence));
    }
}

#[test]
fn fuse_duplicated_input_is_idempotent() {
    let dir = TempDir::new().unwrap();
    let det_path = dir.path().join("a.txt");
    let out_once = dir.path().join("once");
    let out_twice = dir.path().join("twice");
    let dets = identity_dets(&small_gt());
    std::fs::write(&det_path, serialize_detections(&dets)).unwrap();
    assert_eq!(
        run(&[
            "fuse",
            "--input",
            det_path.to_str().unwrap(),
            "--out",
            out_once.to_str().unwrap(),
        ]),
        0
    );
    assert_eq!(
        run(&[
            "fuse",
            "--input",
            det_path.to_str().unwrap(),
            "--input",
            det_path.to_str().unwrap(),
            "--out",
            out_twice.to_str().unwrap(),
        ]),
        0
    );
    assert_eq!(
        read(&out_once.join("fused.txt")),
        read(&out_twice.join("fused.txt"))
    );
}

#[test]
fn validate_clean_file_reports_zero_violations() {
    let dir = TempDir::new().unwrap();
    let gt_path = dir.path().join("gt.txt");
    let out = dir.path().join("out");
    std::fs::write(&gt_path, serialize_ground_truth(&small_gt())).unwrap();
    let code = run(&[
        "validate",
        "--gt",
        gt_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let report = read(&out.join("validation.txt"));
    assert!(report.contains("violations: 0"));
}

#[test]
fn report_compares_stored_runs() {
    let dir = TempDir::new().unwrap();
    let run_a = dir.path().join("run_a");
    let run_b = dir.path().join("run_b");
    std::fs::create_dir_all(&run_a).unwrap();
    std::fs::create_dir_all(&run_b).unwrap();
    std::fs::write(
        run_a.join("summary.txt"),
        "map50: 0.641\nmap50_95: 0.5\nprecision: 0.848\nrecall: 0.599\nf1: 0.7\n",
    )
    .unwrap();
    std::fs::write(
        run_b.join("summary.txt"),
        "map50: 0.62\nmap50_95: 0.48\nprecision: 0.8\nrecall: 0.55\nf1: 0.65\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let code = run(&[
        "report",
        "--input",
        run_a.to_str().unwrap(),
        "--input",
        run_b.to_str().unwrap(),
        "--label",
        "baseline",
        "--label",
        "ensemble",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let table = read(&out.join("comparison.txt"));
    assert!(table.contains("baseline"));
    assert!(table.contains("ensemble"));
    assert!(table.contains("0.848"));
    assert!(table.contains("map50"));
}

const STUB_EVALUATOR: &str = "printf 'map50: 0.5\\nmap50_95: 0.25\\n' > {metrics}";

#[test]
fn evolve_zero_generations_emits_initial_point() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let code = run(&[
        "evolve",
        "--out",
        out.to_str().unwrap(),
        "--evaluator-cmd",
        STUB_EVALUATOR,
        "--generations",
        "0",
    ]);
    assert_eq!(code, 0);
    let best = read(&out.join("best.hyp"));
    assert!(best.contains("lr0: 0.00936"), "best.hyp:\n{best}");
    assert!(best.contains("anchors: 2.1095"));
    let log = read(&out.join("log.csv"));
    assert_eq!(log.lines().count(), 2); // header + generation 0
}

#[test]
fn evolve_stub_log_length_and_rerun_determinism() {
    let dir = TempDir::new().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let code = run(&[
            "evolve",
            "--out",
            out.to_str().unwrap(),
            "--evaluator-cmd",
            STUB_EVALUATOR,
            "--generations",
            "5",
            "--seed",
            "42",
        ]);
        assert_eq!(code, 0);
        let log = read(&out.join("log.csv"));
        assert_eq!(log.lines().count(), 1 + 1 + 5); // header + gen 0 + 5
    }
    assert_eq!(read(&out_a.join("log.csv")), read(&out_b.join("log.csv")));
    assert!(out_a.join("scatter.csv").exists());
    assert!(out_a.join("scatter_best.csv").exists());
    assert!(out_a.join("space.txt").exists());
}

#[test]
fn evolve_failing_evaluator_continues_and_flags() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let code = run(&[
        "evolve",
        "--out",
        out.to_str().unwrap(),
        "--evaluator-cmd",
        "exit 3",
        "--generations",
        "2",
    ]);
    assert_eq!(code, 0);
    let log = read(&out.join("log.csv"));
    // header + 3 rows, all failed with fitness 0.
    assert_eq!(log.lines().count(), 4);
    for row in log.lines().skip(1) {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[4], "0"); // fitness
        assert_eq!(fields[5], "1"); // failed
    }
}

#[test]
fn evolve_resume_extends_existing_log() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let base = [
        "evolve",
        "--out",
        out.to_str().unwrap(),
        "--evaluator-cmd",
        STUB_EVALUATOR,
        "--seed",
        "9",
    ];
    let mut first = base.to_vec();
    first.extend_from_slice(&["--generations", "3"]);
    assert_eq!(run(&first), 0);
    let mut second = base.to_vec();
    second.extend_from_slice(&["--generations", "6", "--resume"]);
    assert_eq!(run(&second), 0);
    let resumed = read(&out.join("log.csv"));
    assert_eq!(resumed.lines().count(), 1 + 1 + 6);

    // A fresh uninterrupted run over 6 generations gives the same log.
    let out_fresh = dir.path().join("fresh");
    let code = run(&[
        "evolve",
        "--out",
        out_fresh.to_str().unwrap(),
        "--evaluator-cmd",
        STUB_EVALUATOR,
        "--seed",
        "9",
        "--generations",
        "6",
    ]);
    assert_eq!(code, 0);
    assert_eq!(read(&out_fresh.join("log.csv")), resumed);
}
