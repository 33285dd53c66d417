//! Walk annotation records through the dataset-composition pipeline:
//! near-duplicate removal, background discard, train/val split, and
//! minority-class oversampling, printing per-stage counts.
//!
//! ```bash
//! cargo run --example sample_pipeline
//! ```

use std::collections::BTreeSet;

use detpipe::annotations::{
    class_histogram, BoundingBox, ClassId, FrameGeometry, GroundTruthRecord,
};
use detpipe::sampling::{self, AugmentSpec, FrameRef, SimilaritySource, SplitSpec};

fn main() {
    let geometry = FrameGeometry::default();

    // 100 videos, 40 frames each; every fourth frame is annotated. The
    // first half of each video shows a parked motorbike, so those frames
    // carry identical annotations (near-duplicates).
    let mut records = Vec::new();
    for video in 1..=100u32 {
        for slot in 0..10u32 {
            let frame = slot * 4 + 1;
            let left = if slot < 5 {
                100.0
            } else {
                500.0 + 40.0 * slot as f64
            };
            records.push(GroundTruthRecord {
                video_id: video,
                frame,
                track_id: 0,
                bbox: BoundingBox::new(left, 200.0, 150.0, 200.0),
                class: ClassId::Motorbike,
            });
            if video % 10 == 0 && slot == 3 {
                records.push(GroundTruthRecord {
                    video_id: video,
                    frame,
                    track_id: 1,
                    bbox: BoundingBox::new(900.0, 400.0, 100.0, 160.0),
                    class: ClassId::P1NoHelmet,
                });
            }
        }
    }
    let mut frames: Vec<FrameRef> = Vec::new();
    for video in 1..=100u32 {
        frames.extend((1..=40).map(|f| FrameRef::new(video, f)));
    }
    let annotated: BTreeSet<FrameRef> = records
        .iter()
        .map(|r| FrameRef::new(r.video_id, r.frame))
        .collect();
    println!(
        "universe: {} frames, {} annotated",
        frames.len(),
        annotated.len()
    );

    // Drop consecutively similar annotated frames.
    let annotated_frames: Vec<FrameRef> = frames
        .iter()
        .filter(|f| annotated.contains(f))
        .copied()
        .collect();
    let deduped = sampling::near_duplicate_filter(
        &annotated_frames,
        &SimilaritySource::Annotations(&records),
        0.9,
    )
    .unwrap();
    let deduped_set: BTreeSet<FrameRef> = deduped.iter().copied().collect();
    frames.retain(|f| !annotated.contains(f) || deduped_set.contains(f));
    println!("after near-duplicate filter: {} frames", frames.len());

    // Keep 5% of the background.
    let kept = sampling::discard_background(&frames, &annotated, 0.05, 42).unwrap();
    println!("after background discard:    {} frames", kept.len());

    // Default split: train 1-90 and 100, val 91-99.
    let (train, val) = sampling::split_train_val(&kept, &SplitSpec::default()).unwrap();
    println!(
        "split: {} train frames, {} val frames",
        train.len(),
        val.len()
    );

    // Oversample minority classes on the train side.
    let train_set: BTreeSet<FrameRef> = train.iter().copied().collect();
    let train_records: Vec<GroundTruthRecord> = records
        .iter()
        .filter(|r| train_set.contains(&FrameRef::new(r.video_id, r.frame)))
        .cloned()
        .collect();
    let histogram = class_histogram(&train_records);
    let minority = sampling::default_minority_classes(&histogram);
    println!(
        "minority classes: {:?}",
        minority.iter().map(|c| c.name()).collect::<Vec<_>>()
    );
    let plan = sampling::oversample_plan(
        &train_records,
        &histogram,
        &minority,
        &[
            AugmentSpec::horizontal_flip(),
            AugmentSpec::rotation(15.0).unwrap(),
            AugmentSpec::rotation(-15.0).unwrap(),
        ],
        42,
        &geometry,
    );
    for note in &plan.provenance {
        println!("{note}");
    }
    println!("\nfirst manifest lines:");
    for line in plan.to_manifest().lines().take(8) {
        println!("  {line}");
    }
}
