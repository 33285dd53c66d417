//! Model-assisted labeling round: promote confident predictions to labels,
//! with manual corrections taking precedence per frame.
//!
//! ```bash
//! cargo run --example label_assist
//! ```

use detpipe::annotations::{
    reconcile_labels, serialize_ground_truth, BoundingBox, ClassId, DetectionRecord,
    GroundTruthRecord,
};

fn main() {
    // A trained model labeled three frames.
    let predictions = vec![
        DetectionRecord {
            video_id: 1,
            frame: 1,
            bbox: BoundingBox::new(100.0, 200.0, 150.0, 200.0),
            class: ClassId::Motorbike,
            confidence: 0.95,
        },
        DetectionRecord {
            video_id: 1,
            frame: 1,
            bbox: BoundingBox::new(120.0, 180.0, 60.0, 80.0),
            class: ClassId::DHelmet,
            confidence: 0.88,
        },
        DetectionRecord {
            video_id: 1,
            frame: 2,
            bbox: BoundingBox::new(400.0, 300.0, 140.0, 190.0),
            class: ClassId::Motorbike,
            confidence: 0.35, // below the floor: not promoted
        },
        DetectionRecord {
            video_id: 1,
            frame: 3,
            bbox: BoundingBox::new(700.0, 250.0, 150.0, 210.0),
            class: ClassId::DNoHelmet,
            confidence: 0.91,
        },
    ];

    // A human re-annotated frame 3 from scratch; their records win and the
    // model's frame-3 prediction is discarded entirely.
    let manual_overrides = vec![GroundTruthRecord {
        video_id: 1,
        frame: 3,
        track_id: 0,
        bbox: BoundingBox::new(705.0, 248.0, 148.0, 215.0),
        class: ClassId::DHelmet,
    }];

    let labels = reconcile_labels(&predictions, &manual_overrides, 0.5);
    println!("reconciled label set ({} records):", labels.len());
    print!("{}", serialize_ground_truth(&labels));
}
