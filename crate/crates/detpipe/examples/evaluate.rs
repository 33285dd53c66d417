//! Score a synthetic detector against ground truth and print the report.
//!
//! ```bash
//! cargo run --example evaluate
//! ```

use detpipe::annotations::{BoundingBox, ClassId, DetectionRecord, GroundTruthRecord};
use detpipe::metrics::{self, EvalParams};

fn main() {
    // A tiny two-video ground truth.
    let mut gts = Vec::new();
    for (video, frame, track, left, class) in [
        (1u32, 1u32, 0u32, 100.0, ClassId::Motorbike),
        (1, 1, 1, 400.0, ClassId::DHelmet),
        (1, 2, 0, 120.0, ClassId::Motorbike),
        (1, 2, 1, 420.0, ClassId::DNoHelmet),
        (2, 1, 0, 800.0, ClassId::Motorbike),
        (2, 1, 1, 1100.0, ClassId::P1NoHelmet),
    ] {
        gts.push(GroundTruthRecord {
            video_id: video,
            frame,
            track_id: track,
            bbox: BoundingBox::new(left, 300.0, 120.0, 180.0),
            class,
        });
    }

    // A detector that finds most objects with slightly shifted boxes, makes
    // one class mistake, and hallucinates one box.
    let mut dets = Vec::new();
    for (i, g) in gts.iter().enumerate() {
        if i == 3 {
            continue; // missed object
        }
        let class = if i == 1 { ClassId::DNoHelmet } else { g.class };
        dets.push(DetectionRecord {
            video_id: g.video_id,
            frame: g.frame,
            bbox: BoundingBox::new(g.bbox.left + 6.0, g.bbox.top - 4.0, 120.0, 180.0),
            class,
            confidence: 0.9 - i as f64 * 0.1,
        });
    }
    dets.push(DetectionRecord {
        video_id: 2,
        frame: 1,
        bbox: BoundingBox::new(50.0, 50.0, 80.0, 80.0),
        class: ClassId::DHelmet,
        confidence: 0.3,
    });

    let report = metrics::evaluate(&gts, &dets, EvalParams::default());
    println!("{}", report.summary_text());
    println!("per-class AP:\n{}", report.per_class_ap_csv());
    println!(
        "confusion matrix (rows = ground truth):\n{}",
        report.confusion.to_csv(false)
    );

    // Peak F1 over the confidence sweep, the usual operating-point pick.
    let best = report
        .curves
        .aggregate
        .iter()
        .max_by(|a, b| a.f1.total_cmp(&b.f1))
        .unwrap();
    println!(
        "best F1 {:.3} at confidence {:.2} (precision {:.3}, recall {:.3})",
        best.f1, best.confidence, best.precision, best.recall
    );
}
