//! Merge detections from test-time-augmentation views back into original
//! frame coordinates.
//!
//! ```bash
//! cargo run --example tta_merge
//! ```

use detpipe::annotations::{BoundingBox, ClassId, DetectionRecord, FrameGeometry};
use detpipe::fusion::{self, FusionConfig, ModelOutput, TtaTransform};
use detpipe::sampling::AugmentSpec;

fn main() {
    let geometry = FrameGeometry::default();
    let base_boxes = [
        BoundingBox::new(200.0, 300.0, 160.0, 220.0),
        BoundingBox::new(900.0, 450.0, 140.0, 190.0),
        BoundingBox::new(1500.0, 220.0, 180.0, 240.0),
    ];
    let original = ModelOutput::new(
        "plain",
        base_boxes
            .iter()
            .enumerate()
            .map(|(i, &bbox)| DetectionRecord {
                video_id: 1,
                frame: 1,
                bbox,
                class: ClassId::Motorbike,
                confidence: 0.85 - i as f64 * 0.05,
            })
            .collect(),
    );

    // Pretend the detector ran on a flipped and a rotated copy of the frame:
    // its outputs live in transformed coordinates.
    let views = [
        TtaTransform::new(AugmentSpec::horizontal_flip(), geometry),
        TtaTransform::new(AugmentSpec::rotation(10.0).unwrap(), geometry),
    ];
    let mut augmented = Vec::new();
    for (vi, transform) in views.iter().enumerate() {
        let dets: Vec<DetectionRecord> = original
            .detections
            .iter()
            .filter_map(|d| {
                transform.forward_box(&d.bbox).map(|bbox| DetectionRecord {
                    bbox,
                    confidence: d.confidence - 0.02,
                    ..d.clone()
                })
            })
            .collect();
        augmented.push((*transform, ModelOutput::new(format!("view{vi}"), dets)));
    }

    let merged = fusion::tta_merge(&original, &augmented, &FusionConfig::default()).unwrap();
    println!(
        "merged {} detections from {} views ({} dropped by inverse mapping)\n",
        merged.detections.len(),
        1 + augmented.len(),
        merged.dropped
    );
    for (d, base) in merged.detections.iter().zip(&base_boxes) {
        println!(
            "fused ({:7.2}, {:7.2}, {:6.2}, {:6.2}) conf {:.3}   original ({:.0}, {:.0}, {:.0}, {:.0})",
            d.bbox.left,
            d.bbox.top,
            d.bbox.width,
            d.bbox.height,
            d.confidence,
            base.left,
            base.top,
            base.width,
            base.height,
        );
    }
}
