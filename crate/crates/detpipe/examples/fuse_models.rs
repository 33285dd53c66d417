//! Fuse three models with complementary misses and show the ensemble
//! beating each of them on mAP.
//!
//! ```bash
//! cargo run --example fuse_models
//! ```

use detpipe::annotations::{BoundingBox, ClassId, DetectionRecord, GroundTruthRecord};
use detpipe::fusion::{self, FusionConfig, FusionMethod, ModelOutput};
use detpipe::metrics;

fn main() {
    // Ground truth: 30 objects across 10 frames.
    let mut gts = Vec::new();
    for frame in 1..=10u32 {
        for track in 0..3u32 {
            gts.push(GroundTruthRecord {
                video_id: 1,
                frame,
                track_id: track,
                bbox: BoundingBox::new(
                    track as f64 * 600.0 + 50.0,
                    frame as f64 * 80.0,
                    140.0,
                    180.0,
                ),
                class: ClassId::ALL[(track as usize) % 3],
            });
        }
    }

    // Each model misses a different third of the objects and jitters the rest.
    let model = |skip: usize| -> ModelOutput {
        let dets: Vec<DetectionRecord> = gts
            .iter()
            .enumerate()
            .filter(|(i, _)| i % 3 != skip)
            .map(|(i, g)| DetectionRecord {
                video_id: g.video_id,
                frame: g.frame,
                bbox: BoundingBox::new(
                    g.bbox.left + (i % 4) as f64,
                    g.bbox.top - (i % 3) as f64,
                    g.bbox.width,
                    g.bbox.height,
                ),
                class: g.class,
                confidence: 0.95 - (i % 6) as f64 * 0.05,
            })
            .collect();
        ModelOutput::new(format!("fold{skip}"), dets)
    };
    let models = [model(0), model(1), model(2)];

    for m in &models {
        let map50 = metrics::map_at(&gts, &m.detections, 0.5);
        println!(
            "{}: {} detections, mAP@0.5 = {map50:.3}",
            m.model_id,
            m.detections.len()
        );
    }

    let weighted = fusion::fuse(&models, &FusionConfig::default()).unwrap();
    let nms = fusion::fuse(
        &models,
        &FusionConfig {
            method: FusionMethod::Nms,
            ..FusionConfig::default()
        },
    )
    .unwrap();
    println!(
        "\nweighted fusion: {} detections, mAP@0.5 = {:.3}, mAP@0.5:0.95 = {:.3}",
        weighted.len(),
        metrics::map_at(&gts, &weighted, 0.5),
        metrics::map_range(&gts, &weighted),
    );
    println!(
        "nms fusion:      {} detections, mAP@0.5 = {:.3}, mAP@0.5:0.95 = {:.3}",
        nms.len(),
        metrics::map_at(&gts, &nms, 0.5),
        metrics::map_range(&gts, &nms),
    );
}
