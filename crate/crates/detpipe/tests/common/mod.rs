//! Shared test utilities: independent oracles and synthetic data
//! generators. Everything here is deliberately written from the definitions
//! rather than reusing the library's computation paths.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use detpipe::annotations::{BoundingBox, ClassId, DetectionRecord, GroundTruthRecord};

/// Plain-definition IoU, kept separate from the library's.
pub fn oracle_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let x1 = a.left.max(b.left);
    let y1 = a.top.max(b.top);
    let x2 = (a.left + a.width).min(b.left + b.width);
    let y2 = (a.top + a.height).min(b.top + b.height);
    if x2 <= x1 || y2 <= y1 {
        return 0.0;
    }
    let inter = (x2 - x1) * (y2 - y1);
    inter / (a.width * a.height + b.width * b.height - inter)
}

/// Count greedy matches for one class: detections in descending confidence
/// (ties by position), each taking the best remaining same-frame ground
/// truth with IoU at or above the threshold.
fn oracle_match_count(
    gts: &[&GroundTruthRecord],
    dets: &[&DetectionRecord],
    iou_threshold: f64,
) -> usize {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .partial_cmp(&dets[a].confidence)
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut taken = vec![false; gts.len()];
    let mut matched = 0;
    for &di in &order {
        let d = dets[di];
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gts.iter().enumerate() {
            if taken[gi] || g.video_id != d.video_id || g.frame != d.frame {
                continue;
            }
            let ov = oracle_iou(&d.bbox, &g.bbox);
            if ov < iou_threshold {
                continue;
            }
            if best.is_none_or(|(_, b)| ov > b) {
                best = Some((gi, ov));
            }
        }
        if let Some((gi, _)) = best {
            taken[gi] = true;
            matched += 1;
        }
    }
    matched
}

/// Brute-force average precision for one class at one IoU threshold: an
/// exhaustive sweep over every distinct confidence, recomputing the match
/// from scratch at each cutoff, then the 101-point rule applied literally.
pub fn oracle_average_precision(
    gts: &[GroundTruthRecord],
    dets: &[DetectionRecord],
    class: ClassId,
    iou_threshold: f64,
) -> f64 {
    let class_gts: Vec<&GroundTruthRecord> = gts.iter().filter(|g| g.class == class).collect();
    let class_dets: Vec<&DetectionRecord> = dets.iter().filter(|d| d.class == class).collect();
    let num_gt = class_gts.len();
    if num_gt == 0 {
        return 0.0;
    }
    let mut cutoffs: Vec<f64> = class_dets.iter().map(|d| d.confidence).collect();
    cutoffs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    cutoffs.dedup();

    let mut points: Vec<(f64, f64)> = Vec::new(); // (precision, recall)
    for &cutoff in &cutoffs {
        let kept: Vec<&DetectionRecord> = class_dets
            .iter()
            .filter(|d| d.confidence >= cutoff)
            .copied()
            .collect();
        let tp = oracle_match_count(&class_gts, &kept, iou_threshold);
        points.push((tp as f64 / kept.len() as f64, tp as f64 / num_gt as f64));
    }

    let mut total = 0.0;
    for i in 0..=100 {
        let r = i as f64 / 100.0;
        let best = points
            .iter()
            .filter(|(_, recall)| *recall >= r)
            .map(|(precision, _)| *precision)
            .fold(0.0, f64::max);
        total += best;
    }
    total / 101.0
}

/// Brute-force mAP at one threshold: mean oracle AP over classes present in
/// the ground truth.
pub fn oracle_map_at(
    gts: &[GroundTruthRecord],
    dets: &[DetectionRecord],
    iou_threshold: f64,
) -> f64 {
    let classes: Vec<ClassId> = ClassId::ALL
        .into_iter()
        .filter(|&c| gts.iter().any(|g| g.class == c))
        .collect();
    if classes.is_empty() {
        return 0.0;
    }
    classes
        .iter()
        .map(|&c| oracle_average_precision(gts, dets, c, iou_threshold))
        .sum::<f64>()
        / classes.len() as f64
}

/// Brute-force mAP@0.5:0.95.
pub fn oracle_map_range(gts: &[GroundTruthRecord], dets: &[DetectionRecord]) -> f64 {
    let mut total = 0.0;
    for i in 10..=19 {
        total += oracle_map_at(gts, dets, i as f64 / 20.0);
    }
    total / 10.0
}

/// Exhaustive greedy-matching oracle for one (video, frame, class) cell:
/// enumerate every feasible assignment of detections to distinct ground
/// truths (IoU at or above the threshold) and pick the one that is
/// lexicographically best in greedy processing order, preferring a match
/// over none, then higher IoU, then the lower ground-truth index.
/// Returns, per detection index in confidence order, the chosen gt index.
pub fn oracle_enumerated_matching(
    gt_boxes: &[BoundingBox],
    det_boxes: &[BoundingBox],
    confidences: &[f64],
    iou_threshold: f64,
) -> Vec<Option<usize>> {
    let mut det_order: Vec<usize> = (0..det_boxes.len()).collect();
    det_order.sort_by(|&a, &b| {
        confidences[b]
            .partial_cmp(&confidences[a])
            .unwrap()
            .then(a.cmp(&b))
    });

    #[derive(PartialEq)]
    struct Key(Vec<(bool, f64, i64)>);
    impl PartialOrd for Key {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            self.0.partial_cmp(&other.0)
        }
    }

    let mut best_assign: Option<(Key, Vec<Option<usize>>)> = None;
    let mut current: Vec<Option<usize>> = vec![None; det_order.len()];
    let mut used = vec![false; gt_boxes.len()];

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        pos: usize,
        det_order: &[usize],
        gt_boxes: &[BoundingBox],
        det_boxes: &[BoundingBox],
        iou_threshold: f64,
        used: &mut Vec<bool>,
        current: &mut Vec<Option<usize>>,
        best: &mut Option<(Key, Vec<Option<usize>>)>,
    ) {
        if pos == det_order.len() {
            let key = Key(current
                .iter()
                .enumerate()
                .map(|(p, choice)| match choice {
                    Some(gi) => (
                        true,
                        oracle_iou(&det_boxes[det_order[p]], &gt_boxes[*gi]),
                        -(*gi as i64),
                    ),
                    None => (false, 0.0, 0),
                })
                .collect());
            let better = match best {
                Some((bk, _)) => key > *bk,
                None => true,
            };
            if better {
                *best = Some((key, current.clone()));
            }
            return;
        }
        let di = det_order[pos];
        // Skipping is always an option the key ranks below any match.
        current[pos] = None;
        recurse(
            pos + 1,
            det_order,
            gt_boxes,
            det_boxes,
            iou_threshold,
            used,
            current,
            best,
        );
        for gi in 0..gt_boxes.len() {
            if used[gi] {
                continue;
            }
            if oracle_iou(&det_boxes[di], &gt_boxes[gi]) < iou_threshold {
                continue;
            }
            used[gi] = true;
            current[pos] = Some(gi);
            recurse(
                pos + 1,
                det_order,
                gt_boxes,
                det_boxes,
                iou_threshold,
                used,
                current,
                best,
            );
            used[gi] = false;
        }
        current[pos] = None;
    }

    recurse(
        0,
        &det_order,
        gt_boxes,
        det_boxes,
        iou_threshold,
        &mut used,
        &mut current,
        &mut best_assign,
    );
    best_assign.map(|(_, a)| a).unwrap_or(current)
}

/// Literal-scan NMS oracle over one cell.
pub fn oracle_nms_keep(
    boxes: &[BoundingBox],
    confidences: &[f64],
    iou_threshold: f64,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| {
        confidences[b]
            .partial_cmp(&confidences[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        if kept
            .iter()
            .all(|&k| oracle_iou(&boxes[k], &boxes[i]) < iou_threshold)
        {
            kept.push(i);
        }
    }
    kept
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random in-frame box with sides on a quarter-pixel grid.
pub fn random_box(rng: &mut ChaCha8Rng) -> BoundingBox {
    let width = (rng.random_range(8..800) as f64) * 0.25;
    let height = (rng.random_range(8..800) as f64) * 0.25;
    let left = (rng.random_range(0..((1920.0 - width) * 4.0) as u32) as f64) * 0.25;
    let top = (rng.random_range(0..((1080.0 - height) * 4.0) as u32) as f64) * 0.25;
    BoundingBox::new(left, top, width, height)
}

/// Confidence quantized to a 0.05 grid so equal-confidence ties occur.
fn random_confidence(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(1..=20) as f64 * 0.05
}

/// Random evaluation instance: ground truth over a few videos/classes and a
/// detection set mixing perturbed copies (true positives at varying IoU),
/// misclassifications, and pure noise.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    max_videos: u32,
    max_classes: usize,
    max_boxes: usize,
) -> (Vec<GroundTruthRecord>, Vec<DetectionRecord>) {
    let videos = rng.random_range(1..=max_videos);
    let classes: Vec<ClassId> = ClassId::ALL[..rng.random_range(1..=max_classes)].to_vec();
    let n_gt = rng.random_range(1..=max_boxes);
    let mut gts = Vec::with_capacity(n_gt);
    let mut track_per_frame: HashMap<(u32, u32), u32> = HashMap::new();
    for _ in 0..n_gt {
        let video_id = rng.random_range(1..=videos);
        let frame = rng.random_range(1..=6);
        let track = track_per_frame.entry((video_id, frame)).or_insert(0);
        gts.push(GroundTruthRecord {
            video_id,
            frame,
            track_id: *track,
            bbox: random_box(rng),
            class: classes[rng.random_range(0..classes.len())],
        });
        *track += 1;
    }

    let mut dets = Vec::new();
    for g in &gts {
        // Perturbed copy with probability 0.7.
        if rng.random_range(0..10) < 7 {
            let jitter = rng.random_range(0..40) as f64 * 0.25;
            let mut b = g.bbox;
            b.left = (b.left + jitter).min(1920.0 - b.width);
            dets.push(DetectionRecord {
                video_id: g.video_id,
                frame: g.frame,
                bbox: b,
                class: g.class,
                confidence: random_confidence(rng),
            });
        }
        // Occasional wrong-class twin.
        if rng.random_range(0..10) < 2 {
            dets.push(DetectionRecord {
                video_id: g.video_id,
                frame: g.frame,
                bbox: g.bbox,
                class: classes[rng.random_range(0..classes.len())],
                confidence: random_confidence(rng),
            });
        }
    }
    let noise = rng.random_range(0..=max_boxes / 2);
    for _ in 0..noise {
        dets.push(DetectionRecord {
            video_id: rng.random_range(1..=videos),
            frame: rng.random_range(1..=6),
            bbox: random_box(rng),
            class: classes[rng.random_range(0..classes.len())],
            confidence: random_confidence(rng),
        });
    }
    (gts, dets)
}

/// Random valid detection records: coordinates on a quarter-pixel grid,
/// confidences arbitrary in [0, 1].
pub fn random_detections(rng: &mut ChaCha8Rng, count: usize) -> Vec<DetectionRecord> {
    (0..count)
        .map(|_| DetectionRecord {
            video_id: rng.random_range(1..=100),
            frame: rng.random_range(1..=5000),
            bbox: random_box(rng),
            class: ClassId::from_id(rng.random_range(1..=7)).unwrap(),
            confidence: rng.random::<f64>(),
        })
        .collect()
}
