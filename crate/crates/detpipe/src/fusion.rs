//! Detection fusion across models and test-time-augmentation views.
//!
//! Two methods are provided behind [`FusionConfig`]: classic non-maximum
//! suppression, and weighted box fusion, which merges overlapping
//! detections from different models into confidence-weighted average boxes
//! instead of discarding them. Clustering compares each detection against a
//! cluster's current fused box, and a cluster never absorbs two detections
//! from the same model, so fusing a single model's output is the identity.

use std::collections::BTreeMap;

use crate::annotations::{BoundingBox, ClassId, DetectionRecord, FrameGeometry};
use crate::error::{Error, Result};
use crate::metrics::iou;
use crate::sampling::{AugmentKind, AugmentSpec};

/// One model's detections plus its ensemble weight.
#[derive(Debug, Clone)]
pub struct ModelOutput {
    pub model_id: String,
    pub detections: Vec<DetectionRecord>,
    pub weight: f64,
}

impl ModelOutput {
    pub fn new(model_id: impl Into<String>, detections: Vec<DetectionRecord>) -> Self {
        Self {
            model_id: model_id.into(),
            detections,
            weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionMethod {
    Nms,
    #[default]
    WeightedFusion,
}

impl FusionMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "nms" => Ok(FusionMethod::Nms),
            "weighted" | "weighted_fusion" => Ok(FusionMethod::WeightedFusion),
            other => Err(Error::Config(format!(
                "unknown fusion method {other:?} (expected `nms` or `weighted`)"
            ))),
        }
    }
}

/// Fusion parameters; the defaults cluster at IoU 0.55 and drop detections
/// below confidence 0.001 first.
#[derive(Debug, Clone, Copy)]
pub struct FusionConfig {
    pub method: FusionMethod,
    pub cluster_iou: f64,
    pub confidence_floor: f64,
    /// Scale fused confidence by `min(1, contributing models / total
    /// models)`, penalizing boxes few models agree on. Weighted fusion
    /// only; disabled for TTA where views are correlated.
    pub count_scaling: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            method: FusionMethod::WeightedFusion,
            cluster_iou: 0.55,
            confidence_floor: 0.001,
            count_scaling: true,
        }
    }
}

impl FusionConfig {
    fn validate(&self) -> Result<()> {
        if self.cluster_iou.is_nan() || self.cluster_iou <= 0.0 || self.cluster_iou > 1.0 {
            return Err(Error::Config(format!(
                "cluster iou {} outside (0, 1]",
                self.cluster_iou
            )));
        }
        if !(0.0..1.0).contains(&self.confidence_floor) {
            return Err(Error::Config(format!(
                "confidence floor {} outside [0, 1)",
                self.confidence_floor
            )));
        }
        Ok(())
    }
}

/// Non-maximum suppression over the detections of one (video, frame, class)
/// cell: walk by descending confidence, keeping a detection only when its
/// IoU with every already-kept detection is below the threshold.
pub fn nms(dets: &[DetectionRecord], iou_threshold: f64) -> Vec<DetectionRecord> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .partial_cmp(&dets[a].confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut kept: Vec<DetectionRecord> = Vec::new();
    for &i in &order {
        if kept
            .iter()
            .all(|k| iou(&k.bbox, &dets[i].bbox) < iou_threshold)
        {
            kept.push(dets[i].clone());
        }
    }
    kept
}

/// A detection tagged with its origin, in cluster processing order.
struct Tagged<'a> {
    model: usize,
    det: &'a DetectionRecord,
}

struct Cluster<'a> {
    members: Vec<Tagged<'a>>,
    fused_box: BoundingBox,
}

impl<'a> Cluster<'a> {
    fn contains_model(&self, model: usize) -> bool {
        self.members.iter().any(|m| m.model == model)
    }

    /// Coordinate-wise (model weight x confidence)-weighted average of
    /// member boxes, anchored at the first member so identical members fuse
    /// exactly to themselves.
    fn refresh(&mut self, weights: &[f64]) {
        if self.members.len() == 1 {
            self.fused_box = self.members[0].det.bbox;
            return;
        }
        let anchor = self.members[0].det.bbox;
        let mut wsum = 0.0;
        let mut dl = 0.0;
        let mut dt = 0.0;
        let mut dw = 0.0;
        let mut dh = 0.0;
        for m in &self.members {
            let w = weights[m.model] * m.det.confidence;
            wsum += w;
            dl += w * (m.det.bbox.left - anchor.left);
            dt += w * (m.det.bbox.top - anchor.top);
            dw += w * (m.det.bbox.width - anchor.width);
            dh += w * (m.det.bbox.height - anchor.height);
        }
        if wsum > 0.0 {
            self.fused_box = BoundingBox::new(
                anchor.left + dl / wsum,
                anchor.top + dt / wsum,
                anchor.width + dw / wsum,
                anchor.height + dh / wsum,
            );
        } else {
            self.fused_box = anchor;
        }
    }

    fn fused_confidence(&self, weights: &[f64]) -> f64 {
        if self.members.len() == 1 {
            return self.members[0].det.confidence;
        }
        let anchor = self.members[0].det.confidence;
        let mut wsum = 0.0;
        let mut dc = 0.0;
        for m in &self.members {
            let w = weights[m.model];
            wsum += w;
            dc += w * (m.det.confidence - anchor);
        }
        if wsum > 0.0 {
            anchor + dc / wsum
        } else {
            anchor
        }
    }
}

/// Weighted box fusion across model outputs.
///
/// Per (video, frame, class) cell, detections are processed in descending
/// confidence (ties broken by model id, then input order). Each joins the
/// first cluster whose current fused box overlaps it at `cluster_iou` or
/// more and that has no detection from the same model yet; otherwise it
/// seeds a new cluster. A cluster's box is the (weight x confidence)-
/// weighted average of its members; its confidence is the weight-averaged
/// member confidence, optionally count-scaled.
pub fn fuse_weighted(
    outputs: &[ModelOutput],
    config: &FusionConfig,
) -> Result<Vec<DetectionRecord>> {
    config.validate()?;
    let total_models = outputs.len();
    let weights: Vec<f64> = outputs.iter().map(|o| o.weight).collect();
    for o in outputs {
        if o.weight.is_nan() || o.weight <= 0.0 {
            return Err(Error::Config(format!(
                "model {:?} weight {} must be > 0",
                o.model_id, o.weight
            )));
        }
    }

    // Model processing order by id, so fusion does not depend on the order
    // outputs were supplied in.
    let mut model_rank: Vec<usize> = (0..outputs.len()).collect();
    model_rank.sort_by(|&a, &b| outputs[a].model_id.cmp(&outputs[b].model_id));
    let mut rank_of = vec![0usize; outputs.len()];
    for (rank, &m) in model_rank.iter().enumerate() {
        rank_of[m] = rank;
    }

    let mut cells: BTreeMap<(u32, u32, ClassId), Vec<Tagged>> = BTreeMap::new();
    for (mi, output) in outputs.iter().enumerate() {
        for det in &output.detections {
            if det.confidence < config.confidence_floor {
                continue;
            }
            cells
                .entry((det.video_id, det.frame, det.class))
                .or_default()
                .push(Tagged { model: mi, det });
        }
    }

    let mut fused = Vec::new();
    for ((video_id, frame, class), mut cell) in cells {
        cell.sort_by(|a, b| {
            b.det
                .confidence
                .partial_cmp(&a.det.confidence)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(rank_of[a.model].cmp(&rank_of[b.model]))
        });
        let mut clusters: Vec<Cluster> = Vec::new();
        for tagged in cell {
            let slot = clusters.iter_mut().find(|c| {
                !c.contains_model(tagged.model)
                    && iou(&c.fused_box, &tagged.det.bbox) >= config.cluster_iou
            });
            match slot {
                Some(cluster) => {
                    cluster.members.push(tagged);
                    cluster.refresh(&weights);
                }
                None => {
                    let fused_box = tagged.det.bbox;
                    clusters.push(Cluster {
                        members: vec![tagged],
                        fused_box,
                    });
                }
            }
        }
        for cluster in clusters {
            let mut confidence = cluster.fused_confidence(&weights);
            if config.count_scaling && total_models > 0 {
                let contributing = cluster.members.len() as f64;
                confidence *= (contributing / total_models as f64).min(1.0);
            }
            fused.push(DetectionRecord {
                video_id,
                frame,
                bbox: cluster.fused_box,
                class,
                confidence: confidence.clamp(0.0, 1.0),
            });
        }
    }
    sort_output(&mut fused);
    Ok(fused)
}

/// Pool every model's detections and run per-cell NMS over the union.
pub fn fuse_nms(outputs: &[ModelOutput], config: &FusionConfig) -> Result<Vec<DetectionRecord>> {
    config.validate()?;
    let mut cells: BTreeMap<(u32, u32, ClassId), Vec<DetectionRecord>> = BTreeMap::new();
    for output in outputs {
        for det in &output.detections {
            if det.confidence < config.confidence_floor {
                continue;
            }
            cells
                .entry((det.video_id, det.frame, det.class))
                .or_default()
                .push(det.clone());
        }
    }
    let mut fused = Vec::new();
    for cell in cells.into_values() {
        fused.extend(nms(&cell, config.cluster_iou));
    }
    sort_output(&mut fused);
    Ok(fused)
}

/// Dispatch on the configured method.
pub fn fuse(outputs: &[ModelOutput], config: &FusionConfig) -> Result<Vec<DetectionRecord>> {
    match config.method {
        FusionMethod::Nms => fuse_nms(outputs, config),
        FusionMethod::WeightedFusion => fuse_weighted(outputs, config),
    }
}

fn sort_output(dets: &mut [DetectionRecord]) {
    dets.sort_by(|a, b| {
        (a.video_id, a.frame, a.class)
            .cmp(&(b.video_id, b.frame, b.class))
            .then(
                b.confidence
                    .partial_cmp(&a.confidence)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
    });
}

/// A test-time augmentation and the frame geometry it was applied in, able
/// to map detector output from the transformed view back to the original.
#[derive(Debug, Clone, Copy)]
pub struct TtaTransform {
    pub spec: AugmentSpec,
    pub geometry: FrameGeometry,
}

impl TtaTransform {
    pub fn new(spec: AugmentSpec, geometry: FrameGeometry) -> Self {
        Self { spec, geometry }
    }

    /// Map a box into the augmented view.
    pub fn forward_box(&self, bbox: &BoundingBox) -> Option<BoundingBox> {
        crate::sampling::transform_box(bbox, &self.spec, &self.geometry)
    }

    /// Map a detection box from the augmented view back to the original
    /// frame. Flips invert exactly. For rotations the hull-dimension map is
    /// inverted algebraically (solving for the pre-rotation width/height)
    /// and the center is rotated back, so unclipped forward hulls recover
    /// their source box to within floating-point error. Returns `None` when
    /// the recovered box degenerates or lies fully outside the frame.
    pub fn inverse_box(&self, bbox: &BoundingBox) -> Option<BoundingBox> {
        match self.spec.kind() {
            AugmentKind::HorizontalFlip => {
                crate::sampling::transform_box(bbox, &self.spec, &self.geometry)
            }
            AugmentKind::Rotation => {
                let theta = self.spec.angle_deg().to_radians();
                let (sin, cos) = (theta.sin().abs(), theta.cos());
                // Hull dimensions W = w*cos + h*sin, H = w*sin + h*cos;
                // invertible while cos(2*theta) != 0, guaranteed by the
                // +/-15 degree bound.
                let det = cos * cos - sin * sin;
                let w = (bbox.width * cos - bbox.height * sin) / det;
                let h = (bbox.height * cos - bbox.width * sin) / det;
                if !(w > 0.0 && h > 0.0) {
                    return None;
                }
                let (cx, cy) = (
                    self.geometry.width as f64 / 2.0,
                    self.geometry.height as f64 / 2.0,
                );
                let (bx, by) = bbox.center();
                let (s, c) = (-theta).sin_cos();
                let dx = bx - cx;
                let dy = by - cy;
                let ox = cx + dx * c - dy * s;
                let oy = cy + dx * s + dy * c;
                let candidate = BoundingBox::new(ox - w / 2.0, oy - h / 2.0, w, h);
                let clipped = candidate.clip_to(&self.geometry)?;
                if clipped.width <= 1.0 || clipped.height <= 1.0 {
                    return None;
                }
                Some(clipped)
            }
        }
    }
}

/// Result of merging TTA views: the fused detections plus how many
/// augmented detections were dropped by the inverse mapping.
#[derive(Debug, Clone)]
pub struct TtaMerge {
    pub detections: Vec<DetectionRecord>,
    pub dropped: usize,
}

/// Map each augmented view's detections back through its transform inverse
/// and fuse everything with weighted fusion, count scaling off (the views
/// are correlated, not independent models).
pub fn tta_merge(
    original: &ModelOutput,
    augmented: &[(TtaTransform, ModelOutput)],
    config: &FusionConfig,
) -> Result<TtaMerge> {
    let mut outputs = vec![original.clone()];
    let mut dropped = 0usize;
    for (transform, output) in augmented {
        let mut mapped = Vec::with_capacity(output.detections.len());
        for det in &output.detections {
            match transform.inverse_box(&det.bbox) {
                Some(bbox) => mapped.push(DetectionRecord {
                    bbox,
                    ..det.clone()
                }),
                None => dropped += 1,
            }
        }
        outputs.push(ModelOutput {
            model_id: output.model_id.clone(),
            detections: mapped,
            weight: output.weight,
        });
    }
    let merged = fuse_weighted(
        &outputs,
        &FusionConfig {
            method: FusionMethod::WeightedFusion,
            count_scaling: false,
            ..*config
        },
    )?;
    Ok(TtaMerge {
        detections: merged,
        dropped,
    })
}
