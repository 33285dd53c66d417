//! Detection quality metrics: IoU matching, average precision, mAP,
//! confidence-swept precision/recall/F1 curves, and confusion matrices.
//!
//! Average precision uses 101-point recall interpolation: the mean over the
//! recall grid {0.00, 0.01, ..., 1.00} of the best precision achieved at a
//! recall at or above each grid point. mAP averages per-class AP over the
//! classes that have at least one ground-truth instance; mAP@0.5:0.95 is the
//! mean of mAP over the ten IoU thresholds 0.50, 0.55, ..., 0.95.

use std::collections::BTreeMap;

use crate::annotations::{
    format_number, BoundingBox, ClassHistogram, ClassId, DetectionRecord, GroundTruthRecord,
};

/// The ten IoU thresholds of the 0.5:0.95 range.
pub fn range_thresholds() -> [f64; 10] {
    let mut t = [0.0; 10];
    for (i, slot) in t.iter_mut().enumerate() {
        *slot = (10 + i) as f64 / 20.0;
    }
    t
}

/// Intersection over union of two boxes; 0 when disjoint.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let left = a.left.max(b.left);
    let top = a.top.max(b.top);
    let right = a.right().min(b.right());
    let bottom = a.bottom().min(b.bottom());
    let iw = right - left;
    let ih = bottom - top;
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// One matched (detection, ground truth) pair with its overlap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    /// Index into the detection slice the match was computed from.
    pub det: usize,
    /// Index into the ground-truth slice.
    pub gt: usize,
    pub iou: f64,
}

/// Outcome of greedy matching: matched pairs plus leftovers on both sides.
/// Each detection and each ground truth appears at most once, and every
/// matched pair has IoU at or above the threshold.
#[derive(Debug, Clone)]
pub struct MatchSet {
    pub iou_threshold: f64,
    pub pairs: Vec<MatchPair>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_ground_truths: Vec<usize>,
}

impl MatchSet {
    /// Flags indexed like the detection slice: true when matched.
    pub fn detection_matched_flags(&self, n_dets: usize) -> Vec<bool> {
        let mut flags = vec![false; n_dets];
        for p in &self.pairs {
            flags[p.det] = true;
        }
        flags
    }
}

/// Detection order within a cell: descending confidence, ties by input index.
fn confidence_order(dets: &[DetectionRecord], cell: &[usize]) -> Vec<usize> {
    let mut order = cell.to_vec();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .partial_cmp(&dets[a].confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

#[allow(clippy::too_many_arguments)]
fn greedy_match_cell(
    gts: &[GroundTruthRecord],
    dets: &[DetectionRecord],
    gt_cell: &[usize],
    det_order: &[usize],
    iou_threshold: f64,
    gt_taken: &mut [bool],
    pairs: &mut Vec<MatchPair>,
    unmatched_dets: &mut Vec<usize>,
) {
    for &di in det_order {
        let mut best: Option<(usize, f64)> = None;
        for &gi in gt_cell {
            if gt_taken[gi] {
                continue;
            }
            let overlap = iou(&dets[di].bbox, &gts[gi].bbox);
            if overlap < iou_threshold {
                continue;
            }
            // Strict > keeps the lowest ground-truth index on IoU ties,
            // because gt_cell is scanned in ascending input order.
            if best.is_none_or(|(_, b)| overlap > b) {
                best = Some((gi, overlap));
            }
        }
        match best {
            Some((gi, overlap)) => {
                gt_taken[gi] = true;
                pairs.push(MatchPair {
                    det: di,
                    gt: gi,
                    iou: overlap,
                });
            }
            None => unmatched_dets.push(di),
        }
    }
}

/// Ground-truth and detection indices sharing one partition cell.
type CellIndices = (Vec<usize>, Vec<usize>);

/// Greedy class-aware matching within each (video, frame, class) cell.
pub fn match_detections(
    gts: &[GroundTruthRecord],
    dets: &[DetectionRecord],
    iou_threshold: f64,
) -> MatchSet {
    let mut cells: BTreeMap<(u32, u32, ClassId), CellIndices> = BTreeMap::new();
    for (i, g) in gts.iter().enumerate() {
        cells
            .entry((g.video_id, g.frame, g.class))
            .or_default()
            .0
            .push(i);
    }
    for (i, d) in dets.iter().enumerate() {
        cells
            .entry((d.video_id, d.frame, d.class))
            .or_default()
            .1
            .push(i);
    }

    let mut gt_taken = vec![false; gts.len()];
    let mut pairs = Vec::new();
    let mut unmatched_dets = Vec::new();
    for (gt_cell, det_cell) in cells.values() {
        let det_order = confidence_order(dets, det_cell);
        greedy_match_cell(
            gts,
            dets,
            gt_cell,
            &det_order,
            iou_threshold,
            &mut gt_taken,
            &mut pairs,
            &mut unmatched_dets,
        );
    }
    let unmatched_gts = (0..gts.len()).filter(|&i| !gt_taken[i]).collect();
    unmatched_dets.sort_unstable();
    MatchSet {
        iou_threshold,
        pairs,
        unmatched_detections: unmatched_dets,
        unmatched_ground_truths: unmatched_gts,
    }
}

/// One precision/recall sample at a confidence level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub confidence: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision/recall sampled at every distinct detection confidence of one
/// class, in descending confidence order (recall is non-decreasing along
/// the sequence).
#[derive(Debug, Clone, Default)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    /// Build the curve for `class` from a match set over the full record
    /// slices it was computed from.
    pub fn from_matches(
        matches: &MatchSet,
        gts: &[GroundTruthRecord],
        dets: &[DetectionRecord],
        class: ClassId,
    ) -> PrCurve {
        let num_gt = gts.iter().filter(|g| g.class == class).count();
        let class_dets: Vec<usize> = (0..dets.len())
            .filter(|&i| dets[i].class == class)
            .collect();
        let order = confidence_order(dets, &class_dets);
        let matched = matches.detection_matched_flags(dets.len());

        let mut points = Vec::new();
        let mut tp = 0usize;
        let mut seen = 0usize;
        let mut i = 0;
        while i < order.len() {
            let conf = dets[order[i]].confidence;
            // Consume the whole group of equal confidences before sampling.
            while i < order.len() && dets[order[i]].confidence == conf {
                if matched[order[i]] {
                    tp += 1;
                }
                seen += 1;
                i += 1;
            }
            let precision = tp as f64 / seen as f64;
            let recall = if num_gt == 0 {
                0.0
            } else {
                tp as f64 / num_gt as f64
            };
            points.push(PrPoint {
                confidence: conf,
                precision,
                recall,
            });
        }
        PrCurve { points }
    }
}

/// 101-point interpolated average precision of a per-class curve.
pub fn average_precision(curve: &PrCurve) -> f64 {
    if curve.points.is_empty() {
        return 0.0;
    }
    // Best precision at or beyond each point, scanning from the low-recall
    // end; points are in non-decreasing recall order.
    let n = curve.points.len();
    let mut suffix_max = vec![0.0f64; n];
    let mut running = 0.0f64;
    for i in (0..n).rev() {
        running = running.max(curve.points[i].precision);
        suffix_max[i] = running;
    }
    let mut total = 0.0;
    for i in 0..=100 {
        let r = i as f64 / 100.0;
        // First point with recall >= r; recalls are sorted ascending.
        let idx = curve.points.partition_point(|p| p.recall < r);
        if idx < n {
            total += suffix_max[idx];
        }
    }
    total / 101.0
}

fn classes_present(gts: &[GroundTruthRecord]) -> Vec<ClassId> {
    let h = crate::annotations::class_histogram(gts);
    ClassId::ALL.into_iter().filter(|&c| h.get(c) > 0).collect()
}

/// Mean AP over the classes present in the ground truth, at one threshold.
pub fn map_at(gts: &[GroundTruthRecord], dets: &[DetectionRecord], iou_threshold: f64) -> f64 {
    let classes = classes_present(gts);
    if classes.is_empty() {
        return 0.0;
    }
    let matches = match_detections(gts, dets, iou_threshold);
    let sum: f64 = classes
        .iter()
        .map(|&c| average_precision(&PrCurve::from_matches(&matches, gts, dets, c)))
        .sum();
    sum / classes.len() as f64
}

/// Mean of `map_at` over the ten thresholds 0.50, 0.55, ..., 0.95.
pub fn map_range(gts: &[GroundTruthRecord], dets: &[DetectionRecord]) -> f64 {
    let thresholds = range_thresholds();
    let sum: f64 = thresholds.iter().map(|&t| map_at(gts, dets, t)).sum();
    sum / thresholds.len() as f64
}

/// One row of a confidence sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub confidence: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision/recall/F1 swept over confidence cutoffs, per class and pooled
/// over all classes.
#[derive(Debug, Clone)]
pub struct ConfidenceCurves {
    pub per_class: BTreeMap<ClassId, Vec<CurvePoint>>,
    pub aggregate: Vec<CurvePoint>,
}

fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Precision, recall, and F1 over all classes pooled, keeping only
/// detections with confidence at or above `cutoff` and rematching.
pub fn precision_recall_f1_at(
    gts: &[GroundTruthRecord],
    dets: &[DetectionRecord],
    iou_threshold: f64,
    cutoff: f64,
) -> (f64, f64, f64) {
    let kept: Vec<DetectionRecord> = dets
        .iter()
        .filter(|d| d.confidence >= cutoff)
        .cloned()
        .collect();
    let matches = match_detections(gts, &kept, iou_threshold);
    let tp = matches.pairs.len();
    let precision = if kept.is_empty() {
        0.0
    } else {
        tp as f64 / kept.len() as f64
    };
    let recall = if gts.is_empty() {
        0.0
    } else {
        tp as f64 / gts.len() as f64
    };
    (precision, recall, f1_score(precision, recall))
}

/// Sweep confidence cutoffs 0.00, 0.01, ..., 1.00: at each cutoff keep
/// detections at or above it, rematch, and tabulate precision/recall/F1 per
/// class and pooled. Recall is non-increasing in the cutoff.
pub fn confidence_curves(
    gts: &[GroundTruthRecord],
    dets: &[DetectionRecord],
    iou_threshold: f64,
) -> ConfidenceCurves {
    let mut per_class: BTreeMap<ClassId, Vec<CurvePoint>> = ClassId::ALL
        .into_iter()
        .map(|c| (c, Vec::with_capacity(101)))
        .collect();
    let mut aggregate = Vec::with_capacity(101);

    let gt_per_class = crate::annotations::class_histogram(gts);
    for step in 0..=100 {
        let cutoff = step as f64 / 100.0;
        let kept: Vec<DetectionRecord> = dets
            .iter()
            .filter(|d| d.confidence >= cutoff)
            .cloned()
            .collect();
        let matches = match_detections(gts, &kept, iou_threshold);

        let mut tp_per_class = [0usize; 7];
        let mut det_per_class = [0usize; 7];
        for p in &matches.pairs {
            tp_per_class[kept[p.det].class.index()] += 1;
        }
        for d in &kept {
            det_per_class[d.class.index()] += 1;
        }

        for class in ClassId::ALL {
            let tp = tp_per_class[class.index()];
            let n_det = det_per_class[class.index()];
            let n_gt = gt_per_class.get(class);
            let precision = if n_det == 0 {
                0.0
            } else {
                tp as f64 / n_det as f64
            };
            let recall = if n_gt == 0 {
                0.0
            } else {
                tp as f64 / n_gt as f64
            };
            per_class.get_mut(&class).unwrap().push(CurvePoint {
                confidence: cutoff,
                precision,
                recall,
                f1: f1_score(precision, recall),
            });
        }

        let tp: usize = matches.pairs.len();
        let precision = if kept.is_empty() {
            0.0
        } else {
            tp as f64 / kept.len() as f64
        };
        let recall = if gts.is_empty() {
            0.0
        } else {
            tp as f64 / gts.len() as f64
        };
        aggregate.push(CurvePoint {
            confidence: cutoff,
            precision,
            recall,
            f1: f1_score(precision, recall),
        });
    }
    ConfidenceCurves {
        per_class,
        aggregate,
    }
}

/// Index of the background row/column in the confusion matrix.
pub const BACKGROUND: usize = 7;

/// 8x8 count matrix: rows are ground-truth classes (plus background),
/// columns are detected classes (plus background).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 8]; 8],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Sum of a non-background row, i.e. ground-truth instances of a class.
    pub fn row_total(&self, class: ClassId) -> u64 {
        self.counts[class.index()].iter().sum()
    }

    /// Row-stochastic variant: each row divided by its sum (zeros stay zero).
    pub fn normalized_rows(&self) -> [[f64; 8]; 8] {
        let mut out = [[0.0; 8]; 8];
        for (r, row) in self.counts.iter().enumerate() {
            let total: u64 = row.iter().sum();
            if total > 0 {
                for (c, &v) in row.iter().enumerate() {
                    out[r][c] = v as f64 / total as f64;
                }
            }
        }
        out
    }

    fn label(i: usize) -> &'static str {
        if i == BACKGROUND {
            "background"
        } else {
            ClassId::ALL[i].name()
        }
    }

    /// Labeled CSV grid; rows are ground truth, columns detections.
    pub fn to_csv(&self, normalized: bool) -> String {
        let mut out = String::from("gt\\det");
        for c in 0..8 {
            out.push(',');
            out.push_str(Self::label(c));
        }
        out.push('\n');
        let norm = self.normalized_rows();
        for (r, norm_row) in norm.iter().enumerate() {
            out.push_str(Self::label(r));
            for (c, value) in norm_row.iter().enumerate() {
                out.push(',');
                if normalized {
                    out.push_str(&format_number(*value));
                } else {
                    out.push_str(&self.counts[r][c].to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Class-agnostic greedy matching followed by class tabulation.
///
/// Detections below `confidence_cutoff` are dropped. Matching ignores class
/// (Greedy by descending confidence within each (video, frame) cell) so that
/// cross-class confusions land in off-diagonal cells. Unmatched ground truth
/// counts toward the background column; unmatched detections toward the
/// background row.
pub fn confusion_matrix(
    gts: &[GroundTruthRecord],
    dets: &[DetectionRecord],
    iou_threshold: f64,
    confidence_cutoff: f64,
) -> ConfusionMatrix {
    let kept: Vec<&DetectionRecord> = dets
        .iter()
        .filter(|d| d.confidence >= confidence_cutoff)
        .collect();

    let mut cells: BTreeMap<(u32, u32), (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, g) in gts.iter().enumerate() {
        cells.entry((g.video_id, g.frame)).or_default().0.push(i);
    }
    for (i, d) in kept.iter().enumerate() {
        cells.entry((d.video_id, d.frame)).or_default().1.push(i);
    }

    let mut matrix = ConfusionMatrix::default();
    let mut gt_taken = vec![false; gts.len()];
    for (gt_cell, det_cell) in cells.values() {
        let mut order = det_cell.clone();
        order.sort_by(|&a, &b| {
            kept[b]
                .confidence
                .partial_cmp(&kept[a].confidence)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for &di in &order {
            let mut best: Option<(usize, f64)> = None;
            for &gi in gt_cell {
                if gt_taken[gi] {
                    continue;
                }
                let overlap = iou(&kept[di].bbox, &gts[gi].bbox);
                if overlap < iou_threshold {
                    continue;
                }
                if best.is_none_or(|(_, b)| overlap > b) {
                    best = Some((gi, overlap));
                }
            }
            match best {
                Some((gi, _)) => {
                    gt_taken[gi] = true;
                    matrix.counts[gts[gi].class.index()][kept[di].class.index()] += 1;
                }
                None => matrix.counts[BACKGROUND][kept[di].class.index()] += 1,
            }
        }
    }
    for (i, g) in gts.iter().enumerate() {
        if !gt_taken[i] {
            matrix.counts[g.class.index()][BACKGROUND] += 1;
        }
    }
    matrix
}

/// Per-class AP at every range threshold.
#[derive(Debug, Clone)]
pub struct ClassAp {
    pub class: ClassId,
    /// AP at each of the ten thresholds 0.50 .. 0.95.
    pub ap_by_threshold: [f64; 10],
}

impl ClassAp {
    pub fn ap50(&self) -> f64 {
        self.ap_by_threshold[0]
    }

    pub fn ap_range(&self) -> f64 {
        self.ap_by_threshold.iter().sum::<f64>() / 10.0
    }
}

/// Evaluation parameters; the defaults evaluate at IoU 0.5 and report
/// point metrics at confidence 0.25.
#[derive(Debug, Clone, Copy)]
pub struct EvalParams {
    pub iou_threshold: f64,
    pub report_confidence: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            report_confidence: 0.25,
        }
    }
}

/// Everything the `evaluate` command emits, assembled in one pass.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub params: EvalParams,
    /// Classes present in the ground truth, in id order.
    pub per_class: Vec<ClassAp>,
    pub map50: f64,
    pub map50_95: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: ConfusionMatrix,
    pub curves: ConfidenceCurves,
    pub gt_histogram: ClassHistogram,
}

/// Run the full evaluation: per-class AP over the threshold range, mAP@0.5
/// and mAP@0.5:0.95, point metrics at the report confidence, the confusion
/// matrix, and the confidence sweep curves.
pub fn evaluate(
    gts: &[GroundTruthRecord],
    dets: &[DetectionRecord],
    params: EvalParams,
) -> EvalReport {
    let classes = classes_present(gts);
    let thresholds = range_thresholds();

    let mut per_class: Vec<ClassAp> = classes
        .iter()
        .map(|&class| ClassAp {
            class,
            ap_by_threshold: [0.0; 10],
        })
        .collect();
    for (ti, &t) in thresholds.iter().enumerate() {
        let matches = match_detections(gts, dets, t);
        for entry in per_class.iter_mut() {
            let curve = PrCurve::from_matches(&matches, gts, dets, entry.class);
            entry.ap_by_threshold[ti] = average_precision(&curve);
        }
    }

    let (map50, map50_95) = if per_class.is_empty() {
        (0.0, 0.0)
    } else {
        let n = per_class.len() as f64;
        let map50 = per_class.iter().map(ClassAp::ap50).sum::<f64>() / n;
        let by_threshold: Vec<f64> = (0..10)
            .map(|ti| per_class.iter().map(|c| c.ap_by_threshold[ti]).sum::<f64>() / n)
            .collect();
        (map50, by_threshold.iter().sum::<f64>() / 10.0)
    };

    let (precision, recall, f1) =
        precision_recall_f1_at(gts, dets, params.iou_threshold, params.report_confidence);
    let confusion = confusion_matrix(gts, dets, params.iou_threshold, params.report_confidence);
    let curves = confidence_curves(gts, dets, params.iou_threshold);

    EvalReport {
        params,
        per_class,
        map50,
        map50_95,
        precision,
        recall,
        f1,
        confusion,
        curves,
        gt_histogram: crate::annotations::class_histogram(gts),
    }
}

impl EvalReport {
    /// Flat `key: value` summary.
    pub fn summary_text(&self) -> String {
        format!(
            "map50: {}\nmap50_95: {}\nprecision: {}\nrecall: {}\nf1: {}\nreport_confidence: {}\niou_threshold: {}\n",
            format_number(self.map50),
            format_number(self.map50_95),
            format_number(self.precision),
            format_number(self.recall),
            format_number(self.f1),
            format_number(self.params.report_confidence),
            format_number(self.params.iou_threshold),
        )
    }

    /// Per-class AP table: one row per present class, ten threshold columns
    /// plus the range mean.
    pub fn per_class_ap_csv(&self) -> String {
        let mut out = String::from("class,name");
        for t in range_thresholds() {
            out.push_str(&format!(",ap{}", (t * 100.0).round() as u32));
        }
        out.push_str(",ap50_95\n");
        for entry in &self.per_class {
            out.push_str(&format!("{},{}", entry.class.id(), entry.class.name()));
            for ap in entry.ap_by_threshold {
                out.push(',');
                out.push_str(&format_number(ap));
            }
            out.push(',');
            out.push_str(&format_number(entry.ap_range()));
            out.push('\n');
        }
        out
    }

    /// `confidence,precision,recall,f1` rows for one class or for the pooled
    /// aggregate when `class` is `None`.
    pub fn curve_csv(&self, class: Option<ClassId>) -> String {
        let points = match class {
            Some(c) => &self.curves.per_class[&c],
            None => &self.curves.aggregate,
        };
        let mut out = String::from("confidence,precision,recall,f1\n");
        for p in points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                format_number(p.confidence),
                format_number(p.precision),
                format_number(p.recall),
                format_number(p.f1),
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::class_histogram;

    fn bbox(l: f64, t: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(l, t, w, h)
    }

    fn gt(video: u32, frame: u32, track: u32, b: BoundingBox, class: ClassId) -> GroundTruthRecord {
        GroundTruthRecord {
            video_id: video,
            frame,
            track_id: track,
            bbox: b,
            class,
        }
    }

    fn det(video: u32, frame: u32, b: BoundingBox, class: ClassId, conf: f64) -> DetectionRecord {
        DetectionRecord {
            video_id: video,
            frame,
            bbox: b,
            class,
            confidence: conf,
        }
    }

    #[test]
    fn iou_identity_and_disjoint() {
        let a = bbox(3.0, 7.0, 11.0, 13.0);
        assert_eq!(iou(&a, &a), 1.0);
        let b = bbox(100.0, 100.0, 10.0, 10.0);
        let c = bbox(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&b, &c), 0.0);
        // Shared edge only: zero-area intersection is disjoint.
        let d = bbox(10.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&c, &d), 0.0);
    }

    #[test]
    fn iou_half_overlap_is_one_third() {
        let a = bbox(0.0, 0.0, 10.0, 10.0);
        let b = bbox(5.0, 0.0, 10.0, 10.0);
        // Unit-pixel grid count: intersection 5x10 = 50 cells of the
        // 150-cell union.
        let mut inter = 0;
        let mut union = 0;
        for x in 0..20 {
            for y in 0..10 {
                let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
                let in_a = cx > a.left && cx < a.right() && cy > a.top && cy < a.bottom();
                let in_b = cx > b.left && cx < b.right() && cy > b.top && cy < b.bottom();
                if in_a && in_b {
                    inter += 1;
                }
                if in_a || in_b {
                    union += 1;
                }
            }
        }
        assert_eq!((inter, union), (50, 150));
        let expected = inter as f64 / union as f64;
        assert!((iou(&a, &b) - expected).abs() < 1e-12);
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn iou_symmetry() {
        let a = bbox(0.0, 0.0, 8.0, 4.0);
        let b = bbox(3.0, 1.0, 9.0, 9.0);
        assert_eq!(iou(&a, &b), iou(&b, &a));
    }

    #[test]
    fn match_one_pair_above_threshold() {
        let gts = vec![gt(1, 1, 0, bbox(0.0, 0.0, 10.0, 10.0), ClassId::Motorbike)];
        let dets = vec![det(
            1,
            1,
            bbox(0.0, 1.0, 10.0, 10.0),
            ClassId::Motorbike,
            0.8,
        )];
        let m = match_detections(&gts, &dets, 0.5);
        assert_eq!(m.pairs.len(), 1);
        assert!(m.unmatched_detections.is_empty());
        assert!(m.unmatched_ground_truths.is_empty());
    }

    #[test]
    fn match_prefers_higher_confidence() {
        let gts = vec![gt(1, 1, 0, bbox(0.0, 0.0, 10.0, 10.0), ClassId::Motorbike)];
        let dets = vec![
            det(1, 1, bbox(0.0, 1.0, 10.0, 10.0), ClassId::Motorbike, 0.6),
            det(1, 1, bbox(0.0, 0.0, 10.0, 10.0), ClassId::Motorbike, 0.9),
        ];
        let m = match_detections(&gts, &dets, 0.5);
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].det, 1);
        assert_eq!(m.unmatched_detections, vec![0]);
    }

    #[test]
    fn match_ignores_other_classes() {
        let gts = vec![gt(1, 1, 0, bbox(0.0, 0.0, 10.0, 10.0), ClassId::Motorbike)];
        let dets = vec![det(1, 1, bbox(0.0, 0.0, 10.0, 10.0), ClassId::DHelmet, 0.9)];
        let m = match_detections(&gts, &dets, 0.5);
        assert!(m.pairs.is_empty());
        assert_eq!(m.unmatched_detections, vec![0]);
        assert_eq!(m.unmatched_ground_truths, vec![0]);
    }

    #[test]
    fn ap_perfect_detector_is_one() {
        let gts = vec![
            gt(1, 1, 0, bbox(0.0, 0.0, 10.0, 10.0), ClassId::Motorbike),
            gt(1, 2, 0, bbox(40.0, 40.0, 10.0, 10.0), ClassId::Motorbike),
        ];
        let dets: Vec<DetectionRecord> = gts
            .iter()
            .map(|g| det(g.video_id, g.frame, g.bbox, g.class, 1.0))
            .collect();
        let m = match_detections(&gts, &dets, 0.5);
        let curve = PrCurve::from_matches(&m, &gts, &dets, ClassId::Motorbike);
        assert_eq!(average_precision(&curve), 1.0);
    }

    #[test]
    fn ap_zero_detections_is_zero() {
        let gts = vec![gt(1, 1, 0, bbox(0.0, 0.0, 10.0, 10.0), ClassId::Motorbike)];
        let m = match_detections(&gts, &[], 0.5);
        let curve = PrCurve::from_matches(&m, &gts, &[], ClassId::Motorbike);
        assert_eq!(average_precision(&curve), 0.0);
    }

    #[test]
    fn ap_tp_then_fp_is_one() {
        // One ground truth; a matching detection at 0.9 followed by a false
        // positive at 0.8. Points: (1.0, 1.0) then (0.5, 1.0); every recall
        // grid point sees max precision 1.0.
        let gts = vec![gt(1, 1, 0, bbox(0.0, 0.0, 10.0, 10.0), ClassId::Motorbike)];
        let dets = vec![
            det(1, 1, bbox(0.0, 0.0, 10.0, 10.0), ClassId::Motorbike, 0.9),
            det(
                1,
                1,
                bbox(500.0, 500.0, 10.0, 10.0),
                ClassId::Motorbike,
                0.8,
            ),
        ];
        let m = match_detections(&gts, &dets, 0.5);
        let curve = PrCurve::from_matches(&m, &gts, &dets, ClassId::Motorbike);
        assert_eq!(curve.points.len(), 2);
        assert_eq!(
            (curve.points[0].precision, curve.points[0].recall),
            (1.0, 1.0)
        );
        assert_eq!(
            (curve.points[1].precision, curve.points[1].recall),
            (0.5, 1.0)
        );
        assert_eq!(average_precision(&curve), 1.0);
    }

    fn identity_dets(gts: &[GroundTruthRecord]) -> Vec<DetectionRecord> {
        gts.iter()
            .map(|g| det(g.video_id, g.frame, g.bbox, g.class, 1.0))
            .collect()
    }

    #[test]
    fn map_identity_and_empty() {
        let gts = vec![
            gt(1, 1, 0, bbox(0.0, 0.0, 10.0, 10.0), ClassId::Motorbike),
            gt(1, 1, 1, bbox(30.0, 0.0, 14.0, 12.0), ClassId::DHelmet),
            gt(2, 5, 0, bbox(100.0, 50.0, 22.0, 8.0), ClassId::DHelmet),
        ];
        let dets = identity_dets(&gts);
        assert_eq!(map_at(&gts, &dets, 0.5), 1.0);
        assert_eq!(map_range(&gts, &dets), 1.0);
        assert_eq!(map_at(&gts, &[], 0.5), 0.0);
        assert_eq!(map_range(&gts, &[]), 0.0);
    }

    #[test]
    fn per_class_ap_non_increasing_in_threshold() {
        let gts = vec![
            gt(1, 1, 0, bbox(0.0, 0.0, 20.0, 20.0), ClassId::Motorbike),
            gt(1, 2, 0, bbox(0.0, 0.0, 20.0, 20.0), ClassId::Motorbike),
        ];
        let dets = vec![
            det(1, 1, bbox(2.0, 0.0, 20.0, 20.0), ClassId::Motorbike, 0.9),
            det(1, 2, bbox(6.0, 2.0, 20.0, 20.0), ClassId::Motorbike, 0.7),
        ];
        let mut prev = f64::INFINITY;
        for t in range_thresholds() {
            let m = match_detections(&gts, &dets, t);
            let ap = average_precision(&PrCurve::from_matches(&m, &gts, &dets, ClassId::Motorbike));
            assert!(ap <= prev + 1e-12, "AP increased from {prev} at {t}");
            prev = ap;
        }
    }

    #[test]
    fn monotone_confidence_transform_leaves_ap_unchanged() {
        let gts = vec![
            gt(1, 1, 0, bbox(0.0, 0.0, 20.0, 20.0), ClassId::Motorbike),
            gt(1, 1, 1, bbox(50.0, 0.0, 20.0, 20.0), ClassId::Motorbike),
            gt(1, 2, 0, bbox(0.0, 0.0, 20.0, 20.0), ClassId::DHelmet),
        ];
        let dets = vec![
            det(1, 1, bbox(1.0, 0.0, 20.0, 20.0), ClassId::Motorbike, 0.9),
            det(1, 1, bbox(52.0, 0.0, 20.0, 20.0), ClassId::Motorbike, 0.4),
            det(1, 1, bbox(200.0, 0.0, 20.0, 20.0), ClassId::Motorbike, 0.6),
            det(1, 2, bbox(3.0, 1.0, 20.0, 20.0), ClassId::DHelmet, 0.2),
        ];
        let transformed: Vec<DetectionRecord> = dets
            .iter()
            .map(|d| {
                let mut t = d.clone();
                t.confidence = 0.5 + d.confidence / 2.0;
                t
            })
            .collect();
        for t in [0.5, 0.75] {
            assert_eq!(map_at(&gts, &dets, t), map_at(&gts, &transformed, t));
        }
    }

    #[test]
    fn unmatched_extra_detection_never_raises_ap() {
        let gts = vec![gt(1, 1, 0, bbox(0.0, 0.0, 20.0, 20.0), ClassId::Motorbike)];
        let dets = vec![det(
            1,
            1,
            bbox(0.0, 0.0, 20.0, 20.0),
            ClassId::Motorbike,
            0.8,
        )];
        let base = map_at(&gts, &dets, 0.5);
        let mut more = dets.clone();
        more.push(det(
            1,
            1,
            bbox(900.0, 900.0, 5.0, 5.0),
            ClassId::Motorbike,
            0.3,
        ));
        assert!(map_at(&gts, &more, 0.5) <= base);
    }

    #[test]
    fn new_top_confidence_true_positive_never_lowers_ap() {
        let gts = vec![
            gt(1, 1, 0, bbox(0.0, 0.0, 20.0, 20.0), ClassId::Motorbike),
            gt(1, 2, 0, bbox(0.0, 0.0, 20.0, 20.0), ClassId::Motorbike),
        ];
        // One matched ground truth, one false positive, one still unmatched.
        let dets = vec![
            det(1, 1, bbox(0.0, 0.0, 20.0, 20.0), ClassId::Motorbike, 0.8),
            det(1, 1, bbox(500.0, 0.0, 20.0, 20.0), ClassId::Motorbike, 0.6),
        ];
        let base = map_at(&gts, &dets, 0.5);
        let mut more = dets.clone();
        more.push(det(
            1,
            2,
            bbox(0.0, 0.0, 20.0, 20.0),
            ClassId::Motorbike,
            0.9,
        ));
        assert!(map_at(&gts, &more, 0.5) >= base);
    }

    #[test]
    fn curves_perfect_detector() {
        let gts = vec![gt(1, 1, 0, bbox(0.0, 0.0, 10.0, 10.0), ClassId::Motorbike)];
        let dets = identity_dets(&gts);
        let curves = confidence_curves(&gts, &dets, 0.5);
        for p in &curves.aggregate {
            assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn recall_drops_to_zero_past_max_confidence() {
        let gts = vec![gt(1, 1, 0, bbox(0.0, 0.0, 10.0, 10.0), ClassId::Motorbike)];
        let dets = vec![det(
            1,
            1,
            bbox(0.0, 0.0, 10.0, 10.0),
            ClassId::Motorbike,
            0.42,
        )];
        let curves = confidence_curves(&gts, &dets, 0.5);
        let last = curves.aggregate.last().unwrap();
        assert_eq!(last.recall, 0.0);
        // Monotone: recall never increases as the cutoff rises.
        let mut prev = f64::INFINITY;
        for p in &curves.aggregate {
            assert!(p.recall <= prev);
            prev = p.recall;
        }
    }

    #[test]
    fn confusion_identity_is_diagonal() {
        let gts = vec![
            gt(1, 1, 0, bbox(0.0, 0.0, 10.0, 10.0), ClassId::Motorbike),
            gt(1, 1, 1, bbox(30.0, 0.0, 10.0, 10.0), ClassId::DHelmet),
            gt(1, 2, 0, bbox(0.0, 0.0, 10.0, 10.0), ClassId::Motorbike),
        ];
        let dets = identity_dets(&gts);
        let m = confusion_matrix(&gts, &dets, 0.5, 0.0);
        let h = class_histogram(&gts);
        for class in ClassId::ALL {
            assert_eq!(m.counts[class.index()][class.index()], h.get(class));
        }
        assert_eq!(m.total(), gts.len() as u64);
    }

    #[test]
    fn confusion_wrong_class_is_off_diagonal() {
        let gts = vec![gt(1, 1, 0, bbox(0.0, 0.0, 10.0, 10.0), ClassId::DHelmet)];
        let dets = vec![det(
            1,
            1,
            bbox(0.0, 0.0, 10.0, 10.0),
            ClassId::DNoHelmet,
            0.9,
        )];
        let m = confusion_matrix(&gts, &dets, 0.5, 0.0);
        assert_eq!(
            m.counts[ClassId::DHelmet.index()][ClassId::DNoHelmet.index()],
            1
        );
        assert_eq!(m.total(), 1);
    }

    #[test]
    fn confusion_row_sums_equal_gt_counts() {
        let gts = vec![
            gt(1, 1, 0, bbox(0.0, 0.0, 10.0, 10.0), ClassId::Motorbike),
            gt(1, 1, 1, bbox(30.0, 0.0, 10.0, 10.0), ClassId::DHelmet),
            gt(1, 3, 0, bbox(60.0, 0.0, 10.0, 10.0), ClassId::DHelmet),
        ];
        let dets = vec![
            det(1, 1, bbox(0.0, 0.0, 10.0, 10.0), ClassId::DHelmet, 0.9),
            det(1, 2, bbox(0.0, 0.0, 10.0, 10.0), ClassId::Motorbike, 0.8),
        ];
        let m = confusion_matrix(&gts, &dets, 0.5, 0.0);
        let h = class_histogram(&gts);
        for class in ClassId::ALL {
            assert_eq!(m.row_total(class), h.get(class));
        }
        // matched pairs + unmatched gt + unmatched det
        assert_eq!(m.total(), 1 + 2 + 1);
    }

    #[test]
    fn evaluate_composes_individual_operations() {
        let gts = vec![
            gt(1, 1, 0, bbox(0.0, 0.0, 20.0, 20.0), ClassId::Motorbike),
            gt(1, 2, 0, bbox(10.0, 10.0, 30.0, 30.0), ClassId::DHelmet),
            gt(2, 1, 0, bbox(5.0, 5.0, 12.0, 40.0), ClassId::DHelmet),
        ];
        let dets = vec![
            det(1, 1, bbox(1.0, 0.0, 20.0, 20.0), ClassId::Motorbike, 0.9),
            det(1, 2, bbox(11.0, 10.0, 30.0, 30.0), ClassId::DHelmet, 0.5),
            det(2, 1, bbox(300.0, 5.0, 12.0, 40.0), ClassId::DHelmet, 0.7),
        ];
        let params = EvalParams::default();
        let report = evaluate(&gts, &dets, params);
        assert_eq!(report.map50, map_at(&gts, &dets, 0.5));
        assert_eq!(report.map50_95, map_range(&gts, &dets));
        let (p, r, f) =
            precision_recall_f1_at(&gts, &dets, params.iou_threshold, params.report_confidence);
        assert_eq!((report.precision, report.recall, report.f1), (p, r, f));
        assert_eq!(
            report.confusion,
            confusion_matrix(&gts, &dets, params.iou_threshold, params.report_confidence)
        );
    }

    #[test]
    fn evaluate_perfect_and_empty() {
        let gts = vec![
            gt(1, 1, 0, bbox(0.0, 0.0, 20.0, 20.0), ClassId::Motorbike),
            gt(1, 2, 0, bbox(10.0, 10.0, 30.0, 30.0), ClassId::DHelmet),
        ];
        let perfect = evaluate(&gts, &identity_dets(&gts), EvalParams::default());
        assert_eq!(perfect.map50, 1.0);
        assert_eq!(perfect.map50_95, 1.0);
        assert_eq!(perfect.precision, 1.0);
        assert_eq!(perfect.recall, 1.0);

        let empty = evaluate(&gts, &[], EvalParams::default());
        assert_eq!(empty.map50, 0.0);
        assert_eq!(empty.map50_95, 0.0);
        assert_eq!(empty.precision, 0.0);
        assert_eq!(empty.recall, 0.0);
        assert_eq!(empty.f1, 0.0);
    }
}
