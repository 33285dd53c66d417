//! Deterministic, seeded planning of training-set composition: frame
//! selection, background discard, near-duplicate removal, train/val
//! splitting, and class-balance over/under-sampling with bounding-box
//! augmentation geometry.
//!
//! Nothing here touches pixels. Frames are identified by (video, frame)
//! and "similarity" defaults to an annotation-derived score, with an
//! external per-pair similarity table accepted for image-based workflows.
//! Every plan is a pure function of its inputs and seed.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::annotations::{
    format_number, BoundingBox, ClassHistogram, ClassId, FrameGeometry, GroundTruthRecord,
};
use crate::error::{Error, ParseErrorKind, Result};
use crate::metrics::iou;

/// A frame identified by video id and 1-based frame number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrameRef {
    pub video_id: u32,
    pub frame: u32,
}

impl FrameRef {
    pub fn new(video_id: u32, frame: u32) -> Self {
        Self { video_id, frame }
    }
}

impl fmt::Display for FrameRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.video_id, self.frame)
    }
}

/// Disjoint train/validation video-id sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    train_videos: BTreeSet<u32>,
    val_videos: BTreeSet<u32>,
}

impl SplitSpec {
    pub fn new(train_videos: BTreeSet<u32>, val_videos: BTreeSet<u32>) -> Result<Self> {
        if let Some(shared) = train_videos.intersection(&val_videos).next() {
            return Err(Error::Config(format!(
                "video {shared} appears in both train and val sets"
            )));
        }
        for &v in train_videos.iter().chain(val_videos.iter()) {
            if !(1..=100).contains(&v) {
                return Err(Error::Config(format!("split video id {v} outside 1..100")));
            }
        }
        Ok(Self {
            train_videos,
            val_videos,
        })
    }

    pub fn train_videos(&self) -> &BTreeSet<u32> {
        &self.train_videos
    }

    pub fn val_videos(&self) -> &BTreeSet<u32> {
        &self.val_videos
    }
}

/// Train on videos 1..=90 and 100; validate on 91..=99.
impl Default for SplitSpec {
    fn default() -> Self {
        let mut train: BTreeSet<u32> = (1..=90).collect();
        train.insert(100);
        let val: BTreeSet<u32> = (91..=99).collect();
        Self {
            train_videos: train,
            val_videos: val,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentKind {
    HorizontalFlip,
    Rotation,
}

/// One augmentation: a horizontal flip, or a rotation by a bounded angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentSpec {
    kind: AugmentKind,
    angle_deg: f64,
}

impl AugmentSpec {
    pub const MAX_ROTATION_DEG: f64 = 15.0;

    pub fn horizontal_flip() -> Self {
        Self {
            kind: AugmentKind::HorizontalFlip,
            angle_deg: 0.0,
        }
    }

    pub fn rotation(angle_deg: f64) -> Result<Self> {
        if !angle_deg.is_finite() || angle_deg.abs() > Self::MAX_ROTATION_DEG {
            return Err(Error::Config(format!(
                "rotation angle {angle_deg} outside [-{0}, {0}]",
                Self::MAX_ROTATION_DEG
            )));
        }
        Ok(Self {
            kind: AugmentKind::Rotation,
            angle_deg,
        })
    }

    pub fn kind(&self) -> AugmentKind {
        self.kind
    }

    pub fn angle_deg(&self) -> f64 {
        self.angle_deg
    }

    /// Accepts `flip` or `rot:<degrees>`.
    pub fn parse(s: &str) -> Result<Self> {
        if s == "flip" {
            return Ok(Self::horizontal_flip());
        }
        if let Some(angle) = s.strip_prefix("rot:") {
            let angle: f64 = angle
                .parse()
                .map_err(|_| Error::Config(format!("bad rotation angle {angle:?}")))?;
            return Self::rotation(angle);
        }
        Err(Error::Config(format!(
            "unknown augmentation {s:?} (expected `flip` or `rot:<deg>`)"
        )))
    }

    pub fn manifest_name(&self) -> &'static str {
        match self.kind {
            AugmentKind::HorizontalFlip => "horizontal_flip",
            AugmentKind::Rotation => "rotation",
        }
    }
}

impl fmt::Display for AugmentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            AugmentKind::HorizontalFlip => f.write_str("horizontal_flip"),
            AugmentKind::Rotation => write!(f, "rotation {}", format_number(self.angle_deg)),
        }
    }
}

/// All records of one frame, transformed together by one augmentation.
#[derive(Debug, Clone)]
pub struct AugmentedFrame {
    pub source: FrameRef,
    pub spec: AugmentSpec,
    pub records: Vec<GroundTruthRecord>,
}

/// A frame dropped by some stage, with the reason.
#[derive(Debug, Clone)]
pub struct DropNote {
    pub frame: FrameRef,
    pub reason: String,
}

/// A deterministic description of which frames (and augmented copies) form
/// a training set.
#[derive(Debug, Clone, Default)]
pub struct SamplingPlan {
    pub kept_frames: Vec<FrameRef>,
    pub augmented: Vec<AugmentedFrame>,
    pub dropped: Vec<DropNote>,
    pub seed: u64,
    /// One line per pipeline stage applied, with counts.
    pub provenance: Vec<String>,
}

impl SamplingPlan {
    /// Line-oriented manifest: `# provenance`, then `KEEP video frame`,
    /// `AUG video frame kind angle`, and `DROP video frame reason` lines.
    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# seed {}\n", self.seed));
        for note in &self.provenance {
            out.push_str(&format!("# {note}\n"));
        }
        for f in &self.kept_frames {
            out.push_str(&format!("KEEP {f}\n"));
        }
        for a in &self.augmented {
            out.push_str(&format!(
                "AUG {} {} {}\n",
                a.source,
                a.spec.manifest_name(),
                format_number(a.spec.angle_deg())
            ));
        }
        for d in &self.dropped {
            out.push_str(&format!("DROP {} {}\n", d.frame, d.reason));
        }
        out
    }
}

/// Keep frames on a fixed stride per video: frame numbers with
/// `(frame - 1) % round(source_fps / target_fps) == 0`.
pub fn uniform_sample(
    frames: &[FrameRef],
    source_fps: f64,
    target_fps: f64,
) -> Result<Vec<FrameRef>> {
    if target_fps.is_nan() || target_fps <= 0.0 || target_fps > source_fps {
        return Err(Error::Config(format!(
            "target fps {target_fps} must be in (0, {source_fps}]"
        )));
    }
    let stride = (source_fps / target_fps).round().max(1.0) as u32;
    Ok(frames
        .iter()
        .filter(|f| (f.frame - 1) % stride == 0)
        .copied()
        .collect())
}

/// Uniformly random subset of exactly `count` frames, sorted by
/// (video, frame). Deterministic for a given seed.
pub fn random_sample(frames: &[FrameRef], count: usize, seed: u64) -> Result<Vec<FrameRef>> {
    if count > frames.len() {
        return Err(Error::Config(format!(
            "cannot sample {count} frames from {}",
            frames.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<FrameRef> = frames.choose_multiple(&mut rng, count).copied().collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Keep every annotated frame; of the background frames (those not in
/// `annotated`), keep a seeded random `ceil(keep_fraction * n_background)`.
/// Input order is preserved.
pub fn discard_background(
    frames: &[FrameRef],
    annotated: &BTreeSet<FrameRef>,
    keep_fraction: f64,
    seed: u64,
) -> Result<Vec<FrameRef>> {
    if !(0.0..=1.0).contains(&keep_fraction) {
        return Err(Error::Config(format!(
            "keep fraction {keep_fraction} outside [0, 1]"
        )));
    }
    let background: Vec<FrameRef> = frames
        .iter()
        .filter(|f| !annotated.contains(f))
        .copied()
        .collect();
    let keep_count = (keep_fraction * background.len() as f64).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kept_background: BTreeSet<FrameRef> = background
        .choose_multiple(&mut rng, keep_count.min(background.len()))
        .copied()
        .collect();
    Ok(frames
        .iter()
        .filter(|f| annotated.contains(f) || kept_background.contains(f))
        .copied()
        .collect())
}

/// External per-pair similarity table: `(video, frame_a, frame_b) -> [0, 1]`.
#[derive(Debug, Clone, Default)]
pub struct SimilarityTable {
    map: HashMap<(u32, u32, u32), f64>,
}

impl SimilarityTable {
    pub fn insert(
        &mut self,
        video: u32,
        frame_a: u32,
        frame_b: u32,
        similarity: f64,
    ) -> Result<()> {
        if !(0.0..=1.0).contains(&similarity) {
            return Err(Error::Config(format!(
                "similarity {similarity} outside [0, 1]"
            )));
        }
        self.map.insert((video, frame_a, frame_b), similarity);
        Ok(())
    }

    pub fn get(&self, video: u32, frame_a: u32, frame_b: u32) -> Option<f64> {
        self.map.get(&(video, frame_a, frame_b)).copied()
    }

    /// Parse lines of `video frame_a frame_b similarity`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = SimilarityTable::default();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::parse(
                    line_no,
                    ParseErrorKind::FieldCount {
                        expected: 4,
                        found: fields.len(),
                    },
                ));
            }
            let parse_u32 = |s: &str, name: &'static str, field: usize| -> Result<u32> {
                s.parse::<u32>().map_err(|_| {
                    Error::parse(
                        line_no,
                        ParseErrorKind::Number {
                            field,
                            name,
                            value: s.to_string(),
                        },
                    )
                })
            };
            let video = parse_u32(fields[0], "video_id", 1)?;
            let a = parse_u32(fields[1], "frame_a", 2)?;
            let b = parse_u32(fields[2], "frame_b", 3)?;
            let sim: f64 = fields[3].parse().map_err(|_| {
                Error::parse(
                    line_no,
                    ParseErrorKind::Number {
                        field: 4,
                        name: "similarity",
                        value: fields[3].to_string(),
                    },
                )
            })?;
            if !(0.0..=1.0).contains(&sim) {
                return Err(Error::parse(line_no, ParseErrorKind::Similarity(sim)));
            }
            table.map.insert((video, a, b), sim);
        }
        Ok(table)
    }
}

/// Where pairwise frame similarity comes from.
pub enum SimilaritySource<'a> {
    /// Annotation-set similarity derived from ground-truth records.
    Annotations(&'a [GroundTruthRecord]),
    /// An externally supplied table (for image-based workflows). Pairs
    /// missing from the table score 0 (dissimilar).
    Table(&'a SimilarityTable),
}

fn group_by_frame(records: &[GroundTruthRecord]) -> HashMap<FrameRef, Vec<&GroundTruthRecord>> {
    let mut map: HashMap<FrameRef, Vec<&GroundTruthRecord>> = HashMap::new();
    for r in records {
        map.entry(FrameRef::new(r.video_id, r.frame))
            .or_default()
            .push(r);
    }
    map
}

/// Annotation-set similarity of two frames: the mean, over every box in
/// either frame, of its best IoU against a same-class box in the other
/// frame. Two empty frames score 1.0.
pub fn annotation_similarity(a: &[&GroundTruthRecord], b: &[&GroundTruthRecord]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let best = |rec: &GroundTruthRecord, others: &[&GroundTruthRecord]| -> f64 {
        others
            .iter()
            .filter(|o| o.class == rec.class)
            .map(|o| iou(&rec.bbox, &o.bbox))
            .fold(0.0, f64::max)
    };
    let mut total = 0.0;
    for r in a {
        total += best(r, b);
    }
    for r in b {
        total += best(r, a);
    }
    total / (a.len() + b.len()) as f64
}

fn pair_similarity(
    source: &SimilaritySource,
    by_frame: &HashMap<FrameRef, Vec<&GroundTruthRecord>>,
    prev: FrameRef,
    next: FrameRef,
) -> f64 {
    match source {
        SimilaritySource::Table(table) => table
            .get(prev.video_id, prev.frame, next.frame)
            .unwrap_or(0.0),
        SimilaritySource::Annotations(_) => {
            let empty: Vec<&GroundTruthRecord> = Vec::new();
            let a = by_frame.get(&prev).unwrap_or(&empty);
            let b = by_frame.get(&next).unwrap_or(&empty);
            annotation_similarity(a, b)
        }
    }
}

/// Scan each video's frames in order, dropping a frame when its similarity
/// to the most recently kept frame of the same video reaches `threshold`.
pub fn near_duplicate_filter(
    frames: &[FrameRef],
    similarity: &SimilaritySource,
    threshold: f64,
) -> Result<Vec<FrameRef>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Config(format!(
            "similarity threshold {threshold} outside [0, 1]"
        )));
    }
    let by_frame = match similarity {
        SimilaritySource::Annotations(records) => group_by_frame(records),
        SimilaritySource::Table(_) => HashMap::new(),
    };
    let mut last_kept: HashMap<u32, FrameRef> = HashMap::new();
    let mut kept = Vec::new();
    for &f in frames {
        let dropped = match last_kept.get(&f.video_id) {
            Some(&prev) => pair_similarity(similarity, &by_frame, prev, f) >= threshold,
            None => false,
        };
        if !dropped {
            last_kept.insert(f.video_id, f);
            kept.push(f);
        }
    }
    Ok(kept)
}

/// Partition frames by video membership in the split spec.
pub fn split_train_val(
    frames: &[FrameRef],
    spec: &SplitSpec,
) -> Result<(Vec<FrameRef>, Vec<FrameRef>)> {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for &f in frames {
        if spec.train_videos.contains(&f.video_id) {
            train.push(f);
        } else if spec.val_videos.contains(&f.video_id) {
            val.push(f);
        } else {
            return Err(Error::Config(format!(
                "video {} is in neither the train nor the val set",
                f.video_id
            )));
        }
    }
    Ok((train, val))
}

/// Apply one augmentation to a box. Flips reflect about the vertical frame
/// axis. Rotations turn the four corners about the frame center and take
/// the axis-aligned hull, clipped to the frame; the box is dropped (`None`)
/// when its center leaves the frame or the clipped hull degenerates to one
/// pixel or less in either dimension.
pub fn transform_box(
    bbox: &BoundingBox,
    spec: &AugmentSpec,
    geometry: &FrameGeometry,
) -> Option<BoundingBox> {
    match spec.kind {
        AugmentKind::HorizontalFlip => Some(BoundingBox::new(
            geometry.width as f64 - bbox.left - bbox.width,
            bbox.top,
            bbox.width,
            bbox.height,
        )),
        AugmentKind::Rotation => {
            let theta = spec.angle_deg.to_radians();
            let (sin, cos) = theta.sin_cos();
            let (cx, cy) = (geometry.width as f64 / 2.0, geometry.height as f64 / 2.0);
            let corners = [
                (bbox.left, bbox.top),
                (bbox.right(), bbox.top),
                (bbox.right(), bbox.bottom()),
                (bbox.left, bbox.bottom()),
            ];
            let mut min_x = f64::INFINITY;
            let mut max_x = f64::NEG_INFINITY;
            let mut min_y = f64::INFINITY;
            let mut max_y = f64::NEG_INFINITY;
            for (x, y) in corners {
                let dx = x - cx;
                let dy = y - cy;
                let rx = cx + dx * cos - dy * sin;
                let ry = cy + dx * sin + dy * cos;
                min_x = min_x.min(rx);
                max_x = max_x.max(rx);
                min_y = min_y.min(ry);
                max_y = max_y.max(ry);
            }
            let hull = BoundingBox::new(min_x, min_y, max_x - min_x, max_y - min_y);
            let (hx, hy) = hull.center();
            if hx < 0.0 || hx > geometry.width as f64 || hy < 0.0 || hy > geometry.height as f64 {
                return None;
            }
            let clipped = hull.clip_to(geometry)?;
            if clipped.width <= 1.0 || clipped.height <= 1.0 {
                return None;
            }
            Some(clipped)
        }
    }
}

/// Classes counting less than 10% of the largest class count.
pub fn default_minority_classes(histogram: &ClassHistogram) -> BTreeSet<ClassId> {
    let cutoff = histogram.max_count() as f64 * 0.10;
    histogram
        .iter()
        .filter(|&(_, count)| (count as f64) < cutoff)
        .map(|(c, _)| c)
        .collect()
}

fn frames_in_order(records: &[GroundTruthRecord]) -> Vec<FrameRef> {
    let mut seen = BTreeSet::new();
    let mut frames = Vec::new();
    for r in records {
        let f = FrameRef::new(r.video_id, r.frame);
        if seen.insert(f) {
            frames.push(f);
        }
    }
    frames
}

/// Plan augmented copies of every frame that contains at least one
/// minority-class box: one copy per spec, with all of the frame's boxes
/// transformed together. Boxes that degenerate under a transform are
/// dropped and accounted for in the provenance.
pub fn oversample_plan(
    records: &[GroundTruthRecord],
    histogram: &ClassHistogram,
    minority_classes: &BTreeSet<ClassId>,
    specs: &[AugmentSpec],
    seed: u64,
    geometry: &FrameGeometry,
) -> SamplingPlan {
    let by_frame = group_by_frame(records);
    let frames = frames_in_order(records);
    let minority_frames: Vec<FrameRef> = frames
        .iter()
        .filter(|f| {
            by_frame
                .get(f)
                .is_some_and(|rs| rs.iter().any(|r| minority_classes.contains(&r.class)))
        })
        .copied()
        .collect();

    let mut augmented = Vec::new();
    let mut dropped = Vec::new();
    let mut boxes_dropped = 0usize;
    for &frame in &minority_frames {
        let source_records = &by_frame[&frame];
        for spec in specs {
            let mut transformed = Vec::new();
            for r in source_records {
                match transform_box(&r.bbox, spec, geometry) {
                    Some(bbox) => transformed.push(GroundTruthRecord {
                        bbox,
                        ..(*r).clone()
                    }),
                    None => boxes_dropped += 1,
                }
            }
            if transformed.is_empty() {
                dropped.push(DropNote {
                    frame,
                    reason: format!("augmentation {spec} left no boxes"),
                });
            } else {
                augmented.push(AugmentedFrame {
                    source: frame,
                    spec: *spec,
                    records: transformed,
                });
            }
        }
    }

    let minority_names: Vec<&str> = minority_classes.iter().map(|c| c.name()).collect();
    let provenance = vec![
        format!(
            "oversample: minority classes [{}] (max count {})",
            minority_names.join(" "),
            histogram.max_count()
        ),
        format!(
            "oversample: {} of {} frames contain minority boxes; {} augmented copies, {} boxes dropped",
            minority_frames.len(),
            frames.len(),
            augmented.len(),
            boxes_dropped
        ),
    ];
    SamplingPlan {
        kept_frames: frames,
        augmented,
        dropped,
        seed,
        provenance,
    }
}

/// Plan seeded removal of frames whose boxes all belong to over-cap
/// classes, most-similar frames first, until every capped class is within
/// its cap or no removable frame remains.
pub fn undersample_plan(
    records: &[GroundTruthRecord],
    caps: &BTreeMap<ClassId, u64>,
    seed: u64,
) -> SamplingPlan {
    let by_frame = group_by_frame(records);
    let frames = frames_in_order(records);

    let mut counts = crate::annotations::class_histogram(records);
    let over_cap = |counts: &ClassHistogram, class: ClassId| -> bool {
        caps.get(&class).is_some_and(|&cap| counts.get(class) > cap)
    };

    // Similarity of each frame to its predecessor within the same video,
    // used as the removal preference (most similar first).
    let mut similarity: HashMap<FrameRef, f64> = HashMap::new();
    let mut prev_in_video: HashMap<u32, FrameRef> = HashMap::new();
    let empty: Vec<&GroundTruthRecord> = Vec::new();
    for &f in &frames {
        let score = match prev_in_video.get(&f.video_id) {
            Some(prev) => annotation_similarity(
                by_frame.get(prev).unwrap_or(&empty),
                by_frame.get(&f).unwrap_or(&empty),
            ),
            None => 0.0,
        };
        similarity.insert(f, score);
        prev_in_video.insert(f.video_id, f);
    }

    // Candidate order: similarity descending, seeded shuffle breaking ties.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates = frames.clone();
    candidates.shuffle(&mut rng);
    candidates.sort_by(|a, b| {
        similarity[b]
            .partial_cmp(&similarity[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut removed: BTreeSet<FrameRef> = BTreeSet::new();
    let mut dropped = Vec::new();
    for f in candidates {
        let any_over = ClassId::ALL.iter().any(|&c| over_cap(&counts, c));
        if !any_over {
            break;
        }
        let frame_records = &by_frame[&f];
        // Removable only while every box in the frame is from a class still
        // over its cap; classes never re-enter the over-cap set because
        // counts only decrease.
        if frame_records.is_empty() || !frame_records.iter().all(|r| over_cap(&counts, r.class)) {
            continue;
        }
        for r in frame_records {
            counts.set(r.class, counts.get(r.class) - 1);
        }
        removed.insert(f);
        dropped.push(DropNote {
            frame: f,
            reason: "undersample: all boxes in over-cap classes".to_string(),
        });
    }

    let kept: Vec<FrameRef> = frames
        .iter()
        .filter(|f| !removed.contains(f))
        .copied()
        .collect();
    let cap_desc: Vec<String> = caps
        .iter()
        .map(|(c, cap)| format!("{}<={}", c.name(), cap))
        .collect();
    let provenance = vec![
        format!("undersample: caps [{}]", cap_desc.join(" ")),
        format!(
            "undersample: removed {} of {} frames",
            removed.len(),
            frames.len()
        ),
    ];
    SamplingPlan {
        kept_frames: kept,
        augmented: Vec::new(),
        dropped,
        seed,
        provenance,
    }
}
