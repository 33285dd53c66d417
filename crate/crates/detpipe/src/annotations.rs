//! Ground-truth and detection record handling.
//!
//! Both file formats are line-oriented UTF-8 text, one object instance per
//! line. Fields are comma-separated on output; commas and runs of whitespace
//! are both accepted on input. Coordinates are real-valued pixels and are
//! printed in the shortest form that round-trips (integers print as
//! integers).
//!
//! Ground truth:  `video_id,frame,track_id,bb_left,bb_top,bb_width,bb_height,class`
//! Detections:    `video_id,frame,bb_left,bb_top,bb_width,bb_height,class,confidence`

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use crate::error::{Error, ParseErrorKind, Result};

/// Axis-aligned pixel rectangle, stored as left/top corner plus size.
///
/// Fields are plain data: construction does not enforce the positive-size
/// invariant, so that [`validate`] can report violations instead of refusing
/// to represent them. Parsers do enforce it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl BoundingBox {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Self {
        Self {
            left,
            top,
            width,
            height,
        }
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn center(&self) -> (f64, f64) {
        (self.left + self.width / 2.0, self.top + self.height / 2.0)
    }

    /// Positive width and height.
    pub fn is_valid(&self) -> bool {
        self.width > 0.0 && self.height > 0.0
    }

    /// Whole box lies inside the frame (origin non-negative, extent within).
    pub fn fits_in(&self, geometry: &FrameGeometry) -> bool {
        self.left >= 0.0
            && self.top >= 0.0
            && self.right() <= geometry.width as f64
            && self.bottom() <= geometry.height as f64
    }

    /// Clip to the frame rectangle. `None` when nothing positive remains.
    /// Clipping an already-fitting box returns it unchanged, so the
    /// operation is idempotent.
    pub fn clip_to(&self, geometry: &FrameGeometry) -> Option<BoundingBox> {
        let left = self.left.max(0.0);
        let top = self.top.max(0.0);
        let right = self.right().min(geometry.width as f64);
        let bottom = self.bottom().min(geometry.height as f64);
        let width = right - left;
        let height = bottom - top;
        if width > 0.0 && height > 0.0 {
            Some(BoundingBox {
                left,
                top,
                width,
                height,
            })
        } else {
            None
        }
    }
}

/// Pixel dimensions and frame rate of the source videos.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGeometry {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
}

impl FrameGeometry {
    pub fn new(width: u32, height: u32, fps: f64) -> Result<Self> {
        if width == 0 || height == 0 || fps.is_nan() || fps <= 0.0 {
            return Err(Error::Config(format!(
                "frame geometry must be positive, got {width}x{height} at {fps} fps"
            )));
        }
        Ok(Self { width, height, fps })
    }
}

/// 1920x1080 at 10 fps, the challenge's recording format.
impl Default for FrameGeometry {
    fn default() -> Self {
        Self {
            width: 1920,
            height: 1080,
            fps: 10.0,
        }
    }
}

/// The seven annotation classes, ids 1 through 7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum ClassId {
    Motorbike = 1,
    DHelmet = 2,
    DNoHelmet = 3,
    P1Helmet = 4,
    P1NoHelmet = 5,
    P2Helmet = 6,
    P2NoHelmet = 7,
}

impl ClassId {
    pub const ALL: [ClassId; 7] = [
        ClassId::Motorbike,
        ClassId::DHelmet,
        ClassId::DNoHelmet,
        ClassId::P1Helmet,
        ClassId::P1NoHelmet,
        ClassId::P2Helmet,
        ClassId::P2NoHelmet,
    ];

    pub fn from_id(id: i64) -> Option<ClassId> {
        match id {
            1 => Some(ClassId::Motorbike),
            2 => Some(ClassId::DHelmet),
            3 => Some(ClassId::DNoHelmet),
            4 => Some(ClassId::P1Helmet),
            5 => Some(ClassId::P1NoHelmet),
            6 => Some(ClassId::P2Helmet),
            7 => Some(ClassId::P2NoHelmet),
            _ => None,
        }
    }

    pub fn id(self) -> u8 {
        self as u8
    }

    /// Zero-based index, for dense per-class tables.
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassId::Motorbike => "motorbike",
            ClassId::DHelmet => "DHelmet",
            ClassId::DNoHelmet => "DNoHelmet",
            ClassId::P1Helmet => "P1Helmet",
            ClassId::P1NoHelmet => "P1NoHelmet",
            ClassId::P2Helmet => "P2Helmet",
            ClassId::P2NoHelmet => "P2NoHelmet",
        }
    }

    pub fn from_name(name: &str) -> Option<ClassId> {
        ClassId::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One annotated object instance in one video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRecord {
    pub video_id: u32,
    pub frame: u32,
    pub track_id: u32,
    pub bbox: BoundingBox,
    pub class: ClassId,
}

/// One predicted object instance in one video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub video_id: u32,
    pub frame: u32,
    pub bbox: BoundingBox,
    pub class: ClassId,
    pub confidence: f64,
}

/// Per-class instance counts; every class is present, zero allowed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClassHistogram {
    counts: [u64; 7],
}

impl ClassHistogram {
    pub fn get(&self, class: ClassId) -> u64 {
        self.counts[class.index()]
    }

    pub fn set(&mut self, class: ClassId, count: u64) {
        self.counts[class.index()] = count;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn max_count(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClassId, u64)> + '_ {
        ClassId::ALL.into_iter().map(|c| (c, self.get(c)))
    }
}

/// How parsers treat boxes that violate frame geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Out-of-frame boxes are clipped to the frame and flagged.
    #[default]
    Lenient,
    /// Out-of-frame boxes are rejected with an error.
    Strict,
}

/// Parse result: records in file order, plus the 1-based line numbers whose
/// boxes were clipped in lenient mode.
#[derive(Debug, Clone)]
pub struct ParseOutcome<T> {
    pub records: Vec<T>,
    pub clipped_lines: Vec<usize>,
}

fn split_fields(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_number(line: usize, field: usize, name: &'static str, value: &str) -> Result<f64> {
    value.parse::<f64>().map_err(|_| {
        Error::parse(
            line,
            ParseErrorKind::Number {
                field,
                name,
                value: value.to_string(),
            },
        )
    })
}

fn parse_int(line: usize, field: usize, name: &'static str, value: &str) -> Result<i64> {
    let real = parse_number(line, field, name, value)?;
    if real.fract() != 0.0 || !real.is_finite() {
        return Err(Error::parse(
            line,
            ParseErrorKind::Number {
                field,
                name,
                value: value.to_string(),
            },
        ));
    }
    Ok(real as i64)
}

struct LineContext {
    video_id: u32,
    frame: u32,
}

fn parse_identity(line_no: usize, fields: &[&str]) -> Result<LineContext> {
    let video = parse_int(line_no, 1, "video_id", fields[0])?;
    if !(1..=100).contains(&video) {
        return Err(Error::parse(line_no, ParseErrorKind::VideoId(video)));
    }
    let frame = parse_int(line_no, 2, "frame", fields[1])?;
    if frame < 1 {
        return Err(Error::parse(line_no, ParseErrorKind::FrameNumber(frame)));
    }
    Ok(LineContext {
        video_id: video as u32,
        frame: frame as u32,
    })
}

/// Parse a box from four consecutive fields, applying mode rules.
/// Returns the box and whether it was clipped.
fn parse_box(
    line_no: usize,
    fields: &[&str],
    first_field: usize,
    geometry: &FrameGeometry,
    mode: ParseMode,
) -> Result<(BoundingBox, bool)> {
    let names = ["bb_left", "bb_top", "bb_width", "bb_height"];
    let mut vals = [0.0f64; 4];
    for (i, name) in names.iter().enumerate() {
        vals[i] = parse_number(line_no, first_field + i, name, fields[first_field + i - 1])?;
    }
    let bbox = BoundingBox::new(vals[0], vals[1], vals[2], vals[3]);
    if !bbox.is_valid() {
        return Err(Error::parse(
            line_no,
            ParseErrorKind::NonPositiveSize {
                width: bbox.width,
                height: bbox.height,
            },
        ));
    }
    if bbox.fits_in(geometry) {
        return Ok((bbox, false));
    }
    match mode {
        ParseMode::Strict => Err(Error::parse(
            line_no,
            ParseErrorKind::OutOfFrame {
                left: bbox.left,
                top: bbox.top,
                width: bbox.width,
                height: bbox.height,
                frame_width: geometry.width,
                frame_height: geometry.height,
            },
        )),
        ParseMode::Lenient => match bbox.clip_to(geometry) {
            Some(clipped) => Ok((clipped, true)),
            None => Err(Error::parse(
                line_no,
                ParseErrorKind::OutOfFrame {
                    left: bbox.left,
                    top: bbox.top,
                    width: bbox.width,
                    height: bbox.height,
                    frame_width: geometry.width,
                    frame_height: geometry.height,
                },
            )),
        },
    }
}

fn parse_class(line_no: usize, field: usize, value: &str) -> Result<ClassId> {
    let id = parse_int(line_no, field, "class", value)?;
    ClassId::from_id(id).ok_or_else(|| Error::parse(line_no, ParseErrorKind::ClassId(id)))
}

/// Iterate non-empty lines with their 1-based numbers, tolerating CRLF.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

/// Parse ground-truth text: `video,frame,track,left,top,width,height,class`.
pub fn parse_ground_truth(
    text: &str,
    geometry: &FrameGeometry,
    mode: ParseMode,
) -> Result<ParseOutcome<GroundTruthRecord>> {
    let mut records = Vec::new();
    let mut clipped_lines = Vec::new();
    for (line_no, line) in content_lines(text) {
        let fields = split_fields(line);
        if fields.len() != 8 {
            return Err(Error::parse(
                line_no,
                ParseErrorKind::FieldCount {
                    expected: 8,
                    found: fields.len(),
                },
            ));
        }
        let id = parse_identity(line_no, &fields)?;
        let track = parse_int(line_no, 3, "track_id", fields[2])?;
        if track < 0 {
            return Err(Error::parse(line_no, ParseErrorKind::TrackId(track)));
        }
        let (bbox, clipped) = parse_box(line_no, &fields, 4, geometry, mode)?;
        let class = parse_class(line_no, 8, fields[7])?;
        if clipped {
            clipped_lines.push(line_no);
        }
        records.push(GroundTruthRecord {
            video_id: id.video_id,
            frame: id.frame,
            track_id: track as u32,
            bbox,
            class,
        });
    }
    Ok(ParseOutcome {
        records,
        clipped_lines,
    })
}

/// Parse detection text: `video,frame,left,top,width,height,class,confidence`.
pub fn parse_detections(
    text: &str,
    geometry: &FrameGeometry,
    mode: ParseMode,
) -> Result<ParseOutcome<DetectionRecord>> {
    let mut records = Vec::new();
    let mut clipped_lines = Vec::new();
    for (line_no, line) in content_lines(text) {
        let fields = split_fields(line);
        if fields.len() != 8 {
            return Err(Error::parse(
                line_no,
                ParseErrorKind::FieldCount {
                    expected: 8,
                    found: fields.len(),
                },
            ));
        }
        let id = parse_identity(line_no, &fields)?;
        let (bbox, clipped) = parse_box(line_no, &fields, 3, geometry, mode)?;
        let class = parse_class(line_no, 7, fields[6])?;
        let confidence = parse_number(line_no, 8, "confidence", fields[7])?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::parse(
                line_no,
                ParseErrorKind::Confidence(confidence),
            ));
        }
        if clipped {
            clipped_lines.push(line_no);
        }
        records.push(DetectionRecord {
            video_id: id.video_id,
            frame: id.frame,
            bbox,
            class,
            confidence,
        });
    }
    Ok(ParseOutcome {
        records,
        clipped_lines,
    })
}

/// Shortest decimal form that parses back to the same value; integers print
/// without a decimal point.
pub fn format_number(value: f64) -> String {
    format!("{value}")
}

/// Render detections as comma-separated lines, LF-terminated, in input order.
/// `parse_detections(serialize_detections(r))` reproduces `r` field-for-field.
pub fn serialize_detections(records: &[DetectionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.video_id,
            r.frame,
            format_number(r.bbox.left),
            format_number(r.bbox.top),
            format_number(r.bbox.width),
            format_number(r.bbox.height),
            r.class.id(),
            format_number(r.confidence),
        ));
    }
    out
}

/// Render ground-truth records as comma-separated lines, LF-terminated.
pub fn serialize_ground_truth(records: &[GroundTruthRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.video_id,
            r.frame,
            r.track_id,
            format_number(r.bbox.left),
            format_number(r.bbox.top),
            format_number(r.bbox.width),
            format_number(r.bbox.height),
            r.class.id(),
        ));
    }
    out
}

/// Count records per class; classes with no records report 0.
pub fn class_histogram(records: &[GroundTruthRecord]) -> ClassHistogram {
    let mut histogram = ClassHistogram::default();
    for r in records {
        histogram.counts[r.class.index()] += 1;
    }
    histogram
}

/// Merge model predictions with manual corrections into a label set.
///
/// For every (video, frame) that appears in `manual_overrides`, only the
/// override records are emitted. For all other frames, predictions with
/// confidence at or above `confidence_floor` are promoted to ground truth,
/// with track ids assigned sequentially per frame starting at 0. Output is
/// sorted by (video, frame).
pub fn reconcile_labels(
    predictions: &[DetectionRecord],
    manual_overrides: &[GroundTruthRecord],
    confidence_floor: f64,
) -> Vec<GroundTruthRecord> {
    let override_frames: HashSet<(u32, u32)> = manual_overrides
        .iter()
        .map(|r| (r.video_id, r.frame))
        .collect();

    let mut by_frame: BTreeMap<(u32, u32), Vec<GroundTruthRecord>> = BTreeMap::new();
    for r in manual_overrides {
        by_frame
            .entry((r.video_id, r.frame))
            .or_default()
            .push(r.clone());
    }
    let mut next_track: HashMap<(u32, u32), u32> = HashMap::new();
    for p in predictions {
        let key = (p.video_id, p.frame);
        if override_frames.contains(&key) || p.confidence < confidence_floor {
            continue;
        }
        let track = next_track.entry(key).or_insert(0);
        by_frame.entry(key).or_default().push(GroundTruthRecord {
            video_id: p.video_id,
            frame: p.frame,
            track_id: *track,
            bbox: p.bbox,
            class: p.class,
        });
        *track += 1;
    }
    by_frame.into_values().flatten().collect()
}

/// One reported problem, pointing at a record (1-based position).
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

/// Violation counts by kind plus per-line diagnostics. Validation never
/// mutates its input.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub records: usize,
    pub out_of_frame: usize,
    pub nonpositive_size: usize,
    pub duplicate_keys: usize,
    pub invalid_class: usize,
    pub malformed_lines: usize,
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn total_violations(&self) -> usize {
        self.out_of_frame
            + self.nonpositive_size
            + self.duplicate_keys
            + self.invalid_class
            + self.malformed_lines
    }
}

/// Check typed ground-truth records against a frame geometry: out-of-frame
/// or non-positive boxes and duplicate (video, frame, track) keys.
pub fn validate(records: &[GroundTruthRecord], geometry: &FrameGeometry) -> ValidationReport {
    let mut report = ValidationReport {
        records: records.len(),
        ..ValidationReport::default()
    };
    let mut seen: HashSet<(u32, u32, u32)> = HashSet::new();
    for (i, r) in records.iter().enumerate() {
        let line = i + 1;
        if !r.bbox.is_valid() {
            report.nonpositive_size += 1;
            report.diagnostics.push(Diagnostic {
                line,
                message: format!(
                    "non-positive box size {} x {}",
                    format_number(r.bbox.width),
                    format_number(r.bbox.height)
                ),
            });
        } else if !r.bbox.fits_in(geometry) {
            report.out_of_frame += 1;
            report.diagnostics.push(Diagnostic {
                line,
                message: format!(
                    "box ({}, {}, {}, {}) exceeds the {}x{} frame",
                    format_number(r.bbox.left),
                    format_number(r.bbox.top),
                    format_number(r.bbox.width),
                    format_number(r.bbox.height),
                    geometry.width,
                    geometry.height
                ),
            });
        }
        if !seen.insert((r.video_id, r.frame, r.track_id)) {
            report.duplicate_keys += 1;
            report.diagnostics.push(Diagnostic {
                line,
                message: format!(
                    "duplicate key (video {}, frame {}, track {})",
                    r.video_id, r.frame, r.track_id
                ),
            });
        }
    }
    report
}

/// Which record schema a text file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    GroundTruth,
    Detections,
}

/// Line-by-line scan of raw text, collecting every violation instead of
/// stopping at the first. Backs the `validate` CLI command, where the input
/// may contain class ids or confidences that typed records cannot represent.
pub fn validate_text(text: &str, kind: RecordKind, geometry: &FrameGeometry) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen: HashSet<(u32, u32, u32)> = HashSet::new();
    for (line_no, line) in content_lines(text) {
        report.records += 1;
        let single = match kind {
            RecordKind::GroundTruth => parse_ground_truth(line, geometry, ParseMode::Strict),
            RecordKind::Detections => {
                parse_detections(line, geometry, ParseMode::Strict).map(|o| ParseOutcome {
                    records: o
                        .records
                        .into_iter()
                        .map(|d| GroundTruthRecord {
                            video_id: d.video_id,
                            frame: d.frame,
                            track_id: 0,
                            bbox: d.bbox,
                            class: d.class,
                        })
                        .collect(),
                    clipped_lines: o.clipped_lines,
                })
            }
        };
        match single {
            Ok(outcome) => {
                if kind == RecordKind::GroundTruth {
                    let r = &outcome.records[0];
                    if !seen.insert((r.video_id, r.frame, r.track_id)) {
                        report.duplicate_keys += 1;
                        report.diagnostics.push(Diagnostic {
                            line: line_no,
                            message: format!(
                                "duplicate key (video {}, frame {}, track {})",
                                r.video_id, r.frame, r.track_id
                            ),
                        });
                    }
                }
            }
            Err(Error::Parse { kind: pk, .. }) => {
                match pk {
                    ParseErrorKind::OutOfFrame { .. } => report.out_of_frame += 1,
                    ParseErrorKind::NonPositiveSize { .. } => report.nonpositive_size += 1,
                    ParseErrorKind::ClassId(_) => report.invalid_class += 1,
                    _ => report.malformed_lines += 1,
                }
                report.diagnostics.push(Diagnostic {
                    line: line_no,
                    message: pk.to_string(),
                });
            }
            Err(e) => {
                report.malformed_lines += 1;
                report.diagnostics.push(Diagnostic {
                    line: line_no,
                    message: e.to_string(),
                });
            }
        }
    }
    report
}
