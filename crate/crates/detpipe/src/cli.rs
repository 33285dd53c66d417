//! Command-line entry points: `evaluate`, `evolve`, `sample`, `fuse`,
//! `validate`, and `report`.
//!
//! Exit codes are a stable contract: 0 success, 1 internal error, 2 input
//! or usage error. Commands never mutate their inputs; all outputs land
//! under the `--out` directory, together with a `manifest.txt` recording
//! the toolkit version, the resolved configuration, per-stage counts, and
//! timing, enough to reproduce the run.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::annotations::{
    self, parse_detections, parse_ground_truth, serialize_detections, serialize_ground_truth,
    ClassId, DetectionRecord, FrameGeometry, GroundTruthRecord, ParseMode, ParseOutcome,
    RecordKind,
};
use crate::error::{Error, Result};
use crate::fusion::{self, FusionConfig, FusionMethod, ModelOutput};
use crate::ga::{
    self, EvaluatorCommand, EvolutionConfig, EvolutionLog, EvolveOptions, HyperparamSpace,
};
use crate::metrics::{self, EvalParams};
use crate::sampling::{self, AugmentSpec, FrameRef, SimilaritySource, SimilarityTable, SplitSpec};

#[derive(Parser)]
#[command(
    name = "detpipe",
    version,
    about = "Detection-pipeline toolkit: evaluate, evolve, sample, fuse, validate, report"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a detection file against ground truth and emit report files.
    Evaluate(EvaluateArgs),
    /// Run the genetic hyperparameter search against an external evaluator.
    Evolve(EvolveArgs),
    /// Plan dataset composition: dedup, background discard, split, balance.
    Sample(SampleArgs),
    /// Merge detection files from several models into one.
    Fuse(FuseArgs),
    /// Scan an annotation or detection file for violations.
    Validate(ValidateArgs),
    /// Compare the summaries of stored evaluation runs.
    Report(ReportArgs),
}

#[derive(Args)]
struct GeometryArgs {
    /// Frame width in pixels.
    #[arg(long, default_value_t = 1920)]
    width: u32,
    /// Frame height in pixels.
    #[arg(long, default_value_t = 1080)]
    height: u32,
    /// Source frame rate.
    #[arg(long, default_value_t = 10.0)]
    fps: f64,
}

impl GeometryArgs {
    fn geometry(&self) -> Result<FrameGeometry> {
        FrameGeometry::new(self.width, self.height, self.fps)
    }
}

#[derive(Args)]
struct EvaluateArgs {
    /// Ground-truth file.
    #[arg(long)]
    gt: PathBuf,
    /// Detection file.
    #[arg(long)]
    det: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// IoU threshold for the point metrics and the confusion matrix.
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    /// Confidence at which precision/recall/F1 are reported.
    #[arg(long, default_value_t = 0.25)]
    conf: f64,
    /// Reject out-of-frame boxes instead of clipping them.
    #[arg(long)]
    strict: bool,
    /// Also write a row-normalized confusion matrix.
    #[arg(long)]
    normalize_confusion: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    geometry: GeometryArgs,
}

#[derive(Args)]
struct EvolveArgs {
    /// Output directory (log, best hyperparameters, scatter export).
    #[arg(long)]
    out: PathBuf,
    /// Space file of `name lower upper gain initial` lines; the built-in
    /// 29-gene space is used when omitted.
    #[arg(long)]
    space: Option<PathBuf>,
    /// Shell command template run per candidate; `{hyp}`, `{metrics}` and
    /// `{workdir}` are substituted.
    #[arg(long)]
    evaluator_cmd: String,
    #[arg(long, default_value_t = 200)]
    generations: u32,
    #[arg(long, default_value_t = 1)]
    population: u32,
    /// Parent pool size (selection among the best N).
    #[arg(long, default_value_t = 5)]
    pool: usize,
    #[arg(long, default_value_t = 0.8)]
    mutation_prob: f64,
    #[arg(long, default_value_t = 0.2)]
    mutation_sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Concurrent candidate evaluations within a generation.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Continue from the log in the output directory instead of starting
    /// fresh; the space, seed, and parameters must match the original run.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct SampleArgs {
    /// Ground-truth file.
    #[arg(long)]
    gt: PathBuf,
    /// Output directory (train/val files plus the plan manifest).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Enable near-duplicate removal at this similarity threshold.
    #[arg(long)]
    dup_threshold: Option<f64>,
    /// External similarity table (`video frame_a frame_b similarity` lines);
    /// annotation-derived similarity is used when omitted.
    #[arg(long)]
    similarity: Option<PathBuf>,
    /// Enable background discard, keeping this fraction of unannotated
    /// frames.
    #[arg(long)]
    keep_background: Option<f64>,
    /// Train video ids, e.g. `1-90,100`.
    #[arg(long, default_value = "1-90,100")]
    train_videos: String,
    /// Validation video ids, e.g. `91-99`.
    #[arg(long, default_value = "91-99")]
    val_videos: String,
    /// Augmentations for minority-class oversampling (`flip`, `rot:<deg>`);
    /// repeatable.
    #[arg(long)]
    oversample: Vec<String>,
    /// Per-class caps for undersampling, `classid=count`; repeatable.
    #[arg(long)]
    cap: Vec<String>,
    /// Reject out-of-frame boxes instead of clipping them.
    #[arg(long)]
    strict: bool,
    #[command(flatten)]
    geometry: GeometryArgs,
}

#[derive(Args)]
struct FuseArgs {
    /// Detection file; repeat once per model.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// `weighted` or `nms`.
    #[arg(long, default_value = "weighted")]
    method: String,
    #[arg(long, default_value_t = 0.55)]
    cluster_iou: f64,
    #[arg(long, default_value_t = 0.001)]
    confidence_floor: f64,
    /// Disable scaling fused confidence by the fraction of contributing
    /// models.
    #[arg(long)]
    no_count_scaling: bool,
    #[arg(long)]
    strict: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    geometry: GeometryArgs,
}

#[derive(Args)]
struct ValidateArgs {
    /// Ground-truth file to scan.
    #[arg(long, conflicts_with = "det")]
    gt: Option<PathBuf>,
    /// Detection file to scan.
    #[arg(long)]
    det: Option<PathBuf>,
    /// Optional output directory for the full report.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    geometry: GeometryArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory of a stored evaluation run (holding `summary.txt`);
    /// repeatable.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    /// Row label per input, in the same order; directory names are used
    /// when omitted.
    #[arg(long)]
    label: Vec<String>,
    /// Optional output directory for the comparison table.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Run with the process arguments; returns the exit code.
pub fn run() -> u8 {
    run_from(std::env::args())
}

/// Run with explicit arguments (the first is the program name).
pub fn run_from<I, S>(args: I) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let _ = e.print();
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Evolve(args) => cmd_evolve(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Fuse(args) => cmd_fuse(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Report(args) => cmd_report(args),
    }
}

/// Accumulates the `key: value` lines of a run manifest.
struct Manifest {
    lines: Vec<(String, String)>,
    started: Instant,
}

impl Manifest {
    fn new(command: &str, seed: u64) -> Self {
        let mut m = Manifest {
            lines: Vec::new(),
            started: Instant::now(),
        };
        m.push("toolkit_version", env!("CARGO_PKG_VERSION"));
        m.push("command", command);
        m.push("seed", seed);
        m
    }

    fn push(&mut self, key: &str, value: impl ToString) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    fn write(mut self, out_dir: &Path) -> Result<()> {
        self.push("elapsed_ms", self.started.elapsed().as_millis());
        let mut text = String::new();
        for (k, v) in &self.lines {
            text.push_str(&format!("{k}: {v}\n"));
        }
        std::fs::write(out_dir.join("manifest.txt"), text)?;
        Ok(())
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::in_file(path, e.into()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::in_file(path, e.into()))
}

fn load_ground_truth(
    path: &Path,
    geometry: &FrameGeometry,
    mode: ParseMode,
) -> Result<ParseOutcome<GroundTruthRecord>> {
    let text = read_text(path)?;
    parse_ground_truth(&text, geometry, mode).map_err(|e| Error::in_file(path, e))
}

fn load_detections(
    path: &Path,
    geometry: &FrameGeometry,
    mode: ParseMode,
) -> Result<ParseOutcome<DetectionRecord>> {
    let text = read_text(path)?;
    parse_detections(&text, geometry, mode).map_err(|e| Error::in_file(path, e))
}

fn parse_mode(strict: bool) -> ParseMode {
    if strict {
        ParseMode::Strict
    } else {
        ParseMode::Lenient
    }
}

fn ensure_out_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let geometry = args.geometry.geometry()?;
    let mode = parse_mode(args.strict);
    ensure_out_dir(&args.out)?;
    let mut manifest = Manifest::new("evaluate", args.seed);
    manifest.push("arg gt", args.gt.display());
    manifest.push("arg det", args.det.display());
    manifest.push("arg iou", args.iou);
    manifest.push("arg conf", args.conf);
    manifest.push("arg strict", args.strict);

    let gts = load_ground_truth(&args.gt, &geometry, mode)?;
    let dets = load_detections(&args.det, &geometry, mode)?;
    manifest.push("stage gt_records", gts.records.len());
    manifest.push("stage gt_clipped_lines", gts.clipped_lines.len());
    manifest.push("stage det_records", dets.records.len());
    manifest.push("stage det_clipped_lines", dets.clipped_lines.len());

    let params = EvalParams {
        iou_threshold: args.iou,
        report_confidence: args.conf,
    };
    let report = metrics::evaluate(&gts.records, &dets.records, params);

    write_text(&args.out.join("summary.txt"), &report.summary_text())?;
    write_text(
        &args.out.join("per_class_ap.csv"),
        &report.per_class_ap_csv(),
    )?;
    write_text(&args.out.join("curve_all.csv"), &report.curve_csv(None))?;
    for class in ClassId::ALL {
        write_text(
            &args.out.join(format!("curve_{}.csv", class.name())),
            &report.curve_csv(Some(class)),
        )?;
    }
    write_text(
        &args.out.join("confusion_matrix.csv"),
        &report.confusion.to_csv(false),
    )?;
    if args.normalize_confusion {
        write_text(
            &args.out.join("confusion_matrix_normalized.csv"),
            &report.confusion.to_csv(true),
        )?;
    }
    manifest.push(
        "result map50",
        crate::annotations::format_number(report.map50),
    );
    manifest.push(
        "result map50_95",
        crate::annotations::format_number(report.map50_95),
    );
    manifest.write(&args.out)?;
    println!("{}", report.summary_text().trim_end());
    Ok(())
}

fn cmd_evolve(args: EvolveArgs) -> Result<()> {
    ensure_out_dir(&args.out)?;
    let space = match &args.space {
        Some(path) => {
            HyperparamSpace::parse(&read_text(path)?).map_err(|e| Error::in_file(path, e))?
        }
        None => HyperparamSpace::builtin_default(),
    };
    let config = EvolutionConfig {
        generations: args.generations,
        population_per_generation: args.population,
        parent_pool: args.pool,
        mutation_probability: args.mutation_prob,
        mutation_sigma: args.mutation_sigma,
        seed: args.seed,
        ..EvolutionConfig::default()
    };

    let mut manifest = Manifest::new("evolve", args.seed);
    manifest.push(
        "arg space",
        args.space
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "<builtin>".to_string()),
    );
    manifest.push("arg evaluator_cmd", &args.evaluator_cmd);
    manifest.push("arg generations", args.generations);
    manifest.push("arg population", args.population);
    manifest.push("arg pool", args.pool);
    manifest.push("arg mutation_prob", args.mutation_prob);
    manifest.push("arg mutation_sigma", args.mutation_sigma);
    manifest.push("arg jobs", args.jobs);
    manifest.push("arg resume", args.resume);

    let log_path = args.out.join("log.csv");
    let resume = if args.resume && log_path.exists() {
        let log = EvolutionLog::parse_csv(&read_text(&log_path)?, &space)
            .map_err(|e| Error::in_file(&log_path, e))?;
        manifest.push("stage resumed_entries", log.entries.len());
        Some(log)
    } else {
        None
    };

    let work_dir = args.out.join("work");
    let command = EvaluatorCommand {
        template: args.evaluator_cmd.clone(),
        workdir: work_dir,
    };
    let evaluator =
        |id: ga::CandidateId, values: &[f64]| -> std::result::Result<(f64, f64), String> {
            ga::run_candidate(&space, values, &command, &id.tag()).map_err(|e| e.to_string())
        };
    let outcome = ga::evolve(
        &space,
        &config,
        evaluator,
        EvolveOptions {
            jobs: args.jobs,
            resume,
        },
    )?;

    write_text(&log_path, &outcome.log.to_csv(&space))?;
    write_text(
        &args.out.join("best.hyp"),
        &ga::hyp_file_text(&space, &outcome.best.values),
    )?;
    write_text(&args.out.join("space.txt"), &space.to_text())?;
    let scatter = ga::export_scatter(&outcome.log, &space)?;
    write_text(&args.out.join("scatter.csv"), &scatter.rows_csv())?;
    write_text(&args.out.join("scatter_best.csv"), &scatter.best_csv())?;

    let failed = outcome.log.entries.iter().filter(|e| e.failed).count();
    manifest.push("stage evaluated", outcome.log.entries.len());
    manifest.push("stage failed", failed);
    manifest.push(
        "result best_fitness",
        crate::annotations::format_number(outcome.best.fitness.unwrap_or(0.0)),
    );
    manifest.push("result best_generation", outcome.best.generation);
    manifest.write(&args.out)?;
    println!(
        "best fitness {} at generation {} ({} candidates evaluated, {} failed)",
        crate::annotations::format_number(outcome.best.fitness.unwrap_or(0.0)),
        outcome.best.generation,
        outcome.log.entries.len(),
        failed
    );
    Ok(())
}

fn parse_video_set(spec: &str) -> Result<BTreeSet<u32>> {
    let mut out = BTreeSet::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u32 = a
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad video range {part:?}")))?;
                let b: u32 = b
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad video range {part:?}")))?;
                if a > b {
                    return Err(Error::Config(format!("empty video range {part:?}")));
                }
                out.extend(a..=b);
            }
            None => {
                let v: u32 = part
                    .parse()
                    .map_err(|_| Error::Config(format!("bad video id {part:?}")))?;
                out.insert(v);
            }
        }
    }
    Ok(out)
}

fn parse_caps(specs: &[String]) -> Result<BTreeMap<ClassId, u64>> {
    let mut caps = BTreeMap::new();
    for spec in specs {
        let (class, count) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("bad cap {spec:?}, expected classid=count")))?;
        let id: i64 = class
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad cap class {class:?}")))?;
        let class = ClassId::from_id(id)
            .ok_or_else(|| Error::Config(format!("cap class id {id} outside 1..7")))?;
        let count: u64 = count
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad cap count {count:?}")))?;
        if count == 0 {
            return Err(Error::Config("cap counts must be positive".into()));
        }
        caps.insert(class, count);
    }
    Ok(caps)
}

fn cmd_sample(args: SampleArgs) -> Result<()> {
    let geometry = args.geometry.geometry()?;
    let mode = parse_mode(args.strict);
    ensure_out_dir(&args.out)?;
    let mut manifest = Manifest::new("sample", args.seed);
    manifest.push("arg gt", args.gt.display());
    manifest.push("arg train_videos", &args.train_videos);
    manifest.push("arg val_videos", &args.val_videos);

    let parsed = load_ground_truth(&args.gt, &geometry, mode)?;
    let records = parsed.records;
    manifest.push("stage parsed_records", records.len());

    // The frame universe runs to each video's highest annotated frame;
    // frames in between with no records are background.
    let mut max_frame: BTreeMap<u32, u32> = BTreeMap::new();
    for r in &records {
        let e = max_frame.entry(r.video_id).or_insert(0);
        *e = (*e).max(r.frame);
    }
    let mut frames: Vec<FrameRef> = Vec::new();
    for (&video, &last) in &max_frame {
        frames.extend((1..=last).map(|f| FrameRef::new(video, f)));
    }
    let annotated: BTreeSet<FrameRef> = records
        .iter()
        .map(|r| FrameRef::new(r.video_id, r.frame))
        .collect();
    manifest.push("stage universe_frames", frames.len());
    manifest.push("stage annotated_frames", annotated.len());

    let mut provenance: Vec<String> = Vec::new();
    let mut dropped: Vec<sampling::DropNote> = Vec::new();

    // Near-duplicate removal over annotated frames only; background frames
    // pass through to the discard stage untouched.
    if let Some(threshold) = args.dup_threshold {
        manifest.push("arg dup_threshold", threshold);
        let table;
        let source = match &args.similarity {
            Some(path) => {
                table = SimilarityTable::parse(&read_text(path)?)
                    .map_err(|e| Error::in_file(path, e))?;
                SimilaritySource::Table(&table)
            }
            None => SimilaritySource::Annotations(&records),
        };
        let annotated_in_order: Vec<FrameRef> = frames
            .iter()
            .filter(|f| annotated.contains(f))
            .copied()
            .collect();
        let kept = sampling::near_duplicate_filter(&annotated_in_order, &source, threshold)?;
        let kept_set: BTreeSet<FrameRef> = kept.iter().copied().collect();
        let before = frames.len();
        for f in &annotated_in_order {
            if !kept_set.contains(f) {
                dropped.push(sampling::DropNote {
                    frame: *f,
                    reason: format!("near-duplicate at threshold {threshold}"),
                });
            }
        }
        frames.retain(|f| !annotated.contains(f) || kept_set.contains(f));
        provenance.push(format!(
            "near-duplicate filter: {} -> {} frames (threshold {threshold})",
            before,
            frames.len()
        ));
        manifest.push("stage after_dedup", frames.len());
    }

    if let Some(keep_fraction) = args.keep_background {
        manifest.push("arg keep_background", keep_fraction);
        let before = frames.len();
        let kept = sampling::discard_background(&frames, &annotated, keep_fraction, args.seed)?;
        let kept_set: BTreeSet<FrameRef> = kept.iter().copied().collect();
        for f in &frames {
            if !kept_set.contains(f) {
                dropped.push(sampling::DropNote {
                    frame: *f,
                    reason: format!("background discard (keep {keep_fraction})"),
                });
            }
        }
        frames = kept;
        provenance.push(format!(
            "background discard: {} -> {} frames (keep {keep_fraction})",
            before,
            frames.len()
        ));
        manifest.push("stage after_background_discard", frames.len());
    }

    let split = SplitSpec::new(
        parse_video_set(&args.train_videos)?,
        parse_video_set(&args.val_videos)?,
    )?;
    let (mut train_frames, val_frames) = sampling::split_train_val(&frames, &split)?;
    provenance.push(format!(
        "train/val split: {} train frames, {} val frames",
        train_frames.len(),
        val_frames.len()
    ));
    manifest.push("stage train_frames", train_frames.len());
    manifest.push("stage val_frames", val_frames.len());

    let frame_of = |r: &GroundTruthRecord| FrameRef::new(r.video_id, r.frame);
    let train_set: BTreeSet<FrameRef> = train_frames.iter().copied().collect();
    let mut train_records: Vec<GroundTruthRecord> = records
        .iter()
        .filter(|r| train_set.contains(&frame_of(r)))
        .cloned()
        .collect();

    let mut augmented: Vec<sampling::AugmentedFrame> = Vec::new();
    if !args.oversample.is_empty() {
        manifest.push("arg oversample", args.oversample.join(","));
        let specs: Vec<AugmentSpec> = args
            .oversample
            .iter()
            .map(|s| AugmentSpec::parse(s))
            .collect::<Result<_>>()?;
        let histogram = annotations::class_histogram(&train_records);
        let minority = sampling::default_minority_classes(&histogram);
        let plan = sampling::oversample_plan(
            &train_records,
            &histogram,
            &minority,
            &specs,
            args.seed,
            &geometry,
        );
        manifest.push("stage augmented_copies", plan.augmented.len());
        provenance.extend(plan.provenance.clone());
        augmented = plan.augmented;
        dropped.extend(plan.dropped);
    }

    if !args.cap.is_empty() {
        manifest.push("arg cap", args.cap.join(","));
        let caps = parse_caps(&args.cap)?;
        let before = train_frames.len();
        let plan = sampling::undersample_plan(&train_records, &caps, args.seed);
        let kept_set: BTreeSet<FrameRef> = plan.kept_frames.iter().copied().collect();
        train_frames.retain(|f| !annotated.contains(f) || kept_set.contains(f));
        train_records.retain(|r| kept_set.contains(&frame_of(r)));
        provenance.extend(plan.provenance.clone());
        dropped.extend(plan.dropped);
        manifest.push("stage after_undersample_train_frames", train_frames.len());
        provenance.push(format!(
            "undersample: train frames {} -> {}",
            before,
            train_frames.len()
        ));
    }

    let val_records: Vec<GroundTruthRecord> = {
        let val_set: BTreeSet<FrameRef> = val_frames.iter().copied().collect();
        records
            .iter()
            .filter(|r| val_set.contains(&frame_of(r)))
            .cloned()
            .collect()
    };
    manifest.push("stage train_records", train_records.len());
    manifest.push("stage val_records", val_records.len());

    write_text(
        &args.out.join("train.txt"),
        &serialize_ground_truth(&train_records),
    )?;
    write_text(
        &args.out.join("val.txt"),
        &serialize_ground_truth(&val_records),
    )?;
    if !augmented.is_empty() {
        let mut aug_records = Vec::new();
        for a in &augmented {
            aug_records.extend(a.records.iter().cloned());
        }
        write_text(
            &args.out.join("augmented.txt"),
            &serialize_ground_truth(&aug_records),
        )?;
    }

    let mut kept_frames = train_frames.clone();
    kept_frames.extend(val_frames.iter().copied());
    kept_frames.sort_unstable();
    let plan = sampling::SamplingPlan {
        kept_frames,
        augmented,
        dropped,
        seed: args.seed,
        provenance,
    };
    write_text(&args.out.join("plan.txt"), &plan.to_manifest())?;
    manifest.write(&args.out)?;
    println!(
        "train: {} records, val: {} records, plan: {}",
        train_records.len(),
        val_records.len(),
        args.out.join("plan.txt").display()
    );
    Ok(())
}

fn cmd_fuse(args: FuseArgs) -> Result<()> {
    let geometry = args.geometry.geometry()?;
    let mode = parse_mode(args.strict);
    ensure_out_dir(&args.out)?;
    let mut manifest = Manifest::new("fuse", args.seed);
    manifest.push("arg method", &args.method);
    manifest.push("arg cluster_iou", args.cluster_iou);
    manifest.push("arg confidence_floor", args.confidence_floor);
    manifest.push("arg count_scaling", !args.no_count_scaling);

    let config = FusionConfig {
        method: FusionMethod::parse(&args.method)?,
        cluster_iou: args.cluster_iou,
        confidence_floor: args.confidence_floor,
        count_scaling: !args.no_count_scaling,
    };
    let mut outputs = Vec::with_capacity(args.input.len());
    for path in &args.input {
        let parsed = load_detections(path, &geometry, mode)?;
        manifest.push(
            &format!("stage input[{}] {}", outputs.len(), path.display()),
            parsed.records.len(),
        );
        outputs.push(ModelOutput::new(path.display().to_string(), parsed.records));
    }
    let fused = fusion::fuse(&outputs, &config)?;
    manifest.push("stage fused_records", fused.len());
    write_text(&args.out.join("fused.txt"), &serialize_detections(&fused))?;
    manifest.write(&args.out)?;
    println!(
        "fused {} model outputs into {} detections",
        outputs.len(),
        fused.len()
    );
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let geometry = args.geometry.geometry()?;
    let (path, kind) = match (&args.gt, &args.det) {
        (Some(p), None) => (p, RecordKind::GroundTruth),
        (None, Some(p)) => (p, RecordKind::Detections),
        _ => {
            return Err(Error::Config(
                "validate needs exactly one of --gt or --det".into(),
            ))
        }
    };
    let text = read_text(path)?;
    let report = annotations::validate_text(&text, kind, &geometry);

    let mut out = String::new();
    out.push_str(&format!("file: {}\n", path.display()));
    out.push_str(&format!("records: {}\n", report.records));
    out.push_str(&format!("violations: {}\n", report.total_violations()));
    out.push_str(&format!("out_of_frame: {}\n", report.out_of_frame));
    out.push_str(&format!("nonpositive_size: {}\n", report.nonpositive_size));
    out.push_str(&format!("duplicate_keys: {}\n", report.duplicate_keys));
    out.push_str(&format!("invalid_class: {}\n", report.invalid_class));
    out.push_str(&format!("malformed_lines: {}\n", report.malformed_lines));
    for d in &report.diagnostics {
        out.push_str(&format!("line {}: {}\n", d.line, d.message));
    }
    print!("{out}");
    if let Some(dir) = &args.out {
        ensure_out_dir(dir)?;
        write_text(&dir.join("validation.txt"), &out)?;
        let mut manifest = Manifest::new("validate", 0);
        manifest.push("arg file", path.display());
        manifest.push("stage records", report.records);
        manifest.push("stage violations", report.total_violations());
        manifest.write(dir)?;
    }
    Ok(())
}

fn read_summary(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = read_text(path)?;
    let mut map = BTreeMap::new();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once(':') {
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(map)
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    if !args.label.is_empty() && args.label.len() != args.input.len() {
        return Err(Error::Config(format!(
            "{} labels for {} inputs",
            args.label.len(),
            args.input.len()
        )));
    }
    let columns = ["precision", "recall", "map50", "map50_95", "f1"];
    let mut rows: Vec<(String, BTreeMap<String, String>)> = Vec::new();
    for (i, dir) in args.input.iter().enumerate() {
        let label = args.label.get(i).cloned().unwrap_or_else(|| {
            dir.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| dir.display().to_string())
        });
        let summary = read_summary(&dir.join("summary.txt"))?;
        rows.push((label, summary));
    }

    let label_width = rows
        .iter()
        .map(|(l, _)| l.len())
        .chain(std::iter::once("run".len()))
        .max()
        .unwrap_or(3);
    // Values are rounded for the grid; the stored summaries keep full
    // precision.
    let rounded = |summary: &BTreeMap<String, String>, key: &str| -> String {
        match summary.get(key).and_then(|v| v.parse::<f64>().ok()) {
            Some(v) => format!("{v:.4}"),
            None => "-".to_string(),
        }
    };
    let mut table = format!("{:label_width$}", "run");
    for c in columns {
        table.push_str(&format!("  {c:>9}"));
    }
    table.push('\n');
    for (label, summary) in &rows {
        table.push_str(&format!("{label:label_width$}"));
        for c in columns {
            table.push_str(&format!("  {:>9}", rounded(summary, c)));
        }
        table.push('\n');
    }
    print!("{table}");
    if let Some(dir) = &args.out {
        ensure_out_dir(dir)?;
        write_text(&dir.join("comparison.txt"), &table)?;
        let mut manifest = Manifest::new("report", 0);
        for (i, input) in args.input.iter().enumerate() {
            manifest.push(&format!("arg input[{i}]"), input.display());
        }
        manifest.push("stage runs", rows.len());
        manifest.write(dir)?;
    }
    Ok(())
}
