//! Command-line front end. Each subcommand wraps one library stage, reads and
//! writes the JSON Lines artifacts, and prints a one-line summary.
//!
//! Settings resolve as command-line flag, then `--config` TOML file, then the
//! built-in default.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::backends::{synthesize_detections, write_frame_detections, OracleBackend, SyntheticScenario};
use crate::dataset::{
    assign_cells, build_grid, derive_seed, export_split, label_path_for, parse_label_line, rebalance_frames,
    sample_frames, SampleTargets, SamplingConfig, DEFAULT_GUTTER, DEFAULT_MAX_ATTEMPTS, DEFAULT_MIN_CELL,
    DEFAULT_MIN_VISIBLE_FRACTION, DEFAULT_PERCENTILE, DEFAULT_TRAIN_RATIO,
};
use crate::detection::{Annotation, ClassId, Detection};
use crate::error::{Error, Result};
use crate::image_store::{self, read_frame, ImageSource, RasterImage};
use crate::io::{read_annotations, read_jsonl, write_file, write_jsonl, DetectionRecord, SplitRecord};
use crate::metrics::{build_report, IouRange, MatchConfig, ReportConfig, RowLabel};
use crate::nms::{custom_nms, NmsConfig};
use crate::overlay::{render_overlay, OverlayStyle};
use crate::pipeline::{infer_plan, read_detections_file, write_detections, DetectionsFile};
use crate::tiler::{plan_frames, FramePlan, TilingConfig, DEFAULT_OVERLAP, DEFAULT_TILE};
use crate::tune::{sweep_multi, write_sweep, Axis, Objective, SweepSpec, TuneImage};

#[derive(Debug, Parser)]
#[command(name = "largedet", version, about = "Sliding-window detection tooling for very large images")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Table,
    Json,
}

#[derive(Debug, Default, Args)]
pub struct GlobalOpts {
    /// TOML file with default settings (keys named like the flags, `-` as `_`)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Tile side in pixels
    #[arg(long, global = true)]
    pub tile: Option<u32>,
    /// Overlap between neighbouring tiles in pixels
    #[arg(long, global = true)]
    pub overlap: Option<u32>,
    /// Gutter between dataset grid cells in pixels
    #[arg(long, global = true)]
    pub gutter: Option<u32>,
    /// Minimum dataset grid cell side in pixels
    #[arg(long, global = true)]
    pub min_cell: Option<u32>,
    /// Confidence threshold applied before suppression
    #[arg(long, global = true)]
    pub conf: Option<f64>,
    /// IoM threshold for grouping duplicates
    #[arg(long, global = true)]
    pub iom: Option<f64>,
    /// IoU threshold for matching predictions to ground truth
    #[arg(long, global = true)]
    pub iou: Option<f64>,
    /// Seed for dataset sampling and synthetic detections
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-frame detection
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan sliding windows over an image and write the frame manifest
    Plan {
        #[arg(long, conflicts_with = "size", required_unless_present = "size")]
        image: Option<PathBuf>,
        /// Plan for WIDTHxHEIGHT without reading an image
        #[arg(long, value_parser = parse_size, requires = "image_id")]
        size: Option<(u32, u32)>,
        #[arg(long)]
        image_id: Option<String>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Write the tile canvases of a manifest as PNG files
    Extract {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Comma-separated frame indices; all frames when omitted
        #[arg(long, value_delimiter = ',')]
        frames: Vec<usize>,
    },
    /// Sample leakage-free train/validation frames and export them with labels
    Split {
        #[arg(long, required = true, num_args = 1..)]
        image: Vec<PathBuf>,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Frames to sample per image, divided between the splits
        #[arg(long)]
        frames: usize,
        #[arg(long)]
        train_ratio: Option<f64>,
        /// Fraction of a clipped box's area that must remain for it to be kept
        #[arg(long)]
        min_visible: Option<f64>,
    },
    /// Undersample overrepresented classes of an exported dataset
    Rebalance {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        percentile: Option<f64>,
        /// Which frames take part; the others are copied unchanged
        #[arg(long, value_enum, default_value_t = SplitSelection::Train)]
        split: SplitSelection,
    },
    /// Produce per-frame detections for a manifest
    Detect {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        backend: BackendKind,
        /// Stored per-frame detections (oracle backend)
        #[arg(long, required_if_eq("backend", "oracle"))]
        input: Option<PathBuf>,
        /// Ground truth to perturb (synthetic backend)
        #[arg(long, required_if_eq("backend", "synthetic"))]
        annotations: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        fn_rate: f64,
        /// Mean false positives per frame
        #[arg(long, default_value_t = 0.0)]
        fp_rate: f64,
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Translate per-frame detections to image coordinates
    Merge {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        /// Merged detections before suppression
        #[arg(long, short)]
        out: PathBuf,
        /// Also write the suppressed detections here
        #[arg(long)]
        after: Option<PathBuf>,
    },
    /// Apply confidence filtering and IoM suppression to merged detections
    Nms {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Compare detections before and after suppression against ground truth
    Eval {
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        /// Image to evaluate when the detection files do not name one
        #[arg(long)]
        image_id: Option<String>,
        /// IoU range of the mAP column as START:END in hundredths, or "none"
        #[arg(long, default_value = "50:95")]
        map_range: String,
        /// Also write the JSON report here
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Grid-search the confidence and IoM thresholds
    Tune {
        /// Merged detections before suppression, one file per image
        #[arg(long, required = true, num_args = 1..)]
        detections: Vec<PathBuf>,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// map, map50-95, map50-90, map50, f1, precision or recall
        #[arg(long, default_value = "map")]
        objective: String,
        /// Confidence axis as START:END in hundredths
        #[arg(long, default_value = "50:80")]
        c_range: String,
        /// IoM axis as START:END in hundredths
        #[arg(long, default_value = "50:95")]
        t_range: String,
        /// Grid step in hundredths
        #[arg(long, default_value_t = 5)]
        step: u32,
    },
    /// Draw detections onto an image
    Overlay {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        thickness: u32,
        #[arg(long, default_value_t = 2)]
        label_scale: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Oracle,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitSelection {
    Train,
    Validation,
    All,
}

fn parse_size(s: &str) -> std::result::Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    let w = w.parse().map_err(|e| format!("width: {e}"))?;
    let h = h.parse().map_err(|e| format!("height: {e}"))?;
    Ok((w, h))
}

fn parse_pct_range(s: &str) -> Result<(u32, u32)> {
    let bad = || Error::InvalidConfig(format!("expected START:END in hundredths, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

/// Values read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub tile: Option<u32>,
    pub overlap: Option<u32>,
    pub gutter: Option<u32>,
    pub min_cell: Option<u32>,
    pub conf: Option<f64>,
    pub iom: Option<f64>,
    pub iou: Option<f64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub format: Option<OutputFormat>,
    pub train_ratio: Option<f64>,
    pub min_visible: Option<f64>,
    pub percentile: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub tiling: TilingConfig,
    pub gutter: u32,
    pub min_cell: u32,
    pub nms: NmsConfig,
    pub matching: MatchConfig,
    pub seed: u64,
    pub jobs: usize,
    pub format: OutputFormat,
    pub train_ratio: f64,
    pub min_visible: f64,
    pub percentile: f64,
}

impl Settings {
    pub fn resolve(flags: &GlobalOpts, file: &ConfigFile) -> Result<Self> {
        let default_nms = NmsConfig::default();
        let jobs = flags
            .jobs
            .or(file.jobs)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from));
        if jobs == 0 {
            return Err(Error::InvalidConfig("--jobs must be at least 1".into()));
        }
        Ok(Self {
            tiling: TilingConfig::new(
                flags.tile.or(file.tile).unwrap_or(DEFAULT_TILE),
                flags.overlap.or(file.overlap).unwrap_or(DEFAULT_OVERLAP),
            )?,
            gutter: flags.gutter.or(file.gutter).unwrap_or(DEFAULT_GUTTER),
            min_cell: flags.min_cell.or(file.min_cell).unwrap_or(DEFAULT_MIN_CELL),
            nms: NmsConfig::new(
                flags.iom.or(file.iom).unwrap_or(default_nms.iom_threshold),
                flags.conf.or(file.conf).unwrap_or(default_nms.confidence_threshold),
            )?,
            matching: MatchConfig::new(flags.iou.or(file.iou).unwrap_or(0.5))?,
            seed: flags.seed.or(file.seed).unwrap_or(0),
            jobs,
            format: flags.format.or(file.format).unwrap_or(OutputFormat::Table),
            train_ratio: file.train_ratio.unwrap_or(DEFAULT_TRAIN_RATIO),
            min_visible: file.min_visible.unwrap_or(DEFAULT_MIN_VISIBLE_FRACTION),
            percentile: file.percentile.unwrap_or(DEFAULT_PERCENTILE),
        })
    }
}

fn require_files(paths: &[&Path]) -> Result<()> {
    for p in paths {
        fs::metadata(p).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io("<stdout>", e))
}

fn load_image(path: &Path) -> Result<RasterImage> {
    image_store::open(path)
}

/// Plan of `src` under the given tiling, checked against a manifest file.
fn checked_plan(manifest: &Path, src: &dyn ImageSource) -> Result<FramePlan> {
    let plan = FramePlan::read_manifest(manifest)?;
    if plan.image_id() != src.image_id() || plan.width() != src.width() || plan.height() != src.height() {
        return Err(Error::ManifestMismatch(format!(
            "{} describes {} ({}x{}), image is {} ({}x{})",
            manifest.display(),
            plan.image_id(),
            plan.width(),
            plan.height(),
            src.image_id(),
            src.width(),
            src.height()
        )));
    }
    Ok(plan)
}

fn same_hash(a: &DetectionsFile, b: &DetectionsFile, what: &str) -> Result<()> {
    match (&a.manifest_hash, &b.manifest_hash) {
        (Some(x), Some(y)) if x != y => Err(Error::ManifestMismatch(format!(
            "{what}: detection files come from different frame manifests ({x} vs {y})"
        ))),
        _ => Ok(()),
    }
}

fn annotations_for(all: &[Annotation], image_id: &str) -> Vec<Annotation> {
    all.iter().filter(|a| a.image_id == image_id).cloned().collect()
}

/// Runs the parsed command, writing human-readable output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let file = match &cli.global.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let s = Settings::resolve(&cli.global, &file)?;

    let summary = match &cli.command {
        Command::Plan {
            image,
            size,
            image_id,
            out: path,
        } => {
            let plan = match (image, size) {
                (Some(p), _) => {
                    require_files(&[p])?;
                    let src = load_image(p)?;
                    let id = image_id.clone().unwrap_or_else(|| src.image_id().to_owned());
                    plan_frames(&id, src.width(), src.height(), s.tiling)?
                }
                (None, Some((w, h))) => plan_frames(image_id.as_deref().unwrap_or_default(), *w, *h, s.tiling)?,
                (None, None) => return Err(Error::InvalidConfig("either --image or --size is required".into())),
            };
            plan.write_manifest(path)?;
            format!(
                "planned {} frames over {} ({}x{}, tile {}, overlap {}) -> {}",
                plan.len(),
                plan.image_id(),
                plan.width(),
                plan.height(),
                s.tiling.tile(),
                s.tiling.overlap(),
                path.display()
            )
        }

        Command::Extract {
            image,
            manifest,
            out_dir,
            frames,
        } => {
            require_files(&[image, manifest])?;
            let src = load_image(image)?;
            let plan = checked_plan(manifest, &src)?;
            let indices: Vec<usize> = if frames.is_empty() { (0..plan.len()).collect() } else { frames.clone() };
            fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
            for &i in &indices {
                let canvas = read_frame(&src, &plan, plan.frame(i)?)?;
                let path = out_dir.join(format!("{}_{i:05}.png", plan.image_id()));
                canvas
                    .save(&path)
                    .map_err(|e| Error::Encode(format!("{}: {e}", path.display())))?;
            }
            format!("extracted {} frames of {} -> {}", indices.len(), plan.image_id(), out_dir.display())
        }

        Command::Split {
            image,
            annotations,
            out_dir,
            frames,
            train_ratio,
            min_visible,
        } => {
            let mut paths: Vec<&Path> = image.iter().map(PathBuf::as_path).collect();
            paths.push(annotations);
            require_files(&paths)?;
            let anns = read_annotations(annotations)?;
            let ratio = train_ratio.unwrap_or(s.train_ratio);
            let cfg = SamplingConfig {
                tile: s.tiling.tile(),
                min_visible_fraction: min_visible.unwrap_or(s.min_visible),
                max_attempts: DEFAULT_MAX_ATTEMPTS,
            };
            let sources: Vec<RasterImage> = image.iter().map(|p| load_image(p)).collect::<Result<_>>()?;
            let mut samples = Vec::new();
            for src in &sources {
                let id = src.image_id();
                let grid = build_grid(src.width(), src.height(), s.min_cell, s.gutter)?;
                let assignment = assign_cells(&grid, ratio, derive_seed(s.seed, &format!("{id}/cells")))?;
                samples.extend(sample_frames(
                    id,
                    &grid,
                    &assignment,
                    &anns,
                    SampleTargets::from_total(*frames, ratio),
                    &cfg,
                    derive_seed(s.seed, &format!("{id}/frames")),
                )?);
            }
            let refs: Vec<&dyn ImageSource> = sources.iter().map(|s| s as &dyn ImageSource).collect();
            let summary = export_split(&samples, &refs, out_dir)?;
            let train = summary.manifest.iter().filter(|r| r.split == "train").count();
            format!(
                "exported {} frames ({} train, {} validation, {} labels) from {} images -> {}",
                summary.frames,
                train,
                summary.frames - train,
                summary.labels,
                sources.len(),
                out_dir.display()
            )
        }

        Command::Rebalance {
            dataset,
            out_dir,
            percentile,
            split,
        } => {
            let manifest_path = dataset.join("manifest.jsonl");
            require_files(&[&manifest_path])?;
            if fs::canonicalize(dataset).ok() == fs::canonicalize(out_dir).ok() {
                return Err(Error::InvalidConfig("--out-dir must differ from --dataset".into()));
            }
            let records = read_jsonl::<SplitRecord>(&manifest_path)?.values();
            let selected: Vec<bool> = records
                .iter()
                .map(|r| match split {
                    SplitSelection::All => true,
                    SplitSelection::Train => r.split == "train",
                    SplitSelection::Validation => r.split == "validation",
                })
                .collect();
            let mut classes: Vec<Vec<ClassId>> = Vec::new();
            let mut positions = Vec::new();
            for (k, r) in records.iter().enumerate().filter(|(k, _)| selected[*k]) {
                let label = dataset.join(label_path_for(&r.frame_file));
                let text = fs::read_to_string(&label).map_err(|e| Error::io(&label, e))?;
                let mut frame = Vec::new();
                for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                    // only the class matters here, so the box scale is irrelevant
                    let (c, _) = parse_label_line(line, 1).map_err(|e| Error::SchemaViolation {
                        path: label.clone(),
                        line: n + 1,
                        message: e.to_string(),
                    })?;
                    frame.push(c);
                }
                classes.push(frame);
                positions.push(k);
            }
            let plan = rebalance_frames(&classes, percentile.unwrap_or(s.percentile))?;
            let dropped: BTreeSet<usize> = {
                let kept: BTreeSet<usize> = plan.retained.iter().map(|&i| positions[i]).collect();
                positions.iter().copied().filter(|k| !kept.contains(k)).collect()
            };
            let mut kept_records = Vec::new();
            for (k, r) in records.iter().enumerate() {
                if dropped.contains(&k) {
                    continue;
                }
                for rel in [r.frame_file.clone(), label_path_for(&r.frame_file)] {
                    let (from, to) = (dataset.join(&rel), out_dir.join(&rel));
                    if let Some(parent) = to.parent() {
                        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                    }
                    fs::copy(&from, &to).map_err(|e| Error::io(&from, e))?;
                }
                kept_records.push(r.clone());
            }
            write_jsonl(out_dir.join("manifest.jsonl"), None, &kept_records)?;
            format!(
                "rebalanced {} frames: threshold {}, {} overrepresented classes, removed {}, kept {} -> {}",
                positions.len(),
                plan.threshold,
                plan.overrepresented.len(),
                dropped.len(),
                kept_records.len(),
                out_dir.display()
            )
        }

        Command::Detect {
            manifest,
            backend,
            input,
            annotations,
            fn_rate,
            fp_rate,
            jitter,
            out: path,
        } => {
            require_files(&[manifest])?;
            let plan = FramePlan::read_manifest(manifest)?;
            let per_frame = match backend {
                BackendKind::Oracle => {
                    let input = input.as_ref().expect("clap requires --input for oracle");
                    require_files(&[input])?;
                    OracleBackend::load(input, &plan)?.per_frame().clone()
                }
                BackendKind::Synthetic => {
                    let gt_path = annotations.as_ref().expect("clap requires --annotations for synthetic");
                    require_files(&[gt_path])?;
                    let gt = annotations_for(&read_annotations(gt_path)?, plan.image_id());
                    let mut scenario = SyntheticScenario::new(s.seed, gt);
                    scenario.fn_rate = *fn_rate;
                    scenario.fp_rate = *fp_rate;
                    scenario.jitter = *jitter;
                    synthesize_detections(&scenario, &plan)?.per_frame
                }
            };
            write_frame_detections(path, &plan, &per_frame)?;
            let n: usize = per_frame.values().map(Vec::len).sum();
            format!(
                "{n} detections over {} frames of {} -> {}",
                plan.len(),
                plan.image_id(),
                path.display()
            )
        }

        Command::Merge {
            manifest,
            detections,
            out: path,
            after,
        } => {
            require_files(&[manifest, detections])?;
            let plan = FramePlan::read_manifest(manifest)?;
            let backend = OracleBackend::load(detections, &plan)?;
            let result = infer_plan(&plan, None, &backend, &s.nms, s.jobs)?;
            let hash = plan.manifest_hash();
            write_detections(path, &hash, plan.image_id(), &result.before_nms)?;
            if let Some(after) = after {
                write_detections(after, &hash, plan.image_id(), &result.after_nms)?;
            }
            format!(
                "merged {} frames of {}: {} detections before NMS, {} after (c*={}, t={}) -> {}",
                plan.len(),
                plan.image_id(),
                result.before_nms.len(),
                result.after_nms.len(),
                s.nms.confidence_threshold,
                s.nms.iom_threshold,
                path.display()
            )
        }

        Command::Nms { detections, out: path } => {
            require_files(&[detections])?;
            let f = read_detections_file(detections)?;
            let kept = custom_nms(&f.detections, &s.nms);
            let image_id = f.image_id.clone().unwrap_or_default();
            match &f.manifest_hash {
                Some(h) => write_detections(path, h, &image_id, &kept)?,
                None => {
                    let records: Vec<DetectionRecord> =
                        kept.iter().map(|d| DetectionRecord::from_detection(&image_id, d)).collect();
                    write_jsonl(path, None, &records)?
                }
            }
            format!(
                "kept {} of {} detections (c*={}, t={}) -> {}",
                kept.len(),
                f.detections.len(),
                s.nms.confidence_threshold,
                s.nms.iom_threshold,
                path.display()
            )
        }

        Command::Eval {
            before,
            after,
            annotations,
            image_id,
            map_range,
            out: json_path,
        } => {
            require_files(&[before, after, annotations])?;
            let b = read_detections_file(before)?;
            let a = read_detections_file(after)?;
            same_hash(&b, &a, "eval")?;
            let all_gt = read_annotations(annotations)?;
            let id = resolve_image_id(image_id.as_deref(), &[&b, &a], &all_gt)?;
            let gt = annotations_for(&all_gt, &id);
            let map = if map_range.eq_ignore_ascii_case("none") {
                None
            } else {
                let (lo, hi) = parse_pct_range(map_range)?;
                Some(IouRange::new(lo, hi, 5)?)
            };
            let cfg = ReportConfig {
                matching: s.matching,
                map,
            };
            let report = build_report(&b.detections, &a.detections, &gt, &cfg);
            if let Some(p) = json_path {
                let mut text = report.to_json();
                text.push('\n');
                write_file(p, text.as_bytes())?;
            }
            match s.format {
                OutputFormat::Table => emit(out, &report.render_table())?,
                OutputFormat::Json => emit(out, &format!("{}\n", report.to_json()))?,
            }
            let all = report
                .row(RowLabel::All)
                .and_then(|r| r.after)
                .expect("ALL row present");
            format!(
                "evaluated {id}: after NMS P={:.4} R={} F1={} over {} predictions and {} ground-truth boxes",
                all.precision,
                all.recall.map_or("--".into(), |v| format!("{v:.4}")),
                all.f1.map_or("--".into(), |v| format!("{v:.4}")),
                all.n,
                gt.len()
            )
        }

        Command::Tune {
            detections,
            annotations,
            out: path,
            objective,
            c_range,
            t_range,
            step,
        } => {
            let mut paths: Vec<&Path> = detections.iter().map(PathBuf::as_path).collect();
            paths.push(annotations);
            require_files(&paths)?;
            let all_gt = read_annotations(annotations)?;
            let files: Vec<DetectionsFile> = detections.iter().map(read_detections_file).collect::<Result<_>>()?;
            let mut per_image: BTreeMap<String, (Vec<Detection>, Vec<Annotation>)> = BTreeMap::new();
            for f in &files {
                let id = resolve_image_id(None, &[f], &all_gt)?;
                let entry = per_image
                    .entry(id.clone())
                    .or_insert_with(|| (Vec::new(), annotations_for(&all_gt, &id)));
                entry.0.extend_from_slice(&f.detections);
            }
            let images: Vec<TuneImage<'_>> = per_image
                .values()
                .map(|(d, g)| TuneImage {
                    before_nms: d,
                    ground_truth: g,
                })
                .collect();
            let (c0, c1) = parse_pct_range(c_range)?;
            let (t0, t1) = parse_pct_range(t_range)?;
            let spec = SweepSpec {
                c_star: Axis { start_pct: c0, end_pct: c1, step_pct: *step },
                t: Axis { start_pct: t0, end_pct: t1, step_pct: *step },
                objective: Objective::parse(objective, s.matching.iou_threshold)?,
            };
            let points = sweep_multi(&images, &spec)?;
            write_sweep(path, &points)?;
            if s.format == OutputFormat::Json {
                emit(out, &format!("{}\n", serde_json::to_string(&points).expect("points serialize")))?;
            }
            let best = points.first().expect("grid is never empty");
            format!(
                "swept {} grid points over {} images: best c*={:.2} t={:.2} {}={:.4} -> {}",
                points.len(),
                images.len(),
                best.c_star,
                best.t,
                objective,
                best.objective,
                path.display()
            )
        }

        Command::Overlay {
            image,
            detections,
            out: path,
            thickness,
            label_scale,
        } => {
            require_files(&[image, detections])?;
            let src = load_image(image)?;
            let f = read_detections_file(detections)?;
            if let Some(id) = &f.image_id {
                if id != src.image_id() {
                    return Err(Error::InvalidConfig(format!(
                        "detections are for {id}, image is {}",
                        src.image_id()
                    )));
                }
            }
            let style = OverlayStyle {
                thickness: *thickness,
                label_scale: *label_scale,
            };
            let rendered = render_overlay(src.pixels(), &f.detections, &style);
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            rendered
                .save(path)
                .map_err(|e| Error::Encode(format!("{}: {e}", path.display())))?;
            format!("drew {} detections on {} -> {}", f.detections.len(), src.image_id(), path.display())
        }
    };
    emit(out, &format!("{summary}\n"))
}

/// Picks the image a set of detection files refers to: an explicit id, the
/// id recorded in the files, or the only image in the ground truth.
fn resolve_image_id(explicit: Option<&str>, files: &[&DetectionsFile], gts: &[Annotation]) -> Result<String> {
    let recorded: BTreeSet<&str> = files.iter().filter_map(|f| f.image_id.as_deref()).collect();
    if recorded.len() > 1 {
        return Err(Error::InvalidConfig(format!("detection files name different images: {recorded:?}")));
    }
    if let Some(id) = explicit {
        if let Some(r) = recorded.first() {
            if *r != id {
                return Err(Error::InvalidConfig(format!("--image-id {id} but detections are for {r}")));
            }
        }
        return Ok(id.to_owned());
    }
    if let Some(r) = recorded.first() {
        return Ok((*r).to_owned());
    }
    let ids: BTreeSet<&str> = gts.iter().map(|a| a.image_id.as_str()).collect();
    match ids.len() {
        1 => Ok(ids.first().expect("one id").to_string()),
        _ => Err(Error::InvalidConfig(
            "empty detection files: pass --image-id to choose the ground-truth image".into(),
        )),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from_args<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    run(&cli, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config_file() {
        let flags = GlobalOpts {
            tile: Some(640),
            overlap: Some(100),
            ..Default::default()
        };
        let file = ConfigFile {
            tile: Some(512),
            overlap: Some(64),
            conf: Some(0.8),
            ..Default::default()
        };
        let s = Settings::resolve(&flags, &file).unwrap();
        assert_eq!((s.tiling.tile(), s.tiling.overlap()), (640, 100));
        assert_eq!(s.nms.confidence_threshold, 0.8);
        assert_eq!(s.nms.iom_threshold, NmsConfig::default().iom_threshold);
        assert_eq!(s.matching.iou_threshold, 0.5);

        let d = Settings::resolve(&GlobalOpts::default(), &ConfigFile::default()).unwrap();
        assert_eq!((d.tiling.tile(), d.tiling.overlap(), d.gutter, d.min_cell), (1088, 324, 1088, 2160));
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        assert!(toml::from_str::<ConfigFile>("tile = 512\nbogus = 1\n").is_err());
        let f: ConfigFile = toml::from_str("iom = 0.6\nformat = \"json\"\n").unwrap();
        assert_eq!(f.iom, Some(0.6));
        assert_eq!(f.format, Some(OutputFormat::Json));
    }

    #[test]
    fn size_and_range_parsing() {
        assert_eq!(parse_size("36451x27274").unwrap(), (36451, 27274));
        assert!(parse_size("12").is_err());
        assert_eq!(parse_pct_range("50:95").unwrap(), (50, 95));
        assert!(parse_pct_range("50-95").is_err());
    }
}
