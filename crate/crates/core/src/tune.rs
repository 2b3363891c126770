//! Grid search over the suppression thresholds `(c_star, t)`.
//!
//! Before-suppression detections are computed once; every grid point only
//! re-runs suppression and evaluation.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{Annotation, Detection};
use crate::error::{Error, Result};
use crate::io::write_file;
use crate::metrics::{evaluate, mean_average_precision, EvalImage, IouRange, MatchConfig, ReportConfig};
use crate::nms::{custom_nms, NmsConfig};

/// Inclusive grid `start, start + step, ..., end` in hundredths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub start_pct: u32,
    pub end_pct: u32,
    pub step_pct: u32,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        (self.start_pct..=self.end_pct)
            .step_by(self.step_pct as usize)
            .map(|p| f64::from(p) / 100.0)
            .collect()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.step_pct == 0 || self.start_pct > self.end_pct || self.end_pct > 100 {
            return Err(Error::InvalidConfig(format!(
                "{name} axis {}:{}:{} (hundredths) is not a valid range within [0, 1]",
                self.start_pct, self.step_pct, self.end_pct
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "metric")]
pub enum Objective {
    /// Mean AP over an IoU range.
    Map { range: IouRange },
    /// F1 of the ALL row at a single IoU threshold.
    F1 { iou_threshold: f64 },
    Precision { iou_threshold: f64 },
    Recall { iou_threshold: f64 },
}

impl Default for Objective {
    fn default() -> Self {
        Objective::Map { range: IouRange::COCO }
    }
}

impl Objective {
    /// Parses `map`, `map50-95`, `map50-90`, `map50`, `f1`, `precision`, `recall`.
    pub fn parse(name: &str, iou_threshold: f64) -> Result<Self> {
        Ok(match name {
            "map" | "map50-95" => Objective::Map { range: IouRange::COCO },
            "map50-90" => Objective::Map { range: IouRange::TO_90 },
            "map50" => Objective::Map { range: IouRange::SINGLE_50 },
            "f1" => Objective::F1 { iou_threshold },
            "precision" => Objective::Precision { iou_threshold },
            "recall" => Objective::Recall { iou_threshold },
            other => return Err(Error::InvalidConfig(format!("unknown objective {other:?}"))),
        })
    }

    /// Objective value of already-suppressed detections. Empty inputs score 0.
    pub fn score(&self, images: &[EvalImage<'_>]) -> f64 {
        match *self {
            Objective::Map { range } => mean_average_precision(images, &range).unwrap_or(0.0),
            Objective::F1 { iou_threshold } | Objective::Precision { iou_threshold } | Objective::Recall { iou_threshold } => {
                let cfg = ReportConfig {
                    matching: MatchConfig { iou_threshold },
                    map: None,
                };
                let eval = evaluate(images, &cfg);
                let all = eval.all();
                match self {
                    Objective::F1 { .. } => all.f1.unwrap_or(0.0),
                    Objective::Precision { .. } => all.precision,
                    _ => all.recall.unwrap_or(0.0),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub c_star: Axis,
    pub t: Axis,
    pub objective: Objective,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            c_star: Axis { start_pct: 50, end_pct: 80, step_pct: 5 },
            t: Axis { start_pct: 50, end_pct: 95, step_pct: 5 },
            objective: Objective::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.c_star.validate("c_star")?;
        self.t.validate("t")
    }

    pub fn grid(&self) -> Vec<(f64, f64)> {
        let ts = self.t.values();
        self.c_star
            .values()
            .into_iter()
            .flat_map(|c| ts.iter().map(move |&t| (c, t)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub c_star: f64,
    pub t: f64,
    pub objective: f64,
}

/// One image's before-suppression detections and ground truth.
#[derive(Debug, Clone, Copy)]
pub struct TuneImage<'a> {
    pub before_nms: &'a [Detection],
    pub ground_truth: &'a [Annotation],
}

/// Objective of a single configuration, evaluated over all images pooled.
pub fn evaluate_point(images: &[TuneImage<'_>], nms: &NmsConfig, objective: &Objective) -> f64 {
    let after: Vec<Vec<Detection>> = images.iter().map(|i| custom_nms(i.before_nms, nms)).collect();
    let eval: Vec<EvalImage<'_>> = images
        .iter()
        .zip(&after)
        .map(|(i, a)| EvalImage {
            predictions: a,
            ground_truth: i.ground_truth,
        })
        .collect();
    objective.score(&eval)
}

/// Evaluates every grid point, best first. Ties prefer the higher `c_star`,
/// then the higher `t`.
pub fn sweep_multi(images: &[TuneImage<'_>], spec: &SweepSpec) -> Result<Vec<SweepPoint>> {
    spec.validate()?;
    let mut points: Vec<SweepPoint> = spec
        .grid()
        .into_par_iter()
        .map(|(c_star, t)| {
            let nms = NmsConfig {
                iom_threshold: t,
                confidence_threshold: c_star,
            };
            SweepPoint {
                c_star,
                t,
                objective: evaluate_point(images, &nms, &spec.objective),
            }
        })
        .collect();
    points.sort_by(|a, b| {
        b.objective
            .total_cmp(&a.objective)
            .then(b.c_star.total_cmp(&a.c_star))
            .then(b.t.total_cmp(&a.t))
    });
    Ok(points)
}

pub fn sweep(before_nms: &[Detection], gts: &[Annotation], spec: &SweepSpec) -> Result<Vec<SweepPoint>> {
    sweep_multi(
        &[TuneImage {
            before_nms,
            ground_truth: gts,
        }],
        spec,
    )
}

pub fn write_sweep(path: impl AsRef<Path>, points: &[SweepPoint]) -> Result<()> {
    let mut text = serde_json::to_string_pretty(points).map_err(|e| Error::Encode(e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}
