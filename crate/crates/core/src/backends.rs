//! Detector backends.
//!
//! A backend turns one frame into frame-local detections. Two are built in:
//! [`OracleBackend`] replays detections recorded in a per-frame detections
//! file (for instance one written by an external model runner), and
//! [`SyntheticBackend`] fabricates noisy detections from ground truth.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::detection::{Annotation, ClassId, Detection};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::io::{read_jsonl, to_jsonl, write_file, FrameDetectionRecord, Header};
use crate::tiler::{Frame, FramePlan};

/// What a backend receives for one frame.
pub struct FrameInput<'a> {
    pub plan: &'a FramePlan,
    pub frame: &'a Frame,
    /// The tile canvas, present when the backend asked for pixels.
    pub pixels: Option<&'a RgbImage>,
}

pub trait DetectorBackend: Send + Sync {
    /// Returns detections in tile-canvas coordinates, inside `[0, tile]^2`.
    fn detect(&self, input: &FrameInput<'_>) -> Result<Vec<Detection>>;

    /// Whether [`FrameInput::pixels`] must be populated.
    fn needs_pixels(&self) -> bool {
        false
    }

    /// `false` if `detect` must not be called from several threads at once.
    fn concurrent(&self) -> bool {
        true
    }
}

/// Replays stored per-frame detections.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    manifest_hash: String,
    frames: usize,
    per_frame: BTreeMap<usize, Vec<Detection>>,
}

impl OracleBackend {
    /// Builds an oracle for `plan`, rejecting frame indices outside it.
    pub fn from_frames(plan: &FramePlan, per_frame: BTreeMap<usize, Vec<Detection>>) -> Result<Self> {
        if let Some(&bad) = per_frame.keys().find(|&&i| i >= plan.len()) {
            return Err(Error::ManifestMismatch(format!(
                "frame index {bad} not in a plan of {} frames",
                plan.len()
            )));
        }
        Ok(Self {
            manifest_hash: plan.manifest_hash(),
            frames: plan.len(),
            per_frame,
        })
    }

    /// Loads a per-frame detections file. Its header must carry the hash of
    /// `plan`'s manifest.
    pub fn load(path: impl AsRef<Path>, plan: &FramePlan) -> Result<Self> {
        let path = path.as_ref();
        let parsed = read_jsonl::<FrameDetectionRecord>(path)?;
        let expected = plan.manifest_hash();
        match &parsed.header {
            Some(h) if h.manifest_hash == expected => {}
            Some(h) => {
                return Err(Error::ManifestMismatch(format!(
                    "{} was produced for manifest {}, expected {expected}",
                    path.display(),
                    h.manifest_hash
                )))
            }
            None => {
                return Err(Error::ManifestMismatch(format!(
                    "{} has no manifest hash header",
                    path.display()
                )))
            }
        }
        let parsed = parsed.try_map(path, |r| Ok((r.frame_index, r.to_detection()?)))?;
        let mut per_frame: BTreeMap<usize, Vec<Detection>> = BTreeMap::new();
        for (line, (idx, d)) in parsed.records {
            if idx >= plan.len() {
                return Err(Error::ManifestMismatch(format!(
                    "{}:{line}: frame index {idx} not in a plan of {} frames",
                    path.display(),
                    plan.len()
                )));
            }
            per_frame.entry(idx).or_default().push(d);
        }
        Self::from_frames(plan, per_frame)
    }

    pub fn manifest_hash(&self) -> &str {
        &self.manifest_hash
    }

    /// Stored detections of one frame; empty if none were recorded.
    pub fn oracle_detect(&self, frame_index: usize) -> Result<Vec<Detection>> {
        if frame_index >= self.frames {
            return Err(Error::UnknownFrameIndex(frame_index));
        }
        Ok(self.per_frame.get(&frame_index).cloned().unwrap_or_default())
    }

    pub fn per_frame(&self) -> &BTreeMap<usize, Vec<Detection>> {
        &self.per_frame
    }
}

impl DetectorBackend for OracleBackend {
    fn detect(&self, input: &FrameInput<'_>) -> Result<Vec<Detection>> {
        if input.plan.manifest_hash() != self.manifest_hash {
            return Err(Error::ManifestMismatch("oracle loaded for a different frame plan".into()));
        }
        self.oracle_detect(input.frame.index)
    }
}

/// Serializes per-frame detections with the plan's manifest hash header.
pub fn frame_detections_jsonl(plan: &FramePlan, per_frame: &BTreeMap<usize, Vec<Detection>>) -> String {
    let records: Vec<FrameDetectionRecord> = per_frame
        .iter()
        .flat_map(|(&i, dets)| dets.iter().map(move |d| FrameDetectionRecord::from_detection(i, d)))
        .collect();
    let header = Header {
        manifest_hash: plan.manifest_hash(),
    };
    to_jsonl(Some(&header), &records)
}

pub fn write_frame_detections(
    path: impl AsRef<Path>,
    plan: &FramePlan,
    per_frame: &BTreeMap<usize, Vec<Detection>>,
) -> Result<()> {
    write_file(path, frame_detections_jsonl(plan, per_frame).as_bytes())
}

/// Clamped normal distribution for confidence scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceModel {
    pub mean: f64,
    pub sd: f64,
}

impl ConfidenceModel {
    fn sample(&self, rng: &mut impl Rng) -> f64 {
        let v = if self.sd > 0.0 {
            Normal::new(self.mean, self.sd).expect("sd is positive").sample(rng)
        } else {
            self.mean
        };
        v.clamp(0.0, 1.0)
    }
}

/// Noise model for synthesized detections.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScenario {
    pub seed: u64,
    /// Global ground truth; only instances of the plan's image are used.
    pub ground_truth: Vec<Annotation>,
    /// Probability that a visible instance is missed.
    pub fn_rate: f64,
    /// Per-class overrides of `fn_rate`.
    pub fn_rate_by_class: BTreeMap<ClassId, f64>,
    /// Mean number of false positives per frame (Poisson).
    pub fp_rate: f64,
    /// Maximum absolute perturbation of each box coordinate, in pixels.
    pub jitter: f64,
    pub tp_confidence: ConfidenceModel,
    pub fp_confidence: ConfidenceModel,
    /// Classes assigned to false positives; defaults to the ground-truth classes.
    pub fp_classes: Vec<ClassId>,
}

impl SyntheticScenario {
    pub fn new(seed: u64, ground_truth: Vec<Annotation>) -> Self {
        Self {
            seed,
            ground_truth,
            fn_rate: 0.0,
            fn_rate_by_class: BTreeMap::new(),
            fp_rate: 0.0,
            jitter: 0.0,
            tp_confidence: ConfidenceModel { mean: 0.9, sd: 0.05 },
            fp_confidence: ConfidenceModel { mean: 0.6, sd: 0.15 },
            fp_classes: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let miss_rates = std::iter::once(self.fn_rate).chain(self.fn_rate_by_class.values().copied());
        for r in miss_rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidConfig(format!("miss rate {r} outside [0, 1]")));
            }
        }
        if !(self.fp_rate >= 0.0 && self.fp_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("false-positive rate {} must be finite and >= 0", self.fp_rate)));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::InvalidConfig(format!("jitter {} must be >= 0", self.jitter)));
        }
        for m in [self.tp_confidence, self.fp_confidence] {
            if !(m.sd >= 0.0 && m.mean.is_finite() && m.sd.is_finite()) {
                return Err(Error::InvalidConfig("confidence model needs finite mean and sd >= 0".into()));
            }
        }
        Ok(())
    }

    fn miss_rate(&self, class: ClassId) -> f64 {
        self.fn_rate_by_class.get(&class).copied().unwrap_or(self.fn_rate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOutput {
    pub per_frame: BTreeMap<usize, Vec<Detection>>,
    pub ground_truth: Vec<Annotation>,
}

fn frame_rng(seed: u64, frame_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame_index as u64);
    rng
}

/// Fabricates per-frame detections for every ground-truth instance lying
/// entirely inside a frame, plus Poisson false positives. Each frame draws
/// from its own random stream, so output depends only on the seed.
pub fn synthesize_detections(scenario: &SyntheticScenario, plan: &FramePlan) -> Result<SyntheticOutput> {
    scenario.validate()?;
    let gt: Vec<&Annotation> = scenario
        .ground_truth
        .iter()
        .filter(|a| a.image_id == plan.image_id())
        .collect();
    let fp_classes: Vec<ClassId> = if scenario.fp_classes.is_empty() {
        gt.iter().map(|a| a.class_id).collect::<BTreeSet<_>>().into_iter().collect()
    } else {
        scenario.fp_classes.clone()
    };
    let sides: Vec<(f64, f64)> = gt.iter().map(|a| (a.bbox().width(), a.bbox().height())).collect();
    let tile = f64::from(plan.tile());
    let (pad_x, pad_y) = plan.pad_offsets();
    let fp_count = (scenario.fp_rate > 0.0)
        .then(|| Poisson::new(scenario.fp_rate).expect("rate is positive"));

    let mut per_frame = BTreeMap::new();
    for frame in plan.frames() {
        let mut rng = frame_rng(scenario.seed, frame.index);
        let rect = plan.frame_rect(frame);
        let mut dets = Vec::new();
        for a in gt.iter().filter(|a| rect.contains(a.bbox())) {
            let local = plan.global_to_local(frame, a.bbox());
            let missed = rng.random::<f64>() < scenario.miss_rate(a.class_id);
            let jittered = jitter_box(&local, scenario.jitter, tile, &mut rng);
            let confidence = scenario.tp_confidence.sample(&mut rng);
            if missed {
                continue;
            }
            if let Some(b) = jittered {
                dets.push(Detection::new(b, a.class_id, confidence)?);
            }
        }
        if let Some(dist) = &fp_count {
            let n = dist.sample(&mut rng) as usize;
            for _ in 0..n {
                if fp_classes.is_empty() {
                    break;
                }
                let (w, h) = if sides.is_empty() {
                    (64.0, 64.0)
                } else {
                    sides[rng.random_range(0..sides.len())]
                };
                let (vis_w, vis_h) = (rect.width(), rect.height());
                let (w, h) = (w.min(vis_w), h.min(vis_h));
                let x = f64::from(pad_x) + rng.random::<f64>() * (vis_w - w);
                let y = f64::from(pad_y) + rng.random::<f64>() * (vis_h - h);
                let class = fp_classes[rng.random_range(0..fp_classes.len())];
                let confidence = scenario.fp_confidence.sample(&mut rng);
                if let Ok(b) = BoundingBox::from_xywh(x, y, w, h) {
                    if b.area() > 0.0 {
                        dets.push(Detection::new(b, class, confidence)?);
                    }
                }
            }
        }
        if !dets.is_empty() {
            per_frame.insert(frame.index, dets);
        }
    }
    Ok(SyntheticOutput {
        per_frame,
        ground_truth: gt.into_iter().cloned().collect(),
    })
}

fn jitter_box(b: &BoundingBox, jitter: f64, tile: f64, rng: &mut impl Rng) -> Option<BoundingBox> {
    let mut c = b.coords();
    if jitter > 0.0 {
        for v in &mut c {
            *v += rng.random_range(-jitter..=jitter);
        }
    }
    let [x0, y0, x1, y1] = c.map(|v| v.clamp(0.0, tile));
    (x1 > x0 && y1 > y0).then(|| BoundingBox::new(x0, y0, x1, y1).expect("ordered"))
}

/// Serves synthesized detections frame by frame.
#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    output: SyntheticOutput,
    frames: usize,
}

impl SyntheticBackend {
    pub fn new(scenario: &SyntheticScenario, plan: &FramePlan) -> Result<Self> {
        Ok(Self {
            output: synthesize_detections(scenario, plan)?,
            frames: plan.len(),
        })
    }

    pub fn output(&self) -> &SyntheticOutput {
        &self.output
    }
}

impl DetectorBackend for SyntheticBackend {
    fn detect(&self, input: &FrameInput<'_>) -> Result<Vec<Detection>> {
        if input.frame.index >= self.frames {
            return Err(Error::UnknownFrameIndex(input.frame.index));
        }
        Ok(self.output.per_frame.get(&input.frame.index).cloned().unwrap_or_default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiler::{plan_frames, TilingConfig};

    fn ann(x: f64, y: f64, w: f64, h: f64, c: u32) -> Annotation {
        Annotation::new("img", BoundingBox::from_xywh(x, y, w, h).unwrap(), ClassId(c)).unwrap()
    }

    fn small_plan() -> FramePlan {
        plan_frames("img", 300, 200, TilingConfig::new(100, 30).unwrap()).unwrap()
    }

    #[test]
    fn noiseless_synthesis_reproduces_ground_truth() {
        let plan = small_plan();
        let gt = vec![ann(10.0, 10.0, 20.0, 20.0, 47), ann(75.0, 20.0, 20.0, 25.0, 138)];
        let out = synthesize_detections(&SyntheticScenario::new(1, gt.clone()), &plan).unwrap();
        for frame in plan.frames() {
            let rect = plan.frame_rect(frame);
            let mut expected: Vec<BoundingBox> = gt
                .iter()
                .filter(|a| rect.contains(a.bbox()))
                .map(|a| a.bbox().to_local(frame.origin))
                .collect();
            let mut got: Vec<BoundingBox> = out
                .per_frame
                .get(&frame.index)
                .map(|v| v.iter().map(|d| *d.bbox()).collect())
                .unwrap_or_default();
            expected.sort_by(|a, b| a.cmp_coords(b));
            got.sort_by(|a, b| a.cmp_coords(b));
            assert_eq!(got, expected, "frame {}", frame.index);
        }
    }

    #[test]
    fn full_miss_rate_leaves_only_false_positives() {
        let plan = small_plan();
        let gt = vec![ann(10.0, 10.0, 20.0, 20.0, 47)];
        let mut sc = SyntheticScenario::new(5, gt.clone());
        sc.fn_rate = 1.0;
        sc.fp_rate = 1.0;
        let out = synthesize_detections(&sc, &plan).unwrap();
        let total: usize = out.per_frame.values().map(Vec::len).sum();
        assert!(total > 0);
        for (i, dets) in &out.per_frame {
            let local = gt[0].bbox().to_local(plan.frames()[*i].origin);
            assert!(dets.iter().all(|d| d.bbox() != &local));
        }
    }

    #[test]
    fn false_positive_rate_is_a_mean_not_a_probability() {
        let mut sc = SyntheticScenario::new(1, Vec::new());
        sc.fp_rate = 3.5;
        sc.validate().unwrap();
        sc.fp_rate = -0.1;
        assert!(sc.validate().is_err());
        sc.fp_rate = 0.0;
        sc.fn_rate = 1.5;
        assert!(sc.validate().is_err());
    }

    #[test]
    fn synthesis_is_deterministic() {
        let plan = small_plan();
        let mut sc = SyntheticScenario::new(11, vec![ann(10.0, 10.0, 20.0, 20.0, 47)]);
        sc.fp_rate = 0.7;
        sc.jitter = 2.0;
        sc.fn_rate = 0.3;
        assert_eq!(synthesize_detections(&sc, &plan).unwrap(), synthesize_detections(&sc, &plan).unwrap());
    }

    #[test]
    fn jittered_duplicates_stay_close() {
        let plan = small_plan();
        // inside frames 0 and 1 (x origins 0 and 70)
        let gt = vec![ann(75.0, 20.0, 20.0, 20.0, 47)];
        let mut sc = SyntheticScenario::new(3, gt);
        sc.jitter = 3.0;
        let out = synthesize_detections(&sc, &plan).unwrap();
        let plan = &plan;
        let globals: Vec<BoundingBox> = out
            .per_frame
            .iter()
            .flat_map(|(i, v)| v.iter().map(move |d| d.bbox().to_global(plan.frames()[*i].origin)))
            .collect();
        assert!(globals.len() >= 2);
        for a in &globals {
            for b in &globals {
                for (p, q) in a.coords().iter().zip(b.coords()) {
                    assert!((p - q).abs() <= 6.0 + 1e-9);
                }
            }
        }
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        let mut sc = SyntheticScenario::new(0, vec![]);
        sc.fn_rate = 1.5;
        assert!(sc.validate().is_err());
        let mut sc = SyntheticScenario::new(0, vec![]);
        sc.jitter = -1.0;
        assert!(sc.validate().is_err());
    }

    #[test]
    fn oracle_round_trip_and_mismatch() {
        let plan = small_plan();
        let d = Detection::new(BoundingBox::new(0.1, 0.2, 33.3, 44.4).unwrap(), ClassId(47), 0.8123456789).unwrap();
        let per_frame = BTreeMap::from([(2usize, vec![d])]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frames.jsonl");
        write_frame_detections(&path, &plan, &per_frame).unwrap();

        let oracle = OracleBackend::load(&path, &plan).unwrap();
        assert_eq!(oracle.oracle_detect(2).unwrap(), vec![d]);
        assert!(oracle.oracle_detect(0).unwrap().is_empty());
        assert!(matches!(oracle.oracle_detect(99), Err(Error::UnknownFrameIndex(99))));

        let other = plan_frames("img", 301, 200, TilingConfig::new(100, 30).unwrap()).unwrap();
        assert!(matches!(OracleBackend::load(&path, &other), Err(Error::ManifestMismatch(_))));
        assert!(OracleBackend::from_frames(&plan, BTreeMap::from([(plan.len(), vec![])])).is_err());
    }
}
