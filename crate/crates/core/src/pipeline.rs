//! Whole-image inference: plan windows, detect per window, merge into image
//! coordinates, then suppress duplicates.

use std::collections::BTreeMap;
use std::path::Path;

use crate::backends::{DetectorBackend, FrameInput};
use crate::detection::{sort_canonical, Detection};
use crate::error::{Error, Result};
use crate::image_store::{read_frame, ImageSource};
use crate::io::{read_jsonl, to_jsonl, write_file, DetectionRecord, Header};
use crate::nms::{custom_nms, NmsConfig};
use crate::tiler::{plan_frames, FramePlan, TilingConfig};

/// Detections of one image before and after suppression, both in canonical
/// order and global coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedResult {
    pub image_id: String,
    pub before_nms: Vec<Detection>,
    pub after_nms: Vec<Detection>,
    pub nms: NmsConfig,
    pub plan: FramePlan,
}

/// Translates each frame's detections to image coordinates and concatenates
/// them in frame-index order. Boxes are clipped to the image, which only
/// matters for zero-padded frames; boxes lying entirely in padding are dropped.
pub fn merge_windows(per_frame: &BTreeMap<usize, Vec<Detection>>, plan: &FramePlan) -> Result<Vec<Detection>> {
    let image = plan.image_rect();
    let mut out = Vec::new();
    for (&index, dets) in per_frame {
        let frame = plan.frame(index)?;
        for d in dets {
            let global = plan.local_to_global(frame, d.bbox());
            if let Some(clipped) = global.intersection(&image) {
                out.push(d.with_bbox(clipped)?);
            }
        }
    }
    Ok(out)
}

fn check_frame_output(plan: &FramePlan, index: usize, dets: &[Detection]) -> Result<()> {
    let t = f64::from(plan.tile());
    for d in dets {
        let [x0, y0, x1, y1] = d.bbox().coords();
        if x0 < 0.0 || y0 < 0.0 || x1 > t || y1 > t {
            return Err(Error::BackendFailure {
                frame_index: index,
                message: format!("box {:?} outside the {t}px tile", d.bbox().coords()),
            });
        }
    }
    Ok(())
}

fn detect_frame(
    plan: &FramePlan,
    index: usize,
    src: Option<&dyn ImageSource>,
    backend: &dyn DetectorBackend,
) -> Result<Vec<Detection>> {
    let frame = plan.frame(index)?;
    let pixels = if backend.needs_pixels() {
        let src = src.ok_or_else(|| Error::BackendFailure {
            frame_index: index,
            message: "backend needs pixels but no image was supplied".into(),
        })?;
        Some(read_frame(src, plan, frame)?)
    } else {
        None
    };
    let input = FrameInput {
        plan,
        frame,
        pixels: pixels.as_ref(),
    };
    let dets = backend.detect(&input).map_err(|e| match e {
        e @ (Error::BackendFailure { .. } | Error::Io { .. }) => e,
        other => Error::BackendFailure {
            frame_index: index,
            message: other.to_string(),
        },
    })?;
    check_frame_output(plan, index, &dets)?;
    Ok(dets)
}

/// Runs the backend over every frame of `plan`, using up to `jobs` threads
/// when the backend allows concurrent calls, then merges and suppresses.
/// The first failing frame (by index) aborts the run.
pub fn infer_plan(
    plan: &FramePlan,
    src: Option<&dyn ImageSource>,
    backend: &dyn DetectorBackend,
    nms: &NmsConfig,
    jobs: usize,
) -> Result<MergedResult> {
    let indices: Vec<usize> = (0..plan.len()).collect();
    let results: Vec<Result<Vec<Detection>>> = if jobs > 1 && backend.concurrent() {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| {
            indices
                .par_iter()
                .map(|&i| detect_frame(plan, i, src, backend))
                .collect()
        })
    } else {
        indices.iter().map(|&i| detect_frame(plan, i, src, backend)).collect()
    };

    let mut per_frame = BTreeMap::new();
    for (i, r) in results.into_iter().enumerate() {
        per_frame.insert(i, r?);
    }
    merge_and_suppress(plan, &per_frame, nms)
}

/// Merges per-frame detections and applies suppression.
pub fn merge_and_suppress(
    plan: &FramePlan,
    per_frame: &BTreeMap<usize, Vec<Detection>>,
    nms: &NmsConfig,
) -> Result<MergedResult> {
    let mut before = merge_windows(per_frame, plan)?;
    sort_canonical(&mut before);
    let after = custom_nms(&before, nms);
    Ok(MergedResult {
        image_id: plan.image_id().to_owned(),
        before_nms: before,
        after_nms: after,
        nms: *nms,
        plan: plan.clone(),
    })
}

/// Plans frames over `src` and runs [`infer_plan`].
pub fn infer_large_image(
    src: &dyn ImageSource,
    backend: &dyn DetectorBackend,
    tiling: TilingConfig,
    nms: &NmsConfig,
    jobs: usize,
) -> Result<MergedResult> {
    let plan = plan_frames(src.image_id(), src.width(), src.height(), tiling)?;
    infer_plan(&plan, Some(src), backend, nms, jobs)
}

/// Global detections as JSON Lines with a manifest hash header.
pub fn detections_jsonl(manifest_hash: &str, image_id: &str, dets: &[Detection]) -> String {
    let header = Header {
        manifest_hash: manifest_hash.to_owned(),
    };
    let records: Vec<DetectionRecord> = dets.iter().map(|d| DetectionRecord::from_detection(image_id, d)).collect();
    to_jsonl(Some(&header), &records)
}

pub fn write_detections(path: impl AsRef<Path>, manifest_hash: &str, image_id: &str, dets: &[Detection]) -> Result<()> {
    write_file(path, detections_jsonl(manifest_hash, image_id, dets).as_bytes())
}

/// A loaded global detections file.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionsFile {
    pub manifest_hash: Option<String>,
    pub image_id: Option<String>,
    pub detections: Vec<Detection>,
}

/// Reads a global detections file. All records must refer to one image.
pub fn read_detections_file(path: impl AsRef<Path>) -> Result<DetectionsFile> {
    let path = path.as_ref();
    let parsed = read_jsonl::<DetectionRecord>(path)?;
    let mut image_id: Option<String> = None;
    let parsed = parsed.try_map(path, |r| {
        match &image_id {
            Some(id) if *id != r.image_id => {
                return Err(Error::InvalidConfig(format!(
                    "mixed image ids {id} and {} in one detections file",
                    r.image_id
                )))
            }
            None => image_id = Some(r.image_id.clone()),
            _ => {}
        }
        r.to_detection()
    })?;
    Ok(DetectionsFile {
        manifest_hash: parsed.header.as_ref().map(|h| h.manifest_hash.clone()),
        image_id,
        detections: parsed.values(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{OracleBackend, SyntheticBackend, SyntheticScenario};
    use crate::detection::{Annotation, ClassId};
    use crate::geometry::BoundingBox;
    use crate::image_store::RasterImage;
    use image::RgbImage;

    fn det(x0: f64, y0: f64, x1: f64, y1: f64, c: u32, conf: f64) -> Detection {
        Detection::new(BoundingBox::new(x0, y0, x1, y1).unwrap(), ClassId(c), conf).unwrap()
    }

    #[test]
    fn merge_identity_and_overlap() {
        let plan = plan_frames("a", 1088, 1088, TilingConfig::default()).unwrap();
        let d = det(1.0, 2.0, 30.0, 40.0, 47, 0.9);
        assert_eq!(merge_windows(&BTreeMap::from([(0, vec![d])]), &plan).unwrap(), vec![d]);
        assert!(merge_windows(&BTreeMap::new(), &plan).unwrap().is_empty());
        assert!(matches!(
            merge_windows(&BTreeMap::from([(1, vec![d])]), &plan),
            Err(Error::UnknownFrameIndex(1))
        ));

        // an object at global x 800..830 seen by frames at x 0 and 764
        let wide = plan_frames("a", 1852, 1088, TilingConfig::default()).unwrap();
        let per_frame = BTreeMap::from([
            (0, vec![det(800.0, 5.0, 830.0, 25.0, 1, 0.9)]),
            (1, vec![det(36.0, 5.0, 66.0, 25.0, 1, 0.8)]),
        ]);
        let merged = merge_windows(&per_frame, &wide).unwrap();
        assert_eq!(merged[0].bbox(), merged[1].bbox());
    }

    #[test]
    fn duplicate_across_frames_collapses() {
        let plan = plan_frames("img", 1852, 1088, TilingConfig::default()).unwrap();
        let gt = vec![Annotation::new("img", BoundingBox::new(800.0, 100.0, 900.0, 180.0).unwrap(), ClassId(47)).unwrap()];
        let backend = SyntheticBackend::new(&SyntheticScenario::new(4, gt), &plan).unwrap();
        let nms = NmsConfig::new(0.7, 0.0).unwrap();
        let r = infer_plan(&plan, None, &backend, &nms, 1).unwrap();
        assert_eq!(r.before_nms.len(), 2);
        assert_eq!(r.after_nms.len(), 1);
    }

    #[test]
    fn empty_backend_gives_empty_result() {
        let src = RasterImage::new("img", RgbImage::new(2000, 1500)).unwrap();
        let plan = plan_frames("img", 2000, 1500, TilingConfig::default()).unwrap();
        let backend = OracleBackend::from_frames(&plan, BTreeMap::new()).unwrap();
        let r = infer_large_image(&src, &backend, TilingConfig::default(), &NmsConfig::default(), 2).unwrap();
        assert!(r.before_nms.is_empty() && r.after_nms.is_empty());
    }

    #[test]
    fn parallel_equals_sequential() {
        let plan = plan_frames("img", 4000, 3000, TilingConfig::default()).unwrap();
        let gt: Vec<Annotation> = (0..40)
            .map(|k| {
                let x = 90.0 * f64::from(k) + 13.0;
                let y = 70.0 * f64::from(k % 37) + 5.0;
                Annotation::new("img", BoundingBox::from_xywh(x, y, 80.0, 60.0).unwrap(), ClassId(k as u32 % 3)).unwrap()
            })
            .collect();
        let mut sc = SyntheticScenario::new(9, gt);
        sc.fp_rate = 0.5;
        sc.jitter = 2.0;
        let backend = SyntheticBackend::new(&sc, &plan).unwrap();
        let nms = NmsConfig::new(0.6, 0.5).unwrap();
        let a = infer_plan(&plan, None, &backend, &nms, 1).unwrap();
        let b = infer_plan(&plan, None, &backend, &nms, 4).unwrap();
        assert_eq!(a, b);
    }

    struct Failing;
    impl DetectorBackend for Failing {
        fn detect(&self, input: &FrameInput<'_>) -> Result<Vec<Detection>> {
            if input.frame.index == 1 {
                Err(Error::InvalidConfig("model crashed".into()))
            } else {
                Ok(vec![])
            }
        }
    }

    #[test]
    fn backend_failure_aborts_with_frame_index() {
        let plan = plan_frames("img", 3000, 1088, TilingConfig::default()).unwrap();
        match infer_plan(&plan, None, &Failing, &NmsConfig::default(), 3) {
            Err(Error::BackendFailure { frame_index, .. }) => assert_eq!(frame_index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    struct OutOfTile;
    impl DetectorBackend for OutOfTile {
        fn detect(&self, _: &FrameInput<'_>) -> Result<Vec<Detection>> {
            Ok(vec![det(1000.0, 0.0, 1100.0, 10.0, 1, 0.9)])
        }
    }

    #[test]
    fn rejects_boxes_outside_tile() {
        let plan = plan_frames("img", 1088, 1088, TilingConfig::default()).unwrap();
        assert!(matches!(
            infer_plan(&plan, None, &OutOfTile, &NmsConfig::default(), 1),
            Err(Error::BackendFailure { .. })
        ));
    }

    #[test]
    fn detections_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        let dets = vec![det(1.5, 2.25, 30.0, 40.0, 47, 0.91), det(0.0, 0.0, 3.0, 3.0, 2, 1.0)];
        write_detections(&p, "abc", "img", &dets).unwrap();
        let f = read_detections_file(&p).unwrap();
        assert_eq!(f.manifest_hash.as_deref(), Some("abc"));
        assert_eq!(f.image_id.as_deref(), Some("img"));
        assert_eq!(f.detections, dets);
    }
}
