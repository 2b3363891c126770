//! Whole-image inference with the synthetic detector: plan, detect per
//! frame, merge, suppress and score before/after.

use image::RgbImage;
use largedet::backends::{SyntheticBackend, SyntheticScenario};
use largedet::image_store::RasterImage;
use largedet::metrics::{build_report, ReportConfig};
use largedet::pipeline::infer_large_image;
use largedet::{plan_frames, Annotation, BoundingBox, ClassId, NmsConfig, Result, TilingConfig};

pub fn run_example() -> Result<()> {
    let (w, h) = (5000, 3600);
    let src = RasterImage::new("panel", RgbImage::new(w, h))?;
    let classes = [47, 138, 333, 388];
    let gt: Vec<Annotation> = (0..150u32)
        .map(|k| {
            let x = f64::from((k * 733) % (w - 200));
            let y = f64::from((k * 389) % (h - 200));
            let side = 40.0 + f64::from(k % 5) * 25.0;
            Annotation::new("panel", BoundingBox::from_xywh(x, y, side, side)?, ClassId(classes[k as usize % 4]))
        })
        .collect::<Result<_>>()?;

    let tiling = TilingConfig::default();
    let plan = plan_frames("panel", w, h, tiling)?;
    let mut scenario = SyntheticScenario::new(11, gt.clone());
    scenario.fn_rate = 0.05;
    scenario.fp_rate = 0.6;
    scenario.jitter = 3.0;
    let backend = SyntheticBackend::new(&scenario, &plan)?;

    let nms = NmsConfig::new(0.7, 0.75)?;
    let result = infer_large_image(&src, &backend, tiling, &nms, 4)?;
    println!(
        "{} frames, {} detections before NMS, {} after",
        plan.len(),
        result.before_nms.len(),
        result.after_nms.len()
    );
    let report = build_report(&result.before_nms, &result.after_nms, &gt, &ReportConfig::default());
    print!("{}", report.render_table());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
