//! Grid search of (c*, t) on synthetic detections of one image.

use largedet::backends::{synthesize_detections, SyntheticScenario};
use largedet::pipeline::merge_windows;
use largedet::tune::{sweep, Objective, SweepSpec};
use largedet::{plan_frames, Annotation, BoundingBox, ClassId, Result, TilingConfig};

pub fn run_example() -> Result<()> {
    let (w, h) = (4200, 3100);
    let gt: Vec<Annotation> = (0..120u32)
        .map(|k| {
            let x = f64::from((k * 571) % (w - 150));
            let y = f64::from((k * 337) % (h - 150));
            Annotation::new("img", BoundingBox::from_xywh(x, y, 70.0, 60.0)?, ClassId(k % 3))
        })
        .collect::<Result<_>>()?;
    let plan = plan_frames("img", w, h, TilingConfig::default())?;
    let mut scenario = SyntheticScenario::new(5, gt.clone());
    scenario.fp_rate = 1.0;
    scenario.fn_rate = 0.1;
    scenario.jitter = 4.0;
    let out = synthesize_detections(&scenario, &plan)?;
    let before = merge_windows(&out.per_frame, &plan)?;

    for objective in [Objective::default(), Objective::F1 { iou_threshold: 0.5 }] {
        let spec = SweepSpec {
            objective,
            ..Default::default()
        };
        let ranked = sweep(&before, &gt, &spec)?;
        println!("{objective:?}: {} grid points", ranked.len());
        for p in ranked.iter().take(3) {
            println!("  c*={:.2} t={:.2} -> {:.4}", p.c_star, p.t, p.objective);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
