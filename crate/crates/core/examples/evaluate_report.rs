//! Before/after report with an "others" row for classes absent from the
//! ground truth, plus AP on a tiny ranked list.

use largedet::metrics::{build_report, interpolated_ap, ReportConfig};
use largedet::{Annotation, BoundingBox, ClassId, Detection, Result};

fn det(x: f64, y: f64, side: f64, class: u32, conf: f64) -> Result<Detection> {
    Detection::new(BoundingBox::from_xywh(x, y, side, side)?, ClassId(class), conf)
}

pub fn run_example() -> Result<()> {
    let gt: Vec<Annotation> = (0..6)
        .map(|k| {
            let class = if k < 4 { 47 } else { 388 };
            Annotation::new("img", BoundingBox::from_xywh(f64::from(k) * 100.0, 0.0, 50.0, 50.0)?, ClassId(class))
        })
        .collect::<Result<_>>()?;

    let mut after = Vec::new();
    for (k, g) in gt.iter().enumerate().take(5) {
        after.push(Detection::new(*g.bbox(), g.class_id, 0.95 - k as f64 * 0.05)?);
    }
    after.push(det(700.0, 0.0, 40.0, 999, 0.7)?);
    after.push(det(800.0, 0.0, 40.0, 999, 0.6)?);

    let mut before = after.clone();
    // duplicates of the first three marks, nested inside them
    for g in gt.iter().take(3) {
        let [x0, y0, ..] = g.bbox().coords();
        before.push(det(x0 + 5.0, y0 + 5.0, 30.0, g.class_id.0, 0.9)?);
    }

    let report = build_report(&before, &after, &gt, &ReportConfig::default());
    print!("{}", report.render_table());

    // ranked hits TP, FP, TP over 2 ground-truth boxes
    println!("AP of [TP, FP, TP] over 2 GT: {:.6}", interpolated_ap(&[true, false, true], 2));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
