//! A small, confident detection nested inside a larger one of the same
//! class. IoU-based, confidence-ranked suppression keeps both or the small
//! one; the IoM grouping keeps the large box.

use largedet::geometry::{iom, iou};
use largedet::nms::{brute_force_nms_oracle, pairwise_iom};
use largedet::{custom_nms, BoundingBox, ClassId, Detection, NmsConfig, Result};

pub fn run_example() -> Result<()> {
    let whole = Detection::new(BoundingBox::new(100.0, 100.0, 220.0, 210.0)?, ClassId(47), 0.81)?;
    let part = Detection::new(BoundingBox::new(130.0, 120.0, 190.0, 170.0)?, ClassId(47), 0.93)?;
    let other = Detection::new(BoundingBox::new(150.0, 150.0, 260.0, 250.0)?, ClassId(138), 0.88)?;
    let dets = vec![part, whole, other];

    println!("IoU(whole, part) = {:.3}", iou(whole.bbox(), part.bbox())?);
    println!("IoM(whole, part) = {:.3}", iom(whole.bbox(), part.bbox())?);
    let boxes: Vec<BoundingBox> = dets.iter().map(|d| *d.bbox()).collect();
    println!("pairwise IoM {:?}", pairwise_iom(&boxes)?);

    let cfg = NmsConfig::new(0.7, 0.75)?;
    let kept = custom_nms(&dets, &cfg);
    for d in &kept {
        println!("kept class {} {:?} conf {}", d.class_id(), d.bbox().coords(), d.confidence());
    }
    assert_eq!(kept.len(), 2);
    assert!(kept.contains(&whole) && !kept.contains(&part));
    assert_eq!(brute_force_nms_oracle(&dets, &cfg)?, kept);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
