//! Draws color-coded boxes with class/confidence labels onto a raster.

use image::{Rgb, RgbImage};
use largedet::overlay::{class_color, render_overlay, OverlayStyle};
use largedet::{BoundingBox, ClassId, Detection, Error, Result};

pub fn run_example() -> Result<()> {
    let img = RgbImage::from_fn(400, 300, |x, y| Rgb([200 - (x / 4) as u8, 180 - (y / 4) as u8, 150]));
    let dets = vec![
        Detection::new(BoundingBox::new(40.0, 60.0, 140.0, 150.0)?, ClassId(47), 0.93)?,
        Detection::new(BoundingBox::new(200.0, 120.0, 330.0, 260.0)?, ClassId(388), 0.78)?,
    ];
    let out = render_overlay(&img, &dets, &OverlayStyle::default());
    assert_eq!(render_overlay(&img, &[], &OverlayStyle::default()), img);

    let dir = tempfile::tempdir().map_err(|e| Error::Io { path: "tempdir".into(), source: e })?;
    let path = dir.path().join("overlay.png");
    out.save(&path).map_err(|e| Error::Encode(e.to_string()))?;
    println!(
        "wrote {} (class 47 color {:?}, class 388 color {:?})",
        path.display(),
        class_color(ClassId(47)),
        class_color(ClassId(388))
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
