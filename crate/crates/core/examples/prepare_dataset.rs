//! Grid split, frame sampling, rebalancing and export of a training set.
//! Sizes are scaled down (512 px tiles, 1024 px cells) to keep the demo light.

use image::{Rgb, RgbImage};
use largedet::dataset::{
    assign_cells, build_grid, class_histogram, export_split, rebalance, sample_frames, SampleTargets, SamplingConfig,
    Split,
};
use largedet::image_store::{ImageSource, RasterImage};
use largedet::{Annotation, BoundingBox, ClassId, Result};

pub fn run_example() -> Result<()> {
    let (w, h) = (5000, 3200);
    let src = RasterImage::new("altarpiece", RgbImage::from_pixel(w, h, Rgb([180, 150, 90])))?;
    // class 47 dominates, 333 is rare
    let anns: Vec<Annotation> = (0..400u32)
        .map(|k| {
            let class = match k % 10 {
                0..=5 => 47,
                6..=8 => 138,
                _ => 333,
            };
            let x = f64::from((k * 613) % (w - 100));
            let y = f64::from((k * 281) % (h - 100));
            Annotation::new("altarpiece", BoundingBox::from_xywh(x, y, 60.0, 50.0)?, ClassId(class))
        })
        .collect::<Result<_>>()?;

    let grid = build_grid(w, h, 1024, 512)?;
    let assignment = assign_cells(&grid, 0.8, 42)?;
    println!(
        "{} x {} cells of side {}, {} train / {} validation",
        grid.cols,
        grid.rows,
        grid.cell_side,
        assignment.count(Split::Train),
        assignment.count(Split::Validation)
    );

    let samples = sample_frames(
        "altarpiece",
        &grid,
        &assignment,
        &anns,
        SampleTargets::from_total(40, 0.8),
        &SamplingConfig {
            tile: 512,
            ..Default::default()
        },
        7,
    )?;
    println!("sampled {} frames, histogram {:?}", samples.len(), class_histogram(&samples));

    let (threshold, kept) = rebalance(&samples, 35.0)?;
    println!(
        "threshold {threshold}: kept {} frames, histogram {:?}",
        kept.len(),
        class_histogram(&kept)
    );

    let out = tempfile::tempdir().map_err(|e| largedet::Error::Io { path: "tempdir".into(), source: e })?;
    let summary = export_split(&kept, &[&src as &dyn ImageSource], out.path())?;
    println!("exported {} images and {} labels to {}", summary.frames, summary.labels, out.path().display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
