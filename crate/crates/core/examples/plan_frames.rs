//! Plans 1088 px windows with 324 px overlap over a 36451 x 27274 painting
//! scan and over an image smaller than one tile.

use largedet::tiler::{axis_origins, plan_frames, TilingConfig};
use largedet::{BoundingBox, Result};

pub fn run_example() -> Result<()> {
    let cfg = TilingConfig::default();
    let plan = plan_frames("painting", 36451, 27274, cfg)?;
    let xs = axis_origins(36451, cfg.tile(), cfg.stride());
    let ys = axis_origins(27274, cfg.tile(), cfg.stride());
    println!(
        "{} frames ({} x {}), stride {}",
        plan.len(),
        xs.len(),
        ys.len(),
        cfg.stride()
    );
    println!(
        "last column starts at x={} (clamped; overlap with previous {} px)",
        xs[xs.len() - 1],
        xs[xs.len() - 2] + cfg.tile() - xs[xs.len() - 1]
    );

    let mark = BoundingBox::new(5_000.0, 3_000.0, 5_200.0, 3_180.0)?;
    println!("a 200 x 180 mark is fully inside frames {:?}", plan.frames_covering(&mark));
    println!("manifest hash {}", plan.manifest_hash());

    let small = plan_frames("fragment", 700, 1500, cfg)?;
    for f in small.frames() {
        println!(
            "fragment frame {} at ({}, {}) padded={} pad offsets {:?}",
            f.index,
            f.origin.x,
            f.origin.y,
            f.padded,
            small.pad_offsets()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
