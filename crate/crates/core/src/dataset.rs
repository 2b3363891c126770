//! Training-set preparation from large annotated images.
//!
//! Each image is divided into a lattice of equal square cells separated by
//! gutters. Cells are assigned wholesale to the training or validation split,
//! and frames are sampled with their top-left corner inside a cell. With a
//! gutter at least as wide as the tile, a frame can spill into the gutter that
//! follows its cell but never reaches a neighbouring cell, so no pixel is ever
//! shared between splits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detection::{Annotation, ClassId};
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, FrameOrigin};
use crate::image_store::ImageSource;
use crate::io::{write_file, write_jsonl, SplitRecord};

pub const DEFAULT_MIN_CELL: u32 = 2160;
pub const DEFAULT_GUTTER: u32 = 1088;
pub const DEFAULT_TRAIN_RATIO: f64 = 0.8;
pub const DEFAULT_MIN_VISIBLE_FRACTION: f64 = 0.5;
pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;
pub const DEFAULT_PERCENTILE: f64 = 35.0;

/// Derives an independent RNG seed per image so per-image work can run in
/// any order.
pub fn derive_seed(seed: u64, image_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(image_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub index: usize,
    pub row: u32,
    pub col: u32,
    pub x: u32,
    pub y: u32,
    pub side: u32,
}

/// Lattice of square cells over one image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub width: u32,
    pub height: u32,
    pub cell_side: u32,
    pub gutter: u32,
    pub cols: u32,
    pub rows: u32,
}

impl GridSpec {
    pub fn cell_count(&self) -> usize {
        (self.cols * self.rows) as usize
    }

    fn pitch(&self) -> u32 {
        self.cell_side + self.gutter
    }

    pub fn cells(&self) -> Vec<Cell> {
        (0..self.rows)
            .flat_map(|row| (0..self.cols).map(move |col| (row, col)))
            .enumerate()
            .map(|(index, (row, col))| Cell {
                index,
                row,
                col,
                x: col * self.pitch(),
                y: row * self.pitch(),
                side: self.cell_side,
            })
            .collect()
    }
}

/// Largest `n` with `n * min_cell + (n - 1) * gutter <= length`.
fn cells_along(length: u32, min_cell: u32, gutter: u32) -> u32 {
    let (l, m, g) = (u64::from(length), u64::from(min_cell), u64::from(gutter));
    ((l + g) / (m + g)) as u32
}

/// Splits the image into the largest number of equal square cells whose side
/// is at least `min_cell`. When the two axes would yield different sides the
/// smaller one is used and the leftover strip at the far edge stays unused.
pub fn build_grid(width: u32, height: u32, min_cell: u32, gutter: u32) -> Result<GridSpec> {
    if min_cell == 0 {
        return Err(Error::InvalidConfig("minimum cell side must be positive".into()));
    }
    if width < min_cell || height < min_cell {
        return Err(Error::ImageTooSmall {
            width,
            height,
            min_cell,
        });
    }
    let cols = cells_along(width, min_cell, gutter);
    let rows = cells_along(height, min_cell, gutter);
    let side = |len: u32, n: u32| (len - (n - 1) * gutter) / n;
    let cell_side = side(width, cols).min(side(height, rows));
    Ok(GridSpec {
        width,
        height,
        cell_side,
        gutter,
        cols,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    /// Split of each cell, indexed like [`GridSpec::cells`].
    pub cells: Vec<Split>,
    pub train_ratio: f64,
    pub seed: u64,
}

impl SplitAssignment {
    pub fn count(&self, split: Split) -> usize {
        self.cells.iter().filter(|&&s| s == split).count()
    }
}

/// Shuffles the cells and sends `round(total * (1 - train_ratio))` of them to
/// validation.
pub fn assign_cells(grid: &GridSpec, train_ratio: f64, seed: u64) -> Result<SplitAssignment> {
    if !(0.0..=1.0).contains(&train_ratio) {
        return Err(Error::InvalidConfig(format!("train ratio {train_ratio} outside [0, 1]")));
    }
    let total = grid.cell_count();
    let n_val = (total as f64 * (1.0 - train_ratio)).round() as usize;
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut cells = vec![Split::Train; total];
    for &i in &order[..n_val.min(total)] {
        cells[i] = Split::Validation;
    }
    Ok(SplitAssignment {
        cells,
        train_ratio,
        seed,
    })
}

/// A sampled training frame with its annotations in frame coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSample {
    pub image_id: String,
    pub origin: FrameOrigin,
    pub tile: u32,
    pub split: Split,
    pub annotations: Vec<Annotation>,
}

impl FrameSample {
    pub fn rect(&self) -> BoundingBox {
        frame_rect(self.origin, self.tile)
    }
}

fn frame_rect(origin: FrameOrigin, tile: u32) -> BoundingBox {
    BoundingBox::from_xywh(f64::from(origin.x), f64::from(origin.y), f64::from(tile), f64::from(tile))
        .expect("tile is non-negative")
}

/// Clips global annotations to the frame at `origin` and translates them to
/// frame coordinates. A clipped box is kept only if it retains at least
/// `min_fraction` of its original area.
pub fn clip_annotations(annotations: &[Annotation], origin: FrameOrigin, tile: u32, min_fraction: f64) -> Vec<Annotation> {
    let rect = frame_rect(origin, tile);
    annotations
        .iter()
        .filter_map(|a| {
            let clipped = a.bbox().intersection(&rect)?;
            if clipped.area() < min_fraction * a.bbox().area() {
                return None;
            }
            Annotation::new(a.image_id.clone(), clipped.to_local(origin), a.class_id).ok()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleTargets {
    pub train: usize,
    pub validation: usize,
}

impl SampleTargets {
    /// Splits a total frame budget by the training ratio.
    pub fn from_total(total: usize, train_ratio: f64) -> Self {
        let train = (total as f64 * train_ratio).round() as usize;
        Self {
            train,
            validation: total - train.min(total),
        }
    }

    fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Validation => self.validation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub tile: u32,
    pub min_visible_fraction: f64,
    /// Rejection-sampling attempts allowed per requested frame.
    pub max_attempts: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            tile: crate::tiler::DEFAULT_TILE,
            min_visible_fraction: DEFAULT_MIN_VISIBLE_FRACTION,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

/// Range of admissible top-left coordinates for frames anchored in a cell
/// along one axis: inside the cell, not past the following gutter, inside the
/// image. `None` if the frame cannot fit.
fn anchor_range(start: u32, side: u32, gutter: u32, tile: u32, length: u32) -> Option<(u32, u32)> {
    let hi = (start + side)
        .min((start + side + gutter).checked_sub(tile)?)
        .min(length.checked_sub(tile)?);
    (hi >= start).then_some((start, hi))
}

/// Randomly samples frames anchored in the cells of each split until the
/// targets are met. Frames without any retained annotation are rejected and
/// redrawn.
pub fn sample_frames(
    image_id: &str,
    grid: &GridSpec,
    assignment: &SplitAssignment,
    annotations: &[Annotation],
    targets: SampleTargets,
    cfg: &SamplingConfig,
    seed: u64,
) -> Result<Vec<FrameSample>> {
    if cfg.tile == 0 || cfg.tile > grid.cell_side + grid.gutter {
        return Err(Error::InvalidConfig(format!(
            "tile {} must be positive and at most cell side + gutter ({})",
            cfg.tile,
            grid.cell_side + grid.gutter
        )));
    }
    if assignment.cells.len() != grid.cell_count() {
        return Err(Error::InvalidConfig("assignment does not match grid".into()));
    }
    let own: Vec<Annotation> = annotations.iter().filter(|a| a.image_id == image_id).cloned().collect();
    let cells = grid.cells();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(targets.train + targets.validation);

    for split in [Split::Train, Split::Validation] {
        let wanted = targets.get(split);
        let anchors: Vec<((u32, u32), (u32, u32))> = cells
            .iter()
            .filter(|c| assignment.cells[c.index] == split)
            .filter_map(|c| {
                let xs = anchor_range(c.x, c.side, grid.gutter, cfg.tile, grid.width)?;
                let ys = anchor_range(c.y, c.side, grid.gutter, cfg.tile, grid.height)?;
                Some((xs, ys))
            })
            .collect();
        for _ in 0..wanted {
            let exhausted = || Error::InsufficientAnnotatedArea {
                image_id: image_id.to_owned(),
                split: split.to_string(),
                attempts: cfg.max_attempts,
            };
            if anchors.is_empty() {
                return Err(exhausted());
            }
            let mut found = None;
            for _ in 0..cfg.max_attempts {
                let ((x0, x1), (y0, y1)) = anchors[rng.random_range(0..anchors.len())];
                let origin = FrameOrigin::new(rng.random_range(x0..=x1), rng.random_range(y0..=y1));
                let local = clip_annotations(&own, origin, cfg.tile, cfg.min_visible_fraction);
                if !local.is_empty() {
                    found = Some((origin, local));
                    break;
                }
            }
            let (origin, annotations) = found.ok_or_else(exhausted)?;
            out.push(FrameSample {
                image_id: image_id.to_owned(),
                origin,
                tile: cfg.tile,
                split,
                annotations,
            });
        }
    }
    Ok(out)
}

/// Instance count per class across all samples.
pub fn class_histogram(samples: &[FrameSample]) -> BTreeMap<ClassId, usize> {
    let mut h = BTreeMap::new();
    for a in samples.iter().flat_map(|s| &s.annotations) {
        *h.entry(a.class_id).or_insert(0) += 1;
    }
    h
}

/// Nearest-rank percentile: the smallest value with at least `p`% of the
/// values at or below it.
pub fn nearest_rank_percentile(values: &[usize], p: f64) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct RebalancePlan {
    pub threshold: usize,
    pub overrepresented: BTreeSet<ClassId>,
    /// Indices of the frames to keep, ascending.
    pub retained: Vec<usize>,
}

/// Undersamples overrepresented classes given the class of every instance in
/// every frame.
///
/// Classes whose count exceeds the nearest-rank `percentile` of the class
/// counts are overrepresented. Only frames made up entirely of
/// overrepresented instances are removable. Removal repeatedly targets the
/// currently most common class still above the threshold, taking the
/// removable frame with the most instances of it, and never pushes any class
/// below the threshold.
pub fn rebalance_frames(frames: &[Vec<ClassId>], percentile: f64) -> Result<RebalancePlan> {
    let mut counts: BTreeMap<ClassId, usize> = BTreeMap::new();
    let per_frame: Vec<BTreeMap<ClassId, usize>> = frames
        .iter()
        .map(|classes| {
            let mut m = BTreeMap::new();
            for &c in classes {
                *m.entry(c).or_insert(0) += 1;
                *counts.entry(c).or_insert(0) += 1;
            }
            m
        })
        .collect();
    let values: Vec<usize> = counts.values().copied().collect();
    let threshold = nearest_rank_percentile(&values, percentile)
        .ok_or_else(|| Error::InvalidConfig("rebalancing needs at least one class".into()))?;
    let over: BTreeSet<ClassId> = counts
        .iter()
        .filter(|&(_, &n)| n > threshold)
        .map(|(&c, _)| c)
        .collect();

    // Removable candidates per overrepresented class, best first.
    let mut queues: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for (i, m) in per_frame.iter().enumerate() {
        if m.is_empty() || !m.keys().all(|c| over.contains(c)) {
            continue;
        }
        for &c in m.keys() {
            queues.entry(c).or_default().push(i);
        }
    }
    for (c, q) in queues.iter_mut() {
        q.sort_by(|&a, &b| per_frame[b][c].cmp(&per_frame[a][c]).then(a.cmp(&b)));
    }
    let mut cursor: BTreeMap<ClassId, usize> = queues.keys().map(|&c| (c, 0)).collect();
    let mut removed = vec![false; frames.len()];
    let mut exhausted: BTreeSet<ClassId> = BTreeSet::new();

    // most common active class; ties go to the lower id
    while let Some(target) = counts
        .iter()
        .filter(|(c, &n)| over.contains(c) && n > threshold && !exhausted.contains(c))
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&c, _)| c)
    {
        let queue = queues.get(&target).map(Vec::as_slice).unwrap_or(&[]);
        let pos = cursor.entry(target).or_insert(0);
        let mut picked = None;
        while *pos < queue.len() {
            let i = queue[*pos];
            *pos += 1;
            if removed[i] {
                continue;
            }
            // counts only decrease, so a frame that would break the floor now
            // can never become removable later
            if per_frame[i].iter().all(|(c, &k)| counts[c] - k >= threshold) {
                picked = Some(i);
                break;
            }
        }
        match picked {
            Some(i) => {
                removed[i] = true;
                for (c, &k) in &per_frame[i] {
                    *counts.get_mut(c).expect("class counted") -= k;
                }
            }
            None => {
                exhausted.insert(target);
            }
        }
    }

    Ok(RebalancePlan {
        threshold,
        overrepresented: over,
        retained: (0..frames.len()).filter(|&i| !removed[i]).collect(),
    })
}

/// Rebalances frame samples; see [`rebalance_frames`].
pub fn rebalance(samples: &[FrameSample], percentile: f64) -> Result<(usize, Vec<FrameSample>)> {
    let classes: Vec<Vec<ClassId>> = samples
        .iter()
        .map(|s| s.annotations.iter().map(|a| a.class_id).collect())
        .collect();
    let plan = rebalance_frames(&classes, percentile)?;
    Ok((
        plan.threshold,
        plan.retained.iter().map(|&i| samples[i].clone()).collect(),
    ))
}

/// One label line: class id then center, width and height normalized by the
/// tile side.
pub fn format_label_line(a: &Annotation, tile: u32) -> String {
    let t = f64::from(tile);
    let (cx, cy) = a.bbox().center();
    format!(
        "{} {:.6} {:.6} {:.6} {:.6}",
        a.class_id,
        cx / t,
        cy / t,
        a.bbox().width() / t,
        a.bbox().height() / t
    )
}

/// Parses a label line back into a frame-local class and box.
pub fn parse_label_line(line: &str, tile: u32) -> Result<(ClassId, BoundingBox)> {
    let bad = || Error::InvalidConfig(format!("malformed label line: {line:?}"));
    let mut it = line.split_whitespace();
    let class: u32 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let mut vals = [0.0f64; 4];
    for v in &mut vals {
        *v = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    }
    if it.next().is_some() {
        return Err(bad());
    }
    let t = f64::from(tile);
    let [cx, cy, w, h] = vals.map(|v| v * t);
    Ok((ClassId(class), BoundingBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)?))
}

/// Base name (without extension) of the `k`-th exported frame.
pub fn frame_stem(sample: &FrameSample, k: usize) -> String {
    format!("{}_{}_{:06}", sample.image_id, sample.split, k)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportSummary {
    pub frames: usize,
    pub labels: usize,
    pub manifest: Vec<SplitRecord>,
}

/// Writes `images/<split>/<stem>.png`, `labels/<split>/<stem>.txt` and
/// `manifest.jsonl` under `out_dir`.
pub fn export_split(samples: &[FrameSample], sources: &[&dyn ImageSource], out_dir: &Path) -> Result<ExportSummary> {
    let mut manifest = Vec::with_capacity(samples.len());
    let mut labels = 0;
    for (k, s) in samples.iter().enumerate() {
        let src = sources
            .iter()
            .find(|src| src.image_id() == s.image_id)
            .ok_or_else(|| Error::InvalidConfig(format!("no image source for {}", s.image_id)))?;
        let stem = frame_stem(s, k);
        let image_rel = format!("images/{}/{stem}.png", s.split);
        let label_rel = format!("labels/{}/{stem}.txt", s.split);

        let crop = src.read_crop(s.origin, s.tile)?;
        let image_path = out_dir.join(&image_rel);
        if let Some(parent) = image_path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        crop.save(&image_path).map_err(|e| Error::Encode(format!("{}: {e}", image_path.display())))?;

        let mut text = String::new();
        for a in &s.annotations {
            text.push_str(&format_label_line(a, s.tile));
            text.push('\n');
        }
        labels += s.annotations.len();
        write_file(out_dir.join(&label_rel), text.as_bytes())?;

        manifest.push(SplitRecord {
            frame_file: image_rel,
            image_id: s.image_id.clone(),
            origin_x: s.origin.x,
            origin_y: s.origin.y,
            split: s.split.to_string(),
        });
    }
    write_jsonl(out_dir.join("manifest.jsonl"), None, &manifest)?;
    Ok(ExportSummary {
        frames: samples.len(),
        labels,
        manifest,
    })
}

/// Label file path for an image path recorded in a split manifest.
pub fn label_path_for(frame_file: &str) -> String {
    let swapped = frame_file.replacen("images/", "labels/", 1);
    match swapped.rsplit_once('.') {
        Some((stem, _)) => format!("{stem}.txt"),
        None => format!("{swapped}.txt"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image_store::RasterImage;
    use image::{Rgb, RgbImage};
    use proptest::prelude::*;

    fn ann(id: &str, x0: f64, y0: f64, x1: f64, y1: f64, c: u32) -> Annotation {
        Annotation::new(id, BoundingBox::new(x0, y0, x1, y1).unwrap(), ClassId(c)).unwrap()
    }

    /// Linear scan for the largest cell count satisfying the side constraint.
    fn scan_cells(length: u32, min_cell: u32, gutter: u32) -> u32 {
        (1..=length)
            .take_while(|&n| {
                let used = u64::from((n - 1) * gutter);
                used <= u64::from(length) && (u64::from(length) - used) / u64::from(n) >= u64::from(min_cell)
            })
            .last()
            .unwrap_or(0)
    }

    #[test]
    fn grid_examples() {
        let g = build_grid(10_000, 10_000, 2160, 1088).unwrap();
        assert_eq!((g.cols, g.rows, g.cell_side), (3, 3, 2608));
        assert_eq!(scan_cells(10_000, 2160, 1088), 3);
        let g = build_grid(2160, 2160, 2160, 1088).unwrap();
        assert_eq!((g.cols, g.rows, g.cell_side), (1, 1, 2160));
        assert!(matches!(build_grid(2000, 2000, 2160, 1088), Err(Error::ImageTooSmall { .. })));
    }

    proptest! {
        #[test]
        fn grid_count_matches_scan(len in 2160u32..40_000, gutter in 0u32..3000) {
            prop_assert_eq!(cells_along(len, 2160, gutter), scan_cells(len, 2160, gutter));
        }

        #[test]
        fn percentile_bounds(values in prop::collection::vec(0usize..1000, 1..40), p in 0.0..100.0f64) {
            let v = nearest_rank_percentile(&values, p).unwrap();
            let below = values.iter().filter(|&&x| x <= v).count() as f64;
            prop_assert!(below / values.len() as f64 * 100.0 >= p - 1e-9);
            prop_assert!(values.contains(&v));
        }
    }

    #[test]
    fn assignment_rounding() {
        let g = build_grid(10_000, 10_000, 2160, 1088).unwrap();
        for seed in 0..20 {
            let a = assign_cells(&g, 0.8, seed).unwrap();
            assert_eq!((a.count(Split::Train), a.count(Split::Validation)), (7, 2));
            assert_eq!(a, assign_cells(&g, 0.8, seed).unwrap());
        }
        let one = build_grid(2160, 2160, 2160, 1088).unwrap();
        assert_eq!(assign_cells(&one, 0.8, 3).unwrap().cells, vec![Split::Train]);
    }

    #[test]
    fn clipping_rules() {
        let o = FrameOrigin::new(100, 100);
        let inside = ann("a", 150.0, 150.0, 160.0, 170.0, 1);
        let out = clip_annotations(&[inside], o, 100, 0.5);
        assert_eq!(out[0].bbox(), &BoundingBox::new(50.0, 50.0, 60.0, 70.0).unwrap());
        // 40% of the width inside the frame
        let partial = ann("a", 196.0, 150.0, 206.0, 160.0, 1);
        assert!(clip_annotations(&[partial], o, 100, 0.5).is_empty());
        let partial60 = ann("a", 194.0, 150.0, 204.0, 160.0, 1);
        assert_eq!(clip_annotations(&[partial60], o, 100, 0.5).len(), 1);
        let touching = ann("a", 200.0, 150.0, 210.0, 160.0, 1);
        assert!(clip_annotations(&[touching], o, 100, 0.5).is_empty());
    }

    #[test]
    fn histogram_basics() {
        assert!(class_histogram(&[]).is_empty());
        let s = FrameSample {
            image_id: "a".into(),
            origin: FrameOrigin::new(0, 0),
            tile: 100,
            split: Split::Train,
            annotations: vec![ann("a", 0.0, 0.0, 5.0, 5.0, 47); 3],
        };
        assert_eq!(class_histogram(&[s]), BTreeMap::from([(ClassId(47), 3)]));
    }

    #[test]
    fn sampling_finds_the_single_annotation() {
        let g = build_grid(3000, 3000, 2160, 500).unwrap();
        let a = assign_cells(&g, 1.0, 1).unwrap();
        let cfg = SamplingConfig {
            tile: 500,
            min_visible_fraction: 1.0,
            ..SamplingConfig::default()
        };
        let gt = [ann("img", 1000.0, 1000.0, 1040.0, 1040.0, 47)];
        let frames = sample_frames("img", &g, &a, &gt, SampleTargets { train: 1, validation: 0 }, &cfg, 9).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].annotations.len(), 1);
        assert!(frames[0].rect().contains(gt[0].bbox()));
    }

    #[test]
    fn sampling_without_annotations_fails() {
        let g = build_grid(3000, 3000, 2160, 500).unwrap();
        let a = assign_cells(&g, 1.0, 1).unwrap();
        let cfg = SamplingConfig {
            tile: 500,
            max_attempts: 50,
            ..SamplingConfig::default()
        };
        let r = sample_frames("img", &g, &a, &[], SampleTargets { train: 1, validation: 0 }, &cfg, 9);
        assert!(matches!(r, Err(Error::InsufficientAnnotatedArea { .. })));
    }

    #[test]
    fn worked_rebalance_example() {
        // a:100, b:50, c:10 spread over frames; some frames are pure `a`.
        let (a, b, c) = (ClassId(1), ClassId(2), ClassId(3));
        let mut frames = vec![vec![a; 5]; 16]; // 80 a
        frames.push(vec![a, b]); // mixed a/b, 20 more a across these
        frames.extend(std::iter::repeat_n(vec![a, a, b, b, b], 9));
        frames.extend(std::iter::repeat_n(vec![b, b, b, b, c], 5));
        frames.extend(std::iter::repeat_n(vec![c], 5));
        frames.push(vec![b; 2]);
        let count = |fs: &[Vec<ClassId>], k: ClassId| fs.iter().flatten().filter(|&&x| x == k).count();
        assert_eq!((count(&frames, a), count(&frames, b), count(&frames, c)), (99, 50, 10));
        frames[0].push(a);
        let plan = rebalance_frames(&frames, 35.0).unwrap();
        assert_eq!(plan.threshold, 50);
        assert_eq!(plan.overrepresented, BTreeSet::from([a]));
        let kept: Vec<Vec<ClassId>> = plan.retained.iter().map(|&i| frames[i].clone()).collect();
        for (i, f) in frames.iter().enumerate() {
            if !plan.retained.contains(&i) {
                assert!(f.iter().all(|&x| x == a));
            }
        }
        assert_eq!(count(&kept, b), 50);
        assert_eq!(count(&kept, c), 10);
        assert!(count(&kept, a) >= 50);
    }

    #[test]
    fn equal_counts_remove_nothing() {
        let frames = vec![vec![ClassId(1)], vec![ClassId(2)], vec![ClassId(3)]];
        assert_eq!(rebalance_frames(&frames, 35.0).unwrap().retained, vec![0, 1, 2]);
        assert!(rebalance_frames(&[], 35.0).is_err());
    }

    #[test]
    fn label_lines_round_trip() {
        let a = ann("x", 10.25, 20.5, 110.75, 300.0, 388);
        let line = format_label_line(&a, 1088);
        let (c, b) = parse_label_line(&line, 1088).unwrap();
        assert_eq!(c, ClassId(388));
        for (p, q) in b.coords().iter().zip(a.bbox().coords()) {
            assert!((p - q).abs() < 0.5);
        }
        assert!(parse_label_line("1 0.5 0.5", 10).is_err());
        assert_eq!(label_path_for("images/train/a_1.png"), "labels/train/a_1.txt");
    }

    #[test]
    fn export_writes_crops_labels_and_manifest() {
        let img = RgbImage::from_fn(400, 300, |x, y| Rgb([x as u8, y as u8, 0]));
        let src = RasterImage::new("paint", img).unwrap();
        let sample = FrameSample {
            image_id: "paint".into(),
            origin: FrameOrigin::new(50, 40),
            tile: 100,
            split: Split::Validation,
            annotations: vec![ann("paint", 10.0, 10.0, 30.0, 20.0, 47)],
        };
        let dir = tempfile::tempdir().unwrap();
        let sum = export_split(std::slice::from_ref(&sample), &[&src], dir.path()).unwrap();
        assert_eq!((sum.frames, sum.labels), (1, 1));
        let rec = &sum.manifest[0];
        let crop = image::open(dir.path().join(&rec.frame_file)).unwrap().to_rgb8();
        assert_eq!(crop.dimensions(), (100, 100));
        assert_eq!(crop.get_pixel(0, 0), &Rgb([50, 40, 0]));
        let labels = std::fs::read_to_string(dir.path().join(label_path_for(&rec.frame_file))).unwrap();
        assert_eq!(labels.lines().count(), 1);
        let first = std::fs::read(dir.path().join("manifest.jsonl")).unwrap();
        export_split(&[sample], &[&src], dir.path()).unwrap();
        assert_eq!(first, std::fs::read(dir.path().join("manifest.jsonl")).unwrap());
    }
}
