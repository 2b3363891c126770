//! Sliding-window planning over large images.
//!
//! Windows advance by `stride = tile - overlap` along each axis. The last
//! window on an axis is clamped so it ends exactly at the image edge, which
//! makes the final overlap larger than the nominal one. An axis shorter than
//! the tile gets a single window that is zero-padded symmetrically.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, FrameOrigin};
use crate::io::{read_jsonl, write_file};

pub const DEFAULT_TILE: u32 = 1088;
pub const DEFAULT_OVERLAP: u32 = 324;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilingConfig {
    tile: u32,
    overlap: u32,
}

impl Default for TilingConfig {
    fn default() -> Self {
        Self {
            tile: DEFAULT_TILE,
            overlap: DEFAULT_OVERLAP,
        }
    }
}

impl TilingConfig {
    pub fn new(tile: u32, overlap: u32) -> Result<Self> {
        if tile == 0 || overlap >= tile {
            return Err(Error::InvalidConfig(format!(
                "tiling requires 0 <= overlap < tile, got tile {tile}, overlap {overlap}"
            )));
        }
        Ok(Self { tile, overlap })
    }

    pub fn tile(&self) -> u32 {
        self.tile
    }

    pub fn overlap(&self) -> u32 {
        self.overlap
    }

    pub fn stride(&self) -> u32 {
        self.tile - self.overlap
    }
}

/// Number of windows along an axis of `length` pixels.
pub fn frames_per_axis(length: u32, tile: u32, stride: u32) -> u32 {
    if length <= tile {
        1
    } else {
        (length - tile).div_ceil(stride) + 1
    }
}

/// Window start positions along one axis, ascending.
pub fn axis_origins(length: u32, tile: u32, stride: u32) -> Vec<u32> {
    let n = frames_per_axis(length, tile, stride);
    if n == 1 {
        return vec![0];
    }
    let mut origins: Vec<u32> = (0..n - 1).map(|k| k * stride).collect();
    origins.push(length - tile);
    origins
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frame {
    pub index: usize,
    pub origin: FrameOrigin,
    pub padded: bool,
}

/// The ordered (row-major) set of windows covering one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePlan {
    image_id: String,
    width: u32,
    height: u32,
    tile: u32,
    frames: Vec<Frame>,
}

pub fn plan_frames(image_id: &str, width: u32, height: u32, cfg: TilingConfig) -> Result<FramePlan> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidConfig(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    let tile = cfg.tile();
    let stride = cfg.stride();
    let xs = axis_origins(width, tile, stride);
    let ys = axis_origins(height, tile, stride);
    let padded = width < tile || height < tile;
    let frames = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| FrameOrigin::new(x, y)))
        .enumerate()
        .map(|(index, origin)| Frame {
            index,
            origin,
            padded,
        })
        .collect();
    Ok(FramePlan {
        image_id: image_id.to_owned(),
        width,
        height,
        tile,
        frames,
    })
}

impl FramePlan {
    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn tile(&self) -> u32 {
        self.tile
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, index: usize) -> Result<&Frame> {
        self.frames.get(index).ok_or(Error::UnknownFrameIndex(index))
    }

    pub fn image_rect(&self) -> BoundingBox {
        BoundingBox::new(0.0, 0.0, f64::from(self.width), f64::from(self.height))
            .expect("plan dimensions are positive")
    }

    /// Offset of the image inside the tile canvas for padded axes.
    pub fn pad_offsets(&self) -> (u32, u32) {
        let pad = |len: u32| if len < self.tile { (self.tile - len) / 2 } else { 0 };
        (pad(self.width), pad(self.height))
    }

    /// Image pixels seen by a frame, in global coordinates.
    pub fn frame_rect(&self, frame: &Frame) -> BoundingBox {
        let x = f64::from(frame.origin.x);
        let y = f64::from(frame.origin.y);
        let w = f64::from(self.tile.min(self.width));
        let h = f64::from(self.tile.min(self.height));
        BoundingBox::new(x, y, x + w, y + h).expect("frame extents are ordered")
    }

    /// Translates a box from a frame's tile canvas to global coordinates,
    /// accounting for padding.
    pub fn local_to_global(&self, frame: &Frame, local: &BoundingBox) -> BoundingBox {
        let (px, py) = self.pad_offsets();
        local.to_global(frame.origin).translate(-f64::from(px), -f64::from(py))
    }

    /// Inverse of [`FramePlan::local_to_global`].
    pub fn global_to_local(&self, frame: &Frame, global: &BoundingBox) -> BoundingBox {
        let (px, py) = self.pad_offsets();
        global.to_local(frame.origin).translate(f64::from(px), f64::from(py))
    }

    /// Indices of all frames that fully contain `b`.
    pub fn frames_covering(&self, b: &BoundingBox) -> Vec<usize> {
        self.frames
            .iter()
            .filter(|f| self.frame_rect(f).contains(b))
            .map(|f| f.index)
            .collect()
    }

    pub fn records(&self) -> Vec<FrameRecord> {
        self.frames
            .iter()
            .map(|f| FrameRecord {
                image_id: self.image_id.clone(),
                frame_index: f.index,
                x: f.origin.x,
                y: f.origin.y,
                tile: self.tile,
                padded: f.padded,
                image_width: self.width,
                image_height: self.height,
            })
            .collect()
    }

    /// The frame manifest serialized as JSON Lines.
    pub fn manifest_jsonl(&self) -> String {
        let mut out = String::new();
        for r in self.records() {
            out.push_str(&serde_json::to_string(&r).expect("frame record serializes"));
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the manifest bytes, hex encoded. Every artifact derived
    /// from this plan carries it.
    pub fn manifest_hash(&self) -> String {
        hex::encode(Sha256::digest(self.manifest_jsonl().as_bytes()))
    }

    pub fn write_manifest(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path, self.manifest_jsonl().as_bytes())
    }

    /// Loads a manifest file written by [`FramePlan::write_manifest`].
    pub fn read_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let records = read_jsonl::<FrameRecord>(path)?.values();
        Self::from_records(&records).map_err(|e| match e {
            Error::ManifestMismatch(m) => Error::ManifestMismatch(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Rebuilds a plan from manifest records, checking they are consistent.
    pub fn from_records(records: &[FrameRecord]) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::ManifestMismatch("manifest has no frames".into()))?;
        let mut frames = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if r.image_id != first.image_id
                || r.tile != first.tile
                || r.image_width != first.image_width
                || r.image_height != first.image_height
            {
                return Err(Error::ManifestMismatch(format!(
                    "frame {} disagrees with frame 0 on image or tile",
                    r.frame_index
                )));
            }
            if r.frame_index != i {
                return Err(Error::ManifestMismatch(format!(
                    "expected frame index {i}, found {}",
                    r.frame_index
                )));
            }
            frames.push(Frame {
                index: r.frame_index,
                origin: FrameOrigin::new(r.x, r.y),
                padded: r.padded,
            });
        }
        Ok(Self {
            image_id: first.image_id.clone(),
            width: first.image_width,
            height: first.image_height,
            tile: first.tile,
            frames,
        })
    }
}

/// One line of the frame manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub image_id: String,
    pub frame_index: usize,
    pub x: u32,
    pub y: u32,
    pub tile: u32,
    pub padded: bool,
    pub image_width: u32,
    pub image_height: u32,
}
