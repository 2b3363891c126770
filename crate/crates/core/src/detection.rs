//! Detections and ground-truth annotations shared across stages.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// Punch category identifier (catalogue number, e.g. 47 or 388).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u32);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A predicted box with its class and confidence score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    bbox: BoundingBox,
    class_id: ClassId,
    confidence: f64,
}

impl Detection {
    /// Requires a positive-area box and a confidence in `[0, 1]`.
    pub fn new(bbox: BoundingBox, class_id: ClassId, confidence: f64) -> Result<Self> {
        if bbox.area() <= 0.0 {
            return Err(Error::UndefinedRatio(bbox));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidConfidence(confidence));
        }
        Ok(Self {
            bbox,
            class_id,
            confidence,
        })
    }

    #[inline]
    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    #[inline]
    pub fn class_id(&self) -> ClassId {
        self.class_id
    }

    #[inline]
    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    /// Same detection with its box replaced; the new box must have positive area.
    pub fn with_bbox(&self, bbox: BoundingBox) -> Result<Self> {
        Self::new(bbox, self.class_id, self.confidence)
    }

    /// Processing order used by NMS and reports: descending area, then
    /// descending confidence, then ascending coordinates and class.
    pub fn canonical_cmp(&self, other: &Detection) -> Ordering {
        other
            .bbox
            .area()
            .total_cmp(&self.bbox.area())
            .then_with(|| other.confidence.total_cmp(&self.confidence))
            .then_with(|| self.bbox.cmp_coords(&other.bbox))
            .then_with(|| self.class_id.cmp(&other.class_id))
    }
}

pub fn sort_canonical(dets: &mut [Detection]) {
    dets.sort_by(Detection::canonical_cmp);
}

/// A ground-truth box attached to an image.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub image_id: String,
    bbox: BoundingBox,
    pub class_id: ClassId,
}

impl Annotation {
    pub fn new(image_id: impl Into<String>, bbox: BoundingBox, class_id: ClassId) -> Result<Self> {
        if bbox.area() <= 0.0 {
            return Err(Error::UndefinedRatio(bbox));
        }
        Ok(Self {
            image_id: image_id.into(),
            bbox,
            class_id,
        })
    }

    #[inline]
    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }
}
