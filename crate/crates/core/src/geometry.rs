//! Axis-aligned box arithmetic.
//!
//! Coordinates are continuous pixel positions with the origin at the top-left
//! corner and `y` growing downward. A box's area is the plain product of its
//! coordinate differences, so `[0, 0, 10, 10]` has area 100.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An axis-aligned rectangle `[x_min, y_min, x_max, y_max]`.
///
/// Zero-area boxes are representable; ratio operations over them fail with
/// [`Error::UndefinedRatio`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct BoundingBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

#[derive(Deserialize)]
struct RawBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl TryFrom<RawBox> for BoundingBox {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        BoundingBox::new(raw.x_min, raw.y_min, raw.x_max, raw.y_max)
    }
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let finite = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min > x_max || y_min > y_max {
            return Err(Error::InvalidBox {
                x_min,
                y_min,
                x_max,
                y_max,
            });
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Box from its top-left corner and size.
    pub fn from_xywh(x: f64, y: f64, width: f64, height: f64) -> Result<Self> {
        Self::new(x, y, x + width, y + height)
    }

    #[inline]
    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    #[inline]
    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    #[inline]
    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    #[inline]
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    /// Overlapping region, or `None` when the boxes share no area.
    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let x_min = self.x_min.max(other.x_min);
        let y_min = self.y_min.max(other.y_min);
        let x_max = self.x_max.min(other.x_max);
        let y_max = self.y_max.min(other.y_max);
        (x_min < x_max && y_min < y_max).then_some(BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Whether `other` lies entirely inside `self` (boundaries included).
    pub fn contains(&self, other: &BoundingBox) -> bool {
        self.x_min <= other.x_min
            && self.y_min <= other.y_min
            && other.x_max <= self.x_max
            && other.y_max <= self.y_max
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BoundingBox {
        BoundingBox {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    /// Frame-local box to global image coordinates.
    pub fn to_global(&self, origin: FrameOrigin) -> BoundingBox {
        self.translate(f64::from(origin.x), f64::from(origin.y))
    }

    /// Global box to the coordinates of the frame starting at `origin`.
    pub fn to_local(&self, origin: FrameOrigin) -> BoundingBox {
        self.translate(-f64::from(origin.x), -f64::from(origin.y))
    }

    /// Lexicographic order on `(x_min, y_min, x_max, y_max)`.
    pub fn cmp_coords(&self, other: &BoundingBox) -> Ordering {
        self.coords()
            .iter()
            .zip(other.coords().iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

/// Top-left corner of a window in global image space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameOrigin {
    pub x: u32,
    pub y: u32,
}

impl FrameOrigin {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }
}

pub fn area(b: &BoundingBox) -> f64 {
    b.area()
}

/// Intersection over union. Fails when both boxes have zero area.
pub fn iou(b1: &BoundingBox, b2: &BoundingBox) -> Result<f64> {
    let (a1, a2) = (b1.area(), b2.area());
    if a1 <= 0.0 && a2 <= 0.0 {
        return Err(Error::UndefinedRatio(*b1));
    }
    let inter = b1.intersection_area(b2);
    Ok(inter / (a1 + a2 - inter))
}

/// Intersection over the smaller of the two areas. Fails when either box has
/// zero area.
pub fn iom(b1: &BoundingBox, b2: &BoundingBox) -> Result<f64> {
    let (a1, a2) = (b1.area(), b2.area());
    if a1 <= 0.0 {
        return Err(Error::UndefinedRatio(*b1));
    }
    if a2 <= 0.0 {
        return Err(Error::UndefinedRatio(*b2));
    }
    Ok(b1.intersection_area(b2) / a1.min(a2))
}

/// IoM for boxes already known to have positive area.
pub(crate) fn iom_positive(b1: &BoundingBox, b2: &BoundingBox) -> f64 {
    b1.intersection_area(b2) / b1.area().min(b2.area())
}

/// IoU for boxes already known to have positive area.
pub(crate) fn iou_positive(b1: &BoundingBox, b2: &BoundingBox) -> f64 {
    let inter = b1.intersection_area(b2);
    inter / (b1.area() + b2.area() - inter)
}

pub fn to_global(b: &BoundingBox, origin: FrameOrigin) -> BoundingBox {
    b.to_global(origin)
}

pub fn to_local(b: &BoundingBox, origin: FrameOrigin) -> BoundingBox {
    b.to_local(origin)
}
