//! Non-maximal suppression by Intersection-over-Minimum.
//!
//! After dropping detections below the confidence threshold, survivors are
//! visited in canonical order (largest area first). Each detection that has
//! not been removed yet becomes a pivot: every other remaining detection of the
//! same class whose IoM with the pivot reaches the IoM threshold is removed.
//! Because the pivot is the largest remaining member of its group, the group
//! collapses onto the largest box regardless of confidence. Nested duplicates
//! coming from overlapping windows therefore resolve to the outer box.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detection::{sort_canonical, ClassId, Detection};
use crate::error::{Error, Result};
use crate::geometry::{iom, iom_positive, BoundingBox};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmsConfig {
    /// `t`: same-class detections with IoM at or above this collapse.
    pub iom_threshold: f64,
    /// `c*`: detections with confidence below this are dropped first.
    pub confidence_threshold: f64,
}

impl NmsConfig {
    /// Thresholds must lie in `[0, 1]`; use [`NmsConfig::without_grouping`]
    /// to disable the IoM stage.
    pub fn new(iom_threshold: f64, confidence_threshold: f64) -> Result<Self> {
        for (name, v) in [("IoM", iom_threshold), ("confidence", confidence_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} threshold {v} outside [0, 1]")));
            }
        }
        Ok(Self {
            iom_threshold,
            confidence_threshold,
        })
    }

    /// Confidence filtering only; no two distinct boxes ever group.
    pub fn without_grouping(confidence_threshold: f64) -> Self {
        Self {
            iom_threshold: f64::INFINITY,
            confidence_threshold,
        }
    }
}

impl Default for NmsConfig {
    fn default() -> Self {
        Self {
            iom_threshold: 0.7,
            confidence_threshold: 0.75,
        }
    }
}

/// Keeps detections with `confidence >= c_star`, preserving order.
pub fn filter_confidence(dets: &[Detection], c_star: f64) -> Vec<Detection> {
    dets.iter()
        .filter(|d| d.confidence() >= c_star)
        .copied()
        .collect()
}

/// Symmetric matrix of pairwise IoM with a unit diagonal.
pub fn pairwise_iom(boxes: &[BoundingBox]) -> Result<Vec<Vec<f64>>> {
    if let Some((index, bbox)) = boxes.iter().enumerate().find(|(_, b)| b.area() <= 0.0) {
        return Err(Error::DegenerateBox { index, bbox: *bbox });
    }
    let n = boxes.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = 1.0;
        for j in i + 1..n {
            let v = iom(&boxes[i], &boxes[j])?;
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Ok(m)
}

/// Confidence filter followed by same-class IoM grouping that keeps the
/// largest box of each group. Output is in canonical order.
pub fn custom_nms(dets: &[Detection], cfg: &NmsConfig) -> Vec<Detection> {
    let mut survivors = filter_confidence(dets, cfg.confidence_threshold);
    sort_canonical(&mut survivors);

    // Grouping never crosses classes, so each class is processed on its own
    // list of positions into `survivors`.
    let mut by_class: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for (i, d) in survivors.iter().enumerate() {
        by_class.entry(d.class_id()).or_default().push(i);
    }

    let mut removed = vec![false; survivors.len()];
    for members in by_class.values() {
        for (pos, &i) in members.iter().enumerate() {
            if removed[i] {
                continue;
            }
            let pivot = survivors[i].bbox();
            for &j in &members[pos + 1..] {
                if !removed[j] && iom_positive(pivot, survivors[j].bbox()) >= cfg.iom_threshold {
                    removed[j] = true;
                }
            }
        }
    }

    survivors
        .into_iter()
        .zip(removed)
        .filter_map(|(d, r)| (!r).then_some(d))
        .collect()
}

/// Exhaustive reference evaluation of [`custom_nms`] for tiny inputs.
///
/// Rather than simulating the pivot loop, it enumerates every subset of the
/// confidence-filtered detections and returns the unique one that is
/// self-consistent: a detection belongs to it exactly when no larger (earlier
/// in canonical order) member of the same class overlaps it with IoM at or
/// above the threshold. All ordering and overlap arithmetic is recomputed here
/// from raw coordinates.
pub mod oracle {
    use super::*;

    pub const MAX_DETECTIONS: usize = 12;

    fn raw_area(c: &[f64; 4]) -> f64 {
        (c[2] - c[0]) * (c[3] - c[1])
    }

    fn raw_iom(a: &[f64; 4], b: &[f64; 4]) -> f64 {
        let w = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
        let h = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
        w * h / raw_area(a).min(raw_area(b))
    }

    /// `true` when `a` is processed before `b`.
    fn precedes(a: &Detection, b: &Detection) -> bool {
        let (ca, cb) = (a.bbox().coords(), b.bbox().coords());
        let (aa, ab) = (raw_area(&ca), raw_area(&cb));
        if aa != ab {
            return aa > ab;
        }
        if a.confidence() != b.confidence() {
            return a.confidence() > b.confidence();
        }
        for k in 0..4 {
            if ca[k] != cb[k] {
                return ca[k] < cb[k];
            }
        }
        a.class_id().0 < b.class_id().0
    }

    pub fn brute_force_nms_oracle(dets: &[Detection], cfg: &NmsConfig) -> Result<Vec<Detection>> {
        if dets.len() > MAX_DETECTIONS {
            return Err(Error::InputTooLarge {
                got: dets.len(),
                max: MAX_DETECTIONS,
            });
        }
        let mut kept: Vec<Detection> = dets
            .iter()
            .filter(|d| d.confidence() >= cfg.confidence_threshold)
            .copied()
            .collect();
        // insertion sort by `precedes`
        for i in 1..kept.len() {
            let mut j = i;
            while j > 0 && precedes(&kept[j], &kept[j - 1]) {
                kept.swap(j, j - 1);
                j -= 1;
            }
        }
        let n = kept.len();
        let suppresses = |i: usize, j: usize| {
            i < j
                && kept[i].class_id() == kept[j].class_id()
                && raw_iom(&kept[i].bbox().coords(), &kept[j].bbox().coords()) >= cfg.iom_threshold
        };

        let mut solution = None;
        for mask in 0u32..(1u32 << n) {
            let member = |k: usize| mask & (1 << k) != 0;
            let consistent = (0..n).all(|j| {
                let blocked = (0..n).any(|i| member(i) && suppresses(i, j));
                member(j) == !blocked
            });
            if consistent {
                assert!(solution.is_none(), "self-consistent subset must be unique");
                solution = Some(mask);
            }
        }
        let mask = solution.expect("a self-consistent subset always exists");
        Ok((0..n)
            .filter(|k| mask & (1 << k) != 0)
            .map(|k| kept[k])
            .collect())
    }
}

pub use oracle::brute_force_nms_oracle;
