//! JSON Lines artifacts exchanged between stages.
//!
//! Files derived from a frame plan start with a header line
//! `{"manifest_hash": "<sha256 hex>"}` so a stage can refuse inputs produced
//! against a different plan. Readers report malformed lines with their
//! 1-based line number.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::detection::{Annotation, ClassId, Detection};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub manifest_hash: String,
}

/// Global ground-truth annotation line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub image_id: String,
    pub class_id: u32,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

/// Detection in global image coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: String,
    pub class_id: u32,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub confidence: f64,
}

/// Detection in the coordinates of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDetectionRecord {
    pub frame_index: usize,
    pub class_id: u32,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub confidence: f64,
}

/// One exported training frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub frame_file: String,
    pub image_id: String,
    pub origin_x: u32,
    pub origin_y: u32,
    pub split: String,
}

impl AnnotationRecord {
    pub fn from_annotation(a: &Annotation) -> Self {
        let [x_min, y_min, x_max, y_max] = a.bbox().coords();
        Self {
            image_id: a.image_id.clone(),
            class_id: a.class_id.0,
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn to_annotation(&self) -> Result<Annotation> {
        let b = BoundingBox::new(self.x_min, self.y_min, self.x_max, self.y_max)?;
        Annotation::new(self.image_id.clone(), b, ClassId(self.class_id))
    }
}

impl DetectionRecord {
    pub fn from_detection(image_id: &str, d: &Detection) -> Self {
        let [x_min, y_min, x_max, y_max] = d.bbox().coords();
        Self {
            image_id: image_id.to_owned(),
            class_id: d.class_id().0,
            x_min,
            y_min,
            x_max,
            y_max,
            confidence: d.confidence(),
        }
    }

    pub fn to_detection(&self) -> Result<Detection> {
        let b = BoundingBox::new(self.x_min, self.y_min, self.x_max, self.y_max)?;
        Detection::new(b, ClassId(self.class_id), self.confidence)
    }
}

impl FrameDetectionRecord {
    pub fn from_detection(frame_index: usize, d: &Detection) -> Self {
        let [x_min, y_min, x_max, y_max] = d.bbox().coords();
        Self {
            frame_index,
            class_id: d.class_id().0,
            x_min,
            y_min,
            x_max,
            y_max,
            confidence: d.confidence(),
        }
    }

    pub fn to_detection(&self) -> Result<Detection> {
        let b = BoundingBox::new(self.x_min, self.y_min, self.x_max, self.y_max)?;
        Detection::new(b, ClassId(self.class_id), self.confidence)
    }
}

/// Parsed file contents: optional header plus `(line number, value)` pairs.
#[derive(Debug, Clone)]
pub struct Jsonl<T> {
    pub header: Option<Header>,
    pub records: Vec<(usize, T)>,
}

impl<T> Jsonl<T> {
    pub fn values(self) -> Vec<T> {
        self.records.into_iter().map(|(_, v)| v).collect()
    }

    /// Converts every record, reporting failures against their line.
    pub fn try_map<U>(self, path: &Path, mut f: impl FnMut(T) -> Result<U>) -> Result<Jsonl<U>> {
        let records = self
            .records
            .into_iter()
            .map(|(line, v)| {
                f(v).map(|u| (line, u)).map_err(|e| Error::SchemaViolation {
                    path: path.to_owned(),
                    line,
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Jsonl {
            header: self.header,
            records,
        })
    }
}

pub fn parse_jsonl<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Jsonl<T>> {
    let mut header = None;
    let mut records = Vec::new();
    let mut seen_content = false;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if !seen_content {
            seen_content = true;
            if let Ok(h) = serde_json::from_str::<Header>(trimmed) {
                header = Some(h);
                continue;
            }
        }
        let value = serde_json::from_str(trimmed).map_err(|e| Error::SchemaViolation {
            path: path.to_owned(),
            line: line_no,
            message: e.to_string(),
        })?;
        records.push((line_no, value));
    }
    Ok(Jsonl { header, records })
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Jsonl<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(&text, path)
}

pub fn to_jsonl<T: Serialize>(header: Option<&Header>, records: &[T]) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str(&serde_json::to_string(h).expect("header serializes"));
        out.push('\n');
    }
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, header: Option<&Header>, records: &[T]) -> Result<()> {
    write_file(path, to_jsonl(header, records).as_bytes())
}

pub(crate) fn write_file(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Loads a ground-truth annotation file.
pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<Annotation>> {
    let path = path.as_ref();
    Ok(read_jsonl::<AnnotationRecord>(path)?
        .try_map(path, |r| r.to_annotation())?
        .values())
}

/// Detections tagged with the image they belong to.
pub type ImageDetections = Vec<(String, Detection)>;

/// Loads a global detections file, returning its header and detections
/// grouped in file order along with each record's image id.
pub fn read_detections(path: impl AsRef<Path>) -> Result<(Option<Header>, ImageDetections)> {
    let path = path.as_ref();
    let parsed = read_jsonl::<DetectionRecord>(path)?.try_map(path, |r| Ok((r.image_id.clone(), r.to_detection()?)))?;
    Ok((parsed.header.clone(), parsed.values()))
}
