//! Random-access pixel reads over large rasters.

use std::path::Path;

use image::{ImageReader, RgbImage};

use crate::error::{Error, Result};
use crate::geometry::FrameOrigin;
use crate::tiler::{Frame, FramePlan};

/// Read-only access to an image's pixels. Crops are returned as 8-bit RGB.
///
/// Implementations must tolerate concurrent `read_crop` calls.
pub trait ImageSource: Send + Sync {
    fn image_id(&self) -> &str;
    fn width(&self) -> u32;
    fn height(&self) -> u32;

    /// Always 3: grayscale and alpha inputs are converted to RGB.
    fn channels(&self) -> u8 {
        3
    }

    /// Reads a `width x height` rectangle starting at `origin`. The rectangle
    /// must lie inside the image.
    fn read_region(&self, origin: FrameOrigin, width: u32, height: u32) -> Result<RgbImage>;

    /// Reads a `side x side` square starting at `origin`.
    fn read_crop(&self, origin: FrameOrigin, side: u32) -> Result<RgbImage> {
        self.read_region(origin, side, side)
    }
}

/// A fully decoded image held in memory.
#[derive(Debug, Clone)]
pub struct RasterImage {
    image_id: String,
    pixels: RgbImage,
}

impl RasterImage {
    pub fn new(image_id: impl Into<String>, pixels: RgbImage) -> Result<Self> {
        if pixels.width() == 0 || pixels.height() == 0 {
            return Err(Error::InvalidConfig("image has no pixels".into()));
        }
        Ok(Self {
            image_id: image_id.into(),
            pixels,
        })
    }

    pub fn pixels(&self) -> &RgbImage {
        &self.pixels
    }
}

impl ImageSource for RasterImage {
    fn image_id(&self) -> &str {
        &self.image_id
    }

    fn width(&self) -> u32 {
        self.pixels.width()
    }

    fn height(&self) -> u32 {
        self.pixels.height()
    }

    fn read_region(&self, origin: FrameOrigin, width: u32, height: u32) -> Result<RgbImage> {
        let fits = |start: u32, ext: u32, len: u32| start.checked_add(ext).is_some_and(|end| end <= len);
        if width == 0
            || height == 0
            || !fits(origin.x, width, self.width())
            || !fits(origin.y, height, self.height())
        {
            return Err(Error::OutOfBoundsFrame {
                x: origin.x,
                y: origin.y,
                tile: width.max(height),
                width: self.width(),
                height: self.height(),
            });
        }
        Ok(image::imageops::crop_imm(&self.pixels, origin.x, origin.y, width, height).to_image())
    }
}

/// Opens a PNG or TIFF file. The image id is the file stem.
pub fn open(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::UnsupportedFormat {
            path: path.to_owned(),
            message: other.to_string(),
        },
    })?;
    let image_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    RasterImage::new(image_id, decoded.to_rgb8())
}

/// Reads the tile canvas a detector sees for `frame`. Axes shorter than the
/// tile are zero-padded symmetrically, matching [`FramePlan::pad_offsets`].
pub fn read_frame(src: &dyn ImageSource, plan: &FramePlan, frame: &Frame) -> Result<RgbImage> {
    let tile = plan.tile();
    if !frame.padded {
        return src.read_crop(frame.origin, tile);
    }
    let w = tile.min(src.width());
    let h = tile.min(src.height());
    let (px, py) = plan.pad_offsets();
    let mut canvas = RgbImage::new(tile, tile);
    let visible = src.read_region(frame.origin, w, h)?;
    image::imageops::replace(&mut canvas, &visible, i64::from(px), i64::from(py));
    Ok(canvas)
}
