//! Debug rendering of detections onto a raster.

use image::{Rgb, RgbImage};

use crate::detection::{ClassId, Detection};

/// Stable, well-spread color per class.
pub fn class_color(class: ClassId) -> Rgb<u8> {
    // golden-ratio hue walk, full saturation
    let h = (f64::from(class.0) * 0.618_033_988_749_895).fract() * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let c = |v: f64| (v * 255.0).round() as u8;
    Rgb([c(r), c(g), c(b)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverlayStyle {
    pub thickness: u32,
    /// Glyph scale; 0 disables labels.
    pub label_scale: u32,
}

impl Default for OverlayStyle {
    fn default() -> Self {
        Self {
            thickness: 2,
            label_scale: 2,
        }
    }
}

// 3x5 glyphs, one row per u8 using the low 3 bits
fn glyph(c: char) -> Option<[u8; 5]> {
    Some(match c {
        '0' => [0b111, 0b101, 0b101, 0b101, 0b111],
        '1' => [0b010, 0b110, 0b010, 0b010, 0b111],
        '2' => [0b111, 0b001, 0b111, 0b100, 0b111],
        '3' => [0b111, 0b001, 0b111, 0b001, 0b111],
        '4' => [0b101, 0b101, 0b111, 0b001, 0b001],
        '5' => [0b111, 0b100, 0b111, 0b001, 0b111],
        '6' => [0b111, 0b100, 0b111, 0b101, 0b111],
        '7' => [0b111, 0b001, 0b001, 0b001, 0b001],
        '8' => [0b111, 0b101, 0b111, 0b101, 0b111],
        '9' => [0b111, 0b101, 0b111, 0b001, 0b111],
        '.' => [0b000, 0b000, 0b000, 0b000, 0b010],
        ' ' => [0; 5],
        _ => return None,
    })
}

fn put(img: &mut RgbImage, x: i64, y: i64, color: Rgb<u8>) {
    if x >= 0 && y >= 0 && x < i64::from(img.width()) && y < i64::from(img.height()) {
        img.put_pixel(x as u32, y as u32, color);
    }
}

fn fill(img: &mut RgbImage, x0: i64, y0: i64, x1: i64, y1: i64, color: Rgb<u8>) {
    for y in y0.max(0)..y1.min(i64::from(img.height())) {
        for x in x0.max(0)..x1.min(i64::from(img.width())) {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}

/// Draws `text` with its top-left corner at `(x, y)`; unsupported characters
/// are skipped.
pub fn draw_text(img: &mut RgbImage, x: i64, y: i64, text: &str, scale: u32, color: Rgb<u8>) {
    let s = i64::from(scale);
    let mut cx = x;
    for ch in text.chars() {
        let Some(rows) = glyph(ch) else { continue };
        for (r, bits) in rows.iter().enumerate() {
            for col in 0..3 {
                if bits >> (2 - col) & 1 == 1 {
                    for dy in 0..s {
                        for dx in 0..s {
                            put(img, cx + col * s + dx, y + r as i64 * s + dy, color);
                        }
                    }
                }
            }
        }
        cx += 4 * s;
    }
}

/// Outlines each detection and writes "class confidence" above it.
pub fn draw_detections(img: &mut RgbImage, dets: &[Detection], style: &OverlayStyle) {
    let th = i64::from(style.thickness.max(1));
    for d in dets {
        let color = class_color(d.class_id());
        let [x0, y0, x1, y1] = d.bbox().coords().map(|v| v.round() as i64);
        fill(img, x0, y0, x1, y0 + th, color);
        fill(img, x0, y1 - th, x1, y1, color);
        fill(img, x0, y0, x0 + th, y1, color);
        fill(img, x1 - th, y0, x1, y1, color);
        if style.label_scale > 0 {
            let s = i64::from(style.label_scale);
            let label = format!("{} {:.2}", d.class_id(), d.confidence());
            let ty = if y0 - 6 * s >= 0 { y0 - 6 * s } else { y0 + th + s };
            draw_text(img, x0, ty, &label, style.label_scale, color);
        }
    }
}

pub fn render_overlay(img: &RgbImage, dets: &[Detection], style: &OverlayStyle) -> RgbImage {
    let mut out = img.clone();
    draw_detections(&mut out, dets, style);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;

    #[test]
    fn empty_overlay_is_identity() {
        let img = RgbImage::from_fn(40, 30, |x, y| Rgb([x as u8, y as u8, 7]));
        assert_eq!(render_overlay(&img, &[], &OverlayStyle::default()), img);
    }

    #[test]
    fn outline_touches_edges_only() {
        let img = RgbImage::new(50, 50);
        let d = Detection::new(BoundingBox::new(10.0, 20.0, 30.0, 40.0).unwrap(), ClassId(47), 0.9).unwrap();
        let style = OverlayStyle {
            thickness: 1,
            label_scale: 0,
        };
        let out = render_overlay(&img, &[d], &style);
        let c = class_color(ClassId(47));
        assert_eq!(*out.get_pixel(10, 20), c);
        assert_eq!(*out.get_pixel(29, 39), c);
        assert_eq!(*out.get_pixel(20, 30), Rgb([0, 0, 0]));
        assert_eq!(*out.get_pixel(5, 5), Rgb([0, 0, 0]));
    }

    #[test]
    fn colors_are_stable_and_distinct() {
        assert_eq!(class_color(ClassId(138)), class_color(ClassId(138)));
        let cs: Vec<_> = [47, 138, 333, 388].map(|c| class_color(ClassId(c))).to_vec();
        for i in 0..cs.len() {
            for j in i + 1..cs.len() {
                assert_ne!(cs[i], cs[j]);
            }
        }
    }

    #[test]
    fn labels_stay_inside_canvas() {
        let mut img = RgbImage::new(20, 20);
        let d = Detection::new(BoundingBox::new(15.0, 0.0, 20.0, 5.0).unwrap(), ClassId(388), 1.0).unwrap();
        draw_detections(&mut img, &[d], &OverlayStyle::default());
        assert!(img.pixels().any(|p| p.0 != [0, 0, 0]));
    }
}
