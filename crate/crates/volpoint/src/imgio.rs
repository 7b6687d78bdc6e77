//! Image file IO and heatmap rendering. Binary PPM (P6) is the canonical
//! format; PNG is available through the file extension.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::render::RenderedImage;
use crate::viewsphere::{SphericalDirection, SpherePixelization};

/// Encode as binary PPM (P6).
pub fn encode_ppm(img: &RenderedImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

/// Decode a binary PPM (P6) produced by [`encode_ppm`].
pub fn decode_ppm(bytes: &[u8]) -> Result<RenderedImage> {
    let err = |m: &str| Error::parse("ppm", m.to_string());
    // Header: magic, width, height, maxval, single whitespace, payload.
    let mut fields = Vec::new();
    let mut pos = 0usize;
    while fields.len() < 4 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(
            std::str::from_utf8(&bytes[start..pos]).map_err(|_| err("non-utf8 header"))?,
        );
    }
    if fields.len() != 4 || fields[0] != "P6" {
        return Err(err("expected P6 header"));
    }
    let width: usize = fields[1].parse().map_err(|_| err("bad width"))?;
    let height: usize = fields[2].parse().map_err(|_| err("bad height"))?;
    if fields[3] != "255" {
        return Err(err("only maxval 255 supported"));
    }
    pos += 1; // single whitespace after maxval
    let payload = bytes
        .get(pos..pos + width * height * 3)
        .ok_or_else(|| err("truncated payload"))?;
    RenderedImage::new(width, height, payload.to_vec())
}

/// Write an image; the format follows the extension (.ppm or .png).
pub fn write_image(path: &Path, img: &RenderedImage) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => {
            let buf = image::RgbImage::from_raw(
                img.width() as u32,
                img.height() as u32,
                img.pixels().to_vec(),
            )
            .expect("pixel length checked by RenderedImage");
            buf.save(path)
                .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
        }
        _ => fs::write(path, encode_ppm(img))
            .map_err(|e| Error::io(path.display().to_string(), e)),
    }
}

/// Read back a .ppm or .png image.
pub fn read_image(path: &Path) -> Result<RenderedImage> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => {
            let img = image::open(path)
                .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?
                .into_rgb8();
            RenderedImage::new(img.width() as usize, img.height() as usize, img.into_raw())
        }
        _ => {
            let bytes =
                fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
            decode_ppm(&bytes)
        }
    }
}

/// Sequential colormap: dark blue through cyan and yellow to red.
fn colormap(t: f64) -> [u8; 3] {
    let stops = [
        (0.0, [0.07, 0.05, 0.35]),
        (0.33, [0.05, 0.65, 0.85]),
        (0.66, [0.95, 0.9, 0.25]),
        (1.0, [0.85, 0.1, 0.08]),
    ];
    let t = t.clamp(0.0, 1.0);
    let mut rgb = stops[stops.len() - 1].1;
    for w in stops.windows(2) {
        let (t0, c0) = w[0];
        let (t1, c1) = w[1];
        if t <= t1 {
            let f = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
            rgb = [
                c0[0] + f * (c1[0] - c0[0]),
                c0[1] + f * (c1[1] - c0[1]),
                c0[2] + f * (c1[2] - c0[2]),
            ];
            break;
        }
    }
    [
        (rgb[0] * 255.0).round() as u8,
        (rgb[1] * 255.0).round() as u8,
        (rgb[2] * 255.0).round() as u8,
    ]
}

/// Render one value per viewpoint label onto an equirectangular
/// azimuth-elevation grid (azimuth left to right, north pole at the top).
pub fn heatmap_equirect(
    p: &SpherePixelization,
    per_label: &[f64],
    width: usize,
    height: usize,
) -> Result<RenderedImage> {
    if per_label.len() != p.n_pixels() {
        return Err(Error::ShapeMismatch(format!(
            "expected {} label values, got {}",
            p.n_pixels(),
            per_label.len()
        )));
    }
    let lo = per_label.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = per_label.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = if hi > lo { hi - lo } else { 1.0 };
    let mut pixels = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        let el = 90.0 - 180.0 * (y as f64 + 0.5) / height as f64;
        for x in 0..width {
            let az = 360.0 * (x as f64 + 0.5) / width as f64;
            let label = p.label_of(SphericalDirection::new(az, el)?);
            let t = (per_label[label.index()] - lo) / range;
            pixels.extend_from_slice(&colormap(t));
        }
    }
    RenderedImage::new(width, height, pixels)
}
