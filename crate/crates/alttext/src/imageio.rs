//! Conversions between encoded images and the core raster type.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use alttext_core::raster::Rgba;
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use image::{ImageFormat, RgbaImage};

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("cannot decode image: {0}")]
    Decode(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub fn decode(bytes: &[u8]) -> Result<Rgba, ImageError> {
    let img = image::load_from_memory(bytes)
        .map_err(|e| ImageError::Decode(e.to_string()))?
        .to_rgba8();
    let (w, h) = img.dimensions();
    Rgba::new(w, h, img.into_raw()).map_err(|e| ImageError::Decode(e.to_string()))
}

pub fn decode_base64(b64: &str) -> Result<Rgba, ImageError> {
    let raw = b64.strip_prefix("data:image/png;base64,").unwrap_or(b64);
    let bytes = STANDARD
        .decode(raw.trim())
        .map_err(|e| ImageError::Decode(e.to_string()))?;
    decode(&bytes)
}

pub fn load(path: &Path) -> Result<Rgba, ImageError> {
    let bytes = std::fs::read(path).map_err(|source| ImageError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}

/// Pixel size from the file header, without decoding.
pub fn dimensions(path: &Path) -> Option<(u32, u32)> {
    image::image_dimensions(path).ok()
}

pub fn encode_png(img: &Rgba) -> Vec<u8> {
    let buf = RgbaImage::from_raw(img.width(), img.height(), img.data().to_vec())
        .expect("raster length matches its size");
    let mut out = Vec::new();
    buf.write_to(&mut Cursor::new(&mut out), ImageFormat::Png)
        .expect("PNG encoding into memory cannot fail");
    out
}

pub fn encode_png_base64(img: &Rgba) -> String {
    STANDARD.encode(encode_png(img))
}

pub fn save_png(img: &Rgba, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, encode_png(img))
}

/// `<dir>/<screen_id>.{png,jpg,jpeg}`, whichever exists first.
pub fn find_screenshot(dir: &Path, screen_id: &str) -> Option<PathBuf> {
    ["png", "jpg", "jpeg"]
        .iter()
        .map(|ext| dir.join(format!("{screen_id}.{ext}")))
        .find(|p| p.is_file())
}
