//! Minimal RGBA raster with cropping and nearest-neighbor resampling.

use alloc::vec;
use alloc::vec::Vec;

use crate::icon::CropRect;

/// Edge length of upscaled icons.
pub const ICON_SIDE: u32 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum RasterError {
    #[error("raster must be non-empty")]
    Empty,
    #[error("pixel buffer holds {got} bytes, expected {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("crop rectangle exceeds the raster")]
    CropOutOfBounds,
}

/// Row-major RGBA8 pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rgba {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl Rgba {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::Empty);
        }
        let expected = width as usize * height as usize * 4;
        if data.len() != expected {
            return Err(RasterError::BadLength {
                expected,
                got: data.len(),
            });
        }
        Ok(Rgba {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, px: [u8; 4]) -> Result<Self, RasterError> {
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * 4);
        for _ in 0..n {
            data.extend_from_slice(&px);
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        [self.data[i], self.data[i + 1], self.data[i + 2], self.data[i + 3]]
    }

    pub fn crop(&self, r: &CropRect) -> Result<Rgba, RasterError> {
        if r.w == 0 || r.h == 0 {
            return Err(RasterError::Empty);
        }
        if u64::from(r.x) + u64::from(r.w) > u64::from(self.width)
            || u64::from(r.y) + u64::from(r.h) > u64::from(self.height)
        {
            return Err(RasterError::CropOutOfBounds);
        }
        let mut data = Vec::with_capacity(r.w as usize * r.h as usize * 4);
        let stride = self.width as usize * 4;
        for y in r.y..r.y + r.h {
            let start = y as usize * stride + r.x as usize * 4;
            data.extend_from_slice(&self.data[start..start + r.w as usize * 4]);
        }
        Rgba::new(r.w, r.h, data)
    }

    /// Nearest-neighbor resample: output pixel `(x, y)` takes source pixel
    /// `(floor(x * w / W), floor(y * h / H))`.
    pub fn resize_nearest(&self, width: u32, height: u32) -> Result<Rgba, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::Empty);
        }
        if (width, height) == (self.width, self.height) {
            return Ok(self.clone());
        }
        let mut data = vec![0u8; width as usize * height as usize * 4];
        for y in 0..height {
            let sy = (u64::from(y) * u64::from(self.height) / u64::from(height)) as u32;
            for x in 0..width {
                let sx = (u64::from(x) * u64::from(self.width) / u64::from(width)) as u32;
                let o = (y as usize * width as usize + x as usize) * 4;
                data[o..o + 4].copy_from_slice(&self.pixel(sx, sy));
            }
        }
        Rgba::new(width, height, data)
    }

    /// `ICON_SIDE` x `ICON_SIDE` nearest-neighbor resample.
    pub fn to_icon_size(&self) -> Rgba {
        self.resize_nearest(ICON_SIDE, ICON_SIDE)
            .expect("icon side is non-zero")
    }
}
