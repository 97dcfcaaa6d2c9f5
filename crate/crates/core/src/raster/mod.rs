//! Raster primitives shared by every pipeline stage.
//!
//! [`RasterImage`] is the 8-bit RGB input unit, [`BinaryMask`] the
//! single-instance foreground bitmap passed between stages. The submodules
//! hold the raster algorithms: HSV conversion, run-length encoding,
//! connected components, disk morphology and simple drawing.

mod color;
mod components;
pub mod draw;
mod mask;
mod morphology;
mod rle;

use std::path::Path;

use thiserror::Error;

pub use color::{hsv_to_rgb, rgb_to_hsv, HsvPixel, HsvRange};
pub use components::{connected_components, label_components, Connectivity, Labels};
pub use mask::{BinaryMask, BoundingBox};
pub use morphology::{closing, dilate, disk_offsets, erode, inner_boundary};
pub use rle::{rle_decode, rle_encode};

/// An RGB triple, 8 bits per channel.
pub type Rgb = [u8; 3];

/// Pure white, the erased/background colour.
pub const WHITE: Rgb = [255, 255, 255];

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: u32, height: u32 },
    #[error("pixel buffer has {actual} bytes, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("malformed RLE: {0}")]
    MalformedRle(String),
    #[error("png codec: {0}")]
    Png(#[from] image::ImageError),
}

/// Row-major RGB image.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    /// Creates an image filled with one colour.
    pub fn filled(width: u32, height: u32, color: Rgb) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&color);
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(RasterError::BufferSize { expected, actual: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn get_index(&self, idx: usize) -> Rgb {
        let i = idx * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: Rgb) {
        self.set_index(y as usize * self.width as usize + x as usize, c);
    }

    #[inline]
    pub fn set_index(&mut self, idx: usize, c: Rgb) {
        let i = idx * 3;
        self.pixels[i..i + 3].copy_from_slice(&c);
    }

    /// Non-white pixels.
    pub fn foreground(&self) -> BinaryMask {
        let bits = self.pixels.chunks_exact(3).map(|p| p != WHITE).collect();
        BinaryMask::from_bits(self.width, self.height, bits).expect("dimensions already validated")
    }

    /// Paints every set pixel of `mask` pure white.
    pub fn erase(&mut self, mask: &BinaryMask) -> Result<(), RasterError> {
        self.check_same(mask)?;
        for idx in mask.iter_indices() {
            self.set_index(idx, WHITE);
        }
        Ok(())
    }

    pub fn check_same(&self, mask: &BinaryMask) -> Result<(), RasterError> {
        if mask.width() != self.width || mask.height() != self.height {
            return Err(RasterError::DimensionMismatch(
                self.width,
                self.height,
                mask.width(),
                mask.height(),
            ));
        }
        Ok(())
    }

    /// Copies the rectangle `[x0, x0+w) x [y0, y0+h)`.
    pub fn crop(&self, x0: u32, y0: u32, w: u32, h: u32) -> Result<Self, RasterError> {
        check_dims(w, h)?;
        if x0 + w > self.width || y0 + h > self.height {
            return Err(RasterError::InvalidDimensions { width: w, height: h });
        }
        let mut pixels = Vec::with_capacity(w as usize * h as usize * 3);
        for y in y0..y0 + h {
            let start = (y as usize * self.width as usize + x0 as usize) * 3;
            pixels.extend_from_slice(&self.pixels[start..start + w as usize * 3]);
        }
        Ok(Self { width: w, height: h, pixels })
    }

    /// Bilinear resampling by an integer factor, pixel-centre aligned.
    pub fn upscale_bilinear(&self, factor: u32) -> Self {
        let factor = factor.max(1);
        let (w, h) = (self.width * factor, self.height * factor);
        let mut out = Vec::with_capacity(w as usize * h as usize * 3);
        let s = f64::from(factor);
        let max_x = f64::from(self.width - 1);
        let max_y = f64::from(self.height - 1);
        for y in 0..h {
            let sy = ((f64::from(y) + 0.5) / s - 0.5).clamp(0.0, max_y);
            let y0 = sy.floor() as u32;
            let y1 = (y0 + 1).min(self.height - 1);
            let fy = sy - f64::from(y0);
            for x in 0..w {
                let sx = ((f64::from(x) + 0.5) / s - 0.5).clamp(0.0, max_x);
                let x0 = sx.floor() as u32;
                let x1 = (x0 + 1).min(self.width - 1);
                let fx = sx - f64::from(x0);
                let (a, b, c, d) = (self.get(x0, y0), self.get(x1, y0), self.get(x0, y1), self.get(x1, y1));
                for ch in 0..3 {
                    let top = f64::from(a[ch]) * (1.0 - fx) + f64::from(b[ch]) * fx;
                    let bot = f64::from(c[ch]) * (1.0 - fx) + f64::from(d[ch]) * fx;
                    out.push((top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        Self { width: w, height: h, pixels: out }
    }

    pub fn read_png(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let img = image::open(path)?.to_rgb8();
        let (w, h) = img.dimensions();
        Self::from_raw(w, h, img.into_raw())
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, RasterError> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?.to_rgb8();
        let (w, h) = img.dimensions();
        Self::from_raw(w, h, img.into_raw())
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        image::save_buffer_with_format(
            path,
            &self.pixels,
            self.width,
            self.height,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )?;
        Ok(())
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, RasterError> {
        let mut buf = std::io::Cursor::new(Vec::new());
        image::write_buffer_with_format(
            &mut buf,
            &self.pixels,
            self.width,
            self.height,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )?;
        Ok(buf.into_inner())
    }
}

pub(crate) fn check_dims(width: u32, height: u32) -> Result<(), RasterError> {
    if width == 0 || height == 0 {
        return Err(RasterError::InvalidDimensions { width, height });
    }
    Ok(())
}
