use std::path::Path;

use super::{check_dims, RasterError};

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BoundingBox {
    pub fn width(&self) -> u32 {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0 + 1
    }

    /// Grows the box by `margin` on every side, clamped to `w x h`.
    pub fn expand(&self, margin: u32, w: u32, h: u32) -> Self {
        Self {
            x0: self.x0.saturating_sub(margin),
            y0: self.y0.saturating_sub(margin),
            x1: (self.x1 + margin).min(w - 1),
            y1: (self.y1 + margin).min(h - 1),
        }
    }
}

/// Single-instance foreground bitmap.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("area", &self.area())
            .field("bbox", &self.bbox())
            .finish()
    }
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        Ok(Self { width, height, bits: vec![false; width as usize * height as usize] })
    }

    pub fn full(width: u32, height: u32) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        Ok(Self { width, height, bits: vec![true; width as usize * height as usize] })
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        let expected = width as usize * height as usize;
        if bits.len() != expected {
            return Err(RasterError::BufferSize { expected, actual: bits.len() });
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> bool,
    ) -> Result<Self, RasterError> {
        let mut m = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        Ok(m)
    }

    /// An empty mask with the same dimensions.
    pub fn empty_like(&self) -> Self {
        Self { width: self.width, height: self.height, bits: vec![false; self.bits.len()] }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    /// Bounds-checked lookup; out of range reads as background.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && x < i64::from(self.width)
            && y < i64::from(self.height)
            && self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn get_index(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = v;
    }

    /// Sets a pixel if it lies inside the mask; returns whether it did.
    #[inline]
    pub fn set_signed(&mut self, x: i64, y: i64, v: bool) -> bool {
        if x >= 0 && y >= 0 && x < i64::from(self.width) && y < i64::from(self.height) {
            self.bits[y as usize * self.width as usize + x as usize] = v;
            true
        } else {
            false
        }
    }

    #[inline]
    pub fn set_index(&mut self, idx: usize, v: bool) {
        self.bits[idx] = v;
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn same_dims(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn check_same(&self, other: &Self) -> Result<(), RasterError> {
        if !self.same_dims(other) {
            return Err(RasterError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// Linear indices of set pixels, row-major.
    pub fn iter_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    /// `(x, y)` of set pixels, row-major.
    pub fn iter_points(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.iter_indices().map(move |i| ((i % w) as u32, (i / w) as u32))
    }

    pub fn bbox(&self) -> Option<BoundingBox> {
        let mut it = self.iter_points();
        let (x, y) = it.next()?;
        let mut b = BoundingBox { x0: x, y0: y, x1: x, y1: y };
        for (x, y) in it {
            b.x0 = b.x0.min(x);
            b.x1 = b.x1.max(x);
            b.y1 = b.y1.max(y);
        }
        Some(b)
    }

    pub fn union_with(&mut self, other: &Self) -> Result<(), RasterError> {
        self.check_same(other)?;
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    pub fn intersect_with(&mut self, other: &Self) -> Result<(), RasterError> {
        self.check_same(other)?;
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a &= b;
        }
        Ok(())
    }

    pub fn subtract(&mut self, other: &Self) -> Result<(), RasterError> {
        self.check_same(other)?;
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a &= !b;
        }
        Ok(())
    }

    pub fn union(&self, other: &Self) -> Result<Self, RasterError> {
        let mut m = self.clone();
        m.union_with(other)?;
        Ok(m)
    }

    pub fn intersection(&self, other: &Self) -> Result<Self, RasterError> {
        let mut m = self.clone();
        m.intersect_with(other)?;
        Ok(m)
    }

    pub fn intersection_area(&self, other: &Self) -> Result<usize, RasterError> {
        self.check_same(other)?;
        Ok(self.bits.iter().zip(&other.bits).filter(|(&a, &b)| a && b).count())
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.same_dims(other) && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// True if some pixel of `self` equals or is 8-adjacent to a pixel of `other`.
    pub fn touches(&self, other: &Self) -> bool {
        if !self.same_dims(other) {
            return false;
        }
        self.iter_points().any(|(x, y)| {
            let (x, y) = (i64::from(x), i64::from(y));
            (-1..=1).any(|dy| (-1..=1).any(|dx| other.get_signed(x + dx, y + dy)))
        })
    }

    /// Copies the rectangle at `(x0, y0)` of size `w x h`.
    pub fn crop(&self, x0: u32, y0: u32, w: u32, h: u32) -> Result<Self, RasterError> {
        check_dims(w, h)?;
        if x0 + w > self.width || y0 + h > self.height {
            return Err(RasterError::InvalidDimensions { width: w, height: h });
        }
        Self::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }

    /// Places this mask into a `width x height` canvas at offset `(x0, y0)`;
    /// pixels falling outside are dropped.
    pub fn place(&self, width: u32, height: u32, x0: i64, y0: i64) -> Result<Self, RasterError> {
        let mut out = Self::new(width, height)?;
        for (x, y) in self.iter_points() {
            out.set_signed(i64::from(x) + x0, i64::from(y) + y0, true);
        }
        Ok(out)
    }

    /// Nearest-neighbour upscale by an integer factor.
    pub fn upscale_nearest(&self, factor: u32) -> Self {
        let f = factor.max(1);
        let (w, h) = (self.width * f, self.height * f);
        let mut bits = vec![false; w as usize * h as usize];
        for y in 0..h {
            for x in 0..w {
                bits[y as usize * w as usize + x as usize] = self.get(x / f, y / f);
            }
        }
        Self { width: w, height: h, bits }
    }

    /// Downscale by an integer factor: an output pixel is set when at least
    /// half of its `factor x factor` source block is set. Trailing partial
    /// blocks are averaged over their actual size.
    pub fn downscale_majority(&self, factor: u32) -> Self {
        let f = factor.max(1);
        let w = self.width.div_ceil(f);
        let h = self.height.div_ceil(f);
        let mut bits = vec![false; w as usize * h as usize];
        for oy in 0..h {
            for ox in 0..w {
                let (mut set, mut total) = (0u32, 0u32);
                for y in oy * f..((oy + 1) * f).min(self.height) {
                    for x in ox * f..((ox + 1) * f).min(self.width) {
                        total += 1;
                        set += u32::from(self.get(x, y));
                    }
                }
                bits[oy as usize * w as usize + ox as usize] = 2 * set >= total;
            }
        }
        Self { width: w, height: h, bits }
    }

    pub fn read_png(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let img = image::open(path)?.to_luma8();
        let (w, h) = img.dimensions();
        Self::from_bits(w, h, img.into_raw().into_iter().map(|v| v >= 128).collect())
    }

    /// Writes the mask as 8-bit grayscale, 0 or 255.
    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        let buf: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        image::save_buffer_with_format(
            path,
            &buf,
            self.width,
            self.height,
            image::ExtendedColorType::L8,
            image::ImageFormat::Png,
        )?;
        Ok(())
    }
}
