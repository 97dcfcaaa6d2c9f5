//! Image normalisation before the head stage and residual denoising
//! between cascade rounds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{label_components, rgb_to_hsv, BinaryMask, Connectivity, RasterImage, Rgb, WHITE};

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("contrast_gain must be > 0, got {0}")]
    ContrastGain(f64),
    #[error("saturation_gain must be >= 0, got {0}")]
    SaturationGain(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub brightness_delta: i8,
    pub contrast_gain: f64,
    pub saturation_gain: f64,
    /// Whitening needs `v >= whiten_v_min`; values above 255 disable it.
    pub whiten_v_min: u16,
    pub whiten_s_max: u8,
    pub denoise_min_area: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            brightness_delta: 0,
            contrast_gain: 1.2,
            saturation_gain: 1.3,
            whiten_v_min: 200,
            whiten_s_max: 25,
            denoise_min_area: 30,
        }
    }
}

impl PreprocessConfig {
    /// Parameters under which [`enhance`] is the identity.
    pub fn neutral() -> Self {
        Self {
            brightness_delta: 0,
            contrast_gain: 1.0,
            saturation_gain: 1.0,
            whiten_v_min: 256,
            whiten_s_max: 0,
            denoise_min_area: 0,
        }
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        if !(self.contrast_gain > 0.0) {
            return Err(PreprocessError::ContrastGain(self.contrast_gain));
        }
        if !(self.saturation_gain >= 0.0) {
            return Err(PreprocessError::SaturationGain(self.saturation_gain));
        }
        Ok(())
    }

    fn whitens(&self, c: Rgb) -> bool {
        if self.whiten_v_min > 255 {
            return false;
        }
        let hsv = rgb_to_hsv(c);
        hsv.s <= self.whiten_s_max && u16::from(hsv.v) >= self.whiten_v_min
    }
}

fn enhance_pixel(c: Rgb, cfg: &PreprocessConfig) -> Rgb {
    let contrast = |v: u8| {
        let x = (f64::from(v) - 128.0) * cfg.contrast_gain + 128.0 + f64::from(cfg.brightness_delta);
        x.round().clamp(0.0, 255.0)
    };
    let c1 = [contrast(c[0]), contrast(c[1]), contrast(c[2])];
    let max = c1[0].max(c1[1]).max(c1[2]);
    let min = c1[0].min(c1[1]).min(c1[2]);
    // hexcone saturation scaling at fixed hue and value: each channel's
    // distance below the max scales with s
    let out = if max > min {
        let gain = cfg.saturation_gain.min(max / (max - min));
        c1.map(|v| (max - gain * (max - v)).round().clamp(0.0, 255.0) as u8)
    } else {
        c1.map(|v| v as u8)
    };
    if cfg.whitens(out) || cfg.whitens(c) { WHITE } else { out }
}

/// Contrast/brightness in RGB, saturation scaling, then background
/// whitening: a pixel that is pale (low saturation, high value) either
/// before or after the adjustment becomes pure white.
pub fn enhance(img: &RasterImage, cfg: &PreprocessConfig) -> RasterImage {
    let pixels = img
        .as_raw()
        .chunks_exact(3)
        .flat_map(|p| enhance_pixel([p[0], p[1], p[2]], cfg))
        .collect();
    RasterImage::from_raw(img.width(), img.height(), pixels).expect("same dimensions as input")
}

/// Drops 8-connected components smaller than `min_area`.
pub fn denoise(mask: &BinaryMask, min_area: usize) -> BinaryMask {
    if min_area == 0 {
        return mask.clone();
    }
    let labels = label_components(mask, Connectivity::Eight);
    let mut out = mask.empty_like();
    for (i, &l) in labels.labels.iter().enumerate() {
        if l > 0 && labels.areas[l as usize - 1] >= min_area {
            out.set_index(i, true);
        }
    }
    out
}

/// Binarises the image (non-white is foreground), denoises the mask and
/// paints the dropped pixels white.
pub fn denoise_image(img: &RasterImage, min_area: usize) -> RasterImage {
    let fg = img.foreground();
    let kept = denoise(&fg, min_area);
    let mut removed = fg;
    removed.subtract(&kept).expect("same dimensions");
    let mut out = img.clone();
    out.erase(&removed).expect("same dimensions");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::HsvRange;
    use crate::test_oracles::{random_mask, union_find_components};
    use proptest::prelude::*;

    fn noisy_image(seed: u64) -> RasterImage {
        let mut s = seed | 1;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            s
        };
        let px = (0..16 * 12 * 3).map(|_| next() as u8).collect();
        RasterImage::from_raw(16, 12, px).unwrap()
    }

    #[test]
    fn neutral_is_identity() {
        for seed in 0..20 {
            let img = noisy_image(seed);
            assert_eq!(enhance(&img, &PreprocessConfig::neutral()), img);
        }
    }

    #[test]
    fn white_is_fixed_point() {
        let img = RasterImage::filled(8, 8, WHITE).unwrap();
        assert_eq!(enhance(&img, &PreprocessConfig::default()), img);
        let cfg = PreprocessConfig { contrast_gain: 0.5, brightness_delta: -20, ..Default::default() };
        assert_eq!(enhance(&img, &cfg), img);
    }

    #[test]
    fn background_whitened_purple_kept() {
        let cfg = PreprocessConfig::default();
        assert_eq!(enhance_pixel([236, 235, 242], &cfg), WHITE);
        assert_eq!(enhance_pixel([226, 224, 230], &cfg), WHITE);
        let purple = HsvRange { h: [100.0, 180.0], s: [20.0, 255.0], v: [20.0, 255.0] };
        let p = enhance_pixel([120, 60, 140], &cfg);
        assert!(purple.contains_rgb(p), "{p:?}");
        let gray = enhance_pixel([70, 70, 74], &cfg);
        assert_ne!(gray, WHITE);
    }

    #[test]
    fn saturation_gain_preserves_hue_and_value() {
        let cfg = PreprocessConfig { contrast_gain: 1.0, whiten_v_min: 256, ..Default::default() };
        let (a, b) = (rgb_to_hsv([120, 60, 140]), rgb_to_hsv(enhance_pixel([120, 60, 140], &cfg)));
        assert_eq!(a.v, b.v);
        assert!((i32::from(a.h) - i32::from(b.h)).abs() <= 1);
        assert!(b.s > a.s);
        let desat = PreprocessConfig { saturation_gain: 0.0, ..cfg };
        assert_eq!(rgb_to_hsv(enhance_pixel([120, 60, 140], &desat)).s, 0);
    }

    #[test]
    fn enhance_idempotent_on_whitened() {
        let cfg = PreprocessConfig::default();
        let img = noisy_image(3);
        let once = enhance(&img, &cfg);
        let twice = enhance(&once, &cfg);
        for i in 0..img.len() {
            if once.get_index(i) == WHITE {
                assert_eq!(twice.get_index(i), WHITE);
            }
        }
    }

    #[test]
    fn denoise_examples() {
        let mut m = BinaryMask::new(20, 20).unwrap();
        for (x, y) in [(3, 3), (4, 3), (3, 4), (4, 4), (5, 5)] {
            m.set(x, y, true);
        }
        assert_eq!(denoise(&m, 0), m);
        assert!(denoise(&m, 30).is_empty());
        assert_eq!(denoise(&m, 5), m);
    }

    #[test]
    fn denoise_image_paints_specks_white() {
        let mut img = RasterImage::filled(20, 10, WHITE).unwrap();
        img.set(2, 2, [0, 0, 0]);
        for x in 5..15 {
            img.set(x, 6, [50, 50, 50]);
        }
        let out = denoise_image(&img, 5);
        assert_eq!(out.get(2, 2), WHITE);
        assert_eq!(out.foreground().area(), 10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn denoise_matches_flood_fill(seed in any::<u64>(), min_area in 0usize..12) {
            let m = random_mask(24, 24, seed, 100);
            let mut expected = m.empty_like();
            for c in union_find_components(&m, true) {
                if c.len() >= min_area {
                    for (x, y) in c {
                        expected.set(x, y, true);
                    }
                }
            }
            let got = denoise(&m, min_area);
            prop_assert!(got.is_subset_of(&m));
            prop_assert_eq!(got, expected);
        }
    }
}
