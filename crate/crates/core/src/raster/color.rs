use serde::{Deserialize, Serialize};

use super::Rgb;

/// Hexcone HSV with hue on a half-degree scale: `h` in `[0, 180)`,
/// `s` and `v` in `[0, 255]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HsvPixel {
    pub h: u8,
    pub s: u8,
    pub v: u8,
}

pub fn rgb_to_hsv([r, g, b]: Rgb) -> HsvPixel {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    if max == min {
        return HsvPixel { h: 0, s: 0, v: max };
    }
    let (rf, gf, bf) = (f64::from(r), f64::from(g), f64::from(b));
    let delta = f64::from(max - min);
    let s = (255.0 * delta / f64::from(max)).round() as u8;
    let mut deg = if max == r {
        60.0 * (gf - bf) / delta
    } else if max == g {
        120.0 + 60.0 * (bf - rf) / delta
    } else {
        240.0 + 60.0 * (rf - gf) / delta
    };
    if deg < 0.0 {
        deg += 360.0;
    }
    let h = (deg / 2.0).round() as u16 % 180;
    HsvPixel { h: h as u8, s, v: max }
}

pub fn hsv_to_rgb(p: HsvPixel) -> Rgb {
    let v = f64::from(p.v);
    if p.s == 0 {
        return [p.v; 3];
    }
    let s = f64::from(p.s) / 255.0;
    let deg = f64::from(p.h) * 2.0;
    let sector = deg / 60.0;
    let i = sector.floor() as i32 % 6;
    let f = sector - sector.floor();
    let pv = v * (1.0 - s);
    let qv = v * (1.0 - s * f);
    let tv = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match i {
        0 => (v, tv, pv),
        1 => (qv, v, pv),
        2 => (pv, v, tv),
        3 => (pv, qv, v),
        4 => (tv, pv, v),
        _ => (v, pv, qv),
    };
    let q = |c: f64| c.round().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

/// Inclusive box in HSV space, bounds on the same scales as [`HsvPixel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsvRange {
    pub h: [f64; 2],
    pub s: [f64; 2],
    pub v: [f64; 2],
}

impl HsvRange {
    pub fn contains(&self, p: HsvPixel) -> bool {
        let within = |x: u8, [lo, hi]: [f64; 2]| (lo..=hi).contains(&f64::from(x));
        within(p.h, self.h) && within(p.s, self.s) && within(p.v, self.v)
    }

    pub fn contains_rgb(&self, c: Rgb) -> bool {
        self.contains(rgb_to_hsv(c))
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    /// Textbook conversion on unit floats, hue in degrees.
    fn reference(c: Rgb) -> (f64, f64, f64) {
        let [r, g, b] = c.map(|v| f64::from(v) / 255.0);
        let max = r.max(g).max(b);
        let d = max - r.min(g).min(b);
        let h = if d == 0.0 {
            0.0
        } else if max == r {
            60.0 * ((g - b) / d).rem_euclid(6.0)
        } else if max == g {
            60.0 * ((b - r) / d + 2.0)
        } else {
            60.0 * ((r - g) / d + 4.0)
        };
        let s = if max == 0.0 { 0.0 } else { d / max };
        (h, s * 255.0, max * 255.0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn matches_float_reference(r in any::<u8>(), g in any::<u8>(), b in any::<u8>()) {
            let p = rgb_to_hsv([r, g, b]);
            let (h, s, v) = reference([r, g, b]);
            let dh = (f64::from(p.h) - h / 2.0).rem_euclid(180.0);
            prop_assert!(dh.min(180.0 - dh) <= 1.0, "{p:?} vs {h}");
            prop_assert!((f64::from(p.s) - s).abs() <= 1.0);
            prop_assert!((f64::from(p.v) - v).abs() <= 1.0);
        }
    }

    #[test]
    fn saturated_primaries_round_trip() {
        for v in 1..=255u8 {
            for c in [[v, 0, 0], [0, v, 0], [0, 0, v], [v, v, 0], [0, v, v], [v, 0, v]] {
                let p = rgb_to_hsv(c);
                assert_eq!(p.s, 255);
                let back = hsv_to_rgb(p);
                for k in 0..3 {
                    assert!((i16::from(back[k]) - i16::from(c[k])).abs() <= 1, "{c:?} -> {back:?}");
                }
            }
        }
    }
}
