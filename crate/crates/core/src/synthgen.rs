//! Seeded generator of sperm-like micrograph scenes with full ground truth.
//!
//! Each instance is a filled purple ellipse (the head) and a dark cubic
//! Bézier stroke (the tail) leaving the head at a major-axis tip, tangent to
//! the head's orientation. With `overlap_bias` later tails are steered to
//! cross an earlier tail near its middle. Tails keep clear of foreign heads,
//! and non-steered tails keep clear of other tails, so every overlap in a
//! scene is a deliberate tail crossing.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::draw::{fill_ellipse, stroke_polyline};
use crate::raster::{dilate, hsv_to_rgb, BinaryMask, HsvPixel, HsvRange, RasterError, RasterImage};

const PLACEMENT_ATTEMPTS: usize = 400;
const HEAD_CLEARANCE: f64 = 30.0;
const TAIL_CLEARANCE: f64 = 6.0;
const SPECK_CLEARANCE: u32 = 4;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("placement failed for instance {0} after {PLACEMENT_ATTEMPTS} attempts")]
    PlacementFailed(usize),
    #[error("invalid scene parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneParams {
    pub width: u32,
    pub height: u32,
    pub n_sperm: usize,
    /// Probability that a later tail is steered across an earlier one.
    pub overlap_bias: f64,
    pub tail_width: u32,
    pub noise_speck_count: usize,
    pub head_hsv: HsvRange,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            width: 720,
            height: 540,
            n_sperm: 3,
            overlap_bias: 0.0,
            tail_width: 3,
            noise_speck_count: 12,
            head_hsv: HsvRange { h: [130.0, 160.0], s: [110.0, 210.0], v: [100.0, 180.0] },
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidParams(m.to_owned()));
        if self.width < 64 || self.height < 64 {
            return bad("canvas must be at least 64x64");
        }
        if !(0.0..=1.0).contains(&self.overlap_bias) {
            return bad("overlap_bias must lie in [0, 1]");
        }
        if !(1..=6).contains(&self.tail_width) {
            return bad("tail_width must lie in [1, 6]");
        }
        let r = &self.head_hsv;
        let inside = r.h[0] >= 100.0
            && r.h[1] <= 179.0
            && r.s[0] >= 20.0
            && r.s[1] <= 255.0
            && r.v[0] >= 20.0
            && r.v[1] <= 255.0
            && r.h[0] <= r.h[1]
            && r.s[0] <= r.s[1]
            && r.v[0] <= r.v[1];
        if !inside {
            return bad("head_hsv must lie inside the purple detection range");
        }
        Ok(())
    }
}

/// Ellipse parameters of a generated head; `semi_axes` is `[major, minor]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseTruth {
    pub center: [f64; 2],
    pub semi_axes: [f64; 2],
    pub orientation_deg: f64,
}

/// Ground truth for one generated sperm.
#[derive(Debug, Clone)]
pub struct SpermTruth {
    pub id: u32,
    pub head_mask: BinaryMask,
    pub tail_mask: BinaryMask,
    pub full_mask: BinaryMask,
    pub head_geometry: EllipseTruth,
    pub attachment_point: [f64; 2],
    pub tail_control_points: [[f64; 2]; 4],
    pub tail_width: u32,
}

impl SpermTruth {
    pub fn tail_samples(&self) -> Vec<(f64, f64)> {
        bezier_samples(&self.tail_control_points)
    }

    /// Arc length of the tail centreline.
    pub fn tail_length(&self) -> f64 {
        polyline_length(&self.tail_samples())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub image: RasterImage,
    pub instances: Vec<SpermTruth>,
    pub seed: u64,
    pub params: SceneParams,
}

pub(crate) fn bezier_point(cp: &[[f64; 2]; 4], t: f64) -> (f64, f64) {
    let u = 1.0 - t;
    let (a, b, c, d) = (u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t);
    (
        a * cp[0][0] + b * cp[1][0] + c * cp[2][0] + d * cp[3][0],
        a * cp[0][1] + b * cp[1][1] + c * cp[2][1] + d * cp[3][1],
    )
}

fn bezier_tangent(cp: &[[f64; 2]; 4], t: f64) -> (f64, f64) {
    let u = 1.0 - t;
    let d = |i: usize| {
        3.0 * u * u * (cp[1][i] - cp[0][i])
            + 6.0 * u * t * (cp[2][i] - cp[1][i])
            + 3.0 * t * t * (cp[3][i] - cp[2][i])
    };
    (d(0), d(1))
}

/// Samples roughly every half pixel along the curve.
pub(crate) fn bezier_samples(cp: &[[f64; 2]; 4]) -> Vec<(f64, f64)> {
    let chord: f64 = cp
        .windows(2)
        .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
        .sum();
    let n = (chord * 2.0).ceil().max(2.0) as usize;
    (0..=n).map(|i| bezier_point(cp, i as f64 / n as f64)).collect()
}

fn polyline_length(pts: &[(f64, f64)]) -> f64 {
    pts.windows(2).map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt()).sum()
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn min_dist(pts: &[(f64, f64)], others: &[(f64, f64)]) -> f64 {
    pts.iter()
        .flat_map(|&p| others.iter().map(move |&q| dist(p, q)))
        .fold(f64::INFINITY, f64::min)
}

struct Placed {
    center: (f64, f64),
    a: f64,
    b: f64,
    theta: f64,
    cp: [[f64; 2]; 4],
    samples: Vec<(f64, f64)>,
}

fn propose(
    rng: &mut ChaCha8Rng,
    params: &SceneParams,
    placed: &[Placed],
    steer: Option<usize>,
) -> Option<Placed> {
    let (w, h) = (f64::from(params.width), f64::from(params.height));
    let a = rng.random_range(8.5..10.0);
    let b = rng.random_range(4.0..5.0);
    let len = rng.random_range(80.0..150.0);
    let bend = rng.random_range(-0.2..0.2) * len;

    let (p0, theta) = match steer {
        Some(j) => {
            let target = &placed[j];
            let t = rng.random_range(0.3..0.7);
            let cross = bezier_point(&target.cp, t);
            let tan = bezier_tangent(&target.cp, t);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let theta = tan.1.atan2(tan.0) + sign * rng.random_range(40.0f64..90.0).to_radians();
            let (d, n) = ((theta.cos(), theta.sin()), (-theta.sin(), theta.cos()));
            // the curve midpoint sits at p0 + len/2 * d + 3/8 * bend * n
            let p0 = (
                cross.0 - 0.5 * len * d.0 - 0.375 * bend * n.0,
                cross.1 - 0.5 * len * d.1 - 0.375 * bend * n.1,
            );
            (p0, theta)
        }
        None => {
            let theta = rng.random_range(0.0..2.0 * PI);
            let c = (rng.random_range(20.0..w - 20.0), rng.random_range(20.0..h - 20.0));
            ((c.0 + a * theta.cos(), c.1 + a * theta.sin()), theta)
        }
    };
    let (d, n) = ((theta.cos(), theta.sin()), (-theta.sin(), theta.cos()));
    let center = (p0.0 - a * d.0, p0.1 - a * d.1);
    let cp = [
        [p0.0, p0.1],
        [p0.0 + len / 3.0 * d.0, p0.1 + len / 3.0 * d.1],
        [p0.0 + 2.0 * len / 3.0 * d.0 + bend * n.0, p0.1 + 2.0 * len / 3.0 * d.1 + bend * n.1],
        [p0.0 + len * d.0, p0.1 + len * d.1],
    ];
    let samples = bezier_samples(&cp);

    let margin = a + 5.0;
    if center.0 < margin || center.1 < margin || center.0 > w - margin || center.1 > h - margin {
        return None;
    }
    if samples.iter().any(|p| p.0 < 4.0 || p.1 < 4.0 || p.0 > w - 5.0 || p.1 > h - 5.0) {
        return None;
    }
    // the tail must leave its own head behind
    if samples.iter().filter(|&&p| dist(p, p0) > 10.0).any(|&p| dist(p, center) < a + 4.0) {
        return None;
    }
    for (k, other) in placed.iter().enumerate() {
        if dist(center, other.center) < a + other.a + 12.0 {
            return None;
        }
        if samples.iter().any(|&p| dist(p, other.center) < HEAD_CLEARANCE) {
            return None;
        }
        if other.samples.iter().any(|&p| dist(p, center) < HEAD_CLEARANCE) {
            return None;
        }
        if Some(k) == steer {
            let cross = bezier_point(&cp, 0.5);
            let far: Vec<_> = samples.iter().copied().filter(|&p| dist(p, cross) > 15.0).collect();
            if min_dist(&far, &other.samples) < TAIL_CLEARANCE {
                return None;
            }
        } else if min_dist(&samples, &other.samples) < TAIL_CLEARANCE {
            return None;
        }
    }
    Some(Placed { center, a, b, theta, cp, samples })
}

fn sample_head_colour(rng: &mut ChaCha8Rng, r: &HsvRange) -> HsvPixel {
    let pick = |rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]| rng.random_range(lo..=hi).round() as u8;
    HsvPixel { h: pick(rng, r.h), s: pick(rng, r.s), v: pick(rng, r.v) }
}

pub fn generate(params: &SceneParams, seed: u64) -> Result<SyntheticScene, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (params.width, params.height);

    let mut placed: Vec<Placed> = Vec::with_capacity(params.n_sperm);
    for i in 0..params.n_sperm {
        let mut ok = None;
        let steered = i > 0 && rng.random_bool(params.overlap_bias);
        for attempt in 0..PLACEMENT_ATTEMPTS {
            // a crossing that cannot be placed falls back to free placement
            let steer = (steered && attempt < PLACEMENT_ATTEMPTS / 2)
                .then(|| rng.random_range(0..placed.len()));
            if let Some(p) = propose(&mut rng, params, &placed, steer) {
                ok = Some(p);
                break;
            }
        }
        placed.push(ok.ok_or(SynthError::PlacementFailed(i))?);
    }

    // background: pale, slightly blue, per-pixel jitter
    let mut image = RasterImage::filled(w, h, [255, 255, 255])?;
    for idx in 0..image.len() {
        let v: u8 = rng.random_range(230..=248);
        image.set_index(idx, [v - 3, v - 2, v]);
    }

    let mut instances = Vec::with_capacity(placed.len());
    for (i, p) in placed.iter().enumerate() {
        let mut head = BinaryMask::new(w, h)?;
        fill_ellipse(&mut head, p.center.0, p.center.1, p.a, p.b, p.theta);
        // the stroke starts a little past the head tip so that its round cap
        // does not wrap around the narrow tip and fork the tail; the offset
        // shrinks when the cut would leave a gap
        let p0 = (p.cp[0][0], p.cp[0][1]);
        let mut tail = BinaryMask::new(w, h)?;
        for offset in [1.0, 0.5, 0.0] {
            let start = p.samples.iter().position(|&q| dist(q, p0) >= offset).unwrap_or(0);
            tail = BinaryMask::new(w, h)?;
            stroke_polyline(&mut tail, &p.samples[start..], f64::from(params.tail_width) / 2.0);
            tail.subtract(&head)?;
            if head.touches(&tail) {
                break;
            }
        }
        let full = head.union(&tail)?;
        let deg = p.theta.to_degrees().rem_euclid(180.0);
        instances.push(SpermTruth {
            id: i as u32,
            head_mask: head,
            tail_mask: tail,
            full_mask: full,
            head_geometry: EllipseTruth {
                center: [p.center.0, p.center.1],
                semi_axes: [p.a, p.b],
                orientation_deg: if deg >= 180.0 { 0.0 } else { deg },
            },
            attachment_point: p.cp[0],
            tail_control_points: p.cp,
            tail_width: params.tail_width,
        });
    }

    for inst in &instances {
        let g: u8 = rng.random_range(60..=90);
        for idx in inst.tail_mask.iter_indices() {
            let j: u8 = rng.random_range(0..=6);
            image.set_index(idx, [g + j; 3]);
        }
    }
    for inst in &instances {
        let base = sample_head_colour(&mut rng, &params.head_hsv);
        for idx in inst.head_mask.iter_indices() {
            let jitter = |rng: &mut ChaCha8Rng, v: u8, [lo, hi]: [f64; 2]| {
                (f64::from(v) + rng.random_range(-4.0..=4.0)).clamp(lo, hi).round() as u8
            };
            let s = jitter(&mut rng, base.s, params.head_hsv.s);
            let v = jitter(&mut rng, base.v, params.head_hsv.v);
            image.set_index(idx, hsv_to_rgb(HsvPixel { h: base.h, s, v }));
        }
    }

    // dye specks of at most 5 pixels, kept clear of every instance
    let mut occupied = BinaryMask::new(w, h)?;
    for inst in &instances {
        occupied.union_with(&inst.full_mask)?;
    }
    let occupied = dilate(&occupied, SPECK_CLEARANCE + 1);
    for _ in 0..params.noise_speck_count {
        for _ in 0..50 {
            let (cx, cy) = (rng.random_range(2..w - 2), rng.random_range(2..h - 2));
            if occupied.get(cx, cy) {
                continue;
            }
            let g: u8 = rng.random_range(40..=100);
            let plus = rng.random_bool(0.5);
            image.set(cx, cy, [g, g, g + 6]);
            if plus {
                for (dx, dy) in [(0i64, -1i64), (-1, 0), (1, 0), (0, 1)] {
                    let (x, y) = ((i64::from(cx) + dx) as u32, (i64::from(cy) + dy) as u32);
                    image.set(x, y, [g, g, g + 6]);
                }
            }
            break;
        }
    }

    Ok(SyntheticScene { image, instances, seed, params: params.clone() })
}

impl SyntheticScene {
    /// Pairs `(i, j)` of instances whose tail masks share pixels.
    pub fn crossing_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.instances.len() {
            for j in i + 1..self.instances.len() {
                let (a, b) = (&self.instances[i].tail_mask, &self.instances[j].tail_mask);
                if a.intersection_area(b).unwrap_or(0) > 0 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}
