//! Ground-truth replay backend.
//!
//! Rules applied on every call, over the pixels that are still present
//! (non-white) in the presented image:
//! - with `color_priority`, every head with present pixels is returned as
//!   its own mask; otherwise a head travels with its tail;
//! - with `merge_overlaps`, tails whose present pixels touch are returned
//!   as one merged mask unless both strokes are at least
//!   `separable_when_bold` pixels wide in the presented image;
//! - at most `simple_first_quota` non-head masks are returned, fewest
//!   skeleton endpoints first, then smallest area, then lowest id.

use serde::{Deserialize, Serialize};

use super::{BackendDescriptor, Segmenter, SegmenterError, ViewTransform};
use crate::raster::{BinaryMask, RasterImage, WHITE};
use crate::skeleton::skeletonize;
use crate::synthgen::{SpermTruth, SyntheticScene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleBehavior {
    pub color_priority: bool,
    pub merge_overlaps: bool,
    pub simple_first_quota: usize,
    /// Stroke width, in presented pixels, from which touching tails are
    /// returned separately.
    pub separable_when_bold: f64,
}

impl Default for OracleBehavior {
    fn default() -> Self {
        Self { color_priority: true, merge_overlaps: true, simple_first_quota: 2, separable_when_bold: 6.0 }
    }
}

impl OracleBehavior {
    pub fn validate(&self) -> Result<(), String> {
        if self.simple_first_quota < 1 {
            return Err("simple_first_quota must be >= 1".into());
        }
        if !(self.separable_when_bold >= 1.0) {
            return Err("separable_when_bold must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Truth {
    id: u32,
    head: Vec<(u32, u32)>,
    tail: Vec<(u32, u32)>,
    centreline: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct OracleSegmenter {
    width: u32,
    height: u32,
    truth: Vec<Truth>,
    behavior: OracleBehavior,
}

/// Present pixels of one unit in view coordinates.
struct Unit {
    ids: Vec<u32>,
    mask: BinaryMask,
    width: f64,
}

impl OracleSegmenter {
    pub fn from_scene(scene: &SyntheticScene, behavior: OracleBehavior) -> Self {
        Self::from_truth(scene.image.width(), scene.image.height(), &scene.instances, behavior)
    }

    pub fn from_truth(width: u32, height: u32, instances: &[SpermTruth], behavior: OracleBehavior) -> Self {
        let truth = instances
            .iter()
            .map(|t| Truth {
                id: t.id,
                head: t.head_mask.iter_points().collect(),
                tail: t.tail_mask.iter_points().collect(),
                centreline: t.tail_samples(),
            })
            .collect();
        Self { width, height, truth, behavior }
    }

    pub fn behavior(&self) -> &OracleBehavior {
        &self.behavior
    }

    fn present_in_view(&self, img: &RasterImage, view: ViewTransform, pts: &[(u32, u32)]) -> BinaryMask {
        let s = view.scale.max(1);
        let mut out = BinaryMask::new(img.width(), img.height()).expect("image has valid dimensions");
        for &(x, y) in pts {
            if x < view.x0 || y < view.y0 {
                continue;
            }
            let (bx, by) = ((x - view.x0) * s, (y - view.y0) * s);
            for vy in by..(by + s).min(img.height()) {
                for vx in bx..(bx + s).min(img.width()) {
                    if img.get(vx, vy) != WHITE {
                        out.set(vx, vy, true);
                    }
                }
            }
        }
        out
    }

    /// Mean stroke width of a tail in view pixels: present area over the
    /// length of centreline that falls inside the view.
    fn stroke_width(&self, t: &Truth, present_area: usize, img: &RasterImage, view: ViewTransform) -> f64 {
        let s = f64::from(view.scale.max(1));
        let (x0, y0) = (f64::from(view.x0), f64::from(view.y0));
        let (x1, y1) = (x0 + f64::from(img.width()) / s, y0 + f64::from(img.height()) / s);
        let inside = |p: (f64, f64)| p.0 >= x0 && p.1 >= y0 && p.0 < x1 && p.1 < y1;
        let len: f64 = t
            .centreline
            .windows(2)
            .filter(|w| inside(w[0]) && inside(w[1]))
            .map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt())
            .sum();
        if len <= 0.0 {
            return f64::INFINITY;
        }
        present_area as f64 / (s * s) / len * s
    }
}

fn touches(a: &BinaryMask, b: &BinaryMask) -> bool {
    let (small, big) = if a.area() <= b.area() { (a, b) } else { (b, a) };
    small.iter_points().any(|(x, y)| {
        let (x, y) = (i64::from(x), i64::from(y));
        (-1..=1).any(|dy| (-1..=1).any(|dx| big.get_signed(x + dx, y + dy)))
    })
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    parent[i] = r;
    r
}

impl Segmenter for OracleSegmenter {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor { name: "oracle".into(), deterministic: true }
    }

    fn segment(&self, img: &RasterImage) -> Result<Vec<BinaryMask>, SegmenterError> {
        self.segment_view(img, ViewTransform::IDENTITY)
    }

    fn segment_view(&self, img: &RasterImage, view: ViewTransform) -> Result<Vec<BinaryMask>, SegmenterError> {
        let b = &self.behavior;
        if view == ViewTransform::IDENTITY && (img.width(), img.height()) != (self.width, self.height) {
            return Err(SegmenterError::MalformedResponse(format!(
                "oracle scene is {}x{}, presented image is {}x{}",
                self.width,
                self.height,
                img.width(),
                img.height()
            )));
        }
        let mut heads = Vec::new();
        let mut units = Vec::new();
        for t in &self.truth {
            let head = self.present_in_view(img, view, &t.head);
            let tail = self.present_in_view(img, view, &t.tail);
            let width = self.stroke_width(t, tail.area(), img, view);
            if b.color_priority {
                if !head.is_empty() {
                    heads.push(head);
                }
                if !tail.is_empty() {
                    units.push(Unit { ids: vec![t.id], mask: tail, width });
                }
            } else {
                let mask = head.union(&tail).expect("same dimensions");
                if !mask.is_empty() {
                    units.push(Unit { ids: vec![t.id], mask, width });
                }
            }
        }

        let mut parent: Vec<usize> = (0..units.len()).collect();
        if b.merge_overlaps {
            for i in 0..units.len() {
                for j in i + 1..units.len() {
                    let thin = units[i].width.min(units[j].width) < b.separable_when_bold;
                    if thin && touches(&units[i].mask, &units[j].mask) {
                        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                        parent[ri.max(rj)] = ri.min(rj);
                    }
                }
            }
        }
        let mut groups: Vec<Unit> = Vec::new();
        let mut root_slot = vec![usize::MAX; units.len()];
        for i in 0..units.len() {
            let r = find(&mut parent, i);
            if root_slot[r] == usize::MAX {
                root_slot[r] = groups.len();
                groups.push(Unit { ids: Vec::new(), mask: units[i].mask.empty_like(), width: 0.0 });
            }
            let g = &mut groups[root_slot[r]];
            g.ids.extend(&units[i].ids);
            g.mask.union_with(&units[i].mask).expect("same dimensions");
        }

        let mut ranked: Vec<(usize, usize, u32, BinaryMask)> = groups
            .into_iter()
            .map(|g| {
                let ends = skeletonize(&g.mask).map(|s| s.endpoints.len()).unwrap_or(usize::MAX);
                let id = g.ids.iter().copied().min().unwrap_or(u32::MAX);
                (ends, g.mask.area(), id, g.mask)
            })
            .collect();
        ranked.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
        heads.extend(ranked.into_iter().take(b.simple_first_quota).map(|r| r.3));
        Ok(heads)
    }
}
