//! Thinning, endpoint detection, terminal slopes and tail classification.
//!
//! Thinning runs Guo–Hall two-subiteration parallel passes, which keep
//! diagonal strokes at full length where Zhang–Suen erodes them from the
//! ends. A sequential pass then drops redundant staircase corners and a
//! last pass prunes 1–2 pixel spurs, leaving an 8-connected centreline on
//! which "exactly one neighbour" identifies line ends.

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{label_components, BinaryMask, Connectivity};

/// Pixels walked inward from an endpoint when fitting the terminal slope.
pub const DEFAULT_SLOPE_K: usize = 10;

/// Branches of at most this many pixels ending at a junction are removed.
pub const MAX_SPUR_LEN: usize = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SkeletonError {
    #[error("empty mask")]
    EmptyMask,
    #[error("degenerate terminus at ({0}, {1})")]
    DegenerateTerminus(u32, u32),
}

/// One-pixel-wide centreline of a mask with its endpoints and the
/// undirected orientation (degrees in `[0, 180)`) of the line near each.
#[derive(Debug, Clone)]
pub struct Skeleton {
    pub pixels: BinaryMask,
    pub endpoints: Vec<(u32, u32)>,
    pub terminal_slopes: Vec<f64>,
}

impl Skeleton {
    pub fn segment_count(&self) -> usize {
        label_components(&self.pixels, Connectivity::Eight).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailClass {
    SingleTail,
    OverlapCluster,
    Other,
}

// Neighbour order P2..P9: N, NE, E, SE, S, SW, W, NW.
const RING: [(i64, i64); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

/// Simple-point table for (8, 4) topology indexed by the neighbour byte
/// (bit `i` = `RING[i]` set).
static SIMPLE: LazyLock<[bool; 256]> = LazyLock::new(|| {
    let mut table = [false; 256];
    for (code, entry) in table.iter_mut().enumerate() {
        *entry = is_simple_pattern(code as u8);
    }
    table
});

fn is_simple_pattern(code: u8) -> bool {
    let set = |i: usize| code & (1 << i) != 0;
    let adjacent = |i: usize, j: usize, four: bool| {
        let (a, b) = (RING[i], RING[j]);
        let (dx, dy) = ((a.0 - b.0).abs(), (a.1 - b.1).abs());
        if four {
            dx + dy == 1
        } else {
            dx <= 1 && dy <= 1 && (dx, dy) != (0, 0)
        }
    };
    let count_components = |want: bool, four: bool, require_edge: bool| {
        let mut seen = [false; 8];
        let mut count = 0;
        for s in 0..8 {
            if seen[s] || set(s) != want {
                continue;
            }
            let mut stack = vec![s];
            seen[s] = true;
            let mut touches_edge = false;
            while let Some(i) = stack.pop() {
                touches_edge |= i % 2 == 0;
                for j in 0..8 {
                    if !seen[j] && set(j) == want && adjacent(i, j, four) {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            if !require_edge || touches_edge {
                count += 1;
            }
        }
        count
    };
    count_components(true, false, false) == 1 && count_components(false, true, true) == 1
}

/// Padded local copy of a mask's bounding box.
struct Grid {
    w: usize,
    h: usize,
    ox: u32,
    oy: u32,
    cells: Vec<bool>,
}

impl Grid {
    fn from_mask(mask: &BinaryMask) -> Option<Self> {
        let b = mask.bbox()?;
        let (w, h) = (b.width() as usize + 2, b.height() as usize + 2);
        let mut cells = vec![false; w * h];
        for (x, y) in mask.iter_points() {
            cells[(y - b.y0 + 1) as usize * w + (x - b.x0 + 1) as usize] = true;
        }
        Some(Self { w, h, ox: b.x0, oy: b.y0, cells })
    }

    #[inline]
    fn code(&self, i: usize) -> u8 {
        let mut c = 0u8;
        for (bit, &(dx, dy)) in RING.iter().enumerate() {
            let j = (i as i64 + dy * self.w as i64 + dx) as usize;
            if self.cells[j] {
                c |= 1 << bit;
            }
        }
        c
    }

    fn interior(&self) -> impl Iterator<Item = usize> + use<> {
        let (w, h) = (self.w, self.h);
        (1..h - 1).flat_map(move |y| (1..w - 1).map(move |x| y * w + x))
    }

    fn to_mask(&self, width: u32, height: u32) -> BinaryMask {
        let mut m = BinaryMask::new(width, height).expect("source mask dimensions are valid");
        for i in self.interior().filter(|&i| self.cells[i]) {
            let (x, y) = ((i % self.w) as u32 - 1, (i / self.w) as u32 - 1);
            m.set(self.ox + x, self.oy + y, true);
        }
        m
    }
}

/// Guo–Hall deletion test for subiteration `first` (or second).
fn gh_deletable(code: u8, first: bool) -> bool {
    let p = |i: usize| code & (1 << i) != 0;
    let (p2, p3, p4, p5, p6, p7, p8, p9) = (p(0), p(1), p(2), p(3), p(4), p(5), p(6), p(7));
    let c = u8::from(!p2 && (p3 || p4))
        + u8::from(!p4 && (p5 || p6))
        + u8::from(!p6 && (p7 || p8))
        + u8::from(!p8 && (p9 || p2));
    let n1 = u8::from(p9 || p2) + u8::from(p3 || p4) + u8::from(p5 || p6) + u8::from(p7 || p8);
    let n2 = u8::from(p2 || p3) + u8::from(p4 || p5) + u8::from(p6 || p7) + u8::from(p8 || p9);
    let n = n1.min(n2);
    let m = if first { (p6 || p7 || !p9) && p8 } else { (p2 || p3 || !p5) && p4 };
    c == 1 && (2..=3).contains(&n) && !m
}

fn thin(grid: &mut Grid) {
    let mut doomed = Vec::new();
    loop {
        let mut changed = false;
        for first in [true, false] {
            doomed.clear();
            doomed.extend(grid.interior().filter(|&i| grid.cells[i] && gh_deletable(grid.code(i), first)));
            for &i in &doomed {
                grid.cells[i] = false;
            }
            changed |= !doomed.is_empty();
        }
        if !changed {
            break;
        }
    }
    // staircase corners: simple pixels with two set 4-neighbours at a right
    // angle, which stay connected through the diagonal once the corner goes
    loop {
        let mut changed = false;
        for i in grid.interior() {
            if !grid.cells[i] {
                continue;
            }
            let code = grid.code(i);
            let p = |k: usize| code & (1 << k) != 0;
            let corner = (p(0) || p(4)) && (p(2) || p(6));
            if corner && SIMPLE[code as usize] {
                grid.cells[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

pub fn skeletonize(mask: &BinaryMask) -> Result<Skeleton, SkeletonError> {
    skeletonize_with(mask, DEFAULT_SLOPE_K)
}

/// Thins `mask` and computes endpoints plus terminal slopes over `k` pixels.
pub fn skeletonize_with(mask: &BinaryMask, k: usize) -> Result<Skeleton, SkeletonError> {
    let mut grid = Grid::from_mask(mask).ok_or(SkeletonError::EmptyMask)?;
    thin(&mut grid);
    let mut pixels = grid.to_mask(mask.width(), mask.height());
    prune_spurs(&mut pixels, MAX_SPUR_LEN);
    let endpoints = find_endpoints(&pixels);
    let terminal_slopes = endpoints
        .iter()
        .map(|&e| terminal_slope(&pixels, e, k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Skeleton { pixels, endpoints, terminal_slopes })
}

/// Deletes short side branches left by staircase edges: an endpoint whose
/// walk reaches a junction within `max_len` pixels loses those pixels.
fn prune_spurs(pixels: &mut BinaryMask, max_len: usize) {
    for e in find_endpoints(pixels) {
        let mut path = vec![(i64::from(e.0), i64::from(e.1))];
        loop {
            let &(x, y) = path.last().expect("non-empty");
            let next: Vec<_> = RING
                .iter()
                .map(|&(dx, dy)| (x + dx, y + dy))
                .filter(|&(nx, ny)| pixels.get_signed(nx, ny) && !path.contains(&(nx, ny)))
                .collect();
            if next.len() != 1 {
                break;
            }
            let n = next[0];
            if neighbour_count(pixels, n.0 as u32, n.1 as u32) >= 3 {
                if path.len() <= max_len {
                    for &(px, py) in &path {
                        pixels.set(px as u32, py as u32, false);
                    }
                }
                break;
            }
            if path.len() >= max_len {
                break;
            }
            path.push(n);
        }
    }
}

fn neighbour_count(pixels: &BinaryMask, x: u32, y: u32) -> usize {
    let (x, y) = (i64::from(x), i64::from(y));
    RING.iter().filter(|&&(dx, dy)| pixels.get_signed(x + dx, y + dy)).count()
}

/// Pixels with exactly one 8-neighbour, row-major. Isolated pixels have
/// zero neighbours and are not endpoints.
pub fn find_endpoints(pixels: &BinaryMask) -> Vec<(u32, u32)> {
    pixels.iter_points().filter(|&(x, y)| neighbour_count(pixels, x, y) == 1).collect()
}

/// Orientation in degrees `[0, 180)` of the line through the first `k`
/// skeleton pixels walked inward from `endpoint`, stopping at a branch.
pub fn terminal_slope(
    pixels: &BinaryMask,
    endpoint: (u32, u32),
    k: usize,
) -> Result<f64, SkeletonError> {
    let path = walk_inward(pixels, endpoint, k.max(2));
    if path.len() < 2 {
        return Err(SkeletonError::DegenerateTerminus(endpoint.0, endpoint.1));
    }
    Ok(fit_orientation(&path))
}

pub(crate) fn walk_inward(pixels: &BinaryMask, start: (u32, u32), k: usize) -> Vec<(i64, i64)> {
    if !pixels.get(start.0, start.1) {
        return Vec::new();
    }
    let mut path = vec![(i64::from(start.0), i64::from(start.1))];
    while path.len() < k {
        let &(x, y) = path.last().expect("path starts non-empty");
        if path.len() > 1 && neighbour_count(pixels, x as u32, y as u32) >= 3 {
            break;
        }
        // 4-neighbours first so corners are taken before diagonals
        let next = [(0, -1), (1, 0), (0, 1), (-1, 0), (1, -1), (1, 1), (-1, 1), (-1, -1)]
            .iter()
            .map(|&(dx, dy)| (x + dx, y + dy))
            .find(|&(nx, ny)| pixels.get_signed(nx, ny) && !path.contains(&(nx, ny)));
        match next {
            Some(p) => path.push(p),
            None => break,
        }
    }
    path
}

/// Total-least-squares line orientation in degrees `[0, 180)`.
pub(crate) fn fit_orientation(points: &[(i64, i64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (dx, dy) = (x as f64 - mx, y as f64 - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let deg = (0.5 * (2.0 * sxy).atan2(sxx - syy)).to_degrees();
    let deg = deg.rem_euclid(180.0);
    if deg >= 180.0 { 0.0 } else { deg }
}

/// Single segment with exactly two endpoints is a lone tail; a single
/// segment with more is a fused cluster; anything else is neither.
pub fn classify(mask: &BinaryMask) -> Result<TailClass, SkeletonError> {
    let skel = skeletonize(mask)?;
    Ok(classify_skeleton(&skel))
}

pub fn classify_skeleton(skel: &Skeleton) -> TailClass {
    if skel.segment_count() != 1 {
        return TailClass::Other;
    }
    match skel.endpoints.len() {
        2 => TailClass::SingleTail,
        n if n > 2 => TailClass::OverlapCluster,
        _ => TailClass::Other,
    }
}
