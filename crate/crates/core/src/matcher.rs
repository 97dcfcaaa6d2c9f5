//! Head ellipse fitting, head–tail pairing and splicing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::draw::line_points;
use crate::raster::{dilate, BinaryMask};
use crate::skeleton::{skeletonize_with, Skeleton, DEFAULT_SLOPE_K};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("degenerate head: {0}")]
    DegenerateHead(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatcherConfig {
    /// Maximum head-tip to tail-end distance, pixels.
    pub lambda_dis: f64,
    /// Maximum orientation difference, degrees.
    pub lambda_angle: f64,
    pub slope_fit_k: usize,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self { lambda_dis: 20.0, lambda_angle: 60.0, slope_fit_k: DEFAULT_SLOPE_K }
    }
}

impl MatcherConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.lambda_dis > 0.0) || !(self.lambda_angle > 0.0) {
            return Err("lambda_dis and lambda_angle must be positive".into());
        }
        if self.slope_fit_k < 2 {
            return Err("slope_fit_k must be >= 2".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeadGeometry {
    pub center: (f64, f64),
    pub major_axis_endpoints: [(f64, f64); 2],
    pub major_len: f64,
    pub minor_len: f64,
    /// Degrees in `[0, 180)`, image coordinates (y down).
    pub orientation: f64,
}

/// Moment-based ellipse fit. Full axis lengths are `4 * sqrt(eigenvalue)`
/// of the pixel covariance, exact for a uniformly filled ellipse.
pub fn fit_ellipse(mask: &BinaryMask) -> Result<HeadGeometry, MatchError> {
    let pts: Vec<(f64, f64)> = mask.iter_points().map(|(x, y)| (f64::from(x), f64::from(y))).collect();
    if pts.len() < 5 {
        return Err(MatchError::DegenerateHead(format!("area {} < 5", pts.len())));
    }
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut m20, mut m02, mut m11) = (0.0, 0.0, 0.0);
    for &(x, y) in &pts {
        m20 += (x - cx) * (x - cx);
        m02 += (y - cy) * (y - cy);
        m11 += (x - cx) * (y - cy);
    }
    let (m20, m02, m11) = (m20 / n, m02 / n, m11 / n);
    let half_trace = (m20 + m02) / 2.0;
    let root = (((m20 - m02) / 2.0).powi(2) + m11 * m11).sqrt();
    let (l1, l2) = (half_trace + root, half_trace - root);
    if l2 <= 1e-9 {
        return Err(MatchError::DegenerateHead("zero variance across the minor axis".into()));
    }
    let theta = 0.5 * (2.0 * m11).atan2(m20 - m02);
    let orientation = theta.to_degrees().rem_euclid(180.0);
    let (major_len, minor_len) = (4.0 * l1.sqrt(), 4.0 * l2.sqrt());
    let (dx, dy) = (theta.cos() * major_len / 2.0, theta.sin() * major_len / 2.0);
    Ok(HeadGeometry {
        center: (cx, cy),
        major_axis_endpoints: [(cx + dx, cy + dy), (cx - dx, cy - dy)],
        major_len,
        minor_len,
        orientation: if orientation >= 180.0 { 0.0 } else { orientation },
    })
}

/// Difference of two undirected orientations (degrees), folded into `[0, 90]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchCandidate {
    pub head_id: u32,
    pub tail_id: u32,
    pub head_endpoint: (f64, f64),
    pub tail_endpoint: (u32, u32),
    pub distance: f64,
    pub angle_diff: f64,
}

/// All (head tip, tail end) pairs within both thresholds.
pub fn enumerate_candidates(
    heads: &[(u32, HeadGeometry)],
    tails: &[(u32, Skeleton)],
    lambda_dis: f64,
    lambda_angle: f64,
) -> Vec<MatchCandidate> {
    let mut out = Vec::new();
    for &(head_id, ref g) in heads {
        for &tip in &g.major_axis_endpoints {
            for (tail_id, skel) in tails {
                for (&end, &slope) in skel.endpoints.iter().zip(&skel.terminal_slopes) {
                    let distance = ((tip.0 - f64::from(end.0)).powi(2) + (tip.1 - f64::from(end.1)).powi(2)).sqrt();
                    let angle = angle_diff(g.orientation, slope);
                    if distance <= lambda_dis && angle <= lambda_angle {
                        out.push(MatchCandidate {
                            head_id,
                            tail_id: *tail_id,
                            head_endpoint: tip,
                            tail_endpoint: end,
                            distance,
                            angle_diff: angle,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Greedy resolution: smallest angle first, then shortest distance, then
/// lowest ids; a candidate is taken when neither side is matched yet.
pub fn resolve(mut candidates: Vec<MatchCandidate>) -> Vec<MatchCandidate> {
    candidates.sort_by(|a, b| {
        a.angle_diff
            .total_cmp(&b.angle_diff)
            .then(a.distance.total_cmp(&b.distance))
            .then((a.head_id, a.tail_id).cmp(&(b.head_id, b.tail_id)))
            .then(a.tail_endpoint.cmp(&b.tail_endpoint))
    });
    let (mut heads, mut tails) = (Vec::new(), Vec::new());
    let mut out = Vec::new();
    for c in candidates {
        if !heads.contains(&c.head_id) && !tails.contains(&c.tail_id) {
            heads.push(c.head_id);
            tails.push(c.tail_id);
            out.push(c);
        }
    }
    out
}

fn mask_of<'a>(list: &[(u32, &'a BinaryMask)], id: u32) -> &'a BinaryMask {
    list.iter().find(|e| e.0 == id).map(|e| e.1).expect("known id")
}

/// Union of head and tail; when they do not touch, a 3-px-wide segment
/// joins the head pixel nearest the matched tip to the tail endpoint.
pub fn splice(head: &BinaryMask, tail: &BinaryMask, c: &MatchCandidate) -> BinaryMask {
    let mut out = head.union(tail).expect("masks share dimensions");
    if head.touches(tail) {
        return out;
    }
    let anchor = head
        .iter_points()
        .min_by(|a, b| {
            let d = |p: (u32, u32)| (f64::from(p.0) - c.head_endpoint.0).powi(2) + (f64::from(p.1) - c.head_endpoint.1).powi(2);
            d(*a).total_cmp(&d(*b)).then(a.cmp(b))
        })
        .expect("head mask is non-empty");
    let mut line = head.empty_like();
    let from = (i64::from(anchor.0), i64::from(anchor.1));
    let to = (i64::from(c.tail_endpoint.0), i64::from(c.tail_endpoint.1));
    for (x, y) in line_points(from, to) {
        line.set_signed(x, y, true);
    }
    out.union_with(&dilate(&line, 1)).expect("same dimensions");
    out
}

#[derive(Debug, Clone)]
pub struct Splice {
    pub head_id: u32,
    pub tail_id: u32,
    pub mask: BinaryMask,
    pub distance: f64,
    pub angle_diff: f64,
}

#[derive(Debug, Clone, Default)]
pub struct MatchOutcome {
    pub completes: Vec<Splice>,
    pub unmatched_heads: Vec<u32>,
    pub unmatched_tails: Vec<u32>,
    /// Inputs that could not be fitted or skeletonized; they stay unmatched.
    pub warnings: Vec<String>,
}

pub fn match_and_splice(
    heads: &[(u32, &BinaryMask)],
    tails: &[(u32, &BinaryMask)],
    cfg: &MatcherConfig,
) -> MatchOutcome {
    let mut warnings = Vec::new();
    let mut geoms = Vec::new();
    for &(id, m) in heads {
        match fit_ellipse(m) {
            Ok(g) => geoms.push((id, g)),
            Err(e) => warnings.push(format!("head {id}: {e}")),
        }
    }
    let mut skels = Vec::new();
    for &(id, m) in tails {
        match skeletonize_with(m, cfg.slope_fit_k) {
            Ok(s) => skels.push((id, s)),
            Err(e) => warnings.push(format!("tail {id}: {e}")),
        }
    }
    let accepted = resolve(enumerate_candidates(&geoms, &skels, cfg.lambda_dis, cfg.lambda_angle));
    let mut completes: Vec<Splice> = accepted
        .iter()
        .map(|c| Splice {
            head_id: c.head_id,
            tail_id: c.tail_id,
            mask: splice(mask_of(heads, c.head_id), mask_of(tails, c.tail_id), c),
            distance: c.distance,
            angle_diff: c.angle_diff,
        })
        .collect();
    completes.sort_by_key(|s| (s.head_id, s.tail_id));
    let unmatched_heads = heads.iter().map(|h| h.0).filter(|id| !accepted.iter().any(|c| c.head_id == *id)).collect();
    let unmatched_tails = tails.iter().map(|t| t.0).filter(|id| !accepted.iter().any(|c| c.tail_id == *id)).collect();
    MatchOutcome { completes, unmatched_heads, unmatched_tails, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::draw::{fill_ellipse, stroke_polyline};
    use crate::raster::{label_components, Connectivity};
    use crate::skeleton::{skeletonize, walk_inward};
    use crate::synthgen::{generate, SceneParams};

    fn ellipse(a: f64, b: f64, deg: f64) -> BinaryMask {
        let mut m = BinaryMask::new(120, 120).unwrap();
        fill_ellipse(&mut m, 60.3, 59.6, a, b, deg.to_radians());
        m
    }

    #[test]
    fn axis_aligned_and_rotated() {
        let g = fit_ellipse(&ellipse(20.0, 10.0, 0.0)).unwrap();
        assert!(angle_diff(g.orientation, 0.0) <= 3.0);
        assert!((g.major_len - 40.0).abs() <= 4.0 && (g.minor_len - 20.0).abs() <= 2.0);
        let g = fit_ellipse(&ellipse(20.0, 10.0, 30.0)).unwrap();
        assert!((g.orientation - 30.0).abs() <= 3.0, "{}", g.orientation);
        let (p, q) = (g.major_axis_endpoints[0], g.major_axis_endpoints[1]);
        assert!(((p.0 + q.0) / 2.0 - g.center.0).abs() < 1e-9);
        assert!(((p.0 - q.0).hypot(p.1 - q.1) - g.major_len).abs() < 1e-9);
    }

    #[test]
    fn disk_does_not_crash() {
        let g = fit_ellipse(&ellipse(12.0, 12.0, 0.0)).unwrap();
        assert!(g.major_len / g.minor_len <= 1.1);
    }

    #[test]
    fn degenerate_heads() {
        let mut m = BinaryMask::new(20, 20).unwrap();
        for x in 2..12 {
            m.set(x, 5, true);
        }
        assert!(matches!(fit_ellipse(&m), Err(MatchError::DegenerateHead(_))));
        let mut tiny = BinaryMask::new(20, 20).unwrap();
        tiny.set(1, 1, true);
        assert!(fit_ellipse(&tiny).is_err());
    }

    #[test]
    fn angle_diff_folds() {
        assert_eq!(angle_diff(10.0, 170.0), 20.0);
        assert_eq!(angle_diff(0.0, 90.0), 90.0);
        assert_eq!(angle_diff(179.0, 1.0), 2.0);
        assert_eq!(angle_diff(45.0, 45.0), 0.0);
    }

    /// A horizontal head at (40, 40) and a straight tail starting `gap`
    /// pixels right of the tip, leaving at `deg` from the x axis.
    fn head_and_tail(gap: f64, deg: f64) -> (BinaryMask, BinaryMask) {
        let mut head = BinaryMask::new(140, 100).unwrap();
        fill_ellipse(&mut head, 40.0, 50.0, 9.0, 4.5, 0.0);
        let tip_x = fit_ellipse(&head).unwrap().major_axis_endpoints[0].0;
        let start = (tip_x + gap, 50.0);
        let r = deg.to_radians();
        let end = (start.0 + 60.0 * r.cos(), start.1 + 60.0 * r.sin());
        let mut tail = head.empty_like();
        stroke_polyline(&mut tail, &[start, end], 1.5);
        (head, tail)
    }

    #[test]
    fn distance_threshold_excludes() {
        let (head, tail) = head_and_tail(25.0, 0.0);
        let g = fit_ellipse(&head).unwrap();
        let s = skeletonize(&tail).unwrap();
        assert!(enumerate_candidates(&[(0, g)], &[(1, s.clone())], 20.0, 60.0).is_empty());
        let (head, tail) = head_and_tail(5.0, 0.0);
        let c = enumerate_candidates(&[(0, fit_ellipse(&head).unwrap())], &[(1, skeletonize(&tail).unwrap())], 20.0, 60.0);
        assert_eq!(c.len(), 1);
        assert!(c[0].angle_diff < 3.0 && (c[0].distance - 5.0).abs() <= 1.5);
    }

    #[test]
    fn single_pair_splices_connected() {
        let (head, tail) = head_and_tail(6.0, 10.0);
        let out = match_and_splice(&[(0, &head)], &[(1, &tail)], &MatcherConfig::default());
        assert_eq!(out.completes.len(), 1);
        let m = &out.completes[0].mask;
        assert!(head.is_subset_of(m) && tail.is_subset_of(m));
        assert_eq!(label_components(m, Connectivity::Eight).count(), 1);
        assert!(out.unmatched_heads.is_empty() && out.unmatched_tails.is_empty());

        let (head, tail) = head_and_tail(0.0, 0.0);
        let out = match_and_splice(&[(0, &head)], &[(1, &tail)], &MatcherConfig::default());
        assert_eq!(out.completes[0].mask, head.union(&tail).unwrap());
    }

    #[test]
    fn prefers_smaller_angle() {
        let (head, t10) = head_and_tail(4.0, 10.0);
        let (_, t40) = head_and_tail(4.0, -40.0);
        let out = match_and_splice(&[(0, &head)], &[(1, &t40), (2, &t10)], &MatcherConfig::default());
        assert_eq!(out.completes.len(), 1);
        assert_eq!(out.completes[0].tail_id, 2);
        assert_eq!(out.unmatched_tails, vec![1]);
    }

    #[test]
    fn permutation_invariant() {
        let s = generate(&SceneParams { n_sperm: 5, ..Default::default() }, 9).unwrap();
        let heads: Vec<_> = s.instances.iter().map(|t| (t.id, &t.head_mask)).collect();
        let tails: Vec<_> = s.instances.iter().map(|t| (t.id + 100, &t.tail_mask)).collect();
        let a = match_and_splice(&heads, &tails, &MatcherConfig::default());
        let (mut rh, mut rt) = (heads.clone(), tails.clone());
        rh.reverse();
        rt.rotate_left(2);
        let b = match_and_splice(&rh, &rt, &MatcherConfig::default());
        let key = |o: &MatchOutcome| o.completes.iter().map(|c| (c.head_id, c.tail_id)).collect::<Vec<_>>();
        assert_eq!(key(&a), key(&b));
    }

    #[test]
    fn attachment_near_fitted_tip() {
        for seed in 0..10 {
            let s = generate(&SceneParams { n_sperm: 3, ..Default::default() }, seed).unwrap();
            for t in &s.instances {
                let g = fit_ellipse(&t.head_mask).unwrap();
                let [ax, ay] = t.attachment_point;
                let d = g.major_axis_endpoints.iter().map(|p| (p.0 - ax).hypot(p.1 - ay)).fold(f64::MAX, f64::min);
                assert!(d <= 2.0, "seed {seed} id {} d {d}", t.id);
            }
        }
    }

    #[test]
    fn true_pairs_are_candidates() {
        let (mut within, mut total) = (0, 0);
        for seed in 0..10 {
            let s = generate(&SceneParams { n_sperm: 3, ..Default::default() }, seed).unwrap();
            let heads: Vec<_> = s.instances.iter().map(|t| (t.id, fit_ellipse(&t.head_mask).unwrap())).collect();
            let tails: Vec<_> = s.instances.iter().map(|t| (t.id, skeletonize(&t.tail_mask).unwrap())).collect();
            let cands = enumerate_candidates(&heads, &tails, 20.0, 60.0);
            for t in &s.instances {
                let c = cands
                    .iter()
                    .filter(|c| c.head_id == t.id && c.tail_id == t.id)
                    .min_by(|a, b| a.distance.total_cmp(&b.distance))
                    .unwrap_or_else(|| panic!("seed {seed} id {} missing", t.id));
                // direct geometry: the true tip is the attachment point; the
                // true terminal direction is the centreline's over the stretch
                // the slope walk covered
                let [ax, ay] = t.attachment_point;
                let gt_dist = (f64::from(c.tail_endpoint.0) - ax).hypot(f64::from(c.tail_endpoint.1) - ay);
                assert!((c.distance - gt_dist).abs() <= 2.0, "seed {seed} id {}: {} vs {gt_dist}", t.id, c.distance);
                let skel = &tails.iter().find(|x| x.0 == t.id).unwrap().1;
                let path = walk_inward(&skel.pixels, c.tail_endpoint, DEFAULT_SLOPE_K);
                let samples = t.tail_samples();
                let nearest = |p: (i64, i64)| {
                    (0..samples.len())
                        .min_by(|&i, &j| {
                            let d = |k: usize| (samples[k].0 - p.0 as f64).hypot(samples[k].1 - p.1 as f64);
                            d(i).total_cmp(&d(j))
                        })
                        .unwrap()
                };
                let (i0, i1) = (nearest(path[0]), nearest(*path.last().unwrap()));
                let (p, q) = (samples[i0.min(i1)], samples[i0.max(i1)]);
                let gt_slope = (q.1 - p.1).atan2(q.0 - p.0).to_degrees();
                let gt_angle = angle_diff(t.head_geometry.orientation_deg, gt_slope);
                let err = (c.angle_diff - gt_angle).abs();
                assert!(err <= 10.0, "seed {seed} id {}: {} vs {gt_angle}", t.id, c.angle_diff);
                within += usize::from(err <= 5.0);
                total += 1;
            }
        }
        // a 10-pixel digital walk near the head junction can carry one
        // stray step, worth ~5 degrees
        assert!(within * 10 >= total * 9, "{within}/{total} within 5 degrees");
    }

    /// Maximum-cardinality, then minimum-total-angle assignment by
    /// exhaustive search over candidate subsets.
    fn brute_assignment(cands: &[MatchCandidate]) -> (usize, f64) {
        fn go(i: usize, c: &[MatchCandidate], heads: &mut Vec<u32>, tails: &mut Vec<u32>, n: usize, total: f64, best: &mut (usize, f64)) {
            if i == c.len() {
                if n > best.0 || (n == best.0 && total < best.1 - 1e-9) {
                    *best = (n, total);
                }
                return;
            }
            go(i + 1, c, heads, tails, n, total, best);
            if !heads.contains(&c[i].head_id) && !tails.contains(&c[i].tail_id) {
                heads.push(c[i].head_id);
                tails.push(c[i].tail_id);
                go(i + 1, c, heads, tails, n + 1, total + c[i].angle_diff, best);
                heads.pop();
                tails.pop();
            }
        }
        // one candidate per (head, tail): the best endpoint combination
        let mut best_pair: Vec<MatchCandidate> = Vec::new();
        for c in cands {
            match best_pair.iter_mut().find(|b| (b.head_id, b.tail_id) == (c.head_id, c.tail_id)) {
                Some(b) if c.angle_diff < b.angle_diff => *b = *c,
                Some(_) => {}
                None => best_pair.push(*c),
            }
        }
        let mut best = (0, f64::MAX);
        go(0, &best_pair, &mut Vec::new(), &mut Vec::new(), 0, 0.0, &mut best);
        best
    }

    #[test]
    fn greedy_equals_brute_force_when_uncontested() {
        let mut checked = 0;
        for seed in 0..10 {
            let s = generate(&SceneParams { n_sperm: 5, ..Default::default() }, seed).unwrap();
            let heads: Vec<_> = s.instances.iter().map(|t| (t.id, fit_ellipse(&t.head_mask).unwrap())).collect();
            let tails: Vec<_> = s.instances.iter().map(|t| (t.id + 10, skeletonize(&t.tail_mask).unwrap())).collect();
            let cands = enumerate_candidates(&heads, &tails, 20.0, 60.0);
            let disjoint = cands.iter().all(|c| cands.iter().all(|d| d.tail_id != c.tail_id || d.head_id == c.head_id));
            if !disjoint {
                continue;
            }
            checked += 1;
            let greedy = resolve(cands.clone());
            let (n, total) = brute_assignment(&cands);
            assert_eq!(greedy.len(), n);
            let greedy_total: f64 = greedy.iter().map(|c| c.angle_diff).sum();
            assert!((greedy_total - total).abs() < 1e-9, "seed {seed}");
        }
        assert!(checked >= 5);
    }
}
