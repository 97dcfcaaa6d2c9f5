//! Rasterisation helpers used by the generator, the matcher's bridging
//! segment and tests.

use super::BinaryMask;

/// Sets every pixel whose centre lies inside the ellipse with semi-axes
/// `a` (along `theta`, radians, image coordinates) and `b`.
pub fn fill_ellipse(mask: &mut BinaryMask, cx: f64, cy: f64, a: f64, b: f64, theta: f64) {
    let (c, s) = (theta.cos(), theta.sin());
    let r = a.max(b).ceil() as i64 + 1;
    let (x0, y0) = (cx.round() as i64, cy.round() as i64);
    for y in y0 - r..=y0 + r {
        for x in x0 - r..=x0 + r {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let u = dx * c + dy * s;
            let v = -dx * s + dy * c;
            if (u * u) / (a * a) + (v * v) / (b * b) <= 1.0 {
                mask.set_signed(x, y, true);
            }
        }
    }
}

/// 8-connected digital line between two pixels (Bresenham), endpoints included.
pub fn line_points(from: (i64, i64), to: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = from;
    let dx = (to.0 - x).abs();
    let dy = -(to.1 - y).abs();
    let sx = if x < to.0 { 1 } else { -1 };
    let sy = if y < to.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        out.push((x, y));
        if (x, y) == to {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

/// Sets pixels whose centre is strictly closer than `half_width` to the
/// polyline through `points`.
pub fn stroke_polyline(mask: &mut BinaryMask, points: &[(f64, f64)], half_width: f64) {
    for seg in points.windows(2) {
        let (p, q) = (seg[0], seg[1]);
        let pad = half_width.ceil() as i64 + 1;
        let xmin = p.0.min(q.0).floor() as i64 - pad;
        let xmax = p.0.max(q.0).ceil() as i64 + pad;
        let ymin = p.1.min(q.1).floor() as i64 - pad;
        let ymax = p.1.max(q.1).ceil() as i64 + pad;
        for y in ymin..=ymax {
            for x in xmin..=xmax {
                if segment_distance((x as f64, y as f64), p, q) < half_width {
                    mask.set_signed(x, y, true);
                }
            }
        }
    }
}

pub fn segment_distance(pt: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((pt.0 - a.0) * vx + (pt.1 - a.1) * vy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * vx, a.1 + t * vy);
    ((pt.0 - cx).powi(2) + (pt.1 - cy).powi(2)).sqrt()
}
