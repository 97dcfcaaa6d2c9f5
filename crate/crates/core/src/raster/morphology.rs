use super::BinaryMask;

/// Offsets of the disk structuring element: every `(dx, dy)` whose
/// centre-to-centre Euclidean distance is at most `radius`.
pub fn disk_offsets(radius: u32) -> Vec<(i64, i64)> {
    let r = i64::from(radius);
    let r2 = r * r;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r2 {
                out.push((dx, dy));
            }
        }
    }
    out
}

pub fn dilate(mask: &BinaryMask, radius: u32) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let offsets = disk_offsets(radius);
    let mut out = mask.empty_like();
    for (x, y) in mask.iter_points() {
        let (x, y) = (i64::from(x), i64::from(y));
        for &(dx, dy) in &offsets {
            out.set_signed(x + dx, y + dy, true);
        }
    }
    out
}

/// Erosion with the disk element. Only in-bounds neighbours are tested, so
/// the image border does not erode foreground that touches it.
pub fn erode(mask: &BinaryMask, radius: u32) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let offsets = disk_offsets(radius);
    let (w, h) = (i64::from(mask.width()), i64::from(mask.height()));
    let mut out = mask.empty_like();
    for (x, y) in mask.iter_points() {
        let (xi, yi) = (i64::from(x), i64::from(y));
        let keep = offsets.iter().all(|&(dx, dy)| {
            let (nx, ny) = (xi + dx, yi + dy);
            nx < 0 || ny < 0 || nx >= w || ny >= h || mask.get(nx as u32, ny as u32)
        });
        if keep {
            out.set(x, y, true);
        }
    }
    out
}

pub fn closing(mask: &BinaryMask, radius: u32) -> BinaryMask {
    erode(&dilate(mask, radius), radius)
}

/// Foreground pixels with at least one 4-neighbour in the background
/// (pixels on the image border count as boundary).
pub fn inner_boundary(mask: &BinaryMask) -> BinaryMask {
    let mut out = mask.empty_like();
    for (x, y) in mask.iter_points() {
        let (xi, yi) = (i64::from(x), i64::from(y));
        let edge = [(0, -1), (-1, 0), (1, 0), (0, 1)]
            .iter()
            .any(|&(dx, dy)| !mask.get_signed(xi + dx, yi + dy));
        if edge {
            out.set(x, y, true);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_sizes() {
        assert_eq!(disk_offsets(0).len(), 1);
        assert_eq!(disk_offsets(1).len(), 5);
        assert_eq!(disk_offsets(2).len(), 13);
        assert_eq!(disk_offsets(3).len(), 29);
    }

    #[test]
    fn radius_zero_is_identity() {
        let m = BinaryMask::from_fn(9, 9, |x, y| (x + y) % 3 == 0).unwrap();
        assert_eq!(dilate(&m, 0), m);
        assert_eq!(erode(&m, 0), m);
    }

    #[test]
    fn single_pixel_dilates_to_plus() {
        let mut m = BinaryMask::new(5, 5).unwrap();
        m.set(2, 2, true);
        let d = dilate(&m, 1);
        assert_eq!(d.area(), 5);
        assert!(d.get(2, 1) && d.get(1, 2) && d.get(3, 2) && d.get(2, 3));
        assert!(!d.get(1, 1));
        assert_eq!(erode(&d, 1), m);
    }

    #[test]
    fn closing_contains_convex_set() {
        let m = BinaryMask::from_fn(30, 30, |x, y| {
            let (dx, dy) = (x as f64 - 14.0, y as f64 - 15.0);
            dx * dx / 64.0 + dy * dy / 25.0 <= 1.0
        })
        .unwrap();
        for r in 0..4 {
            assert!(m.is_subset_of(&closing(&m, r)));
        }
    }

    #[test]
    fn boundary_of_block() {
        let m = BinaryMask::from_fn(6, 6, |x, y| (1..5).contains(&x) && (1..5).contains(&y)).unwrap();
        assert_eq!(inner_boundary(&m).area(), 12);
    }
}
