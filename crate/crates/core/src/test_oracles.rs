//! Brute-force reference implementations used only by tests.

use crate::raster::BinaryMask;

/// Union-find component labelling over explicit pixel pairs.
pub fn union_find_components(m: &BinaryMask, eight: bool) -> Vec<Vec<(u32, u32)>> {
    let (w, h) = (m.width() as usize, m.height() as usize);
    let mut parent: Vec<usize> = (0..w * h).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for y in 0..h {
        for x in 0..w {
            if !m.get(x as u32, y as u32) {
                continue;
            }
            let mut nbrs = vec![(x + 1, y), (x, y + 1)];
            if eight {
                nbrs.push((x + 1, y + 1));
                if x > 0 {
                    nbrs.push((x - 1, y + 1));
                }
            }
            for (nx, ny) in nbrs {
                if nx < w && ny < h && m.get(nx as u32, ny as u32) {
                    let (a, b) = (find(&mut parent, y * w + x), find(&mut parent, ny * w + nx));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<(u32, u32)>> = Default::default();
    for y in 0..h {
        for x in 0..w {
            if m.get(x as u32, y as u32) {
                let r = find(&mut parent, y * w + x);
                groups.entry(r).or_default().push((x as u32, y as u32));
            }
        }
    }
    let mut out: Vec<_> = groups.into_values().collect();
    out.sort_by_key(|g| (g[0].1, g[0].0));
    out
}

/// Explicit 3x3 window neighbour count.
pub fn brute_neighbours(m: &BinaryMask, x: u32, y: u32) -> usize {
    let mut n = 0;
    for dy in -1i64..=1 {
        for dx in -1i64..=1 {
            if (dx, dy) != (0, 0) && m.get_signed(i64::from(x) + dx, i64::from(y) + dy) {
                n += 1;
            }
        }
    }
    n
}

/// xorshift-filled random mask with the given fill probability in 1/256ths.
pub fn random_mask(w: u32, h: u32, seed: u64, fill: u8) -> BinaryMask {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    BinaryMask::from_fn(w, h, |_, _| {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 24) as u8 <= fill
    })
    .expect("non-zero dimensions")
}
