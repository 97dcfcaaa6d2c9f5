use serde::{Deserialize, Serialize};

use super::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    pub(crate) fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &[(0, -1), (-1, 0), (1, 0), (0, 1)],
            Connectivity::Eight => {
                &[(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]
            }
        }
    }
}

/// Component labelling of a mask. Label 0 is background; labels `1..=count`
/// are numbered in order of each component's first pixel in a row-major scan.
#[derive(Debug, Clone)]
pub struct Labels {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u32>,
    pub areas: Vec<usize>,
}

impl Labels {
    pub fn count(&self) -> usize {
        self.areas.len()
    }

    /// Mask of component `label` (1-based).
    pub fn mask(&self, label: u32) -> BinaryMask {
        let bits = self.labels.iter().map(|&l| l == label).collect();
        BinaryMask::from_bits(self.width, self.height, bits).expect("labels match dimensions")
    }
}

pub fn label_components(mask: &BinaryMask, connectivity: Connectivity) -> Labels {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let mut labels = vec![0u32; w * h];
    let mut areas = Vec::new();
    let mut stack = Vec::new();
    let offsets = connectivity.offsets();
    for start in 0..w * h {
        if !mask.get_index(start) || labels[start] != 0 {
            continue;
        }
        let label = areas.len() as u32 + 1;
        labels[start] = label;
        stack.push(start);
        let mut area = 0;
        while let Some(i) = stack.pop() {
            area += 1;
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for &(dx, dy) in offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask.get_index(j) && labels[j] == 0 {
                    labels[j] = label;
                    stack.push(j);
                }
            }
        }
        areas.push(area);
    }
    Labels { width: mask.width(), height: mask.height(), labels, areas }
}

/// Splits a mask into its maximal connected regions, ordered by each
/// region's top-left-most pixel (row-major).
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Vec<BinaryMask> {
    let labels = label_components(mask, connectivity);
    let mut out: Vec<BinaryMask> = (0..labels.count()).map(|_| mask.empty_like()).collect();
    for (i, &l) in labels.labels.iter().enumerate() {
        if l > 0 {
            out[l as usize - 1].set_index(i, true);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_oracles::{random_mask, union_find_components};
    use proptest::prelude::*;

    fn square(m: &mut BinaryMask, x0: u32, y0: u32, s: u32) {
        for y in y0..y0 + s {
            for x in x0..x0 + s {
                m.set(x, y, true);
            }
        }
    }

    #[test]
    fn two_disjoint_squares() {
        let mut m = BinaryMask::new(12, 12).unwrap();
        square(&mut m, 0, 0, 3);
        square(&mut m, 6, 6, 3);
        let cc = connected_components(&m, Connectivity::Eight);
        assert_eq!(cc.len(), 2);
        assert!(cc[0].get(0, 0));
        assert!(cc[1].get(8, 8));
    }

    #[test]
    fn diagonal_touch_depends_on_connectivity() {
        let mut m = BinaryMask::new(8, 8).unwrap();
        square(&mut m, 0, 0, 3);
        square(&mut m, 3, 3, 3);
        assert_eq!(connected_components(&m, Connectivity::Eight).len(), 1);
        assert_eq!(connected_components(&m, Connectivity::Four).len(), 2);
    }

    #[test]
    fn empty_mask_has_no_components() {
        let m = BinaryMask::new(5, 5).unwrap();
        assert!(connected_components(&m, Connectivity::Eight).is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn matches_union_find_oracle(seed in any::<u64>(), fill in 40u8..180, eight in any::<bool>()) {
            let m = random_mask(32, 32, seed, fill);
            let conn = if eight { Connectivity::Eight } else { Connectivity::Four };
            let cc = connected_components(&m, conn);
            let oracle = union_find_components(&m, eight);
            prop_assert_eq!(cc.len(), oracle.len());
            let mut union = m.empty_like();
            for (c, o) in cc.iter().zip(&oracle) {
                prop_assert_eq!(c.area(), o.len());
                prop_assert!(c.get(o[0].0, o[0].1));
                prop_assert_eq!(union.intersection_area(c).unwrap(), 0);
                union.union_with(c).unwrap();
            }
            prop_assert_eq!(union, m);
        }
    }

    #[test]
    fn ordering_is_top_left_first() {
        let mut m = BinaryMask::new(10, 10).unwrap();
        m.set(8, 1, true);
        m.set(1, 5, true);
        m.set(0, 9, true);
        let cc = connected_components(&m, Connectivity::Eight);
        assert!(cc[0].get(8, 1));
        assert!(cc[1].get(1, 5));
        assert!(cc[2].get(0, 9));
    }
}
