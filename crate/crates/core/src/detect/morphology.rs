use crate::events::EventBatch;

/// Offsets of a discrete disk: every pixel whose centre lies within
/// `radius + 0.5` of the origin. Radius 1 gives the full 3x3 square.
pub fn elliptical_element(radius: u32) -> Vec<(i32, i32)> {
    let r = radius as i32;
    let lim = (radius as f64 + 0.5).powi(2);
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if ((dx * dx + dy * dy) as f64) <= lim {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Binary occupancy over the bounding box of a set of pixels, padded so the
/// structuring element never reads outside.
struct LocalMap {
    x0: i32,
    y0: i32,
    w: i32,
    h: i32,
    bits: Vec<u8>,
}

impl LocalMap {
    fn from_batch(batch: &EventBatch, pad: i32) -> Option<Self> {
        let first = batch.events.first()?;
        let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (first.x, first.x, first.y, first.y);
        for e in &batch.events {
            x_lo = x_lo.min(e.x);
            x_hi = x_hi.max(e.x);
            y_lo = y_lo.min(e.y);
            y_hi = y_hi.max(e.y);
        }
        let x0 = x_lo as i32 - pad;
        let y0 = y_lo as i32 - pad;
        let w = (x_hi - x_lo) as i32 + 1 + 2 * pad;
        let h = (y_hi - y_lo) as i32 + 1 + 2 * pad;
        let mut map = Self {
            x0,
            y0,
            w,
            h,
            bits: vec![0; (w * h) as usize],
        };
        for e in &batch.events {
            let i = map.index(e.x as i32, e.y as i32);
            map.bits[i] = 1;
        }
        Some(map)
    }

    #[inline]
    fn index(&self, x: i32, y: i32) -> usize {
        ((y - self.y0) * self.w + (x - self.x0)) as usize
    }

    #[inline]
    fn get(&self, x: i32, y: i32) -> bool {
        let (lx, ly) = (x - self.x0, y - self.y0);
        lx >= 0 && ly >= 0 && lx < self.w && ly < self.h && self.bits[(ly * self.w + lx) as usize] != 0
    }
}

/// One morphological opening `(I ⊖ K) ⊕ K` of the batch's local binary event
/// image; keeps exactly the events whose pixel survives. Only the bounding
/// box of the batch is rasterized.
pub fn denoise(batch: &EventBatch, kernel_radius: u32) -> EventBatch {
    let pad = kernel_radius as i32 * 2;
    let Some(map) = LocalMap::from_batch(batch, pad) else {
        return batch.with_events(Vec::new());
    };
    let element = elliptical_element(kernel_radius);

    // erosion: since the element contains the origin, only occupied pixels
    // can survive, so evaluate it lazily around occupied pixels only
    let mut eroded = vec![0u8; map.bits.len()];
    let mut eroded_known = vec![false; map.bits.len()];
    let mut is_eroded = |x: i32, y: i32| -> bool {
        let i = map.index(x, y);
        if !eroded_known[i] {
            eroded_known[i] = true;
            eroded[i] = element.iter().all(|&(dx, dy)| map.get(x + dx, y + dy)) as u8;
        }
        eroded[i] != 0
    };

    // dilation restricted to occupied pixels (opening is anti-extensive)
    let mut opened = vec![2u8; map.bits.len()];
    let mut kept = Vec::with_capacity(batch.events.len());
    for e in &batch.events {
        let (x, y) = (e.x as i32, e.y as i32);
        let i = map.index(x, y);
        if opened[i] == 2 {
            opened[i] = element.iter().any(|&(dx, dy)| is_eroded(x - dx, y - dy)) as u8;
        }
        if opened[i] == 1 {
            kept.push(*e);
        }
    }
    batch.with_events(kept)
}

/// Straightforward full-image erode-then-dilate, used as a test oracle.
#[cfg(test)]
pub(crate) fn reference_opening(pixels: &[(i32, i32)], kernel_radius: u32) -> std::collections::BTreeSet<(i32, i32)> {
    use std::collections::BTreeSet;
    let el = elliptical_element(kernel_radius);
    let set: BTreeSet<_> = pixels.iter().copied().collect();
    let r = kernel_radius as i32;
    let (min_x, max_x) = (set.iter().map(|p| p.0).min().unwrap_or(0) - 2 * r, set.iter().map(|p| p.0).max().unwrap_or(0) + 2 * r);
    let (min_y, max_y) = (set.iter().map(|p| p.1).min().unwrap_or(0) - 2 * r, set.iter().map(|p| p.1).max().unwrap_or(0) + 2 * r);
    let mut eroded = BTreeSet::new();
    for y in min_y..=max_y {
        for x in min_x..=max_x {
            if el.iter().all(|(dx, dy)| set.contains(&(x + dx, y + dy))) {
                eroded.insert((x, y));
            }
        }
    }
    let mut opened = BTreeSet::new();
    for &(x, y) in &eroded {
        for (dx, dy) in &el {
            opened.insert((x + dx, y + dy));
        }
    }
    opened
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{Event, Polarity, SensorDims};
    use std::collections::BTreeSet;

    fn batch(pixels: &[(u16, u16)]) -> EventBatch {
        let events = pixels
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Event::new(i as u64, x, y, Polarity::On))
            .collect();
        EventBatch::new(events, 0, 100_000, SensorDims::new(200, 200)).unwrap()
    }

    #[test]
    fn element_shapes() {
        assert_eq!(elliptical_element(1).len(), 9);
        // 5x5 minus the four corners
        assert_eq!(elliptical_element(2).len(), 21);
        assert_eq!(elliptical_element(0), vec![(0, 0)]);
    }

    #[test]
    fn isolated_event_removed() {
        assert!(denoise(&batch(&[(50, 50)]), 1).is_empty());
    }

    #[test]
    fn solid_block_preserved() {
        let block: Vec<(u16, u16)> = (10..19).flat_map(|y| (10..19).map(move |x| (x, y))).collect();
        let b = batch(&block);
        let out = denoise(&b, 1);
        assert_eq!(out.events, b.events);
        let reference = reference_opening(&block.iter().map(|&(x, y)| (x as i32, y as i32)).collect::<Vec<_>>(), 1);
        assert_eq!(reference.len(), 81);
    }

    #[test]
    fn empty_batch() {
        assert!(denoise(&batch(&[]), 1).is_empty());
    }

    #[test]
    fn keeps_polarity_and_time_of_duplicates() {
        let mut pixels: Vec<(u16, u16)> = (0..5).flat_map(|y| (0..5).map(move |x| (x + 20, y + 20))).collect();
        pixels.push((22, 22));
        let mut b = batch(&pixels);
        b.events.last_mut().unwrap().p = Polarity::Off;
        let out = denoise(&b, 1);
        assert_eq!(out.events, b.events);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn matches_reference_opening(
                pts in prop::collection::vec((5u16..40, 5u16..40), 0..400),
                radius in 0u32..3,
            ) {
                let b = batch(&pts);
                let out = denoise(&b, radius);
                let reference = reference_opening(&pts.iter().map(|&(x, y)| (x as i32, y as i32)).collect::<Vec<_>>(), radius);
                let kept: BTreeSet<(i32, i32)> = out.events.iter().map(|e| (e.x as i32, e.y as i32)).collect();
                let expect: BTreeSet<(i32, i32)> = pts.iter().map(|&(x, y)| (x as i32, y as i32)).filter(|p| reference.contains(p)).collect();
                prop_assert_eq!(kept, expect);
                // subset, order preserved
                let mut it = b.events.iter();
                for e in &out.events {
                    prop_assert!(it.any(|x| x == e));
                }
            }
        }
    }
}
