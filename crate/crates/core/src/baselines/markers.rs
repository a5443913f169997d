//! Distance-map markers and region growing shared by the watershed and
//! ultimate-erosion baselines.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::raster::{BinaryMask, Field, Grid};

/// Grayscale reconstruction by dilation of `marker` under `mask`
/// (hybrid raster-scan and FIFO algorithm), 8-connected.
pub(crate) fn reconstruct(marker: &Field, mask: &Field) -> Field {
    let (w, h) = (mask.width(), mask.height());
    let g = mask.as_slice();
    let mut j: Vec<f64> = marker
        .as_slice()
        .iter()
        .zip(g)
        .map(|(m, g)| m.min(*g))
        .collect();
    let at = |x: isize, y: isize| -> Option<usize> {
        (x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h)
            .then(|| y as usize * w + x as usize)
    };
    const FWD: [(isize, isize); 4] = [(-1, -1), (0, -1), (1, -1), (-1, 0)];
    const BWD: [(isize, isize); 4] = [(1, 1), (0, 1), (-1, 1), (1, 0)];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = y as usize * w + x as usize;
            let mut m = j[p];
            for (dx, dy) in FWD {
                if let Some(q) = at(x + dx, y + dy) {
                    m = m.max(j[q]);
                }
            }
            j[p] = m.min(g[p]);
        }
    }
    let mut queue = VecDeque::new();
    for y in (0..h as isize).rev() {
        for x in (0..w as isize).rev() {
            let p = y as usize * w + x as usize;
            let mut m = j[p];
            for (dx, dy) in BWD {
                if let Some(q) = at(x + dx, y + dy) {
                    m = m.max(j[q]);
                }
            }
            j[p] = m.min(g[p]);
            for (dx, dy) in BWD {
                if let Some(q) = at(x + dx, y + dy) {
                    if j[q] < j[p] && j[q] < g[q] {
                        queue.push_back(p);
                        break;
                    }
                }
            }
        }
    }
    while let Some(p) = queue.pop_front() {
        let (x, y) = ((p % w) as isize, (p / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                if let Some(q) = at(x + dx, y + dy) {
                    if q != p && j[q] < j[p] && g[q] != j[q] {
                        j[q] = j[p].min(g[q]);
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    Grid::from_vec(w, h, j).expect("same size")
}

/// Suppress maxima shallower than `h`: reconstruction of `f - h` under `f`.
pub(crate) fn h_maxima_transform(f: &Field, h: f64) -> Field {
    if h <= 0.0 {
        return f.clone();
    }
    reconstruct(&f.map(|v| v - h), f)
}

/// 8-connected plateaus of `f` inside `mask` with no strictly higher
/// neighbour inside `mask`, labelled `1..` in raster order.
pub(crate) fn regional_maxima(f: &Field, mask: &BinaryMask) -> (Grid<u32>, u32) {
    let (w, h) = (f.width(), f.height());
    let v = f.as_slice();
    let m = mask.as_slice();
    let mut seen = vec![false; w * h];
    let mut out = Grid::filled(w, h, 0u32);
    let mut count = 0;
    let mut plateau = Vec::new();
    for start in 0..w * h {
        if !m[start] || seen[start] {
            continue;
        }
        plateau.clear();
        let mut stack = vec![start];
        seen[start] = true;
        let mut is_max = true;
        while let Some(p) = stack.pop() {
            plateau.push(p);
            for q in f.neighbours8(p) {
                if !m[q] {
                    continue;
                }
                if v[q] > v[p] {
                    is_max = false;
                } else if v[q] == v[p] && !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
        if is_max {
            count += 1;
            for &p in &plateau {
                out.as_mut_slice()[p] = count;
            }
        }
    }
    (out, count)
}

#[derive(PartialEq)]
struct Entry {
    height: f64,
    order: u64,
    pos: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // highest first, then first-in first-out
        self.height
            .total_cmp(&other.height)
            .then(other.order.cmp(&self.order))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Priority flood from labelled markers over `mask`, descending `f`
/// (watershed of `-f` without dam pixels). Every mask pixel connected to a
/// marker receives a label.
pub(crate) fn flood(f: &Field, mask: &BinaryMask, markers: &Grid<u32>) -> Grid<u32> {
    let mut labels = markers.clone();
    let mut heap = BinaryHeap::new();
    let mut order = 0u64;
    for (p, &l) in markers.as_slice().iter().enumerate() {
        if l > 0 {
            heap.push(Entry {
                height: f.as_slice()[p],
                order,
                pos: p,
            });
            order += 1;
        }
    }
    while let Some(Entry { pos, .. }) = heap.pop() {
        let l = labels.as_slice()[pos];
        for q in f.neighbours8(pos) {
            if mask.as_slice()[q] && labels.as_slice()[q] == 0 {
                labels.as_mut_slice()[q] = l;
                heap.push(Entry {
                    height: f.as_slice()[q],
                    order,
                    pos: q,
                });
                order += 1;
            }
        }
    }
    labels
}

/// Breadth-first nearest-marker growth over `mask`, 8-connected.
pub(crate) fn grow(mask: &BinaryMask, markers: &Grid<u32>) -> Grid<u32> {
    let mut labels = markers.clone();
    let mut queue: VecDeque<usize> = markers
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 0)
        .map(|(p, _)| p)
        .collect();
    while let Some(p) = queue.pop_front() {
        let l = labels.as_slice()[p];
        for q in mask.neighbours8(p) {
            if mask.as_slice()[q] && labels.as_slice()[q] == 0 {
                labels.as_mut_slice()[q] = l;
                queue.push_back(q);
            }
        }
    }
    labels
}

/// Pixel count of each label `1..=count`.
pub(crate) fn label_areas(labels: &Grid<u32>, count: u32) -> Vec<f64> {
    let mut areas = vec![0usize; count as usize];
    for &l in labels.as_slice() {
        if l > 0 {
            areas[l as usize - 1] += 1;
        }
    }
    areas.into_iter().map(|a| a as f64).collect()
}
