use super::{BinaryMask, Grid};

#[derive(Debug, PartialEq, Eq, Copy, Clone)]
pub enum Connectivity {
    Four,
    Eight,
}

/// Region labels; 0 is background, regions are numbered `1..=count` in
/// raster order of their first pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMap {
    labels: Grid<u32>,
    count: u32,
}

impl LabelMap {
    pub fn width(&self) -> usize {
        self.labels.width()
    }

    pub fn height(&self) -> usize {
        self.labels.height()
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    pub fn labels(&self) -> &Grid<u32> {
        &self.labels
    }

    /// Flat pixel indices of every region, indexed by `label - 1`.
    pub fn region_pixels(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count as usize];
        for (i, &l) in self.labels.as_slice().iter().enumerate() {
            if l > 0 {
                out[l as usize - 1].push(i);
            }
        }
        out
    }

    pub fn mask_of(&self, label: u32) -> BinaryMask {
        self.labels.map(|&l| l == label && label > 0)
    }
}

pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> LabelMap {
    let (w, h) = (mask.width(), mask.height());
    let fg = mask.as_slice();
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !fg[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let x = (idx % w) as isize;
            let y = (idx / w) as isize;
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if (dx == 0 && dy == 0)
                        || (connectivity == Connectivity::Four && dx != 0 && dy != 0)
                    {
                        continue;
                    }
                    let nx = x + dx;
                    let ny = y + dy;
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let n = ny as usize * w + nx as usize;
                    if fg[n] && labels[n] == 0 {
                        labels[n] = next;
                        stack.push(n);
                    }
                }
            }
        }
    }
    LabelMap {
        labels: Grid::from_vec(w, h, labels).expect("shape preserved"),
        count: next,
    }
}
