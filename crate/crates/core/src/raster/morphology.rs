use std::collections::VecDeque;

use super::BinaryMask;

/// 3x3 structuring elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructuringElement {
    /// Centre plus the four edge neighbours.
    Cross,
    /// Full 3x3 square.
    Square,
}

impl StructuringElement {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            StructuringElement::Cross => &[(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)],
            StructuringElement::Square => &[
                (0, 0),
                (-1, -1),
                (0, -1),
                (1, -1),
                (-1, 0),
                (1, 0),
                (-1, 1),
                (0, 1),
                (1, 1),
            ],
        }
    }
}

/// Binary erosion; pixels outside the image count as background.
pub fn erode(mask: &BinaryMask, se: StructuringElement) -> BinaryMask {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let offs = se.offsets();
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        offs.iter().all(|&(dx, dy)| {
            let nx = x as isize + dx;
            let ny = y as isize + dy;
            nx >= 0 && ny >= 0 && nx < w && ny < h && mask[(nx as usize, ny as usize)]
        })
    })
}

/// Binary dilation; pixels outside the image count as background.
pub fn dilate(mask: &BinaryMask, se: StructuringElement) -> BinaryMask {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let offs = se.offsets();
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        offs.iter().any(|&(dx, dy)| {
            let nx = x as isize + dx;
            let ny = y as isize + dy;
            nx >= 0 && ny >= 0 && nx < w && ny < h && mask[(nx as usize, ny as usize)]
        })
    })
}

pub fn erode_n(mask: &BinaryMask, se: StructuringElement, times: usize) -> BinaryMask {
    (0..times).fold(mask.clone(), |m, _| erode(&m, se))
}

pub fn opening(mask: &BinaryMask, se: StructuringElement) -> BinaryMask {
    dilate(&erode(mask, se), se)
}

pub fn closing(mask: &BinaryMask, se: StructuringElement) -> BinaryMask {
    erode(&dilate(mask, se), se)
}

/// Fill background regions that are not 4-connected to the image border.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    for idx in 0..w * h {
        if mask.on_border(idx) && !mask.as_slice()[idx] {
            outside[idx] = true;
            queue.push_back(idx);
        }
    }
    while let Some(idx) = queue.pop_front() {
        let x = idx % w;
        let y = idx / w;
        let mut visit = |n: usize| {
            if !outside[n] && !mask.as_slice()[n] {
                outside[n] = true;
                queue.push_back(n);
            }
        };
        if x > 0 {
            visit(idx - 1);
        }
        if x + 1 < w {
            visit(idx + 1);
        }
        if y > 0 {
            visit(idx - w);
        }
        if y + 1 < h {
            visit(idx + w);
        }
    }
    BinaryMask::from_vec(w, h, outside.into_iter().map(|o| !o).collect()).expect("shape preserved")
}
