//! Image primitives shared by synthesis, feature extraction and the
//! baselines.
//!
//! Every raster is row-major with `(x, y)` addressing, `x` along the width.
//! Intensities are kept as `f64` in `[0, 1]` (0 = opaque, 1 = fully
//! transmitted); 8-bit only exists at the file boundary in [`io`].

mod distance;
mod filter;
pub mod io;
mod label;
mod morphology;
mod threshold;

use std::ops::{Index, IndexMut};

use crate::{Error, Result};

pub use distance::distance_transform;
pub use filter::{convolve, gaussian_blur, gaussian_kernel_1d, sobel_gradients, Kernel};
pub use label::{connected_components, Connectivity, LabelMap};
pub use morphology::{closing, dilate, erode, erode_n, fill_holes, opening, StructuringElement};
pub use threshold::{otsu_threshold, threshold_below};

/// Dense row-major 2D grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Intensity image, values in `[0, 1]` after any clamping operation.
pub type GrayImage = Grid<f64>;

/// Signed or unbounded scalar field on the pixel grid (gradients, distances).
pub type Field = Grid<f64>;

/// Foreground flags; `true` marks particle matter.
pub type BinaryMask = Grid<bool>;

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Grid {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "raster data has {} elements, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Grid {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Grid {
            width,
            height,
            data,
        }
    }

    pub fn map<U: Clone>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Value at `(x, y)` with coordinates clamped into the grid (replicate
    /// border).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> &T {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        &self.data[cy * self.width + cx]
    }
}

impl<T> Grid<T> {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index_of(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Neighbours of `(x, y)` inside the grid, 8-connected, as flat indices.
    pub(crate) fn neighbours8(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let x = (idx % self.width) as isize;
        let y = (idx / self.width) as isize;
        const OFFS: [(isize, isize); 8] = [
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ];
        OFFS.iter().filter_map(move |&(dx, dy)| {
            let nx = x + dx;
            let ny = y + dy;
            if nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height {
                Some(ny as usize * self.width + nx as usize)
            } else {
                None
            }
        })
    }

    /// True if the flat index lies on the outermost pixel ring.
    #[inline]
    pub(crate) fn on_border(&self, idx: usize) -> bool {
        let x = idx % self.width;
        let y = idx / self.width;
        x == 0 || y == 0 || x + 1 == self.width || y + 1 == self.height
    }
}

impl<T> Index<(usize, usize)> for Grid<T> {
    type Output = T;

    #[inline]
    fn index(&self, (x, y): (usize, usize)) -> &T {
        &self.data[y * self.width + x]
    }
}

impl<T> IndexMut<(usize, usize)> for Grid<T> {
    #[inline]
    fn index_mut(&mut self, (x, y): (usize, usize)) -> &mut T {
        &mut self.data[y * self.width + x]
    }
}

impl Grid<f64> {
    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Grid::filled(width, height, value)
    }

    pub fn clamp01(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Round every intensity to the nearest 8-bit level, as a PNG round trip
    /// would.
    pub fn quantize_8bit(&mut self) {
        for v in &mut self.data {
            *v = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0;
        }
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Grid::from_vec(
            width,
            height,
            bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        )
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

impl Grid<bool> {
    pub fn empty(width: usize, height: usize) -> Self {
        Grid::filled(width, height, false)
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Self {
        self.map(|b| !b)
    }

    pub fn and(&self, other: &Self) -> Self {
        debug_assert!(self.same_shape(other));
        Grid {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a && b)
                .collect(),
        }
    }

    /// Nearest-neighbour upsampling by an integer factor.
    pub fn upsample(&self, factor: usize) -> Self {
        Grid::from_fn(self.width * factor, self.height * factor, |x, y| {
            self[(x / factor, y / factor)]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(GrayImage::from_vec(3, 2, vec![0.0; 5]).is_err());
        assert!(GrayImage::from_vec(3, 2, vec![0.0; 6]).is_ok());
    }

    #[test]
    fn clamped_access_replicates_border() {
        let img = GrayImage::from_fn(3, 3, |x, y| (x + 3 * y) as f64);
        assert_eq!(*img.get_clamped(-4, 1), 3.0);
        assert_eq!(*img.get_clamped(9, 9), 8.0);
    }

    #[test]
    fn quantize_matches_u8_round_trip() {
        let mut img = GrayImage::from_fn(16, 1, |x, _| x as f64 / 15.0 * 0.97);
        let bytes = img.to_u8();
        img.quantize_8bit();
        assert_eq!(GrayImage::from_u8(16, 1, &bytes).unwrap(), img);
    }

    #[test]
    fn upsample_quadruples_count() {
        let mut m = BinaryMask::empty(5, 5);
        m[(1, 1)] = true;
        m[(2, 1)] = true;
        assert_eq!(m.upsample(2).count(), 8);
    }
}
