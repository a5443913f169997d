//! Agglomerate segmentation and the 13 region features fed to the networks.

mod normalize;
mod shape;

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::raster::{
    connected_components, fill_holes, opening, otsu_threshold, threshold_below, BinaryMask,
    Connectivity, GrayImage, LabelMap, StructuringElement,
};
use crate::{Error, Result};

pub use normalize::{fit_normalizer, normalize, FeatureRanges, CLAMP_HIGH, CLAMP_LOW};

pub const NUM_FEATURES: usize = 13;

/// Column names, in feature-vector order.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "area",
    "convex_area",
    "eccentricity",
    "equivalent_diameter",
    "extent",
    "filled_area",
    "major_axis_length",
    "minor_axis_length",
    "perimeter",
    "solidity",
    "min_intensity",
    "max_intensity",
    "mean_intensity",
];

/// Shape and intensity descriptors of one segmented region. Lengths in px,
/// areas in px², intensities in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionFeatures {
    pub area: f64,
    pub convex_area: f64,
    pub eccentricity: f64,
    pub equivalent_diameter: f64,
    pub extent: f64,
    pub filled_area: f64,
    pub major_axis_length: f64,
    pub minor_axis_length: f64,
    pub perimeter: f64,
    pub solidity: f64,
    pub min_intensity: f64,
    pub max_intensity: f64,
    pub mean_intensity: f64,
}

impl RegionFeatures {
    pub fn to_array(&self) -> [f64; NUM_FEATURES] {
        [
            self.area,
            self.convex_area,
            self.eccentricity,
            self.equivalent_diameter,
            self.extent,
            self.filled_area,
            self.major_axis_length,
            self.minor_axis_length,
            self.perimeter,
            self.solidity,
            self.min_intensity,
            self.max_intensity,
            self.mean_intensity,
        ]
    }

    pub fn from_array(v: [f64; NUM_FEATURES]) -> Self {
        RegionFeatures {
            area: v[0],
            convex_area: v[1],
            eccentricity: v[2],
            equivalent_diameter: v[3],
            extent: v[4],
            filled_area: v[5],
            major_axis_length: v[6],
            minor_axis_length: v[7],
            perimeter: v[8],
            solidity: v[9],
            min_intensity: v[10],
            max_intensity: v[11],
            mean_intensity: v[12],
        }
    }
}

/// Result of [`segment`].
#[derive(Clone, Debug)]
pub struct Segmentation {
    /// Foreground after opening.
    pub mask: BinaryMask,
    /// `mask` with holes filled.
    pub filled: BinaryMask,
    /// 8-connected regions of `mask`.
    pub labels: LabelMap,
    /// `touches_border[label - 1]` is true for regions reaching the image edge.
    pub touches_border: Vec<bool>,
    pub threshold: f64,
}

impl Segmentation {
    /// Labels of regions not touching the image border, in label order.
    pub fn interior_regions(&self) -> Vec<u32> {
        (1..=self.labels.count())
            .filter(|l| !self.touches_border[*l as usize - 1])
            .collect()
    }

    /// Largest interior region; the lower label wins a tie.
    pub fn main_region(&self) -> Option<u32> {
        let pixels = self.labels.region_pixels();
        self.interior_regions().into_iter().max_by(|a, b| {
            pixels[*a as usize - 1]
                .len()
                .cmp(&pixels[*b as usize - 1].len())
                .then(b.cmp(a))
        })
    }
}

/// Otsu threshold (dark foreground), opening with a 3×3 cross, 8-connected
/// labeling. A constant image has no foreground.
pub fn segment(img: &GrayImage) -> Segmentation {
    let threshold = otsu_threshold(img);
    let raw = threshold_below(img, threshold);
    let mask = opening(&raw, StructuringElement::Cross);
    let filled = fill_holes(&mask);
    let labels = connected_components(&mask, Connectivity::Eight);
    let mut touches_border = vec![false; labels.count() as usize];
    let grid = labels.labels();
    for (i, &l) in grid.as_slice().iter().enumerate() {
        if l > 0 && grid.on_border(i) {
            touches_border[l as usize - 1] = true;
        }
    }
    Segmentation {
        mask,
        filled,
        labels,
        touches_border,
        threshold,
    }
}

/// Features of region `label` of `labels`, with intensities read from `img`.
pub fn extract_features(img: &GrayImage, labels: &LabelMap, label: u32) -> Result<RegionFeatures> {
    if img.width() != labels.width() || img.height() != labels.height() {
        return Err(Error::invalid("image and label map differ in size"));
    }
    let w = img.width();
    let pixels: Vec<(i64, i64)> = labels
        .labels()
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == label && label > 0)
        .map(|(i, _)| ((i % w) as i64, (i / w) as i64))
        .collect();
    features_of_pixels(img, &pixels)
}

/// Features of all `true` pixels of `mask` taken as one region.
pub fn mask_features(img: &GrayImage, mask: &BinaryMask) -> Result<RegionFeatures> {
    if !img.same_shape(mask) {
        return Err(Error::invalid("image and mask differ in size"));
    }
    let w = mask.width();
    let pixels: Vec<(i64, i64)> = mask
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| ((i % w) as i64, (i / w) as i64))
        .collect();
    features_of_pixels(img, &pixels)
}

fn features_of_pixels(img: &GrayImage, pixels: &[(i64, i64)]) -> Result<RegionFeatures> {
    if pixels.is_empty() {
        return Err(Error::invalid("empty region"));
    }
    let n = pixels.len() as f64;
    let crop = shape::Crop::new(pixels);
    let filled = crop.filled_count() as f64;
    let hull = shape::convex_hull(&shape::boundary_points(&crop));
    let convex = (shape::lattice_points_in_hull(&hull) as f64).max(filled);

    // second central moments with the uniform-pixel 1/12 term
    let cx = pixels.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let cy = pixels.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let (mut uxx, mut uyy, mut uxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pixels {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        uxx += dx * dx;
        uyy += dy * dy;
        uxy += dx * dy;
    }
    uxx = uxx / n + 1.0 / 12.0;
    uyy = uyy / n + 1.0 / 12.0;
    uxy /= n;
    let common = ((uxx - uyy).powi(2) + 4.0 * uxy * uxy).sqrt();
    let major = 2.0 * (2.0 * (uxx + uyy + common)).sqrt();
    let minor = 2.0 * (2.0 * (uxx + uyy - common).max(0.0)).sqrt();
    let eccentricity = if major > 0.0 {
        (1.0 - (minor / major).powi(2)).max(0.0).sqrt()
    } else {
        0.0
    };

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &(x, y) in pixels {
        let v = img[(x as usize, y as usize)];
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
    }
    Ok(RegionFeatures {
        area: n,
        convex_area: convex,
        eccentricity,
        equivalent_diameter: (4.0 * n / PI).sqrt(),
        extent: n / (crop.w * crop.h) as f64,
        filled_area: filled,
        major_axis_length: major,
        minor_axis_length: minor,
        perimeter: crop.perimeter(),
        solidity: n / convex,
        min_intensity: lo,
        max_intensity: hi,
        mean_intensity: (sum / n).clamp(lo, hi),
    })
}

/// Write rows as CSV with a header of [`FEATURE_NAMES`].
pub fn write_features_csv<W: Write>(mut out: W, rows: &[RegionFeatures]) -> std::io::Result<()> {
    writeln!(out, "{}", FEATURE_NAMES.join(","))?;
    for r in rows {
        let cells: Vec<String> = r.to_array().iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_mask(w: usize, cx: f64, cy: f64, r: f64) -> BinaryMask {
        BinaryMask::from_fn(w, w, |x, y| {
            (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r
        })
    }

    #[test]
    fn ideal_disk() {
        let m = disk_mask(101, 50.0, 50.0, 40.0);
        let f = mask_features(&GrayImage::constant(101, 101, 0.3), &m).unwrap();
        assert!(f.eccentricity < 0.1);
        assert!(f.solidity > 0.97);
        assert!((f.equivalent_diameter - 80.0).abs() / 80.0 < 0.03);
        assert_eq!(f.min_intensity, 0.3);
        assert_eq!(f.max_intensity, 0.3);
        assert_eq!(f.mean_intensity, 0.3);
    }

    #[test]
    fn rectangle_moments() {
        let m = BinaryMask::from_fn(40, 40, |x, y| (5..25).contains(&x) && (8..18).contains(&y));
        let f = mask_features(&GrayImage::constant(40, 40, 0.5), &m).unwrap();
        assert_eq!(f.extent, 1.0);
        assert_eq!(f.area, 200.0);
        assert_eq!(f.convex_area, 200.0);
        assert!((f.major_axis_length / f.minor_axis_length - 2.0).abs() < 1e-9);
        // uniform rectangle: axis length = side * sqrt(4/3)
        assert!((f.major_axis_length - 20.0 * (4.0f64 / 3.0).sqrt()).abs() < 1e-9);
        assert_eq!(f.perimeter, 56.0);
    }

    #[test]
    fn invariants_on_ring() {
        let m = BinaryMask::from_fn(60, 60, |x, y| {
            let d2 = (x as f64 - 30.0).powi(2) + (y as f64 - 30.0).powi(2);
            (100.0..=400.0).contains(&d2)
        });
        let img = GrayImage::from_fn(60, 60, |x, y| ((x + 2 * y) % 11) as f64 / 10.0);
        let f = mask_features(&img, &m).unwrap();
        assert!(f.area < f.filled_area && f.filled_area <= f.convex_area);
        assert!(f.minor_axis_length <= f.major_axis_length);
        assert!(f.min_intensity <= f.mean_intensity && f.mean_intensity <= f.max_intensity);
        assert!((f.solidity - f.area / f.convex_area).abs() < 1e-9);
        assert!((f.equivalent_diameter - (4.0 * f.area / PI).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn empty_region_rejected() {
        assert!(mask_features(&GrayImage::constant(5, 5, 0.1), &BinaryMask::empty(5, 5)).is_err());
    }

    #[test]
    fn segmentation_counts_regions() {
        let one = GrayImage::from_fn(80, 80, |x, y| {
            if (x as f64 - 40.0).powi(2) + (y as f64 - 40.0).powi(2) < 400.0 {
                0.3
            } else {
                0.9
            }
        });
        let s = segment(&one);
        assert_eq!(s.labels.count(), 1);
        assert_eq!(s.main_region(), Some(1));
        let two = GrayImage::from_fn(100, 60, |x, y| {
            let a = (x as f64 - 25.0).powi(2) + (y as f64 - 30.0).powi(2) < 225.0;
            let b = (x as f64 - 75.0).powi(2) + (y as f64 - 30.0).powi(2) < 100.0;
            if a || b {
                0.2
            } else {
                0.95
            }
        });
        let s = segment(&two);
        assert_eq!(s.labels.count(), 2);
        assert_eq!(s.main_region(), Some(1));
        assert_eq!(segment(&GrayImage::constant(20, 20, 0.5)).labels.count(), 0);
    }

    #[test]
    fn border_regions_flagged() {
        let img = GrayImage::from_fn(50, 50, |x, y| {
            if x < 10 || (20..30).contains(&x) && (20..30).contains(&y) {
                0.1
            } else {
                0.9
            }
        });
        let s = segment(&img);
        assert_eq!(s.labels.count(), 2);
        assert_eq!(s.touches_border, vec![true, false]);
        assert_eq!(s.interior_regions(), vec![2]);
    }

    #[test]
    fn csv_header_and_rows() {
        let m = disk_mask(30, 15.0, 15.0, 8.0);
        let f = mask_features(&GrayImage::constant(30, 30, 0.5), &m).unwrap();
        let mut buf = Vec::new();
        write_features_csv(&mut buf, &[f, f]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("area,convex_area,eccentricity"));
        assert_eq!(lines[1].split(',').count(), NUM_FEATURES);
    }
}
