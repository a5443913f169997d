//! Classical primary-particle detectors used for comparison: watershed
//! transformation, ultimate erosion and the circular Hough transform.
//!
//! All three are deterministic and return a primary count with per-primary
//! areas in px².

mod hough;
mod markers;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::segment;
use crate::raster::{
    connected_components, distance_transform, fill_holes, BinaryMask, Connectivity, GrayImage,
};
use crate::synth::NUM_CLASSES;
use crate::{Error, Result};

pub use hough::{hough_circle_primaries, hough_circles, Circle};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WstParams {
    /// Depth below which distance-map maxima are merged, px.
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UeParams {
    /// Markers with fewer pixels are dropped.
    pub min_marker_area: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HtParams {
    pub r_min: f64,
    pub r_max: f64,
    /// Minimum pooled votes per unit circumference.
    pub sensitivity: f64,
    /// Minimum Sobel gradient magnitude of a voting pixel.
    pub edge_threshold: f64,
}

impl Default for WstParams {
    fn default() -> Self {
        WstParams { h: 2.0 }
    }
}

impl Default for UeParams {
    fn default() -> Self {
        UeParams { min_marker_area: 1 }
    }
}

impl Default for HtParams {
    fn default() -> Self {
        HtParams {
            r_min: 12.0,
            r_max: 46.0,
            sensitivity: 1.0,
            edge_threshold: 0.3,
        }
    }
}

impl HtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_min >= 3.0 && self.r_min < self.r_max && self.r_max.is_finite()) {
            return Err(Error::Validation(
                "hough radii must satisfy 3 <= r_min < r_max".into(),
            ));
        }
        if self.r_max - self.r_min > 512.0 {
            return Err(Error::Validation("hough radius range too wide".into()));
        }
        if !(self.sensitivity > 0.0 && self.edge_threshold > 0.0) {
            return Err(Error::Validation(
                "hough thresholds must be positive".into(),
            ));
        }
        if self.r_min.ceil() > self.r_max.floor() {
            return Err(Error::Validation(
                "hough radius range holds no integer radius".into(),
            ));
        }
        Ok(())
    }
}

/// Candidate values for [`tune`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningGrid {
    pub wst_h: Vec<f64>,
    pub ue_min_marker_area: Vec<usize>,
    pub ht_sensitivity: Vec<f64>,
    pub ht_edge_threshold: Vec<f64>,
}

impl Default for TuningGrid {
    fn default() -> Self {
        TuningGrid {
            wst_h: vec![0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0],
            ue_min_marker_area: vec![1, 2, 4, 8, 16],
            ht_sensitivity: vec![0.6, 0.8, 1.0, 1.2, 1.5, 2.0],
            ht_edge_threshold: vec![0.1, 0.2, 0.3, 0.5],
        }
    }
}

/// Parameters of all three baselines, read from a TOML file with `[wst]`,
/// `[ue]`, `[ht]` and optionally `[grid]` tables.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    pub wst: WstParams,
    pub ue: UeParams,
    pub ht: HtParams,
    pub grid: TuningGrid,
}

impl BaselineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.wst.h >= 0.0 && self.wst.h.is_finite()) {
            return Err(Error::Validation("wst.h must be finite and >= 0".into()));
        }
        if self.ue.min_marker_area == 0 {
            return Err(Error::Validation("ue.min_marker_area must be >= 1".into()));
        }
        self.ht.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let p: BaselineParams =
            toml::from_str(text).map_err(|e| Error::parse("baseline params", e))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain data serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectedPrimaries {
    pub count: usize,
    pub areas: Vec<f64>,
}

impl DetectedPrimaries {
    pub fn new(areas: Vec<f64>) -> Self {
        DetectedPrimaries {
            count: areas.len(),
            areas,
        }
    }

    /// Class for this count; no detection maps to 0, which matches no class.
    pub fn class(&self) -> usize {
        self.count.min(NUM_CLASSES)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Wst,
    Ue,
    Ht,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Wst, Method::Ue, Method::Ht];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Wst => "wst",
            Method::Ue => "ue",
            Method::Ht => "ht",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wst" => Ok(Method::Wst),
            "ue" => Ok(Method::Ue),
            "ht" => Ok(Method::Ht),
            other => Err(Error::parse(
                "method",
                format!("expected wst, ue or ht, got {other:?}"),
            )),
        }
    }
}

/// Watershed of the negated distance map from h-maxima markers. Regions
/// partition the mask exactly.
pub fn watershed_primaries(mask: &BinaryMask, p: &WstParams) -> DetectedPrimaries {
    if mask.count() == 0 {
        return DetectedPrimaries::new(Vec::new());
    }
    let d = distance_transform(mask);
    let hmax = markers::h_maxima_transform(&d, p.h);
    let (seeds, count) = markers::regional_maxima(&hmax, mask);
    let labels = markers::flood(&d, mask, &seeds);
    DetectedPrimaries::new(markers::label_areas(&labels, count))
}

/// Ultimate erosion: regional maxima of the distance map as markers, small
/// ones dropped (each connected particle keeps its largest), areas by
/// geodesic nearest-marker growth.
pub fn ultimate_erosion_primaries(mask: &BinaryMask, p: &UeParams) -> DetectedPrimaries {
    if mask.count() == 0 {
        return DetectedPrimaries::new(Vec::new());
    }
    let d = distance_transform(mask);
    let (seeds, count) = markers::regional_maxima(&d, mask);
    let sizes = markers::label_areas(&seeds, count);
    let components = connected_components(mask, Connectivity::Eight);
    let comp = components.labels().as_slice();
    // largest marker per component survives regardless of size
    let mut largest = vec![0u32; components.count() as usize + 1];
    for (p, &l) in seeds.as_slice().iter().enumerate() {
        if l > 0 {
            let c = comp[p] as usize;
            let cur = largest[c];
            if cur == 0 || sizes[l as usize - 1] > sizes[cur as usize - 1] {
                largest[c] = l;
            }
        }
    }
    let mut keep = vec![false; count as usize + 1];
    for (l, s) in sizes.iter().enumerate() {
        keep[l + 1] = *s as usize >= p.min_marker_area;
    }
    for &l in &largest {
        keep[l as usize] = true;
    }
    let mut remap = vec![0u32; count as usize + 1];
    let mut kept = 0;
    for l in 1..=count as usize {
        if keep[l] {
            kept += 1;
            remap[l] = kept;
        }
    }
    let kept_seeds = seeds.map(|&l| remap[l as usize]);
    let labels = markers::grow(mask, &kept_seeds);
    DetectedPrimaries::new(markers::label_areas(&labels, kept))
}

/// Run `method` on one image. The mask methods work on the hole-filled
/// main region of [`segment`]; Hough works on the image itself.
pub fn run_baseline(
    method: Method,
    img: &GrayImage,
    params: &BaselineParams,
) -> Result<DetectedPrimaries> {
    match method {
        Method::Ht => hough_circle_primaries(img, &params.ht),
        Method::Wst | Method::Ue => {
            let seg = segment(img);
            let mask = match seg.main_region() {
                Some(l) => fill_holes(&seg.labels.mask_of(l)),
                None => return Ok(DetectedPrimaries::new(Vec::new())),
            };
            Ok(if method == Method::Wst {
                watershed_primaries(&mask, &params.wst)
            } else {
                ultimate_erosion_primaries(&mask, &params.ue)
            })
        }
    }
}

/// Mean over present classes of per-class accuracy of the count-derived
/// class.
fn macro_accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let mut correct = [0usize; NUM_CLASSES + 1];
    let mut total = [0usize; NUM_CLASSES + 1];
    for (&p, &t) in pred.iter().zip(truth) {
        total[t] += 1;
        correct[t] += (p == t) as usize;
    }
    let present: Vec<f64> = (0..=NUM_CLASSES)
        .filter(|&c| total[c] > 0)
        .map(|c| correct[c] as f64 / total[c] as f64)
        .collect();
    present.iter().sum::<f64>() / present.len().max(1) as f64
}

/// Result of a grid search for one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub method: Method,
    pub params: BaselineParams,
    pub accuracy: f64,
}

/// Grid search over `params.grid` for `method`, maximizing mean
/// classification accuracy on the tuning images. Ties keep the earlier grid
/// point. Other methods' parameters are left untouched.
pub fn tune(
    method: Method,
    images: &[GrayImage],
    classes: &[usize],
    params: &BaselineParams,
) -> Result<TuningResult> {
    if images.is_empty() || images.len() != classes.len() {
        return Err(Error::invalid(
            "tuning needs matching non-empty images and classes",
        ));
    }
    let mut candidates = Vec::new();
    match method {
        Method::Wst => {
            for &h in &params.grid.wst_h {
                let mut p = params.clone();
                p.wst.h = h;
                candidates.push(p);
            }
        }
        Method::Ue => {
            for &a in &params.grid.ue_min_marker_area {
                let mut p = params.clone();
                p.ue.min_marker_area = a;
                candidates.push(p);
            }
        }
        Method::Ht => {
            for &s in &params.grid.ht_sensitivity {
                for &e in &params.grid.ht_edge_threshold {
                    let mut p = params.clone();
                    p.ht.sensitivity = s;
                    p.ht.edge_threshold = e;
                    candidates.push(p);
                }
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::invalid(format!("empty tuning grid for {method}")));
    }
    let mut best: Option<TuningResult> = None;
    for p in candidates {
        p.validate()?;
        let pred: Vec<usize> = images
            .par_iter()
            .map(|img| run_baseline(method, img, &p).map(|d| d.class()))
            .collect::<Result<_>>()?;
        let accuracy = macro_accuracy(&pred, classes);
        log::debug!("tune {method}: {accuracy:.4}");
        if best.as_ref().is_none_or(|b| accuracy > b.accuracy) {
            best = Some(TuningResult {
                method,
                params: p,
                accuracy,
            });
        }
    }
    Ok(best.expect("non-empty grid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn disks(w: usize, h: usize, ds: &[(f64, f64, f64)]) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| {
            ds.iter()
                .any(|&(cx, cy, r)| (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r)
        })
    }

    #[test]
    fn single_disk_is_one_particle() {
        let m = disks(100, 100, &[(50.0, 50.0, 30.0)]);
        let w = watershed_primaries(&m, &WstParams::default());
        assert_eq!(w.count, 1);
        assert_eq!(w.areas[0], m.count() as f64);
        assert_eq!(
            ultimate_erosion_primaries(&m, &UeParams::default()).count,
            1
        );
    }

    #[test]
    fn tangent_disks_split_in_two() {
        let m = disks(160, 100, &[(50.0, 50.0, 30.0), (110.0, 50.0, 30.0)]);
        let w = watershed_primaries(&m, &WstParams::default());
        assert_eq!(w.count, 2);
        assert_eq!(w.areas.iter().sum::<f64>(), m.count() as f64);
        for a in &w.areas {
            assert!((a - PI * 900.0).abs() / (PI * 900.0) < 0.1);
        }
        assert_eq!(
            ultimate_erosion_primaries(&m, &UeParams::default()).count,
            2
        );
    }

    #[test]
    fn empty_mask_gives_nothing() {
        let m = BinaryMask::empty(10, 10);
        assert_eq!(watershed_primaries(&m, &WstParams::default()).count, 0);
        assert_eq!(
            ultimate_erosion_primaries(&m, &UeParams::default()).count,
            0
        );
    }

    #[test]
    fn params_toml() {
        let p =
            BaselineParams::from_toml("[wst]\nh = 1.5\n[ht]\nr_min = 5.0\nr_max = 20.0\n").unwrap();
        assert_eq!(p.wst.h, 1.5);
        assert_eq!(p.ht.sensitivity, HtParams::default().sensitivity);
        assert_eq!(BaselineParams::from_toml(&p.to_toml()).unwrap(), p);
        assert!(BaselineParams::from_toml("[ht]\nr_min = 30.0\nr_max = 20.0\n").is_err());
        assert!(BaselineParams::from_toml("[ht]\nr_min = 2.0\n").is_err());
        assert!(BaselineParams::from_toml("[wst]\nhh = 1.0\n").is_err());
        assert_eq!("ue".parse::<Method>().unwrap(), Method::Ue);
        assert!("xx".parse::<Method>().is_err());
    }

    #[test]
    fn count_to_class() {
        assert_eq!(DetectedPrimaries::new(vec![]).class(), 0);
        assert_eq!(DetectedPrimaries::new(vec![1.0; 9]).class(), 6);
        assert_eq!(macro_accuracy(&[1, 0, 2, 2], &[1, 1, 2, 2]), 0.75);
    }
}
