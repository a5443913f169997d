//! Measurands for the three characteristic image distortions (blur, noise,
//! nonuniform illumination) and their empirical distributions over a
//! corpus of real images.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::lstsq;
use crate::raster::{
    erode_n, gaussian_blur, sobel_gradients, BinaryMask, GrayImage, StructuringElement,
};
use crate::{Error, Result};

/// Illumination plane `p00 + p10 * x + p01 * y`, with `(x, y)` in pixels
/// from the top-left pixel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IlluminationParams {
    pub p00: f64,
    pub p10: f64,
    pub p01: f64,
}

impl IlluminationParams {
    pub const UNIFORM: IlluminationParams = IlluminationParams {
        p00: 1.0,
        p10: 0.0,
        p01: 0.0,
    };

    pub fn from_array([p00, p10, p01]: [f64; 3]) -> Self {
        IlluminationParams { p00, p10, p01 }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.p00, self.p10, self.p01]
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.p00 + self.p10 * x + self.p01 * y
    }
}

/// Tenenbaum gradient focus measure: mean of `gx^2 + gy^2` over all pixels.
pub fn tenenbaum_focus(img: &GrayImage) -> Result<f64> {
    let (gx, gy) = sobel_gradients(img)?;
    let sum: f64 = gx
        .as_slice()
        .iter()
        .zip(gy.as_slice())
        .map(|(a, b)| a * a + b * b)
        .sum();
    Ok(sum / img.len() as f64)
}

fn selected(img: &GrayImage, mask: &BinaryMask) -> Result<Vec<(f64, f64, f64)>> {
    if !img.same_shape(mask) {
        return Err(Error::invalid("mask and image dimensions differ"));
    }
    let w = img.width();
    Ok(img
        .as_slice()
        .iter()
        .zip(mask.as_slice())
        .enumerate()
        .filter(|(_, (_, &m))| m)
        .map(|(i, (&v, _))| ((i % w) as f64, (i / w) as f64, v))
        .collect())
}

fn fit_plane(points: &[(f64, f64, f64)]) -> Result<IlluminationParams> {
    let design: Vec<f64> = points.iter().flat_map(|&(x, y, _)| [1.0, x, y]).collect();
    let target: Vec<f64> = points.iter().map(|p| p.2).collect();
    let beta = lstsq(&design, 3, &target)?;
    Ok(IlluminationParams {
        p00: beta[0],
        p10: beta[1],
        p01: beta[2],
    })
}

/// Least-squares illumination plane over the selected (background) pixels.
pub fn illumination_fit(img: &GrayImage, background: &BinaryMask) -> Result<IlluminationParams> {
    let pts = selected(img, background)?;
    if pts.len() < 3 {
        return Err(Error::SingularFit(format!(
            "{} pixels selected, need 3 non-collinear",
            pts.len()
        )));
    }
    fit_plane(&pts)
}

/// Sample standard deviation of the selected pixels after removing the
/// fitted illumination plane. When the selection cannot support a plane
/// (fewer than three non-collinear pixels) only the mean is removed.
pub fn noise_std(img: &GrayImage, background: &BinaryMask) -> Result<f64> {
    let pts = selected(img, background)?;
    if pts.len() < 2 {
        return Err(Error::invalid(format!(
            "noise estimate needs >= 2 pixels, got {}",
            pts.len()
        )));
    }
    let residuals: Vec<f64> = match fit_plane(&pts) {
        Ok(plane) => pts.iter().map(|&(x, y, v)| v - plane.eval(x, y)).collect(),
        Err(Error::SingularFit(_)) => {
            let mean = pts.iter().map(|p| p.2).sum::<f64>() / pts.len() as f64;
            pts.iter().map(|p| p.2 - mean).collect()
        }
        Err(e) => return Err(e),
    };
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let ss: f64 = residuals.iter().map(|r| (r - mean) * (r - mean)).sum();
    Ok((ss / (n - 1.0)).sqrt())
}

/// Pixels usable for noise and illumination: the complement of the
/// segmentation mask, eroded by two pixels to drop particle halos.
pub fn background_mask(segmentation: &BinaryMask) -> BinaryMask {
    erode_n(&segmentation.complement(), StructuringElement::Square, 2)
}

/// Monotone map from Tenenbaum focus to Gaussian blur sigma, measured on a
/// sharp reference image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlurCalibration {
    sigmas: Vec<f64>,
    focus: Vec<f64>,
}

impl BlurCalibration {
    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn focus(&self) -> &[f64] {
        &self.focus
    }

    /// Invert by linear interpolation; clamps at the grid ends.
    pub fn sigma_for_focus(&self, f: f64) -> f64 {
        let n = self.focus.len();
        if f >= self.focus[0] {
            return self.sigmas[0];
        }
        if f <= self.focus[n - 1] {
            return self.sigmas[n - 1];
        }
        if let Some(i) = self.focus.iter().position(|&k| k == f) {
            return self.sigmas[i];
        }
        // focus is strictly decreasing
        let i = self.focus.iter().position(|&k| k < f).expect("bracketed") - 1;
        let t = (self.focus[i] - f) / (self.focus[i] - self.focus[i + 1]);
        self.sigmas[i] + t * (self.sigmas[i + 1] - self.sigmas[i])
    }
}

pub fn build_blur_calibration(reference: &GrayImage, sigmas: &[f64]) -> Result<BlurCalibration> {
    if sigmas.len() < 2 {
        return Err(Error::invalid(
            "blur calibration needs at least two sigma grid points",
        ));
    }
    if sigmas.windows(2).any(|w| !(w[1] > w[0])) || sigmas[0] < 0.0 {
        return Err(Error::invalid(
            "blur sigma grid must be non-negative and strictly increasing",
        ));
    }
    let focus = sigmas
        .iter()
        .map(|&s| tenenbaum_focus(&gaussian_blur(reference, s)?))
        .collect::<Result<Vec<_>>>()?;
    if focus.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::CalibrationFailed(format!(
            "focus measure not strictly decreasing over the sigma grid: {focus:?}"
        )));
    }
    Ok(BlurCalibration {
        sigmas: sigmas.to_vec(),
        focus,
    })
}

/// Per-image distortion measurands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageDistortion {
    pub focus: f64,
    pub blur_sigma: f64,
    pub noise_sigma: f64,
    pub illum: IlluminationParams,
}

/// Measure one image; `segmentation` marks particle matter.
pub fn measure_image(
    img: &GrayImage,
    segmentation: &BinaryMask,
    calibration: &BlurCalibration,
) -> Result<ImageDistortion> {
    let focus = tenenbaum_focus(img)?;
    let bg = background_mask(segmentation);
    let illum = illumination_fit(img, &bg)?;
    let noise_sigma = noise_std(img, &bg)?;
    Ok(ImageDistortion {
        focus,
        blur_sigma: calibration.sigma_for_focus(focus),
        noise_sigma,
        illum,
    })
}

/// Empirical distortion distributions; sampling draws uniformly from the
/// stored samples. JSON form:
/// `{"blur_sigma":[...],"noise_sigma":[...],"illum":[[p00,p10,p01],...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionDistributions {
    pub blur_sigma: Vec<f64>,
    pub noise_sigma: Vec<f64>,
    pub illum: Vec<[f64; 3]>,
}

impl Default for DistortionDistributions {
    /// Moderate distortions for synthesis when no real corpus has been
    /// analyzed.
    fn default() -> Self {
        let blur_sigma = (0..7).map(|i| 0.5 + 0.25 * i as f64).collect();
        let noise_sigma = (1..=6).map(|i| 0.005 * i as f64).collect();
        let mut illum = Vec::new();
        for p00 in [0.9, 0.95, 1.0] {
            for p10 in [-2e-4, 0.0, 2e-4] {
                for p01 in [-2e-4, 0.0, 2e-4] {
                    illum.push([p00, p10, p01]);
                }
            }
        }
        DistortionDistributions {
            blur_sigma,
            noise_sigma,
            illum,
        }
    }
}

impl DistortionDistributions {
    /// Point distributions at a fixed set of parameters.
    pub fn degenerate(blur_sigma: f64, noise_sigma: f64, illum: IlluminationParams) -> Self {
        DistortionDistributions {
            blur_sigma: vec![blur_sigma],
            noise_sigma: vec![noise_sigma],
            illum: vec![illum.to_array()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blur_sigma.is_empty() || self.noise_sigma.is_empty() || self.illum.is_empty() {
            return Err(Error::Validation(
                "distortion distributions need at least one sample each".into(),
            ));
        }
        if self
            .blur_sigma
            .iter()
            .any(|s| !(*s >= 0.0) || !s.is_finite())
        {
            return Err(Error::Validation(
                "blur_sigma samples must be finite and >= 0".into(),
            ));
        }
        if self
            .noise_sigma
            .iter()
            .any(|s| !(*s >= 0.0) || !s.is_finite())
        {
            return Err(Error::Validation(
                "noise_sigma samples must be finite and >= 0".into(),
            ));
        }
        if self.illum.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation("illum samples must be finite".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: DistortionDistributions =
            serde_json::from_str(text).map_err(|e| Error::parse("distortions", e))?;
        d.validate()?;
        Ok(d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn sample_blur<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.blur_sigma[rng.random_range(0..self.blur_sigma.len())]
    }

    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.noise_sigma[rng.random_range(0..self.noise_sigma.len())]
    }

    pub fn sample_illum<R: Rng + ?Sized>(&self, rng: &mut R) -> IlluminationParams {
        IlluminationParams::from_array(self.illum[rng.random_range(0..self.illum.len())])
    }
}

/// Measure every image of a corpus and collect the empirical
/// distributions. Results are merged in input order.
pub fn estimate_distortion_distributions(
    corpus: &[GrayImage],
    masks: &[BinaryMask],
    calibration: &BlurCalibration,
) -> Result<DistortionDistributions> {
    if corpus.is_empty() {
        return Err(Error::invalid("empty corpus"));
    }
    if corpus.len() != masks.len() {
        return Err(Error::invalid(format!(
            "{} images but {} masks",
            corpus.len(),
            masks.len()
        )));
    }
    let measured: Vec<ImageDistortion> = corpus
        .par_iter()
        .zip(masks.par_iter())
        .map(|(img, mask)| measure_image(img, mask, calibration))
        .collect::<Result<_>>()?;
    Ok(DistortionDistributions {
        blur_sigma: measured.iter().map(|m| m.blur_sigma).collect(),
        noise_sigma: measured.iter().map(|m| m.noise_sigma).collect(),
        illum: measured.iter().map(|m| m.illum.to_array()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand_distr::{Distribution, Normal};

    fn disk(w: usize, r: f64) -> GrayImage {
        let c = w as f64 / 2.0;
        GrayImage::from_fn(w, w, |x, y| {
            if (x as f64 - c).powi(2) + (y as f64 - c).powi(2) <= r * r {
                0.2
            } else {
                1.0
            }
        })
    }

    #[test]
    fn focus_zero_on_constant_and_positive_on_checkerboard() {
        assert_eq!(
            tenenbaum_focus(&GrayImage::constant(8, 8, 0.4)).unwrap(),
            0.0
        );
        let checker = GrayImage::from_fn(8, 8, |x, y| ((x + y) % 2) as f64);
        assert!(tenenbaum_focus(&checker).unwrap() > 0.0);
        assert!(tenenbaum_focus(&GrayImage::constant(2, 8, 0.4)).is_err());
    }

    #[test]
    fn blur_lowers_focus() {
        let edge = GrayImage::from_fn(32, 32, |x, _| if x < 16 { 0.1 } else { 0.9 });
        let sharp = tenenbaum_focus(&edge).unwrap();
        let blurred = tenenbaum_focus(&gaussian_blur(&edge, 2.0).unwrap()).unwrap();
        assert!(sharp > blurred);
    }

    #[test]
    fn plane_recovered_exactly() {
        let img = GrayImage::from_fn(40, 30, |x, _| 0.5 + 0.001 * x as f64);
        let all = BinaryMask::filled(40, 30, true);
        let p = illumination_fit(&img, &all).unwrap();
        assert!(
            (p.p00 - 0.5).abs() < 1e-12 && (p.p10 - 0.001).abs() < 1e-12 && p.p01.abs() < 1e-12
        );

        let flat = GrayImage::constant(10, 10, 0.7);
        let p = illumination_fit(&flat, &BinaryMask::filled(10, 10, true)).unwrap();
        assert!((p.p00 - 0.7).abs() < 1e-12 && p.p10.abs() < 1e-12 && p.p01.abs() < 1e-12);
    }

    #[test]
    fn plane_residual_is_tiny() {
        let truth = IlluminationParams {
            p00: 0.83,
            p10: -3e-4,
            p01: 7e-4,
        };
        let img = GrayImage::from_fn(50, 40, |x, y| truth.eval(x as f64, y as f64));
        let p = illumination_fit(&img, &BinaryMask::filled(50, 40, true)).unwrap();
        for y in 0..40 {
            for x in 0..50 {
                assert!((p.eval(x as f64, y as f64) - img[(x, y)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn collinear_selection_is_singular() {
        let img = GrayImage::constant(10, 10, 0.5);
        let mut m = BinaryMask::empty(10, 10);
        for x in 0..10 {
            m[(x, 3)] = true;
        }
        assert!(matches!(
            illumination_fit(&img, &m),
            Err(Error::SingularFit(_))
        ));
    }

    #[test]
    fn noisy_plane_coefficients_within_five_percent() {
        let truth = IlluminationParams {
            p00: 0.9,
            p10: 4e-4,
            p01: -3e-4,
        };
        let mut rng = seed::rng(11);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let img = GrayImage::from_fn(256, 256, |x, y| {
            truth.eval(x as f64, y as f64) + noise.sample(&mut rng)
        });
        let p = illumination_fit(&img, &BinaryMask::filled(256, 256, true)).unwrap();
        assert!((p.p00 - truth.p00).abs() / truth.p00 < 0.05);
        assert!((p.p10 - truth.p10).abs() / truth.p10.abs() < 0.05);
        assert!((p.p01 - truth.p01).abs() / truth.p01.abs() < 0.05);
    }

    #[test]
    fn noise_std_cases() {
        assert!(
            noise_std(
                &GrayImage::constant(6, 6, 0.5),
                &BinaryMask::filled(6, 6, true)
            )
            .unwrap()
                < 1e-14
        );

        let mut img = GrayImage::constant(4, 1, 0.0);
        img[(0, 0)] = 0.4;
        img[(1, 0)] = 0.6;
        let mut m = BinaryMask::empty(4, 1);
        m[(0, 0)] = true;
        m[(1, 0)] = true;
        let s = noise_std(&img, &m).unwrap();
        assert!((s - 0.1 * 2f64.sqrt()).abs() < 1e-12, "{s}");

        m[(1, 0)] = false;
        assert!(noise_std(&img, &m).is_err());
    }

    #[test]
    fn noise_std_recovers_sigma_and_ignores_plane() {
        let mut rng = seed::rng(5);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let samples: Vec<f64> = (0..128 * 128).map(|_| noise.sample(&mut rng)).collect();
        let plane = IlluminationParams {
            p00: 0.6,
            p10: 1e-3,
            p01: -2e-3,
        };
        let a = GrayImage::from_fn(128, 128, |x, y| 0.5 + samples[y * 128 + x]);
        let b = GrayImage::from_fn(128, 128, |x, y| a[(x, y)] + plane.eval(x as f64, y as f64));
        let all = BinaryMask::filled(128, 128, true);
        let sa = noise_std(&a, &all).unwrap();
        let sb = noise_std(&b, &all).unwrap();
        assert!((sa - 0.02).abs() / 0.02 < 0.1, "{sa}");
        assert!((sa - sb).abs() < 1e-12);
    }

    #[test]
    fn calibration_contract() {
        let reference = disk(64, 16.0);
        assert!(build_blur_calibration(&reference, &[0.0]).is_err());
        assert!(build_blur_calibration(&reference, &[1.0, 0.5]).is_err());
        let cal = build_blur_calibration(&reference, &[0.0, 1.0, 2.0, 4.0]).unwrap();
        assert!(cal.focus().windows(2).all(|w| w[1] < w[0]));
        assert_eq!(cal.sigma_for_focus(cal.focus()[2]), 2.0);
        assert_eq!(cal.sigma_for_focus(f64::INFINITY), 0.0);
        assert_eq!(cal.sigma_for_focus(0.0), 4.0);
        let mid = 0.5 * (cal.focus()[1] + cal.focus()[2]);
        let s = cal.sigma_for_focus(mid);
        assert!(s > 1.0 && s < 2.0);
    }

    #[test]
    fn flat_reference_fails_calibration() {
        let flat = GrayImage::constant(16, 16, 0.5);
        assert!(matches!(
            build_blur_calibration(&flat, &[0.0, 1.0]),
            Err(Error::CalibrationFailed(_))
        ));
    }

    #[test]
    fn identical_corpus_gives_point_distributions() {
        let img = disk(48, 10.0);
        let mask = img.map(|&v| v < 0.5);
        let cal = build_blur_calibration(&img, &[0.0, 1.0, 2.0]).unwrap();
        let d = estimate_distortion_distributions(
            &[img.clone(), img.clone(), img],
            &[mask.clone(), mask.clone(), mask],
            &cal,
        )
        .unwrap();
        assert!(d.blur_sigma.windows(2).all(|w| w[0] == w[1]));
        assert!(d.noise_sigma.windows(2).all(|w| w[0] == w[1]));
        assert!(d.illum.windows(2).all(|w| w[0] == w[1]));
        assert!(estimate_distortion_distributions(&[], &[], &cal).is_err());
    }

    #[test]
    fn json_round_trip_and_schema() {
        let d = DistortionDistributions::default();
        let back = DistortionDistributions::from_json(&d.to_json()).unwrap();
        assert_eq!(d, back);
        let raw = r#"{"blur_sigma":[1.0],"noise_sigma":[0.01],"illum":[[1.0,0.0,0.0]]}"#;
        assert!(DistortionDistributions::from_json(raw).is_ok());
        assert!(DistortionDistributions::from_json(
            r#"{"blur_sigma":[-1.0],"noise_sigma":[0.01],"illum":[[1,0,0]]}"#
        )
        .is_err());
        assert!(DistortionDistributions::from_json(r#"{"blur_sigma":[1.0]}"#).is_err());
    }
}
