//! Synthetic TEM-like agglomerate images with exact ground truth.
//!
//! One image holds one agglomerate. Generation follows a fixed order:
//! random tangent sphere packing, area-preserving deformation of each
//! projected footprint, Beer–Lambert transmission rendering, then blur,
//! nonuniform illumination and Gaussian noise.

mod dataset;
mod deform;
mod geometry;
mod render;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distortion::{DistortionDistributions, IlluminationParams};
use crate::raster::{connected_components, Connectivity, GrayImage};
use crate::{seed, Error, Result};

pub use dataset::{
    parse_counts, parse_label_line, read_labels, synthesize_dataset, ClassCounts, DatasetSummary,
    SkippedImage, SynthConfig,
};
pub use deform::{deform_projection, Footprint, Shape, AREA_TOLERANCE, MAX_AMPLITUDE};
pub use geometry::{build_agglomerate, AgglomerateSpec, SphereSpec, CONTACT_EPS, MAX_REJECTIONS};
pub use render::{
    apply_distortions, render_agglomerate, transmission_ratio, Rendered, CANVAS_MARGIN,
    FOREGROUND_TRANSMITTANCE,
};

/// Number of agglomerate classes; class 6 collects everything above five
/// primaries.
pub const NUM_CLASSES: usize = 6;
/// Largest primary count that gets an area regressor.
pub const MAX_MEASURED_PRIMARIES: usize = 5;
/// Geometry attempts per image before it is recorded as skipped.
pub const MAX_ATTEMPTS: u64 = 10;

/// Canvas, material and distortion settings for synthesis.
///
/// In TOML form this is the `[render]` table; distortions live in their own
/// `[distortions]` table (see [`SynthConfig`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    pub background: f64,
    /// Primary particle projected area range, px².
    pub area_min: f64,
    pub area_max: f64,
    /// Transmission coefficient range, per pixel of path length.
    pub c_t_min: f64,
    pub c_t_max: f64,
    /// Primary count range for class 6.
    pub class6_min: usize,
    pub class6_max: usize,
    #[serde(skip)]
    pub distortions: DistortionDistributions,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            width: 256,
            height: 256,
            background: 1.0,
            area_min: 500.0,
            area_max: 6500.0,
            c_t_min: 0.02,
            c_t_max: 0.2,
            class6_min: 6,
            class6_max: 10,
            distortions: DistortionDistributions::default(),
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(m.to_string()));
        if self.width < 2 * CANVAS_MARGIN + 3 || self.height < 2 * CANVAS_MARGIN + 3 {
            return bad("canvas too small");
        }
        if self.width.saturating_mul(self.height) > crate::raster::io::MAX_PIXELS {
            return bad("canvas too large");
        }
        if !(self.background > 0.0 && self.background <= 1.0) {
            return bad("background intensity must lie in (0, 1]");
        }
        if !(self.area_min > 0.0 && self.area_min < self.area_max && self.area_max.is_finite()) {
            return bad("area range must satisfy 0 < area_min < area_max");
        }
        if !(self.c_t_min >= 0.0 && self.c_t_min <= self.c_t_max && self.c_t_max.is_finite()) {
            return bad("transmission coefficient range must satisfy 0 <= c_t_min <= c_t_max");
        }
        if !(self.class6_min > MAX_MEASURED_PRIMARIES
            && self.class6_min <= self.class6_max
            && self.class6_max <= 64)
        {
            return bad("class 6 primary range must satisfy 5 < class6_min <= class6_max <= 64");
        }
        self.distortions.validate()
    }

    pub fn uniform_areas(&self) -> AreaSampler {
        AreaSampler::Uniform {
            min: self.area_min,
            max: self.area_max,
        }
    }
}

/// How primary particle areas are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AreaSampler {
    /// Areas uniform on `[min, max]` px².
    Uniform { min: f64, max: f64 },
    /// Equivalent diameters log-normal with geometric mean `d_g` px and
    /// geometric standard deviation `sigma_g`, truncated to the area range.
    LogNormal {
        d_g: f64,
        sigma_g: f64,
        min: f64,
        max: f64,
    },
}

impl AreaSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            AreaSampler::Uniform { min, max } => rng.random_range(min..=max),
            AreaSampler::LogNormal {
                d_g,
                sigma_g,
                min,
                max,
            } => {
                use rand_distr::{Distribution, LogNormal};
                let dist =
                    LogNormal::new(d_g.ln(), sigma_g.ln().max(1e-12)).expect("valid log-normal");
                for _ in 0..1000 {
                    let d: f64 = dist.sample(rng);
                    let a = std::f64::consts::PI * d * d / 4.0;
                    if (min..=max).contains(&a) {
                        return a;
                    }
                }
                let a = std::f64::consts::PI * d_g * d_g / 4.0;
                a.clamp(min, max)
            }
        }
    }
}

/// Ground truth and render parameters of one synthetic image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthLabel {
    pub file: String,
    pub class: usize,
    /// Post-deformation projected area of every primary, px², in packing order.
    pub areas_px2: Vec<f64>,
    #[serde(rename = "c_T")]
    pub c_t: f64,
    pub deform: f64,
    pub blur_sigma: f64,
    pub noise_sigma: f64,
    pub illum: [f64; 3],
    pub seed: u64,
}

impl SynthLabel {
    pub fn num_primaries(&self) -> usize {
        self.areas_px2.len()
    }
}

#[derive(Clone, Debug)]
pub struct SynthSample {
    pub image: GrayImage,
    pub clean: Rendered,
    pub label: SynthLabel,
}

/// Class of an agglomerate with `n` primaries.
pub fn class_of(n: usize) -> usize {
    n.min(NUM_CLASSES)
}

/// Synthesize one image of `class` from `seed`.
///
/// Parameter draws (primary count, areas, `c_T`, deformation degree,
/// distortions) come from the image seed. Each geometry attempt uses its
/// own derived sub-seed; an attempt fails on packing or deformation
/// failure, canvas overflow, or a projection that splits into several
/// components.
pub fn synthesize_sample(
    cfg: &RenderConfig,
    class: usize,
    seed: u64,
    areas: &AreaSampler,
) -> Result<SynthSample> {
    if !(1..=NUM_CLASSES).contains(&class) {
        return Err(Error::invalid(format!(
            "class must lie in 1..={NUM_CLASSES}, got {class}"
        )));
    }
    let mut rng = seed::rng(seed);
    let n = if class < NUM_CLASSES {
        class
    } else {
        rng.random_range(cfg.class6_min..=cfg.class6_max)
    };
    let targets: Vec<f64> = (0..n).map(|_| areas.sample(&mut rng)).collect();
    let radii: Vec<f64> = targets
        .iter()
        .map(|a| (a / std::f64::consts::PI).sqrt())
        .collect();
    let c_t = if cfg.c_t_max > cfg.c_t_min {
        rng.random_range(cfg.c_t_min..=cfg.c_t_max)
    } else {
        cfg.c_t_min
    };
    let degree: f64 = rng.random_range(0.0..=1.0);
    let blur_sigma = cfg.distortions.sample_blur(&mut rng);
    let noise_sigma = cfg.distortions.sample_noise(&mut rng);
    let illum = cfg.distortions.sample_illum(&mut rng);

    let mut last_err = Error::invalid("no synthesis attempt made");
    for attempt in 0..MAX_ATTEMPTS {
        let mut geo = seed::rng(seed::derive(seed, attempt));
        match attempt_geometry(cfg, &radii, c_t, degree, &mut geo) {
            Ok(clean) => {
                let mut image =
                    apply_distortions(&clean.image, blur_sigma, illum, noise_sigma, &mut rng)?;
                image.quantize_8bit();
                let label = SynthLabel {
                    file: String::new(),
                    class,
                    areas_px2: clean.areas.clone(),
                    c_t,
                    deform: degree,
                    blur_sigma,
                    noise_sigma,
                    illum: illum.to_array(),
                    seed,
                };
                return Ok(SynthSample {
                    image,
                    clean,
                    label,
                });
            }
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

fn attempt_geometry<R: Rng + ?Sized>(
    cfg: &RenderConfig,
    radii: &[f64],
    c_t: f64,
    degree: f64,
    rng: &mut R,
) -> Result<Rendered> {
    let mut spec = build_agglomerate(radii, c_t, rng)?;
    spec.deformation_degree = degree;
    for sphere in &mut spec.spheres {
        let fp = Footprint::disk([sphere.center[0], sphere.center[1]], sphere.radius);
        sphere.shape = deform_projection(&fp, degree, rng)?.shape;
    }
    let rendered = render_agglomerate(&spec, cfg)?;
    if connected_components(&rendered.foreground, Connectivity::Eight).count() != 1 {
        return Err(Error::Validation(
            "projection is not a single connected component".into(),
        ));
    }
    Ok(rendered)
}

/// Render parameters shared by a fixed distortion setting, handy for tests
/// and fixtures.
pub fn fixed_distortions(
    blur_sigma: f64,
    noise_sigma: f64,
    illum: IlluminationParams,
) -> DistortionDistributions {
    DistortionDistributions::degenerate(blur_sigma, noise_sigma, illum)
}
