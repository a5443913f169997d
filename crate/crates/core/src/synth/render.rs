use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::deform::Footprint;
use super::geometry::AgglomerateSpec;
use super::RenderConfig;
use crate::distortion::IlluminationParams;
use crate::raster::{gaussian_blur, BinaryMask, GrayImage};
use crate::{Error, Result};

/// A pixel belongs to a primary's ground-truth footprint when that
/// primary alone transmits less than this fraction.
pub const FOREGROUND_TRANSMITTANCE: f64 = 0.995;

/// Minimum distance in pixels between the agglomerate and the canvas edge.
pub const CANVAS_MARGIN: usize = 5;

/// Electron transmission through a homogeneous sphere of radius `big_r` at
/// projected distance `r` from its centre: `exp(-2 c_t sqrt(R^2 - r^2))`.
pub fn transmission_ratio(big_r: f64, r: f64, c_t: f64) -> Result<f64> {
    if !(big_r >= 0.0) || !(r >= 0.0) || !(c_t >= 0.0) {
        return Err(Error::invalid("transmission inputs must be non-negative"));
    }
    if r > big_r {
        return Err(Error::invalid(format!(
            "radius {r} outside sphere of radius {big_r}"
        )));
    }
    Ok((-2.0 * c_t * (big_r * big_r - r * r).sqrt()).exp())
}

/// Clean render of one agglomerate with its ground truth.
#[derive(Clone, Debug)]
pub struct Rendered {
    pub image: GrayImage,
    /// Foreground pixel count of each primary's own projection, in sphere
    /// order.
    pub areas: Vec<f64>,
    /// Union of all primary footprints.
    pub foreground: BinaryMask,
    /// Footprints after centring on the canvas.
    pub footprints: Vec<Footprint>,
}

/// Project the agglomerate along `z`, centre it on the canvas, and compose
/// transmittances multiplicatively (path lengths add).
pub fn render_agglomerate(spec: &AgglomerateSpec, cfg: &RenderConfig) -> Result<Rendered> {
    let (w, h) = (cfg.width, cfg.height);
    let mut footprints: Vec<Footprint> = spec
        .spheres
        .iter()
        .map(|s| Footprint {
            center: [s.center[0], s.center[1]],
            radius: s.radius,
            shape: s.shape,
        })
        .collect();

    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for fp in &footprints {
        let ext = fp.radius * fp.shape.max_factor();
        for a in 0..2 {
            lo[a] = lo[a].min(fp.center[a] - ext);
            hi[a] = hi[a].max(fp.center[a] + ext);
        }
    }
    // integer shift keeps each footprint's sub-pixel phase, hence its pixel area
    let shift = [
        ((w as f64 - 1.0) / 2.0 - (lo[0] + hi[0]) / 2.0).round(),
        ((h as f64 - 1.0) / 2.0 - (lo[1] + hi[1]) / 2.0).round(),
    ];
    let m = CANVAS_MARGIN as f64;
    if lo[0] + shift[0] < m
        || lo[1] + shift[1] < m
        || hi[0] + shift[0] > (w - 1) as f64 - m
        || hi[1] + shift[1] > (h - 1) as f64 - m
    {
        return Err(Error::RenderOverflow {
            width: w,
            height: h,
            margin: CANVAS_MARGIN,
        });
    }
    for fp in &mut footprints {
        fp.center[0] += shift[0];
        fp.center[1] += shift[1];
    }

    let mut transmittance = vec![1.0; w * h];
    let mut foreground = vec![false; w * h];
    let mut areas = Vec::with_capacity(footprints.len());
    let c_t = spec.c_t;
    for fp in &footprints {
        let r2 = fp.radius * fp.radius;
        let mut count = 0usize;
        fp.for_each_inside(|x, y, rn| {
            // bounds were checked against the canvas above
            let i = y as usize * w + x as usize;
            let t = (-2.0 * c_t * (r2 - rn * rn).sqrt()).exp();
            transmittance[i] *= t;
            if t < FOREGROUND_TRANSMITTANCE {
                count += 1;
                foreground[i] = true;
            }
        });
        areas.push(count as f64);
    }
    let image = GrayImage::from_vec(
        w,
        h,
        transmittance
            .into_iter()
            .map(|t| cfg.background * t)
            .collect(),
    )?;
    Ok(Rendered {
        image,
        areas,
        foreground: BinaryMask::from_vec(w, h, foreground)?,
        footprints,
    })
}

/// Blur, then multiply by the illumination plane (clamped to `[0, 1]`), then
/// add i.i.d. Gaussian noise and clamp.
pub fn apply_distortions<R: Rng + ?Sized>(
    img: &GrayImage,
    blur_sigma: f64,
    illum: IlluminationParams,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<GrayImage> {
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::invalid(format!(
            "noise sigma must be finite and >= 0, got {noise_sigma}"
        )));
    }
    let mut out = gaussian_blur(img, blur_sigma)?;
    let w = out.width();
    for (i, v) in out.as_mut_slice().iter_mut().enumerate() {
        let plane = illum.eval((i % w) as f64, (i / w) as f64);
        *v = (*v * plane).clamp(0.0, 1.0);
    }
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("finite sigma");
        for v in out.as_mut_slice() {
            *v = (*v + normal.sample(rng)).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::raster::{connected_components, Connectivity};
    use crate::seed;
    use crate::synth::deform::Shape;
    use crate::synth::geometry::SphereSpec;

    fn single(r: f64, c_t: f64, offset: [f64; 3]) -> AgglomerateSpec {
        AgglomerateSpec {
            spheres: vec![SphereSpec {
                center: offset,
                radius: r,
                shape: Shape::CIRCLE,
            }],
            c_t,
            deformation_degree: 0.0,
        }
    }

    #[test]
    fn transmission_values() {
        assert_eq!(transmission_ratio(10.0, 10.0, 0.05).unwrap(), 1.0);
        assert!((transmission_ratio(10.0, 0.0, 0.05).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!((transmission_ratio(10.0, 0.0, 0.05).unwrap() - 0.367879).abs() < 1e-6);
        assert_eq!(transmission_ratio(7.0, 3.0, 0.0).unwrap(), 1.0);
        assert!(transmission_ratio(5.0, 6.0, 0.1).is_err());
        assert!(transmission_ratio(5.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn single_sphere_area_close_to_disk() {
        let cfg = RenderConfig::default();
        for r in [12.6, 25.0, 45.0] {
            let out = render_agglomerate(&single(r, 0.1, [0.3, 0.7, 0.0]), &cfg).unwrap();
            let exact = PI * r * r;
            assert!((out.areas[0] - exact).abs() / exact < 0.02);
            assert_eq!(out.foreground.count() as f64, out.areas[0]);
        }
    }

    #[test]
    fn overflow_detected() {
        let cfg = RenderConfig {
            width: 64,
            height: 64,
            ..RenderConfig::default()
        };
        assert!(matches!(
            render_agglomerate(&single(28.0, 0.1, [0.0; 3]), &cfg),
            Err(Error::RenderOverflow { .. })
        ));
    }

    #[test]
    fn far_apart_spheres_superpose() {
        let cfg = RenderConfig::default();
        let spheres = vec![
            SphereSpec {
                center: [0.0, 0.0, 0.0],
                radius: 15.0,
                shape: Shape::CIRCLE,
            },
            SphereSpec {
                center: [60.0, 0.0, 0.0],
                radius: 20.0,
                shape: Shape::CIRCLE,
            },
        ];
        let both = render_agglomerate(
            &AgglomerateSpec {
                spheres,
                c_t: 0.08,
                deformation_degree: 0.0,
            },
            &cfg,
        )
        .unwrap();
        let mut product = GrayImage::constant(cfg.width, cfg.height, cfg.background);
        for fp in &both.footprints {
            let r2 = fp.radius * fp.radius;
            fp.for_each_inside(|x, y, rn| {
                product[(x as usize, y as usize)] *= (-2.0 * 0.08 * (r2 - rn * rn).sqrt()).exp();
            });
        }
        assert_eq!(both.image, product);
        assert_eq!(
            connected_components(&both.foreground, Connectivity::Eight).count(),
            2
        );
    }

    #[test]
    fn overlapping_projections_multiply() {
        let cfg = RenderConfig::default();
        let spheres = vec![
            SphereSpec {
                center: [0.0, 0.0, 0.0],
                radius: 20.0,
                shape: Shape::CIRCLE,
            },
            SphereSpec {
                center: [0.0, 0.0, 40.0],
                radius: 20.0,
                shape: Shape::CIRCLE,
            },
        ];
        let out = render_agglomerate(
            &AgglomerateSpec {
                spheres,
                c_t: 0.02,
                deformation_degree: 0.0,
            },
            &cfg,
        )
        .unwrap();
        let c = out.footprints[0].center;
        let v = out.image[(c[0] as usize, c[1] as usize)];
        let t = transmission_ratio(20.0, 0.0, 0.02).unwrap();
        assert!((v - t * t).abs() < 1e-12);
        assert!(v < t);
    }

    #[test]
    fn higher_attenuation_darkens() {
        let cfg = RenderConfig::default();
        let mut prev = f64::INFINITY;
        for c_t in [0.01, 0.05, 0.1, 0.2] {
            let out = render_agglomerate(&single(20.0, c_t, [0.0; 3]), &cfg).unwrap();
            let min = out.image.min_max().0;
            assert!(min < prev);
            prev = min;
        }
    }

    #[test]
    fn identity_distortion() {
        let img = GrayImage::from_fn(20, 20, |x, y| ((x * y) % 7) as f64 / 7.0);
        let out = apply_distortions(
            &img,
            0.0,
            IlluminationParams::UNIFORM,
            0.0,
            &mut seed::rng(1),
        )
        .unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn illumination_scales_constant() {
        let img = GrayImage::constant(10, 10, 1.0);
        let ill = IlluminationParams {
            p00: 0.8,
            p10: 0.0,
            p01: 0.0,
        };
        let out = apply_distortions(&img, 0.0, ill, 0.0, &mut seed::rng(1)).unwrap();
        assert!(out.as_slice().iter().all(|v| (v - 0.8).abs() < 1e-15));
    }
}
