use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest harmonic amplitude.
pub const MAX_AMPLITUDE: f64 = 0.15;
/// Allowed relative change of the pixel area after rescaling.
pub const AREA_TOLERANCE: f64 = 0.02;
/// Rescale iterations before giving up.
pub const MAX_RESCALE_ITERATIONS: usize = 20;

/// Radial modulation of a circular footprint:
/// `rho(theta) = scale * R * (1 + degree * sum_k a_k cos(k theta + phi_k))`
/// for harmonics `k = 2..=5`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub degree: f64,
    pub amplitudes: [f64; 4],
    pub phases: [f64; 4],
    pub scale: f64,
}

impl Shape {
    pub const CIRCLE: Shape = Shape {
        degree: 0.0,
        amplitudes: [0.0; 4],
        phases: [0.0; 4],
        scale: 1.0,
    };

    /// Upper bound of the radial factor over all angles.
    pub fn max_factor(&self) -> f64 {
        self.scale * (1.0 + self.degree * self.amplitudes.iter().map(|a| a.abs()).sum::<f64>())
    }

    pub(crate) fn evaluator(&self) -> ShapeEval {
        ShapeEval {
            circle: self.degree == 0.0,
            scale: self.scale,
            coef: std::array::from_fn(|i| {
                let a = self.degree * self.amplitudes[i];
                (a * self.phases[i].cos(), a * self.phases[i].sin())
            }),
        }
    }
}

/// Precomputed form of [`Shape`] for per-pixel evaluation.
pub(crate) struct ShapeEval {
    circle: bool,
    scale: f64,
    /// `(d a_k cos phi_k, d a_k sin phi_k)` for k = 2..=5
    coef: [(f64, f64); 4],
}

impl ShapeEval {
    /// Radial factor for the direction `(dx, dy)` of length `r > 0`.
    #[inline]
    pub(crate) fn factor(&self, dx: f64, dy: f64, r: f64) -> f64 {
        if self.circle || r == 0.0 {
            return self.scale;
        }
        let (c1, s1) = (dx / r, dy / r);
        // cos(k t), sin(k t) by repeated rotation, starting at k = 2
        let mut ck = c1 * c1 - s1 * s1;
        let mut sk = 2.0 * c1 * s1;
        let mut sum = 0.0;
        for &(ac, as_) in &self.coef {
            // cos(k t + phi) = cos(k t) cos(phi) - sin(k t) sin(phi)
            sum += ck * ac - sk * as_;
            let nc = ck * c1 - sk * s1;
            sk = sk * c1 + ck * s1;
            ck = nc;
        }
        self.scale * (1.0 + sum)
    }
}

/// Projected outline of one primary particle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub center: [f64; 2],
    pub radius: f64,
    pub shape: Shape,
}

impl Footprint {
    pub fn disk(center: [f64; 2], radius: f64) -> Self {
        Footprint {
            center,
            radius,
            shape: Shape::CIRCLE,
        }
    }

    /// Inclusive pixel bounding box `(x0, y0, x1, y1)` of the outline.
    pub fn pixel_bounds(&self) -> (i64, i64, i64, i64) {
        let ext = self.radius * self.shape.max_factor();
        (
            (self.center[0] - ext).floor() as i64,
            (self.center[1] - ext).floor() as i64,
            (self.center[0] + ext).ceil() as i64,
            (self.center[1] + ext).ceil() as i64,
        )
    }

    /// Visit each pixel centre inside the outline with its normalized
    /// radius `r' = r / factor(theta)`, which is `< R` inside.
    pub(crate) fn for_each_inside(&self, mut f: impl FnMut(i64, i64, f64)) {
        let eval = self.shape.evaluator();
        let (x0, y0, x1, y1) = self.pixel_bounds();
        let r2 = self.radius * self.radius;
        for y in y0..=y1 {
            let dy = y as f64 - self.center[1];
            for x in x0..=x1 {
                let dx = x as f64 - self.center[0];
                let d2 = dx * dx + dy * dy;
                let r = d2.sqrt();
                let fac = eval.factor(dx, dy, r);
                let rn = r / fac;
                if rn * rn < r2 {
                    f(x, y, rn);
                }
            }
        }
    }

    /// Number of pixel centres inside the outline.
    pub fn pixel_area(&self) -> usize {
        let mut n = 0;
        self.for_each_inside(|_, _, _| n += 1);
        n
    }
}

/// Deform a footprint by random radial harmonics while preserving its pixel
/// area within [`AREA_TOLERANCE`].
///
/// The scale is first set analytically so the continuous area matches, then
/// refined on the rasterized pixel count.
pub fn deform_projection<R: Rng + ?Sized>(
    footprint: &Footprint,
    degree: f64,
    rng: &mut R,
) -> Result<Footprint> {
    if !(0.0..=1.0).contains(&degree) {
        return Err(Error::invalid(format!(
            "deformation degree must lie in [0, 1], got {degree}"
        )));
    }
    if degree == 0.0 {
        return Ok(*footprint);
    }
    let amplitudes: [f64; 4] =
        std::array::from_fn(|_| rng.random_range(-MAX_AMPLITUDE..=MAX_AMPLITUDE));
    let phases: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI));
    let target = footprint.pixel_area() as f64;
    if target == 0.0 {
        return Err(Error::invalid("footprint covers no pixel centre"));
    }
    let a2: f64 = amplitudes.iter().map(|a| a * a).sum();
    let mut shape = Shape {
        degree,
        amplitudes,
        phases,
        scale: 1.0 / (1.0 + 0.5 * degree * degree * a2).sqrt(),
    };
    for _ in 0..MAX_RESCALE_ITERATIONS {
        let candidate = Footprint {
            shape,
            ..*footprint
        };
        let area = candidate.pixel_area() as f64;
        if (area - target).abs() / target <= AREA_TOLERANCE {
            return Ok(candidate);
        }
        if area == 0.0 {
            shape.scale *= 2.0;
        } else {
            shape.scale *= (target / area).sqrt();
        }
    }
    Err(Error::DeformationFailed(MAX_RESCALE_ITERATIONS))
}
