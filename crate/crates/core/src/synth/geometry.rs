use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::deform::Shape;
use crate::{Error, Result};

/// Spheres closer than their radius sum minus this count as overlapping.
pub const CONTACT_EPS: f64 = 1e-6;

/// Placement attempts per sphere before giving up.
pub const MAX_REJECTIONS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereSpec {
    /// Centre in pixels; `z` is the beam direction.
    pub center: [f64; 3],
    pub radius: f64,
    /// Deformation of the projected footprint.
    pub shape: Shape,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgglomerateSpec {
    pub spheres: Vec<SphereSpec>,
    /// Attenuation per pixel of path length.
    pub c_t: f64,
    pub deformation_degree: f64,
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

impl AgglomerateSpec {
    /// Pairs `(i, j)` whose spheres interpenetrate beyond the contact
    /// tolerance. Brute force over all pairs.
    pub fn overlapping_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.spheres.len() {
            for j in i + 1..self.spheres.len() {
                let (a, b) = (&self.spheres[i], &self.spheres[j]);
                if dist(a.center, b.center) < a.radius + b.radius - CONTACT_EPS {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Every sphere after the first touches at least one earlier sphere.
    pub fn contact_chain_holds(&self) -> bool {
        self.spheres.iter().enumerate().skip(1).all(|(i, s)| {
            self.spheres[..i].iter().any(|p| {
                (dist(p.center, s.center) - (p.radius + s.radius)).abs()
                    <= 1e-6 * (p.radius + s.radius).max(1.0)
            })
        })
    }
}

/// Random tangent packing: the first sphere sits at a uniform sub-pixel
/// offset from the origin in the image plane, each later
/// sphere touches a uniformly chosen earlier one in a uniformly chosen
/// direction, and placements that overlap any sphere are redrawn.
pub fn build_agglomerate<R: Rng + ?Sized>(
    radii: &[f64],
    c_t: f64,
    rng: &mut R,
) -> Result<AgglomerateSpec> {
    if radii.is_empty() {
        return Err(Error::invalid(
            "an agglomerate needs at least one primary particle",
        ));
    }
    if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::invalid("sphere radii must be positive and finite"));
    }
    let mut spheres: Vec<SphereSpec> = Vec::with_capacity(radii.len());
    let phase = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), 0.0];
    spheres.push(SphereSpec {
        center: phase,
        radius: radii[0],
        shape: Shape::CIRCLE,
    });
    for (i, &r) in radii.iter().enumerate().skip(1) {
        let mut placed = None;
        for _ in 0..MAX_REJECTIONS {
            let anchor = &spheres[rng.random_range(0..spheres.len())];
            let z: f64 = rng.random_range(-1.0..=1.0);
            let phi: f64 = rng.random_range(0.0..2.0 * PI);
            let s = (1.0 - z * z).max(0.0).sqrt();
            let d = anchor.radius + r;
            let c = [
                anchor.center[0] + d * s * phi.cos(),
                anchor.center[1] + d * s * phi.sin(),
                anchor.center[2] + d * z,
            ];
            if spheres
                .iter()
                .all(|o| dist(o.center, c) >= o.radius + r - CONTACT_EPS)
            {
                placed = Some(c);
                break;
            }
        }
        match placed {
            Some(center) => spheres.push(SphereSpec {
                center,
                radius: r,
                shape: Shape::CIRCLE,
            }),
            None => return Err(Error::PackingFailed { sphere: i }),
        }
    }
    Ok(AgglomerateSpec {
        spheres,
        c_t,
        deformation_degree: 0.0,
    })
}
