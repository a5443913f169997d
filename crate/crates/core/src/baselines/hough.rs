use std::f64::consts::PI;

use super::{DetectedPrimaries, HtParams};
use crate::raster::{sobel_gradients, GrayImage};
use crate::Result;

/// One accepted circle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
    pub score: f64,
}

/// Circular Hough transform for dark particles on a bright background.
///
/// Every pixel whose Sobel magnitude reaches `edge_threshold` votes, for each
/// integer radius, for the centre one radius against its gradient. A
/// candidate's score is its vote count pooled over the 3×3 neighbourhood in
/// its own and both adjacent radius planes, divided by the
/// circumference; candidates reaching `sensitivity` are accepted greedily by
/// score unless their centre lies closer than `r_min` to an accepted one.
pub fn hough_circles(img: &GrayImage, p: &HtParams) -> Result<Vec<Circle>> {
    p.validate()?;
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Ok(Vec::new());
    }
    let (gx, gy) = sobel_gradients(img)?;
    let r_lo = p.r_min.ceil() as usize;
    let r_hi = p.r_max.floor() as usize;
    let nr = r_hi + 1 - r_lo;
    let mut acc = vec![0u32; nr * w * h];
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (gx[(x, y)], gy[(x, y)]);
            let mag = (dx * dx + dy * dy).sqrt();
            if mag < p.edge_threshold || mag == 0.0 {
                continue;
            }
            let (ux, uy) = (dx / mag, dy / mag);
            for (k, r) in (r_lo..=r_hi).enumerate() {
                let cx = (x as f64 - r as f64 * ux).round();
                let cy = (y as f64 - r as f64 * uy).round();
                if cx >= 0.0 && cy >= 0.0 && (cx as usize) < w && (cy as usize) < h {
                    acc[(k * h + cy as usize) * w + cx as usize] += 1;
                }
            }
        }
    }
    let mut candidates = Vec::new();
    for (k, r) in (r_lo..=r_hi).enumerate() {
        let plane = &acc[k * w * h..(k + 1) * w * h];
        let circumference = 2.0 * PI * r as f64;
        for y in 0..h {
            for x in 0..w {
                if plane[y * w + x] == 0 {
                    continue;
                }
                let mut pooled = 0u32;
                for kk in k.saturating_sub(1)..=(k + 1).min(nr - 1) {
                    let near = &acc[kk * w * h..(kk + 1) * w * h];
                    for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                        for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                            pooled += near[yy * w + xx];
                        }
                    }
                }
                let score = pooled as f64 / circumference;
                if score >= p.sensitivity {
                    candidates.push(Circle {
                        cx: x as f64,
                        cy: y as f64,
                        r: r as f64,
                        score,
                    });
                }
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.r.total_cmp(&b.r))
            .then(a.cy.total_cmp(&b.cy))
            .then(a.cx.total_cmp(&b.cx))
    });
    let mut accepted: Vec<Circle> = Vec::new();
    for c in candidates {
        if accepted
            .iter()
            .all(|a| ((a.cx - c.cx).powi(2) + (a.cy - c.cy).powi(2)).sqrt() >= p.r_min)
        {
            accepted.push(c);
        }
    }
    Ok(accepted)
}

pub fn hough_circle_primaries(img: &GrayImage, p: &HtParams) -> Result<DetectedPrimaries> {
    let circles = hough_circles(img, p)?;
    Ok(DetectedPrimaries::new(
        circles.iter().map(|c| PI * c.r * c.r).collect(),
    ))
}
