use super::{Field, GrayImage};
use crate::{Error, Result};

/// Odd-sided square weight grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    side: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(side: usize, weights: Vec<f64>) -> Result<Self> {
        if side.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "kernel side must be odd, got {side}"
            )));
        }
        if weights.len() != side * side {
            return Err(Error::invalid(format!(
                "kernel of side {side} needs {} weights, got {}",
                side * side,
                weights.len()
            )));
        }
        Ok(Kernel { side, weights })
    }

    pub fn box_filter(side: usize) -> Result<Self> {
        Kernel::new(side, vec![1.0; side * side])
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// 2D convolution with replicate border handling.
///
/// The kernel is flipped, so convolving a unit impulse reproduces the kernel.
pub fn convolve(img: &GrayImage, kernel: &Kernel) -> GrayImage {
    let r = (kernel.side / 2) as isize;
    let side = kernel.side as isize;
    GrayImage::from_fn(img.width(), img.height(), |x, y| {
        let mut acc = 0.0;
        for ky in 0..side {
            for kx in 0..side {
                let w = kernel.weights[(ky * side + kx) as usize];
                if w != 0.0 {
                    // flipped kernel: output(x) = sum k(i) * in(x - i)
                    let sx = x as isize - (kx - r);
                    let sy = y as isize - (ky - r);
                    acc += w * img.get_clamped(sx, sy);
                }
            }
        }
        acc
    })
}

/// Normalized 1D Gaussian taps with radius `ceil(3 sigma)`.
pub fn gaussian_kernel_1d(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let two_s2 = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / two_s2).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= total;
    }
    taps
}

/// Separable Gaussian blur with replicate border. `sigma = 0` is the identity.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> Result<GrayImage> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!(
            "blur sigma must be finite and non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 || img.is_empty() {
        return Ok(img.clone());
    }
    let taps = gaussian_kernel_1d(sigma);
    let horizontal = separable_pass(img, &taps, true);
    Ok(separable_pass(&horizontal, &taps, false))
}

fn separable_pass(img: &GrayImage, taps: &[f64], along_x: bool) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let r = (taps.len() / 2) as isize;
    let src = img.as_slice();
    let mut out = vec![0.0; w * h];
    if along_x {
        for y in 0..h {
            let row = &src[y * w..(y + 1) * w];
            for x in 0..w {
                let mut acc = 0.0;
                let xi = x as isize;
                if xi >= r && xi + r < w as isize {
                    let start = (xi - r) as usize;
                    for (t, v) in taps.iter().zip(&row[start..start + taps.len()]) {
                        acc += t * v;
                    }
                } else {
                    for (k, t) in taps.iter().enumerate() {
                        let sx = (xi + k as isize - r).clamp(0, w as isize - 1) as usize;
                        acc += t * row[sx];
                    }
                }
                out[y * w + x] = acc;
            }
        }
    } else {
        for y in 0..h {
            let yi = y as isize;
            let dst = &mut out[y * w..(y + 1) * w];
            for (k, t) in taps.iter().enumerate() {
                let sy = (yi + k as isize - r).clamp(0, h as isize - 1) as usize;
                let row = &src[sy * w..(sy + 1) * w];
                for (d, v) in dst.iter_mut().zip(row) {
                    *d += t * v;
                }
            }
        }
    }
    GrayImage::from_vec(w, h, out).expect("shape preserved")
}

/// 3x3 Sobel derivatives `(gx, gy)` with replicate border.
///
/// `gx` responds to intensity increasing with `x`, `gy` to intensity
/// increasing with `y`.
pub fn sobel_gradients(img: &GrayImage) -> Result<(Field, Field)> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::invalid(format!(
            "Sobel needs at least a 3x3 image, got {w}x{h}"
        )));
    }
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    let src = img.as_slice();
    for y in 0..h {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let p = |xx: usize, yy: usize| src[yy * w + xx];
            let (a, b, c) = (p(xm, ym), p(x, ym), p(xp, ym));
            let (d, f) = (p(xm, y), p(xp, y));
            let (g, hh, i) = (p(xm, yp), p(x, yp), p(xp, yp));
            gx[y * w + x] = (c + 2.0 * f + i) - (a + 2.0 * d + g);
            gy[y * w + x] = (g + 2.0 * hh + i) - (a + 2.0 * b + c);
        }
    }
    Ok((Field::from_vec(w, h, gx)?, Field::from_vec(w, h, gy)?))
}
