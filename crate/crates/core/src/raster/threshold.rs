use super::{BinaryMask, GrayImage};

const BINS: usize = 256;

#[inline]
fn bin_of(v: f64) -> usize {
    (v.clamp(0.0, 1.0) * 255.0).round() as usize
}

/// Otsu's threshold over a 256-bin histogram of `[0, 1]` intensities.
///
/// Bin `b` collects intensities that round to the 8-bit level `b`. The
/// returned value sits half a level above the last bin of the dark class,
/// so `v < threshold` selects exactly that class. When several splits tie
/// for the maximal between-class variance the middle one is used. A
/// constant image returns the lower edge of its single occupied bin, which
/// puts every pixel into the bright class.
pub fn otsu_threshold(img: &GrayImage) -> f64 {
    let mut hist = [0u64; BINS];
    for &v in img.as_slice() {
        hist[bin_of(v)] += 1;
    }
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let occupied: Vec<usize> = (0..BINS).filter(|&b| hist[b] > 0).collect();
    if occupied.len() == 1 {
        return ((occupied[0] as f64 - 0.5) / 255.0).max(0.0);
    }

    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(b, &c)| b as f64 * c as f64)
        .sum();
    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    let mut best = f64::NEG_INFINITY;
    let mut first = 0;
    let mut last = 0;
    let n = total as f64;
    for t in 0..BINS - 1 {
        w0 += hist[t] as f64;
        sum0 += t as f64 * hist[t] as f64;
        let w1 = n - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        // relative tolerance so that numerically equal plateaus count as ties
        if between > best * (1.0 + 1e-12) {
            best = between;
            first = t;
            last = t;
        } else if (between - best).abs() <= best * 1e-12 {
            last = t;
        }
    }
    let t = (first + last) / 2;
    (t as f64 + 0.5) / 255.0
}

/// Foreground where intensity lies strictly below `threshold`.
pub fn threshold_below(img: &GrayImage, threshold: f64) -> BinaryMask {
    img.map(|&v| v < threshold)
}
