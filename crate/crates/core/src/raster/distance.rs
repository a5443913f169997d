use super::{BinaryMask, Field};

const AXIS: u32 = 3;
const DIAG: u32 = 4;

/// Chamfer 3-4 distance from every foreground pixel to the nearest
/// background pixel, in pixels. Pixels outside the image count as
/// background; background pixels are exactly zero.
///
/// The 3-4 metric stays within about 8% of the Euclidean distance in the
/// worst direction and is exact along the axes.
pub fn distance_transform(mask: &BinaryMask) -> Field {
    let (w, h) = (mask.width(), mask.height());
    let fg = mask.as_slice();
    let mut d: Vec<u32> = fg
        .iter()
        .map(|&f| if f { u32::MAX / 2 } else { 0 })
        .collect();
    // out-of-image neighbours read as background (0)
    let at = |d: &[u32], x: isize, y: isize| -> u32 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0
        } else {
            d[y as usize * w + x as usize]
        }
    };
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            if d[i] == 0 {
                continue;
            }
            let v = d[i]
                .min(at(&d, x - 1, y) + AXIS)
                .min(at(&d, x, y - 1) + AXIS)
                .min(at(&d, x - 1, y - 1) + DIAG)
                .min(at(&d, x + 1, y - 1) + DIAG);
            d[i] = v;
        }
    }
    for y in (0..h as isize).rev() {
        for x in (0..w as isize).rev() {
            let i = y as usize * w + x as usize;
            if d[i] == 0 {
                continue;
            }
            let v = d[i]
                .min(at(&d, x + 1, y) + AXIS)
                .min(at(&d, x, y + 1) + AXIS)
                .min(at(&d, x + 1, y + 1) + DIAG)
                .min(at(&d, x - 1, y + 1) + DIAG);
            d[i] = v;
        }
    }
    Field::from_vec(
        w,
        h,
        d.into_iter()
            .map(|v| f64::from(v) / f64::from(AXIS))
            .collect(),
    )
    .expect("shape preserved")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_edt(mask: &BinaryMask) -> Field {
        // brute force over background pixels plus the one-pixel frame outside the image
        let (w, h) = (mask.width() as isize, mask.height() as isize);
        let mut bg = Vec::new();
        for y in -1..=h {
            for x in -1..=w {
                let inside = x >= 0 && y >= 0 && x < w && y < h;
                if !inside || !mask[(x as usize, y as usize)] {
                    bg.push((x as f64, y as f64));
                }
            }
        }
        Field::from_fn(mask.width(), mask.height(), |x, y| {
            if !mask[(x, y)] {
                return 0.0;
            }
            bg.iter()
                .map(|&(bx, by)| ((bx - x as f64).powi(2) + (by - y as f64).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
    }

    #[test]
    fn all_background_is_zero() {
        let d = distance_transform(&BinaryMask::empty(9, 4));
        assert!(d.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_pixel() {
        let mut m = BinaryMask::empty(5, 5);
        m[(2, 2)] = true;
        let d = distance_transform(&m);
        assert!(d[(2, 2)] >= 1.0 && d[(2, 2)] <= 2f64.sqrt());
        assert_eq!(d.as_slice().iter().filter(|&&v| v > 0.0).count(), 1);
    }

    #[test]
    fn disk_maximum_close_to_radius() {
        let r = 20.0;
        let m = BinaryMask::from_fn(61, 61, |x, y| {
            let dx = x as f64 - 30.0;
            let dy = y as f64 - 30.0;
            dx * dx + dy * dy <= r * r
        });
        let chamfer = distance_transform(&m);
        let exact = exact_edt(&m);
        let max_c = chamfer.min_max().1;
        let max_e = exact.min_max().1;
        assert!((max_c - r).abs() / r < 0.05, "chamfer max {max_c}");
        assert!((max_e - r).abs() / r < 0.05, "exact max {max_e}");
        for (c, e) in chamfer.as_slice().iter().zip(exact.as_slice()) {
            if *e > 0.0 {
                assert!((c - e).abs() <= 0.09 * e + 1e-9, "chamfer {c} vs exact {e}");
            }
        }
    }

    #[test]
    fn positive_exactly_on_foreground() {
        let m = BinaryMask::from_fn(15, 9, |x, y| (x ^ y) % 3 != 0);
        let d = distance_transform(&m);
        for (f, v) in m.as_slice().iter().zip(d.as_slice()) {
            assert_eq!(*f, *v > 0.0);
        }
    }
}
