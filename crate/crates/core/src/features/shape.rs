//! Geometry of a pixel set: convex hull rasterization, hole filling and
//! boundary chain length. Pixels are `(x, y)` with `y` pointing down.

use std::f64::consts::SQRT_2;

/// Pixels of one region cropped to its bounding box.
pub(crate) struct Crop {
    pub w: usize,
    pub h: usize,
    /// Row-major membership, `w * h` entries.
    pub inside: Vec<bool>,
}

impl Crop {
    pub fn new(pixels: &[(i64, i64)]) -> Crop {
        let x0 = pixels.iter().map(|p| p.0).min().expect("non-empty region");
        let x1 = pixels.iter().map(|p| p.0).max().expect("non-empty region");
        let y0 = pixels.iter().map(|p| p.1).min().expect("non-empty region");
        let y1 = pixels.iter().map(|p| p.1).max().expect("non-empty region");
        let (w, h) = ((x1 - x0 + 1) as usize, (y1 - y0 + 1) as usize);
        let mut inside = vec![false; w * h];
        for &(x, y) in pixels {
            inside[(y - y0) as usize * w + (x - x0) as usize] = true;
        }
        Crop { w, h, inside }
    }

    fn get(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.w
            && (y as usize) < self.h
            && self.inside[y as usize * self.w + x as usize]
    }

    /// Region pixels plus enclosed background (4-connected to nothing
    /// outside the box).
    pub fn filled_count(&self) -> usize {
        let (w, h) = (self.w + 2, self.h + 2);
        let fg = |x: usize, y: usize| self.get(x as i64 - 1, y as i64 - 1);
        let mut outside = vec![false; w * h];
        let mut stack = vec![(0usize, 0usize)];
        outside[0] = true;
        let mut reached = 0usize;
        while let Some((x, y)) = stack.pop() {
            reached += 1;
            let mut push = |nx: usize, ny: usize| {
                let i = ny * w + nx;
                if !outside[i] && !fg(nx, ny) {
                    outside[i] = true;
                    stack.push((nx, ny));
                }
            };
            if x > 0 {
                push(x - 1, y);
            }
            if x + 1 < w {
                push(x + 1, y);
            }
            if y > 0 {
                push(x, y - 1);
            }
            if y + 1 < h {
                push(x, y + 1);
            }
        }
        w * h - reached
    }

    /// Length of the outer 8-connected boundary chain, 1 per axis step and
    /// sqrt 2 per diagonal step. Traced clockwise from the first pixel in
    /// raster order; a single pixel has length 0.
    pub fn perimeter(&self) -> f64 {
        // E, SE, S, SW, W, NW, N, NE: clockwise on screen
        const DIRS: [(i64, i64); 8] = [
            (1, 0),
            (1, 1),
            (0, 1),
            (-1, 1),
            (-1, 0),
            (-1, -1),
            (0, -1),
            (1, -1),
        ];
        let start_idx = match self.inside.iter().position(|&v| v) {
            Some(i) => i,
            None => return 0.0,
        };
        let start = ((start_idx % self.w) as i64, (start_idx / self.w) as i64);
        let next = |p: (i64, i64), from: usize| -> Option<usize> {
            (0..8)
                .map(|k| (from + k) % 8)
                .find(|&d| self.get(p.0 + DIRS[d].0, p.1 + DIRS[d].1))
        };
        // the west neighbour of the start pixel is background
        let first = match next(start, 4) {
            Some(d) => d,
            None => return 0.0,
        };
        let mut p = start;
        let mut search = 4;
        let mut length = 0.0;
        let limit = 8 * self.inside.len() + 8;
        for step in 0..limit {
            let d = next(p, search).expect("connected pixel keeps a neighbour");
            if step > 0 && p == start && d == first {
                break;
            }
            length += if d % 2 == 0 { 1.0 } else { SQRT_2 };
            p = (p.0 + DIRS[d].0, p.1 + DIRS[d].1);
            // first neighbour known to be background
            search = (d + 6 - d % 2) % 8;
        }
        length
    }
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull of integer points (monotone chain), counter-clockwise in a
/// y-up frame, without collinear points.
pub(crate) fn convex_hull(points: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Boundary pixels of a crop: region pixels with a 4-neighbour outside it.
/// Only these can be hull vertices.
pub(crate) fn boundary_points(crop: &Crop) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for y in 0..crop.h as i64 {
        for x in 0..crop.w as i64 {
            if crop.get(x, y)
                && !(crop.get(x - 1, y)
                    && crop.get(x + 1, y)
                    && crop.get(x, y - 1)
                    && crop.get(x, y + 1))
            {
                out.push((x, y));
            }
        }
    }
    out
}

/// Number of lattice points inside or on a convex polygon.
pub(crate) fn lattice_points_in_hull(hull: &[(i64, i64)]) -> usize {
    match hull.len() {
        0 => return 0,
        1 => return 1,
        2 => {
            let (dx, dy) = ((hull[1].0 - hull[0].0).abs(), (hull[1].1 - hull[0].1).abs());
            return gcd(dx, dy) as usize + 1;
        }
        _ => {}
    }
    let y0 = hull.iter().map(|p| p.1).min().expect("non-empty");
    let y1 = hull.iter().map(|p| p.1).max().expect("non-empty");
    let mut total = 0usize;
    for y in y0..=y1 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..hull.len() {
            let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
            if (a.1 <= y && y <= b.1) || (b.1 <= y && y <= a.1) {
                if a.1 == b.1 {
                    lo = lo.min(a.0.min(b.0) as f64);
                    hi = hi.max(a.0.max(b.0) as f64);
                } else {
                    let x = a.0 as f64 + (y - a.1) as f64 * (b.0 - a.0) as f64 / (b.1 - a.1) as f64;
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
            }
        }
        if lo <= hi {
            let first = (lo - 1e-9).ceil() as i64;
            let last = (hi + 1e-9).floor() as i64;
            if last >= first {
                total += (last - first + 1) as usize;
            }
        }
    }
    total
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
