use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::synth::NUM_CLASSES;
use crate::{Error, Result};

/// Geometric mean diameter and geometric standard deviation of
/// equivalent-circle diameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdStats {
    /// px
    pub d_g: f64,
    pub sigma_g: f64,
    pub n: usize,
}

/// Signed relative errors of output statistics against a target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelErrors {
    pub e_dg: f64,
    pub e_sigma_g: f64,
}

pub fn equivalent_diameter(area: f64) -> f64 {
    (4.0 * area / PI).sqrt()
}

/// `d_g = exp(mean ln d)`, `sigma_g = exp(std ln d)` with the `n - 1`
/// denominator; a single particle has `sigma_g = 1`.
pub fn psd_stats(areas: &[f64]) -> Result<PsdStats> {
    if areas.is_empty() {
        return Err(Error::invalid("no particle areas"));
    }
    if areas.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::invalid("particle areas must be positive and finite"));
    }
    let logs: Vec<f64> = areas.iter().map(|&a| equivalent_diameter(a).ln()).collect();
    let n = logs.len();
    let mean = logs.iter().sum::<f64>() / n as f64;
    let sigma_g = if n < 2 {
        1.0
    } else {
        let var = logs.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n - 1) as f64;
        var.sqrt().exp()
    };
    Ok(PsdStats {
        d_g: mean.exp(),
        sigma_g,
        n,
    })
}

pub fn relative_errors(output: &PsdStats, target: &PsdStats) -> Result<RelErrors> {
    if !(target.d_g > 0.0 && target.sigma_g > 0.0) {
        return Err(Error::invalid("target statistics must be positive"));
    }
    Ok(RelErrors {
        e_dg: (output.d_g - target.d_g) / target.d_g,
        e_sigma_g: (output.sigma_g - target.sigma_g) / target.sigma_g,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    /// Accuracy of classes `1..=6`; `None` when a class is absent from the
    /// truth.
    pub per_class: Vec<Option<f64>>,
    /// Unweighted mean over classes present in the truth.
    pub mean_accuracy: f64,
    /// Fraction of all samples classified correctly.
    pub micro_accuracy: f64,
    /// `confusion[true - 1][predicted]`, predicted 0 meaning nothing found.
    pub confusion: Vec<Vec<usize>>,
}

pub fn classification_metrics(
    predicted: &[usize],
    truth: &[usize],
) -> Result<ClassificationMetrics> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(Error::invalid(format!(
            "{} predictions vs {} truths",
            predicted.len(),
            truth.len()
        )));
    }
    let mut confusion = vec![vec![0usize; NUM_CLASSES + 1]; NUM_CLASSES];
    for (&p, &t) in predicted.iter().zip(truth) {
        if !(1..=NUM_CLASSES).contains(&t) || p > NUM_CLASSES {
            return Err(Error::invalid(format!(
                "class out of range: predicted {p}, true {t}"
            )));
        }
        confusion[t - 1][p] += 1;
    }
    let per_class: Vec<Option<f64>> = confusion
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let total: usize = row.iter().sum();
            (total > 0).then(|| row[k + 1] as f64 / total as f64)
        })
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    let correct: usize = (0..NUM_CLASSES).map(|k| confusion[k][k + 1]).sum();
    Ok(ClassificationMetrics {
        mean_accuracy: present.iter().sum::<f64>() / present.len() as f64,
        micro_accuracy: correct as f64 / truth.len() as f64,
        per_class,
        confusion,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Histogram of `values` over `bins` logarithmically spaced bins spanning
/// their range. The last bin is closed.
pub fn log_histogram(values: &[f64], bins: usize) -> Result<Vec<HistogramBin>> {
    if values.is_empty() || bins == 0 {
        return Err(Error::invalid(
            "histogram needs values and at least one bin",
        ));
    }
    if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid(
            "histogram values must be positive and finite",
        ));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo * 1.01;
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    let edge = |i: usize| {
        if i == bins {
            hi
        } else {
            (llo + (lhi - llo) * i as f64 / bins as f64).exp()
        }
    };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lo: edge(i),
            hi: edge(i + 1),
            count: 0,
        })
        .collect();
    for &v in values {
        let t = ((v.ln() - llo) / (lhi - llo) * bins as f64).floor() as usize;
        out[t.min(bins - 1)].count += 1;
    }
    Ok(out)
}

pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut s = String::from("d_lo_px,d_hi_px,count\n");
    for b in bins {
        s.push_str(&format!("{},{},{}\n", b.lo, b.hi, b.count));
    }
    s
}

/// Self-contained SVG bar chart of a histogram on a log diameter axis.
pub fn histogram_svg(bins: &[HistogramBin], title: &str) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let max = bins.iter().map(|b| b.count).max().unwrap_or(0).max(1) as f64;
    let lo = bins.first().map_or(1.0, |b| b.lo).ln();
    let hi = bins.last().map_or(10.0, |b| b.hi).ln();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let sx = |v: f64| m + (v.ln() - lo) / span * (w - 2.0 * m);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        w / 2.0,
        xml_escape(title)
    );
    for b in bins {
        let x0 = sx(b.lo);
        let x1 = sx(b.hi);
        let bh = b.count as f64 / max * (h - 2.0 * m);
        s.push_str(&format!(
            "<rect x=\"{x0:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{bh:.2}\" fill=\"steelblue\" stroke=\"white\"/>\n",
            h - m - bh,
            (x1 - x0).max(0.5)
        ));
    }
    s.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{y}\" stroke=\"black\"/>\n",
        y = h - m,
        x2 = w - m
    ));
    if let (Some(first), Some(last)) = (bins.first(), bins.last()) {
        for v in [first.lo, last.hi] {
            s.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{v:.1}</text>\n",
                sx(v),
                h - m + 18.0
            ));
        }
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">equivalent diameter / px (log scale)</text>\n\
         <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">{}</text>\n</svg>\n",
        w / 2.0,
        h - 10.0,
        m - 4.0,
        m + 4.0,
        max as usize
    ));
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area_of(d: f64) -> f64 {
        PI * d * d / 4.0
    }

    #[test]
    fn psd_examples() {
        let s = psd_stats(&[area_of(100.0); 5]).unwrap();
        assert!((s.d_g - 100.0).abs() < 1e-9);
        assert!((s.sigma_g - 1.0).abs() < 1e-12);
        let s = psd_stats(&[area_of(1.0), area_of(4.0)]).unwrap();
        assert!((s.d_g - 2.0).abs() < 1e-12);
        let want = ((4f64.ln() / 2.0).powi(2) * 2.0).sqrt().exp();
        assert!((s.sigma_g - want).abs() < 1e-12);
        assert!((s.sigma_g - 2.6651).abs() < 1e-4);
        assert_eq!(psd_stats(&[area_of(7.0)]).unwrap().sigma_g, 1.0);
        assert!(psd_stats(&[]).is_err());
    }

    #[test]
    fn relative_error_examples() {
        let t = PsdStats {
            d_g: 100.0,
            sigma_g: 1.5,
            n: 10,
        };
        let o = PsdStats {
            d_g: 104.1,
            sigma_g: 1.515,
            n: 10,
        };
        let e = relative_errors(&o, &t).unwrap();
        assert!((e.e_dg - 0.041).abs() < 1e-12);
        assert!((e.e_sigma_g - 0.01).abs() < 1e-12);
        assert_eq!(
            relative_errors(&t, &t).unwrap(),
            RelErrors {
                e_dg: 0.0,
                e_sigma_g: 0.0
            }
        );
        assert!(relative_errors(
            &t,
            &PsdStats {
                d_g: 0.0,
                sigma_g: 1.0,
                n: 1
            }
        )
        .is_err());
    }

    #[test]
    fn macro_and_micro_accuracy() {
        let m = classification_metrics(&[1, 2, 3], &[1, 2, 3]).unwrap();
        assert_eq!(m.mean_accuracy, 1.0);
        let m = classification_metrics(&[1, 1, 1, 1, 3], &[1, 1, 1, 1, 2]).unwrap();
        assert_eq!(m.mean_accuracy, 0.5);
        assert_eq!(m.micro_accuracy, 0.8);
        assert_eq!(m.per_class[0], Some(1.0));
        assert_eq!(m.per_class[1], Some(0.0));
        assert_eq!(m.per_class[2], None);
        assert!(classification_metrics(&[1], &[1, 2]).is_err());
        assert!(classification_metrics(&[0], &[1]).unwrap().mean_accuracy == 0.0);
    }

    #[test]
    fn histogram_counts_everything() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let h = log_histogram(&v, 8).unwrap();
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 100);
        assert!((h[0].lo - 1.0).abs() < 1e-12 && h[7].hi == 100.0);
        assert!(histogram_csv(&h).starts_with("d_lo_px,d_hi_px,count\n"));
        let svg = histogram_svg(&h, "a<b");
        assert!(svg.starts_with("<svg") && svg.contains("a&lt;b"));
    }
}
