use std::fmt::Write as _;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use agglom_core::pipeline::{
    equivalent_diameter, histogram_csv, histogram_svg, log_histogram, measure_paths, psd_stats,
    AuditStatus, ImageAudit, ModelBundle, RegionResult,
};

use crate::manifest::{create_out, write_json, write_manifest, write_text};
use crate::{file_name, list_images, MeasureArgs};

pub const PREDICTIONS: &str = "predictions.jsonl";

#[derive(Serialize)]
struct Summary {
    d_g_px: Option<f64>,
    sigma_g: Option<f64>,
    n: usize,
    images: usize,
    included: usize,
    excluded: usize,
    errors: usize,
}

/// One line of `predictions.jsonl`.
#[derive(Serialize, Deserialize)]
pub struct Prediction {
    pub file: String,
    pub status: AuditStatus,
    /// Class of the largest measured region; 0 when none.
    pub class: usize,
    pub areas: Vec<f64>,
    pub regions: Vec<RegionResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Prediction {
    fn from_audit(a: ImageAudit) -> Self {
        let class = a
            .regions
            .iter()
            .max_by(|x, y| x.region_area.total_cmp(&y.region_area))
            .map_or(0, |r| r.class);
        Prediction {
            file: a.path.as_deref().map(file_name).unwrap_or_default(),
            status: a.status,
            class,
            areas: a
                .regions
                .iter()
                .flat_map(|r| r.areas.iter().copied())
                .collect(),
            regions: a.regions,
            error: a.error,
        }
    }
}

#[derive(Serialize)]
struct Config {
    bundle: String,
    images: Vec<String>,
    bins: usize,
}

pub fn run(a: MeasureArgs) -> Result<()> {
    let bundle = ModelBundle::load(&a.bundle)?;
    let paths = list_images(&a.images)?;
    let m = measure_paths(&bundle, &paths)?;
    let stats = if m.areas.is_empty() {
        None
    } else {
        Some(psd_stats(&m.areas)?)
    };
    let summary = Summary {
        d_g_px: stats.map(|s| s.d_g),
        sigma_g: stats.map(|s| s.sigma_g),
        n: m.areas.len(),
        images: paths.len(),
        included: m.count(AuditStatus::Included),
        excluded: m.count(AuditStatus::Excluded),
        errors: m.count(AuditStatus::Error),
    };

    create_out(&a.out)?;
    write_json(&a.out.join("summary.json"), &summary)?;
    if !m.areas.is_empty() {
        let d: Vec<f64> = m.areas.iter().map(|&x| equivalent_diameter(x)).collect();
        let bins = log_histogram(&d, a.bins.max(1))?;
        write_text(&a.out.join("histogram.csv"), &histogram_csv(&bins))?;
        write_text(
            &a.out.join("histogram.svg"),
            &histogram_svg(&bins, "Primary particle size distribution"),
        )?;
    }
    let mut lines = String::new();
    for audit in m.audits {
        let p = Prediction::from_audit(audit);
        writeln!(lines, "{}", serde_json::to_string(&p)?)?;
    }
    write_text(&a.out.join(PREDICTIONS), &lines)?;
    let cfg = Config {
        bundle: a.bundle.display().to_string(),
        images: paths.iter().map(|p| file_name(p)).collect(),
        bins: a.bins,
    };
    write_manifest(&a.out, "measure", bundle.meta.seed, &cfg)?;
    crate::emit(&format!(
        "{} primaries from {} images ({} excluded, {} errors)",
        summary.n, summary.images, summary.excluded, summary.errors
    ));
    Ok(())
}
