use std::collections::HashMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use agglom_core::pipeline::{
    classification_metrics, psd_stats, relative_errors, ClassificationMetrics, PsdStats,
};
use agglom_core::synth::{read_labels, MAX_MEASURED_PRIMARIES, NUM_CLASSES};

use crate::baseline::{BaselineRecord, RESULTS};
use crate::manifest::{create_out, write_json, write_manifest};
use crate::measure::{Prediction, PREDICTIONS};
use crate::{file_name, EvaluateArgs};

struct Predicted {
    class: usize,
    areas: Vec<f64>,
}

#[derive(Serialize)]
struct Report {
    source: &'static str,
    matched: usize,
    unmatched_truth: usize,
    mean_accuracy: f64,
    micro_accuracy: f64,
    metrics: ClassificationMetrics,
    output: Option<PsdStats>,
    target: Option<PsdStats>,
    #[serde(rename = "E_dg")]
    e_dg: Option<f64>,
    #[serde(rename = "E_sigma_g")]
    e_sigma_g: Option<f64>,
}

fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1))
        })
        .collect()
}

fn load_predictions(dir: &Path) -> Result<(&'static str, HashMap<String, Predicted>)> {
    let p = dir.join(PREDICTIONS);
    if p.exists() {
        let rows: Vec<Prediction> = read_lines(&p)?;
        return Ok((
            "measure",
            rows.into_iter()
                .map(|r| {
                    (
                        r.file,
                        Predicted {
                            class: r.class,
                            areas: r.areas,
                        },
                    )
                })
                .collect(),
        ));
    }
    let p = dir.join(RESULTS);
    if p.exists() {
        let rows: Vec<BaselineRecord> = read_lines(&p)?;
        let map = rows
            .into_iter()
            .map(|r| {
                let class = r.count.min(NUM_CLASSES);
                // excluded from the size distribution like the network route
                let areas = if class <= MAX_MEASURED_PRIMARIES {
                    r.areas
                } else {
                    Vec::new()
                };
                (r.file, Predicted { class, areas })
            })
            .collect();
        return Ok(("baseline", map));
    }
    bail!(
        "{} contains neither {PREDICTIONS} nor {RESULTS}",
        dir.display()
    )
}

pub fn run(a: EvaluateArgs) -> Result<()> {
    let (source, preds) = load_predictions(&a.pred)?;
    let labels = read_labels(&a.truth)?;
    let (mut pred_classes, mut true_classes) = (Vec::new(), Vec::new());
    let (mut out_areas, mut target_areas) = (Vec::new(), Vec::new());
    let mut unmatched = 0;
    for l in &labels {
        let Some(p) = preds.get(&file_name(Path::new(&l.file))) else {
            unmatched += 1;
            continue;
        };
        pred_classes.push(p.class);
        true_classes.push(l.class);
        out_areas.extend_from_slice(&p.areas);
        if l.class <= MAX_MEASURED_PRIMARIES {
            target_areas.extend_from_slice(&l.areas_px2);
        }
    }
    if true_classes.is_empty() {
        bail!("no prediction matches a truth record");
    }
    let metrics = classification_metrics(&pred_classes, &true_classes)?;
    let output = if out_areas.is_empty() {
        None
    } else {
        Some(psd_stats(&out_areas)?)
    };
    let target = if target_areas.is_empty() {
        None
    } else {
        Some(psd_stats(&target_areas)?)
    };
    let errors = match (&output, &target) {
        (Some(o), Some(t)) => Some(relative_errors(o, t)?),
        _ => None,
    };
    let report = Report {
        source,
        matched: true_classes.len(),
        unmatched_truth: unmatched,
        mean_accuracy: metrics.mean_accuracy,
        micro_accuracy: metrics.micro_accuracy,
        metrics,
        output,
        target,
        e_dg: errors.map(|e| e.e_dg),
        e_sigma_g: errors.map(|e| e.e_sigma_g),
    };
    crate::emit(&serde_json::to_string_pretty(&report)?);
    if let Some(out) = &a.out {
        create_out(out)?;
        write_json(&out.join("report.json"), &report)?;
        let cfg = serde_json::json!({ "pred": a.pred.display().to_string(), "truth": a.truth.display().to_string() });
        write_manifest(out, "evaluate", None, &cfg)?;
    }
    Ok(())
}
