use std::fmt::Write as _;
use std::fs;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use agglom_core::baselines::{run_baseline, tune, BaselineParams, Method};
use agglom_core::raster::io::read_image;
use agglom_core::synth::read_labels;

use crate::manifest::{create_out, write_json, write_manifest, write_text};
use crate::{file_name, list_images, BaselineArgs};

pub const RESULTS: &str = "results.jsonl";

/// One line of `results.jsonl`.
#[derive(Serialize, Deserialize)]
pub struct BaselineRecord {
    pub file: String,
    pub count: usize,
    pub areas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Serialize)]
struct Config<'a> {
    method: Method,
    params: &'a BaselineParams,
    input: String,
}

pub fn run(a: BaselineArgs) -> Result<()> {
    let method = a.method.0;
    let params = match &a.params {
        Some(p) => BaselineParams::from_toml(
            &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => BaselineParams::default(),
    };
    create_out(&a.out)?;
    if let Some(dataset) = &a.tune {
        let labels = read_labels(&dataset.join("labels.jsonl"))?;
        let images = labels
            .par_iter()
            .map(|l| read_image(&dataset.join(&l.file)))
            .collect::<agglom_core::Result<Vec<_>>>()?;
        let classes: Vec<usize> = labels.iter().map(|l| l.class).collect();
        let r = tune(method, &images, &classes, &params)?;
        write_text(&a.out.join("params.toml"), &r.params.to_toml())?;
        write_json(&a.out.join("tuning.json"), &r)?;
        let cfg = Config {
            method,
            params: &params,
            input: dataset.display().to_string(),
        };
        write_manifest(&a.out, "baseline", None, &cfg)?;
        crate::emit(&format!("{method}: tuned accuracy {:.4}", r.accuracy));
        return Ok(());
    }
    let dir = a
        .images
        .as_ref()
        .expect("clap requires --images without --tune");
    let paths = list_images(dir)?;
    let records: Vec<BaselineRecord> = paths
        .par_iter()
        .map(
            |p| match read_image(p).and_then(|img| run_baseline(method, &img, &params)) {
                Ok(d) => BaselineRecord {
                    file: file_name(p),
                    count: d.count,
                    areas: d.areas,
                    error: None,
                },
                Err(e) => BaselineRecord {
                    file: file_name(p),
                    count: 0,
                    areas: Vec::new(),
                    error: Some(e.to_string()),
                },
            },
        )
        .collect();
    let mut lines = String::new();
    for r in &records {
        writeln!(lines, "{}", serde_json::to_string(r)?)?;
    }
    write_text(&a.out.join(RESULTS), &lines)?;
    let cfg = Config {
        method,
        params: &params,
        input: dir.display().to_string(),
    };
    write_manifest(&a.out, "baseline", None, &cfg)?;
    crate::emit(&format!("{method}: processed {} images", records.len()));
    Ok(())
}
