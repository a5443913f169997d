use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{synthesize_sample, RenderConfig, SynthLabel, NUM_CLASSES};
use crate::distortion::DistortionDistributions;
use crate::raster::io::encode_png;
use crate::{seed, Error, Result};

/// Images generated in memory before being flushed to disk.
const CHUNK: usize = 256;

/// Number of images per class, index 0 holding class 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts(pub [usize; NUM_CLASSES]);

impl ClassCounts {
    pub fn uniform(n: usize) -> Self {
        ClassCounts([n; NUM_CLASSES])
    }

    pub fn get(&self, class: usize) -> usize {
        self.0[class - 1]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    /// Class of the image at `index`; classes are laid out in order.
    pub fn class_at(&self, index: usize) -> Option<usize> {
        let mut acc = 0;
        for (i, &c) in self.0.iter().enumerate() {
            acc += c;
            if index < acc {
                return Some(i + 1);
            }
        }
        None
    }

    fn from_table(table: &BTreeMap<String, usize>) -> Result<Self> {
        let mut out = ClassCounts::default();
        for (k, &v) in table {
            let class = parse_class(k)?;
            out.0[class - 1] = v;
        }
        Ok(out)
    }
}

impl fmt::Display for ClassCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{}:{}", i + 1, c))
            .collect();
        f.write_str(&parts.join(","))
    }
}

fn parse_class(s: &str) -> Result<usize> {
    let class: usize = s
        .trim()
        .parse()
        .map_err(|_| Error::parse("counts", format!("bad class id {s:?}")))?;
    if !(1..=NUM_CLASSES).contains(&class) {
        return Err(Error::parse(
            "counts",
            format!("class id {class} outside 1..={NUM_CLASSES}"),
        ));
    }
    Ok(class)
}

/// Parse `k:v[,k:v...]`. Unlisted classes get zero images; a class may
/// appear once.
pub fn parse_counts(text: &str) -> Result<ClassCounts> {
    let mut out = ClassCounts::default();
    let mut seen = [false; NUM_CLASSES];
    if text.trim().is_empty() {
        return Err(Error::parse("counts", "empty"));
    }
    for item in text.split(',') {
        let (k, v) = item
            .split_once(':')
            .ok_or_else(|| Error::parse("counts", format!("expected k:v, got {item:?}")))?;
        let class = parse_class(k)?;
        if seen[class - 1] {
            return Err(Error::parse(
                "counts",
                format!("class {class} listed twice"),
            ));
        }
        seen[class - 1] = true;
        out.0[class - 1] = v
            .trim()
            .parse()
            .map_err(|_| Error::parse("counts", format!("bad count {v:?}")))?;
    }
    Ok(out)
}

/// TOML synthesis configuration with `[render]`, `[distortions]` and
/// `[classes]` tables. Every table and field is optional.
///
/// ```toml
/// [render]
/// width = 256
/// area_min = 500.0
///
/// [distortions]
/// blur_sigma = [0.5, 1.0]
/// noise_sigma = [0.01]
/// illum = [[1.0, 0.0, 0.0]]
///
/// [classes]
/// 1 = 100
/// 2 = 100
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub render: RenderConfig,
    pub distortions: DistortionDistributions,
    pub classes: BTreeMap<String, usize>,
}

impl SynthConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SynthConfig = toml::from_str(text).map_err(|e| Error::parse("synth config", e))?;
        cfg.render_config()?;
        cfg.counts()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain data serializes")
    }

    /// Render settings with the distortion table merged in, validated.
    pub fn render_config(&self) -> Result<RenderConfig> {
        let cfg = RenderConfig {
            distortions: self.distortions.clone(),
            ..self.render.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn counts(&self) -> Result<ClassCounts> {
        ClassCounts::from_table(&self.classes)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedImage {
    pub index: usize,
    pub class: usize,
    pub seed: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub requested: usize,
    pub written: usize,
    pub skipped: Vec<SkippedImage>,
}

/// Generate `counts` images under `out`: `images/NNNNNNN.png` plus one
/// `labels.jsonl` line per written image, in index order.
///
/// Image `i` is seeded with `derive(master_seed, i)`, so the output does not
/// depend on thread scheduling. Images whose geometry fails after all
/// retries are left out of the labels and reported in the summary.
pub fn synthesize_dataset(
    cfg: &RenderConfig,
    counts: &ClassCounts,
    master_seed: u64,
    out: &Path,
) -> Result<DatasetSummary> {
    cfg.validate()?;
    let images = out.join("images");
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let labels_path = out.join("labels.jsonl");
    let file = fs::File::create(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
    let mut labels = BufWriter::new(file);
    let areas = cfg.uniform_areas();
    let total = counts.total();
    let mut summary = DatasetSummary {
        requested: total,
        ..Default::default()
    };

    let mut start = 0;
    while start < total {
        let end = (start + CHUNK).min(total);
        let chunk: Vec<(usize, usize, u64, Result<(Vec<u8>, SynthLabel)>)> = (start..end)
            .into_par_iter()
            .map(|i| {
                let class = counts.class_at(i).expect("index below total");
                let s = seed::derive(master_seed, i as u64);
                let r = synthesize_sample(cfg, class, s, &areas)
                    .and_then(|sample| Ok((encode_png(&sample.image)?, sample.label)));
                (i, class, s, r)
            })
            .collect();
        for (i, class, s, r) in chunk {
            match r {
                Ok((png, mut label)) => {
                    let name = format!("{i:07}.png");
                    let path = images.join(&name);
                    fs::write(&path, png).map_err(|e| Error::io(&path, e))?;
                    label.file = format!("images/{name}");
                    let line = serde_json::to_string(&label).expect("label serializes");
                    writeln!(labels, "{line}").map_err(|e| Error::io(&labels_path, e))?;
                    summary.written += 1;
                }
                Err(e) => {
                    log::warn!("image {i} (class {class}) skipped: {e}");
                    summary.skipped.push(SkippedImage {
                        index: i,
                        class,
                        seed: s,
                        reason: e.to_string(),
                    });
                }
            }
        }
        start = end;
    }
    labels.flush().map_err(|e| Error::io(&labels_path, e))?;
    Ok(summary)
}

/// Parse one `labels.jsonl` record and check its internal consistency.
pub fn parse_label_line(line: &str) -> Result<SynthLabel> {
    let label: SynthLabel = serde_json::from_str(line).map_err(|e| Error::parse("label", e))?;
    if !(1..=NUM_CLASSES).contains(&label.class) {
        return Err(Error::Validation(format!(
            "label class {} outside 1..={NUM_CLASSES}",
            label.class
        )));
    }
    let n = label.areas_px2.len();
    if n == 0 || super::class_of(n) != label.class {
        return Err(Error::Validation(format!(
            "class {} inconsistent with {n} areas",
            label.class
        )));
    }
    if label
        .areas_px2
        .iter()
        .any(|a| !(*a >= 0.0) || !a.is_finite())
    {
        return Err(Error::Validation("areas must be finite and >= 0".into()));
    }
    Ok(label)
}

/// Read every record of a `labels.jsonl` file; blank lines are ignored.
pub fn read_labels(path: &Path) -> Result<Vec<SynthLabel>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            parse_label_line(&line)
                .map_err(|e| Error::parse("labels.jsonl", format!("line {}: {e}", no + 1)))?,
        );
    }
    Ok(out)
}
