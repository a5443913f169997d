use std::collections::BTreeMap;
use std::fs;

use anyhow::{bail, Context, Result};

use agglom_core::distortion::DistortionDistributions;
use agglom_core::synth::{parse_counts, synthesize_dataset, SynthConfig, NUM_CLASSES};

use crate::manifest::{create_out, write_json, write_manifest, write_text};
use crate::SynthArgs;

/// Resolved configuration copied into the dataset directory.
pub const RESOLVED_CONFIG: &str = "synth_config.toml";

pub fn run(a: SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SynthConfig::from_toml(&text)?
        }
        None => SynthConfig::default(),
    };
    if let Some(p) = &a.distortions {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        cfg.distortions = DistortionDistributions::from_json(&text)?;
    }
    let counts = match &a.counts {
        Some(c) => parse_counts(c)?,
        None => cfg.counts()?,
    };
    if counts.total() == 0 {
        bail!("no images requested: pass --counts or a [classes] table");
    }
    cfg.classes = (1..=NUM_CLASSES)
        .map(|k| (k.to_string(), counts.get(k)))
        .collect::<BTreeMap<_, _>>();
    let render = cfg.render_config()?;

    create_out(&a.out)?;
    let summary = synthesize_dataset(&render, &counts, a.seed, &a.out)?;
    write_text(&a.out.join(RESOLVED_CONFIG), &cfg.to_toml())?;
    write_json(&a.out.join("summary.json"), &summary)?;
    write_manifest(&a.out, "synth", Some(a.seed), &cfg)?;
    if !summary.skipped.is_empty() {
        log::warn!(
            "{} of {} images skipped",
            summary.skipped.len(),
            summary.requested
        );
    }
    crate::emit(&format!(
        "wrote {} images to {}",
        summary.written,
        a.out.display()
    ));
    Ok(())
}
