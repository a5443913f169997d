use anyhow::Result;
use rayon::prelude::*;

use agglom_core::distortion::{build_blur_calibration, estimate_distortion_distributions};
use agglom_core::features::segment;
use agglom_core::raster::io::read_image;

use crate::manifest::{create_out, write_json, write_manifest, write_text};
use crate::{file_name, list_images, DistortionArgs};

#[derive(serde::Serialize)]
struct Config {
    images: Vec<String>,
    reference: String,
    sigmas: Vec<f64>,
}

pub fn run(a: DistortionArgs) -> Result<()> {
    let paths = list_images(&a.images)?;
    let reference = read_image(&a.reference)?;
    let calibration = build_blur_calibration(&reference, &a.sigmas)?;
    let corpus = paths
        .par_iter()
        .map(|p| read_image(p))
        .collect::<agglom_core::Result<Vec<_>>>()?;
    let masks: Vec<_> = corpus.par_iter().map(|img| segment(img).filled).collect();
    let dist = estimate_distortion_distributions(&corpus, &masks, &calibration)?;

    create_out(&a.out)?;
    write_text(&a.out.join("distortions.json"), &dist.to_json())?;
    let curve: Vec<[f64; 2]> = calibration
        .sigmas()
        .iter()
        .zip(calibration.focus())
        .map(|(s, f)| [*s, *f])
        .collect();
    write_json(&a.out.join("calibration.json"), &curve)?;
    let cfg = Config {
        images: paths.iter().map(|p| file_name(p)).collect(),
        reference: a.reference.display().to_string(),
        sigmas: a.sigmas.clone(),
    };
    write_manifest(&a.out, "analyze-distortions", None, &cfg)?;
    crate::emit(&format!(
        "analyzed {} images into {}",
        corpus.len(),
        a.out.display()
    ));
    Ok(())
}
