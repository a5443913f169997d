//! Measurement route: segment, classify the primary count, regress the
//! primary areas, summarize the size distribution.

mod stats;
mod sweep;
mod training;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::{extract_features, normalize, segment, FeatureRanges, NUM_FEATURES};
use crate::ffnn::{argmax, load_model, save_model, Activation, Network, Topology};
use crate::raster::io::read_image;
use crate::raster::GrayImage;
use crate::synth::{MAX_MEASURED_PRIMARIES, NUM_CLASSES};
use crate::{Error, Result};

pub use stats::{
    classification_metrics, equivalent_diameter, histogram_csv, histogram_svg, log_histogram,
    psd_stats, relative_errors, ClassificationMetrics, HistogramBin, PsdStats, RelErrors,
};
pub use sweep::{
    rational_fit, sweep_csv, sweep_hidden_neurons, sweep_sample_count, RationalFitParams,
    RulesOfThumb, SweepConfig, SweepRow,
};
pub use training::{
    area_targets, dataset_features, main_region_features, synthesize_features, train_area_net,
    train_number_net, FeatureSet, FeatureSkip, TrainedNet,
};

/// Hidden sizes of the area networks for classes 1 to 5.
pub const AREA_HIDDEN: [usize; MAX_MEASURED_PRIMARIES] = [11, 124, 104, 29, 19];
pub const NUMBER_HIDDEN: usize = 39;
/// Regions smaller than this (px²) are ignored during measurement.
pub const DEFAULT_MIN_REGION_AREA: f64 = 100.0;

pub fn number_topology() -> Topology {
    Topology::new(
        NUM_FEATURES,
        &[NUMBER_HIDDEN],
        NUM_CLASSES,
        Activation::Tanh,
        Activation::Softmax,
    )
    .expect("fixed topology is valid")
}

pub fn area_topology(k: usize) -> Result<Topology> {
    if !(1..=MAX_MEASURED_PRIMARIES).contains(&k) {
        return Err(Error::ExcludedClass(k));
    }
    Topology::new(
        NUM_FEATURES,
        &[AREA_HIDDEN[k - 1]],
        k,
        Activation::Tanh,
        Activation::Identity,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleMeta {
    /// Area net outputs are multiplied by this to get px².
    pub area_scale: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_min_region_area")]
    pub min_region_area: f64,
}

fn default_min_region_area() -> f64 {
    DEFAULT_MIN_REGION_AREA
}

impl BundleMeta {
    pub fn new(area_scale: f64) -> Self {
        BundleMeta {
            area_scale,
            seed: None,
            min_region_area: DEFAULT_MIN_REGION_AREA,
        }
    }
}

/// Normalizer plus the number network and the five area networks.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub ranges: FeatureRanges,
    pub number_net: Option<Network>,
    pub area_nets: [Option<Network>; MAX_MEASURED_PRIMARIES],
    pub meta: BundleMeta,
}

const NORMALIZER: &str = "normalizer.json";
const NUMBER_NET: &str = "number_net.json";
const META: &str = "meta.json";

fn area_net_file(k: usize) -> String {
    format!("area_net_{k}.json")
}

impl ModelBundle {
    pub fn new(ranges: FeatureRanges, meta: BundleMeta) -> Self {
        ModelBundle {
            ranges,
            number_net: None,
            area_nets: Default::default(),
            meta,
        }
    }

    pub fn set_number_net(&mut self, net: Network) -> Result<()> {
        if net.topology() != &number_topology() {
            return Err(Error::Validation(
                "number net must be 13-39-6 tanh/softmax".into(),
            ));
        }
        self.number_net = Some(net);
        Ok(())
    }

    pub fn set_area_net(&mut self, k: usize, net: Network) -> Result<()> {
        if net.topology() != &area_topology(k)? {
            return Err(Error::Validation(format!(
                "area net {k} must be 13-{}-{k} tanh/identity",
                AREA_HIDDEN[k - 1]
            )));
        }
        self.area_nets[k - 1] = Some(net);
        Ok(())
    }

    /// Write the bundle files into `dir`; absent networks are not written.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(p, e))
        };
        write(NORMALIZER, self.ranges.to_json())?;
        write(
            META,
            serde_json::to_string_pretty(&self.meta).expect("plain data serializes"),
        )?;
        if let Some(net) = &self.number_net {
            save_model(net, &dir.join(NUMBER_NET))?;
        }
        for (i, net) in self.area_nets.iter().enumerate() {
            if let Some(net) = net {
                save_model(net, &dir.join(area_net_file(i + 1)))?;
            }
        }
        Ok(())
    }

    /// Load a bundle directory. The normalizer and meta file are required;
    /// missing networks load as `None`.
    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(|e| Error::io(p, e))
        };
        let ranges = FeatureRanges::from_json(&read(NORMALIZER)?)?;
        let meta: BundleMeta =
            serde_json::from_str(&read(META)?).map_err(|e| Error::parse("meta.json", e))?;
        if !(meta.area_scale > 0.0 && meta.area_scale.is_finite()) {
            return Err(Error::Validation("area_scale must be positive".into()));
        }
        let mut bundle = ModelBundle::new(ranges, meta);
        let p = dir.join(NUMBER_NET);
        if p.exists() {
            bundle.set_number_net(load_model(&p)?)?;
        }
        for k in 1..=MAX_MEASURED_PRIMARIES {
            let p = dir.join(area_net_file(k));
            if p.exists() {
                bundle.set_area_net(k, load_model(&p)?)?;
            }
        }
        Ok(bundle)
    }

    /// Class `1..=6` and the softmax probabilities. Ties go to the smaller
    /// class.
    pub fn classify_count(&self, features: &[f64; NUM_FEATURES]) -> Result<(usize, Vec<f64>)> {
        let net = self
            .number_net
            .as_ref()
            .ok_or_else(|| Error::State("number net not loaded".into()))?;
        let p = net.forward(features)?;
        Ok((argmax(&p) + 1, p))
    }

    /// `k` primary areas in px², at least 1, sorted descending.
    pub fn regress_areas(&self, features: &[f64; NUM_FEATURES], k: usize) -> Result<Vec<f64>> {
        if !(1..=MAX_MEASURED_PRIMARIES).contains(&k) {
            return Err(Error::ExcludedClass(k));
        }
        let net = self.area_nets[k - 1]
            .as_ref()
            .ok_or_else(|| Error::State(format!("area net {k} not loaded")))?;
        let mut out: Vec<f64> = net
            .forward(features)?
            .into_iter()
            .map(|v| (v * self.meta.area_scale).max(1.0))
            .collect();
        out.sort_by(|a, b| b.total_cmp(a));
        Ok(out)
    }

    /// Measure one image: every interior region of at least
    /// `min_region_area` px² is classified and, unless class 6, regressed.
    pub fn measure_image(&self, img: &GrayImage) -> Result<Vec<RegionResult>> {
        if self.number_net.is_none() {
            return Err(Error::State("number net not loaded".into()));
        }
        let seg = segment(img);
        let pixels = seg.labels.region_pixels();
        let mut out = Vec::new();
        for label in seg.interior_regions() {
            let area = pixels[label as usize - 1].len() as f64;
            if area < self.meta.min_region_area {
                continue;
            }
            let f = extract_features(img, &seg.labels, label)?;
            let x = normalize(&f, &self.ranges);
            let (class, probabilities) = self.classify_count(&x)?;
            let areas = if class <= MAX_MEASURED_PRIMARIES {
                self.regress_areas(&x, class)?
            } else {
                Vec::new()
            };
            out.push(RegionResult {
                region_area: area,
                class,
                probabilities,
                areas,
            });
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionResult {
    /// Segmented region area, px².
    pub region_area: f64,
    pub class: usize,
    pub probabilities: Vec<f64>,
    /// Empty for class 6.
    pub areas: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditStatus {
    /// At least one region contributed areas.
    Included,
    /// No region contributed: only class-6 regions, or none measurable.
    Excluded,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageAudit {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub status: AuditStatus,
    pub regions: Vec<RegionResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    /// All regressed primary areas, px², in image then region order.
    pub areas: Vec<f64>,
    pub audits: Vec<ImageAudit>,
}

impl Measurement {
    pub fn count(&self, status: AuditStatus) -> usize {
        self.audits.iter().filter(|a| a.status == status).count()
    }
}

fn audit_of(index: usize, path: Option<PathBuf>, r: Result<Vec<RegionResult>>) -> ImageAudit {
    match r {
        Ok(regions) => {
            let status = if regions.iter().any(|r| !r.areas.is_empty()) {
                AuditStatus::Included
            } else {
                AuditStatus::Excluded
            };
            ImageAudit {
                index,
                path,
                status,
                regions,
                error: None,
            }
        }
        Err(e) => ImageAudit {
            index,
            path,
            status: AuditStatus::Error,
            regions: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

fn collect(audits: Vec<ImageAudit>) -> Measurement {
    let areas = audits
        .iter()
        .flat_map(|a| a.regions.iter().flat_map(|r| r.areas.iter().copied()))
        .collect();
    Measurement { areas, audits }
}

/// Measure images in parallel; results are in input order.
pub fn measure_sample(bundle: &ModelBundle, images: &[GrayImage]) -> Result<Measurement> {
    if bundle.number_net.is_none() {
        return Err(Error::State("number net not loaded".into()));
    }
    let audits = images
        .par_iter()
        .enumerate()
        .map(|(i, img)| audit_of(i, None, bundle.measure_image(img)))
        .collect();
    Ok(collect(audits))
}

/// Like [`measure_sample`] but reading each image from disk; unreadable
/// files become error records.
pub fn measure_paths(bundle: &ModelBundle, paths: &[PathBuf]) -> Result<Measurement> {
    if bundle.number_net.is_none() {
        return Err(Error::State("number net not loaded".into()));
    }
    let audits = paths
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            audit_of(
                i,
                Some(p.clone()),
                read_image(p).and_then(|img| bundle.measure_image(&img)),
            )
        })
        .collect();
    Ok(collect(audits))
}

#[cfg(test)]
mod tests {
    use ndarray::{Array1, Array2};

    use super::*;
    use crate::features::{fit_normalizer, RegionFeatures};
    use crate::ffnn::{init_weights, Layer};

    fn ranges() -> FeatureRanges {
        fit_normalizer(&[
            RegionFeatures::from_array([0.0; 13]),
            RegionFeatures::from_array([1.0; 13]),
        ])
        .unwrap()
    }

    /// Number net whose output is a constant distribution with `logits`.
    fn constant_number_net(logits: [f64; 6]) -> Network {
        let t = number_topology();
        let layers = vec![
            Layer {
                weights: Array2::zeros((39, 13)),
                biases: Array1::zeros(39),
                activation: Activation::Tanh,
            },
            Layer {
                weights: Array2::zeros((6, 39)),
                biases: Array1::from(logits.to_vec()),
                activation: Activation::Softmax,
            },
        ];
        Network::from_layers(t, layers).unwrap()
    }

    fn constant_area_net(k: usize, outs: &[f64]) -> Network {
        let t = area_topology(k).unwrap();
        let h = AREA_HIDDEN[k - 1];
        let layers = vec![
            Layer {
                weights: Array2::zeros((h, 13)),
                biases: Array1::zeros(h),
                activation: Activation::Tanh,
            },
            Layer {
                weights: Array2::zeros((k, h)),
                biases: Array1::from(outs.to_vec()),
                activation: Activation::Identity,
            },
        ];
        Network::from_layers(t, layers).unwrap()
    }

    fn bundle(logits: [f64; 6]) -> ModelBundle {
        let mut b = ModelBundle::new(ranges(), BundleMeta::new(1000.0));
        b.set_number_net(constant_number_net(logits)).unwrap();
        for k in 1..=5 {
            let outs: Vec<f64> = (0..k).map(|i| 0.1 * (i + 1) as f64).collect();
            b.set_area_net(k, constant_area_net(k, &outs)).unwrap();
        }
        b
    }

    #[test]
    fn classify_ties_and_probabilities() {
        let b = bundle([0.0, 2.0, 2.0, 0.0, 0.0, 0.0]);
        let (c, p) = b.classify_count(&[0.3; 13]).unwrap();
        assert_eq!(c, 2);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let empty = ModelBundle::new(ranges(), BundleMeta::new(1.0));
        assert!(matches!(
            empty.classify_count(&[0.0; 13]),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn regress_denormalizes_and_sorts() {
        let b = bundle([0.0; 6]);
        let a = b.regress_areas(&[0.0; 13], 3).unwrap();
        assert_eq!(a.len(), 3);
        assert!((a[0] - 300.0).abs() < 1e-9 && (a[2] - 100.0).abs() < 1e-9);
        assert!(matches!(
            b.regress_areas(&[0.0; 13], 6),
            Err(Error::ExcludedClass(6))
        ));
        let mut low = ModelBundle::new(ranges(), BundleMeta::new(1000.0));
        low.set_area_net(1, constant_area_net(1, &[-0.5])).unwrap();
        assert_eq!(low.regress_areas(&[0.0; 13], 1).unwrap(), vec![1.0]);
    }

    #[test]
    fn topology_mismatch_rejected() {
        let mut b = ModelBundle::new(ranges(), BundleMeta::new(1.0));
        let wrong = init_weights(&area_topology(2).unwrap(), &mut crate::seed::rng(1)).unwrap();
        assert!(b.set_area_net(3, wrong.clone()).is_err());
        assert!(b.set_number_net(wrong).is_err());
    }

    #[test]
    fn bundle_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = ModelBundle::new(ranges(), BundleMeta::new(6500.0));
        b.set_number_net(init_weights(&number_topology(), &mut crate::seed::rng(3)).unwrap())
            .unwrap();
        b.set_area_net(
            2,
            init_weights(&area_topology(2).unwrap(), &mut crate::seed::rng(4)).unwrap(),
        )
        .unwrap();
        b.save(dir.path()).unwrap();
        let back = ModelBundle::load(dir.path()).unwrap();
        assert_eq!(back, b);
        assert!(back.area_nets[0].is_none());
    }

    fn disk(cx: f64, cy: f64, r: f64) -> GrayImage {
        GrayImage::from_fn(64, 64, |x, y| {
            if (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r {
                0.2
            } else {
                1.0
            }
        })
    }

    #[test]
    fn measurement_bookkeeping() {
        let imgs = vec![
            disk(32.0, 32.0, 10.0),
            disk(32.0, 32.0, 12.0),
            GrayImage::constant(64, 64, 1.0),
        ];
        let one = bundle([5.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let m = measure_sample(&one, &imgs).unwrap();
        assert_eq!(m.areas.len(), 2);
        assert_eq!(
            (
                m.count(AuditStatus::Included),
                m.count(AuditStatus::Excluded)
            ),
            (2, 1)
        );
        let six = bundle([0.0, 0.0, 0.0, 0.0, 0.0, 5.0]);
        let m = measure_sample(&six, &imgs).unwrap();
        assert!(m.areas.is_empty());
        assert_eq!(m.count(AuditStatus::Excluded), 3);
        assert_eq!(m.audits[0].regions[0].class, 6);
    }

    #[test]
    fn unreadable_paths_are_audited() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("a.pgm");
        crate::raster::io::write_image(&good, &disk(32.0, 32.0, 10.0)).unwrap();
        let bad = dir.path().join("missing.png");
        let m = measure_paths(&bundle([5.0, 0.0, 0.0, 0.0, 0.0, 0.0]), &[good, bad]).unwrap();
        assert_eq!(
            m.count(AuditStatus::Included) + m.count(AuditStatus::Error),
            2
        );
        assert_eq!(m.count(AuditStatus::Error), 1);
        assert!(m.audits[1].error.is_some());
    }
}
