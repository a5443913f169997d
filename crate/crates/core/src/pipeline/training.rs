use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{area_topology, number_topology};
use crate::features::{
    extract_features, normalize, segment, FeatureRanges, RegionFeatures, NUM_FEATURES,
};
use crate::ffnn::{
    init_weights, scg_train, split_data, DataSplit, Samples, TrainConfig, TrainOutcome,
};
use crate::raster::io::read_image;
use crate::raster::GrayImage;
use crate::synth::{
    read_labels, synthesize_sample, ClassCounts, RenderConfig, SynthLabel, NUM_CLASSES,
};
use crate::{seed, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSkip {
    pub index: usize,
    pub reason: String,
}

/// Main-region features with their ground truth, one row per usable image.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureSet {
    pub features: Vec<RegionFeatures>,
    pub labels: Vec<SynthLabel>,
    /// Dataset index of each row.
    pub indices: Vec<usize>,
    pub skipped: Vec<FeatureSkip>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn classes(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.class).collect()
    }

    pub fn select(&self, rows: &[usize]) -> FeatureSet {
        FeatureSet {
            features: rows.iter().map(|&r| self.features[r]).collect(),
            labels: rows.iter().map(|&r| self.labels[r].clone()).collect(),
            indices: rows.iter().map(|&r| self.indices[r]).collect(),
            skipped: Vec::new(),
        }
    }

    pub fn normalized(&self, ranges: &FeatureRanges) -> Array2<f64> {
        let mut x = Array2::zeros((self.len(), NUM_FEATURES));
        for (i, f) in self.features.iter().enumerate() {
            for (j, v) in normalize(f, ranges).into_iter().enumerate() {
                x[(i, j)] = v;
            }
        }
        x
    }

    fn from_results(results: Vec<(usize, Result<(RegionFeatures, SynthLabel)>)>) -> FeatureSet {
        let mut set = FeatureSet::default();
        for (index, r) in results {
            match r {
                Ok((f, l)) => {
                    set.features.push(f);
                    set.labels.push(l);
                    set.indices.push(index);
                }
                Err(e) => {
                    log::debug!("sample {index} skipped: {e}");
                    set.skipped.push(FeatureSkip {
                        index,
                        reason: e.to_string(),
                    });
                }
            }
        }
        set
    }
}

/// Features of the largest interior region.
pub fn main_region_features(img: &GrayImage) -> Result<RegionFeatures> {
    let seg = segment(img);
    let label = seg
        .main_region()
        .ok_or_else(|| Error::invalid("no interior foreground region"))?;
    extract_features(img, &seg.labels, label)
}

/// Read a synthetic dataset directory (`labels.jsonl` plus images) and
/// extract main-region features in label order.
pub fn dataset_features(dir: &Path) -> Result<FeatureSet> {
    let labels = read_labels(&dir.join("labels.jsonl"))?;
    let results = labels
        .into_par_iter()
        .enumerate()
        .map(|(i, l)| {
            let r = read_image(&dir.join(&l.file)).and_then(|img| main_region_features(&img));
            (i, r.map(|f| (f, l)))
        })
        .collect();
    Ok(FeatureSet::from_results(results))
}

/// Synthesize images in memory and keep only their features. Image `i` uses
/// the same seed as in a dataset written with the same arguments.
pub fn synthesize_features(
    cfg: &RenderConfig,
    counts: &ClassCounts,
    master_seed: u64,
) -> Result<FeatureSet> {
    cfg.validate()?;
    let areas = cfg.uniform_areas();
    let results = (0..counts.total())
        .into_par_iter()
        .map(|i| {
            let class = counts.class_at(i).expect("index below total");
            let r = synthesize_sample(cfg, class, seed::derive(master_seed, i as u64), &areas)
                .and_then(|s| Ok((main_region_features(&s.image)?, s.label)));
            (i, r)
        })
        .collect();
    Ok(FeatureSet::from_results(results))
}

/// Regression target of an agglomerate: areas sorted descending over
/// `area_scale`.
pub fn area_targets(label: &SynthLabel, area_scale: f64) -> Vec<f64> {
    let mut a: Vec<f64> = label.areas_px2.iter().map(|v| v / area_scale).collect();
    a.sort_by(|x, y| y.total_cmp(x));
    a
}

/// Trained network with the split it was trained on. Split indices refer
/// to `rows`, which index the feature set.
#[derive(Clone, Debug)]
pub struct TrainedNet {
    pub outcome: TrainOutcome,
    pub split: DataSplit,
    pub rows: Vec<usize>,
}

fn train(
    topology: &crate::ffnn::Topology,
    data: &Samples,
    rows: Vec<usize>,
    cfg: &TrainConfig,
    master_seed: u64,
) -> Result<TrainedNet> {
    let split = split_data(data.len(), &mut seed::rng(seed::derive(master_seed, 1)))?;
    let mut net = init_weights(topology, &mut seed::rng(seed::derive(master_seed, 2)))?;
    net.meta.seed = Some(master_seed);
    let outcome = scg_train(&net, data, &split, cfg)?;
    Ok(TrainedNet {
        outcome,
        split,
        rows,
    })
}

/// Train the 13-39-6 classifier on all rows of `set`.
pub fn train_number_net(
    set: &FeatureSet,
    ranges: &FeatureRanges,
    cfg: &TrainConfig,
    master_seed: u64,
) -> Result<TrainedNet> {
    let targets = Samples::one_hot(&set.classes(), NUM_CLASSES)?;
    let data = Samples::new(set.normalized(ranges), targets)?;
    train(
        &number_topology(),
        &data,
        (0..set.len()).collect(),
        cfg,
        master_seed,
    )
}

/// Train the area regressor for class `k` on the rows of that class.
pub fn train_area_net(
    set: &FeatureSet,
    k: usize,
    ranges: &FeatureRanges,
    area_scale: f64,
    cfg: &TrainConfig,
    master_seed: u64,
) -> Result<TrainedNet> {
    let topology = area_topology(k)?;
    if !(area_scale > 0.0) {
        return Err(Error::invalid("area_scale must be positive"));
    }
    let rows: Vec<usize> = (0..set.len())
        .filter(|&i| set.labels[i].class == k)
        .collect();
    let subset = set.select(&rows);
    let mut t = Array2::zeros((rows.len(), k));
    for (i, l) in subset.labels.iter().enumerate() {
        for (j, v) in area_targets(l, area_scale).into_iter().enumerate() {
            t[(i, j)] = v;
        }
    }
    let data = Samples::new(subset.normalized(ranges), t)?;
    train(&topology, &data, rows, cfg, master_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::fit_normalizer;
    use crate::ffnn::CostKind;
    use crate::synth::synthesize_dataset;

    fn small_cfg() -> RenderConfig {
        RenderConfig {
            width: 128,
            height: 128,
            area_min: 300.0,
            area_max: 900.0,
            ..RenderConfig::default()
        }
    }

    #[test]
    fn in_memory_matches_dataset() {
        let cfg = small_cfg();
        let counts = ClassCounts([3, 3, 0, 0, 0, 1]);
        let dir = tempfile::tempdir().unwrap();
        synthesize_dataset(&cfg, &counts, 21, dir.path()).unwrap();
        let disk = dataset_features(dir.path()).unwrap();
        let mem = synthesize_features(&cfg, &counts, 21).unwrap();
        assert_eq!(disk.features, mem.features);
        assert_eq!(disk.classes(), mem.classes());
    }

    #[test]
    fn targets_sorted_and_scaled() {
        let l = SynthLabel {
            file: String::new(),
            class: 3,
            areas_px2: vec![100.0, 300.0, 200.0],
            c_t: 0.1,
            deform: 0.0,
            blur_sigma: 0.0,
            noise_sigma: 0.0,
            illum: [1.0, 0.0, 0.0],
            seed: 0,
        };
        assert_eq!(area_targets(&l, 100.0), vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn training_is_deterministic() {
        let set = synthesize_features(&small_cfg(), &ClassCounts([12, 12, 0, 0, 0, 0]), 4).unwrap();
        let ranges = fit_normalizer(&set.features).unwrap();
        let cfg = TrainConfig::new(CostKind::Ce, 5, Some(6));
        let a = train_number_net(&set, &ranges, &cfg, 9).unwrap();
        let b = train_number_net(&set, &ranges, &cfg, 9).unwrap();
        assert_eq!(a.outcome.history, b.outcome.history);
        assert_eq!(a.outcome.net, b.outcome.net);
        let cfg = TrainConfig::new(CostKind::Mse, 5, Some(6));
        let r = train_area_net(&set, 2, &ranges, 900.0, &cfg, 9).unwrap();
        assert!(r.rows.iter().all(|&i| set.labels[i].class == 2));
        assert_eq!(r.outcome.net.n_output(), 2);
    }
}
