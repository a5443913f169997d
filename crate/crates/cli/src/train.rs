use std::fs;
use std::path::Path;

use anyhow::{bail, Result};

use agglom_core::features::fit_normalizer;
use agglom_core::ffnn::{CostKind, EpochRecord, TrainConfig};
use agglom_core::pipeline::{
    dataset_features, train_area_net, train_number_net, BundleMeta, FeatureSet, ModelBundle,
};
use agglom_core::seed::derive;
use agglom_core::synth::{RenderConfig, SynthConfig, MAX_MEASURED_PRIMARIES};

use crate::manifest::{create_out, write_manifest, write_text};
use crate::synth::RESOLVED_CONFIG;
use crate::{patience, NetKind, TrainArgs};

#[derive(serde::Serialize)]
struct Config<'a> {
    dataset: String,
    net: NetKind,
    epochs: usize,
    patience: Option<usize>,
    area_scale: f64,
    trained: &'a [String],
}

/// Largest synthesized primary area of the dataset's configuration.
pub fn area_scale(dataset: &Path) -> Result<f64> {
    let p = dataset.join(RESOLVED_CONFIG);
    if p.exists() {
        Ok(SynthConfig::from_toml(&fs::read_to_string(&p)?)?
            .render
            .area_max)
    } else {
        log::warn!("{} missing; using the default area range", p.display());
        Ok(RenderConfig::default().area_max)
    }
}

fn history_csv(history: &[EpochRecord]) -> String {
    let cell = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    let mut s = String::from("epoch,train,val,test\n");
    for r in history {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.epoch,
            r.train,
            cell(r.val),
            cell(r.test)
        ));
    }
    s
}

fn count_class(set: &FeatureSet, k: usize) -> usize {
    set.labels.iter().filter(|l| l.class == k).count()
}

pub fn run(a: TrainArgs) -> Result<()> {
    let set = dataset_features(&a.dataset)?;
    if set.len() < 3 {
        bail!(
            "dataset {} has only {} usable images",
            a.dataset.display(),
            set.len()
        );
    }
    if !set.skipped.is_empty() {
        log::warn!(
            "{} images without an interior region were skipped",
            set.skipped.len()
        );
    }
    create_out(&a.out)?;
    let mut bundle = if a.out.join("normalizer.json").exists() {
        ModelBundle::load(&a.out)?
    } else {
        let mut meta = BundleMeta::new(area_scale(&a.dataset)?);
        meta.seed = Some(a.seed);
        ModelBundle::new(fit_normalizer(&set.features)?, meta)
    };
    let patience = patience(a.patience);
    let mut trained = Vec::new();

    if matches!(a.net, NetKind::Number | NetKind::All) {
        let cfg = TrainConfig::new(CostKind::Ce, a.epochs, patience);
        let t = train_number_net(&set, &bundle.ranges, &cfg, derive(a.seed, 0))?;
        write_text(
            &a.out.join("history_number.csv"),
            &history_csv(&t.outcome.history),
        )?;
        log::info!("number net: best epoch {}", t.outcome.best_epoch);
        bundle.set_number_net(t.outcome.net)?;
        trained.push("number".to_string());
    }
    let ks: Vec<usize> = match a.net {
        NetKind::Area(k) => vec![k],
        NetKind::All => (1..=MAX_MEASURED_PRIMARIES).collect(),
        NetKind::Number => Vec::new(),
    };
    for k in ks {
        if count_class(&set, k) < 3 {
            if a.net == NetKind::All {
                log::warn!("class {k} has fewer than 3 samples; area net {k} not trained");
                continue;
            }
            bail!("class {k} has fewer than 3 samples");
        }
        let cfg = TrainConfig::new(CostKind::Mse, a.epochs, patience);
        let t = train_area_net(
            &set,
            k,
            &bundle.ranges,
            bundle.meta.area_scale,
            &cfg,
            derive(a.seed, k as u64),
        )?;
        write_text(
            &a.out.join(format!("history_area_{k}.csv")),
            &history_csv(&t.outcome.history),
        )?;
        bundle.set_area_net(k, t.outcome.net)?;
        trained.push(format!("area:{k}"));
    }
    bundle.save(&a.out)?;
    let cfg = Config {
        dataset: a.dataset.display().to_string(),
        net: a.net,
        epochs: a.epochs,
        patience,
        area_scale: bundle.meta.area_scale,
        trained: &trained,
    };
    write_manifest(&a.out, "train", Some(a.seed), &cfg)?;
    crate::emit(&format!(
        "trained {} into {}",
        trained.join(", "),
        a.out.display()
    ));
    Ok(())
}
