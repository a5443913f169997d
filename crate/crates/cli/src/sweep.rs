use anyhow::{bail, Result};
use ndarray::Array2;

use agglom_core::features::{fit_normalizer, NUM_FEATURES};
use agglom_core::ffnn::{CostKind, Samples, TrainConfig};
use agglom_core::pipeline::{
    area_targets, area_topology, dataset_features, number_topology, rational_fit, sweep_csv,
    sweep_hidden_neurons, sweep_sample_count, RulesOfThumb, SweepConfig,
};
use agglom_core::seed::derive;
use agglom_core::synth::NUM_CLASSES;

use crate::manifest::{create_out, write_json, write_manifest, write_text};
use crate::train::area_scale;
use crate::{patience, NetKind, SweepArgs, SweepKind};

#[derive(serde::Serialize)]
struct Config<'a> {
    kind: SweepKind,
    dataset: String,
    net: NetKind,
    grid: &'a [usize],
    sweep: &'a SweepConfig,
}

pub fn run(a: SweepArgs) -> Result<()> {
    let set = dataset_features(&a.dataset)?;
    if set.len() < 3 {
        bail!("dataset has only {} usable images", set.len());
    }
    let ranges = fit_normalizer(&set.features)?;
    let (topology, cost, subset) = match a.net {
        NetKind::Number => (number_topology(), CostKind::Ce, set),
        NetKind::Area(k) => {
            let rows: Vec<usize> = (0..set.len())
                .filter(|&i| set.labels[i].class == k)
                .collect();
            (area_topology(k)?, CostKind::Mse, set.select(&rows))
        }
        NetKind::All => bail!("--net all is not valid for sweeps"),
    };
    let inputs = subset.normalized(&ranges);
    let targets = match a.net {
        NetKind::Number => Samples::one_hot(&subset.classes(), NUM_CLASSES)?,
        _ => {
            let scale = area_scale(&a.dataset)?;
            let n_out = topology.n_output;
            let mut t = Array2::zeros((subset.len(), n_out));
            for (i, l) in subset.labels.iter().enumerate() {
                for (j, v) in area_targets(l, scale).into_iter().enumerate() {
                    t[(i, j)] = v;
                }
            }
            t
        }
    };
    let data = Samples::new(inputs, targets)?;
    let cfg = SweepConfig {
        seeds: (0..a.seeds as u64).map(|i| derive(a.seed, i)).collect(),
        train: TrainConfig::new(cost, a.epochs, patience(a.patience)),
    };
    let rows = match a.kind {
        SweepKind::Samples => {
            sweep_sample_count(&topology, &data, &subset.classes(), &a.grid, &cfg)?
        }
        SweepKind::Hidden => sweep_hidden_neurons(&topology, &data, &a.grid, &cfg)?,
    };

    create_out(&a.out)?;
    write_text(&a.out.join("sweep.csv"), &sweep_csv(&rows))?;
    if a.kind == SweepKind::Hidden {
        write_json(
            &a.out.join("rules.json"),
            &RulesOfThumb::new(NUM_FEATURES, topology.n_output),
        )?;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.mean.is_finite())
        .map(|r| (r.x as f64, r.mean))
        .unzip();
    if xs.len() >= 6 {
        write_json(&a.out.join("fit.json"), &rational_fit(&xs, &ys)?)?;
    } else {
        log::info!("fewer than 6 grid points; rational fit skipped");
    }
    let c = Config {
        kind: a.kind,
        dataset: a.dataset.display().to_string(),
        net: a.net,
        grid: &a.grid,
        sweep: &cfg,
    };
    write_manifest(&a.out, "sweep", Some(a.seed), &c)?;
    crate::emit(&format!(
        "{} grid points written to {}",
        rows.len(),
        a.out.display()
    ));
    Ok(())
}
